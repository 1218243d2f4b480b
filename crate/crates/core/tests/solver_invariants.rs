use lognls::barycenter::region_of;
use lognls::energy::{EnergyParams, Functional};
use lognls::potential::{Potential, PotentialSpec, WellGeometry};
use lognls::solver::{
    gausson, ground_state, minimize_localized, positivity, seed_well, solve_well, SolveResult,
    SolveStatus, SolverConfig,
};
use lognls::{Error, Grid};

fn double_well(eps: f64) -> (EnergyParams, SolverConfig) {
    let spec = PotentialSpec::multiwell(1, &[vec![0.0], vec![2.0]], 2.0, 0.25).unwrap();
    let geometry = WellGeometry::default_for(spec.wells());
    let mut config = SolverConfig::new(geometry, vec![30.0, 60.0]);
    config.record_history = true;
    (
        EnergyParams::new(eps, Potential::MultiWell(spec)).unwrap(),
        config,
    )
}

fn check_history(r: &SolveResult, params: &EnergyParams, config: &SolverConfig) {
    assert!(!r.history.is_empty());
    let wells = params.potential.wells();
    for pair in r.history.windows(2) {
        // accepted steps never raise the level beyond the roundoff band
        let (a, b) = (pair[0].level, pair[1].level);
        assert!(b <= a + 1e-12 * a, "iter {}: {b} after {a}", pair[1].iter);
    }
    for h in &r.history {
        assert!(
            h.nehari_res <= config.nehari_tol,
            "iter {}: nehari {}",
            h.iter,
            h.nehari_res
        );
        assert!(
            region_of(h.q, &config.geometry, wells).is_interior_of(r.well_index),
            "iter {}: {:?}",
            h.iter,
            h.q
        );
        assert!(h.log_sobolev_gap >= -1e-8);
    }
}

#[test]
fn localized_descent_invariants() {
    let (params, config) = double_well(0.1);
    for well in [1, 2] {
        let grid = Grid::build(1, 30.0, 0.05).unwrap();
        let seed = seed_well(well, &params, &config, &grid).unwrap();
        let r = minimize_localized(&seed, well, &params, &config, &grid).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(r.grad_norm <= config.grad_tol);
        assert!(positivity(&r.u, &r.grid).ok);
        check_history(&r, &params, &config);
        // the Nehari characterization J = ½∫u² at the solution
        let mass = r.grid.mass(&r.u).unwrap();
        assert!((r.level - 0.5 * mass).abs() <= 1e-12 * mass);
    }
}

#[test]
fn continuation_levels_do_not_increase() {
    let (params, config) = double_well(0.1);
    let r = solve_well(2, &params, &config, 1, 0.05).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert_eq!(r.r_final, 60.0);
    let levels: Vec<f64> = r.stages.iter().map(|s| s.level).collect();
    assert_eq!(levels.len(), 2);
    assert!(levels[1] <= levels[0] + 1e-12 * levels[0]);
    assert!(r.continuation.unwrap().stabilized);
}

/// The constant-coefficient ground state is even and close to the Gausson.
#[test]
fn ground_state_symmetry_and_gausson() {
    let grid = Grid::build(1, 10.0, 0.02).unwrap();
    let config = SolverConfig::new(WellGeometry::default_for(&[[0.0, 0.0]]), vec![10.0]);
    let r = ground_state(1.0, &grid, &config).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    let v = r.u.values();
    let n = v.len();
    let peak = r.u.sup_norm();
    for j in 0..n / 2 {
        assert!((v[j] - v[n - 1 - j]).abs() <= 1e-10 * peak);
    }
    let exact = gausson(&grid, 1.0).unwrap();
    let err = r.u.axpy(-1.0, &exact).unwrap().sup_norm() / exact.sup_norm();
    assert!(err <= 1e-3, "{err}");
    let f = Functional::with_potential_values(&grid, vec![1.0; grid.len()]).unwrap();
    assert!(f.nehari_residual(&r.u).unwrap().relative <= 1e-12);
}

#[test]
fn exact_gausson_seed_needs_only_the_discretization_correction() {
    let grid = Grid::build(1, 10.0, 0.01).unwrap();
    let mut config = SolverConfig::new(WellGeometry::default_for(&[[0.0, 0.0]]), vec![10.0]);
    config.grad_tol = 1e-6;
    let r = ground_state(1.0, &grid, &config).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.iterations <= 5, "{} iterations", r.iterations);
    let c0 = 0.5 * std::f64::consts::E.powi(2) * std::f64::consts::PI.sqrt();
    assert!((r.level / c0 - 1.0).abs() <= 1e-3);
}

#[test]
fn seeds_respect_geometry() {
    let (params, config) = double_well(0.1);
    // well 2 sits at x = 20, too close to the boundary of R = 22
    let grid = Grid::build(1, 22.0, 0.05).unwrap();
    assert!(matches!(
        seed_well(2, &params, &config, &grid),
        Err(Error::DomainTooSmall(_))
    ));
    let grid = Grid::build(1, 30.0, 0.05).unwrap();
    assert_eq!(
        seed_well(3, &params, &config, &grid),
        Err(Error::WellIndex(3))
    );
    // at eps = 5 the seed of well 2 is spread over both wells
    let (wide, config) = double_well(5.0);
    assert!(matches!(
        seed_well(2, &wide, &config, &grid),
        Err(Error::SeedOutsideRegion { well: 2, .. })
    ));
}
