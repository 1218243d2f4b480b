use std::f64::consts::E;

use lognls::energy::{entropy_density, f_split, EnergyParams, Functional, DELTA_CAP};
use lognls::potential::{Potential, PotentialSpec};
use lognls::verify::random_field;
use lognls::{Field, Grid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn double_well(eps: f64) -> EnergyParams {
    let spec = PotentialSpec::multiwell(1, &[vec![0.0], vec![2.0]], 2.0, 0.25).unwrap();
    EnergyParams::new(eps, Potential::MultiWell(spec)).unwrap()
}

fn field(seed: u64, grid: &Grid) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_field(grid, &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn splitting_identity(s in prop_oneof![-1e4f64..1e4, -1.0f64..1.0, -1e-3f64..1e-3], delta in 1e-3f64..DELTA_CAP) {
        let v = f_split(s, delta).unwrap();
        let rhs = 0.5 * entropy_density(s);
        let scale = v.f1.abs().max(v.f2.abs()).max(rhs.abs()).max(1e-300);
        prop_assert!(((v.f2 - v.f1) - rhs).abs() <= 1e-10 * scale);
        prop_assert!(v.f1 >= 0.0);
        prop_assert!(v.df1 * s >= 0.0);
        // F2 vanishes on [-δ, δ]
        if s.abs() < delta {
            prop_assert_eq!(v.f2, 0.0);
        }
    }

    #[test]
    fn scaling_identity(seed in any::<u64>(), s in prop_oneof![Just(0.5), Just(E), Just(10.0), 0.1f64..5.0]) {
        let grid = Grid::build(1, 10.0, 0.05).unwrap();
        let f = Functional::new(&grid, &double_well(0.3)).unwrap();
        let u = field(seed, &grid);
        let j = f.energy(&u).unwrap().total;
        let mass = grid.mass(&u).unwrap();
        let lhs = f.energy(&u.scaled(s)).unwrap().total;
        let rhs = s * s * (j - s.ln() * mass);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn nehari_projection_is_idempotent(seed in any::<u64>(), eps in 0.05f64..2.0) {
        let grid = Grid::build(1, 10.0, 0.05).unwrap();
        let f = Functional::new(&grid, &double_well(eps)).unwrap();
        let u = field(seed, &grid);
        let (p, _) = f.project(&u).unwrap();
        prop_assert!((f.nehari_scale(&p).unwrap() - 1.0).abs() <= 1e-12);
        // on the Nehari set J = ½∫u²
        let e = f.energy(&p).unwrap();
        prop_assert!((e.total - 0.5 * e.mass).abs() <= 1e-10 * e.mass);
        // and J(s p) ≤ J(p) for every s > 0
        for s in [0.5, 0.9, 1.1, 2.0] {
            prop_assert!(f.energy(&p.scaled(s)).unwrap().total <= e.total * (1.0 + 1e-12));
        }
    }

    #[test]
    fn breakdown_invariants(seed in any::<u64>()) {
        let grid = Grid::build(2, 4.0, 0.2).unwrap();
        let spec = PotentialSpec::multiwell(2, &[vec![0.0, 0.0], vec![1.0, 1.0]], 3.0, 0.5).unwrap();
        let params = EnergyParams::new(0.4, Potential::MultiWell(spec)).unwrap();
        let f = Functional::new(&grid, &params).unwrap();
        let e = f.energy(&field(seed, &grid)).unwrap();
        prop_assert!((e.total - (e.kinetic + e.potential_term - e.entropy)).abs() <= 1e-12 * e.total.abs().max(e.entropy.abs()));
        prop_assert!((e.norm_eps.powi(2) - 2.0 * (e.kinetic + e.potential_term)).abs() <= 1e-12 * e.norm_eps.powi(2));
    }
}

/// Central differences of `J` against `⟨∇J, v⟩`: the error should fall like t².
#[test]
fn gradient_matches_central_differences() {
    let grid = Grid::build(1, 10.0, 0.05).unwrap();
    let f = Functional::new(&grid, &double_well(0.3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let u = random_field(&grid, &mut rng);
        let w = random_field(&grid, &mut rng);
        let peak = w.sup_norm();
        let v = Field::from_values(
            &grid,
            u.values()
                .iter()
                .zip(w.values())
                .map(|(a, b)| a * (b / peak - 0.5))
                .collect(),
        )
        .unwrap();
        let exact: f64 = f
            .gradient(&u)
            .unwrap()
            .values()
            .iter()
            .zip(v.values())
            .map(|(g, v)| g * v)
            .sum();
        let dirn = |t: f64| {
            let up = f.energy(&u.axpy(t, &v).unwrap()).unwrap().total;
            let dn = f.energy(&u.axpy(-t, &v).unwrap()).unwrap().total;
            (up - dn) / (2.0 * t)
        };
        let errs: Vec<f64> = [1e-3, 5e-4]
            .iter()
            .map(|&t| (dirn(t) - exact).abs())
            .collect();
        assert!(errs[0] / errs[1] >= 3.5, "{errs:?}");
    }
}

#[test]
fn gradient_vanishes_at_zero_and_boundary() {
    let grid = Grid::build(1, 5.0, 0.1).unwrap();
    let f = Functional::new(&grid, &double_well(1.0)).unwrap();
    assert!(f.gradient(&Field::zeros(&grid)).unwrap().is_zero());
    let g = f.gradient(&field(3, &grid)).unwrap();
    assert!(g.satisfies_dirichlet(&grid));
}
