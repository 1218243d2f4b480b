//! Post-hoc checks: weak-form residual against bump probes, the identity
//! suite for the energy pieces, and the audit of a multiplicity run.

use std::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::barycenter::{region_of, Region};
use crate::energy::{
    default_log_sobolev_a, f2_growth_check, f_split, growth_samples, log_sobolev_gap, s_log_s2,
    EnergyParams, Functional, SplitValues,
};
use crate::error::{Error, Result};
use crate::grid::{distance, Field, Grid, Point};
use crate::potential::{Potential, PotentialSpec};
use crate::solver::{
    gausson, ground_level, positivity, MultiplicityRun, Positivity, SolveResult, SolveStatus,
    SolverConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Probe widths (in rescaled length units) are drawn from this range.
const PROBE_WIDTH: (f64, f64) = (0.2, 0.8);
/// Nodes where `|u|` drops below this fraction of its maximum do not widen the probe box.
const SUPPORT_FRACTION: f64 = 1e-6;

/// Cubic B-spline on `[-2, 2]`.
fn bspline(t: f64) -> f64 {
    let a = t.abs();
    if a >= 2.0 {
        0.0
    } else if a >= 1.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0
    }
}

/// Box `[lo, hi]` per axis where probe centres are drawn: the numerical support
/// of `u`, snapped outward to half-units, widened by the largest probe radius,
/// clipped to the grid interior.
fn probe_box(u: &Field, grid: &Grid) -> ([f64; 2], [f64; 2]) {
    let peak = u.sup_norm();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (p, &s) in grid.nodes().iter().zip(u.values()) {
        if s.abs() >= SUPPORT_FRACTION * peak {
            for d in 0..grid.dim() {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
    }
    let reach = 2.0 * PROBE_WIDTH.1;
    let half = grid.margin([0.0, 0.0]) - reach;
    for d in 0..2 {
        if d >= grid.dim() {
            lo[d] = 0.0;
            hi[d] = 0.0;
            continue;
        }
        lo[d] = ((2.0 * lo[d]).floor() / 2.0 - reach).max(-half);
        hi[d] = ((2.0 * hi[d]).ceil() / 2.0 + reach).min(half);
    }
    (lo, hi)
}

/// Largest `|J'(u)v| / ‖u‖_ε` over `probes` tensor B-spline bumps `v` with unit
/// discrete H¹ norm. Probes are seeded by `seed`, so the value is reproducible.
/// A finite probe family only bounds the residual detectable by that family.
pub fn weak_residual(u: &Field, functional: &Functional, probes: usize, seed: u64) -> Result<f64> {
    let grid = functional.grid();
    let e = functional.energy(u)?;
    if !(e.mass > 0.0) {
        return Err(Error::ZeroField);
    }
    let r = functional.residual(u)?;
    let (lo, hi) = probe_box(u, grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let mut c = [0.0; 2];
        for d in 0..grid.dim() {
            c[d] = if hi[d] > lo[d] {
                rng.gen_range(lo[d]..hi[d])
            } else {
                lo[d]
            };
        }
        let width = rng.gen_range(PROBE_WIDTH.0..PROBE_WIDTH.1);
        let dim = grid.dim();
        let v = Field::from_fn(grid, |p| {
            (0..dim).map(|d| bspline((p[d] - c[d]) / width)).product()
        });
        let lap = grid.laplacian(&v)?;
        let h1 = (grid.inner(&v, &lap)? + grid.mass(&v)?).sqrt();
        if !(h1 > 0.0) {
            continue;
        }
        let pairing = grid.inner(&v, &r)?;
        worst = worst.max(pairing.abs() / h1);
    }
    Ok(worst / e.norm_eps)
}

/// Positive sum of one to four Gaussian bumps with widths in `[0.8, 2.5]`,
/// centred within the inner third of the grid.
pub fn random_field(grid: &Grid, rng: &mut impl Rng) -> Field {
    let reach = grid.margin([0.0, 0.0]) / 3.0;
    let bumps: Vec<(Point, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let mut c = [0.0; 2];
            for v in c.iter_mut().take(grid.dim()) {
                *v = rng.gen_range(-reach..reach);
            }
            (c, rng.gen_range(0.8..2.5), rng.gen_range(0.2..3.0))
        })
        .collect();
    Field::from_fn(grid, |p| {
        bumps
            .iter()
            .map(|&(c, w, a)| a * (-0.5 * distance(p, c).powi(2) / (w * w)).exp())
            .sum()
    })
}

/// Whether `worst` is an error bounded above by `tolerance`, or a margin bounded
/// below by `-tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Error,
    Margin,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub samples: usize,
    pub failures: usize,
    /// Worst observed value of the checked quantity (error, or margin for inequalities).
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

impl IdentityCheck {
    /// Distance from the failure threshold; negative when the check fails.
    pub fn slack(&self) -> f64 {
        match self.kind {
            CheckKind::Error => self.tolerance - self.worst,
            CheckKind::Margin => self.worst + self.tolerance,
        }
    }
}

impl IdentityReport {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityConfig {
    pub samples: usize,
    pub fields: usize,
    pub seed: u64,
    pub delta: f64,
    pub p: f64,
    pub split_tol: f64,
    pub seam_tol: f64,
    pub scaling_tol: f64,
    pub idempotence_tol: f64,
    pub log_sobolev_tol: f64,
    pub gausson_tol: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig {
            samples: 1_000_000,
            fields: 100,
            seed: 0,
            delta: crate::energy::DEFAULT_DELTA,
            p: crate::energy::DEFAULT_P,
            split_tol: 1e-10,
            seam_tol: 1e-13,
            scaling_tol: 1e-10,
            idempotence_tol: 1e-12,
            log_sobolev_tol: 1e-8,
            gausson_tol: 1e-3,
        }
    }
}

struct Tally {
    name: &'static str,
    kind: CheckKind,
    samples: usize,
    failures: usize,
    worst: f64,
    tolerance: f64,
}

impl Tally {
    fn errors(name: &'static str, tolerance: f64) -> Self {
        Tally {
            name,
            kind: CheckKind::Error,
            samples: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
        }
    }

    fn margins(name: &'static str, tolerance: f64) -> Self {
        Tally {
            name,
            kind: CheckKind::Margin,
            samples: 0,
            failures: 0,
            worst: f64::INFINITY,
            tolerance,
        }
    }

    /// Records an error that must stay at or below the tolerance.
    fn error(&mut self, e: f64) {
        self.samples += 1;
        if !(e <= self.tolerance) {
            self.failures += 1;
        }
        if !(e <= self.worst) {
            self.worst = e;
        }
    }

    /// Records a margin that must stay at or above `-tolerance`.
    fn margin(&mut self, m: f64) {
        self.samples += 1;
        if !(m >= -self.tolerance) {
            self.failures += 1;
        }
        if !(m >= self.worst) {
            self.worst = m;
        }
    }

    fn finish(self) -> IdentityCheck {
        IdentityCheck {
            name: self.name.to_string(),
            kind: self.kind,
            passed: self.failures == 0 && self.samples > 0,
            samples: self.samples,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tolerance,
        }
    }
}

/// Runs the identity suite with the library's F1/F2 splitting.
pub fn identity_suite(config: &IdentityConfig) -> Result<IdentityReport> {
    f_split(1.0, config.delta)?;
    identity_suite_with(config, &|s, d| {
        f_split(s, d).expect("delta validated above")
    })
}

/// Runs the identity suite against an arbitrary splitting, so that a
/// deliberately broken one can be shown to fail.
pub fn identity_suite_with(
    config: &IdentityConfig,
    split: &(dyn Fn(f64, f64) -> SplitValues + Sync),
) -> Result<IdentityReport> {
    let delta = config.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();

    let mut samples: Vec<f64> = (0..config.samples)
        .map(|_| {
            let mag = rng.gen_range((1e-12f64).ln()..(1e6f64).ln()).exp();
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    samples.extend([delta, -delta, 1.0, -1.0]);

    let mut splitting = Tally::errors("splitting_identity", config.split_tol);
    let mut f1_pos = Tally::margins("f1_nonnegative", 0.0);
    let mut f1_mono = Tally::margins("f1_derivative_sign", 0.0);
    for &s in &samples {
        let v = split(s, delta);
        let rhs = 0.5 * s * s_log_s2(s);
        let scale =
            v.f1.abs()
                .max(v.f2.abs())
                .max(rhs.abs())
                .max(f64::MIN_POSITIVE);
        splitting.error(((v.f2 - v.f1) - rhs).abs() / scale);
        f1_pos.margin(v.f1);
        f1_mono.margin(v.df1 * s);
    }
    checks.extend([splitting.finish(), f1_pos.finish(), f1_mono.finish()]);

    let mut convex = Tally::margins("f1_convexity", 1e-12);
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|s| s.abs() < 1e3).collect();
    sorted.sort_by(f64::total_cmp);
    for pair in sorted.windows(2) {
        let (a, b) = (split(pair[0], delta).df1, split(pair[1], delta).df1);
        convex.margin((b - a) / a.abs().max(b.abs()).max(1.0));
    }
    checks.push(convex.finish());

    let mut seam = Tally::errors("c1_seam", config.seam_tol);
    for d in [delta, -delta] {
        let inner = split(next_toward_zero(d), delta);
        let at = split(d, delta);
        for gap in [
            at.f1 - inner.f1,
            at.f2 - inner.f2,
            at.df1 - inner.df1,
            at.df2 - inner.df2,
        ] {
            seam.error(gap.abs());
        }
    }
    checks.push(seam.finish());

    let growth = f2_growth_check(delta, config.p, &growth_samples(delta, 2000));
    checks.push(IdentityCheck {
        name: "f2_growth".into(),
        kind: CheckKind::Error,
        passed: growth.uniform,
        samples: 2000,
        failures: usize::from(!growth.uniform),
        worst: growth.c,
        tolerance: f64::INFINITY,
    });

    checks.extend(field_identities(config, &mut rng)?);
    checks.push(gausson_check(config)?);
    checks.push(level_gap_check()?);

    let passed = checks.iter().all(|c| c.passed);
    Ok(IdentityReport { checks, passed })
}

fn next_toward_zero(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

fn field_identities(config: &IdentityConfig, rng: &mut ChaCha8Rng) -> Result<Vec<IdentityCheck>> {
    let g1 = Grid::build(1, 10.0, 0.05)?;
    let g2 = Grid::build(2, 6.0, 0.1)?;
    let spec1 = PotentialSpec::multiwell(1, &[vec![0.0], vec![2.0]], 2.0, 0.25)?;
    let spec2 = PotentialSpec::multiwell(2, &[vec![0.0, 0.0], vec![1.0, 1.0]], 2.0, 0.25)?;
    let p1 = EnergyParams::new(0.3, Potential::MultiWell(spec1))?.with_delta(config.delta)?;
    let p2 = EnergyParams::new(0.3, Potential::MultiWell(spec2))?.with_delta(config.delta)?;
    let f1 = Functional::new(&g1, &p1)?;
    let f2 = Functional::new(&g2, &p2)?;

    let mut scaling = Tally::errors("scaling_identity", config.scaling_tol);
    let mut idem = Tally::errors("nehari_idempotence", config.idempotence_tol);
    let mut ls = Tally::margins("log_sobolev", config.log_sobolev_tol);
    let a = default_log_sobolev_a();
    for k in 0..config.fields {
        // every fifth field is two-dimensional
        let f = if k % 5 == 4 { &f2 } else { &f1 };
        let grid = f.grid();
        let u = random_field(grid, rng);
        let j = f.energy(&u)?.total;
        let mass = grid.mass(&u)?;
        for s in [0.5, E, 10.0] {
            let lhs = f.energy(&u.scaled(s))?.total;
            let rhs = s * s * (j - s.ln() * mass);
            scaling.error((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
        }
        let (once, _) = f.project(&u)?;
        let s_twice = f.nehari_scale(&once)?;
        idem.error((s_twice - 1.0).abs());
        ls.margin(log_sobolev_gap(&u, grid, a)? / mass.max(1.0));
    }
    Ok(vec![scaling.finish(), idem.finish(), ls.finish()])
}

fn gausson_check(config: &IdentityConfig) -> Result<IdentityCheck> {
    let grid = Grid::build(1, 10.0, 0.01)?;
    let f = Functional::with_potential_values(&grid, vec![1.0; grid.len()])?;
    let u = gausson(&grid, 1.0)?;
    let mut t = Tally::errors("gausson_weak_residual", config.gausson_tol);
    t.error(weak_residual(&u, &f, 50, config.seed)?);
    Ok(t.finish())
}

fn level_gap_check() -> Result<IdentityCheck> {
    let grid = Grid::build(1, 10.0, 0.05)?;
    let geometry = crate::potential::WellGeometry::default_for(&[[0.0, 0.0]]);
    let config = SolverConfig::new(geometry, vec![10.0]);
    let c0 = ground_level(1.0, &grid, &config)?;
    let c_inf = ground_level(2.0, &grid, &config)?;
    let mut t = Tally::margins("level_gap", 0.0);
    t.margin(c_inf - c0);
    let mut check = t.finish();
    check.passed &= c_inf > c0;
    Ok(check)
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditTolerances {
    pub grad_tol: f64,
    pub nehari_tol: f64,
    pub weak_tol: f64,
    pub distinct_rel_l2: f64,
    pub underflow_floor: f64,
    pub boundary_band: f64,
    pub probes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Levels {
    pub c0: f64,
    pub c_inf: f64,
    pub gamma: f64,
    /// `c0 + gamma`
    pub ceiling: f64,
    pub alphas: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WellAudit {
    pub well: usize,
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
    pub level: Option<f64>,
    pub barycenter: Option<Point>,
    pub distance_to_well: Option<f64>,
    pub region: Option<Region>,
    pub nehari_res: Option<f64>,
    pub characterization_gap: Option<f64>,
    pub grad_norm: Option<f64>,
    pub weak_res: Option<f64>,
    pub r_final: Option<f64>,
    pub iterations: Option<usize>,
    pub positivity: Option<Positivity>,
    pub stabilized: Option<bool>,
    pub localized: bool,
    pub separation_ok: bool,
    pub nehari_ok: bool,
    pub weak_ok: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairAudit {
    pub wells: (usize, usize),
    pub barycenter_distance: f64,
    pub balls_disjoint: bool,
    pub relative_l2: f64,
    pub distinct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub eps: f64,
    pub tolerances: AuditTolerances,
    pub levels: Levels,
    pub gap_ok: bool,
    pub wells: Vec<WellAudit>,
    pub pairs: Vec<PairAudit>,
    pub all_converged: bool,
    pub localization_failures: Vec<usize>,
    pub positivity_ok: bool,
    pub separation_ok: bool,
    pub nehari_ok: bool,
    pub distinct_ok: bool,
    /// Largest weak residual among converged wells.
    pub weak_res: f64,
    pub probe_note: String,
    /// Checks on converged wells, level gap and distinctness all hold.
    pub passed: bool,
    /// `passed` and every well converged.
    pub success: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn audit_well(
    result: &SolveResult,
    wells: &[Point],
    config: &SolverConfig,
    ceiling: f64,
) -> Result<WellAudit> {
    let pos = positivity(&result.u, &result.grid);
    let region = region_of(result.barycenter, &config.geometry, wells);
    let mass = result.grid.mass(&result.u)?;
    let char_gap = (result.level - 0.5 * mass).abs();
    let localized = region.is_interior_of(result.well_index);
    let separation_ok = result.level < ceiling;
    let nehari_ok =
        result.nehari_res <= config.nehari_tol && char_gap <= config.nehari_tol * mass.max(1.0);
    let weak_ok = result.weak_res <= config.weak_tol;
    let converged = result.status == SolveStatus::Converged;
    Ok(WellAudit {
        well: result.well_index,
        status: Some(result.status),
        error: None,
        level: Some(result.level),
        barycenter: Some(result.barycenter),
        distance_to_well: wells
            .get(result.well_index.wrapping_sub(1))
            .map(|&z| distance(result.barycenter, z)),
        region: Some(region),
        nehari_res: Some(result.nehari_res),
        characterization_gap: Some(char_gap),
        grad_norm: Some(result.grad_norm),
        weak_res: Some(result.weak_res),
        r_final: Some(result.r_final),
        iterations: Some(result.iterations),
        positivity: Some(pos),
        stabilized: result.continuation.map(|c| c.stabilized),
        localized,
        separation_ok,
        nehari_ok,
        weak_ok,
        passed: converged && pos.ok && localized && separation_ok && nehari_ok && weak_ok,
    })
}

/// `‖u − v‖ / max(‖u‖, ‖v‖)` after zero-extending both onto the larger grid.
fn relative_l2(a: &SolveResult, b: &SolveResult) -> Result<f64> {
    let (big, small) = if a.grid.len() >= b.grid.len() {
        (a, b)
    } else {
        (b, a)
    };
    let lifted = small.grid.zero_extend(&small.u, &big.grid)?;
    let diff = big.u.axpy(-1.0, &lifted)?;
    let g = &big.grid;
    let scale = g.mass(&big.u)?.max(g.mass(&lifted)?).sqrt();
    Ok(g.mass(&diff)?.sqrt() / scale)
}

/// Audits every well of a multiplicity run. Pure: equal inputs give equal reports.
pub fn audit(
    run: &MultiplicityRun,
    params: &EnergyParams,
    config: &SolverConfig,
) -> Result<VerificationReport> {
    let wells = params.potential.wells();
    let ceiling = run.c0 + run.gamma;
    let mut audits = Vec::new();
    for outcome in &run.wells {
        audits.push(match &outcome.result {
            Ok(r) => audit_well(r, wells, config, ceiling)?,
            Err(e) => WellAudit {
                well: outcome.well,
                status: None,
                error: Some(e.to_string()),
                level: None,
                barycenter: None,
                distance_to_well: None,
                region: None,
                nehari_res: None,
                characterization_gap: None,
                grad_norm: None,
                weak_res: None,
                r_final: None,
                iterations: None,
                positivity: None,
                stabilized: None,
                localized: false,
                separation_ok: false,
                nehari_ok: false,
                weak_ok: false,
                passed: false,
            },
        });
    }

    let converged: Vec<&SolveResult> = run.converged().collect();
    let mut pairs = Vec::new();
    for i in 0..converged.len() {
        for j in i + 1..converged.len() {
            let (a, b) = (converged[i], converged[j]);
            let own_ball = |r: &SolveResult| {
                region_of(r.barycenter, &config.geometry, wells).is_interior_of(r.well_index)
            };
            let balls_disjoint = a.well_index != b.well_index && own_ball(a) && own_ball(b);
            let rel = relative_l2(a, b)?;
            pairs.push(PairAudit {
                wells: (a.well_index, b.well_index),
                barycenter_distance: distance(a.barycenter, b.barycenter),
                balls_disjoint,
                relative_l2: rel,
                distinct: balls_disjoint && rel > config.distinct_rel_l2,
            });
        }
    }

    let conv_audits: Vec<&WellAudit> = audits
        .iter()
        .filter(|a| a.status == Some(SolveStatus::Converged))
        .collect();
    let positivity_ok = conv_audits
        .iter()
        .all(|a| a.positivity.is_some_and(|p| p.ok));
    let separation_ok = conv_audits.iter().all(|a| a.separation_ok);
    let nehari_ok = conv_audits.iter().all(|a| a.nehari_ok);
    let distinct_ok = pairs.iter().all(|p| p.distinct);
    let gap_ok = run.c0 < run.c_inf;
    let localization_failures = audits
        .iter()
        .filter(|a| !a.localized || a.status != Some(SolveStatus::Converged))
        .map(|a| a.well)
        .collect();
    let all_converged = run.all_converged();
    let passed = conv_audits.iter().all(|a| a.passed) && distinct_ok && gap_ok;
    let weak_res = conv_audits
        .iter()
        .filter_map(|a| a.weak_res)
        .fold(0.0, f64::max);

    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        eps: run.eps,
        tolerances: AuditTolerances {
            grad_tol: config.grad_tol,
            nehari_tol: config.nehari_tol,
            weak_tol: config.weak_tol,
            distinct_rel_l2: config.distinct_rel_l2,
            underflow_floor: crate::solver::UNDERFLOW_FLOOR,
            boundary_band: crate::barycenter::BOUNDARY_BAND,
            probes: config.probes,
        },
        levels: Levels {
            c0: run.c0,
            c_inf: run.c_inf,
            gamma: run.gamma,
            ceiling,
            alphas: run.wells.iter().map(|w| w.result.as_ref().ok().map(|r| r.level)).collect(),
        },
        gap_ok,
        wells: audits,
        pairs,
        all_converged,
        localization_failures,
        positivity_ok,
        separation_ok,
        nehari_ok,
        distinct_ok,
        weak_res,
        probe_note: format!(
            "weak residual is the maximum over {} seeded B-spline probes; it bounds only what that family detects",
            config.probes
        ),
        passed,
        success: passed && all_converged,
    })
}
