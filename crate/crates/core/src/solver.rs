//! Localized Nehari minimization.
//!
//! Each well is seeded with a cut-off translated Gausson, then driven downhill
//! by a Barzilai–Borwein gradient method whose iterates are rescaled back onto
//! the Nehari set after every step. A step is accepted only if it lowers the
//! energy and keeps the barycenter strictly inside the ball around the well.
//! Converged fields are carried to larger truncation radii by zero extension.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{q_eps, region_of, BarycenterParams};
use crate::energy::{default_log_sobolev_a, log_sobolev_gap, EnergyParams, Functional};
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, distance, norm, Field, Grid, Point};
use crate::potential::{Potential, WellGeometry};
use crate::precond::ShiftedLaplacian;
use crate::verify::weak_residual;

/// Interior zeros are tolerated only where every stencil neighbour is below this
/// value, i.e. where the field has underflowed rather than changed sign.
pub const UNDERFLOW_FLOOR: f64 = 1e-250;

/// Level ties are accepted if the gradient norm drops below the largest of
/// this many previous gradient norms.
pub const NONMONOTONE_WINDOW: usize = 10;

/// Newton refinements tried after the descent converges (1D only).
pub const NEWTON_STEPS: usize = 4;

/// Minimal seed distance from the box boundary, in length units.
pub const SEED_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepRule {
    pub initial: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule {
            initial: 1.0,
            backtrack: 0.5,
            max_halvings: 40,
            min: 1e-6,
            max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Bound on the H⁻¹ norm of the energy gradient.
    pub grad_tol: f64,
    pub nehari_tol: f64,
    pub max_iters: usize,
    pub step: StepRule,
    /// Level separation margin; `None` means `(c_inf − c0)/4`.
    pub gamma: Option<f64>,
    pub r_schedule: Vec<f64>,
    pub geometry: WellGeometry,
    /// Barycenter drift allowed between consecutive truncation radii.
    pub barycenter_tol: f64,
    /// Bound on the normalized weak residual of a converged field.
    pub weak_tol: f64,
    /// Minimal relative L² distance between solutions of different wells.
    pub distinct_rel_l2: f64,
    pub probes: usize,
    pub probe_seed: u64,
    pub record_history: bool,
}

impl SolverConfig {
    pub fn new(geometry: WellGeometry, r_schedule: Vec<f64>) -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            nehari_tol: 1e-10,
            max_iters: 20_000,
            step: StepRule::default(),
            gamma: None,
            r_schedule,
            geometry,
            barycenter_tol: 1e-4,
            weak_tol: 1e-3,
            distinct_rel_l2: 1e-2,
            probes: 50,
            probe_seed: 0,
            record_history: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.grad_tol > 0.0) {
            return bad(format!(
                "solver.grad_tol = {} must be positive",
                self.grad_tol
            ));
        }
        if !(self.nehari_tol > 0.0) {
            return bad(format!(
                "solver.nehari_tol = {} must be positive",
                self.nehari_tol
            ));
        }
        if self.max_iters == 0 {
            return bad("solver.max_iters must be positive".into());
        }
        let s = &self.step;
        if !(s.min > 0.0 && s.min <= s.max && s.initial > 0.0) {
            return bad(format!(
                "solver.step: need 0 < min <= max and initial > 0, got {s:?}"
            ));
        }
        if !(s.backtrack > 0.0 && s.backtrack < 1.0) {
            return bad(format!(
                "solver.step.backtrack = {} must lie in (0, 1)",
                s.backtrack
            ));
        }
        if self.r_schedule.is_empty() {
            return bad("numerics.r_schedule must not be empty".into());
        }
        if self.r_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return bad(format!(
                "numerics.r_schedule {:?} must be strictly increasing",
                self.r_schedule
            ));
        }
        if !(self.r_schedule[0] > self.geometry.r0) {
            return bad(format!(
                "numerics.r_schedule[0] = {} must exceed R0 = {}",
                self.r_schedule[0], self.geometry.r0
            ));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return bad(format!("solver.gamma = {g} must be positive"));
            }
        }
        if self.probes == 0 {
            return bad("solver.probes must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    /// Every admissible step left the ball around the well.
    BoundaryHit,
    IterationCap,
    /// No step lowered the energy although the barycenter constraint was inactive.
    Stalled,
    /// Residual below tolerance but the field is not positive.
    NotPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iter: usize,
    pub level: f64,
    pub nehari_res: f64,
    pub grad_norm: f64,
    pub q: Point,
    pub step: f64,
    pub log_sobolev_gap: f64,
}

/// One truncation radius visited by the continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageRecord {
    pub radius: f64,
    pub level: f64,
    pub barycenter: Point,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationSummary {
    pub stabilized: bool,
    /// `|level(R_last) − level(R_prev)|`
    pub level_gap: f64,
    pub barycenter_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Field,
    pub grid: Grid,
    pub eps: f64,
    pub level: f64,
    pub barycenter: Point,
    /// 1-based well index; 0 for unlocalized reference solves.
    pub well_index: usize,
    pub nehari_res: f64,
    pub grad_norm: f64,
    pub weak_res: f64,
    pub r_final: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub history: Vec<IterateRecord>,
    pub stages: Vec<StageRecord>,
    pub continuation: Option<ContinuationSummary>,
}

impl SolveResult {
    /// `v(x) = u(x/ε)`: the same nodal values on the grid scaled by ε.
    pub fn rescaled(&self) -> Result<(Grid, Field)> {
        let g = self.grid.scaled(self.eps)?;
        let v = Field::from_values(&g, self.u.values().to_vec())?;
        Ok((g, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Positivity {
    pub ok: bool,
    pub min_value: f64,
    pub negative_nodes: usize,
    /// Interior nodes holding an exact zero inside the underflowed tail.
    pub underflow_nodes: usize,
    /// Interior zeros next to representable values.
    pub zero_nodes: usize,
}

/// Positivity at interior nodes, up to double-precision underflow of the tail.
pub fn positivity(u: &Field, grid: &Grid) -> Positivity {
    let vals = u.values();
    let n = grid.n_axis();
    let mask = grid.interior_mask();
    let mut out = Positivity {
        ok: true,
        min_value: f64::INFINITY,
        negative_nodes: 0,
        underflow_nodes: 0,
        zero_nodes: 0,
    };
    for j in 0..vals.len() {
        if !mask[j] {
            continue;
        }
        let s = vals[j];
        out.min_value = out.min_value.min(s);
        if s < 0.0 {
            out.negative_nodes += 1;
        } else if s == 0.0 {
            let neighbours: &[usize] = if grid.dim() == 1 {
                &[j - 1, j + 1]
            } else {
                &[j - 1, j + 1, j - n, j + n]
            };
            if neighbours.iter().all(|&k| vals[k].abs() < UNDERFLOW_FLOOR) {
                out.underflow_nodes += 1;
            } else {
                out.zero_nodes += 1;
            }
        }
    }
    out.ok = out.negative_nodes == 0 && out.zero_nodes == 0 && vals.iter().any(|&s| s > 0.0);
    out
}

/// Exact positive solution `e^{(N+ω)/2} e^{−|x|²/2}` of `−Δu + ωu = u log u²`.
pub fn gausson(grid: &Grid, omega: f64) -> Result<Field> {
    let amp = gausson_amplitude(grid.dim(), omega);
    let half = grid.margin([0.0, 0.0]);
    let tail = amp * (-0.5 * half * half).exp();
    if tail > 1e-12 {
        return Err(Error::DomainTooSmall(format!(
            "Gausson tail {tail:.3e} at the boundary exceeds 1e-12 (R = {})",
            grid.radius()
        )));
    }
    Ok(gausson_at(grid, omega, [0.0, 0.0]))
}

pub fn gausson_amplitude(dim: usize, omega: f64) -> f64 {
    (0.5 * (dim as f64 + omega)).exp()
}

/// Gausson centred at `centre`, boundary zeroed, no tail check.
pub fn gausson_at(grid: &Grid, omega: f64, centre: Point) -> Field {
    let amp = gausson_amplitude(grid.dim(), omega);
    Field::from_fn(grid, |p| amp * (-0.5 * distance(p, centre).powi(2)).exp())
}

/// Quintic cutoff: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, C² at both seams.
pub fn cutoff(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let s = 2.0 * (t - 0.5);
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

fn well_point(params: &EnergyParams, well: usize) -> Result<Point> {
    let wells = params.potential.wells();
    if well == 0 || well > wells.len() {
        return Err(Error::WellIndex(well));
    }
    Ok(wells[well - 1])
}

/// `t φ(x/R) u_G(x − z_i/ε)` projected onto the Nehari set.
pub fn seed_well(
    well: usize,
    params: &EnergyParams,
    config: &SolverConfig,
    grid: &Grid,
) -> Result<Field> {
    let z = well_point(params, well)?;
    let eps = params.eps;
    let centre = [z[0] / eps, z[1] / eps];
    let margin = grid.margin(centre);
    if margin < SEED_MARGIN {
        return Err(Error::DomainTooSmall(format!(
            "well {well} sits at x = {:?} with margin {margin:.3} < {SEED_MARGIN} inside R = {}",
            &centre[..grid.dim()],
            grid.radius()
        )));
    }
    let r = grid.margin([0.0, 0.0]);
    let bump = gausson_at(grid, 1.0, centre);
    let raw = Field::from_fn(grid, |p| cutoff(norm(p) / r))
        .values()
        .iter()
        .zip(bump.values())
        .map(|(c, b)| c * b)
        .collect();
    let raw = Field::from_values(grid, raw)?;
    let functional = Functional::new(grid, params)?;
    let (seed, _) = functional.project(&raw)?;
    let bary = BarycenterParams::from_geometry(&config.geometry);
    let q = q_eps(&seed, eps, &bary, grid)?;
    if !region_of(q, &config.geometry, params.potential.wells()).is_interior_of(well) {
        return Err(Error::SeedOutsideRegion {
            well,
            distance: distance(q, z),
            rho0: config.geometry.rho0,
        });
    }
    Ok(seed)
}

struct Localization<'a> {
    well: usize,
    wells: &'a [Point],
    geometry: WellGeometry,
    bary: BarycenterParams,
    eps: f64,
}

impl Localization<'_> {
    fn barycenter(&self, u: &Field, grid: &Grid) -> Result<Point> {
        q_eps(u, self.eps, &self.bary, grid)
    }

    fn admits(&self, q: Point) -> bool {
        region_of(q, &self.geometry, self.wells).is_interior_of(self.well)
    }
}

/// Preconditioner for the search direction. In 1D the shift follows the
/// positive part of the local Hessian coefficient `V − log u² − 2`, which keeps
/// the far tail (where `−log u²` is large) from limiting the step size.
struct Metric<'a> {
    op: ShiftedLaplacian,
    v: &'a [f64],
    shift: Vec<f64>,
}

/// Cap on the nodal shift; also used where `u = 0`.
const MAX_SHIFT: f64 = 1e8;

impl<'a> Metric<'a> {
    fn new(functional: &'a Functional) -> Result<Self> {
        let grid = functional.grid();
        Ok(Metric {
            op: ShiftedLaplacian::new(grid, 1.0)?,
            v: functional.potential_values(),
            shift: vec![1.0; grid.len()],
        })
    }

    fn update(&mut self, u: &Field) {
        if self.op.dim() != 1 {
            return;
        }
        for ((c, &s), v) in self.shift.iter_mut().zip(u.values()).zip(self.v) {
            *c = if s == 0.0 {
                MAX_SHIFT
            } else {
                (v - 2.0 * s.abs().ln() - 2.0).clamp(1.0, MAX_SHIFT)
            };
        }
    }

    fn solve(&self, r: &Field, grid: &Grid) -> Result<Field> {
        match self.op.dim() {
            1 => self.op.solve_variable(r, &self.shift, grid),
            _ => self.op.solve(r, grid),
        }
    }

    /// `⟨s, (−Δ_h + c) s⟩`
    fn norm2(&self, s: &Field, grid: &Grid) -> Result<f64> {
        let local = compensated_sum(
            grid.weights()
                .iter()
                .zip(s.values())
                .zip(&self.shift)
                .map(|((w, x), c)| w * c * x * x),
        );
        Ok(grid.dirichlet_form(s)? + local)
    }
}

struct Descent {
    u: Field,
    q: Point,
    level: f64,
    grad_norm: f64,
    iterations: usize,
    status: SolveStatus,
    history: Vec<IterateRecord>,
}

fn record(
    functional: &Functional,
    u: &Field,
    iter: usize,
    level: f64,
    q: Point,
    grad_norm: f64,
    step: f64,
) -> Result<IterateRecord> {
    let grid = functional.grid();
    let nr = functional.nehari_residual(u)?;
    Ok(IterateRecord {
        iter,
        level,
        nehari_res: nr.relative,
        grad_norm,
        q,
        step,
        log_sobolev_gap: log_sobolev_gap(u, grid, default_log_sobolev_a())?,
    })
}

/// Projected Barzilai–Borwein descent on the Nehari set.
///
/// The search direction is the H¹ gradient `g = (−Δ_h + 1)⁻¹ r` of the L²
/// residual `r`, and the reported gradient norm is the dual norm `√⟨r, g⟩`.
/// A step is accepted only if [`Functional::level_change`] is nonpositive, and
/// the level is carried as `J(seed)` plus the accepted changes, so the history
/// never increases. Exact ties are broken by a nonmonotone test on the
/// gradient norm. Trial points are replaced by their absolute values before
/// projection.
///
/// `start_level` replaces `J(seed)` when the caller already knows it, as after
/// zero extension.
fn descend(
    functional: &Functional,
    seed: &Field,
    start_level: Option<f64>,
    loc: Option<&Localization>,
    config: &SolverConfig,
) -> Result<Descent> {
    let grid = functional.grid();
    let mut metric = Metric::new(functional)?;
    let mut u = seed.clone();
    let mut level = match start_level {
        Some(l) => l,
        None => functional.energy(&u)?.total,
    };
    if functional.nehari_residual(&u)?.relative > config.nehari_tol {
        u = functional.project(&u)?.0;
        level += functional.level_change(seed, &u)?;
    }
    metric.update(&u);
    let centre_of_mass = |u: &Field| q_eps(u, 1.0, &BarycenterParams::new(grid.radius()), grid);
    let mut q = match loc {
        Some(l) => l.barycenter(&u, grid)?,
        None => centre_of_mass(&u)?,
    };
    if let Some(l) = loc {
        if !l.admits(q) {
            return Err(Error::SeedOutsideRegion {
                well: l.well,
                distance: distance(q, l.wells[l.well - 1]),
                rho0: l.geometry.rho0,
            });
        }
    }
    let mut r = functional.residual(&u)?;
    let mut g = metric.solve(&r, grid)?;
    let mut grad_norm = grid.inner(&r, &g)?.max(0.0).sqrt();
    let mut history = Vec::new();
    if config.record_history {
        history.push(record(functional, &u, 0, level, q, grad_norm, 0.0)?);
    }

    let rule = config.step;
    let mut tau = rule.initial;
    let mut bb_pair: Option<(f64, f64, f64)> = None;
    let mut recent: std::collections::VecDeque<f64> =
        std::collections::VecDeque::with_capacity(NONMONOTONE_WINDOW);
    let mut iterations = 0;
    let mut status = SolveStatus::IterationCap;

    loop {
        // a small gradient with interior zeros (e.g. right after zero extension)
        // keeps iterating so that the tail can fill in
        if grad_norm <= config.grad_tol && positivity(&u, grid).ok {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        if let Some((ss, sy, yy)) = bb_pair {
            tau = if sy > 0.0 {
                // alternate the long and short Barzilai–Borwein steps
                if iterations % 2 == 0 {
                    ss / sy
                } else {
                    sy / yy
                }
            } else {
                rule.max
            };
            tau = tau.clamp(rule.min, rule.max);
        }

        let mut accepted = None;
        let mut left_region = false;
        let mut t = tau;
        for _ in 0..=rule.max_halvings {
            // J(|u|) ≤ J(u) for the discrete functional, so folding the trial
            // into the nonnegative cone never costs energy
            let trial = u.axpy(-t, &g)?.map(f64::abs);
            let next = match functional.project(&trial) {
                Ok((next, s)) if s.is_finite() => next,
                _ => {
                    t *= rule.backtrack;
                    continue;
                }
            };
            let dj = functional.level_change(&u, &next)?;
            if !(dj <= 0.0) {
                t *= rule.backtrack;
                continue;
            }
            // an exact tie must lower the gradient norm instead
            let flat = dj == 0.0;
            let mut refined = None;
            if flat {
                let r_try = functional.residual(&next)?;
                let g_try = metric.solve(&r_try, grid)?;
                let norm_try = grid.inner(&r_try, &g_try)?.max(0.0).sqrt();
                // below grad_tol any tie is fine; this lets a converged field
                // repair interior zeros left by zero extension
                let reference = recent
                    .iter()
                    .copied()
                    .fold(grad_norm.max(config.grad_tol), f64::max);
                if !(norm_try < reference) {
                    t *= rule.backtrack;
                    continue;
                }
                refined = Some((r_try, g_try));
            }
            let q_next = match loc {
                Some(l) => {
                    let qn = l.barycenter(&next, grid)?;
                    if !l.admits(qn) {
                        left_region = true;
                        t *= rule.backtrack;
                        continue;
                    }
                    qn
                }
                None => centre_of_mass(&next)?,
            };
            accepted = Some((next, q_next, refined, dj));
            break;
        }

        let Some((next, q_next, refined, dj)) = accepted else {
            status = if left_region {
                SolveStatus::BoundaryHit
            } else if grad_norm <= config.grad_tol {
                SolveStatus::NotPositive
            } else {
                SolveStatus::Stalled
            };
            break;
        };
        let r_next = match refined {
            Some((r_try, _)) => r_try,
            None => functional.residual(&next)?,
        };
        // Barzilai–Borwein quotients ⟨s, s⟩_H, ⟨s, y⟩, ⟨y, y⟩_{H⁻¹} with y = r' − r,
        // all in the metric of the current iterate
        let s = next.axpy(-1.0, &u)?;
        let dr = r_next.axpy(-1.0, &r)?;
        let ss = metric.norm2(&s, grid)?;
        let dg = metric.solve(&dr, grid)?;
        bb_pair = Some((ss, grid.inner(&s, &dr)?, grid.inner(&dg, &dr)?));
        metric.update(&next);
        let g_next = metric.solve(&r_next, grid)?;
        u = next;
        r = r_next;
        g = g_next;
        q = q_next;
        level += dj;
        if recent.len() == NONMONOTONE_WINDOW {
            recent.pop_front();
        }
        recent.push_back(grad_norm);
        grad_norm = grid.inner(&r, &g)?.max(0.0).sqrt();
        iterations += 1;
        if config.record_history {
            history.push(record(functional, &u, iterations, level, q, grad_norm, t)?);
        }
    }

    if status == SolveStatus::Converged && grid.dim() == 1 {
        for _ in 0..NEWTON_STEPS {
            // Newton correction from the tridiagonal Jacobian −Δ_h + V − log u² − 2
            let shift: Vec<f64> = u
                .values()
                .iter()
                .zip(metric.v)
                .map(|(&s, v)| {
                    if s == 0.0 {
                        MAX_SHIFT
                    } else {
                        (v - 2.0 * s.abs().ln() - 2.0).min(MAX_SHIFT)
                    }
                })
                .collect();
            let delta = metric.op.solve_variable(&r, &shift, grid)?;
            let trial = u.axpy(-1.0, &delta)?.map(f64::abs);
            let Ok((next, sc)) = functional.project(&trial) else {
                break;
            };
            if !sc.is_finite() || !positivity(&next, grid).ok {
                break;
            }
            let dj = functional.level_change(&u, &next)?;
            if !(dj <= 0.0) {
                break;
            }
            let q_next = match loc {
                Some(l) => l.barycenter(&next, grid)?,
                None => centre_of_mass(&next)?,
            };
            if loc.is_some_and(|l| !l.admits(q_next)) {
                break;
            }
            let r_next = functional.residual(&next)?;
            let mut trial_metric = Metric {
                op: metric.op.clone(),
                v: metric.v,
                shift: metric.shift.clone(),
            };
            trial_metric.update(&next);
            let g_next = trial_metric.solve(&r_next, grid)?;
            let norm_next = grid.inner(&r_next, &g_next)?.max(0.0).sqrt();
            if !(norm_next < grad_norm) {
                break;
            }
            u = next;
            r = r_next;
            q = q_next;
            metric = trial_metric;
            grad_norm = norm_next;
            level += dj;
            iterations += 1;
            if config.record_history {
                history.push(record(
                    functional, &u, iterations, level, q, grad_norm, 1.0,
                )?);
            }
        }
    }

    Ok(Descent {
        u,
        q,
        level,
        grad_norm,
        iterations,
        status,
        history,
    })
}

fn finish(
    functional: &Functional,
    descent: Descent,
    eps: f64,
    well_index: usize,
    config: &SolverConfig,
) -> Result<SolveResult> {
    let grid = functional.grid();
    let nr = functional.nehari_residual(&descent.u)?;
    let weak = weak_residual(&descent.u, functional, config.probes, config.probe_seed)?;
    let stage = StageRecord {
        radius: grid.radius(),
        level: descent.level,
        barycenter: descent.q,
        iterations: descent.iterations,
        status: descent.status,
    };
    Ok(SolveResult {
        u: descent.u,
        grid: grid.clone(),
        eps,
        level: descent.level,
        barycenter: descent.q,
        well_index,
        nehari_res: nr.relative,
        grad_norm: descent.grad_norm,
        weak_res: weak,
        r_final: grid.radius(),
        iterations: descent.iterations,
        status: descent.status,
        history: descent.history,
        stages: vec![stage],
        continuation: None,
    })
}

/// Minimizes `J` over the Nehari set restricted to `Ω^i` (barycenter within
/// `rho0` of well `i`), starting from `seed`.
pub fn minimize_localized(
    seed: &Field,
    well: usize,
    params: &EnergyParams,
    config: &SolverConfig,
    grid: &Grid,
) -> Result<SolveResult> {
    minimize_from(seed, None, well, params, config, grid)
}

fn minimize_from(
    seed: &Field,
    start_level: Option<f64>,
    well: usize,
    params: &EnergyParams,
    config: &SolverConfig,
    grid: &Grid,
) -> Result<SolveResult> {
    well_point(params, well)?;
    let functional = Functional::new(grid, params)?;
    let loc = Localization {
        well,
        wells: params.potential.wells(),
        geometry: config.geometry,
        bary: BarycenterParams::from_geometry(&config.geometry),
        eps: params.eps,
    };
    let descent = descend(&functional, seed, start_level, Some(&loc), config)?;
    finish(&functional, descent, params.eps, well, config)
}

/// Constant-potential reference solve (`V ≡ ω`) from the Gausson seed.
pub fn ground_state(omega: f64, grid: &Grid, config: &SolverConfig) -> Result<SolveResult> {
    let functional = Functional::with_potential_values(grid, vec![omega; grid.len()])?;
    let seed = gausson(grid, omega)?;
    let descent = descend(&functional, &seed, None, None, config)?;
    finish(&functional, descent, 1.0, 0, config)
}

/// Ground level `inf_{Nehari} J` of the constant-coefficient problem `V ≡ ω`.
pub fn ground_level(omega: f64, grid: &Grid, config: &SolverConfig) -> Result<f64> {
    let res = ground_state(omega, grid, config)?;
    if res.status != SolveStatus::Converged {
        return Err(Error::Config(format!(
            "ground level for omega = {omega} did not converge: {:?}",
            res.status
        )));
    }
    Ok(res.level)
}

/// Carries a converged solution through the remaining truncation radii until
/// the level and barycenter stabilize.
pub fn continue_in_r(
    result: SolveResult,
    params: &EnergyParams,
    config: &SolverConfig,
) -> Result<SolveResult> {
    let mut current = result;
    let start = current.r_final;
    let mut stages = current.stages.clone();
    let mut summary = None;
    for &radius in config
        .r_schedule
        .iter()
        .filter(|&&r| r > start * (1.0 + 1e-12))
    {
        if current.status != SolveStatus::Converged {
            break;
        }
        let grid = Grid::build(current.grid.dim(), radius, current.grid.h())?;
        let extended = current.grid.zero_extend(&current.u, &grid)?;
        // zero extension leaves J unchanged, so the level carries over
        let next = minimize_from(
            &extended,
            Some(current.level),
            current.well_index,
            params,
            config,
            &grid,
        )?;
        let level_gap = (next.level - current.level).abs();
        let barycenter_gap = distance(next.barycenter, current.barycenter);
        let stabilized = next.status == SolveStatus::Converged
            && level_gap <= config.grad_tol
            && barycenter_gap <= config.barycenter_tol;
        stages.extend(next.stages.iter().copied());
        let iterations = current.iterations + next.iterations;
        let mut history = std::mem::take(&mut current.history);
        history.extend(next.history.iter().copied());
        current = SolveResult {
            iterations,
            history,
            ..next
        };
        summary = Some(ContinuationSummary {
            stabilized,
            level_gap,
            barycenter_gap,
        });
        if stabilized {
            break;
        }
    }
    current.stages = stages;
    current.continuation = summary;
    Ok(current)
}

/// Seed, minimize and continue one well across the configured radii.
pub fn solve_well(
    well: usize,
    params: &EnergyParams,
    config: &SolverConfig,
    dim: usize,
    h: f64,
) -> Result<SolveResult> {
    let grid = Grid::build(dim, config.r_schedule[0], h)?;
    let seed = seed_well(well, params, config, &grid)?;
    let first = minimize_localized(&seed, well, params, config, &grid)?;
    continue_in_r(first, params, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub dim: usize,
    pub h: f64,
    /// Truncation radius of the constant-coefficient reference solves.
    pub ground_radius: f64,
}

#[derive(Debug, Clone)]
pub struct WellOutcome {
    pub well: usize,
    pub result: std::result::Result<SolveResult, Error>,
}

#[derive(Debug, Clone)]
pub struct MultiplicityRun {
    pub eps: f64,
    pub c0: f64,
    pub c_inf: f64,
    pub gamma: f64,
    pub wells: Vec<WellOutcome>,
}

impl MultiplicityRun {
    pub fn converged(&self) -> impl Iterator<Item = &SolveResult> {
        self.wells
            .iter()
            .filter_map(|w| w.result.as_ref().ok())
            .filter(|r| r.status == SolveStatus::Converged)
    }

    pub fn all_converged(&self) -> bool {
        self.wells
            .iter()
            .all(|w| matches!(&w.result, Ok(r) if r.status == SolveStatus::Converged))
    }
}

/// Reference levels `c0 = c(V ≡ 1)` and `c_inf = c(V ≡ V_inf)`.
pub fn reference_levels(
    v_inf: f64,
    disc: &Discretization,
    config: &SolverConfig,
) -> Result<(f64, f64)> {
    let grid = Grid::build(disc.dim, disc.ground_radius, disc.h)?;
    let (c0, c_inf) = rayon::join(
        || ground_level(1.0, &grid, config),
        || ground_level(v_inf, &grid, config),
    );
    Ok((c0?, c_inf?))
}

/// One localized solution per well, solved concurrently on up to `jobs` threads.
pub fn solve_multiplicity(
    params: &EnergyParams,
    config: &SolverConfig,
    disc: &Discretization,
    jobs: usize,
) -> Result<MultiplicityRun> {
    config.validate()?;
    let spec = match &params.potential {
        Potential::MultiWell(spec) => spec,
        Potential::Constant(_) => {
            return Err(Error::Config(
                "multiplicity runs need a multi-well potential".into(),
            ))
        }
    };
    let issues = config.geometry.violations(spec.wells());
    if !issues.is_empty() {
        return Err(Error::Config(format!(
            "well geometry: {}",
            issues.join("; ")
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        let (c0, c_inf) = reference_levels(spec.v_inf(), disc, config)?;
        let gamma = config.gamma.unwrap_or(0.25 * (c_inf - c0));
        if !(gamma > 0.0 && gamma < 0.5 * (c_inf - c0)) {
            return Err(Error::Config(format!(
                "gamma = {gamma} outside (0, (c_inf - c0)/2) with c0 = {c0}, c_inf = {c_inf}"
            )));
        }
        let wells: Vec<WellOutcome> = (1..=spec.len())
            .into_par_iter()
            .map(|well| WellOutcome {
                well,
                result: solve_well(well, params, config, disc.dim, disc.h),
            })
            .collect();
        Ok(MultiplicityRun {
            eps: params.eps,
            c0,
            c_inf,
            gamma,
            wells,
        })
    })
}

/// Analytic level `½∫u_G²` of the Gausson for `V ≡ ω` in dimension `dim`.
pub fn gausson_level(dim: usize, omega: f64) -> f64 {
    0.5 * E.powf(dim as f64 + omega) * std::f64::consts::PI.powf(0.5 * dim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    #[test]
    fn gausson_samples() {
        let g = Grid::build(1, 10.0, 0.01).unwrap();
        let u = gausson(&g, 1.0).unwrap();
        assert!((u.values()[g.nearest_node([0.0, 0.0])] - E).abs() < 1e-15);
        let m = g.mass(&u).unwrap();
        assert!((m - E * E * std::f64::consts::PI.sqrt()).abs() < 1e-6);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gausson_level(1, 1.0) - 0.5 * E * E * sqrt_pi).abs() < 1e-13);
        assert!((gausson_level(1, 1.0) / 6.54783 - 1.0).abs() < 1e-4);
        assert!((gausson_level(1, 2.0) / 17.79983 - 1.0).abs() < 1e-4);
        assert!((gausson_amplitude(2, 2.0) - E * E).abs() < 1e-14);
        assert!((gausson_level(2, 1.0) - 0.5 * E.powi(3) * std::f64::consts::PI).abs() < 1e-12);
        assert!((gausson_level(2, 2.0) / 85.7715 - 1.0).abs() < 2e-4);
        let small = Grid::build(1, 5.0, 0.1).unwrap();
        assert!(matches!(
            gausson(&small, 1.0),
            Err(Error::DomainTooSmall(_))
        ));
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert_eq!(cutoff(3.0), 0.0);
        let d = 1e-6;
        // C¹ and C² at the seams
        assert!((cutoff(0.5 + d) - 1.0).abs() < 1e-12);
        assert!(cutoff(1.0 - d).abs() < 1e-12);
        for k in 1..100 {
            let t = 0.5 + 0.005 * k as f64;
            assert!(cutoff(t + 0.005) <= cutoff(t));
        }
    }

    #[test]
    fn positivity_tolerates_only_underflow() {
        let g = Grid::build(1, 2.0, 0.1).unwrap();
        let u = Field::from_fn(&g, |p| (-p[0] * p[0]).exp());
        assert!(positivity(&u, &g).ok);
        let mut v = u.clone();
        v.values_mut()[5] = 0.0;
        let p = positivity(&v, &g);
        assert!(!p.ok && p.zero_nodes == 1);
        let mut tail = u.clone();
        for k in 1..4 {
            tail.values_mut()[k] = if k == 1 { 0.0 } else { 1e-300 };
        }
        let p = positivity(&tail, &g);
        assert!(p.ok && p.underflow_nodes == 1, "{p:?}");
        let neg = u.scaled(-1.0);
        let p = positivity(&neg, &g);
        assert!(!p.ok && p.negative_nodes > 0 && p.min_value < 0.0);
    }

    #[test]
    fn seed_errors() {
        let spec = PotentialSpec::multiwell(1, &[vec![0.0], vec![2.0]], 2.0, 0.25).unwrap();
        let params = EnergyParams::new(0.1, Potential::MultiWell(spec.clone())).unwrap();
        let config = SolverConfig::new(WellGeometry::default_for(spec.wells()), vec![10.0]);
        let g = Grid::build(1, 10.0, 0.05).unwrap();
        assert!(matches!(
            seed_well(2, &params, &config, &g),
            Err(Error::DomainTooSmall(_))
        ));
        assert_eq!(
            seed_well(3, &params, &config, &g).unwrap_err(),
            Error::WellIndex(3)
        );
        assert!(seed_well(1, &params, &config, &g).is_ok());
    }
}
