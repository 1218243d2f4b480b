//! The truncated functional
//!
//! ```text
//! J(u) = ½∫(|∇u|² + (V(εx)+1)u²) − ½∫u² log u²
//! ```
//!
//! on a grid, its gradient, the closed-form Nehari rescaling, the F1/F2
//! splitting of the entropy density, and the log-Sobolev diagnostic.
//!
//! All logarithms of squares are evaluated as `2 ln|s|`, and `0 log 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Field, Grid};
use crate::potential::Potential;

/// `e^{-3/2}`: largest splitting threshold for which F1 stays convex.
pub const DELTA_CAP: f64 = 0.22313016014842982;
/// `e^{-2}`.
pub const DEFAULT_DELTA: f64 = 0.1353352832366127;
pub const DEFAULT_P: f64 = 3.0;

/// `s log s²` with the `0 log 0 = 0` convention.
#[inline]
pub fn s_log_s2(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        2.0 * s * s.abs().ln()
    }
}

/// `s² log s²` with the `0 log 0 = 0` convention.
#[inline]
pub fn entropy_density(s: f64) -> f64 {
    s * s_log_s2(s)
}

/// `entropy_density(b) − entropy_density(a)` without cancellation.
fn entropy_change(a: f64, b: f64) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    if a == 0.0 || b == 0.0 {
        return entropy_density(b) - entropy_density(a);
    }
    (b - a) * (b + a) * 2.0 * b.ln() + a * a * 2.0 * ((b - a) / a).ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub eps: f64,
    pub delta: f64,
    pub p: f64,
    pub potential: Potential,
}

impl EnergyParams {
    pub fn new(eps: f64, potential: Potential) -> Result<Self> {
        let params = EnergyParams {
            eps,
            delta: DEFAULT_DELTA,
            p: DEFAULT_P,
            potential,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::NonPositiveEpsilon(self.eps));
        }
        check_delta(self.delta)?;
        if !(self.p > 2.0) || !self.p.is_finite() {
            return Err(Error::InvalidExponent(self.p));
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= DELTA_CAP) {
        return Err(Error::InvalidDelta(delta));
    }
    Ok(())
}

/// Values and derivatives of the splitting pair at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitValues {
    pub f1: f64,
    pub f2: f64,
    pub df1: f64,
    pub df2: f64,
}

/// F1 (convex part) and F2 (power-growth part) with `F2 − F1 = ½ s² log s²`.
pub fn f_split(s: f64, delta: f64) -> Result<SplitValues> {
    check_delta(delta)?;
    Ok(f_split_unchecked(s, delta))
}

pub(crate) fn f_split_unchecked(s: f64, delta: f64) -> SplitValues {
    let a = s.abs();
    let sign = s.signum();
    if s == 0.0 {
        return SplitValues {
            f1: 0.0,
            f2: 0.0,
            df1: 0.0,
            df2: 0.0,
        };
    }
    let log_d2 = 2.0 * delta.ln();
    if a < delta {
        let log_s2 = 2.0 * a.ln();
        SplitValues {
            f1: -0.5 * s * s * log_s2,
            f2: 0.0,
            df1: -s * log_s2 - s,
            df2: 0.0,
        }
    } else {
        let log_ratio = 2.0 * (a / delta).ln();
        SplitValues {
            f1: -0.5 * s * s * (log_d2 + 3.0) + 2.0 * delta * a - 0.5 * delta * delta,
            f2: 0.5 * s * s * log_ratio + 2.0 * delta * a - 1.5 * s * s - 0.5 * delta * delta,
            df1: -s * (log_d2 + 3.0) + 2.0 * delta * sign,
            df2: s * log_ratio + 2.0 * delta * sign - 2.0 * s,
        }
    }
}

/// Terms of `J`; `total = kinetic + potential_term − entropy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// `½∫|∇u|²`
    pub kinetic: f64,
    /// `½∫(V(εx)+1)u²`
    pub potential_term: f64,
    /// `½∫u² log u²`
    pub entropy: f64,
    /// `∫u²`
    pub mass: f64,
    /// `‖u‖_ε`
    pub norm_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariResidual {
    /// `|J'(u)u| / max(1, ‖u‖_ε²)`
    pub relative: f64,
    /// `|J(u) − ½∫u²|`
    pub characterization_gap: f64,
}

/// The discrete functional bound to a grid and a tabulated `V(εx)`.
#[derive(Debug, Clone)]
pub struct Functional<'g> {
    grid: &'g Grid,
    v: Vec<f64>,
}

impl<'g> Functional<'g> {
    pub fn new(grid: &'g Grid, params: &EnergyParams) -> Result<Self> {
        params.validate()?;
        let v = params.potential.tabulate(params.eps, grid)?;
        Ok(Functional { grid, v })
    }

    /// Functional with an explicit nodal potential.
    pub fn with_potential_values(grid: &'g Grid, v: Vec<f64>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Functional { grid, v })
    }

    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn potential_values(&self) -> &[f64] {
        &self.v
    }

    fn check(&self, u: &Field) -> Result<()> {
        if !u.lives_on(self.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown> {
        self.check(u)?;
        let grad2 = self.grid.dirichlet_form(u)?;
        let w = self.grid.weights();
        let vals = u.values();
        let nodes = || w.iter().zip(vals).zip(&self.v);
        let pot = compensated_sum(nodes().map(|((w, &s), v)| w * (v + 1.0) * s * s));
        let ent = compensated_sum(nodes().map(|((w, &s), _)| w * entropy_density(s)));
        let mass = compensated_sum(nodes().map(|((w, &s), _)| w * s * s));
        let kinetic = 0.5 * grad2;
        let potential_term = 0.5 * pot;
        let entropy = 0.5 * ent;
        Ok(EnergyBreakdown {
            total: kinetic + potential_term - entropy,
            kinetic,
            potential_term,
            entropy,
            mass,
            norm_eps: (grad2 + pot).sqrt(),
        })
    }

    /// Strong-form residual `−Δ_h u + V(εx)u − u log u²` (zero on the boundary).
    /// This is the L² Riesz representative of the energy gradient.
    pub fn residual(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut r = self.grid.laplacian(u)?;
        let mask = self.grid.interior_mask();
        for (j, rj) in r.values_mut().iter_mut().enumerate() {
            if mask[j] {
                let s = u.values()[j];
                *rj += self.v[j] * s - s_log_s2(s);
            }
        }
        Ok(r)
    }

    /// Nodal gradient `w_j r_j`, so that `⟨gradient(u), v⟩ = d/dt J(u + tv)|₀`.
    pub fn gradient(&self, u: &Field) -> Result<Field> {
        let mut r = self.residual(u)?;
        for (g, w) in r.values_mut().iter_mut().zip(self.grid.weights()) {
            *g *= w;
        }
        Ok(r)
    }

    /// `J(b) − J(a)` from nodewise differences, e.g. `s_b² − s_a² = (s_b − s_a)(s_b + s_a)`
    /// and `s_b² log s_b² − s_a² log s_a² = (s_b² − s_a²) log s_b² + s_a² log(s_b²/s_a²)`
    /// with the last logarithm through `ln_1p`. Accurate to the rounding of the
    /// difference itself rather than that of `J`, which is what lets descent
    /// compare two nearby iterates.
    pub fn level_change(&self, a: &Field, b: &Field) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        let kinetic = self.grid.dirichlet_form_change(a, b)?;
        let local = compensated_sum(
            self.grid
                .weights()
                .iter()
                .zip(a.values())
                .zip(b.values())
                .zip(&self.v)
                .map(|(((w, &sa), &sb), v)| {
                    let d2 = (sb - sa) * (sb + sa);
                    w * ((v + 1.0) * d2 - entropy_change(sa, sb))
                }),
        );
        Ok(0.5 * (kinetic + local))
    }

    /// `J'(u)u = ∫(|∇u|² + V u²) − ∫u² log u²`.
    pub fn nehari_functional(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let local = compensated_sum(
            self.grid
                .weights()
                .iter()
                .zip(u.values())
                .zip(&self.v)
                .map(|((w, &s), v)| w * (v * s * s - entropy_density(s))),
        );
        Ok(self.grid.dirichlet_form(u)? + local)
    }

    /// The unique `s > 0` with `J'(su)su = 0`:
    /// `s* = exp(J'(u)u / (2∫u²))`.
    pub fn nehari_scale(&self, u: &Field) -> Result<f64> {
        let mass = self.grid.mass(u)?;
        if !(mass > 0.0) {
            return Err(Error::ZeroField);
        }
        Ok((self.nehari_functional(u)? / (2.0 * mass)).exp())
    }

    /// `s* u` together with `s*`.
    pub fn project(&self, u: &Field) -> Result<(Field, f64)> {
        let s = self.nehari_scale(u)?;
        Ok((u.scaled(s), s))
    }

    pub fn nehari_residual(&self, u: &Field) -> Result<NehariResidual> {
        let e = self.energy(u)?;
        if !(e.mass > 0.0) {
            return Err(Error::ZeroField);
        }
        let q = self.nehari_functional(u)?;
        Ok(NehariResidual {
            relative: q.abs() / e.norm_eps.powi(2).max(1.0),
            characterization_gap: (e.total - 0.5 * e.mass).abs(),
        })
    }
}

/// Right minus left side of the log-Sobolev inequality
///
/// ```text
/// ∫u² log u² ≤ (a²/π)|∇u|²₂ + (log|u|²₂ − N(1 + log a))|u|²₂
/// ```
///
/// evaluated with the discrete Dirichlet energy. A nonnegative value certifies
/// the inequality for this field.
pub fn log_sobolev_gap(u: &Field, grid: &Grid, a: f64) -> Result<f64> {
    let grad2 = grid.dirichlet_form(u)?;
    let mass = grid.mass(u)?;
    if !(mass > 0.0) {
        return Err(Error::ZeroField);
    }
    let ent = grid.integrate(
        &u.values()
            .iter()
            .map(|&s| entropy_density(s))
            .collect::<Vec<_>>(),
    )?;
    let n = grid.dim() as f64;
    let rhs = a * a / std::f64::consts::PI * grad2 + (mass.ln() - n * (1.0 + a.ln())) * mass;
    Ok(rhs - ent)
}

/// `a = √π / 2`, i.e. `a²/π = 1/4`.
pub fn default_log_sobolev_a() -> f64 {
    0.5 * std::f64::consts::PI.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// Smallest `C` with `|F2'(s)| ≤ C|s|^{p−1}` on every sample.
    pub c: f64,
    /// Whether the bound is attained below the top decade of the samples;
    /// `false` means the ratio is still growing at the largest `|s|`.
    pub uniform: bool,
    /// `(decade exponent, max ratio in that decade)`.
    pub per_decade: Vec<(i32, f64)>,
}

/// Fits the growth constant of `F2'` against `|s|^{p−1}` over the samples.
pub fn f2_growth_check(delta: f64, p: f64, samples: &[f64]) -> GrowthFit {
    let mut per_decade: Vec<(i32, f64)> = Vec::new();
    let mut c: f64 = 0.0;
    for &s in samples {
        if s == 0.0 {
            continue;
        }
        let df2 = f_split_unchecked(s, delta).df2;
        let ratio = df2.abs() / s.abs().powf(p - 1.0);
        c = c.max(ratio);
        let dec = s.abs().log10().floor() as i32;
        match per_decade.iter_mut().find(|(d, _)| *d == dec) {
            Some(entry) => entry.1 = entry.1.max(ratio),
            None => per_decade.push((dec, ratio)),
        }
    }
    per_decade.sort_by_key(|(d, _)| *d);
    let uniform = match per_decade.split_last() {
        Some((top, rest)) if !rest.is_empty() => {
            let below = rest.iter().map(|(_, r)| *r).fold(0.0, f64::max);
            top.1 <= below && c.is_finite()
        }
        _ => c.is_finite(),
    };
    GrowthFit {
        c,
        uniform,
        per_decade,
    }
}

/// Log-spaced samples covering `[δ/10, 10³]`.
pub fn growth_samples(delta: f64, count: usize) -> Vec<f64> {
    let lo = (delta / 10.0).ln();
    let hi = 1e3f64.ln();
    (0..count)
        .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use std::f64::consts::{E, PI};

    fn gausson_1d(g: &Grid) -> Field {
        Field::from_fn(g, |p| E * (-0.5 * p[0] * p[0]).exp())
    }

    fn constant(eps: f64) -> EnergyParams {
        EnergyParams::new(eps, Potential::Constant(1.0)).unwrap()
    }

    #[test]
    fn split_at_zero_and_identity() {
        let z = f_split(0.0, DEFAULT_DELTA).unwrap();
        assert_eq!(
            z,
            SplitValues {
                f1: 0.0,
                f2: 0.0,
                df1: 0.0,
                df2: 0.0
            }
        );
        let v = f_split(2.0, DEFAULT_DELTA).unwrap();
        assert!((v.f2 - v.f1 - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert!((2.0 * 4f64.ln() - 2.7725887).abs() < 1e-7);
    }

    #[test]
    fn split_seam_and_derivative_at_delta() {
        let d = 0.1;
        let right = f_split(d, d).unwrap();
        let below = f_split(d * (1.0 - 1e-15), d).unwrap();
        let expected = -d * (d * d).ln() - d;
        assert!((right.df1 - expected).abs() < 1e-14);
        assert!((below.df1 - right.df1).abs() < 1e-13);
        assert!((below.f1 - right.f1).abs() < 1e-14);
        assert!(right.f2.abs() < 1e-16 && right.df2.abs() < 1e-15);
    }

    #[test]
    fn invalid_delta() {
        assert_eq!(f_split(1.0, 0.5), Err(Error::InvalidDelta(0.5)));
        assert!(f_split(1.0, DELTA_CAP).is_ok());
        assert_eq!(f_split(1.0, 0.0), Err(Error::InvalidDelta(0.0)));
        assert!(constant(0.1).with_delta(0.3).is_err());
        assert!(constant(0.1).with_p(2.0).is_err());
    }

    #[test]
    fn zero_field() {
        let g = Grid::build(1, 5.0, 0.1).unwrap();
        let f = Functional::new(&g, &constant(1.0)).unwrap();
        let u = Field::zeros(&g);
        assert_eq!(f.energy(&u).unwrap().total, 0.0);
        assert!(f.gradient(&u).unwrap().is_zero());
        assert_eq!(f.nehari_scale(&u), Err(Error::ZeroField));
        assert_eq!(f.nehari_residual(&u), Err(Error::ZeroField));
        assert_eq!(log_sobolev_gap(&u, &g, 1.0), Err(Error::ZeroField));
    }

    #[test]
    fn gausson_energy_gradient_and_nehari() {
        let g = Grid::build(1, 10.0, 0.01).unwrap();
        let f = Functional::new(&g, &constant(1.0)).unwrap();
        let u = gausson_1d(&g);
        let mass = E * E * PI.sqrt();
        assert!((g.mass(&u).unwrap() - mass).abs() < 1e-6);
        let e = f.energy(&u).unwrap();
        assert!((e.total - 0.5 * mass).abs() < 5e-3, "{}", e.total);
        assert!(
            (e.total - (e.kinetic + e.potential_term - e.entropy)).abs() <= 1e-12 * e.total.abs()
        );
        assert!(
            (e.norm_eps.powi(2) - 2.0 * (e.kinetic + e.potential_term)).abs()
                <= 1e-12 * e.norm_eps.powi(2)
        );
        let grad = f.gradient(&u).unwrap();
        assert!(grad.sup_norm() <= 1e-3);
        assert!(f.residual(&u).unwrap().sup_norm() <= 1e-3);
        assert!((f.nehari_scale(&u).unwrap() - 1.0).abs() < 1e-3);
        assert!(f.nehari_residual(&u).unwrap().relative <= 2e-3);
    }

    #[test]
    fn projection_properties() {
        let g = Grid::build(1, 6.0, 0.05).unwrap();
        let spec = PotentialSpec::multiwell(1, &[vec![0.0], vec![2.0]], 2.0, 0.25).unwrap();
        let params = EnergyParams::new(0.5, Potential::MultiWell(spec)).unwrap();
        let f = Functional::new(&g, &params).unwrap();
        let u = Field::from_fn(&g, |p| (1.0 + 0.3 * p[0]) * (-0.3 * p[0] * p[0]).exp());
        let (pu, _) = f.project(&u).unwrap();
        assert!((f.nehari_scale(&pu).unwrap() - 1.0).abs() < 1e-12);
        let res = f.nehari_residual(&pu).unwrap();
        assert!(res.relative <= 1e-12);
        assert!(res.characterization_gap <= 1e-11);

        // J'(2w)(2w) = 4 [J'(w)w − log 4 ∫w²] = −4 log 4 ∫w² on the Nehari set
        let doubled = pu.scaled(2.0);
        let e2 = f.energy(&doubled).unwrap();
        let expected = 4.0 * 4f64.ln() * g.mass(&pu).unwrap() / e2.norm_eps.powi(2).max(1.0);
        let got = f.nehari_residual(&doubled).unwrap().relative;
        assert!(got > 0.0);
        assert!((got - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn level_change_matches_and_resolves_tiny_steps() {
        let g = Grid::build(1, 6.0, 0.05).unwrap();
        let f = Functional::new(&g, &constant(1.0)).unwrap();
        let u = Field::from_fn(&g, |p| E * (-0.5 * p[0] * p[0]).exp());
        let bump = Field::from_fn(&g, |p| (-(p[0] - 0.3).powi(2)).exp());
        for t in [1e-1, 1e-3] {
            let v = u.axpy(t, &bump).unwrap();
            let direct = f.energy(&v).unwrap().total - f.energy(&u).unwrap().total;
            assert!(
                (f.level_change(&u, &v).unwrap() - direct).abs() <= 1e-12 * direct.abs().max(1.0)
            );
        }
        // a step far below the rounding of J is still resolved to second order
        let t = 1e-9;
        let plus = f.level_change(&u, &u.axpy(t, &bump).unwrap()).unwrap();
        let minus = f.level_change(&u, &u.axpy(-t, &bump).unwrap()).unwrap();
        let exact = t * grid_dot(&g, &f.gradient(&u).unwrap(), &bump);
        let odd = 0.5 * (plus - minus);
        assert!(
            (odd - exact).abs() <= 1e-6 * exact.abs(),
            "{odd} vs {exact}"
        );
        assert_eq!(f.level_change(&u, &u).unwrap(), 0.0);
        let z = Field::zeros(&g);
        assert!((f.level_change(&z, &u).unwrap() - f.energy(&u).unwrap().total).abs() < 1e-12);
    }

    fn grid_dot(_g: &Grid, a: &Field, b: &Field) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn scaling_identity_at_e() {
        let g = Grid::build(1, 6.0, 0.05).unwrap();
        let f = Functional::new(&g, &constant(1.0)).unwrap();
        let u = Field::from_fn(&g, |p| {
            (36.0 - p[0] * p[0]) * 0.05 * (1.0 + (2.0 * p[0]).sin())
        });
        let e = f.energy(&u).unwrap();
        let eu = f.energy(&u.scaled(E)).unwrap();
        let rhs = E * E * (e.total - e.mass);
        assert!((eu.total - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn log_sobolev_gausson_is_positive() {
        let g = Grid::build(1, 10.0, 0.01).unwrap();
        let u = gausson_1d(&g);
        let gap = log_sobolev_gap(&u, &g, default_log_sobolev_a()).unwrap();
        assert!(gap > 0.0);
        // analytic value for A e^{-x²/2}: m = A²√π, ∫|u'|² = m/2, ∫u² log u² = m(2 ln A − 1/2)
        let m = E * E * PI.sqrt();
        let a = default_log_sobolev_a();
        let exact = 0.25 * 0.5 * m + (m.ln() - (1.0 + a.ln())) * m - m * (2.0 - 0.5);
        assert!((gap - exact).abs() < 1e-3, "{gap} vs {exact}");
        let big = log_sobolev_gap(&u.scaled(10.0), &g, a).unwrap();
        assert!(big >= -1e-8);
    }

    #[test]
    fn growth_check_p3_and_p2() {
        let samples = growth_samples(0.1, 2000);
        let fit = f2_growth_check(0.1, 3.0, &samples);
        assert!(fit.c.is_finite() && fit.uniform);
        for &s in &samples {
            let df2 = f_split(s, 0.1).unwrap().df2;
            assert!(df2.abs() <= fit.c * s.powf(2.0) * (1.0 + 1e-12));
        }
        let inner: Vec<f64> = (1..50).map(|k| 0.1 * k as f64 / 50.0).collect();
        assert_eq!(f2_growth_check(0.1, 3.0, &inner).c, 0.0);
        let fit2 = f2_growth_check(0.1, 2.0, &samples);
        assert!(!fit2.uniform);
        let decades: Vec<f64> = fit2.per_decade.iter().map(|d| d.1).collect();
        assert!(decades.windows(2).skip(1).all(|w| w[1] > w[0]));
    }
}
