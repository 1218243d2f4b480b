//! Multi-well potentials `V(x) = V_inf - (V_inf - 1) max_i exp(-|x - z_i|^2 / w)`.
//!
//! Every member of the family satisfies `V(z_i) = 1 = min V`, `1 <= V < V_inf`
//! and `V -> V_inf` at infinity, with the first well pinned at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{distance, norm, Grid, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    dim: usize,
    wells: Vec<Point>,
    v_inf: f64,
    width: f64,
}

impl PotentialSpec {
    /// Validates and builds the inverted max-of-Gaussians potential. Each well is
    /// given as a coordinate tuple of length `dim`.
    pub fn multiwell(dim: usize, wells: &[Vec<f64>], v_inf: f64, width: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if wells.is_empty() {
            return Err(Error::NoWells);
        }
        let mut points = Vec::with_capacity(wells.len());
        for (index, w) in wells.iter().enumerate() {
            if w.len() != dim || w.iter().any(|c| !c.is_finite()) {
                return Err(Error::WellDimension {
                    index,
                    got: w.len(),
                    dim,
                });
            }
            points.push(if dim == 1 { [w[0], 0.0] } else { [w[0], w[1]] });
        }
        if points[0] != [0.0, 0.0] {
            return Err(Error::MissingOriginWell(wells[0].clone()));
        }
        if !(v_inf > 1.0) || !v_inf.is_finite() {
            return Err(Error::FlatPotential(v_inf));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::NonPositiveWidth(width));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(Error::DuplicateWells(i, j));
                }
            }
        }
        Ok(PotentialSpec {
            dim,
            wells: points,
            v_inf,
            width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wells(&self) -> &[Point] {
        &self.wells
    }

    /// Number of wells `l`.
    pub fn len(&self) -> usize {
        self.wells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wells.is_empty()
    }

    pub fn v_inf(&self) -> f64 {
        self.v_inf
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    fn nearest_sq(&self, x: Point) -> f64 {
        self.wells
            .iter()
            .map(|&z| distance(x, z).powi(2))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, x: Point) -> f64 {
        self.v_inf - (self.v_inf - 1.0) * (-self.nearest_sq(x) / self.width).exp()
    }

    /// `log(V_inf - V(x))`, finite for every `x`; certifies `V < V_inf` even where
    /// the difference underflows in double precision.
    pub fn log_gap(&self, x: Point) -> f64 {
        (self.v_inf - 1.0).ln() - self.nearest_sq(x) / self.width
    }
}

/// Potential as seen by the energy: either a multi-well profile or a constant
/// (the latter for the constant-coefficient reference problems).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Constant(f64),
    MultiWell(PotentialSpec),
}

impl Potential {
    pub fn value(&self, x: Point) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::MultiWell(spec) => spec.value(x),
        }
    }

    pub fn wells(&self) -> &[Point] {
        match self {
            Potential::Constant(_) => &[],
            Potential::MultiWell(spec) => spec.wells(),
        }
    }

    /// `V(eps x_j)` at every node.
    pub fn tabulate(&self, eps: f64, grid: &Grid) -> Result<Vec<f64>> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::NonPositiveEpsilon(eps));
        }
        Ok(grid
            .nodes()
            .iter()
            .map(|p| self.value([eps * p[0], eps * p[1]]))
            .collect())
    }
}

/// Tabulates `V(eps x)` on the nodes of `grid`.
pub fn eval_scaled(spec: &PotentialSpec, eps: f64, grid: &Grid) -> Result<Vec<f64>> {
    Potential::MultiWell(spec.clone()).tabulate(eps, grid)
}

/// Localization radius `rho0` and barycenter truncation radius `R0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellGeometry {
    pub rho0: f64,
    pub r0: f64,
}

impl WellGeometry {
    /// `rho0 = min_{i != j} |z_i - z_j| / 4` (1 for a single well) and
    /// `R0 = 2 max(1, max_i |z_i|)`.
    pub fn default_for(wells: &[Point]) -> WellGeometry {
        let rho0 = min_separation(wells).map_or(1.0, |d| 0.25 * d);
        let far = wells.iter().map(|&z| norm(z)).fold(1.0, f64::max);
        WellGeometry {
            rho0,
            r0: 2.0 * far,
        }
    }

    /// Violations of the disjointness and containment constraints.
    pub fn violations(&self, wells: &[Point]) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.rho0 > 0.0) {
            out.push(format!("rho0 = {} must be positive", self.rho0));
        }
        if let Some(d) = min_separation(wells) {
            if !(self.rho0 < 0.5 * d) {
                out.push(format!(
                    "closed balls of radius rho0 = {} around the wells overlap (min separation {})",
                    self.rho0, d
                ));
            }
        }
        for (i, &z) in wells.iter().enumerate() {
            if !(norm(z) + self.rho0 <= self.r0) {
                out.push(format!(
                    "ball B(z_{}, rho0) is not inside B(0, R0): |z| + rho0 = {} > R0 = {}",
                    i + 1,
                    norm(z) + self.rho0,
                    self.r0
                ));
            }
        }
        out
    }
}

fn min_separation(wells: &[Point]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..wells.len() {
        for j in i + 1..wells.len() {
            let d = distance(wells[i], wells[j]);
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellCheck {
    pub well: usize,
    pub inside_domain: bool,
    /// Smallest nodal value of V within `h sqrt(dim)` of the well.
    pub local_min: Option<f64>,
    pub ok: bool,
}

/// Numerical audit of the hypotheses on a grid (in the original, unscaled variable).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub min_value: f64,
    pub min_ok: bool,
    pub wells: Vec<WellCheck>,
    /// `V < V_inf` at every node, certified through `log(V_inf - V)` being finite.
    pub upper_ok: bool,
    /// `max |V - V_inf| / (V_inf - 1)` over boundary nodes.
    pub tail_ratio: f64,
    /// Warning only: the truncation is tight when the tail ratio exceeds 0.01.
    pub tail_ok: bool,
    pub geometry_issues: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.min_ok
            && self.upper_ok
            && self.wells.iter().all(|w| w.ok)
            && self.geometry_issues.is_empty()
    }
}

pub fn validate(spec: &PotentialSpec, geometry: &WellGeometry, grid: &Grid) -> ValidationReport {
    let values: Vec<f64> = grid.nodes().iter().map(|&p| spec.value(p)).collect();
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let reach = grid.h() * (grid.dim() as f64).sqrt() * (1.0 + 1e-12);
    // off-node minimum bound: V(x) - 1 <= (V_inf - 1) |x - z|^2 / w
    let slack = (spec.v_inf - 1.0) * reach * reach / spec.width;

    let wells = spec
        .wells
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let inside_domain = grid.margin(z) >= 0.0;
            let local_min = grid
                .nodes()
                .iter()
                .zip(&values)
                .filter(|(p, _)| distance(**p, z) <= reach)
                .map(|(_, &v)| v)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
            let ok = inside_domain && local_min.is_some_and(|m| m - 1.0 <= slack + 1e-12);
            WellCheck {
                well: i + 1,
                inside_domain,
                local_min,
                ok,
            }
        })
        .collect();

    let upper_ok = grid.nodes().iter().all(|&p| spec.log_gap(p).is_finite());
    let tail_ratio = grid
        .nodes()
        .iter()
        .zip(grid.interior_mask())
        .filter(|(_, &inside)| !inside)
        .map(|(&p, _)| (spec.log_gap(p) - (spec.v_inf - 1.0).ln()).exp())
        .fold(0.0, f64::max);

    ValidationReport {
        min_value,
        min_ok: min_value >= 1.0 - 1e-12,
        wells,
        upper_ok,
        tail_ratio,
        tail_ok: tail_ratio < 0.01,
        geometry_issues: geometry.violations(&spec.wells),
    }
}
