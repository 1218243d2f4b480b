//! Barycenter map
//!
//! ```text
//! Q_ε(u) = ∫χ(εx) g(εx) u² / ∫g(εx) u²
//! ```
//!
//! with the truncation `χ(y) = y` for `|y| ≤ R0`, `R0 y/|y|` beyond, and the
//! radial weight `g = 1` on `B_R0`, `exp(−(|y| − R0))` outside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{distance, norm, Field, Grid, Point};
use crate::potential::WellGeometry;

/// Width of the band around `|q − z_i| = rho0` classified as boundary.
pub const BOUNDARY_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarycenterParams {
    pub r0: f64,
}

impl BarycenterParams {
    pub fn new(r0: f64) -> Self {
        BarycenterParams { r0 }
    }

    pub fn from_geometry(geometry: &WellGeometry) -> Self {
        BarycenterParams { r0: geometry.r0 }
    }

    pub fn chi(&self, y: Point) -> Point {
        let r = norm(y);
        if r <= self.r0 {
            y
        } else {
            [self.r0 * y[0] / r, self.r0 * y[1] / r]
        }
    }

    pub fn weight(&self, y: Point) -> f64 {
        let r = norm(y);
        if r <= self.r0 {
            1.0
        } else {
            (-(r - self.r0)).exp()
        }
    }
}

pub fn q_eps(u: &Field, eps: f64, params: &BarycenterParams, grid: &Grid) -> Result<Point> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    if !u.lives_on(grid) {
        return Err(Error::GridMismatch);
    }
    let (mut num, mut den) = ([0.0, 0.0], 0.0);
    for ((&p, &w), &s) in grid.nodes().iter().zip(grid.weights()).zip(u.values()) {
        if s == 0.0 {
            continue;
        }
        let y = [eps * p[0], eps * p[1]];
        let c = w * params.weight(y) * s * s;
        let chi = params.chi(y);
        num[0] += c * chi[0];
        num[1] += c * chi[1];
        den += c;
    }
    if !(den > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok([num[0] / den, num[1] / den])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `|q − z_i| < rho0`; `core` flags `|q − z_i| ≤ rho0/2`.
    Interior {
        well: usize,
        core: bool,
    },
    /// `|q − z_i| = rho0` within [`BOUNDARY_BAND`].
    Boundary {
        well: usize,
    },
    Outside,
}

impl Region {
    pub fn is_interior_of(&self, well: usize) -> bool {
        matches!(self, Region::Interior { well: w, .. } if *w == well)
    }

    pub fn is_core_of(&self, well: usize) -> bool {
        matches!(self, Region::Interior { well: w, core: true } if *w == well)
    }
}

/// Classifies a barycenter against the balls `B_rho0(z_i)`; wells are numbered from 1.
pub fn region_of(q: Point, geometry: &WellGeometry, wells: &[Point]) -> Region {
    for (i, &z) in (1..).zip(wells) {
        let d = distance(q, z);
        if (d - geometry.rho0).abs() <= BOUNDARY_BAND {
            return Region::Boundary { well: i };
        }
        if d < geometry.rho0 {
            return Region::Interior {
                well: i,
                core: d <= 0.5 * geometry.rho0,
            };
        }
    }
    Region::Outside
}
