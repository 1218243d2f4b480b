//! Uniform tensor grids on the truncated box `[-R, R]^dim` with homogeneous
//! Dirichlet boundary, the five-point (three-point in 1D) Laplacian, and the
//! trapezoid quadrature induced by the grid.
//!
//! Node coordinates are `(i - (n-1)/2) * h`, so the grid is exactly symmetric
//! about the origin and nested grids with equal spacing share their nodes.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Spatial point; in 1D the second component is always zero.
pub type Point = [f64; 2];

pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Identity of a grid as seen by a field: two grids with the same shape have
/// identical node sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridShape {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    radius: f64,
    h: f64,
    n: usize,
    nodes: Vec<Point>,
    interior: Vec<bool>,
    weights: Vec<f64>,
}

impl Grid {
    /// Builds the grid over `[-R, R]^dim` with spacing `h`.
    pub fn build(dim: usize, radius: f64, h: f64) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::NonPositiveSpacing(h));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositiveRadius(radius));
        }
        let ratio = radius / h;
        if ratio < 8.0 {
            return Err(Error::DomainTooCoarse { ratio });
        }
        let cells_f = 2.0 * radius / h;
        let cells = cells_f.round();
        if ((cells_f - cells) / cells).abs() > 1e-9 {
            return Err(Error::NonConformingSpacing {
                h,
                two_r: 2.0 * radius,
            });
        }
        let n = cells as usize + 1;
        let centre = (n - 1) as f64 / 2.0;
        let axis: Vec<f64> = (0..n).map(|i| (i as f64 - centre) * h).collect();
        let total = n.pow(dim as u32);

        let mut nodes = Vec::with_capacity(total);
        let mut interior = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let edge = |i: usize| i == 0 || i == n - 1;
        match dim {
            1 => {
                for (i, &x) in axis.iter().enumerate() {
                    nodes.push([x, 0.0]);
                    interior.push(!edge(i));
                    weights.push(if edge(i) { 0.5 * h } else { h });
                }
            }
            _ => {
                for (iy, &y) in axis.iter().enumerate() {
                    for (ix, &x) in axis.iter().enumerate() {
                        nodes.push([x, y]);
                        interior.push(!edge(ix) && !edge(iy));
                        let wx = if edge(ix) { 0.5 * h } else { h };
                        let wy = if edge(iy) { 0.5 * h } else { h };
                        weights.push(wx * wy);
                    }
                }
            }
        }
        Ok(Grid {
            dim,
            radius,
            h,
            n,
            nodes,
            interior,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nodes per axis.
    pub fn n_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> GridShape {
        GridShape {
            dim: self.dim,
            n: self.n,
            h: self.h,
        }
    }

    /// Same grid with all lengths multiplied by `factor` (used for x -> eps x).
    pub fn scaled(&self, factor: f64) -> Result<Grid> {
        Grid::build(self.dim, self.radius * factor, self.h * factor)
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.shape != self.shape() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Returns `-Δ_h u`; rows belonging to boundary nodes are zero.
    pub fn laplacian(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = vec![0.0; self.len()];
        self.neg_laplacian_into(&u.values, &mut out);
        Ok(Field {
            shape: self.shape(),
            values: out,
        })
    }

    pub(crate) fn neg_laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        match self.dim {
            1 => {
                out[0] = 0.0;
                out[n - 1] = 0.0;
                for j in 1..n - 1 {
                    out[j] = (2.0 * u[j] - u[j - 1] - u[j + 1]) * inv_h2;
                }
            }
            _ => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for iy in 1..n - 1 {
                    let row = iy * n;
                    for ix in 1..n - 1 {
                        let j = row + ix;
                        out[j] = (4.0 * u[j] - u[j - 1] - u[j + 1] - u[j - n] - u[j + n]) * inv_h2;
                    }
                }
            }
        }
    }

    /// Discrete Dirichlet energy `Σ_edges h^{N−2} (u_a − u_b)²`. For fields
    /// vanishing on the boundary this equals `⟨u, −Δ_h u⟩` but avoids the
    /// `O(ε u²/h²)` cancellation of the stencil form.
    pub fn dirichlet_form(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let v = &u.values;
        Ok(self.edge_sum(|a, b| (v[b] - v[a]).powi(2)))
    }

    /// `dirichlet_form(b) − dirichlet_form(a)`, accumulated edge by edge as
    /// `(d_b − d_a)(d_b + d_a)` so that nearby fields give an accurate difference.
    pub fn dirichlet_form_change(&self, a: &Field, b: &Field) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        let (va, vb) = (&a.values, &b.values);
        Ok(self.edge_sum(|i, j| {
            let (da, db) = (va[j] - va[i], vb[j] - vb[i]);
            (db - da) * (db + da)
        }))
    }

    /// Compensated sum of `f` over grid edges, scaled by `h^{dim−2}`.
    fn edge_sum(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let n = self.n;
        match self.dim {
            1 => compensated_sum((0..n - 1).map(|i| f(i, i + 1))) / self.h,
            _ => {
                let rows =
                    (0..n).flat_map(|iy| (0..n - 1).map(move |ix| (iy * n + ix, iy * n + ix + 1)));
                let cols = (0..n - 1)
                    .flat_map(|iy| (0..n).map(move |ix| (iy * n + ix, (iy + 1) * n + ix)));
                compensated_sum(rows.chain(cols).map(|(a, b)| f(a, b)))
            }
        }
    }

    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        Ok(compensated_sum(
            self.weights.iter().zip(values).map(|(w, v)| w * v),
        ))
    }

    /// Weighted inner product `Σ w_j a_j b_j`.
    pub fn inner(&self, a: &Field, b: &Field) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.inner_slices(&a.values, &b.values))
    }

    pub(crate) fn inner_slices(&self, a: &[f64], b: &[f64]) -> f64 {
        compensated_sum(
            self.weights
                .iter()
                .zip(a)
                .zip(b)
                .map(|((w, x), y)| w * x * y),
        )
    }

    /// Discrete `∫u²`.
    pub fn mass(&self, u: &Field) -> Result<f64> {
        self.inner(u, u)
    }

    /// Offset (in nodes per axis) of this grid inside a larger grid with the same spacing.
    fn embedding_offset(&self, larger: &Grid) -> Result<usize> {
        if self.dim != larger.dim || (self.h - larger.h).abs() > 1e-12 * self.h {
            return Err(Error::SpacingMismatch(self.h, larger.h));
        }
        if larger.n < self.n {
            return Err(Error::ShrinkingDomain {
                from: self.radius,
                to: larger.radius,
            });
        }
        let diff = larger.n - self.n;
        if !diff.is_multiple_of(2) {
            return Err(Error::NonConformingSpacing {
                h: self.h,
                two_r: 2.0 * larger.radius,
            });
        }
        Ok(diff / 2)
    }

    /// Zero extension of `u` (living on `self`) onto the larger grid `target`.
    pub fn zero_extend(&self, u: &Field, target: &Grid) -> Result<Field> {
        self.check(u)?;
        if target.radius < self.radius - 1e-12 * self.radius {
            return Err(Error::ShrinkingDomain {
                from: self.radius,
                to: target.radius,
            });
        }
        let off = self.embedding_offset(target)?;
        let mut out = Field::zeros(target);
        let (n, m) = (self.n, target.n);
        match self.dim {
            1 => out.values[off..off + n].copy_from_slice(&u.values),
            _ => {
                for iy in 0..n {
                    let src = &u.values[iy * n..(iy + 1) * n];
                    let start = (iy + off) * m + off;
                    out.values[start..start + n].copy_from_slice(src);
                }
            }
        }
        Ok(out)
    }

    /// Restriction of `u` (living on the larger grid `source`) onto `self`.
    /// Values outside `self` are dropped; boundary nodes of `self` are zeroed.
    pub fn restrict(&self, u: &Field, source: &Grid) -> Result<Field> {
        source.check(u)?;
        let off = self.embedding_offset(source)?;
        let (n, m) = (self.n, source.n);
        let mut out = Field::zeros(self);
        match self.dim {
            1 => out.values.copy_from_slice(&u.values[off..off + n]),
            _ => {
                for iy in 0..n {
                    let start = (iy + off) * m + off;
                    out.values[iy * n..(iy + 1) * n].copy_from_slice(&u.values[start..start + n]);
                }
            }
        }
        out.enforce_dirichlet(self);
        Ok(out)
    }

    /// Index of the node closest to `p`.
    pub fn nearest_node(&self, p: Point) -> usize {
        let centre = (self.n - 1) as f64 / 2.0;
        let idx = |c: f64| ((c / self.h + centre).round().max(0.0) as usize).min(self.n - 1);
        match self.dim {
            1 => idx(p[0]),
            _ => idx(p[1]) * self.n + idx(p[0]),
        }
    }

    /// Distance from `p` to the boundary of the box (negative outside).
    pub fn margin(&self, p: Point) -> f64 {
        let half = (self.n - 1) as f64 / 2.0 * self.h;
        let mut m = half - p[0].abs();
        if self.dim == 2 {
            m = m.min(half - p[1].abs());
        }
        m
    }
}

/// Neumaier-compensated sum. Level comparisons near a minimizer need the
/// quadratures accurate well below the naive `O(n ε)` rounding.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}

/// Real-valued function sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    shape: GridShape,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field {
            shape: grid.shape(),
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at every interior node; boundary nodes are set to zero.
    pub fn from_fn(grid: &Grid, f: impl Fn(Point) -> f64) -> Field {
        let values = grid
            .nodes
            .iter()
            .zip(&grid.interior)
            .map(|(&p, &inside)| if inside { f(p) } else { 0.0 })
            .collect();
        Field {
            shape: grid.shape(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            shape: grid.shape(),
            values,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn lives_on(&self, grid: &Grid) -> bool {
        self.shape == grid.shape()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            shape: self.shape,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        if self.shape != other.shape {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Field {
            shape: self.shape,
            values,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn enforce_dirichlet(&mut self, grid: &Grid) {
        for (v, &inside) in self.values.iter_mut().zip(&grid.interior) {
            if !inside {
                *v = 0.0;
            }
        }
    }

    pub fn satisfies_dirichlet(&self, grid: &Grid) -> bool {
        self.values
            .iter()
            .zip(&grid.interior)
            .all(|(&v, &inside)| inside || v == 0.0)
    }

    /// Writes the field as CSV: a `dim,R,h` header pair, a column header, then
    /// one row per node with full (17 significant digit) precision.
    pub fn write_csv(&self, grid: &Grid, out: &mut impl Write) -> Result<()> {
        if !self.lives_on(grid) {
            return Err(Error::GridMismatch);
        }
        writeln!(out, "dim,R,h")?;
        writeln!(out, "{},{},{}", grid.dim, grid.radius, grid.h)?;
        if grid.dim == 1 {
            writeln!(out, "x,value")?;
        } else {
            writeln!(out, "x,y,value")?;
        }
        for (p, v) in grid.nodes.iter().zip(&self.values) {
            if grid.dim == 1 {
                writeln!(out, "{:.16e},{:.16e}", p[0], v)?;
            } else {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, grid: &Grid, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(grid, &mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`], rebuilding its grid.
    pub fn read_csv(input: impl BufRead) -> Result<(Grid, Field)> {
        let bad = |msg: &str| Error::Io(format!("malformed field csv: {msg}"));
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("truncated"))?
                .map_err(Error::from)
        };
        if next()?.trim() != "dim,R,h" {
            return Err(bad("missing dim,R,h header"));
        }
        let meta = next()?;
        let parts: Vec<&str> = meta.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(bad("metadata row"));
        }
        let dim: usize = parts[0].parse().map_err(|_| bad("dim"))?;
        let radius: f64 = parts[1].parse().map_err(|_| bad("R"))?;
        let h: f64 = parts[2].parse().map_err(|_| bad("h"))?;
        let grid = Grid::build(dim, radius, h)?;
        next()?;
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v = line.rsplit(',').next().ok_or_else(|| bad("row"))?;
            values.push(v.trim().parse::<f64>().map_err(|_| bad("value"))?);
        }
        let field = Field::from_values(&grid, values)?;
        Ok((grid, field))
    }
}
