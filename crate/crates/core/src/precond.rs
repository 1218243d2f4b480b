//! Inverse of the shifted Dirichlet Laplacian `−Δ_h + c`, used to turn the
//! L² residual into the H¹ Riesz gradient.
//!
//! 1D uses the Thomas algorithm. 2D uses fast diagonalization: the interior
//! operator is `T ⊗ I + I ⊗ T + c` and `T` is diagonalized by the orthonormal,
//! self-inverse type-I discrete sine transform, evaluated through an FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Clone)]
pub struct ShiftedLaplacian {
    dim: usize,
    n: usize,
    shift: f64,
    inv_h2: f64,
    /// Interior size `m = n − 2`.
    m: usize,
    /// Length-`2(m+1)` FFT, 2D only.
    fft: Option<Arc<dyn Fft<f64>>>,
    /// Eigenvalues of the 1D interior operator `T`.
    eig: Vec<f64>,
}

impl std::fmt::Debug for ShiftedLaplacian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftedLaplacian")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("shift", &self.shift)
            .finish()
    }
}

impl ShiftedLaplacian {
    pub fn new(grid: &Grid, shift: f64) -> Result<Self> {
        if !(shift > 0.0) {
            return Err(Error::Config(format!(
                "preconditioner shift {shift} must be positive"
            )));
        }
        let n = grid.n_axis();
        let m = n - 2;
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let (mut fft, mut eig) = (None, Vec::new());
        if grid.dim() == 2 {
            let theta = std::f64::consts::PI / (m + 1) as f64;
            fft = Some(FftPlanner::new().plan_fft_forward(2 * (m + 1)));
            eig = (1..=m)
                .map(|k| 4.0 * inv_h2 * (0.5 * theta * k as f64).sin().powi(2))
                .collect();
        }
        Ok(ShiftedLaplacian {
            dim: grid.dim(),
            n,
            shift,
            inv_h2,
            m,
            fft,
            eig,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `(−Δ_h + c) g = r` at interior nodes with `g = 0` on the boundary.
    pub fn solve(&self, r: &Field, grid: &Grid) -> Result<Field> {
        self.check(r, grid)?;
        let mut g = Field::zeros(grid);
        match self.dim {
            1 => self.thomas(r.values(), None, g.values_mut()),
            _ => self.diagonalized(r.values(), g.values_mut()),
        }
        Ok(g)
    }

    /// Solves `(−Δ_h + c(x)) g = r` with a nodal shift `c > 0`; 1D only.
    pub fn solve_variable(&self, r: &Field, shift: &[f64], grid: &Grid) -> Result<Field> {
        self.check(r, grid)?;
        if self.dim != 1 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if shift.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let mut g = Field::zeros(grid);
        self.thomas(r.values(), Some(shift), g.values_mut());
        Ok(g)
    }

    fn check(&self, r: &Field, grid: &Grid) -> Result<()> {
        if !r.lives_on(grid) || grid.n_axis() != self.n || grid.dim() != self.dim {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn thomas(&self, r: &[f64], shift: Option<&[f64]>, g: &mut [f64]) {
        let m = self.m;
        let diag = |i: usize| 2.0 * self.inv_h2 + shift.map_or(self.shift, |c| c[i + 1]);
        let off = -self.inv_h2;
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        c[0] = off / diag(0);
        d[0] = r[1] / diag(0);
        for i in 1..m {
            let denom = diag(i) - off * c[i - 1];
            c[i] = off / denom;
            d[i] = (r[i + 1] - off * d[i - 1]) / denom;
        }
        g[m] = d[m - 1];
        for i in (0..m - 1).rev() {
            g[i + 1] = d[i] - c[i] * g[i + 2];
        }
    }

    fn diagonalized(&self, r: &[f64], g: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        let mut a = vec![0.0; m * m];
        for iy in 0..m {
            a[iy * m..(iy + 1) * m].copy_from_slice(&r[(iy + 1) * n + 1..(iy + 1) * n + 1 + m]);
        }
        self.dst_2d(&mut a);
        for iy in 0..m {
            for ix in 0..m {
                a[iy * m + ix] /= self.eig[iy] + self.eig[ix] + self.shift;
            }
        }
        self.dst_2d(&mut a);
        for iy in 0..m {
            g[(iy + 1) * n + 1..(iy + 1) * n + 1 + m].copy_from_slice(&a[iy * m..(iy + 1) * m]);
        }
    }

    /// Orthonormal DST-I along rows, then along columns.
    fn dst_2d(&self, a: &mut [f64]) {
        let m = self.m;
        let fft = self.fft.as_ref().expect("2D operator has an FFT plan");
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * (m + 1)];
        let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![0.0; m];
        for iy in 0..m {
            line.copy_from_slice(&a[iy * m..(iy + 1) * m]);
            dst1(&mut line, fft.as_ref(), &mut buf, &mut scratch);
            a[iy * m..(iy + 1) * m].copy_from_slice(&line);
        }
        for ix in 0..m {
            for iy in 0..m {
                line[iy] = a[iy * m + ix];
            }
            dst1(&mut line, fft.as_ref(), &mut buf, &mut scratch);
            for iy in 0..m {
                a[iy * m + ix] = line[iy];
            }
        }
    }
}

/// Orthonormal DST-I, `x_j ← √(2/(m+1)) Σ_k x_k sin(π jk/(m+1))`, via the FFT of
/// the odd extension of length `2(m+1)`.
fn dst1(x: &mut [f64], fft: &dyn Fft<f64>, buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
    let m = x.len();
    let len = buf.len();
    buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
    for k in 1..=m {
        buf[k].re = x[k - 1];
        buf[len - k].re = -x[k - 1];
    }
    fft.process_with_scratch(buf, scratch);
    let norm = (2.0 / (m + 1) as f64).sqrt();
    for j in 1..=m {
        x[j - 1] = -0.5 * norm * buf[j].im;
    }
}
