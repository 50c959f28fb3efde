//! Uniform frequency grid over [−π, π) and Fourier-coefficient transforms.
//!
//! Grid point `r` sits at `λ_r = −π + 2πr/F`. A grid function is stored as
//! one matrix per grid point. Its Fourier coefficients follow the convention
//! `G(λ) = Σ_m ĝ(m) e^{−imλ}`, held in FFT bin layout: bin `m` for
//! `m = 0..F/2` and bin `m + F` for negative `m`. One-sided (causal)
//! functions occupy only the non-negative bins.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::{C64, CMat};

/// Angular frequency of grid point `r` on a grid of size `f`.
pub fn lambda(f: usize, r: usize) -> f64 {
    -PI + 2.0 * PI * (r as f64) / (f as f64)
}

/// Mean of a scalar function sampled on the grid, i.e. the quadrature of
/// `(1/2π)∫ G dλ`.
pub fn mean_real(values: impl Iterator<Item = f64>, f: usize) -> f64 {
    values.sum::<f64>() / f as f64
}

fn require_even(f: usize) -> Result<()> {
    if f < 2 || !f.is_multiple_of(2) {
        return Err(Error::InvalidParameter {
            name: "grid_size",
            msg: format!("grid size must be even and at least 2, got {f}"),
        });
    }
    Ok(())
}

/// FFT plans for one grid size, shared by the transforms below.
pub struct GridFft {
    f: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridFft {
    pub fn new(f: usize) -> Result<Self> {
        require_even(f)?;
        let mut planner = FftPlanner::new();
        Ok(GridFft {
            f,
            forward: planner.plan_fft_forward(f),
            inverse: planner.plan_fft_inverse(f),
        })
    }

    /// Fourier coefficients (bin layout) of a matrix function given on the
    /// grid: `ĝ(m) = (1/F) Σ_r G(λ_r) e^{imλ_r}`.
    pub fn grid_to_coeffs(&self, values: &[CMat]) -> Vec<CMat> {
        self.transform(values, false)
    }

    /// Evaluate a coefficient array (bin layout) on the grid:
    /// `G(λ_r) = Σ_m ĝ(m) e^{−imλ_r}`.
    pub fn coeffs_to_grid(&self, coeffs: &[CMat]) -> Vec<CMat> {
        self.transform(coeffs, true)
    }

    fn transform(&self, input: &[CMat], to_grid: bool) -> Vec<CMat> {
        let f = self.f;
        assert_eq!(input.len(), f, "input length must equal the grid size");
        let (rows, cols) = input[0].shape();
        let mut out = vec![CMat::zeros(rows, cols); f];
        let mut buf = vec![C64::new(0.0, 0.0); f];
        for i in 0..rows {
            for j in 0..cols {
                if to_grid {
                    for (m, item) in input.iter().enumerate() {
                        buf[m] = item[(i, j)];
                    }
                    self.forward.process(&mut buf);
                    // index s on the [0, 2π) circle maps to r = (s + F/2) mod F
                    for r in 0..f {
                        out[r][(i, j)] = buf[(r + f / 2) % f];
                    }
                } else {
                    for (s, slot) in buf.iter_mut().enumerate() {
                        *slot = input[(s + f / 2) % f][(i, j)];
                    }
                    self.inverse.process(&mut buf);
                    let scale = 1.0 / f as f64;
                    for (m, item) in out.iter_mut().enumerate() {
                        item[(i, j)] = buf[m] * scale;
                    }
                }
            }
        }
        out
    }
}

/// Hermitian part `(A + A*)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// How far `A` is from Hermitian, in Frobenius norm.
pub fn hermitian_defect(a: &CMat) -> f64 {
    (a - a.adjoint()).norm()
}

/// Smallest eigenvalue of the Hermitian part of `A`.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_round_trip() {
        let f = 16;
        let fft = GridFft::new(f).unwrap();
        // coefficients of 1.25 + cos λ: bins 0, 1 and F−1
        let mut coeffs = vec![CMat::zeros(1, 1); f];
        coeffs[0][(0, 0)] = c(1.25, 0.0);
        coeffs[1][(0, 0)] = c(0.5, 0.0);
        coeffs[f - 1][(0, 0)] = c(0.5, 0.0);
        let grid = fft.coeffs_to_grid(&coeffs);
        for (r, m) in grid.iter().enumerate() {
            let expect = 1.25 + lambda(f, r).cos();
            assert!((m[(0, 0)] - c(expect, 0.0)).norm() < 1e-12);
        }
        let back = fft.grid_to_coeffs(&grid);
        for (a, b) in back.iter().zip(coeffs.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn odd_grid_rejected() {
        assert!(GridFft::new(15).is_err());
    }

    #[test]
    fn min_eigenvalue_of_diag() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0)]));
        assert!((min_eigenvalue(&m) + 1.0).abs() < 1e-12);
    }
}
