//! Matrix spectral densities on a frequency grid, canonical factorization,
//! and the inverse factor.
//!
//! A density is a Hermitian positive semidefinite matrix function sampled on
//! the uniform grid of [`crate::grid`]. Canonical factorization writes a
//! uniformly positive definite density as `P(λ)P*(λ)` with
//! `P(λ) = Σ_u d(u)e^{−iuλ}` one-sided and `d(0)` lower triangular with a
//! positive real diagonal. The factorization is computed by Wilson's
//! Newton-type iteration on the grid; the inverse factor `b` with
//! `b(λ)d(λ) = I` follows from the exact convolution recursion.

use crate::error::{Error, Result};
use crate::grid::{self, GridFft};
use crate::{C64, CMat};

/// Default frequency grid size.
pub const DEFAULT_GRID_SIZE: usize = 1024;
/// Default minimum eigenvalue for a density to count as uniformly positive.
pub const DEFAULT_EPS_PD: f64 = 1e-10;
/// Default relative residual target for the factorization.
pub const DEFAULT_FACTOR_TOL: f64 = 1e-10;
/// Default iteration cap for the factorization.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Default multiplier for the inverse-factor truncation order `Lb = 4L`.
pub const DEFAULT_INVERSE_ORDER_FACTOR: usize = 4;
/// Tail norms above this threshold are flagged as truncation warnings.
pub const TAIL_WARN_THRESHOLD: f64 = 1e-8;

/// Hermitian matrix-valued function sampled on the frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensityGrid {
    k: usize,
    values: Vec<CMat>,
}

impl SpectralDensityGrid {
    /// Wrap grid samples, checking shape and Hermitian symmetry (defect at
    /// most `1e−12` relative to the matrix scale). Stored values are
    /// symmetrized exactly.
    pub fn new(values: Vec<CMat>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("density grid has no points"));
        }
        let k = values[0].nrows();
        let mut sym = Vec::with_capacity(values.len());
        for (r, v) in values.iter().enumerate() {
            if v.nrows() != k || v.ncols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "grid point {r} is {}x{}, expected {k}x{k}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            let defect = grid::hermitian_defect(v);
            if defect > 1e-12 * v.norm().max(1.0) {
                return Err(Error::NotHermitian {
                    index: r,
                    asymmetry: defect,
                });
            }
            sym.push(grid::hermitian_part(v));
        }
        Ok(SpectralDensityGrid { k, values: sym })
    }

    /// Constant density `mat` at every grid point.
    pub fn constant(mat: CMat, grid_size: usize) -> Result<Self> {
        SpectralDensityGrid::new(vec![mat; grid_size])
    }

    /// White density `σ²·I`.
    pub fn white(k: usize, grid_size: usize, sigma2: f64) -> Self {
        let m = CMat::identity(k, k) * C64::new(sigma2, 0.0);
        SpectralDensityGrid::constant(m, grid_size).expect("scaled identity is Hermitian")
    }

    /// Identically zero density.
    pub fn zero(k: usize, grid_size: usize) -> Self {
        SpectralDensityGrid::constant(CMat::zeros(k, k), grid_size).expect("zero is Hermitian")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn value(&self, r: usize) -> &CMat {
        &self.values[r]
    }

    /// Largest Frobenius norm over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.sup_norm() <= tol
    }

    /// Smallest eigenvalue over the grid and the point where it occurs.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (r, m) in self.values.iter().enumerate() {
            let e = grid::min_eigenvalue(m);
            if e < best.0 {
                best = (e, r);
            }
        }
        best
    }

    /// Per-component second moments `(1/2π)∫ f_kk dλ` by grid quadrature.
    pub fn trace_moments(&self) -> Vec<f64> {
        (0..self.k)
            .map(|i| grid::mean_real(self.values.iter().map(|m| m[(i, i)].re), self.grid_size()))
            .collect()
    }

    /// Error unless every grid point is positive semidefinite within `tol`.
    pub fn assert_psd(&self, tol: f64) -> Result<()> {
        let (min, idx) = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
                index: idx,
            });
        }
        Ok(())
    }

    /// Pointwise sum; grids must agree in size and dimension.
    pub fn add(&self, other: &SpectralDensityGrid) -> Result<SpectralDensityGrid> {
        self.check_aligned(other)?;
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a + b)
            .collect();
        SpectralDensityGrid::new(values)
    }

    pub fn check_aligned(&self, other: &SpectralDensityGrid) -> Result<()> {
        if self.k != other.k || self.grid_size() != other.grid_size() {
            return Err(Error::GridMismatch(format!(
                "{}x{} on {} points vs {}x{} on {} points",
                self.k,
                self.k,
                self.grid_size(),
                other.k,
                other.k,
                other.grid_size()
            )));
        }
        Ok(())
    }
}

/// One-sided matrix polynomial `Σ_{u=0}^{L} c(u) e^{−iuλ}` with `K×M`
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMAPolynomial {
    rows: usize,
    cols: usize,
    coeffs: Vec<CMat>,
}

impl MatrixMAPolynomial {
    pub fn new(coeffs: Vec<CMat>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyInput("polynomial needs at least one coefficient"));
        }
        let (rows, cols) = coeffs[0].shape();
        for (u, c) in coeffs.iter().enumerate() {
            if c.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {u} is {}x{}, expected {rows}x{cols}",
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        Ok(MatrixMAPolynomial { rows, cols, coeffs })
    }

    /// Scalar polynomial from real coefficients.
    pub fn scalar(coeffs: &[f64]) -> Self {
        let coeffs = coeffs
            .iter()
            .map(|&v| CMat::from_element(1, 1, C64::new(v, 0.0)))
            .collect();
        MatrixMAPolynomial::new(coeffs).expect("scalar coefficients are well formed")
    }

    /// The zero polynomial of the given shape.
    pub fn zero(rows: usize, cols: usize) -> Self {
        MatrixMAPolynomial {
            rows,
            cols,
            coeffs: vec![CMat::zeros(rows, cols)],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    /// Coefficient at lag `u`, zero beyond the stored order.
    pub fn coeff(&self, u: usize) -> CMat {
        self.coeffs
            .get(u)
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.rows, self.cols))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.norm() <= tol)
    }

    /// `Σ_u ‖c(u)‖²_F`.
    pub fn coeff_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_squared()).sum()
    }

    /// Frobenius norm of the last stored coefficient; a proxy for the
    /// truncation tail.
    pub fn tail_norm(&self) -> f64 {
        self.coeffs.last().map(|c| c.norm()).unwrap_or(0.0)
    }

    /// Evaluate `Σ_u c(u) e^{−iuλ}`.
    pub fn eval(&self, lambda: f64) -> CMat {
        let mut acc = CMat::zeros(self.rows, self.cols);
        for (u, c) in self.coeffs.iter().enumerate() {
            acc += c * C64::from_polar(1.0, -(u as f64) * lambda);
        }
        acc
    }

    /// Evaluate on every point of a grid of the given size.
    pub fn eval_on_grid(&self, grid_size: usize) -> Vec<CMat> {
        (0..grid_size)
            .map(|r| self.eval(grid::lambda(grid_size, r)))
            .collect()
    }
}

/// Matrix covariances `R(0), …, R(Lmax)`; negative lags follow from
/// `R(−j) = R(j)*`.
#[derive(Debug, Clone)]
pub struct CovarianceSequence {
    k: usize,
    lags: Vec<CMat>,
}

impl CovarianceSequence {
    pub fn new(lags: Vec<CMat>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::EmptyInput("covariance sequence needs lag 0"));
        }
        let k = lags[0].nrows();
        for (j, m) in lags.iter().enumerate() {
            if m.shape() != (k, k) {
                return Err(Error::DimensionMismatch(format!(
                    "lag {j} is {}x{}, expected {k}x{k}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(CovarianceSequence { k, lags })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    /// `R(j)` for any integer `j` within the stored range.
    pub fn lag(&self, j: i64) -> CMat {
        let a = j.unsigned_abs() as usize;
        assert!(a <= self.max_lag(), "lag {j} beyond stored range");
        if j >= 0 {
            self.lags[a].clone()
        } else {
            self.lags[a].adjoint()
        }
    }

    /// Block-Toeplitz covariance of `n` stacked consecutive blocks, with
    /// block `(i, j) = R(j − i)`.
    pub fn block_toeplitz(&self, n: usize) -> Result<CMat> {
        if n == 0 {
            return Err(Error::EmptyInput("block count must be positive"));
        }
        if n - 1 > self.max_lag() {
            return Err(Error::InsufficientHistory {
                needed: n - 1,
                got: self.max_lag(),
            });
        }
        let k = self.k;
        let mut m = CMat::zeros(n * k, n * k);
        for i in 0..n {
            for j in 0..n {
                let block = self.lag(j as i64 - i as i64);
                m.view_mut((i * k, j * k), (k, k)).copy_from(&block);
            }
        }
        Ok(m)
    }

    /// Smallest eigenvalue of the block-Toeplitz matrix over `n` blocks.
    pub fn min_toeplitz_eigenvalue(&self, n: usize) -> Result<f64> {
        Ok(grid::min_eigenvalue(&self.block_toeplitz(n)?))
    }
}

/// `values[r] = P(λ_r)·P*(λ_r)` for a one-sided polynomial `P`.
///
/// Requires `F ≥ 2L + 1` so the trigonometric polynomial is not aliased.
pub fn density_from_ma(p: &MatrixMAPolynomial, grid_size: usize) -> Result<SpectralDensityGrid> {
    if grid_size < 2 * p.order() + 1 {
        return Err(Error::GridTooSmall {
            f: grid_size,
            needed: 2 * p.order() + 1,
        });
    }
    let values = p
        .eval_on_grid(grid_size)
        .into_iter()
        .map(|m| {
            let mm = &m * m.adjoint();
            grid::hermitian_part(&mm)
        })
        .collect();
    SpectralDensityGrid::new(values)
}

/// Covariances `R(j) = (1/2π)∫ e^{ijλ} f(λ) dλ` by grid quadrature, for
/// `j = 0..Lmax`. Requires `Lmax < F/2`.
pub fn covariances_from_density(
    f: &SpectralDensityGrid,
    max_lag: usize,
) -> Result<CovarianceSequence> {
    let fsize = f.grid_size();
    if max_lag >= fsize / 2 {
        return Err(Error::GridTooSmall {
            f: fsize,
            needed: 2 * (max_lag + 1),
        });
    }
    let scale = C64::new(1.0 / fsize as f64, 0.0);
    let mut lags = Vec::with_capacity(max_lag + 1);
    for j in 0..=max_lag {
        let mut acc = CMat::zeros(f.k(), f.k());
        for (r, v) in f.values().iter().enumerate() {
            acc += v * (C64::from_polar(1.0, j as f64 * grid::lambda(fsize, r)) * scale);
        }
        lags.push(acc);
    }
    CovarianceSequence::new(lags)
}

/// Knobs for [`factorize`].
#[derive(Debug, Clone)]
pub struct FactorizeOptions {
    /// Relative sup-norm residual target.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Minimum eigenvalue for the density to count as uniformly positive.
    pub eps_pd: f64,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        FactorizeOptions {
            tol: DEFAULT_FACTOR_TOL,
            max_iter: DEFAULT_MAX_ITER,
            eps_pd: DEFAULT_EPS_PD,
        }
    }
}

fn factor_residual(density: &SpectralDensityGrid, grid_vals: &[CMat]) -> f64 {
    density
        .values()
        .iter()
        .zip(grid_vals.iter())
        .map(|(s, p)| {
            let approx = p * p.adjoint();
            (s - approx).norm() / s.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Canonical spectral factorization of a uniformly positive definite square
/// density by Wilson's iteration.
///
/// Returns `d(0..L)` with `d(0)` lower triangular with a positive real
/// diagonal, such that the relative residual
/// `sup_r ‖f[r] − P(λ_r)P*(λ_r)‖_F / ‖f[r]‖_F` is at most `opts.tol`.
pub fn factorize(
    density: &SpectralDensityGrid,
    order: usize,
    opts: &FactorizeOptions,
) -> Result<MatrixMAPolynomial> {
    let k = density.k();
    let fsize = density.grid_size();
    if order >= fsize / 2 {
        return Err(Error::GridTooSmall {
            f: fsize,
            needed: 2 * (order + 1),
        });
    }
    let (min_eig, idx) = density.min_eigenvalue();
    if min_eig < opts.eps_pd {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_eig,
            index: idx,
        });
    }
    let fft = GridFft::new(fsize)?;

    // start from the constant factor given by the Cholesky root of R(0)
    let mut r0 = CMat::zeros(k, k);
    for v in density.values() {
        r0 += v;
    }
    r0 *= C64::new(1.0 / fsize as f64, 0.0);
    let chol = nalgebra::linalg::Cholesky::new(grid::hermitian_part(&r0)).ok_or(
        Error::NotPositiveDefinite {
            min_eigenvalue: min_eig,
            index: idx,
        },
    )?;
    let mut psi: Vec<CMat> = vec![chol.l(); fsize];

    let identity = CMat::identity(k, k);
    let mut last_residual = f64::INFINITY;
    for iter in 0..opts.max_iter {
        // g = psi^{-1} S psi^{-*} + I, pointwise
        let mut g = Vec::with_capacity(fsize);
        for (p, s) in psi.iter().zip(density.values().iter()) {
            let lu = p.clone().lu();
            let y = lu.solve(s).ok_or(Error::FactorizationDiverged {
                iterations: iter,
                residual: last_residual,
            })?;
            let w = lu
                .solve(&y.adjoint())
                .ok_or(Error::FactorizationDiverged {
                    iterations: iter,
                    residual: last_residual,
                })?;
            g.push(w.adjoint() + &identity);
        }
        // causal part: halve the zero lag, drop negative lags and Nyquist
        let mut coeffs = fft.grid_to_coeffs(&g);
        coeffs[0] *= C64::new(0.5, 0.0);
        for c in coeffs.iter_mut().skip(fsize / 2) {
            c.fill(C64::new(0.0, 0.0));
        }
        let gplus = fft.coeffs_to_grid(&coeffs);
        for (p, gp) in psi.iter_mut().zip(gplus.iter()) {
            *p = &*p * gp;
        }
        last_residual = factor_residual(density, &psi);
        if last_residual <= opts.tol {
            break;
        }
    }
    if last_residual > opts.tol {
        return Err(Error::FactorizationDiverged {
            iterations: opts.max_iter,
            residual: last_residual,
        });
    }

    // truncate to the requested order and rotate by a constant unitary so
    // d(0) is lower triangular with a positive real diagonal
    let coeffs = fft.grid_to_coeffs(&psi);
    let mut d: Vec<CMat> = coeffs.into_iter().take(order + 1).collect();
    while d.len() < order + 1 {
        d.push(CMat::zeros(k, k));
    }
    let qr = d[0].adjoint().qr();
    let (q, r) = (qr.q(), qr.r());
    let mut phases = CMat::identity(k, k);
    for i in 0..k {
        let rii = r[(i, i)];
        if rii.norm() <= f64::MIN_POSITIVE {
            return Err(Error::SingularLeadingCoefficient);
        }
        // diag(L) = conj(diag(R)); rotate each column to make it positive
        phases[(i, i)] = rii / rii.norm();
    }
    let rotation = q * phases;
    for c in d.iter_mut() {
        *c = &*c * &rotation;
    }
    let poly = MatrixMAPolynomial::new(d)?;

    // the truncated, rotated factor must still reproduce the density
    let final_residual = factor_residual(density, &poly.eval_on_grid(fsize));
    if final_residual > opts.tol {
        return Err(Error::FactorizationDiverged {
            iterations: opts.max_iter,
            residual: final_residual,
        });
    }
    Ok(poly)
}

/// One-sided inverse of a square factor: `b(0) = d(0)^{−1}` and
/// `Σ_{u=0}^{n} b(u)d(n−u) = 0` for `1 ≤ n ≤ Lb`, exactly.
pub fn invert_factor(d: &MatrixMAPolynomial, order: usize) -> Result<MatrixMAPolynomial> {
    if d.rows() != d.cols() {
        return Err(Error::DimensionMismatch(format!(
            "inverse factor needs a square polynomial, got {}x{}",
            d.rows(),
            d.cols()
        )));
    }
    let d0_inv = d
        .coeff(0)
        .try_inverse()
        .ok_or(Error::SingularLeadingCoefficient)?;
    let mut b: Vec<CMat> = Vec::with_capacity(order + 1);
    b.push(d0_inv.clone());
    for n in 1..=order {
        let mut acc = CMat::zeros(d.rows(), d.rows());
        for (u, bu) in b.iter().enumerate() {
            if n - u <= d.order() {
                acc += bu * d.coeff(n - u);
            }
        }
        b.push(-acc * &d0_inv);
    }
    MatrixMAPolynomial::new(b)
}

/// Pointwise difference `P(λ)P*(λ) − known(λ)` with the grid points where
/// it fails positive semidefiniteness flagged rather than clipped.
#[derive(Debug, Clone)]
pub struct ResidualDensity {
    pub grid: SpectralDensityGrid,
    /// Grid points whose smallest eigenvalue is below `−1e−10`.
    pub negative_points: Vec<usize>,
    pub min_eigenvalue: f64,
}

impl ResidualDensity {
    pub fn is_feasible(&self) -> bool {
        self.negative_points.is_empty()
    }

    /// The residual density, or an error if any point was flagged.
    pub fn strict(self) -> Result<SpectralDensityGrid> {
        if !self.negative_points.is_empty() {
            return Err(Error::InfeasibleResidual {
                count: self.negative_points.len(),
                worst: self.min_eigenvalue,
            });
        }
        Ok(self.grid)
    }
}

/// Subtract a known density from the density generated by `sum_factor`.
pub fn residual_density_subtract(
    sum_factor: &MatrixMAPolynomial,
    known: &SpectralDensityGrid,
) -> Result<ResidualDensity> {
    if sum_factor.rows() != known.k() {
        return Err(Error::DimensionMismatch(format!(
            "factor has {} rows, density is {}x{}",
            sum_factor.rows(),
            known.k(),
            known.k()
        )));
    }
    let fsize = known.grid_size();
    let values: Vec<CMat> = sum_factor
        .eval_on_grid(fsize)
        .into_iter()
        .zip(known.values().iter())
        .map(|(p, kn)| grid::hermitian_part(&(&p * p.adjoint())) - kn)
        .collect();
    let grid = SpectralDensityGrid::new(values)?;
    let mut negative_points = Vec::new();
    let mut min_eig = f64::INFINITY;
    for (r, v) in grid.values().iter().enumerate() {
        let e = grid::min_eigenvalue(v);
        min_eig = min_eig.min(e);
        if e < -1e-10 {
            negative_points.push(r);
        }
    }
    Ok(ResidualDensity {
        grid,
        negative_points,
        min_eigenvalue: min_eig,
    })
}
