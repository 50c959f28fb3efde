//! Spectral characteristic and mean-square error of the optimal one-sided
//! linear estimate, by both dual routes.
//!
//! The estimated functional is `Aζ = Σ_j ā_j^⊤ ζ̄_{−j}` with weight blocks
//! `ā_j`, and the estimate draws on observation blocks `x̄_{−j} = ζ̄_{−j} +
//! θ̄_{−j}`, `j ≥ 0`. With `d` the canonical factor of `f + g`, `b` its
//! one-sided inverse, `φ` the factor of `f` and `ψ` the factor of `g`, the
//! optimal characteristic and error come out either through the noise factor,
//!
//! `h = A(e^{iλ}) − b^⊤(λ)·S_g(e^{iλ})`, `Δ = ‖Ψa‖² − ‖B*Ψ*Ψa‖²`,
//!
//! or through the signal factor,
//!
//! `h = b^⊤(λ)·S_f(e^{iλ})`, `Δ = ‖Φa‖² − ‖B*Φ*Φa‖²`,
//!
//! where `S_g = B*Ψ*Ψa` and `S_f = B*Φ*Φa`. Both routes agree whenever both
//! factorizations exist; the pair makes a built-in cross check.
//!
//! All sequences are truncated at explicit orders and the relevant tail
//! norms are carried in [`MseReport`] so truncation error stays observable.

use crate::blocking::{BlockedSequence, FunctionalWeights};
use crate::error::{Error, Result};
use crate::spectral::{
    factorize, invert_factor, FactorizeOptions, MatrixMAPolynomial, SpectralDensityGrid,
    DEFAULT_INVERSE_ORDER_FACTOR, TAIL_WARN_THRESHOLD,
};
use crate::{C64, CVec};

/// Which dual formula produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Through the signal factor `φ`.
    ViaF,
    /// Through the noise factor `ψ`.
    ViaG,
    /// Closed form for a white component.
    WhiteNoise,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Route::ViaF => "via_f",
            Route::ViaG => "via_g",
            Route::WhiteNoise => "white_noise",
        };
        f.write_str(s)
    }
}

/// One-sided spectral characteristic `h(e^{iλ}) = Σ_{j≥0} h̄_j e^{−ijλ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCharacteristic {
    k: usize,
    coeffs: Vec<CVec>,
}

impl FilterCharacteristic {
    pub fn new(k: usize, coeffs: Vec<CVec>) -> Result<Self> {
        for (j, c) in coeffs.iter().enumerate() {
            if c.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "filter coefficient {j} has length {}, expected {k}",
                    c.len()
                )));
            }
        }
        Ok(FilterCharacteristic { k, coeffs })
    }

    pub fn zero(k: usize) -> Self {
        FilterCharacteristic {
            k,
            coeffs: vec![CVec::zeros(k)],
        }
    }

    /// `h = A`, i.e. pass the functional weights through unchanged.
    pub fn from_weights(a: &FunctionalWeights) -> Self {
        FilterCharacteristic {
            k: a.k(),
            coeffs: a.coeffs.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[CVec] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> CVec {
        self.coeffs
            .get(j)
            .cloned()
            .unwrap_or_else(|| CVec::zeros(self.k))
    }

    pub fn max_lag(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, lambda: f64) -> CVec {
        let mut acc = CVec::zeros(self.k);
        for (j, c) in self.coeffs.iter().enumerate() {
            acc += c * C64::from_polar(1.0, -(j as f64) * lambda);
        }
        acc
    }

    /// Values on the uniform frequency grid of the given size.
    pub fn eval_on_grid(&self, grid_size: usize) -> Vec<CVec> {
        (0..grid_size)
            .map(|r| self.eval(crate::grid::lambda(grid_size, r)))
            .collect()
    }

    /// Largest coefficient-wise difference against another characteristic,
    /// padding the shorter one with zeros.
    pub fn coeff_distance(&self, other: &FilterCharacteristic) -> f64 {
        let len = self.coeffs.len().max(other.coeffs.len());
        (0..len)
            .map(|j| (self.coeff(j) - other.coeff(j)).norm())
            .fold(0.0, f64::max)
    }

    /// Drop structurally zero trailing coefficients (exact zeros only).
    fn trim_trailing_zeros(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last().map(|v| v.norm()) == Some(0.0) {
            self.coeffs.pop();
        }
        self
    }
}

/// Mean-square error of an optimal estimate together with the two competing
/// norms of its route and truncation diagnostics.
#[derive(Debug, Clone)]
pub struct MseReport {
    pub delta: f64,
    /// `‖Ψa‖²` (via g) or `‖Φa‖²` (via f).
    pub first_term: f64,
    /// `‖B*Ψ*Ψa‖²` (via g) or `‖B*Φ*Φa‖²` (via f).
    pub second_term: f64,
    pub route: Route,
    /// Norm of the last retained coefficient of `S_g` / `S_f`.
    pub s_tail_norm: f64,
    /// Norm of the last retained coefficient of `b`.
    pub b_tail_norm: f64,
    /// Set when a retained tail exceeds the warning threshold.
    pub truncation_warning: bool,
}

impl MseReport {
    fn build(first: f64, second: f64, route: Route, s_tail: f64, b_tail: f64) -> Result<MseReport> {
        let delta = first - second;
        if delta < -1e-10 {
            return Err(Error::NumericalInconsistency(format!(
                "negative mean-square error {delta:.3e}; factorization identities are broken"
            )));
        }
        // only b is truncated here: the S cascades terminate exactly at
        // finite orders, so their last coefficient is a value, not a tail
        Ok(MseReport {
            delta,
            first_term: first,
            second_term: second,
            route,
            s_tail_norm: s_tail,
            b_tail_norm: b_tail,
            truncation_warning: b_tail > TAIL_WARN_THRESHOLD,
        })
    }
}

/// A filter characteristic with its error report.
#[derive(Debug, Clone)]
pub struct FilterSolution {
    pub h: FilterCharacteristic,
    pub report: MseReport,
}

/// Factor bundle for a filtering problem: `d` factors `f + g`, `b` inverts
/// `d`, `φ` factors `f` and `ψ` factors `g` (zero polynomials for
/// identically zero densities).
#[derive(Debug, Clone)]
pub struct Factors {
    pub d: MatrixMAPolynomial,
    pub b: MatrixMAPolynomial,
    pub phi: MatrixMAPolynomial,
    pub psi: MatrixMAPolynomial,
}

impl Factors {
    /// Factorize a `(f, g)` pair. A density whose sup norm is below
    /// `eps_pd` is treated as identically zero and gets a zero factor.
    pub fn from_densities(
        f: &SpectralDensityGrid,
        g: &SpectralDensityGrid,
        order: usize,
        inverse_order: Option<usize>,
        opts: &FactorizeOptions,
    ) -> Result<Factors> {
        f.check_aligned(g)?;
        let k = f.k();
        let f_zero = f.is_zero(opts.eps_pd);
        let g_zero = g.is_zero(opts.eps_pd);
        if f_zero && g_zero {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: 0.0,
                index: 0,
            });
        }
        let sum = f.add(g)?;
        let d = factorize(&sum, order, opts)?;
        let lb = inverse_order.unwrap_or(DEFAULT_INVERSE_ORDER_FACTOR * order.max(1));
        let b = invert_factor(&d, lb)?;
        let phi = if f_zero {
            MatrixMAPolynomial::zero(k, k)
        } else {
            factorize(f, order, opts)?
        };
        let psi = if g_zero {
            MatrixMAPolynomial::zero(k, k)
        } else {
            factorize(g, order, opts)?
        };
        Ok(Factors { d, b, phi, psi })
    }
}

/// `(Ca)_q = Σ_{l=0}^{q} c^⊤(q−l)·ā_l` for `q = 0..(order(c) + J)`.
///
/// Serves `Ψa`, `Φa` and `D(a−h)` depending on which polynomial is passed.
pub fn apply_factor_transform(c: &MatrixMAPolynomial, a: &[CVec]) -> Result<Vec<CVec>> {
    if a.is_empty() {
        return Err(Error::EmptyInput("coefficient sequence is empty"));
    }
    for (j, v) in a.iter().enumerate() {
        if v.len() != c.rows() {
            return Err(Error::DimensionMismatch(format!(
                "input vector {j} has length {}, expected {}",
                v.len(),
                c.rows()
            )));
        }
    }
    let out_len = c.order() + a.len();
    let mut out = vec![CVec::zeros(c.cols()); out_len];
    for (u, cu) in c.coeffs().iter().enumerate() {
        let cut = cu.transpose();
        for (l, al) in a.iter().enumerate() {
            out[u + l] += &cut * al;
        }
    }
    Ok(out)
}

/// `(C*x)_j = Σ_u conj(c(u))·x_{u+j}` for `j = 0..len(x)−1`.
///
/// Serves `Ψ*`, `Φ*` and `B*`.
pub fn apply_adjoint_transform(c: &MatrixMAPolynomial, x: &[CVec]) -> Result<Vec<CVec>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("coefficient sequence is empty"));
    }
    for (j, v) in x.iter().enumerate() {
        if v.len() != c.cols() {
            return Err(Error::DimensionMismatch(format!(
                "input vector {j} has length {}, expected {}",
                v.len(),
                c.cols()
            )));
        }
    }
    let mut out = vec![CVec::zeros(c.rows()); x.len()];
    for (u, cu) in c.coeffs().iter().enumerate() {
        let conj = cu.conjugate();
        for j in 0..x.len() {
            if u + j < x.len() {
                out[j] += &conj * &x[u + j];
            }
        }
    }
    Ok(out)
}

fn norm_sq(seq: &[CVec]) -> f64 {
    seq.iter().map(|v| v.norm_squared()).sum()
}

fn check_inverse_pair(d: &MatrixMAPolynomial, b: &MatrixMAPolynomial) -> Result<()> {
    if b.rows() != d.cols() || b.cols() != d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "inverse factor is {}x{}, factor is {}x{}",
            b.rows(),
            b.cols(),
            d.rows(),
            d.cols()
        )));
    }
    let id = crate::CMat::identity(b.rows(), d.cols());
    let defect = (b.coeff(0) * d.coeff(0) - id).norm();
    if defect > 1e-8 {
        return Err(Error::NumericalInconsistency(format!(
            "b(0)·d(0) deviates from identity by {defect:.3e}"
        )));
    }
    Ok(())
}

struct RouteCascade {
    s_coeffs: Vec<CVec>,
    first_term: f64,
    second_term: f64,
    s_tail: f64,
}

/// Shared cascade: `Ca`, then `C*Ca`, then `S = B*C*Ca`, with the two norms
/// `‖Ca‖²` and `‖S‖²`.
fn route_cascade(
    c: &MatrixMAPolynomial,
    b: &MatrixMAPolynomial,
    a: &FunctionalWeights,
) -> Result<RouteCascade> {
    let ca = apply_factor_transform(c, &a.coeffs)?;
    let cstar = apply_adjoint_transform(c, &ca)?;
    let s = apply_adjoint_transform(b, &cstar)?;
    let s_tail = s.last().map(|v| v.norm()).unwrap_or(0.0);
    Ok(RouteCascade {
        first_term: norm_sq(&ca),
        second_term: norm_sq(&s),
        s_tail,
        s_coeffs: s,
    })
}

/// Coefficients of `b^⊤(λ)·S(e^{iλ})`.
fn transpose_convolve(b: &MatrixMAPolynomial, s: &[CVec]) -> Vec<CVec> {
    let mut out = vec![CVec::zeros(b.cols()); b.order() + s.len()];
    for (u, bu) in b.coeffs().iter().enumerate() {
        let but = bu.transpose();
        for (l, sl) in s.iter().enumerate() {
            out[u + l] += &but * sl;
        }
    }
    out
}

/// Optimal characteristic and error through the noise factor:
/// `h = A − b^⊤·S_g` with `S_g = B*Ψ*Ψa`.
pub fn solve_via_g(
    d: &MatrixMAPolynomial,
    b: &MatrixMAPolynomial,
    psi: &MatrixMAPolynomial,
    a: &FunctionalWeights,
) -> Result<FilterSolution> {
    check_inverse_pair(d, b)?;
    if psi.rows() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "noise factor has {} rows, expected {}",
            psi.rows(),
            b.cols()
        )));
    }
    let cascade = route_cascade(psi, b, a)?;
    let bs = transpose_convolve(b, &cascade.s_coeffs);
    let len = bs.len().max(a.coeffs.len());
    let k = a.k();
    let mut coeffs = Vec::with_capacity(len);
    for j in 0..len {
        let aj = a.coeffs.get(j).cloned().unwrap_or_else(|| CVec::zeros(k));
        let bj = bs.get(j).cloned().unwrap_or_else(|| CVec::zeros(k));
        coeffs.push(aj - bj);
    }
    let report = MseReport::build(
        cascade.first_term,
        cascade.second_term,
        Route::ViaG,
        cascade.s_tail,
        b.tail_norm(),
    )?;
    Ok(FilterSolution {
        h: FilterCharacteristic::new(k, coeffs)?.trim_trailing_zeros(),
        report,
    })
}

/// Optimal characteristic and error through the signal factor:
/// `h = b^⊤·S_f` with `S_f = B*Φ*Φa`.
pub fn solve_via_f(
    b: &MatrixMAPolynomial,
    phi: &MatrixMAPolynomial,
    a: &FunctionalWeights,
) -> Result<FilterSolution> {
    if phi.rows() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "signal factor has {} rows, expected {}",
            phi.rows(),
            b.cols()
        )));
    }
    let cascade = route_cascade(phi, b, a)?;
    let coeffs = transpose_convolve(b, &cascade.s_coeffs);
    let report = MseReport::build(
        cascade.first_term,
        cascade.second_term,
        Route::ViaF,
        cascade.s_tail,
        b.tail_norm(),
    )?;
    Ok(FilterSolution {
        h: FilterCharacteristic::new(a.k(), coeffs)?.trim_trailing_zeros(),
        report,
    })
}

/// Spectral characteristic through the noise factor.
pub fn spectral_characteristic_via_g(
    d: &MatrixMAPolynomial,
    b: &MatrixMAPolynomial,
    psi: &MatrixMAPolynomial,
    a: &FunctionalWeights,
) -> Result<FilterCharacteristic> {
    Ok(solve_via_g(d, b, psi, a)?.h)
}

/// Spectral characteristic through the signal factor.
pub fn spectral_characteristic_via_f(
    b: &MatrixMAPolynomial,
    phi: &MatrixMAPolynomial,
    a: &FunctionalWeights,
) -> Result<FilterCharacteristic> {
    Ok(solve_via_f(b, phi, a)?.h)
}

/// Mean-square error by the chosen route.
pub fn mse(route: Route, factors: &Factors, a: &FunctionalWeights) -> Result<MseReport> {
    match route {
        Route::ViaG => Ok(solve_via_g(&factors.d, &factors.b, &factors.psi, a)?.report),
        Route::ViaF => Ok(solve_via_f(&factors.b, &factors.phi, a)?.report),
        other => Err(Error::InvalidParameter {
            name: "route",
            msg: format!("{other} is a closed form, not a factorization route"),
        }),
    }
}

/// Closed-form error when one of the two sequences is white with
/// per-coordinate variance `σ²`: `Δ = σ²‖ā‖² − σ⁴‖B*a‖²`.
pub fn white_noise_mse(
    sigma2: f64,
    b: &MatrixMAPolynomial,
    a: &FunctionalWeights,
) -> Result<MseReport> {
    if sigma2 < 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma2",
            msg: format!("variance must be nonnegative, got {sigma2}"),
        });
    }
    let bstar_a = apply_adjoint_transform(b, &a.coeffs)?;
    let first = sigma2 * a.norm_sq();
    let second = sigma2 * sigma2 * norm_sq(&bstar_a);
    MseReport::build(
        first,
        second,
        Route::WhiteNoise,
        bstar_a.last().map(|v| v.norm()).unwrap_or(0.0),
        b.tail_norm(),
    )
}

/// Closed-form error of estimating the single block `ā_N^⊤ ζ̄_{−N}` under a
/// white component: `σ²‖ā_N‖² − σ⁴·Σ_{q=0}^{N}‖conj(b(q))·ā_N‖²`.
pub fn single_block_mse(
    block_index: usize,
    sigma2: f64,
    b: &MatrixMAPolynomial,
    a_block: &CVec,
) -> Result<f64> {
    if sigma2 < 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma2",
            msg: format!("variance must be nonnegative, got {sigma2}"),
        });
    }
    if a_block.len() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "block weight has length {}, expected {}",
            a_block.len(),
            b.cols()
        )));
    }
    let mut sum = 0.0;
    for q in 0..=block_index.min(b.order()) {
        sum += (b.coeff(q).conjugate() * a_block).norm_squared();
    }
    Ok(sigma2 * a_block.norm_squared() - sigma2 * sigma2 * sum)
}

/// Time-domain evaluation of the estimate: `Âζ = Σ_{j≥0} h̄_j^⊤ x̄_{−j}`,
/// with `obs.blocks[j]` the block `j` periods into the past.
pub fn estimate_functional(h: &FilterCharacteristic, obs: &BlockedSequence) -> Result<C64> {
    if obs.k != h.k() {
        return Err(Error::DimensionMismatch(format!(
            "observations have dimension {}, filter has {}",
            obs.k,
            h.k()
        )));
    }
    if obs.blocks.len() < h.coeffs().len() {
        return Err(Error::InsufficientHistory {
            needed: h.coeffs().len(),
            got: obs.blocks.len(),
        });
    }
    let mut acc = C64::new(0.0, 0.0);
    for (hj, xj) in h.coeffs().iter().zip(obs.blocks.iter()) {
        acc += (hj.transpose() * xj)[(0, 0)];
    }
    Ok(acc)
}

/// The mean-square error functional `Δ(h; f, g)` at an arbitrary one-sided
/// `h`, evaluated via the factor transforms:
/// `‖Ψa‖² + ‖D(a−h)‖² − 2·Re⟨Ψ(a−h), Ψa⟩`.
pub fn mse_quadratic_form(
    d: &MatrixMAPolynomial,
    psi: &MatrixMAPolynomial,
    a: &FunctionalWeights,
    h: &FilterCharacteristic,
) -> Result<f64> {
    let k = a.k();
    let len = a.coeffs.len().max(h.coeffs().len());
    let mut diff = Vec::with_capacity(len);
    for j in 0..len {
        let aj = a.coeffs.get(j).cloned().unwrap_or_else(|| CVec::zeros(k));
        diff.push(aj - h.coeff(j));
    }
    let psi_a = apply_factor_transform(psi, &a.coeffs)?;
    let psi_diff = apply_factor_transform(psi, &diff)?;
    let d_diff = apply_factor_transform(d, &diff)?;
    let mut cross = 0.0;
    for (q, pd) in psi_diff.iter().enumerate() {
        if q < psi_a.len() {
            // ⟨(Ψ(a−h))_q, (Ψa)_q⟩ with the convention ⟨u, v⟩ = v^H u
            cross += psi_a[q].dotc(pd).re;
        }
    }
    Ok(norm_sq(&psi_a) + norm_sq(&d_diff) - 2.0 * cross)
}
