//! Independent ground truth for the filter formulas.
//!
//! Two oracles, deliberately disjoint from the spectral-factorization code
//! path:
//!
//! - [`finite_horizon_mmse`] solves the filtering problem head-on as a
//!   finite linear-regression problem: block-Toeplitz covariances from grid
//!   quadrature, normal equations, positive-definite solve.
//! - [`simulate_ma`] / [`empirical_mse`] draw Monte Carlo paths from the
//!   moving-average representation of the blocked sequences and measure an
//!   estimator's squared error directly.
//!
//! Innovations are i.i.d. circularly symmetric complex Gaussians; for
//! Gaussian inputs the linear-MMSE bound is the true optimum, which is what
//! makes the Monte Carlo comparison sharp. Each path gets its own RNG
//! stream derived from `(seed, path index)`, so results do not depend on
//! evaluation order.

use nalgebra::linalg::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blocking::{BlockedSequence, FunctionalWeights};
use crate::error::{Error, Result};
use crate::filter::{estimate_functional, FilterCharacteristic};
use crate::spectral::{covariances_from_density, MatrixMAPolynomial, SpectralDensityGrid};
use crate::synth::complex_standard_normal;
use crate::{C64, CVec};

/// Moving-average simulation setup: signal driven by `φ`, noise by `ψ`,
/// with independent innovation streams.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub phi: MatrixMAPolynomial,
    pub psi: MatrixMAPolynomial,
    /// Number of blocks per path, most recent first.
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(
        phi: MatrixMAPolynomial,
        psi: MatrixMAPolynomial,
        horizon: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        if phi.rows() != psi.rows() {
            return Err(Error::DimensionMismatch(format!(
                "signal factor has {} rows, noise factor {}",
                phi.rows(),
                psi.rows()
            )));
        }
        if n_paths == 0 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                msg: "need at least one path".into(),
            });
        }
        let needed = phi.order().max(psi.order()) + 1;
        if horizon < needed {
            return Err(Error::HorizonTooShort { horizon, needed });
        }
        Ok(SimulationSpec {
            phi,
            psi,
            horizon,
            n_paths,
            seed,
        })
    }

    pub fn k(&self) -> usize {
        self.phi.rows()
    }
}

fn ma_blocks(poly: &MatrixMAPolynomial, eps: &[CVec], horizon: usize) -> Vec<CVec> {
    (0..horizon)
        .map(|m| {
            let mut acc = CVec::zeros(poly.rows());
            for (u, cu) in poly.coeffs().iter().enumerate() {
                acc += cu * &eps[m + u];
            }
            acc
        })
        .collect()
}

/// One simulated path: `(signal, noise)` blocked sequences, block `m` being
/// the block `m` periods into the past.
pub fn simulate_path(spec: &SimulationSpec, path_index: u64) -> (BlockedSequence, BlockedSequence) {
    let k = spec.k();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(path_index);
    let draw = |rng: &mut ChaCha8Rng, len: usize, m: usize| -> Vec<CVec> {
        (0..len)
            .map(|_| CVec::from_fn(m, |_, _| complex_standard_normal(rng)))
            .collect()
    };
    let eps_sig = draw(&mut rng, spec.horizon + spec.phi.order(), spec.phi.cols());
    let eps_noise = draw(&mut rng, spec.horizon + spec.psi.order(), spec.psi.cols());
    let signal = BlockedSequence {
        k,
        blocks: ma_blocks(&spec.phi, &eps_sig, spec.horizon),
    };
    let noise = BlockedSequence {
        k,
        blocks: ma_blocks(&spec.psi, &eps_noise, spec.horizon),
    };
    (signal, noise)
}

/// All paths of the simulation setup, materialized.
pub fn simulate_ma(spec: &SimulationSpec) -> Vec<(BlockedSequence, BlockedSequence)> {
    (0..spec.n_paths)
        .map(|p| simulate_path(spec, p as u64))
        .collect()
}

/// Finite-horizon linear MMSE of `Aζ` from `N_h` observed blocks, by
/// normal equations on the block-Toeplitz covariance.
#[derive(Debug, Clone, Copy)]
pub struct MmseOracle {
    pub value: f64,
    /// Set when the covariance needed a ridge to factor.
    pub regularized: bool,
}

/// Solve the normal equations for the best linear estimate of
/// `Aζ = Σ_j ā_j^⊤ ζ̄_{−j}` from `x̄_0, …, x̄_{−N_h+1}` and return
/// `Var(Aζ) − c^H Σ^{−1} c`.
///
/// Covariances come straight from grid quadrature of the densities; no
/// spectral factorization is involved anywhere on this path.
pub fn finite_horizon_mmse(
    f: &SpectralDensityGrid,
    g: &SpectralDensityGrid,
    a: &FunctionalWeights,
    n_h: usize,
) -> Result<MmseOracle> {
    f.check_aligned(g)?;
    let k = f.k();
    if a.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "weights have dimension {}, densities {}",
            a.k(),
            k
        )));
    }
    let j_max = a.max_lag();
    if n_h < j_max + 1 {
        return Err(Error::InsufficientHistory {
            needed: j_max + 1,
            got: n_h,
        });
    }
    let max_lag = (n_h - 1).max(j_max);
    let sum = f.add(g)?;
    let r_sum = covariances_from_density(&sum, n_h - 1)?;
    let r_sig = covariances_from_density(f, max_lag)?;

    let sigma = r_sum.block_toeplitz(n_h)?;
    let dim = n_h * k;
    let mut cross = CVec::zeros(dim);
    for m in 0..n_h {
        let mut block = CVec::zeros(k);
        for (j, aj) in a.coeffs.iter().enumerate() {
            block += r_sig.lag(j as i64 - m as i64) * aj.conjugate();
        }
        cross.rows_mut(m * k, k).copy_from(&block);
    }
    let mut variance = C64::new(0.0, 0.0);
    for (j, aj) in a.coeffs.iter().enumerate() {
        for (l, al) in a.coeffs.iter().enumerate() {
            variance += (aj.transpose() * r_sig.lag(l as i64 - j as i64) * al.conjugate())[(0, 0)];
        }
    }

    let (chol, regularized) = match Cholesky::new(sigma.clone()) {
        Some(c) => (c, false),
        None => {
            let ridge = 1e-10
                * sigma
                    .diagonal()
                    .iter()
                    .map(|z| z.re)
                    .sum::<f64>()
                    .max(f64::MIN_POSITIVE)
                / dim as f64;
            let reg = &sigma + crate::CMat::identity(dim, dim) * C64::new(ridge, 0.0);
            let c = Cholesky::new(reg).ok_or(Error::NotPositiveDefinite {
                min_eigenvalue: crate::grid::min_eigenvalue(&sigma),
                index: 0,
            })?;
            (c, true)
        }
    };
    let solved = chol.solve(&cross);
    let explained = cross.dotc(&solved).re;
    Ok(MmseOracle {
        value: variance.re - explained,
        regularized,
    })
}

/// Monte Carlo estimate of `E|Aζ − Âζ|²` for a given filter.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalMse {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Simulate paths and measure the squared error of
/// `Âζ = Σ_j h̄_j^⊤ x̄_{−j}` directly against `Aζ = Σ_j ā_j^⊤ ζ̄_{−j}`.
pub fn empirical_mse(
    h: &FilterCharacteristic,
    spec: &SimulationSpec,
    a: &FunctionalWeights,
) -> Result<EmpiricalMse> {
    let needed = h.coeffs().len().max(a.coeffs.len());
    if spec.horizon < needed {
        return Err(Error::HorizonTooShort {
            horizon: spec.horizon,
            needed,
        });
    }
    let k = spec.k();
    if h.k() != k || a.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "filter dimension {}, weights {}, simulation {}",
            h.k(),
            a.k(),
            k
        )));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in 0..spec.n_paths {
        let (signal, noise) = simulate_path(spec, p as u64);
        let mut target = C64::new(0.0, 0.0);
        for (j, aj) in a.coeffs.iter().enumerate() {
            target += (aj.transpose() * &signal.blocks[j])[(0, 0)];
        }
        let obs = BlockedSequence {
            k,
            blocks: signal
                .blocks
                .iter()
                .zip(noise.blocks.iter())
                .map(|(s, n)| s + n)
                .collect(),
        };
        let est = estimate_functional(h, &obs)?;
        let err = (target - est).norm_sqr();
        sum += err;
        sum_sq += err * err;
    }
    let n = spec.n_paths as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(EmpiricalMse {
        mean,
        std_error: (var / n).sqrt(),
        n_paths: spec.n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::solve_via_g;
    use crate::spectral::{density_from_ma, FactorizeOptions};
    use crate::CMat;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn white_signal_has_unit_sample_variance() {
        let spec = SimulationSpec::new(
            MatrixMAPolynomial::scalar(&[1.0]),
            MatrixMAPolynomial::zero(1, 1),
            64,
            200,
            9,
        )
        .unwrap();
        let paths = simulate_ma(&spec);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (sig, noise) in &paths {
            assert!(noise.blocks.iter().all(|b| b.norm() == 0.0));
            for b in &sig.blocks {
                sum += b.norm_squared();
                count += 1;
            }
        }
        let var = sum / count as f64;
        let tol = 3.0 / ((count as f64).sqrt());
        assert!((var - 1.0).abs() < tol, "variance {var}");
    }

    #[test]
    fn fixed_seed_reproduces_bit_identical_paths() {
        let spec = SimulationSpec::new(
            MatrixMAPolynomial::scalar(&[1.0, 0.5]),
            MatrixMAPolynomial::scalar(&[0.7]),
            16,
            4,
            123,
        )
        .unwrap();
        let a = simulate_ma(&spec);
        let b = simulate_ma(&spec);
        for ((s1, n1), (s2, n2)) in a.iter().zip(b.iter()) {
            assert_eq!(s1, s2);
            assert_eq!(n1, n2);
        }
    }

    #[test]
    fn sample_autocovariance_matches_ma_form() {
        let phi = MatrixMAPolynomial::new(vec![
            CMat::identity(2, 2),
            CMat::from_fn(2, 2, |i, j| c(0.3 * (i as f64 - j as f64), 0.1)),
        ])
        .unwrap();
        let spec = SimulationSpec::new(phi.clone(), MatrixMAPolynomial::zero(2, 2), 64, 400, 31)
            .unwrap();
        let paths = simulate_ma(&spec);
        for lag in 0..=1usize {
            let mut acc = CMat::zeros(2, 2);
            let mut count = 0usize;
            for (sig, _) in &paths {
                for m in 0..(spec.horizon - lag) {
                    acc += &sig.blocks[m] * sig.blocks[m + lag].adjoint();
                    count += 1;
                }
            }
            acc /= c(count as f64, 0.0);
            let mut expect = CMat::zeros(2, 2);
            for u in 0..=phi.order() {
                if u + lag <= phi.order() {
                    expect += phi.coeff(u + lag) * phi.coeff(u).adjoint();
                }
            }
            let tol = 5.0 / ((spec.n_paths * spec.horizon) as f64).sqrt();
            assert!((acc - expect).norm() < tol, "lag {lag}");
        }
    }

    #[test]
    fn horizon_shorter_than_order_is_rejected() {
        assert!(matches!(
            SimulationSpec::new(
                MatrixMAPolynomial::scalar(&[1.0, 0.5, 0.25]),
                MatrixMAPolynomial::zero(1, 1),
                2,
                1,
                0,
            ),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn oracle_is_zero_without_noise() {
        let f = density_from_ma(&MatrixMAPolynomial::scalar(&[1.0, 0.5]), 256).unwrap();
        let g = SpectralDensityGrid::zero(1, 256);
        let a = FunctionalWeights::scalar(&[1.0, -0.5]);
        for n_h in [2usize, 5, 20] {
            let got = finite_horizon_mmse(&f, &g, &a, n_h).unwrap();
            assert!(got.value.abs() < 1e-10, "n_h={n_h}: {}", got.value);
        }
    }

    #[test]
    fn oracle_matches_hand_solved_white_case() {
        let f = SpectralDensityGrid::white(1, 64, 1.0);
        let g = SpectralDensityGrid::white(1, 64, 1.0);
        let a = FunctionalWeights::scalar(&[1.0]);
        let got = finite_horizon_mmse(&f, &g, &a, 1).unwrap();
        assert!((got.value - 0.5).abs() < 1e-12);
        assert!(!got.regularized);
    }

    #[test]
    fn oracle_approaches_formula_mse() {
        let f = density_from_ma(&MatrixMAPolynomial::scalar(&[1.0, 0.5]), 1024).unwrap();
        let g = SpectralDensityGrid::white(1, 1024, 1.0);
        let a = FunctionalWeights::scalar(&[1.0]);
        let factors = crate::filter::Factors::from_densities(
            &f,
            &g,
            1,
            Some(60),
            &FactorizeOptions::default(),
        )
        .unwrap();
        let sol = solve_via_g(&factors.d, &factors.b, &factors.psi, &a).unwrap();
        let oracle = finite_horizon_mmse(&f, &g, &a, 80).unwrap();
        assert!(
            (oracle.value - sol.report.delta).abs() < 1e-4,
            "oracle {} vs formula {}",
            oracle.value,
            sol.report.delta
        );
    }

    #[test]
    fn empirical_mse_is_exact_without_noise() {
        let a = FunctionalWeights::scalar(&[1.0, 0.5]);
        let h = FilterCharacteristic::from_weights(&a);
        let spec = SimulationSpec::new(
            MatrixMAPolynomial::scalar(&[1.0, 0.5]),
            MatrixMAPolynomial::zero(1, 1),
            8,
            50,
            7,
        )
        .unwrap();
        let got = empirical_mse(&h, &spec, &a).unwrap();
        assert!(got.mean < 1e-28);
    }

    #[test]
    fn empirical_mse_matches_analytic_white_case() {
        let a = FunctionalWeights::scalar(&[1.0]);
        let h = FilterCharacteristic::new(1, vec![CVec::from_element(1, c(0.5, 0.0))]).unwrap();
        let spec = SimulationSpec::new(
            MatrixMAPolynomial::scalar(&[1.0]),
            MatrixMAPolynomial::scalar(&[1.0]),
            4,
            20_000,
            11,
        )
        .unwrap();
        let got = empirical_mse(&h, &spec, &a).unwrap();
        assert!(
            (got.mean - 0.5).abs() < 3.0 * got.std_error,
            "mean {} se {}",
            got.mean,
            got.std_error
        );
    }
}
