//! Seeded generators for synthetic problems: random moving-average
//! polynomials, feasible densities for a moment class, and weight families.
//!
//! These feed the saddle-point probes of [`crate::minimax`] and the test
//! suites. Everything is driven by an explicit RNG so runs reproduce.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::blocking::FunctionalWeights;
use crate::error::Result;
use crate::spectral::{density_from_ma, MatrixMAPolynomial, SpectralDensityGrid};
use crate::{C64, CMat, CVec};

/// Circularly symmetric standard complex normal, `E|ε|² = 1`.
pub fn complex_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_complex<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> C64 {
    C64::new(
        scale * (rng.random::<f64>() - 0.5),
        scale * (rng.random::<f64>() - 0.5),
    )
}

/// Random `K×K` polynomial with a lower-triangular positive-diagonal leading
/// coefficient and geometrically decaying higher coefficients. The decay
/// keeps the polynomial minimum phase with a comfortable margin, so its
/// density factorizes well and the one-sided inverse decays at rate `decay`
/// or better.
pub fn random_minimum_phase<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    order: usize,
    decay: f64,
) -> MatrixMAPolynomial {
    let mut c0 = CMat::zeros(k, k);
    for i in 0..k {
        for j in 0..i {
            c0[(i, j)] = random_complex(rng, 0.2);
        }
        c0[(i, i)] = C64::new(1.0 + 0.5 * rng.random::<f64>(), 0.0);
    }
    let mut coeffs = vec![c0];
    for u in 1..=order {
        let scale = 0.4 * decay.powi(u as i32);
        coeffs.push(CMat::from_fn(k, k, |_, _| random_complex(rng, scale)));
    }
    MatrixMAPolynomial::new(coeffs).expect("generated coefficients are well formed")
}

/// Random one-sided polynomial with per-row second moments pinned to
/// `moments`: `Σ_u Σ_m |c_km(u)|² = moments[k]`. Rows with zero moment come
/// out identically zero, so `density_from_ma` of the result lands exactly in
/// the moment class.
pub fn random_moment_polynomial<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    order: usize,
    moments: &[f64],
    decay: f64,
) -> MatrixMAPolynomial {
    assert_eq!(moments.len(), k, "need one moment per row");
    let mut coeffs: Vec<CMat> = (0..=order)
        .map(|u| {
            let scale = decay.powi(u as i32);
            CMat::from_fn(k, k, |_, _| random_complex(rng, scale) + random_complex(rng, scale))
        })
        .collect();
    rescale_rows_to_moments(&mut coeffs, moments);
    MatrixMAPolynomial::new(coeffs).expect("generated coefficients are well formed")
}

/// Scale each row stack of `coeffs` so `Σ_u Σ_m |c_km(u)|² = moments[k]`.
pub fn rescale_rows_to_moments(coeffs: &mut [CMat], moments: &[f64]) {
    let k = coeffs[0].nrows();
    for row in 0..k {
        let current: f64 = coeffs
            .iter()
            .map(|c| (0..c.ncols()).map(|m| c[(row, m)].norm_sqr()).sum::<f64>())
            .sum();
        let scale = if moments[row] <= 0.0 || current <= 0.0 {
            0.0
        } else {
            (moments[row] / current).sqrt()
        };
        for c in coeffs.iter_mut() {
            for m in 0..c.ncols() {
                c[(row, m)] *= scale;
            }
        }
    }
}

/// Random PSD density in the moment class, returned with its generating
/// polynomial.
pub fn random_feasible_density<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    order: usize,
    moments: &[f64],
    grid_size: usize,
) -> Result<(SpectralDensityGrid, MatrixMAPolynomial)> {
    let poly = random_moment_polynomial(rng, k, order, moments, 0.6);
    let density = density_from_ma(&poly, grid_size)?;
    Ok((density, poly))
}

/// Random weight family with geometric decay across block lags.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, k: usize, max_lag: usize) -> FunctionalWeights {
    let coeffs = (0..=max_lag)
        .map(|j| {
            let scale = 0.6_f64.powi(j as i32);
            CVec::from_fn(k, |_, _| random_complex(rng, 2.0 * scale))
        })
        .collect();
    FunctionalWeights::new(coeffs).expect("generated weights are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moment_polynomial_hits_its_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let moments = [1.5, 0.0, 0.25];
        let poly = random_moment_polynomial(&mut rng, 3, 3, &moments, 0.5);
        let density = density_from_ma(&poly, 128).unwrap();
        let got = density.trace_moments();
        for (g, m) in got.iter().zip(moments.iter()) {
            assert!((g - m).abs() < 1e-12, "moment {g} vs {m}");
        }
        density.assert_psd(1e-12).unwrap();
    }

    #[test]
    fn complex_normal_has_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200_000;
        let mean_sq: f64 = (0..n)
            .map(|_| complex_standard_normal(&mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean_sq - 1.0).abs() < 0.02);
    }
}
