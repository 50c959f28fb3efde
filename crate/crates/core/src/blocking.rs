//! Period-blocking of sampled paths into the truncated vector stationary
//! representation, and the inverse synthesis.
//!
//! A path sampled at `N` points per period `T` is cut into consecutive
//! blocks of one period each. Block `j` is projected onto the orthonormal
//! exponential basis `ẽ_k(u) = (1/√T)·exp(2πi·m(k)·u/T)` where the harmonic
//! enumeration `m` runs `0, +1, −1, +2, −2, …` over components
//! `k = 0, 1, 2, …`. Keeping `K` components turns the blocked path into a
//! `K`-dimensional stationary sequence.
//!
//! Quadrature is the midpoint rule on the sampling grid (`u_s = (s+0.5)T/N`),
//! which keeps the discrete basis exactly orthonormal for `K ≤ N`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::{C64, CVec};

/// Integer harmonic carried by component `k` (0-based): `0, +1, −1, +2, −2, …`
pub fn harmonic(k: usize) -> i64 {
    let half = k.div_ceil(2) as i64;
    if k % 2 == 1 {
        half
    } else {
        -half
    }
}

/// A complex path sampled uniformly at `N` points per period.
///
/// Sample `s` is the path value at `t = (s + 0.5)·T/N − origin_offset`; the
/// offset only records how the sampling window is aligned with the time
/// origin and does not affect blocking.
#[derive(Debug, Clone)]
pub struct SampledPath {
    pub period: f64,
    pub samples_per_period: usize,
    pub values: Vec<C64>,
    pub origin_offset: f64,
}

impl SampledPath {
    pub fn new(
        period: f64,
        samples_per_period: usize,
        values: Vec<C64>,
        origin_offset: f64,
    ) -> Result<Self> {
        if period <= 0.0 || !period.is_finite() {
            return Err(Error::InvalidParameter {
                name: "period",
                msg: format!("must be a positive finite real, got {period}"),
            });
        }
        if samples_per_period == 0 {
            return Err(Error::InvalidParameter {
                name: "samples_per_period",
                msg: "must be at least 1".into(),
            });
        }
        if !values.len().is_multiple_of(samples_per_period) {
            return Err(Error::RaggedPeriod {
                len: values.len(),
                n: samples_per_period,
            });
        }
        Ok(SampledPath {
            period,
            samples_per_period,
            values,
            origin_offset,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.values.len() / self.samples_per_period
    }
}

/// Blocked representation: one `K`-vector of harmonic coefficients per
/// period.
///
/// Block order follows the input path. When a blocked sequence is used as
/// observation history for estimation, `blocks[j]` is read as the block `j`
/// periods into the past (most recent first).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedSequence {
    pub k: usize,
    pub blocks: Vec<CVec>,
}

impl BlockedSequence {
    pub fn new(k: usize, blocks: Vec<CVec>) -> Result<Self> {
        for (j, b) in blocks.iter().enumerate() {
            if b.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "block {j} has length {}, expected {k}",
                    b.len()
                )));
            }
        }
        Ok(BlockedSequence { k, blocks })
    }
}

/// Coefficient vectors `ā_j`, `j = 0..J`, of a blocked weight function,
/// together with the summability metadata `Σ_j ‖ā_j‖` and `Σ_j (j+1)‖ā_j‖²`.
#[derive(Debug, Clone)]
pub struct FunctionalWeights {
    pub coeffs: Vec<CVec>,
    pub sum_norm: f64,
    pub sum_weighted_norm_sq: f64,
}

impl FunctionalWeights {
    pub fn new(coeffs: Vec<CVec>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyInput("weights need at least one block"));
        }
        let k = coeffs[0].len();
        for (j, a) in coeffs.iter().enumerate() {
            if a.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "weight block {j} has length {}, expected {k}",
                    a.len()
                )));
            }
        }
        let sum_norm = coeffs.iter().map(|a| a.norm()).sum();
        let sum_weighted_norm_sq = coeffs
            .iter()
            .enumerate()
            .map(|(j, a)| (j as f64 + 1.0) * a.norm_squared())
            .sum();
        Ok(FunctionalWeights {
            coeffs,
            sum_norm,
            sum_weighted_norm_sq,
        })
    }

    /// Scalar weights `a_0, a_1, …` as a `K = 1` coefficient family.
    pub fn scalar(values: &[f64]) -> Self {
        let coeffs = values
            .iter()
            .map(|&v| CVec::from_element(1, C64::new(v, 0.0)))
            .collect();
        FunctionalWeights::new(coeffs).expect("scalar weights are well formed")
    }

    pub fn k(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn max_lag(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Σ_j ‖ā_j‖²`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm_squared()).sum()
    }
}

fn block_coefficients(path: &SampledPath, k_dim: usize) -> Vec<CVec> {
    let n = path.samples_per_period;
    let t = path.period;
    let scale = t / (n as f64) / t.sqrt();
    let num_blocks = path.num_blocks();
    let mut blocks = Vec::with_capacity(num_blocks);
    for j in 0..num_blocks {
        let mut block = CVec::zeros(k_dim);
        for (k, entry) in block.iter_mut().enumerate() {
            let m = harmonic(k) as f64;
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..n {
                let phase = -2.0 * PI * m * (s as f64 + 0.5) / (n as f64);
                acc += path.values[j * n + s] * C64::from_polar(1.0, phase);
            }
            *entry = acc * scale;
        }
        blocks.push(block);
    }
    blocks
}

/// Project each period of `path` onto the first `K` harmonics.
///
/// Component `k` of block `j` is
/// `(1/√T)·Σ_s path[jN+s]·exp(−2πi·m(k)·u_s/T)·(T/N)`.
pub fn block_path(path: &SampledPath, k_dim: usize) -> Result<BlockedSequence> {
    if path.values.is_empty() {
        return Err(Error::EmptyInput("path has no samples"));
    }
    if k_dim == 0 {
        return Err(Error::InvalidParameter {
            name: "K",
            msg: "must be at least 1".into(),
        });
    }
    if k_dim > path.samples_per_period {
        return Err(Error::TruncationExceedsResolution {
            k: k_dim,
            n: path.samples_per_period,
        });
    }
    BlockedSequence::new(k_dim, block_coefficients(path, k_dim))
}

/// Block a sampled weight function `a` on `[0, J·T)` into coefficient
/// vectors `ā_j` with the same quadrature as [`block_path`].
pub fn block_weights(a: &SampledPath, k_dim: usize) -> Result<FunctionalWeights> {
    let blocked = block_path(a, k_dim)?;
    FunctionalWeights::new(blocked.blocks)
}

/// Synthesize a sampled path from blocked coefficients:
/// `path[jN+s] = Σ_k ζ_kj·ẽ_k(u_s)` with unit period.
pub fn unblock(seq: &BlockedSequence, samples_per_period: usize, period: f64) -> Result<SampledPath> {
    let n = samples_per_period;
    if n < seq.k {
        return Err(Error::ResolutionTooSmall { n, k: seq.k });
    }
    let t = period;
    let scale = 1.0 / t.sqrt();
    let mut values = Vec::with_capacity(seq.blocks.len() * n);
    for block in &seq.blocks {
        for s in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (k, coeff) in block.iter().enumerate() {
                let m = harmonic(k) as f64;
                let phase = 2.0 * PI * m * (s as f64 + 0.5) / (n as f64);
                acc += coeff * C64::from_polar(1.0, phase);
            }
            values.push(acc * scale);
        }
    }
    SampledPath::new(t, n, values, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn harmonic_enumeration() {
        let got: Vec<i64> = (0..7).map(harmonic).collect();
        assert_eq!(got, vec![0, 1, -1, 2, -2, 3, -3]);
    }

    #[test]
    fn harmonic_is_injective() {
        let mut seen: Vec<i64> = (0..64).map(harmonic).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 64);
    }

    #[test]
    fn constant_path_keeps_only_zero_harmonic() {
        let t = 2.0;
        let path = SampledPath::new(t, 16, vec![c(3.0, -1.0); 16], 0.0).unwrap();
        let blocked = block_path(&path, 3).unwrap();
        let b = &blocked.blocks[0];
        assert!((b[0] - c(3.0, -1.0) * t.sqrt()).norm() < 1e-12);
        assert!(b[1].norm() < 1e-12);
        assert!(b[2].norm() < 1e-12);
    }

    #[test]
    fn pure_harmonic_lands_on_its_component() {
        // path(u) = exp(2πiu/T) matches the m = +1 basis function, which is
        // component k = 1 of the enumeration.
        let t = 1.0;
        let n = 64;
        let values: Vec<C64> = (0..n)
            .map(|s| C64::from_polar(1.0, 2.0 * PI * (s as f64 + 0.5) / n as f64))
            .collect();
        let path = SampledPath::new(t, n, values, 0.0).unwrap();
        let blocked = block_path(&path, 3).unwrap();
        let b = &blocked.blocks[0];
        assert!(b[0].norm() < 1e-10);
        assert!((b[1].norm() - t.sqrt()).abs() < 1e-10);
        assert!(b[2].norm() < 1e-10);
    }

    #[test]
    fn periodic_input_gives_equal_blocks() {
        let one_period: Vec<C64> = (0..8).map(|s| c(s as f64, -(s as f64))).collect();
        let mut two = one_period.clone();
        two.extend_from_slice(&one_period);
        let path = SampledPath::new(1.5, 8, two, 0.0).unwrap();
        let blocked = block_path(&path, 4).unwrap();
        assert_eq!(blocked.blocks.len(), 2);
        assert!((&blocked.blocks[0] - &blocked.blocks[1]).norm() < 1e-14);
    }

    #[test]
    fn truncation_and_empty_errors() {
        let path = SampledPath::new(1.0, 4, vec![c(1.0, 0.0); 4], 0.0).unwrap();
        assert!(matches!(
            block_path(&path, 5),
            Err(Error::TruncationExceedsResolution { k: 5, n: 4 })
        ));
        let empty = SampledPath::new(1.0, 4, vec![], 0.0).unwrap();
        assert!(matches!(block_path(&empty, 2), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn indicator_weights() {
        // a(t) = 1 on [0, T) gives ā_0 = (√T, 0); over [0, 2T) the two
        // blocks coincide.
        let t = 1.0;
        let a = SampledPath::new(t, 32, vec![c(1.0, 0.0); 64], 0.0).unwrap();
        let w = block_weights(&a, 2).unwrap();
        assert_eq!(w.coeffs.len(), 2);
        for j in 0..2 {
            assert!((w.coeffs[j][0] - c(t.sqrt(), 0.0)).norm() < 1e-12);
            assert!(w.coeffs[j][1].norm() < 1e-12);
        }
    }

    #[test]
    fn cosine_weights_split_between_conjugate_harmonics() {
        let t = 1.0;
        let n = 128;
        let values: Vec<C64> = (0..n)
            .map(|s| c((2.0 * PI * (s as f64 + 0.5) / n as f64).cos(), 0.0))
            .collect();
        let a = SampledPath::new(t, n, values, 0.0).unwrap();
        let w = block_weights(&a, 3).unwrap();
        let a0 = &w.coeffs[0];
        assert!(a0[0].norm() < 1e-10);
        assert!((a0[1] - c(t.sqrt() / 2.0, 0.0)).norm() < 1e-10);
        assert!((a0[2] - c(t.sqrt() / 2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn unblock_inverts_block_on_band_limited_input() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let k = 5;
        let block = CVec::from_fn(k, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let seq = BlockedSequence::new(k, vec![block.clone()]).unwrap();
        let path = unblock(&seq, 64, 2.0).unwrap();
        let back = block_path(&path, k).unwrap();
        assert!((&back.blocks[0] - &block).norm() < 1e-10);
    }

    #[test]
    fn unblock_zero_and_constant() {
        let seq = BlockedSequence::new(2, vec![CVec::zeros(2)]).unwrap();
        let path = unblock(&seq, 8, 1.0).unwrap();
        assert!(path.values.iter().all(|v| v.norm() < 1e-15));

        let t = 4.0_f64;
        let mut b = CVec::zeros(2);
        b[0] = c(2.5, 0.0) * t.sqrt();
        let seq = BlockedSequence::new(2, vec![b]).unwrap();
        let path = unblock(&seq, 8, t).unwrap();
        for v in &path.values {
            assert!((v - c(2.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn unblock_rejects_low_resolution() {
        let seq = BlockedSequence::new(5, vec![CVec::zeros(5)]).unwrap();
        assert!(matches!(
            unblock(&seq, 4, 1.0),
            Err(Error::ResolutionTooSmall { n: 4, k: 5 })
        ));
    }

    #[test]
    fn parseval_inequality_and_band_limited_equality() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let t = 1.0;
        let n = 32;
        // arbitrary rough path: inequality
        let values: Vec<C64> = (0..n)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let path = SampledPath::new(t, n, values, 0.0).unwrap();
        let k = 5;
        let blocked = block_path(&path, k).unwrap();
        let lhs: f64 = blocked.blocks[0].norm_squared();
        let rhs: f64 =
            t / n as f64 * path.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert!(lhs <= rhs + 1e-12);

        // band-limited path: equality
        let block = CVec::from_fn(k, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let seq = BlockedSequence::new(k, vec![block.clone()]).unwrap();
        let smooth = unblock(&seq, n, t).unwrap();
        let rhs: f64 =
            t / n as f64 * smooth.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert!((block.norm_squared() - rhs).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn blocking_is_linear(
            xs in proptest::collection::vec(-1.0f64..1.0, 16),
            ys in proptest::collection::vec(-1.0f64..1.0, 16),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let to_path = |vals: &[f64]| {
                let values = vals.iter().map(|&v| c(v, 0.5 * v)).collect();
                SampledPath::new(1.0, 16, values, 0.0).unwrap()
            };
            let x = to_path(&xs);
            let y = to_path(&ys);
            let combo_vals: Vec<C64> = x
                .values
                .iter()
                .zip(y.values.iter())
                .map(|(a, b)| a * alpha + b * beta)
                .collect();
            let combo = SampledPath::new(1.0, 16, combo_vals, 0.0).unwrap();
            let bx = block_path(&x, 4).unwrap();
            let by = block_path(&y, 4).unwrap();
            let bc = block_path(&combo, 4).unwrap();
            let expect = &bx.blocks[0] * C64::new(alpha, 0.0)
                + &by.blocks[0] * C64::new(beta, 0.0);
            prop_assert!((&bc.blocks[0] - expect).norm() < 1e-12);
        }
    }
}
