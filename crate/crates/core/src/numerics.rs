//! Small dense-vector helpers shared by the loss, gradient and analysis code.
//!
//! Everything works on `f64` slices. Softmax is max-shifted so that
//! temperatures as small as 0.05 do not overflow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Counter-based generator used everywhere a seed appears in a config.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A probability vector: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates the simplex constraint (sum within 1e-9, no negative entry).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("probability"));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "not a probability vector (sum = {sum})"
            )));
        }
        Ok(Self(probs))
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn check_temperature(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidTemperature(tau));
    }
    Ok(())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !n.is_finite() {
        return Err(Error::NonFinite("vector norm"));
    }
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Log of `sum_i exp(x_i)`, shifted by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `exp(logits_i / tau) / sum_r exp(logits_r / tau)`.
pub fn tempered_softmax(logits: &[f64], tau: f64) -> Result<ProbVector> {
    check_temperature(tau)?;
    if logits.is_empty() {
        return Err(Error::InvalidConfig("softmax of an empty vector".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("logit"));
    }
    Ok(ProbVector(softmax_unchecked(logits, tau)))
}

/// Softmax without argument validation; callers guarantee `tau > 0` and finite input.
pub(crate) fn softmax_unchecked(logits: &[f64], tau: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|x| ((x - max) / tau).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// `log softmax(logits / tau)`
pub(crate) fn log_softmax_unchecked(logits: &[f64], tau: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|x| x / tau).collect();
    let lse = log_sum_exp(&scaled);
    scaled.into_iter().map(|x| x - lse).collect()
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &ProbVector) -> f64 {
    -p.0
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform sample from the unit sphere in `dim` dimensions.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vector(rng, dim);
        if let Ok(u) = l2_normalize(&g) {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_pythagorean() {
        let v = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!(close(v[0], 0.6, 1e-15) && close(v[1], 0.8, 1e-15));
    }

    #[test]
    fn normalize_unit_is_identity() {
        let u = [0.0, 1.0, 0.0];
        assert_eq!(l2_normalize(&u).unwrap(), u.to_vec());
    }

    #[test]
    fn normalize_random_has_unit_norm() {
        let mut rng = seeded_rng(7);
        for _ in 0..100 {
            let v = gaussian_vector(&mut rng, 16);
            let u = l2_normalize(&v).unwrap();
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(close(n, 1.0, 1e-9));
        }
    }

    #[test]
    fn normalize_zero_is_error() {
        assert!(matches!(l2_normalize(&[0.0, 0.0]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn softmax_examples() {
        let p = tempered_softmax(&[0.3, 0.3, 0.3, 0.3], 0.07).unwrap();
        assert!(p.as_slice().iter().all(|&x| close(x, 0.25, 1e-15)));

        let e = std::f64::consts::E;
        let p = tempered_softmax(&[1.0, 0.0], 1.0).unwrap();
        assert!(close(p[0], e / (e + 1.0), 1e-15));
        assert!(close(p[0], 0.73106, 1e-5) && close(p[1], 0.26894, 1e-5));

        let p = tempered_softmax(&[1.0, 0.0], 0.01).unwrap();
        assert!(p[0] >= 1.0 - 1e-10);
    }

    #[test]
    fn softmax_rejects_bad_temperature() {
        assert!(tempered_softmax(&[1.0], 0.0).is_err());
        assert!(tempered_softmax(&[1.0], -1.0).is_err());
        assert!(tempered_softmax(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn entropy_examples() {
        let n = 7;
        let u = ProbVector::new(vec![1.0 / n as f64; n]).unwrap();
        assert!(close(entropy(&u), (n as f64).ln(), 1e-12));
        let one_hot = ProbVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(entropy(&one_hot), 0.0);
        let p = tempered_softmax(&[1.0, 0.0], 1.0).unwrap();
        // -sum p ln p evaluated directly
        let direct = -(p[0] * p[0].ln() + p[1] * p[1].ln());
        assert!(close(entropy(&p), direct, 1e-15));
        assert!(close(entropy(&p), 0.58220, 1e-5));
    }

    #[test]
    fn cosine_examples() {
        let v = [0.3, -1.2, 2.0];
        assert!(close(cosine_similarity(&v, &v).unwrap(), 1.0, 1e-15));
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(close(c, std::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| seeded_stream(1, 2).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| seeded_stream(1, 2).random()).collect();
        assert_eq!(a, b);
        let mut s1 = seeded_stream(1, 1);
        let mut s2 = seeded_stream(1, 2);
        assert_ne!(s1.random::<u64>(), s2.random::<u64>());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(logits in prop::collection::vec(-7.0f64..7.0, 1..40), tau in 0.01f64..5.0) {
            let p = tempered_softmax(&logits, tau).unwrap();
            let s: f64 = p.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn softmax_shift_invariant(logits in prop::collection::vec(-5.0f64..5.0, 1..20), shift in -50.0f64..50.0, tau in 0.05f64..2.0) {
            let p = tempered_softmax(&logits, tau).unwrap();
            let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
            let q = tempered_softmax(&shifted, tau).unwrap();
            for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn entropy_shrinks_with_temperature(logits in prop::collection::vec(-1.0f64..1.0, 2..20), tau in 0.05f64..3.0) {
            let spread = logits.iter().cloned().fold(f64::MIN, f64::max) - logits.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-6);
            let hot = entropy(&tempered_softmax(&logits, tau).unwrap());
            let cold = entropy(&tempered_softmax(&logits, tau * 0.7).unwrap());
            prop_assert!(cold <= hot + 1e-12);
        }

        #[test]
        fn normalize_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..32)) {
            prop_assume!(norm(&v) > 1e-6);
            let once = l2_normalize(&v).unwrap();
            let twice = l2_normalize(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
