//! Analytic gradients of the contrastive losses with respect to the query,
//! the split of the InfoNCE gradient into an anchor-wise scalar and a
//! direction vector, and a central-difference oracle used by the tests.
//!
//! All returned gradients carry the `1/tau` factor.

use crate::error::{Error, Result};
use crate::losses::ContrastiveInstance;
use crate::numerics::{axpy, check_dim, check_temperature, dot, norm, softmax_unchecked};

/// Softmax weights of one anchor over its positive and negative keys.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorWeights {
    /// Probability of the anchor being matched to its positive key.
    pub p_pos: f64,
    /// Probability of the anchor being matched to each negative key.
    pub p_neg: Vec<f64>,
    /// `p_neg` renormalised over the negatives only.
    pub p_hat: Vec<f64>,
    /// `sum(p_neg)`, the anchor-wise attraction weight (equals `1 - p_pos`).
    pub scalar_sum: f64,
}

impl AnchorWeights {
    /// Weights from precomputed similarities `q.k+` and `q.k_j`.
    pub fn from_similarities(pos_sim: f64, neg_sims: &[f64], tau: f64) -> Result<Self> {
        check_temperature(tau)?;
        if neg_sims.is_empty() {
            return Err(Error::EmptyNegatives);
        }
        if !pos_sim.is_finite() || neg_sims.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("similarity"));
        }
        let mut logits = Vec::with_capacity(neg_sims.len() + 1);
        logits.push(pos_sim);
        logits.extend_from_slice(neg_sims);
        let probs = softmax_unchecked(&logits, tau);
        let p_pos = probs[0];
        let p_neg = probs[1..].to_vec();
        // Summing the negatives directly keeps precision when p_pos is near 1.
        let scalar_sum: f64 = p_neg.iter().sum();
        // Renormalising over the negatives alone is the same ratio without the division.
        let p_hat = softmax_unchecked(neg_sims, tau);
        Ok(Self {
            p_pos,
            p_neg,
            p_hat,
            scalar_sum,
        })
    }
}

pub fn prob_weights(inst: &ContrastiveInstance, tau: f64) -> Result<AnchorWeights> {
    let (pos, negs) = inst.similarities();
    AnchorWeights::from_similarities(pos, &negs, tau)
}

/// Gradient of the uniform-weight loss: `-(k+ - mean_j k_j)`.
pub fn simple_grad(inst: &ContrastiveInstance) -> Result<Vec<f64>> {
    let negs = inst.negatives();
    if negs.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    let k = negs.len() as f64;
    let mut g: Vec<f64> = inst.positive().iter().map(|x| -x).collect();
    for neg in negs {
        axpy(1.0 / k, neg, &mut g);
    }
    Ok(g)
}

/// InfoNCE gradient on the query, split as `full_grad = -(1/tau) * scalar * vector`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradDecomposition {
    /// Inter-anchor weight `sum_j p_j`.
    pub scalar: f64,
    /// Intra-anchor direction `k+ - sum_j p_hat_j k_j`.
    pub vector: Vec<f64>,
    pub full_grad: Vec<f64>,
}

/// `k+ - sum_j w_j k_j`
pub(crate) fn attraction_vector(positive: &[f64], negatives: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut v = positive.to_vec();
    for (w, k) in weights.iter().zip(negatives) {
        axpy(-w, k, &mut v);
    }
    v
}

pub fn infonce_grad(inst: &ContrastiveInstance, tau: f64) -> Result<GradDecomposition> {
    let w = prob_weights(inst, tau)?;
    let vector = attraction_vector(inst.positive(), inst.negatives(), &w.p_hat);
    let coeff = -w.scalar_sum / tau;
    let full_grad = vector.iter().map(|v| coeff * v).collect();
    Ok(GradDecomposition {
        scalar: w.scalar_sum,
        vector,
        full_grad,
    })
}

/// The InfoNCE gradient written without the factorisation:
/// `-(1/tau) * ((sum_j p_j) k+ - sum_j p_j k_j)`.
pub fn infonce_grad_unfactored(inst: &ContrastiveInstance, tau: f64) -> Result<Vec<f64>> {
    let w = prob_weights(inst, tau)?;
    let mut g: Vec<f64> = inst.positive().iter().map(|x| x * w.scalar_sum).collect();
    for (p, k) in w.p_neg.iter().zip(inst.negatives()) {
        axpy(-p, k, &mut g);
    }
    for x in &mut g {
        *x *= -1.0 / tau;
    }
    Ok(g)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn fd_gradient<F>(mut loss_fn: F, at: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
    }
    let mut x = at.to_vec();
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = loss_fn(&x);
        x[i] = orig - h;
        let minus = loss_fn(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite("finite-difference evaluation"));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Pulls a gradient taken at `raw / |raw|` back to `raw`:
/// `(I - q q^T) g / |raw|`.
pub fn normalize_backward(raw: &[f64], grad_normalized: &[f64]) -> Result<Vec<f64>> {
    check_dim(raw.len(), grad_normalized.len())?;
    let n = norm(raw);
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let q: Vec<f64> = raw.iter().map(|x| x / n).collect();
    let proj = dot(&q, grad_normalized);
    Ok(grad_normalized
        .iter()
        .zip(&q)
        .map(|(g, qi)| (g - proj * qi) / n)
        .collect())
}

/// Norm-wise relative error `|a - b| / max(|a|, |b|)`; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Worst error of one analytic gradient against its oracle.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GradCheck {
    pub name: String,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Checks every query-side gradient on `instances` random unit instances
/// (dim 16, 32 negatives, temperatures drawn from [0.05, 1)): finite differences
/// for the losses, exact agreement for the scalar-vector split.
pub fn run_gradcheck(instances: usize, seed: u64) -> Result<Vec<GradCheck>> {
    use crate::losses::{ce_dt_grad, ce_dt_ratio, ce_loss, decomposed_loss, infonce_loss, noncl_grad, noncl_loss, simple_loss};
    use crate::losses::{DualTempConfig, LogitInstance};
    use crate::numerics::{random_unit_vector, seeded_rng};
    use rand::Rng;

    let mut rng = seeded_rng(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..instances {
        let (d, k) = (16, 32);
        let tau = rng.random_range(0.05..1.0);
        let negs = (0..k).map(|_| random_unit_vector(&mut rng, d)).collect();
        let inst = ContrastiveInstance::new(random_unit_vector(&mut rng, d), random_unit_vector(&mut rng, d), negs)?;
        let q = inst.query().to_vec();
        let fd = |f: &dyn Fn(&[f64]) -> f64| fd_gradient(f, &q, FD_STEP);

        let split = infonce_grad(&inst, tau)?;
        let numeric = fd(&|x| infonce_loss(&inst.with_query(x.to_vec()).expect("same dim"), tau).unwrap_or(f64::NAN))?;
        worst[0] = worst[0].max(relative_error(&split.full_grad, &numeric));

        let numeric = fd(&|x| simple_loss(&inst.with_query(x.to_vec()).expect("same dim")).unwrap_or(f64::NAN))?;
        worst[1] = worst[1].max(relative_error(&simple_grad(&inst)?, &numeric));

        let dec = decomposed_loss(&inst, &inst, &DualTempConfig::single(tau)?)?;
        let unfactored = infonce_grad_unfactored(&inst, tau)?;
        for (a, b) in dec.grad.iter().zip(&unfactored) {
            worst[2] = worst[2].max((a - b).abs());
        }

        let pred: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = random_unit_vector(&mut rng, d);
        let ha = Some(rng.random_range(0.1..1.0));
        let numeric = fd_gradient(|x| noncl_loss(x, &target, ha).unwrap_or(f64::NAN), &pred, FD_STEP)?;
        worst[3] = worst[3].max(relative_error(&noncl_grad(&pred, &target, ha)?, &numeric));

        let logits: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let li = LogitInstance::new(logits.clone(), rng.random_range(0..10))?;
        let cfg = DualTempConfig::new(tau, rng.random_range(0.05..1.0))?;
        // the ratio is a stop-gradient constant
        let ratio = ce_dt_ratio(&li, &cfg)?;
        let numeric = fd_gradient(
            |x| ratio * ce_loss(&LogitInstance::new(x.to_vec(), li.gt_index()).expect("valid"), cfg.tau_alpha()).unwrap_or(f64::NAN),
            &logits,
            FD_STEP,
        )?;
        worst[4] = worst[4].max(relative_error(&ce_dt_grad(&li, &cfg)?, &numeric));
    }
    let names = [
        ("infonce", 1e-4),
        ("simple", 1e-4),
        ("decomposed-vs-infonce", 1e-9),
        ("noncl", 1e-4),
        ("ce-dt", 1e-4),
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(&(name, tolerance), max_error)| GradCheck {
            name: name.to_string(),
            instances,
            max_error,
            tolerance,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{infonce_loss, simple_loss};
    use crate::numerics::{random_unit_vector, seeded_rng};

    fn unit(v: &[f64]) -> Vec<f64> {
        crate::numerics::l2_normalize(v).unwrap()
    }

    fn random_instance(rng: &mut crate::numerics::SeededRng, d: usize, k: usize) -> ContrastiveInstance {
        let q = random_unit_vector(rng, d);
        let pos = random_unit_vector(rng, d);
        let negs = (0..k).map(|_| random_unit_vector(rng, d)).collect();
        ContrastiveInstance::new(q, pos, negs).unwrap()
    }

    #[test]
    fn equal_similarities_give_uniform_weights() {
        // q = e0, every key has q.k = 0.5
        let q = vec![1.0, 0.0, 0.0];
        let s = (0.75f64).sqrt();
        let keys = [
            vec![0.5, s, 0.0],
            vec![0.5, -s, 0.0],
            vec![0.5, 0.0, s],
            vec![0.5, 0.0, -s],
        ];
        let inst = ContrastiveInstance::new(q, keys[0].clone(), keys[1..].to_vec()).unwrap();
        let w = prob_weights(&inst, 0.2).unwrap();
        assert!((w.p_pos - 0.25).abs() < 1e-15);
        assert!(w.p_neg.iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert!((w.scalar_sum - 0.75).abs() < 1e-15);

        let g = infonce_grad(&inst, 0.2).unwrap();
        let mut expected = keys[0].clone();
        for k in &keys[1..] {
            axpy(-1.0 / 3.0, k, &mut expected);
        }
        assert!(relative_error(&g.vector, &expected) < 1e-14);
        assert!((g.scalar - 0.75).abs() < 1e-15);
    }

    #[test]
    fn two_key_example() {
        let q = vec![1.0, 0.0];
        let pos = vec![0.9, (1.0f64 - 0.81).sqrt()];
        let neg = vec![0.1, (1.0f64 - 0.01).sqrt()];
        let inst = ContrastiveInstance::new(q, pos, vec![neg]).unwrap();
        let w = prob_weights(&inst, 0.1).unwrap();
        // direct softmax of (9, 1)
        let e9 = 9f64.exp();
        let e1 = 1f64.exp();
        assert!((w.p_pos - e9 / (e9 + e1)).abs() < 1e-15);
        assert!((w.p_pos - 0.99966).abs() < 1e-5);
        assert!((w.p_neg[0] - 0.000335).abs() < 1e-6);
    }

    #[test]
    fn scalar_sum_grows_with_temperature() {
        let mut rng = seeded_rng(3);
        let mut checked = 0;
        for _ in 0..200 {
            let inst = random_instance(&mut rng, 6, 5);
            let (pos, negs) = inst.similarities();
            if negs.iter().any(|&s| s >= pos) {
                continue;
            }
            let w = prob_weights(&inst, 0.3).unwrap();
            let w2 = prob_weights(&inst, 0.6).unwrap();
            assert!(w2.scalar_sum > w.scalar_sum);
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn simple_grad_examples() {
        let k = vec![0.0, 1.0];
        let inst = ContrastiveInstance::new(vec![1.0, 0.0], k.clone(), vec![k.clone(), k]).unwrap();
        assert!(simple_grad(&inst).unwrap().iter().all(|x| x.abs() < 1e-15));

        let inst = ContrastiveInstance::new(unit(&[1.0, 1.0]), vec![1.0, 0.0], vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(simple_grad(&inst).unwrap(), vec![-1.0, 1.0]);

        let empty = ContrastiveInstance::new(vec![1.0, 0.0], vec![1.0, 0.0], vec![]).unwrap();
        assert!(matches!(simple_grad(&empty), Err(Error::EmptyNegatives)));
        assert!(matches!(infonce_grad(&empty, 0.1), Err(Error::EmptyNegatives)));
    }

    #[test]
    fn simple_grad_matches_fd() {
        let mut rng = seeded_rng(11);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 8, 6);
            let fd = fd_gradient(
                |q| simple_loss(&inst.with_query(q.to_vec()).unwrap()).unwrap(),
                inst.query(),
                FD_STEP,
            )
            .unwrap();
            assert!(relative_error(&simple_grad(&inst).unwrap(), &fd) < 1e-6);
        }
    }

    #[test]
    fn infonce_grad_matches_fd_and_reconstructs() {
        let mut rng = seeded_rng(12);
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 16, 32);
            let g = infonce_grad(&inst, 0.1).unwrap();
            let fd = fd_gradient(
                |q| infonce_loss(&inst.with_query(q.to_vec()).unwrap(), 0.1).unwrap(),
                inst.query(),
                FD_STEP,
            )
            .unwrap();
            assert!(relative_error(&g.full_grad, &fd) < 1e-5);
            let direct = infonce_grad_unfactored(&inst, 0.1).unwrap();
            for (a, b) in g.full_grad.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(norm(&g.vector) <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn gradcheck_report_passes() {
        let report = run_gradcheck(10, 0).unwrap();
        assert_eq!(report.len(), 5);
        for c in &report {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn fd_gradient_of_simple_functions() {
        let c = [0.5, -2.0, 3.0];
        let x = [0.1, 0.2, -0.7];
        let g = fd_gradient(|x| dot(x, &c), &x, 1e-4).unwrap();
        for (a, b) in g.iter().zip(&c) {
            assert!((a - b).abs() < 1e-10);
        }
        let g = fd_gradient(|x| dot(x, x), &x, 1e-4).unwrap();
        for (a, b) in g.iter().zip(&x) {
            assert!((a - 2.0 * b).abs() < 1e-8);
        }
        assert!(fd_gradient(|x| dot(x, x), &x, 0.0).is_err());
        assert!(fd_gradient(|_| f64::NAN, &x, 1e-4).is_err());
    }

    #[test]
    fn normalize_backward_matches_fd() {
        let mut rng = seeded_rng(5);
        let raw = crate::numerics::gaussian_vector(&mut rng, 7);
        let c = crate::numerics::gaussian_vector(&mut rng, 7);
        let analytic = normalize_backward(&raw, &c).unwrap();
        let fd = fd_gradient(|z| dot(&unit(z), &c), &raw, FD_STEP).unwrap();
        assert!(relative_error(&analytic, &fd) < 1e-7);
    }

    #[test]
    fn harder_negative_gets_more_weight() {
        let mut rng = seeded_rng(9);
        for _ in 0..100 {
            let inst = random_instance(&mut rng, 5, 8);
            let (_, sims) = inst.similarities();
            let w = prob_weights(&inst, 0.2).unwrap();
            for a in 0..sims.len() {
                for b in 0..sims.len() {
                    if sims[a] > sims[b] {
                        assert!(w.p_neg[a] > w.p_neg[b]);
                    }
                }
            }
        }
    }
}
