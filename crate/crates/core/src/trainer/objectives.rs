//! Batched forms of the per-anchor losses used by the training steps.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::gradients::AnchorWeights;
use crate::losses::{noncl_grad, noncl_loss, DualTempConfig};
use crate::numerics::{check_dim, log_sum_exp, softmax_unchecked};

/// Where an anchor's negatives come from.
#[derive(Debug, Clone, Copy)]
pub enum Negatives<'a> {
    /// Rows of the key matrix other than the anchor's own positive.
    InBatch(ArrayView2<'a, f64>),
    /// A dictionary sample shared by every anchor.
    Shared(ArrayView2<'a, f64>),
}

impl<'a> Negatives<'a> {
    fn keys(&self) -> ArrayView2<'a, f64> {
        match *self {
            Self::InBatch(k) | Self::Shared(k) => k,
        }
    }

    /// Similarities of every anchor to its negatives, one row per anchor.
    fn similarities(&self, queries: ArrayView2<f64>) -> Vec<Vec<f64>> {
        let sims = queries.dot(&self.keys().t());
        sims.axis_iter(Axis(0))
            .enumerate()
            .map(|(i, row)| match self {
                Self::InBatch(_) => row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &s)| s).collect(),
                Self::Shared(_) => row.to_vec(),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DecomposedBatch {
    /// Mean InfoNCE at `tau_alpha` over the vector negatives (reporting only).
    pub loss: f64,
    /// Gradient of the mean transformed loss on each query.
    pub grad_queries: Array2<f64>,
    /// Frozen anchor weights at `tau_beta` over the scalar negatives.
    pub scalars: Vec<f64>,
}

/// Stop-gradient transformed loss for a batch of anchors, averaged over anchors.
pub fn decomposed_batch(
    queries: ArrayView2<f64>,
    positives: ArrayView2<f64>,
    scalar_negs: Negatives<'_>,
    vector_negs: Negatives<'_>,
    temps: &DualTempConfig,
) -> Result<DecomposedBatch> {
    let n = queries.nrows();
    check_dim(n, positives.nrows())?;
    let pos: Vec<f64> = queries.rows().into_iter().zip(positives.rows()).map(|(q, k)| q.dot(&k)).collect();
    let scalar_sims = scalar_negs.similarities(queries);
    let vector_sims = vector_negs.similarities(queries);
    if scalar_sims.iter().chain(&vector_sims).any(Vec::is_empty) {
        return Err(Error::EmptyNegatives);
    }
    let (ta, tb) = (temps.tau_alpha(), temps.tau_beta());
    let vkeys = vector_negs.keys();
    // weights[i, j] multiplies key row j in anchor i's direction vector
    let mut weights = Array2::<f64>::zeros((n, vkeys.nrows()));
    let mut scalars = Vec::with_capacity(n);
    let mut loss = 0.0;
    for i in 0..n {
        let s = AnchorWeights::from_similarities(pos[i], &scalar_sims[i], tb)?.scalar_sum;
        let p_hat = softmax_unchecked(&vector_sims[i], ta);
        let mut cols = (0..vkeys.nrows()).filter(|&j| !matches!(vector_negs, Negatives::InBatch(_)) || j != i);
        for p in p_hat {
            weights[[i, cols.next().expect("one weight per negative")]] = p;
        }
        let mut logits: Vec<f64> = vector_sims[i].iter().map(|x| x / ta).collect();
        logits.push(pos[i] / ta);
        loss += log_sum_exp(&logits) - pos[i] / ta;
        scalars.push(s);
    }
    let vectors = &positives - &weights.dot(&vkeys);
    let coeff: Vec<f64> = scalars.iter().map(|s| -s / (ta * n as f64)).collect();
    let coeff = ndarray::Array1::from(coeff).insert_axis(Axis(1));
    Ok(DecomposedBatch {
        loss: loss / n as f64,
        grad_queries: &vectors * &coeff,
        scalars,
    })
}

/// Mean non-contrastive loss and its gradient on the raw predictions.
pub fn noncl_batch(
    predictions: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    ha_factors: Option<&[f64]>,
) -> Result<(f64, Array2<f64>)> {
    let n = predictions.nrows();
    check_dim(n, targets.nrows())?;
    let mut grad = Array2::zeros(predictions.raw_dim());
    let mut loss = 0.0;
    for i in 0..n {
        let p = predictions.row(i).to_vec();
        let t = targets.row(i).to_vec();
        let f = ha_factors.map(|h| h[i]);
        loss += noncl_loss(&p, &t, f)?;
        let g = noncl_grad(&p, &t, f)?;
        for (dst, v) in grad.row_mut(i).iter_mut().zip(g) {
            *dst = v / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::random_unit_rows;
    use crate::losses::{decomposed_loss, infonce_loss, ContrastiveInstance};
    use crate::numerics::seeded_rng;

    fn rows(a: ArrayView2<f64>) -> Vec<Vec<f64>> {
        a.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn matches_per_instance_decomposed_loss() {
        let mut rng = seeded_rng(10);
        let (n, d) = (6, 5);
        let q = random_unit_rows(&mut rng, n, d);
        let k = random_unit_rows(&mut rng, n, d);
        let dict_s = random_unit_rows(&mut rng, 9, d);
        let dict_v = random_unit_rows(&mut rng, 4, d);
        let temps = DualTempConfig::new(0.1, 0.7).unwrap();
        for (sn, vn) in [
            (Negatives::InBatch(k.view()), Negatives::InBatch(k.view())),
            (Negatives::Shared(dict_s.view()), Negatives::Shared(dict_v.view())),
            (Negatives::Shared(dict_s.view()), Negatives::InBatch(k.view())),
        ] {
            let batch = decomposed_batch(q.view(), k.view(), sn, vn, &temps).unwrap();
            let negs_for = |src: &Negatives, i: usize| -> Vec<Vec<f64>> {
                match src {
                    Negatives::InBatch(m) => rows(*m).into_iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r).collect(),
                    Negatives::Shared(m) => rows(*m),
                }
            };
            let mut loss = 0.0;
            for i in 0..n {
                let qi = q.row(i).to_vec();
                let ki = k.row(i).to_vec();
                let is = ContrastiveInstance::new(qi.clone(), ki.clone(), negs_for(&sn, i)).unwrap();
                let iv = ContrastiveInstance::new(qi, ki, negs_for(&vn, i)).unwrap();
                let dec = decomposed_loss(&is, &iv, &temps).unwrap();
                for (a, b) in batch.grad_queries.row(i).iter().zip(&dec.grad) {
                    assert!((a - b / n as f64).abs() < 1e-12);
                }
                assert!((batch.scalars[i] - dec.scalar).abs() < 1e-12);
                loss += infonce_loss(&iv, 0.1).unwrap();
            }
            assert!((batch.loss - loss / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_dictionary_is_rejected() {
        let q = Array2::eye(2);
        let empty = Array2::zeros((0, 2));
        let t = DualTempConfig::single(0.1).unwrap();
        assert!(decomposed_batch(q.view(), q.view(), Negatives::Shared(empty.view()), Negatives::InBatch(q.view()), &t).is_err());
    }
}
