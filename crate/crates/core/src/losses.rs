//! Contrastive and related losses.
//!
//! Every loss that feeds training also has an analytic gradient. Frozen
//! (stop-gradient) factors are materialised as plain numbers before they
//! multiply anything differentiable, so no autodiff is involved.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradients::{attraction_vector, normalize_backward, AnchorWeights};
use crate::numerics::{
    check_dim, check_temperature, dot, l2_normalize, log_softmax_unchecked, log_sum_exp, norm,
    softmax_unchecked,
};

const UNIT_TOL: f64 = 1e-6;

fn check_unit(v: &[f64]) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitNorm { norm: n });
    }
    Ok(())
}

/// One anchor with its positive key and a (possibly empty) set of negative keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveInstance {
    query: Vec<f64>,
    positive: Vec<f64>,
    negatives: Vec<Vec<f64>>,
}

impl ContrastiveInstance {
    /// All vectors must share a dimension and be unit norm within 1e-6.
    pub fn new(query: Vec<f64>, positive: Vec<f64>, negatives: Vec<Vec<f64>>) -> Result<Self> {
        let inst = Self::new_unnormalized(query, positive, negatives)?;
        check_unit(&inst.query)?;
        check_unit(&inst.positive)?;
        for k in &inst.negatives {
            check_unit(k)?;
        }
        Ok(inst)
    }

    /// Dimension-checked only. Used for off-sphere probes (finite differences)
    /// and for raw logit vectors in the cross-entropy equivalence.
    pub fn new_unnormalized(
        query: Vec<f64>,
        positive: Vec<f64>,
        negatives: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let d = query.len();
        check_dim(d, positive.len())?;
        for k in &negatives {
            check_dim(d, k.len())?;
        }
        Ok(Self {
            query,
            positive,
            negatives,
        })
    }

    /// Same keys, different query. The query is not required to be unit norm.
    pub fn with_query(&self, query: Vec<f64>) -> Result<Self> {
        check_dim(self.dim(), query.len())?;
        Ok(Self {
            query,
            positive: self.positive.clone(),
            negatives: self.negatives.clone(),
        })
    }

    pub fn query(&self) -> &[f64] {
        &self.query
    }

    pub fn positive(&self) -> &[f64] {
        &self.positive
    }

    pub fn negatives(&self) -> &[Vec<f64>] {
        &self.negatives
    }

    pub fn dim(&self) -> usize {
        self.query.len()
    }

    pub fn num_negatives(&self) -> usize {
        self.negatives.len()
    }

    /// `(q.k+, [q.k_j])`
    pub fn similarities(&self) -> (f64, Vec<f64>) {
        let pos = dot(&self.query, &self.positive);
        let negs = self.negatives.iter().map(|k| dot(&self.query, k)).collect();
        (pos, negs)
    }
}

/// Temperatures of the two gradient components: `tau_alpha` shapes the
/// direction (intra-anchor weights), `tau_beta` the anchor-wise magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDualTemp")]
pub struct DualTempConfig {
    tau_alpha: f64,
    tau_beta: f64,
}

#[derive(Deserialize)]
struct RawDualTemp {
    tau_alpha: f64,
    tau_beta: f64,
}

impl TryFrom<RawDualTemp> for DualTempConfig {
    type Error = Error;
    fn try_from(raw: RawDualTemp) -> Result<Self> {
        Self::new(raw.tau_alpha, raw.tau_beta)
    }
}

impl DualTempConfig {
    pub fn new(tau_alpha: f64, tau_beta: f64) -> Result<Self> {
        check_temperature(tau_alpha)?;
        check_temperature(tau_beta)?;
        Ok(Self { tau_alpha, tau_beta })
    }

    pub fn single(tau: f64) -> Result<Self> {
        Self::new(tau, tau)
    }

    pub fn tau_alpha(&self) -> f64 {
        self.tau_alpha
    }

    pub fn tau_beta(&self) -> f64 {
        self.tau_beta
    }

    pub fn is_single(&self) -> bool {
        self.tau_alpha == self.tau_beta
    }
}

/// `-log( e^{q.k+/tau} / (e^{q.k+/tau} + sum_j e^{q.k_j/tau}) )`
pub fn infonce_loss(inst: &ContrastiveInstance, tau: f64) -> Result<f64> {
    check_temperature(tau)?;
    let (pos, negs) = inst.similarities();
    let mut logits = Vec::with_capacity(negs.len() + 1);
    logits.push(pos / tau);
    logits.extend(negs.iter().map(|s| s / tau));
    // log-sum-exp >= the positive logit, clamp away the last-ulp negatives
    Ok((log_sum_exp(&logits) - logits[0]).max(0.0))
}

/// `-q.k+ + mean_j q.k_j`
pub fn simple_loss(inst: &ContrastiveInstance) -> Result<f64> {
    if inst.num_negatives() == 0 {
        return Err(Error::EmptyNegatives);
    }
    let (pos, negs) = inst.similarities();
    Ok(-pos + negs.iter().sum::<f64>() / negs.len() as f64)
}

/// Result of the stop-gradient transformed loss `sg[grad] . q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedLoss {
    pub value: f64,
    /// Gradient on the query: `-(1/tau_alpha) * scalar * vector`.
    pub grad: Vec<f64>,
    /// Frozen anchor weight, computed at `tau_beta` over the scalar negatives.
    pub scalar: f64,
    /// Frozen direction, computed at `tau_alpha` over the vector negatives.
    pub vector: Vec<f64>,
}

/// The transformed loss with independent negative sets (and temperatures) for
/// the scalar and vector components. Both instances must carry the same query
/// and positive key.
pub fn decomposed_loss(
    inst_scalar: &ContrastiveInstance,
    inst_vector: &ContrastiveInstance,
    cfg: &DualTempConfig,
) -> Result<DecomposedLoss> {
    if inst_scalar.query != inst_vector.query || inst_scalar.positive != inst_vector.positive {
        return Err(Error::InvalidConfig(
            "scalar and vector instances must share query and positive key".into(),
        ));
    }
    let scalar = crate::gradients::prob_weights(inst_scalar, cfg.tau_beta)?.scalar_sum;
    let vw = crate::gradients::prob_weights(inst_vector, cfg.tau_alpha)?;
    let vector = attraction_vector(inst_vector.positive(), inst_vector.negatives(), &vw.p_hat);
    let coeff = -scalar / cfg.tau_alpha;
    let grad: Vec<f64> = vector.iter().map(|v| coeff * v).collect();
    let value = dot(&grad, inst_vector.query());
    Ok(DecomposedLoss {
        value,
        grad,
        scalar,
        vector,
    })
}

/// Two views of the same `N` samples: row `i` of `queries` is positive with
/// row `i` of `keys` and negative with every other key row.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPair {
    queries: Array2<f64>,
    keys: Array2<f64>,
}

impl BatchPair {
    /// Rows must be unit norm within 1e-6; `N >= 2`.
    pub fn new(queries: Array2<f64>, keys: Array2<f64>) -> Result<Self> {
        if queries.nrows() < 2 {
            return Err(Error::BatchTooSmall(queries.nrows()));
        }
        check_dim(queries.nrows(), keys.nrows())?;
        check_dim(queries.ncols(), keys.ncols())?;
        for row in queries.rows().into_iter().chain(keys.rows()) {
            let n = row.dot(&row).sqrt();
            if (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::NotUnitNorm { norm: n });
            }
        }
        Ok(Self { queries, keys })
    }

    pub fn from_rows(queries: &[Vec<f64>], keys: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(queries)?, rows_to_array(keys)?)
    }

    pub fn queries(&self) -> ArrayView2<'_, f64> {
        self.queries.view()
    }

    pub fn keys(&self) -> ArrayView2<'_, f64> {
        self.keys.view()
    }

    pub fn len(&self) -> usize {
        self.queries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.nrows() == 0
    }

    /// The same pairs with the two views exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            queries: self.keys.clone(),
            keys: self.queries.clone(),
        }
    }
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(rows.len() * d);
    for r in rows {
        check_dim(d, r.len())?;
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::Format(e.to_string()))
}

/// Mass outside the diagonal entry: `1 - p_ii`, summed directly.
fn off_diagonal_mass(probs: &[f64], diag: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != diag)
        .map(|(_, p)| p)
        .sum()
}

/// One direction of the dual-temperature loss: anchors against keys.
struct DirectedDt {
    value: f64,
    ratios: Vec<f64>,
    /// d(value)/d(similarity_ij)
    sim_grad: Array2<f64>,
}

fn dt_directed(anchors: ArrayView2<f64>, keys: ArrayView2<f64>, cfg: &DualTempConfig, with_grad: bool) -> Result<DirectedDt> {
    let n = anchors.nrows();
    let sims = anchors.dot(&keys.t());
    let mut ratios = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut sim_grad = if with_grad { Array2::zeros((n, n)) } else { Array2::zeros((0, 0)) };
    for (i, row) in sims.axis_iter(Axis(0)).enumerate() {
        let row = row.to_vec();
        if row.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("similarity"));
        }
        let p_alpha = softmax_unchecked(&row, cfg.tau_alpha);
        let p_beta = softmax_unchecked(&row, cfg.tau_beta);
        let w_alpha = off_diagonal_mass(&p_alpha, i);
        let w_beta = off_diagonal_mass(&p_beta, i);
        if w_alpha == 0.0 {
            return Err(Error::NonFinite("dual-temperature weight ratio"));
        }
        let ratio = w_beta / w_alpha;
        let log_p = log_softmax_unchecked(&row, cfg.tau_alpha)[i];
        total += -ratio * log_p;
        if with_grad {
            let scale = ratio / (cfg.tau_alpha * n as f64);
            for (j, p) in p_alpha.iter().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                sim_grad[[i, j]] = scale * (p - delta);
            }
        }
        ratios.push(ratio);
    }
    Ok(DirectedDt {
        value: total / n as f64,
        ratios,
        sim_grad,
    })
}

/// Dual-temperature loss with its gradients on both views.
#[derive(Debug, Clone, PartialEq)]
pub struct DtLossOutput {
    pub value: f64,
    pub grad_queries: Array2<f64>,
    pub grad_keys: Array2<f64>,
    /// Frozen `W_beta / W_alpha` per query anchor.
    pub ratios_q: Vec<f64>,
    /// Frozen ratios with keys as anchors; present for the symmetric loss.
    pub ratios_k: Option<Vec<f64>>,
}

/// Mean over anchors of `-sg(W_beta/W_alpha) * log softmax_{tau_alpha}(q_i . k)[i]`,
/// where `W` is the off-diagonal softmax mass at each temperature. With
/// `symmetric`, the mean of the query-anchored and key-anchored losses.
pub fn dt_loss(batch: &BatchPair, cfg: &DualTempConfig, symmetric: bool) -> Result<f64> {
    let forward = dt_directed(batch.queries.view(), batch.keys.view(), cfg, false)?;
    if !symmetric {
        return Ok(forward.value);
    }
    let backward = dt_directed(batch.keys.view(), batch.queries.view(), cfg, false)?;
    Ok((forward.value + backward.value) / 2.0)
}

pub fn dt_loss_grad(batch: &BatchPair, cfg: &DualTempConfig, symmetric: bool) -> Result<DtLossOutput> {
    let q = batch.queries.view();
    let k = batch.keys.view();
    let fwd = dt_directed(q, k, cfg, true)?;
    let mut grad_queries = fwd.sim_grad.dot(&k);
    let mut grad_keys = fwd.sim_grad.t().dot(&q);
    if !symmetric {
        return Ok(DtLossOutput {
            value: fwd.value,
            grad_queries,
            grad_keys,
            ratios_q: fwd.ratios,
            ratios_k: None,
        });
    }
    let bwd = dt_directed(k, q, cfg, true)?;
    grad_keys += &bwd.sim_grad.dot(&q);
    grad_queries += &bwd.sim_grad.t().dot(&k);
    grad_queries *= 0.5;
    grad_keys *= 0.5;
    Ok(DtLossOutput {
        value: (fwd.value + bwd.value) / 2.0,
        grad_queries,
        grad_keys,
        ratios_q: fwd.ratios,
        ratios_k: Some(bwd.ratios),
    })
}

/// Plain single-temperature InfoNCE over in-batch negatives, averaged over anchors.
pub fn infonce_batch_loss(batch: &BatchPair, tau: f64) -> Result<f64> {
    check_temperature(tau)?;
    let sims = batch.queries.dot(&batch.keys.t());
    let n = sims.nrows();
    let mut total = 0.0;
    for (i, row) in sims.axis_iter(Axis(0)).enumerate() {
        let row = row.to_vec();
        total += -log_softmax_unchecked(&row, tau)[i];
    }
    Ok(total / n as f64)
}

/// Per-anchor `sum_{j != i} p_j^i` against in-batch keys, for inter-anchor
/// hardness weighting of non-contrastive losses.
pub fn inter_anchor_weights(queries: ArrayView2<f64>, keys: ArrayView2<f64>, tau: f64) -> Result<Vec<f64>> {
    check_temperature(tau)?;
    check_dim(queries.nrows(), keys.nrows())?;
    if queries.nrows() < 2 {
        return Err(Error::BatchTooSmall(queries.nrows()));
    }
    let sims = queries.dot(&keys.t());
    Ok(sims
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| off_diagonal_mass(&softmax_unchecked(&row.to_vec(), tau), i))
        .collect())
}

/// `-normalize(predicted) . target`, optionally scaled by a frozen anchor weight.
pub fn noncl_loss(predicted: &[f64], target_key: &[f64], ha_factor: Option<f64>) -> Result<f64> {
    check_dim(predicted.len(), target_key.len())?;
    let p = l2_normalize(predicted)?;
    Ok(-dot(&p, target_key) * ha_factor.unwrap_or(1.0))
}

/// Gradient of [`noncl_loss`] with respect to the unnormalised prediction.
pub fn noncl_grad(predicted: &[f64], target_key: &[f64], ha_factor: Option<f64>) -> Result<Vec<f64>> {
    check_dim(predicted.len(), target_key.len())?;
    let scale = -ha_factor.unwrap_or(1.0);
    let upstream: Vec<f64> = target_key.iter().map(|t| scale * t).collect();
    normalize_backward(predicted, &upstream)
}

/// Raw class logits and the ground-truth index.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitInstance {
    logits: Vec<f64>,
    gt_index: usize,
}

impl LogitInstance {
    pub fn new(logits: Vec<f64>, gt_index: usize) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                logits.len()
            )));
        }
        if gt_index >= logits.len() {
            return Err(Error::IndexOutOfRange {
                index: gt_index,
                len: logits.len(),
            });
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("logit"));
        }
        Ok(Self { logits, gt_index })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn gt_index(&self) -> usize {
        self.gt_index
    }

    pub fn num_classes(&self) -> usize {
        self.logits.len()
    }

    /// The logits as an InfoNCE query against one-hot class keys:
    /// positive `e_gt`, negatives `e_c` for `c != gt` in class order.
    pub fn as_one_hot_instance(&self) -> ContrastiveInstance {
        let c = self.logits.len();
        let one_hot = |idx: usize| {
            let mut e = vec![0.0; c];
            e[idx] = 1.0;
            e
        };
        let negatives = (0..c).filter(|&i| i != self.gt_index).map(one_hot).collect();
        ContrastiveInstance::new_unnormalized(self.logits.clone(), one_hot(self.gt_index), negatives)
            .expect("one-hot keys share the logit dimension")
    }
}

/// `-log softmax_tau(o)[gt]`
pub fn ce_loss(inst: &LogitInstance, tau: f64) -> Result<f64> {
    check_temperature(tau)?;
    let scaled: Vec<f64> = inst.logits.iter().map(|x| x / tau).collect();
    Ok((log_sum_exp(&scaled) - scaled[inst.gt_index]).max(0.0))
}

/// Frozen `W_beta / W_alpha` for the cross-entropy variant.
pub fn ce_dt_ratio(inst: &LogitInstance, cfg: &DualTempConfig) -> Result<f64> {
    let w_alpha = off_diagonal_mass(&softmax_unchecked(&inst.logits, cfg.tau_alpha), inst.gt_index);
    let w_beta = off_diagonal_mass(&softmax_unchecked(&inst.logits, cfg.tau_beta), inst.gt_index);
    if w_alpha == 0.0 {
        return Err(Error::NonFinite("dual-temperature weight ratio"));
    }
    Ok(w_beta / w_alpha)
}

/// Cross-entropy at `tau_alpha` rescaled by the frozen `W_beta / W_alpha`.
pub fn ce_dt_loss(inst: &LogitInstance, cfg: &DualTempConfig) -> Result<f64> {
    Ok(ce_dt_ratio(inst, cfg)? * ce_loss(inst, cfg.tau_alpha)?)
}

/// Gradient of [`ce_dt_loss`] on the logits: `ratio * (p - e_gt) / tau_alpha`.
pub fn ce_dt_grad(inst: &LogitInstance, cfg: &DualTempConfig) -> Result<Vec<f64>> {
    let ratio = ce_dt_ratio(inst, cfg)?;
    let mut p = softmax_unchecked(&inst.logits, cfg.tau_alpha);
    p[inst.gt_index] -= 1.0;
    Ok(p.into_iter().map(|x| ratio * x / cfg.tau_alpha).collect())
}

/// Anchor weights of the cross-entropy view (one-hot keys) at temperature `tau`.
pub fn ce_anchor_weights(inst: &LogitInstance, tau: f64) -> Result<AnchorWeights> {
    let negs: Vec<f64> = inst
        .logits
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != inst.gt_index)
        .map(|(_, &o)| o)
        .collect();
    AnchorWeights::from_similarities(inst.logits[inst.gt_index], &negs, tau)
}
