//! Diagnostics on the anchor-wise attraction weights: the batch-normalised
//! relative penalty `r+`, its entropy (nats), its stability when keys are
//! redrawn, and a collapse statistic for trained embeddings.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradients::AnchorWeights;
use crate::numerics::{
    check_dim, check_temperature, cosine_similarity, entropy, gaussian_vector, l2_normalize, log_sum_exp,
    random_unit_vector, seeded_stream, ProbVector, SeededRng,
};

/// Logarithm used for every entropy this crate reports.
pub const ENTROPY_UNIT: &str = "nats";

/// Negative keys for each anchor.
#[derive(Debug, Clone, Copy)]
pub enum NegativeSource<'a> {
    /// One dictionary shared by all anchors (`K x d`).
    Shared(ArrayView2<'a, f64>),
    /// A separate `K_i x d` set per anchor.
    PerAnchor(&'a [Array2<f64>]),
    /// The other anchors' positive keys.
    InBatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RPlusProfile {
    pub r_plus: ProbVector,
    pub entropy: f64,
    /// Negatives per anchor (the largest, for per-anchor sets).
    pub num_negatives: usize,
    pub tau: f64,
    pub num_anchors: usize,
}

/// `sum_j p_j` without materialising the individual weights.
fn scalar_weight(pos: f64, negs: impl Iterator<Item = f64> + Clone, tau: f64) -> f64 {
    let neg_logits: Vec<f64> = negs.map(|s| s / tau).collect();
    let lse_neg = log_sum_exp(&neg_logits);
    let pos_logit = pos / tau;
    // sum_j p_j = 1 / (1 + exp(pos - lse_neg))
    1.0 / (1.0 + (pos_logit - lse_neg).exp())
}

/// Per-anchor attraction weights `sum_j p_j^i`.
pub fn anchor_scalars(
    queries: ArrayView2<f64>,
    positives: ArrayView2<f64>,
    negatives: NegativeSource<'_>,
    tau: f64,
) -> Result<Vec<f64>> {
    check_temperature(tau)?;
    let n = queries.nrows();
    check_dim(n, positives.nrows())?;
    check_dim(queries.ncols(), positives.ncols())?;
    let pos_sims: Vec<f64> = queries
        .rows()
        .into_iter()
        .zip(positives.rows())
        .map(|(q, k)| q.dot(&k))
        .collect();
    match negatives {
        NegativeSource::Shared(keys) => {
            if keys.nrows() == 0 {
                return Err(Error::EmptyNegatives);
            }
            check_dim(queries.ncols(), keys.ncols())?;
            let sims = queries.dot(&keys.t());
            Ok(sims
                .axis_iter(Axis(0))
                .zip(&pos_sims)
                .map(|(row, &p)| scalar_weight(p, row.iter().copied(), tau))
                .collect())
        }
        NegativeSource::PerAnchor(sets) => {
            check_dim(n, sets.len())?;
            sets.iter()
                .zip(queries.rows())
                .zip(&pos_sims)
                .map(|((set, q), &p)| {
                    if set.nrows() == 0 {
                        return Err(Error::EmptyNegatives);
                    }
                    check_dim(q.len(), set.ncols())?;
                    let sims = set.dot(&q);
                    Ok(scalar_weight(p, sims.iter().copied(), tau))
                })
                .collect()
        }
        NegativeSource::InBatch => {
            if n < 2 {
                return Err(Error::EmptyNegatives);
            }
            let sims = queries.dot(&positives.t());
            Ok(sims
                .axis_iter(Axis(0))
                .enumerate()
                .map(|(i, row)| {
                    let negs = row.iter().enumerate().filter(move |&(j, _)| j != i).map(|(_, &s)| s);
                    scalar_weight(pos_sims[i], negs, tau)
                })
                .collect())
        }
    }
}

/// Normalises anchor weights over the batch and reports the entropy.
pub fn r_plus_from_scalars(scalars: &[f64], tau: f64, num_negatives: usize) -> Result<RPlusProfile> {
    if scalars.len() < 2 {
        return Err(Error::BatchTooSmall(scalars.len()));
    }
    let total: f64 = scalars.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonFinite("sum of anchor weights"));
    }
    let r = ProbVector::from_raw(scalars.iter().map(|s| s / total).collect());
    Ok(RPlusProfile {
        entropy: entropy(&r),
        r_plus: r,
        num_negatives,
        tau,
        num_anchors: scalars.len(),
    })
}

pub fn r_plus(
    queries: ArrayView2<f64>,
    positives: ArrayView2<f64>,
    negatives: NegativeSource<'_>,
    tau: f64,
) -> Result<RPlusProfile> {
    let n = queries.nrows();
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    let k = match negatives {
        NegativeSource::Shared(keys) => keys.nrows(),
        NegativeSource::PerAnchor(sets) => sets.iter().map(Array2::nrows).max().unwrap_or(0),
        NegativeSource::InBatch => n - 1,
    };
    let scalars = anchor_scalars(queries, positives, negatives, tau)?;
    r_plus_from_scalars(&scalars, tau, k)
}

/// Same computation through the full softmax weights; used to cross-check
/// [`anchor_scalars`].
pub fn anchor_scalars_via_weights(
    queries: ArrayView2<f64>,
    positives: ArrayView2<f64>,
    keys: ArrayView2<f64>,
    tau: f64,
) -> Result<Vec<f64>> {
    queries
        .rows()
        .into_iter()
        .zip(positives.rows())
        .map(|(q, p)| {
            let negs: Vec<f64> = keys.rows().into_iter().map(|k| q.dot(&k)).collect();
            Ok(AnchorWeights::from_similarities(q.dot(&p), &negs, tau)?.scalar_sum)
        })
        .collect()
}

/// One draw of positive keys (one per query) and a shared negative set.
#[derive(Debug, Clone)]
pub struct KeyDraw {
    pub positives: Array2<f64>,
    pub negatives: Array2<f64>,
}

pub trait KeySource {
    fn draw(&self, queries: ArrayView2<f64>, rng: &mut SeededRng) -> Result<KeyDraw>;
}

/// Synthetic keys: each positive is the query perturbed by isotropic Gaussian
/// noise and renormalised; negatives are uniform on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomKeySource {
    pub num_negatives: usize,
    /// Per-coordinate noise standard deviation of a positive view.
    pub positive_noise: f64,
}

impl RandomKeySource {
    pub fn positives(&self, queries: ArrayView2<f64>, rng: &mut SeededRng) -> Result<Array2<f64>> {
        let d = queries.ncols();
        let mut out = Array2::zeros(queries.raw_dim());
        for (q, mut row) in queries.rows().into_iter().zip(out.rows_mut()) {
            let noisy: Vec<f64> = q
                .iter()
                .zip(gaussian_vector(rng, d))
                .map(|(x, g)| x + self.positive_noise * g)
                .collect();
            row.assign(&ndarray::Array1::from(l2_normalize(&noisy)?));
        }
        Ok(out)
    }
}

pub fn random_unit_rows(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    let flat: Vec<f64> = (0..n).flat_map(|_| random_unit_vector(rng, d)).collect();
    Array2::from_shape_vec((n, d), flat).expect("n * d elements")
}

impl KeySource for RandomKeySource {
    fn draw(&self, queries: ArrayView2<f64>, rng: &mut SeededRng) -> Result<KeyDraw> {
        let positives = self.positives(queries, rng)?;
        let negatives = random_unit_rows(rng, self.num_negatives, queries.ncols());
        Ok(KeyDraw { positives, negatives })
    }
}

/// Keys from a fixed pool of embeddings, such as a trained encoder's outputs.
/// Positives are given; negatives are drawn from the pool without replacement.
#[derive(Debug, Clone)]
pub struct PoolKeySource<'a> {
    pub positives: ArrayView2<'a, f64>,
    pub pool: ArrayView2<'a, f64>,
    pub num_negatives: usize,
}

impl KeySource for PoolKeySource<'_> {
    fn draw(&self, queries: ArrayView2<f64>, rng: &mut SeededRng) -> Result<KeyDraw> {
        check_dim(queries.nrows(), self.positives.nrows())?;
        if self.num_negatives > self.pool.nrows() {
            return Err(Error::InsufficientEntries {
                requested: self.num_negatives,
                available: self.pool.nrows(),
            });
        }
        let idx = rand::seq::index::sample(rng, self.pool.nrows(), self.num_negatives).into_vec();
        Ok(KeyDraw {
            positives: self.positives.to_owned(),
            negatives: self.pool.select(Axis(0), &idx),
        })
    }
}

/// Cosine similarity between the `r+` vectors of two independent key draws.
pub fn r_plus_similarity<S: KeySource>(
    queries: ArrayView2<f64>,
    source: &S,
    tau: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mut profile = || -> Result<Vec<f64>> {
        let draw = source.draw(queries, rng)?;
        Ok(r_plus(queries, draw.positives.view(), NegativeSource::Shared(draw.negatives.view()), tau)?
            .r_plus
            .into_inner())
    };
    let a = profile()?;
    let b = profile()?;
    cosine_similarity(&a, &b)
}

/// Mean pairwise cosine similarity of the (normalised) rows; 1 means full collapse.
/// All-zero rows (dead units) are skipped, and fewer than two live rows count as collapsed.
pub fn collapse_stat(embeddings: ArrayView2<f64>) -> Result<f64> {
    if embeddings.nrows() < 2 {
        return Err(Error::BatchTooSmall(embeddings.nrows()));
    }
    let mut sum = vec![0.0; embeddings.ncols()];
    let mut n = 0usize;
    for row in embeddings.rows() {
        let u = match l2_normalize(&row.to_vec()) {
            Ok(u) => u,
            Err(Error::ZeroNorm) => continue,
            Err(e) => return Err(e),
        };
        n += 1;
        for (s, x) in sum.iter_mut().zip(u) {
            *s += x;
        }
    }
    if n < 2 {
        return Ok(1.0);
    }
    let sq: f64 = sum.iter().map(|x| x * x).sum();
    Ok((sq - n as f64) / (n as f64 * (n as f64 - 1.0)))
}

/// Monte-Carlo sweep settings over random unit embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub num_anchors: usize,
    pub dim: usize,
    pub dict_sizes: Vec<usize>,
    pub taus: Vec<f64>,
    pub seeds: Vec<u64>,
    pub positive_noise: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            num_anchors: 256,
            dim: 32,
            dict_sizes: vec![64, 256, 1024, 4096],
            taus: vec![0.07, 0.1, 0.2, 0.5, 1.0],
            seeds: (0..20).collect(),
            positive_noise: DEFAULT_POSITIVE_NOISE,
        }
    }
}

/// Noise of the synthetic positive view in the sweeps.
pub const DEFAULT_POSITIVE_NOISE: f64 = 0.1;

/// One CSV row: `K, tau, seed, value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub tau: f64,
    pub seed: u64,
    pub value: f64,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.num_anchors < 2 || self.dim == 0 || self.dict_sizes.contains(&0) {
            return Err(Error::InvalidConfig("sweep needs >= 2 anchors, positive dim and dictionary sizes".into()));
        }
        self.taus.iter().try_for_each(|&t| check_temperature(t))
    }
}

/// Entropy of `r+` for every (K, tau, seed). For a given seed all cells
/// share the same queries, positives, and nested prefixes of one negative draw.
pub fn entropy_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let k_max = cfg.dict_sizes.iter().copied().max().unwrap_or(0);
    let per_seed: Result<Vec<Vec<SweepRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = seeded_stream(seed, 0);
            let queries = random_unit_rows(&mut rng, cfg.num_anchors, cfg.dim);
            let source = RandomKeySource {
                num_negatives: k_max,
                positive_noise: cfg.positive_noise,
            };
            let draw = source.draw(queries.view(), &mut rng)?;
            let mut rows = Vec::new();
            for &k in &cfg.dict_sizes {
                let negs = draw.negatives.slice(ndarray::s![..k, ..]);
                for &tau in &cfg.taus {
                    let prof = r_plus(queries.view(), draw.positives.view(), NegativeSource::Shared(negs), tau)?;
                    rows.push(SweepRow { k, tau, seed, value: prof.entropy });
                }
            }
            Ok(rows)
        })
        .collect();
    Ok(per_seed?.into_iter().flatten().collect())
}

/// `r+` resampling similarity for every (K, tau, seed).
pub fn similarity_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let per_seed: Result<Vec<Vec<SweepRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let queries = random_unit_rows(&mut seeded_stream(seed, 0), cfg.num_anchors, cfg.dim);
            let mut rows = Vec::new();
            for (ki, &k) in cfg.dict_sizes.iter().enumerate() {
                for (ti, &tau) in cfg.taus.iter().enumerate() {
                    let mut rng = seeded_stream(seed, 1 + (ki * cfg.taus.len() + ti) as u64);
                    let source = RandomKeySource {
                        num_negatives: k,
                        positive_noise: cfg.positive_noise,
                    };
                    let value = r_plus_similarity(queries.view(), &source, tau, &mut rng)?;
                    rows.push(SweepRow { k, tau, seed, value });
                }
            }
            Ok(rows)
        })
        .collect();
    Ok(per_seed?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    Entropy,
    Similarity,
}

/// Sweep over given embeddings: `queries[i]` is positive with `positives[i]`,
/// negatives come from `pool`. Entropy cells share nested prefixes of one
/// draw, like [`entropy_sweep`]; similarity cells draw independently.
pub fn pool_sweep(
    queries: ArrayView2<f64>,
    positives: ArrayView2<f64>,
    pool: ArrayView2<f64>,
    dict_sizes: &[usize],
    taus: &[f64],
    seed: u64,
    metric: SweepMetric,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    match metric {
        SweepMetric::Entropy => {
            let k_max = dict_sizes.iter().copied().max().unwrap_or(0);
            let source = PoolKeySource { positives, pool, num_negatives: k_max };
            let draw = source.draw(queries, &mut seeded_stream(seed, 0))?;
            for &k in dict_sizes {
                let negs = draw.negatives.slice(ndarray::s![..k, ..]);
                for &tau in taus {
                    let prof = r_plus(queries, positives, NegativeSource::Shared(negs), tau)?;
                    rows.push(SweepRow { k, tau, seed, value: prof.entropy });
                }
            }
        }
        SweepMetric::Similarity => {
            for (ki, &k) in dict_sizes.iter().enumerate() {
                for (ti, &tau) in taus.iter().enumerate() {
                    let mut rng = seeded_stream(seed, 1 + (ki * taus.len() + ti) as u64);
                    let source = PoolKeySource { positives, pool, num_negatives: k };
                    let value = r_plus_similarity(queries, &source, tau, &mut rng)?;
                    rows.push(SweepRow { k, tau, seed, value });
                }
            }
        }
    }
    Ok(rows)
}

/// Mean of `value` over seeds for one (K, tau) cell.
pub fn cell_mean(rows: &[SweepRow], k: usize, tau: f64) -> Option<f64> {
    let vals: Vec<f64> = rows.iter().filter(|r| r.k == k && r.tau == tau).map(|r| r.value).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "K,tau,seed,value")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.k, r.tau, r.seed, r.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;
    use ndarray::array;

    #[test]
    fn symmetric_anchors_give_uniform_r_plus() {
        // every anchor sees the same similarity profile: q_i = e_i, k+_i = e_i,
        // shared negatives equidistant from every axis
        let n = 4;
        let q = Array2::eye(n);
        let negs = Array2::from_elem((3, n), 0.5);
        let prof = r_plus(q.view(), q.view(), NegativeSource::Shared(negs.view()), 0.1).unwrap();
        for &r in prof.r_plus.as_slice() {
            assert!((r - 0.25).abs() < 1e-12);
        }
        assert!((prof.entropy - (n as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn easy_anchor_gets_less_weight() {
        let q = Array2::eye(3);
        let mut pos = Array2::eye(3);
        // anchors 1 and 2 have a weaker positive
        pos[[1, 1]] = 0.6;
        pos[[1, 0]] = 0.8;
        pos[[2, 2]] = 0.6;
        pos[[2, 0]] = 0.8;
        let negs = array![[0.0, 0.0, 0.0]];
        let prof = r_plus(q.view(), pos.view(), NegativeSource::Shared(negs.view()), 0.05).unwrap();
        assert!(prof.r_plus[0] < prof.r_plus[1]);
        assert!((prof.r_plus[1] - prof.r_plus[2]).abs() < 1e-12);
    }

    #[test]
    fn shared_per_anchor_and_weights_agree() {
        let mut rng = seeded_rng(4);
        let q = random_unit_rows(&mut rng, 6, 5);
        let p = random_unit_rows(&mut rng, 6, 5);
        let negs = random_unit_rows(&mut rng, 9, 5);
        let a = anchor_scalars(q.view(), p.view(), NegativeSource::Shared(negs.view()), 0.2).unwrap();
        let sets = vec![negs.clone(); 6];
        let b = anchor_scalars(q.view(), p.view(), NegativeSource::PerAnchor(&sets), 0.2).unwrap();
        let c = anchor_scalars_via_weights(q.view(), p.view(), negs.view(), 0.2).unwrap();
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-12);
        }
    }

    #[test]
    fn r_plus_is_scale_free() {
        let s = [0.2, 0.5, 0.9, 0.1];
        let a = r_plus_from_scalars(&s, 0.1, 3).unwrap();
        let scaled: Vec<f64> = s.iter().map(|x| x * 37.5).collect();
        let b = r_plus_from_scalars(&scaled, 0.1, 3).unwrap();
        for (x, y) in a.r_plus.as_slice().iter().zip(b.r_plus.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
        let total: f64 = a.r_plus.as_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(a.entropy <= (4f64).ln());
    }

    #[test]
    fn errors_on_empty_negatives() {
        let q = Array2::eye(2);
        let none = Array2::zeros((0, 2));
        assert!(matches!(
            r_plus(q.view(), q.view(), NegativeSource::Shared(none.view()), 0.1),
            Err(Error::EmptyNegatives)
        ));
    }

    struct FixedKeys(KeyDraw);
    impl KeySource for FixedKeys {
        fn draw(&self, _: ArrayView2<f64>, _: &mut SeededRng) -> Result<KeyDraw> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn identical_draws_give_similarity_one() {
        let mut rng = seeded_rng(1);
        let q = random_unit_rows(&mut rng, 16, 8);
        let src = RandomKeySource { num_negatives: 32, positive_noise: 0.3 };
        let fixed = FixedKeys(src.draw(q.view(), &mut rng).unwrap());
        let s = r_plus_similarity(q.view(), &fixed, 0.1, &mut rng).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn high_temperature_similarity_tends_to_one() {
        let mut rng = seeded_rng(2);
        let q = random_unit_rows(&mut rng, 32, 8);
        let src = RandomKeySource { num_negatives: 16, positive_noise: 0.3 };
        let s = r_plus_similarity(q.view(), &src, 1e6, &mut rng).unwrap();
        assert!(s > 1.0 - 1e-9);
    }

    #[test]
    fn pool_source_draws_distinct_pool_rows() {
        let mut rng = seeded_rng(8);
        let q = random_unit_rows(&mut rng, 4, 3);
        let pool = random_unit_rows(&mut rng, 10, 3);
        let src = PoolKeySource { positives: q.view(), pool: pool.view(), num_negatives: 6 };
        let draw = src.draw(q.view(), &mut rng).unwrap();
        assert_eq!(draw.positives, q);
        let mut seen = Vec::new();
        for row in draw.negatives.rows() {
            let i = pool.rows().into_iter().position(|p| p == row).unwrap();
            assert!(!seen.contains(&i));
            seen.push(i);
        }
        let too_many = PoolKeySource { num_negatives: 11, ..src };
        assert!(too_many.draw(q.view(), &mut rng).is_err());
    }

    #[test]
    fn pool_sweep_covers_every_cell() {
        let mut rng = seeded_rng(9);
        let q = random_unit_rows(&mut rng, 8, 4);
        let pool = random_unit_rows(&mut rng, 32, 4);
        for metric in [SweepMetric::Entropy, SweepMetric::Similarity] {
            let rows = pool_sweep(q.view(), q.view(), pool.view(), &[4, 16], &[0.1, 1.0], 3, metric).unwrap();
            assert_eq!(rows.len(), 4);
            assert!(rows.iter().all(|r| r.seed == 3 && r.value.is_finite()));
            let again = pool_sweep(q.view(), q.view(), pool.view(), &[4, 16], &[0.1, 1.0], 3, metric).unwrap();
            assert_eq!(rows, again);
        }
    }

    #[test]
    fn collapse_examples() {
        let same = Array2::from_elem((5, 3), 0.7);
        assert!((collapse_stat(same.view()).unwrap() - 1.0).abs() < 1e-12);
        let ortho = Array2::<f64>::eye(4);
        assert!(collapse_stat(ortho.view()).unwrap().abs() < 1e-12);
        let mut rng = seeded_rng(3);
        let sphere = random_unit_rows(&mut rng, 256, 32);
        assert!(collapse_stat(sphere.view()).unwrap().abs() < 0.02);
        let dead = Array2::<f64>::zeros((4, 3));
        assert_eq!(collapse_stat(dead.view()).unwrap(), 1.0);
    }

    #[test]
    fn entropy_grows_with_temperature_on_average() {
        let cfg = SweepConfig {
            num_anchors: 64,
            dim: 16,
            dict_sizes: vec![128],
            taus: vec![0.07, 0.1, 0.2, 0.5, 1.0],
            seeds: (0..20).collect(),
            positive_noise: DEFAULT_POSITIVE_NOISE,
        };
        let rows = entropy_sweep(&cfg).unwrap();
        let means: Vec<f64> = cfg.taus.iter().map(|&t| cell_mean(&rows, 128, t).unwrap()).collect();
        for w in means.windows(2) {
            assert!(w[1] >= w[0], "{means:?}");
        }
        assert!(means.iter().all(|&m| m <= (64f64).ln() + 1e-12));
    }

    #[test]
    fn sweep_csv_header() {
        let mut buf = Vec::new();
        write_sweep_csv(&[SweepRow { k: 64, tau: 0.1, seed: 3, value: 1.5 }], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "K,tau,seed,value\n64,0.1,3,1.5\n");
    }
}
