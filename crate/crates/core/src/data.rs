//! Datasets: synthetic two-view clusters, CIFAR binary batches, label noise.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_vector, random_unit_vector};

/// Inputs with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }
}

/// Two views per sample plus the class label (used only by linear evaluation).
#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pub view1: Array2<f64>,
    pub view2: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.view1.ncols()
    }

    /// Two noisy copies of every input of a labelled dataset.
    pub fn from_labeled<R: Rng + ?Sized>(ds: &LabeledDataset, noise_scale: f64, rng: &mut R) -> Self {
        let mut view1 = ds.inputs.clone();
        let mut view2 = ds.inputs.clone();
        for v in view1.iter_mut().chain(view2.iter_mut()) {
            *v += noise_scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        Self {
            view1,
            view2,
            labels: ds.labels.clone(),
            num_classes: ds.num_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    /// Standard deviation of the per-coordinate view noise.
    pub noise_scale: f64,
    pub samples: usize,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "synthetic data needs >= 2 classes and dim >= 2 (got {} classes, dim {})",
                self.classes, self.dim
            )));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::InvalidConfig(format!("noise scale {} is invalid", self.noise_scale)));
        }
        Ok(())
    }
}

/// Class centres on the unit sphere; samples are noisy copies of a centre.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub spec: SyntheticSpec,
    pub centers: Vec<Vec<f64>>,
}

impl SyntheticTask {
    pub fn new<R: Rng + ?Sized>(spec: SyntheticSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let centers = (0..spec.classes).map(|_| random_unit_vector(rng, spec.dim)).collect();
        Ok(Self { spec, centers })
    }

    pub fn with_centers(spec: SyntheticSpec, centers: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        if centers.len() != spec.classes || centers.iter().any(|c| c.len() != spec.dim) {
            return Err(Error::InvalidConfig("centres do not match the spec".into()));
        }
        Ok(Self { spec, centers })
    }

    fn noisy<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        let g = gaussian_vector(rng, self.spec.dim);
        self.centers[class]
            .iter()
            .zip(g)
            .map(|(c, n)| c + self.spec.noise_scale * n)
            .collect()
    }

    /// `n` pairs with uniformly drawn classes.
    pub fn pairs<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PairDataset {
        let d = self.spec.dim;
        let mut v1 = Vec::with_capacity(n * d);
        let mut v2 = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.random_range(0..self.spec.classes);
            v1.extend(self.noisy(c, rng));
            v2.extend(self.noisy(c, rng));
            labels.push(c);
        }
        PairDataset {
            view1: Array2::from_shape_vec((n, d), v1).expect("n * d"),
            view2: Array2::from_shape_vec((n, d), v2).expect("n * d"),
            labels,
            num_classes: self.spec.classes,
        }
    }

    /// `n` single-view labelled samples (held-out evaluation data).
    pub fn labeled<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> LabeledDataset {
        let d = self.spec.dim;
        let mut xs = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.random_range(0..self.spec.classes);
            xs.extend(self.noisy(c, rng));
            labels.push(c);
        }
        LabeledDataset {
            inputs: Array2::from_shape_vec((n, d), xs).expect("n * d"),
            labels,
            num_classes: self.spec.classes,
        }
    }
}

/// Draws class centres, then `spec.samples` two-view pairs.
pub fn generate_synthetic_pairs<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<PairDataset> {
    let task = SyntheticTask::new(*spec, rng)?;
    Ok(task.pairs(spec.samples, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

pub const CIFAR_PIXELS: usize = 3072;

impl CifarVariant {
    pub fn record_size(self) -> usize {
        match self {
            Self::Cifar10 => 1 + CIFAR_PIXELS,
            Self::Cifar100 => 2 + CIFAR_PIXELS,
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            Self::Cifar10 => 10,
            Self::Cifar100 => 100,
        }
    }
}

/// Parses CIFAR binary records. Pixels are scaled to `[0, 1]`; CIFAR-100 uses
/// the fine label.
pub fn parse_cifar_binary(bytes: &[u8], variant: CifarVariant) -> Result<LabeledDataset> {
    let rs = variant.record_size();
    if !bytes.len().is_multiple_of(rs) {
        return Err(Error::RecordSize {
            len: bytes.len(),
            record_size: rs,
        });
    }
    let n = bytes.len() / rs;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * CIFAR_PIXELS);
    for rec in bytes.chunks_exact(rs) {
        let label = match variant {
            CifarVariant::Cifar10 => rec[0],
            CifarVariant::Cifar100 => rec[1],
        } as usize;
        if label >= variant.num_classes() {
            return Err(Error::IndexOutOfRange {
                index: label,
                len: variant.num_classes(),
            });
        }
        labels.push(label);
        pixels.extend(rec[rs - CIFAR_PIXELS..].iter().map(|&b| b as f64 / 255.0));
    }
    Ok(LabeledDataset {
        inputs: Array2::from_shape_vec((n, CIFAR_PIXELS), pixels).expect("n * 3072"),
        labels,
        num_classes: variant.num_classes(),
    })
}

pub fn load_cifar_binary(path: &Path, variant: CifarVariant) -> Result<LabeledDataset> {
    parse_cifar_binary(&std::fs::read(path)?, variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelNoise {
    pub kind: NoiseKind,
    /// Corruption probability, in `[0, 1)`.
    pub ratio: f64,
}

/// Symmetric: with probability `ratio` a label moves uniformly to one of the
/// other classes. Asymmetric: with probability `ratio` class `c` becomes `c + 1 mod C`.
pub fn inject_label_noise<R: Rng + ?Sized>(
    labels: &[usize],
    num_classes: usize,
    noise: &LabelNoise,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&noise.ratio) {
        return Err(Error::InvalidConfig(format!("noise ratio {} outside [0, 1)", noise.ratio)));
    }
    if num_classes < 2 {
        return Err(Error::InvalidConfig("label noise needs >= 2 classes".into()));
    }
    labels
        .iter()
        .map(|&y| {
            if y >= num_classes {
                return Err(Error::IndexOutOfRange { index: y, len: num_classes });
            }
            if !rng.random_bool(noise.ratio) {
                return Ok(y);
            }
            Ok(match noise.kind {
                NoiseKind::Symmetric => {
                    let other = rng.random_range(0..num_classes - 1);
                    if other >= y {
                        other + 1
                    } else {
                        other
                    }
                }
                NoiseKind::Asymmetric => (y + 1) % num_classes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;

    #[test]
    fn zero_noise_views_are_centres() {
        let spec = SyntheticSpec { classes: 3, dim: 4, noise_scale: 0.0, samples: 20 };
        let mut rng = seeded_rng(0);
        let task = SyntheticTask::new(spec, &mut rng).unwrap();
        let ds = task.pairs(20, &mut rng);
        assert_eq!(ds.view1, ds.view2);
        for (row, &y) in ds.view1.rows().into_iter().zip(&ds.labels) {
            assert_eq!(row.to_vec(), task.centers[y]);
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec { classes: 5, dim: 8, noise_scale: 0.3, samples: 50 };
        let a = generate_synthetic_pairs(&spec, &mut seeded_rng(9)).unwrap();
        let b = generate_synthetic_pairs(&spec, &mut seeded_rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_spec() {
        let spec = SyntheticSpec { classes: 1, dim: 8, noise_scale: 0.3, samples: 5 };
        assert!(generate_synthetic_pairs(&spec, &mut seeded_rng(0)).is_err());
        let spec = SyntheticSpec { classes: 2, dim: 1, noise_scale: 0.3, samples: 5 };
        assert!(generate_synthetic_pairs(&spec, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn cifar_records() {
        let one = vec![0u8; 3073];
        let ds = parse_cifar_binary(&one, CifarVariant::Cifar10).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels, vec![0]);
        assert!(ds.inputs.iter().all(|&x| x == 0.0));

        let err = parse_cifar_binary(&one[..3000], CifarVariant::Cifar10).unwrap_err();
        assert!(err.to_string().contains("3073"));
        let err = parse_cifar_binary(&one, CifarVariant::Cifar100).unwrap_err();
        assert!(err.to_string().contains("3074"));

        let mut rec = vec![0u8; 3074];
        rec[0] = 3;
        rec[1] = 77;
        rec[2] = 255;
        let ds = parse_cifar_binary(&rec, CifarVariant::Cifar100).unwrap();
        assert_eq!(ds.labels, vec![77]);
        assert_eq!(ds.inputs[[0, 0]], 1.0);
        assert_eq!(ds.num_classes, 100);
    }

    #[test]
    fn label_noise() {
        let labels: Vec<usize> = (0..10_000).map(|i| i % 10).collect();
        let mut rng = seeded_rng(5);
        let clean = inject_label_noise(&labels, 10, &LabelNoise { kind: NoiseKind::Symmetric, ratio: 0.0 }, &mut rng).unwrap();
        assert_eq!(clean, labels);

        let noisy = inject_label_noise(&labels, 10, &LabelNoise { kind: NoiseKind::Symmetric, ratio: 0.4 }, &mut rng).unwrap();
        let flipped = noisy.iter().zip(&labels).filter(|(a, b)| a != b).count() as f64 / 10_000.0;
        assert!((flipped - 0.4).abs() <= 0.015, "{flipped}");
        assert!(noisy.iter().all(|&y| y < 10));

        let asym = inject_label_noise(&labels, 10, &LabelNoise { kind: NoiseKind::Asymmetric, ratio: 0.5 }, &mut rng).unwrap();
        assert!(asym.iter().zip(&labels).all(|(&a, &b)| a == b || a == (b + 1) % 10));

        assert!(inject_label_noise(&labels, 10, &LabelNoise { kind: NoiseKind::Symmetric, ratio: 1.0 }, &mut rng).is_err());
    }
}
