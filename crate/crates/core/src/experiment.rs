//! Experiment configuration: one training setup, a dataset, a seed list, and
//! where the per-seed logs go.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{pool_sweep, SweepMetric, SweepRow, ENTROPY_UNIT};
use crate::data::{inject_label_noise, load_cifar_binary, CifarVariant, LabelNoise, LabeledDataset, PairDataset, SyntheticSpec, SyntheticTask};
use crate::dictionary::{MomentumConfig, SamplingStrategy};
use crate::error::{Error, Result};
use crate::losses::DualTempConfig;
use crate::numerics::seeded_stream;
use crate::trainer::{embed, run_training, train_model, Activation, Framework, FrameworkSpec, MetricLog, NetworkConfig, ScheduleConfig, TrainConfig};

const DATA_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic {
        classes: usize,
        dim: usize,
        noise_scale: f64,
        samples: usize,
        eval_samples: usize,
    },
    CifarBinary {
        variant: CifarVariant,
        train: PathBuf,
        test: PathBuf,
        /// Gaussian noise added to each pixel vector to form the two views.
        view_noise: f64,
    },
}

impl DatasetSpec {
    /// The synthetic set used by the desk-scale comparisons.
    pub fn desk_synthetic() -> Self {
        Self::Synthetic {
            classes: 32,
            dim: 64,
            noise_scale: DESK_NOISE_SCALE,
            samples: 4096,
            eval_samples: 2048,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Synthetic { dim, .. } => *dim,
            Self::CifarBinary { .. } => crate::data::CIFAR_PIXELS,
        }
    }

    /// Training pairs and held-out labelled inputs for `seed`.
    pub fn resolve(&self, seed: u64) -> Result<(PairDataset, LabeledDataset)> {
        let mut rng = seeded_stream(seed, DATA_STREAM);
        match self {
            Self::Synthetic {
                classes,
                dim,
                noise_scale,
                samples,
                eval_samples,
            } => {
                let spec = SyntheticSpec {
                    classes: *classes,
                    dim: *dim,
                    noise_scale: *noise_scale,
                    samples: *samples,
                };
                let task = SyntheticTask::new(spec, &mut rng)?;
                let train = task.pairs(*samples, &mut rng);
                let heldout = task.labeled(*eval_samples, &mut rng);
                Ok((train, heldout))
            }
            Self::CifarBinary {
                variant,
                train,
                test,
                view_noise,
            } => {
                let train = load_cifar_binary(train, *variant)?;
                let heldout = load_cifar_binary(test, *variant)?;
                Ok((PairDataset::from_labeled(&train, *view_noise, &mut rng), heldout))
            }
        }
    }
}

/// View noise of the desk-scale synthetic set.
pub const DESK_NOISE_SCALE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub dataset: DatasetSpec,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Corrupts the labels the online probe trains on.
    pub label_noise: Option<LabelNoise>,
    /// Unit of every reported entropy (always nats).
    pub entropy_unit: String,
}

/// Desk-scale network for inputs of width `input_dim`.
pub fn desk_network(input_dim: usize) -> NetworkConfig {
    NetworkConfig {
        input_dim,
        hidden: [128, 64],
        projector_hidden: 64,
        embed_dim: 32,
        predictor_hidden: 32,
        activation: Activation::Relu,
    }
}

/// Desk-scale defaults: batch 128, 30 epochs, `(tau_alpha, tau_beta) = (0.1, 1.0)`.
pub fn desk_schedule() -> ScheduleConfig {
    ScheduleConfig {
        total_epochs: 30,
        warmup_epochs: 3,
        batch_size: 128,
        ..ScheduleConfig::default()
    }
}

/// Full-scale settings: 200 epochs, batch 256, 10 warmup epochs, 128-d embeddings,
/// 65536-key dictionaries.
pub fn full_profile(framework: Framework, input_dim: usize) -> TrainConfig {
    let mut spec = FrameworkSpec::new(framework);
    spec.dict_size_scalar = 65536;
    spec.dict_size_vector = 65536;
    spec.momentum = MomentumConfig::new(0.99).expect("in range");
    spec.temperatures = DualTempConfig::new(0.1, 1.0).expect("positive");
    TrainConfig {
        framework: spec,
        schedule: ScheduleConfig {
            total_epochs: 200,
            warmup_epochs: 10,
            batch_size: 256,
            ..ScheduleConfig::default()
        },
        network: NetworkConfig {
            input_dim,
            hidden: [512, 512],
            projector_hidden: 512,
            embed_dim: 128,
            predictor_hidden: 512,
            activation: Activation::Relu,
        },
    }
}

pub fn desk_profile(framework: Framework, input_dim: usize) -> TrainConfig {
    let mut spec = FrameworkSpec::new(framework);
    spec.sampling = SamplingStrategy::Newest;
    TrainConfig {
        framework: spec,
        schedule: desk_schedule(),
        network: desk_network(input_dim),
    }
}

impl ExperimentConfig {
    pub fn new(train: TrainConfig, dataset: DatasetSpec, seeds: Vec<u64>, output: PathBuf) -> Self {
        Self {
            train,
            dataset,
            seeds,
            output,
            label_noise: None,
            entropy_unit: ENTROPY_UNIT.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("no seeds given".into()));
        }
        if self.train.network.input_dim != self.dataset.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dataset.input_dim(),
                found: self.train.network.input_dim,
            });
        }
        if let Some(n) = &self.label_noise {
            if !(0.0..1.0).contains(&n.ratio) {
                return Err(Error::InvalidConfig(format!("noise ratio {} outside [0, 1)", n.ratio)));
            }
        }
        if let DatasetSpec::CifarBinary { train, test, .. } = &self.dataset {
            for p in [train, test] {
                if !p.is_file() {
                    return Err(Error::InvalidConfig(format!("dataset file {} not found", p.display())));
                }
            }
        }
        if self.entropy_unit != ENTROPY_UNIT {
            return Err(Error::InvalidConfig(format!("entropy unit must be {ENTROPY_UNIT}")));
        }
        Ok(())
    }

    /// One training run for `seed`.
    pub fn run_seed(&self, seed: u64) -> Result<MetricLog> {
        let (mut train, heldout) = self.dataset.resolve(seed)?;
        if let Some(noise) = &self.label_noise {
            let mut rng = seeded_stream(seed, NOISE_STREAM);
            train.labels = inject_label_noise(&train.labels, train.num_classes, noise, &mut rng)?;
        }
        run_training(&self.train, &train, &heldout, seed)
    }

    /// All seeds, in parallel; results are in seed-list order.
    pub fn run(&self) -> Result<Vec<(u64, MetricLog)>> {
        self.validate()?;
        self.seeds
            .par_iter()
            .map(|&s| self.run_seed(s).map(|log| (s, log)))
            .collect()
    }
}

/// `r+` sweep over a trained encoder, one training run per experiment seed. The
/// first `num_anchors` training pairs give queries (view 1) and positives
/// (view 2); embeddings of both views of the remaining pairs form the negative pool.
pub fn trained_sweep(
    cfg: &ExperimentConfig,
    num_anchors: usize,
    dict_sizes: &[usize],
    taus: &[f64],
    metric: SweepMetric,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let per_seed: Result<Vec<Vec<SweepRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (train, heldout) = cfg.dataset.resolve(seed)?;
            if train.len() <= num_anchors {
                return Err(Error::InsufficientEntries {
                    requested: num_anchors + 1,
                    available: train.len(),
                });
            }
            let (_, state) = train_model(&cfg.train, &train, &heldout, seed)?;
            let e1 = embed(&state.online, train.view1.view())?;
            let e2 = embed(&state.online, train.view2.view())?;
            let rest = ndarray::s![num_anchors.., ..];
            let pool = ndarray::concatenate(ndarray::Axis(0), &[e1.slice(rest), e2.slice(rest)])
                .expect("same embedding width");
            let head = ndarray::s![..num_anchors, ..];
            pool_sweep(e1.slice(head), e2.slice(head), pool.view(), dict_sizes, taus, seed, metric)
        })
        .collect();
    Ok(per_seed?.into_iter().flatten().collect())
}

/// Per-seed JSONL file name inside the output directory.
pub fn log_path(dir: &Path, framework: Framework, seed: u64) -> PathBuf {
    dir.join(format!("{framework}_seed{seed}.jsonl"))
}

/// Writes `config.json`, one JSONL per seed, and `summary.csv`.
pub fn write_outputs(cfg: &ExperimentConfig, runs: &[(u64, MetricLog)]) -> Result<()> {
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let framework = cfg.train.framework.framework;
    for (seed, log) in runs {
        let file = fs::File::create(log_path(&cfg.output, framework, *seed))?;
        log.write_jsonl(std::io::BufWriter::new(file))?;
    }
    let mut summary = fs::File::create(cfg.output.join("summary.csv"))?;
    write_summary(runs, framework, &mut summary)
}

pub fn write_summary<W: Write>(runs: &[(u64, MetricLog)], framework: Framework, mut out: W) -> Result<()> {
    writeln!(out, "framework,seed,epochs,top1,loss,r_plus_entropy,collapse")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (seed, log) in runs {
        let Some(last) = log.last() else { continue };
        writeln!(
            out,
            "{framework},{seed},{},{},{},{},{}",
            last.epoch,
            last.top1,
            opt(last.loss),
            opt(last.r_plus_entropy),
            last.collapse
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seeds: Vec<u64>) -> ExperimentConfig {
        let mut train = desk_profile(Framework::SimCo, 8);
        train.network = NetworkConfig {
            input_dim: 8,
            hidden: [8, 8],
            projector_hidden: 8,
            embed_dim: 4,
            predictor_hidden: 4,
            activation: Activation::Tanh,
        };
        train.schedule.total_epochs = 2;
        train.schedule.warmup_epochs = 1;
        train.schedule.batch_size = 16;
        let dataset = DatasetSpec::Synthetic {
            classes: 4,
            dim: 8,
            noise_scale: 0.1,
            samples: 64,
            eval_samples: 32,
        };
        ExperimentConfig::new(train, dataset, seeds, PathBuf::from("unused"))
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = tiny(vec![0, 1]);
        cfg.label_noise = Some(LabelNoise {
            kind: crate::data::NoiseKind::Symmetric,
            ratio: 0.4,
        });
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
        assert!(text.contains("\"entropy_unit\":\"nats\""));
    }

    #[test]
    fn dataset_resolution_is_seeded() {
        let ds = DatasetSpec::desk_synthetic();
        assert_eq!(ds.resolve(3).unwrap(), ds.resolve(3).unwrap());
        assert_ne!(ds.resolve(3).unwrap().0, ds.resolve(4).unwrap().0);
    }

    #[test]
    fn parallel_runs_match_sequential() {
        let cfg = tiny(vec![5, 6, 7]);
        let runs = cfg.run().unwrap();
        for (seed, log) in &runs {
            assert_eq!(*log, cfg.run_seed(*seed).unwrap());
        }
        assert_eq!(runs.iter().map(|r| r.0).collect::<Vec<_>>(), vec![5, 6, 7]);
    }

    #[test]
    fn trained_sweep_is_seeded() {
        let cfg = tiny(vec![1]);
        let rows = trained_sweep(&cfg, 8, &[4, 16], &[0.1, 1.0], SweepMetric::Entropy).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows, trained_sweep(&cfg, 8, &[4, 16], &[0.1, 1.0], SweepMetric::Entropy).unwrap());
        assert!(trained_sweep(&cfg, 64, &[4], &[0.1], SweepMetric::Similarity).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny(vec![]);
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![0];
        cfg.train.network.input_dim = 9;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny(vec![0]);
        cfg.label_noise = Some(LabelNoise {
            kind: crate::data::NoiseKind::Asymmetric,
            ratio: 1.0,
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn outputs_are_written_per_seed() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(vec![1, 2]);
        cfg.output = dir.path().to_path_buf();
        let runs = cfg.run().unwrap();
        write_outputs(&cfg, &runs).unwrap();
        for s in [1, 2] {
            let text = fs::read_to_string(log_path(dir.path(), Framework::SimCo, s)).unwrap();
            assert_eq!(MetricLog::from_jsonl(&text).unwrap(), runs[(s - 1) as usize].1);
        }
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 3);
        let echo: ExperimentConfig = serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
        assert_eq!(echo, cfg);
    }
}
