//! Command-line front end: training runs, `r+` sweeps and gradient checks.
//!
//! Every invocation writes its fully resolved configuration to
//! `<output>/config.json`; `--config <that file>` repeats the run exactly.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use dualtemp::analysis::{cell_mean, entropy_sweep, similarity_sweep, write_sweep_csv, SweepConfig, SweepMetric, SweepRow, DEFAULT_POSITIVE_NOISE};
use dualtemp::data::{CifarVariant, LabelNoise, NoiseKind};
use dualtemp::dictionary::{MomentumConfig, SamplingStrategy};
use dualtemp::experiment::{desk_profile, full_profile, trained_sweep, write_outputs, DatasetSpec, ExperimentConfig};
use dualtemp::gradients::{run_gradcheck, GradCheck};
use dualtemp::losses::DualTempConfig;
use dualtemp::trainer::Framework;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Train,
    EntropySweep,
    SimilaritySweep,
    Gradcheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    /// Small MLP on the synthetic set; minutes on a laptop.
    Desk,
    /// Full-size settings (200 epochs, 65536-key dictionaries).
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    Synthetic,
    Cifar10,
    Cifar100,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Embeddings {
    /// Random unit vectors with noisy positives.
    Random,
    /// Outputs of an encoder trained with the given framework settings.
    Trained,
}

#[derive(Debug, Parser)]
#[command(name = "dualtemp", version, about = "Dual-temperature contrastive learning experiments")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Mode::Train)]
    mode: Mode,
    /// Re-run from a `config.json` written by an earlier invocation; other flags
    /// except `--output` are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: runs].
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,

    /// mocov2, simmoco, simco, st, noncl (SimSiam-style) or noncl-byol.
    #[arg(long, default_value = "simco", value_parser = parse_framework)]
    framework: Framework,
    #[arg(long)]
    tau_alpha: Option<f64>,
    #[arg(long)]
    tau_beta: Option<f64>,
    #[arg(long)]
    dict_size_scalar: Option<usize>,
    #[arg(long)]
    dict_size_vector: Option<usize>,
    /// Keys drawn from the vector dictionary per step (0 = all).
    #[arg(long)]
    vector_sample: Option<usize>,
    /// Keys drawn from the scalar dictionary per step (0 = all).
    #[arg(long)]
    scalar_sample: Option<usize>,
    #[arg(long, value_parser = parse_sampling)]
    sampling: Option<SamplingStrategy>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Symmetrised loss (both views act as anchors).
    #[arg(long)]
    symmetric: bool,
    /// Inter-anchor hardness-awareness: single temperature for contrastive
    /// frameworks, in-batch anchor weights for non-contrastive ones.
    #[arg(long)]
    ha_toggle: bool,

    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    probe_lr: Option<f64>,

    /// A count N (seeds first-seed..first-seed+N) or a comma-separated list.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,

    #[arg(long, value_enum, default_value_t = DatasetKind::Synthetic)]
    dataset: DatasetKind,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eval_samples: Option<usize>,
    /// CIFAR training batch file(s), concatenated binary records.
    #[arg(long)]
    train_file: Option<PathBuf>,
    #[arg(long)]
    test_file: Option<PathBuf>,
    /// Gaussian noise forming the two views of a CIFAR image.
    #[arg(long, default_value_t = 0.05)]
    view_noise: f64,
    #[arg(long, value_parser = parse_noise_kind)]
    label_noise: Option<NoiseKind>,
    #[arg(long, default_value_t = 0.0)]
    noise_ratio: f64,

    #[arg(long, value_delimiter = ',', default_value = "64,256,1024,4096")]
    dict_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.07,0.1,0.2,0.5,1.0")]
    taus: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Embeddings::Random)]
    embeddings: Embeddings,
    #[arg(long, default_value_t = 256)]
    anchors: usize,
    /// Embedding width of the random sweep.
    #[arg(long, default_value_t = 32)]
    sweep_dim: usize,
    #[arg(long, default_value_t = DEFAULT_POSITIVE_NOISE)]
    positive_noise: f64,

    /// Random instances per gradient check.
    #[arg(long, default_value_t = 100)]
    instances: usize,
}

fn parse_framework(s: &str) -> std::result::Result<Framework, String> {
    s.parse().map_err(|e: dualtemp::Error| e.to_string())
}

fn parse_sampling(s: &str) -> std::result::Result<SamplingStrategy, String> {
    s.parse().map_err(|e: dualtemp::Error| e.to_string())
}

fn parse_noise_kind(s: &str) -> std::result::Result<NoiseKind, String> {
    match s {
        "symmetric" => Ok(NoiseKind::Symmetric),
        "asymmetric" => Ok(NoiseKind::Asymmetric),
        other => Err(format!("unknown label noise `{other}` (symmetric, asymmetric)")),
    }
}

/// Everything needed to repeat an invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
enum Plan {
    Train {
        experiment: ExperimentConfig,
    },
    Sweep {
        metric: SweepMetric,
        embeddings: Embeddings,
        sweep: SweepConfig,
        /// Training setup for trained embeddings; its seeds replace the sweep's.
        experiment: Option<ExperimentConfig>,
        output: PathBuf,
    },
    Gradcheck {
        instances: usize,
        seed: u64,
        output: PathBuf,
    },
}

impl Plan {
    fn output(&self) -> &Path {
        match self {
            Plan::Train { experiment } => &experiment.output,
            Plan::Sweep { output, .. } | Plan::Gradcheck { output, .. } => output,
        }
    }

    fn set_output(&mut self, dir: PathBuf) {
        match self {
            Plan::Train { experiment } => experiment.output = dir,
            Plan::Sweep { output, experiment, .. } => {
                if let Some(e) = experiment {
                    e.output = dir.clone();
                }
                *output = dir;
            }
            Plan::Gradcheck { output, .. } => *output = dir,
        }
    }
}

fn parse_seeds(spec: &str, first: u64) -> Result<Vec<u64>> {
    if spec.contains(',') {
        return spec
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`")))
            .collect();
    }
    let n: u64 = spec.trim().parse().with_context(|| format!("bad seed count `{spec}`"))?;
    if n == 0 {
        bail!("--seeds must be at least 1");
    }
    Ok((first..first + n).collect())
}

fn dataset_spec(cli: &Cli) -> Result<DatasetSpec> {
    let variant = match cli.dataset {
        DatasetKind::Synthetic => {
            let DatasetSpec::Synthetic {
                classes,
                dim,
                noise_scale,
                samples,
                eval_samples,
            } = DatasetSpec::desk_synthetic()
            else {
                unreachable!("desk set is synthetic")
            };
            return Ok(DatasetSpec::Synthetic {
                classes: cli.classes.unwrap_or(classes),
                dim: cli.dim.unwrap_or(dim),
                noise_scale: cli.noise_scale.unwrap_or(noise_scale),
                samples: cli.samples.unwrap_or(samples),
                eval_samples: cli.eval_samples.unwrap_or(eval_samples),
            });
        }
        DatasetKind::Cifar10 => CifarVariant::Cifar10,
        DatasetKind::Cifar100 => CifarVariant::Cifar100,
    };
    let (Some(train), Some(test)) = (&cli.train_file, &cli.test_file) else {
        bail!("--dataset {:?} needs --train-file and --test-file", cli.dataset);
    };
    Ok(DatasetSpec::CifarBinary {
        variant,
        train: train.clone(),
        test: test.clone(),
        view_noise: cli.view_noise,
    })
}

fn experiment_config(cli: &Cli, output: PathBuf) -> Result<ExperimentConfig> {
    let dataset = dataset_spec(cli)?;
    let mut train = match cli.profile {
        Profile::Desk => desk_profile(cli.framework, dataset.input_dim()),
        Profile::Full => full_profile(cli.framework, dataset.input_dim()),
    };
    let fw = &mut train.framework;
    let temps = fw.temperatures;
    fw.temperatures = DualTempConfig::new(
        cli.tau_alpha.unwrap_or(temps.tau_alpha()),
        cli.tau_beta.unwrap_or(temps.tau_beta()),
    )?;
    fw.dict_size_scalar = cli.dict_size_scalar.unwrap_or(fw.dict_size_scalar);
    fw.dict_size_vector = cli.dict_size_vector.unwrap_or(fw.dict_size_vector);
    fw.vector_sample = cli.vector_sample.unwrap_or(fw.vector_sample);
    fw.scalar_sample = cli.scalar_sample.unwrap_or(fw.scalar_sample);
    if let Some(s) = cli.sampling {
        fw.sampling = s;
    }
    if let Some(m) = cli.momentum {
        fw.momentum = MomentumConfig::new(m)?;
    }
    fw.symmetric |= cli.symmetric;
    fw.ha_toggle |= cli.ha_toggle;
    let sched = &mut train.schedule;
    sched.total_epochs = cli.epochs.unwrap_or(sched.total_epochs);
    sched.warmup_epochs = cli.warmup_epochs.unwrap_or(sched.warmup_epochs.min(sched.total_epochs));
    sched.batch_size = cli.batch_size.unwrap_or(sched.batch_size);
    sched.base_lr = cli.lr.unwrap_or(sched.base_lr);
    sched.probe_lr = cli.probe_lr.unwrap_or(sched.probe_lr);

    let mut cfg = ExperimentConfig::new(train, dataset, parse_seeds(&cli.seeds, cli.first_seed)?, output);
    if let Some(kind) = cli.label_noise {
        cfg.label_noise = Some(LabelNoise {
            kind,
            ratio: cli.noise_ratio,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn plan_from_flags(cli: &Cli) -> Result<Plan> {
    let output = cli.output.clone().unwrap_or_else(|| PathBuf::from("runs"));
    Ok(match cli.mode {
        Mode::Train => Plan::Train {
            experiment: experiment_config(cli, output)?,
        },
        Mode::EntropySweep | Mode::SimilaritySweep => {
            let metric = if cli.mode == Mode::EntropySweep {
                SweepMetric::Entropy
            } else {
                SweepMetric::Similarity
            };
            let experiment = match cli.embeddings {
                Embeddings::Random => None,
                Embeddings::Trained => Some(experiment_config(cli, output.clone())?),
            };
            let seeds = match &experiment {
                Some(e) => e.seeds.clone(),
                None => parse_seeds(&cli.seeds, cli.first_seed)?,
            };
            Plan::Sweep {
                metric,
                embeddings: cli.embeddings,
                sweep: SweepConfig {
                    num_anchors: cli.anchors,
                    dim: cli.sweep_dim,
                    dict_sizes: cli.dict_sizes.clone(),
                    taus: cli.taus.clone(),
                    seeds,
                    positive_noise: cli.positive_noise,
                },
                experiment,
                output,
            }
        }
        Mode::Gradcheck => Plan::Gradcheck {
            instances: cli.instances,
            seed: cli.first_seed,
            output,
        },
    })
}

fn load_plan(path: &Path) -> Result<Plan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    // training runs echo the bare experiment config
    serde_json::from_str::<Plan>(&text)
        .or_else(|_| serde_json::from_str::<ExperimentConfig>(&text).map(|experiment| Plan::Train { experiment }))
        .with_context(|| format!("{} is not a config written by this tool", path.display()))
}

fn write_echo(plan: &Plan) -> Result<()> {
    fs::create_dir_all(plan.output())?;
    fs::write(plan.output().join("config.json"), serde_json::to_string_pretty(plan)?)?;
    Ok(())
}

fn execute(plan: &Plan) -> Result<bool> {
    match plan {
        Plan::Train { experiment } => {
            let runs = experiment.run()?;
            write_outputs(experiment, &runs)?;
            for (seed, log) in &runs {
                if let Some(last) = log.last() {
                    println!(
                        "{} seed {seed}: epoch {} top1 {:.4} collapse {:.4}",
                        experiment.train.framework.framework, last.epoch, last.top1, last.collapse
                    );
                }
            }
            println!("wrote {}", experiment.output.display());
            Ok(true)
        }
        Plan::Sweep {
            metric,
            embeddings,
            sweep,
            experiment,
            output,
        } => {
            let rows = match (embeddings, experiment) {
                (Embeddings::Random, _) => match metric {
                    SweepMetric::Entropy => entropy_sweep(sweep)?,
                    SweepMetric::Similarity => similarity_sweep(sweep)?,
                },
                (Embeddings::Trained, Some(exp)) => {
                    trained_sweep(exp, sweep.num_anchors, &sweep.dict_sizes, &sweep.taus, *metric)?
                }
                (Embeddings::Trained, None) => bail!("trained sweep without a training config"),
            };
            write_echo(plan)?;
            let name = match metric {
                SweepMetric::Entropy => "entropy",
                SweepMetric::Similarity => "similarity",
            };
            let embeddings = match embeddings {
                Embeddings::Random => "random",
                Embeddings::Trained => "trained",
            };
            let path = output.join(format!("{name}_sweep_{embeddings}.csv"));
            write_sweep_csv(&rows, BufWriter::new(fs::File::create(&path)?))?;
            print_cell_means(&rows, sweep);
            println!("wrote {}", path.display());
            Ok(true)
        }
        Plan::Gradcheck { instances, seed, output } => {
            let report = run_gradcheck(*instances, *seed)?;
            write_echo(plan)?;
            let path = output.join("gradcheck.csv");
            let mut csv = String::from("check,instances,max_error,tolerance,passed\n");
            for c in &report {
                csv.push_str(&format!("{},{},{},{},{}\n", c.name, c.instances, c.max_error, c.tolerance, c.passed()));
                println!(
                    "{:<24} max error {:.3e} (tolerance {:.0e}) {}",
                    c.name,
                    c.max_error,
                    c.tolerance,
                    if c.passed() { "ok" } else { "FAILED" }
                );
            }
            fs::write(&path, csv)?;
            Ok(report.iter().all(GradCheck::passed))
        }
    }
}

fn print_cell_means(rows: &[SweepRow], sweep: &SweepConfig) {
    for &k in &sweep.dict_sizes {
        let cells: Vec<String> = sweep
            .taus
            .iter()
            .map(|&t| format!("tau={t}: {:.4}", cell_mean(rows, k, t).unwrap_or(f64::NAN)))
            .collect();
        println!("K={k:<6} {}", cells.join("  "));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let plan = match &cli.config {
        Some(path) => load_plan(path).map(|mut p| {
            if let Some(dir) = &cli.output {
                p.set_output(dir.clone());
            }
            p
        }),
        None => plan_from_flags(&cli),
    };
    match plan.and_then(|p| execute(&p)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
