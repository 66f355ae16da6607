//! Desk-scale training harness: a small MLP backbone with hand-written
//! backprop, SGD with warmup and cosine decay, the framework variants, and an
//! online linear probe on detached features.

pub mod framework;
pub mod network;
pub mod nn;
pub mod objectives;
pub mod probe;
pub mod schedule;

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::analysis::{collapse_stat, r_plus, NegativeSource};
use crate::data::{LabeledDataset, PairDataset};
use crate::dictionary::{momentum_update, QueueDictionary};
use crate::error::{Error, Result};
use crate::losses::{dt_loss_grad, inter_anchor_weights, BatchPair};
use crate::numerics::{seeded_stream, SeededRng};

pub use framework::{Framework, FrameworkSpec};
pub use network::{backward, embed, features, forward, EncoderParams, ForwardPass, NetworkConfig, OutputGrads};
pub use nn::Activation;
pub use objectives::{decomposed_batch, noncl_batch, Negatives};
pub use probe::{linear_eval, LinearProbe};
pub use schedule::{lr_at, lr_factor, sgd_step, ScheduleConfig};

use nn::normalize_rows;

const PARAM_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const STEP_STREAM: u64 = 3;

/// Everything `run_training` needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub framework: FrameworkSpec,
    pub schedule: ScheduleConfig,
    pub network: NetworkConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.framework.validate()?;
        self.schedule.validate()
    }
}

/// A batch of paired views and the labels the probe trains on.
#[derive(Debug, Clone, Copy)]
pub struct TrainBatch<'a> {
    pub view1: ArrayView2<'a, f64>,
    pub view2: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub loss: f64,
    pub lr: f64,
    /// Entropy (nats) of the in-batch `r+` at the scalar temperature.
    pub r_plus_entropy: f64,
    pub probe_loss: f64,
}

/// Scalar and vector key dictionaries of a MoCo-style run.
#[derive(Debug, Clone, PartialEq)]
pub struct Queues {
    pub scalar: QueueDictionary,
    pub vector: QueueDictionary,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub online: EncoderParams,
    pub momentum_copy: Option<EncoderParams>,
    pub queues: Option<Queues>,
    pub velocity: EncoderParams,
    pub probe: LinearProbe,
    pub step: u64,
    pub epoch: u64,
    rng: SeededRng,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig, num_classes: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let spec = &cfg.framework;
        let net = &cfg.network;
        let mut init_rng = seeded_stream(seed, PARAM_STREAM);
        let online = EncoderParams::init(net, spec.framework.uses_predictor(), &mut init_rng)?;
        let momentum_copy = spec.framework.uses_momentum().then(|| online.without_predictor());
        let queues = if spec.framework.uses_queues() {
            Some(Queues {
                scalar: QueueDictionary::new(spec.dict_size_scalar, net.embed_dim)?,
                vector: QueueDictionary::new(spec.dict_size_vector, net.embed_dim)?,
            })
        } else {
            None
        };
        Ok(Self {
            velocity: online.zeros_like(),
            online,
            momentum_copy,
            queues,
            probe: LinearProbe::new(net.feature_dim(), num_classes),
            step: 0,
            epoch: 0,
            rng: seeded_stream(seed, STEP_STREAM),
        })
    }

    /// Errors unless the optional parts match what `framework` needs.
    pub fn check_layout(&self, framework: Framework) -> Result<()> {
        let ok = self.momentum_copy.is_some() == framework.uses_momentum()
            && self.queues.is_some() == framework.uses_queues()
            && self.online.predictor.is_some() == framework.uses_predictor();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("training state does not match framework {framework}")))
        }
    }

    /// Versioned little-endian checkpoint of parameters, buffers and counters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        let mut blocks: Vec<Vec<f64>> = vec![self.online.to_flat(), self.velocity.to_flat()];
        blocks.push(self.momentum_copy.as_ref().map(EncoderParams::to_flat).unwrap_or_default());
        let mut probe = self.probe.weight.iter().copied().collect::<Vec<_>>();
        probe.extend(self.probe.bias.iter());
        blocks.push(probe);
        for b in &blocks {
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            for x in b {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        for q in self.queues.iter().flat_map(|q| [&q.scalar, &q.vector]) {
            let bytes = q.to_bytes();
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    /// Restores a checkpoint into a state of the same layout.
    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a training checkpoint".into()));
        }
        let version = r.u64()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let step = r.u64()?;
        let epoch = r.u64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        let mut next = self.clone();
        next.online.set_flat(&r.floats()?)?;
        next.velocity.set_flat(&r.floats()?)?;
        let momentum = r.floats()?;
        match &mut next.momentum_copy {
            Some(m) => m.set_flat(&momentum)?,
            None if momentum.is_empty() => {}
            None => return Err(Error::Format("checkpoint has a momentum encoder".into())),
        }
        let probe = r.floats()?;
        let nw = next.probe.weight.len();
        if probe.len() != nw + next.probe.bias.len() {
            return Err(Error::Format("probe shape mismatch".into()));
        }
        for (dst, src) in next.probe.weight.iter_mut().chain(next.probe.bias.iter_mut()).zip(&probe) {
            *dst = *src;
        }
        if let Some(q) = &mut next.queues {
            for dict in [&mut q.scalar, &mut q.vector] {
                let len = r.u64()? as usize;
                let restored = QueueDictionary::from_bytes(r.take(len)?)?;
                if restored.capacity() != dict.capacity() || restored.dim() != dict.dim() {
                    return Err(Error::Format("dictionary shape mismatch".into()));
                }
                *dict = restored;
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes in checkpoint".into()));
        }
        let mut rng = SeededRng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        next.rng = rng;
        next.step = step;
        next.epoch = epoch;
        *self = next;
        Ok(())
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"DTTRAIN\0";
const CHECKPOINT_VERSION: u64 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("bad length".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

/// Loss, parameter gradients and side products of one batch, before any update.
#[derive(Debug, Clone)]
pub struct GradientPass {
    pub loss: f64,
    pub grads: EncoderParams,
    pub r_plus_entropy: f64,
    /// Detached backbone features of the first view, for the probe.
    pub features: Array2<f64>,
    /// Momentum keys to enqueue after the update.
    keys: Option<Array2<f64>>,
}

/// Computes the framework's loss and parameter gradients on `batch`.
/// Only the state's step generator is advanced (dictionary sampling).
pub fn compute_gradients(state: &mut TrainState, spec: &FrameworkSpec, batch: TrainBatch<'_>) -> Result<GradientPass> {
    state.check_layout(spec.framework)?;
    let n = batch.view1.nrows();
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    if batch.view2.nrows() != n || batch.labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: batch.view2.nrows().min(batch.labels.len()),
        });
    }
    match spec.framework {
        Framework::SimCo | Framework::StSimCo => simco_gradients(state, spec, batch),
        Framework::SimMoco | Framework::MocoV2 => momentum_gradients(state, spec, batch),
        Framework::NonclSimsiam | Framework::NonclByolLike => noncl_gradients(state, spec, batch),
    }
}

fn in_batch_entropy(queries: ArrayView2<f64>, keys: ArrayView2<f64>, tau: f64) -> Result<f64> {
    Ok(r_plus(queries, keys, NegativeSource::InBatch, tau)?.entropy)
}

fn simco_gradients(state: &TrainState, spec: &FrameworkSpec, batch: TrainBatch<'_>) -> Result<GradientPass> {
    let temps = spec.effective_temperatures();
    let p1 = forward(&state.online, batch.view1, false)?;
    let p2 = forward(&state.online, batch.view2, false)?;
    let pair = BatchPair::new(p1.embedding.clone(), p2.embedding.clone())?;
    let out = dt_loss_grad(&pair, &temps, spec.symmetric)?;
    let mut grads = state.online.zeros_like();
    backward(&state.online, &p1, &embedding_grad(out.grad_queries), &mut grads)?;
    backward(&state.online, &p2, &embedding_grad(out.grad_keys), &mut grads)?;
    Ok(GradientPass {
        loss: out.value,
        grads,
        r_plus_entropy: in_batch_entropy(p1.embedding.view(), p2.embedding.view(), temps.tau_beta())?,
        features: p1.features,
        keys: None,
    })
}

fn embedding_grad(g: Array2<f64>) -> OutputGrads {
    OutputGrads {
        embedding: Some(g),
        prediction: None,
    }
}

/// Scalar and vector dictionary samples; `None` while a queue is still filling.
type DictionaryDraw = (Option<Array2<f64>>, Option<Array2<f64>>);

fn draw_dictionaries(state: &mut TrainState, spec: &FrameworkSpec) -> Result<DictionaryDraw> {
    let Some(q) = &state.queues else {
        return Ok((None, None));
    };
    let mut draw = |dict: &QueueDictionary, sample: usize, strategy| -> Result<Option<Array2<f64>>> {
        let needed = if sample == 0 { dict.capacity() } else { sample };
        if dict.len() < needed {
            Ok(None)
        } else {
            dict.sample_matrix(strategy, needed, &mut state.rng).map(Some)
        }
    };
    let scalar = draw(&q.scalar, spec.scalar_sample, spec.scalar_sampling)?;
    let vector = draw(&q.vector, spec.vector_sample, spec.sampling)?;
    Ok((scalar, vector))
}

fn pick<'a>(dict: &'a Option<Array2<f64>>, keys: &'a Array2<f64>) -> Negatives<'a> {
    match dict {
        Some(m) => Negatives::Shared(m.view()),
        None => Negatives::InBatch(keys.view()),
    }
}

fn momentum_gradients(state: &mut TrainState, spec: &FrameworkSpec, batch: TrainBatch<'_>) -> Result<GradientPass> {
    let temps = spec.effective_temperatures();
    let (dict_scalar, dict_vector) = draw_dictionaries(state, spec)?;
    let target = state.momentum_copy.as_ref().expect("layout checked");
    let mut grads = state.online.zeros_like();
    let mut directions = vec![(batch.view1, batch.view2)];
    if spec.symmetric {
        directions.push((batch.view2, batch.view1));
    }
    let weight = 1.0 / directions.len() as f64;
    let mut loss = 0.0;
    let mut first = None;
    for (qv, kv) in directions {
        let pass = forward(&state.online, qv, false)?;
        let keys = embed(target, kv)?;
        let out = decomposed_batch(pass.embedding.view(), keys.view(), pick(&dict_scalar, &keys), pick(&dict_vector, &keys), &temps)?;
        loss += weight * out.loss;
        backward(&state.online, &pass, &embedding_grad(out.grad_queries * weight), &mut grads)?;
        if first.is_none() {
            first = Some((pass, keys));
        }
    }
    let (pass, keys) = first.expect("at least one direction");
    Ok(GradientPass {
        loss,
        grads,
        r_plus_entropy: in_batch_entropy(pass.embedding.view(), keys.view(), temps.tau_beta())?,
        features: pass.features,
        keys: Some(keys),
    })
}

fn noncl_gradients(state: &TrainState, spec: &FrameworkSpec, batch: TrainBatch<'_>) -> Result<GradientPass> {
    let tau = spec.temperatures.tau_alpha();
    let mut grads = state.online.zeros_like();
    let mut directions = vec![(batch.view1, batch.view2)];
    if spec.symmetric {
        directions.push((batch.view2, batch.view1));
    }
    let weight = 1.0 / directions.len() as f64;
    let mut loss = 0.0;
    let mut first = None;
    for (qv, kv) in directions {
        let pass = forward(&state.online, qv, true)?;
        let targets = match &state.momentum_copy {
            Some(m) => embed(m, kv)?,
            None => embed(&state.online, kv)?,
        };
        let prediction = pass.prediction.as_ref().expect("predictor ran");
        let (pred_unit, _) = normalize_rows(prediction.view())?;
        let factors = if spec.ha_toggle {
            Some(inter_anchor_weights(pred_unit.view(), targets.view(), tau)?)
        } else {
            None
        };
        let (l, g) = noncl_batch(prediction.view(), targets.view(), factors.as_deref())?;
        loss += weight * l;
        let upstream = OutputGrads {
            embedding: None,
            prediction: Some(g * weight),
        };
        backward(&state.online, &pass, &upstream, &mut grads)?;
        if first.is_none() {
            first = Some((pass, pred_unit, targets));
        }
    }
    let (pass, pred_unit, targets) = first.expect("at least one direction");
    Ok(GradientPass {
        loss,
        grads,
        r_plus_entropy: in_batch_entropy(pred_unit.view(), targets.view(), tau)?,
        features: pass.features,
        keys: None,
    })
}

/// One optimisation step: gradients, SGD, dictionary push, EMA, and a probe update.
/// `lr_scale` is the schedule factor in `[0, 1]` for this step.
pub fn train_step(state: &mut TrainState, cfg: &TrainConfig, batch: TrainBatch<'_>, lr_scale: f64) -> Result<StepMetrics> {
    let spec = &cfg.framework;
    let pass = compute_gradients(state, spec, batch)?;
    if !pass.loss.is_finite() {
        return Err(Error::NonFinite("training loss"));
    }
    let lr = cfg.schedule.peak_lr() * lr_scale;
    sgd_step(&mut state.online, &pass.grads, &mut state.velocity, lr, &cfg.schedule);
    if let (Some(q), Some(keys)) = (&mut state.queues, &pass.keys) {
        q.scalar.push_rows(keys.view(), state.step)?;
        q.vector.push_rows(keys.view(), state.step)?;
    }
    if let Some(target) = &mut state.momentum_copy {
        for (o, t) in state.online.backbone_tensors().into_iter().zip(target.tensors_mut()) {
            momentum_update(o, t, spec.momentum)?;
        }
    }
    let probe_loss = state
        .probe
        .step(pass.features.view(), batch.labels, cfg.schedule.probe_lr * lr_scale)?;
    state.step += 1;
    Ok(StepMetrics {
        loss: pass.loss,
        lr,
        r_plus_entropy: pass.r_plus_entropy,
        probe_loss,
    })
}

/// One line of the metric log. Epoch 0 is the evaluation before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub step: u64,
    /// Mean training loss over the epoch.
    pub loss: Option<f64>,
    /// Held-out top-1 of the online probe.
    pub top1: f64,
    /// Mean in-batch `r+` entropy (nats) over the epoch.
    pub r_plus_entropy: Option<f64>,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    /// Mean pairwise cosine of held-out embeddings.
    pub collapse: f64,
    pub framework: Framework,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricLog {
    pub records: Vec<EpochRecord>,
}

impl MetricLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }
}

/// Probe top-1 and collapse statistic on a held-out set.
pub fn evaluate(state: &TrainState, heldout: &LabeledDataset) -> Result<(f64, f64)> {
    let feats = features(&state.online, heldout.inputs.view())?;
    let top1 = state.probe.accuracy(feats.view(), &heldout.labels)?;
    let emb = embed(&state.online, heldout.inputs.view())?;
    Ok((top1, collapse_stat(emb.view())?))
}

/// Full training loop with per-epoch evaluation. Deterministic given `seed`.
pub fn run_training(cfg: &TrainConfig, train: &PairDataset, heldout: &LabeledDataset, seed: u64) -> Result<MetricLog> {
    Ok(train_model(cfg, train, heldout, seed)?.0)
}

/// [`run_training`], also handing back the final state.
pub fn train_model(
    cfg: &TrainConfig,
    train: &PairDataset,
    heldout: &LabeledDataset,
    seed: u64,
) -> Result<(MetricLog, TrainState)> {
    cfg.validate()?;
    let bs = cfg.schedule.batch_size;
    if train.len() < bs {
        return Err(Error::InsufficientEntries {
            requested: bs,
            available: train.len(),
        });
    }
    if train.dim() != cfg.network.input_dim || heldout.dim() != cfg.network.input_dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.network.input_dim,
            found: train.dim(),
        });
    }
    let steps_per_epoch = train.len() / bs;
    let mut state = TrainState::new(cfg, train.num_classes, seed)?;
    let mut shuffle = seeded_stream(seed, SHUFFLE_STREAM);
    let framework = cfg.framework.framework;
    let record = |state: &TrainState, loss, ent, lr| -> Result<EpochRecord> {
        let (top1, collapse) = evaluate(state, heldout)?;
        Ok(EpochRecord {
            epoch: state.epoch,
            step: state.step,
            loss,
            top1,
            r_plus_entropy: ent,
            lr,
            collapse,
            framework,
            seed,
        })
    };
    let mut log = MetricLog {
        records: vec![record(&state, None, None, 0.0)?],
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.schedule.total_epochs {
        order.shuffle(&mut shuffle);
        let (mut loss_sum, mut ent_sum, mut lr) = (0.0, 0.0, 0.0);
        for chunk in order.chunks_exact(bs) {
            let v1 = train.view1.select(Axis(0), chunk);
            let v2 = train.view2.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let batch = TrainBatch {
                view1: v1.view(),
                view2: v2.view(),
                labels: &labels,
            };
            let scale = lr_factor(state.step, &cfg.schedule, steps_per_epoch);
            let m = train_step(&mut state, cfg, batch, scale)?;
            loss_sum += m.loss;
            ent_sum += m.r_plus_entropy;
            lr = m.lr;
        }
        state.epoch += 1;
        let k = steps_per_epoch as f64;
        log.records.push(record(&state, Some(loss_sum / k), Some(ent_sum / k), lr)?);
    }
    Ok((log, state))
}
