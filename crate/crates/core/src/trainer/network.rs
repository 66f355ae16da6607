//! Encoder + projector (+ optional predictor) stack and its gradients.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{normalize_rows, normalize_rows_backward, Activation, Mlp, MlpCache};
use crate::error::{Error, Result};

/// Layer widths of the stand-in backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    /// Widths of the two hidden encoder layers; the second is the feature size.
    pub hidden: [usize; 2],
    pub projector_hidden: usize,
    pub embed_dim: usize,
    pub predictor_hidden: usize,
    pub activation: Activation,
}

impl NetworkConfig {
    pub fn feature_dim(&self) -> usize {
        self.hidden[1]
    }
}

/// Trainable parameters. Also used, with the same shapes, for gradients and
/// optimiser buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub encoder: Mlp,
    pub projector: Mlp,
    pub predictor: Option<Mlp>,
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(cfg: &NetworkConfig, with_predictor: bool, rng: &mut R) -> Result<Self> {
        let encoder = Mlp::init(&[cfg.input_dim, cfg.hidden[0], cfg.hidden[1]], cfg.activation, true, rng)?;
        let projector = Mlp::init(&[cfg.hidden[1], cfg.projector_hidden, cfg.embed_dim], cfg.activation, false, rng)?;
        let predictor = if with_predictor {
            Some(Mlp::init(&[cfg.embed_dim, cfg.predictor_hidden, cfg.embed_dim], cfg.activation, false, rng)?)
        } else {
            None
        };
        Ok(Self {
            encoder,
            projector,
            predictor,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            projector: self.projector.zeros_like(),
            predictor: self.predictor.as_ref().map(Mlp::zeros_like),
        }
    }

    /// Encoder and projector only (the shape of a momentum copy).
    pub fn without_predictor(&self) -> Self {
        Self {
            encoder: self.encoder.clone(),
            projector: self.projector.clone(),
            predictor: None,
        }
    }

    /// Tensors in a fixed order: encoder, projector, predictor.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend(self.projector.tensors());
        if let Some(p) = &self.predictor {
            t.extend(p.tensors());
        }
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.projector.tensors_mut());
        if let Some(p) = &mut self.predictor {
            t.extend(p.tensors_mut());
        }
        t
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                found: flat.len(),
            });
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    /// Encoder and projector tensors only, in the order of [`tensors`](Self::tensors).
    pub fn backbone_tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend(self.projector.tensors());
        t
    }

    pub fn backbone_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.projector.tensors_mut());
        t
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    pub fn norm_squared(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum()
    }
}

/// Everything one forward pass produces, plus what backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Backbone features used by linear evaluation.
    pub features: Array2<f64>,
    /// Raw projector output.
    pub projection: Array2<f64>,
    /// Row-normalised projector output.
    pub embedding: Array2<f64>,
    /// Raw predictor output, when a predictor ran.
    pub prediction: Option<Array2<f64>>,
    norms: Array1<f64>,
    encoder_cache: MlpCache,
    projector_cache: MlpCache,
    predictor_cache: Option<MlpCache>,
}

pub fn forward(params: &EncoderParams, input: ArrayView2<f64>, with_predictor: bool) -> Result<ForwardPass> {
    let (features, encoder_cache) = params.encoder.forward(input)?;
    let (projection, projector_cache) = params.projector.forward(features.view())?;
    let (embedding, norms) = normalize_rows(projection.view())?;
    let (prediction, predictor_cache) = if with_predictor {
        let pred = params
            .predictor
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("network has no predictor".into()))?;
        let (p, c) = pred.forward(projection.view())?;
        (Some(p), Some(c))
    } else {
        (None, None)
    };
    Ok(ForwardPass {
        features,
        projection,
        embedding,
        prediction,
        norms,
        encoder_cache,
        projector_cache,
        predictor_cache,
    })
}

/// Normalised embeddings without caches (momentum encoders, evaluation).
pub fn embed(params: &EncoderParams, input: ArrayView2<f64>) -> Result<Array2<f64>> {
    let f = params.encoder.infer(input)?;
    let z = params.projector.infer(f.view())?;
    Ok(normalize_rows(z.view())?.0)
}

pub fn features(params: &EncoderParams, input: ArrayView2<f64>) -> Result<Array2<f64>> {
    params.encoder.infer(input)
}

/// Upstream gradients on the outputs of a [`ForwardPass`].
#[derive(Debug, Clone, Default)]
pub struct OutputGrads {
    /// With respect to the normalised embedding.
    pub embedding: Option<Array2<f64>>,
    /// With respect to the raw predictor output.
    pub prediction: Option<Array2<f64>>,
}

/// Accumulates parameter gradients for `pass` into `grads`.
pub fn backward(params: &EncoderParams, pass: &ForwardPass, upstream: &OutputGrads, grads: &mut EncoderParams) -> Result<()> {
    if !params.same_shape(grads) {
        return Err(Error::InvalidConfig("gradient buffer does not match parameters".into()));
    }
    let mut grad_proj = Array2::zeros(pass.projection.raw_dim());
    if let Some(g) = &upstream.embedding {
        grad_proj += &normalize_rows_backward(pass.embedding.view(), &pass.norms, g.view());
    }
    if let Some(g) = &upstream.prediction {
        let (pred, cache) = match (&params.predictor, &pass.predictor_cache) {
            (Some(p), Some(c)) => (p, c),
            _ => return Err(Error::InvalidConfig("prediction gradient without a predictor pass".into())),
        };
        let gp = grads.predictor.as_mut().expect("shapes checked");
        grad_proj += &pred.backward(cache, g.view(), gp)?;
    }
    let grad_feat = params.projector.backward(&pass.projector_cache, grad_proj.view(), &mut grads.projector)?;
    params.encoder.backward(&pass.encoder_cache, grad_feat.view(), &mut grads.encoder)?;
    Ok(())
}
