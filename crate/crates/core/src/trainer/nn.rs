//! Multilayer perceptrons with hand-written reverse mode over a fixed layer
//! vocabulary: affine maps, a pointwise nonlinearity, and l2 normalisation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::check_dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Self::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// `y = x W^T + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((output, input), || rng.random_range(-bound..bound)),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

/// Affine layers with `activation` between them, and optionally after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
    pub final_activation: bool,
}

/// Activations kept by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of every affine layer.
    inputs: Vec<Array2<f64>>,
    /// Output of every affine layer before the nonlinearity.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Layer widths `dims[0] -> dims[1] -> ...`.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], activation: Activation, final_activation: bool, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("invalid layer widths {dims:?}")));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect(),
            activation,
            final_activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").output_dim()
    }

    fn activated(&self, idx: usize) -> bool {
        idx + 1 < self.layers.len() || self.final_activation
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(h.view());
            inputs.push(h);
            h = if self.activated(i) {
                z.mapv(|v| self.activation.apply(v))
            } else {
                z.clone()
            };
            pre.push(z);
        }
        Ok((h, MlpCache { inputs, pre }))
    }

    /// Forward pass without keeping activations.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(h.view());
            if self.activated(i) {
                h.mapv_inplace(|v| self.activation.apply(v));
            }
        }
        Ok(h)
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: ArrayView2<f64>, grads: &mut Mlp) -> Result<Array2<f64>> {
        if cache.inputs.len() != self.layers.len() || grads.layers.len() != self.layers.len() {
            return Err(Error::InvalidConfig("cache does not match network".into()));
        }
        check_dim(self.output_dim(), grad_out.ncols())?;
        check_dim(cache.inputs[0].nrows(), grad_out.nrows())?;
        let mut g = grad_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            if self.activated(i) {
                g.zip_mut_with(&cache.pre[i], |gi, &p| *gi *= self.activation.derivative(p));
            }
            let gl = &mut grads.layers[i];
            gl.weight += &g.t().dot(&cache.inputs[i]);
            gl.bias += &g.sum_axis(Axis(0));
            g = g.dot(&self.layers[i].weight);
        }
        Ok(g)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.input_dim(), l.output_dim()))
                .collect(),
            activation: self.activation,
            final_activation: self.final_activation,
        }
    }

    /// Parameter tensors in a fixed order: weight then bias, layer by layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}

/// Norms below this are treated as a dead row (a ReLU net can output exact zeros).
const MIN_NORM: f64 = 1e-12;

/// Row-wise l2 normalisation, returning the row norms for the backward pass.
/// A row with norm under `MIN_NORM` maps to zero and passes no gradient back.
pub fn normalize_rows(z: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms: Array1<f64> = z.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if norms.iter().any(|n| !n.is_finite()) {
        return Err(Error::NonFinite("embedding norm"));
    }
    let mut q = z.to_owned();
    for (mut row, &n) in q.rows_mut().into_iter().zip(&norms) {
        if n < MIN_NORM {
            row.fill(0.0);
        } else {
            row /= n;
        }
    }
    Ok((q, norms))
}

/// Backward of [`normalize_rows`]: `(g - (q.g) q) / |z|` per row.
pub fn normalize_rows_backward(q: ArrayView2<f64>, norms: &Array1<f64>, grad_q: ArrayView2<f64>) -> Array2<f64> {
    let proj = (&q * &grad_q).sum_axis(Axis(1)).insert_axis(Axis(1));
    let mut g = &grad_q - &(&q * &proj);
    for (mut row, &n) in g.rows_mut().into_iter().zip(norms) {
        if n < MIN_NORM {
            row.fill(0.0);
        } else {
            row /= n;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::{fd_gradient, normalize_backward, relative_error};
    use crate::numerics::seeded_rng;
    use ndarray::array;

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = seeded_rng(0);
        let mlp = Mlp::init(&[3, 4, 2], Activation::Relu, false, &mut rng).unwrap();
        let x = array![[0.1, -0.2, 0.3], [1.0, 0.5, -0.5]];
        let (_, cache) = mlp.forward(x.view()).unwrap();
        let mut g = mlp.zeros_like();
        let gx = mlp.backward(&cache, Array2::zeros((2, 2)).view(), &mut g).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_affine_weight_grad_is_outer_product() {
        let mut rng = seeded_rng(1);
        let mlp = Mlp::init(&[3, 2], Activation::Relu, false, &mut rng).unwrap();
        let x = array![[0.5, -1.0, 2.0]];
        let c = array![[3.0, -4.0]];
        let (_, cache) = mlp.forward(x.view()).unwrap();
        let mut g = mlp.zeros_like();
        mlp.backward(&cache, c.view(), &mut g).unwrap();
        let outer = c.t().dot(&x);
        assert_eq!(g.layers[0].weight, outer);
        assert_eq!(g.layers[0].bias, array![3.0, -4.0]);
    }

    #[test]
    fn infer_matches_forward() {
        let mut rng = seeded_rng(2);
        let mlp = Mlp::init(&[4, 5, 3], Activation::Tanh, true, &mut rng).unwrap();
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        assert_eq!(mlp.forward(x.view()).unwrap().0, mlp.infer(x.view()).unwrap());
        assert!(mlp.forward(Array2::zeros((1, 3)).view()).is_err());
    }

    #[test]
    fn input_grad_matches_fd() {
        let mut rng = seeded_rng(3);
        let mlp = Mlp::init(&[4, 6, 3], Activation::Tanh, false, &mut rng).unwrap();
        let x = array![[0.3, -0.1, 0.8, 0.2]];
        let c = array![[1.0, -2.0, 0.5]];
        let (_, cache) = mlp.forward(x.view()).unwrap();
        let mut g = mlp.zeros_like();
        let gx = mlp.backward(&cache, c.view(), &mut g).unwrap();
        let fd = fd_gradient(
            |v| {
                let xi = Array2::from_shape_vec((1, 4), v.to_vec()).unwrap();
                (mlp.infer(xi.view()).unwrap() * &c).sum()
            },
            x.as_slice().unwrap(),
            1e-4,
        )
        .unwrap();
        assert!(relative_error(gx.as_slice().unwrap(), &fd) < 1e-7);
    }

    #[test]
    fn row_normalisation_backward_matches_vector_version() {
        let z = array![[3.0, 4.0, 0.0], [1.0, -2.0, 2.0]];
        let g = array![[0.5, 0.1, -1.0], [2.0, 0.0, 1.0]];
        let (q, n) = normalize_rows(z.view()).unwrap();
        let back = normalize_rows_backward(q.view(), &n, g.view());
        for i in 0..2 {
            let expected = normalize_backward(&z.row(i).to_vec(), &g.row(i).to_vec()).unwrap();
            for (a, b) in back.row(i).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dead_rows_normalise_to_zero_without_gradient() {
        let z = array![[0.0, 0.0], [3.0, 4.0]];
        let (q, n) = normalize_rows(z.view()).unwrap();
        assert_eq!(q.row(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(q.row(1).to_vec(), vec![0.6, 0.8]);
        let back = normalize_rows_backward(q.view(), &n, array![[1.0, -1.0], [0.0, 0.0]].view());
        assert!(back.iter().all(|&v| v == 0.0));
        let inf = array![[f64::INFINITY, 0.0]];
        assert!(normalize_rows(inf.view()).is_err());
    }
}
