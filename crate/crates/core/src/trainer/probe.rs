//! Online linear evaluation: a softmax classifier on detached features.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numerics::check_dim;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    /// `classes x features`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::IndexOutOfRange { index: bad, len: classes });
    }
    Ok(())
}

impl LinearProbe {
    pub fn new(feature_dim: usize, num_classes: usize) -> Self {
        Self {
            weight: Array2::zeros((num_classes, feature_dim)),
            bias: Array1::zeros(num_classes),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weight.nrows()
    }

    pub fn logits(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim(self.weight.ncols(), features.ncols())?;
        Ok(features.dot(&self.weight.t()) + &self.bias)
    }

    /// One SGD step on mean cross-entropy; returns the loss before the step.
    pub fn step(&mut self, features: ArrayView2<f64>, labels: &[usize], lr: f64) -> Result<f64> {
        check_dim(features.nrows(), labels.len())?;
        check_labels(labels, self.num_classes())?;
        let n = labels.len() as f64;
        let mut g = self.logits(features)?;
        let mut loss = 0.0;
        for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - max).exp());
            let total = row.sum();
            row /= total;
            loss -= row[y].ln();
            row[y] -= 1.0;
        }
        g /= n;
        if lr != 0.0 {
            self.weight.scaled_add(-lr, &g.t().dot(&features));
            self.bias.scaled_add(-lr, &g.sum_axis(Axis(0)));
        }
        Ok(loss / n)
    }

    /// Arg-max class per row; the lowest index wins exact ties.
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(self
            .logits(features)?
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    pub fn accuracy(&self, features: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        check_dim(features.nrows(), labels.len())?;
        check_labels(labels, self.num_classes())?;
        if labels.is_empty() {
            return Ok(0.0);
        }
        let hits = self
            .predict(features)?
            .iter()
            .zip(labels)
            .filter(|(p, y)| p == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

/// One classifier update on `(features, labels)`, then top-1 on the held-out split.
pub fn linear_eval(
    probe: &mut LinearProbe,
    features: ArrayView2<f64>,
    labels: &[usize],
    lr: f64,
    heldout_features: ArrayView2<f64>,
    heldout_labels: &[usize],
) -> Result<f64> {
    probe.step(features, labels, lr)?;
    probe.accuracy(heldout_features, heldout_labels)
}
