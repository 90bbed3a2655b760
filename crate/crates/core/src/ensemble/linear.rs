//! Linear classifiers trained by stochastic subgradient descent.
//!
//! The objective is `λ/2·‖w‖² + mean(loss)` with `λ = 1/(C·n)`, step size
//! `1/(λ·t)` and projection onto the ball that must contain the optimum.
//! The bias is learned as the weight of a constant feature. Returned weights
//! are the average of the iterates over the final epoch.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EnsembleError;

/// Row-major sparse matrix; each row lists `(column, value)` with ascending columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    pub width: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(width: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(rows.iter().flatten().all(|&(c, _)| c < width));
        Self { width, rows }
    }

    pub fn from_dense(x: ArrayView2<'_, f64>) -> Self {
        let rows = x
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self { width: x.ncols(), rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            width: self.width,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Appends one column per entry of `extra`, set to 1 where the flag is true.
    pub fn with_flags(&self, extra: &[Vec<bool>]) -> Self {
        let added = extra.first().map_or(0, Vec::len);
        let rows = self
            .rows
            .iter()
            .zip(extra)
            .map(|(row, flags)| {
                let mut r = row.clone();
                r.extend(
                    flags
                        .iter()
                        .enumerate()
                        .filter(|(_, &f)| f)
                        .map(|(k, _)| (self.width + k, 1.0)),
                );
                r
            })
            .collect();
        Self {
            width: self.width + added,
            rows,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Hinge,
    Logistic,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Hinge => "Lin-SVM (hinge)",
            LossKind::Logistic => "Logistic regression",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearHyperparams {
    /// Inverse regularization weight; larger values fit the data harder.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for LinearHyperparams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 50,
            seed: 0,
            loss: LossKind::Hinge,
        }
    }
}

impl LinearHyperparams {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(EnsembleError::Hyperparams(format!("C must be positive, got {}", self.c)));
        }
        if self.epochs == 0 {
            return Err(EnsembleError::Hyperparams("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss: LossKind,
    /// Set when the training labels were all one class; the model then
    /// predicts that class for every input.
    #[serde(default)]
    pub degenerate: bool,
}

impl LinearModel {
    pub fn constant(width: usize, positive: bool, loss: LossKind) -> Self {
        Self {
            weights: vec![0.0; width],
            bias: if positive { 1.0 } else { -1.0 },
            loss,
            degenerate: true,
        }
    }

    pub fn decision(&self, row: &[(usize, f64)]) -> f64 {
        row.iter().map(|&(c, v)| self.weights[c] * v).sum::<f64>() + self.bias
    }

    pub fn decision_dense(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn predict(&self, row: &[(usize, f64)]) -> bool {
        self.decision(row) >= 0.0
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }
}

/// Weight vector stored as `scale · v` so the shrink step is O(1).
struct ScaledVector {
    v: Vec<f64>,
    scale: f64,
    norm_sq: f64,
}

impl ScaledVector {
    fn new(dim: usize) -> Self {
        Self {
            v: vec![0.0; dim],
            scale: 1.0,
            norm_sq: 0.0,
        }
    }

    fn dot(&self, row: &[(usize, f64)], bias_index: usize) -> f64 {
        let raw: f64 = row.iter().map(|&(c, x)| self.v[c] * x).sum::<f64>() + self.v[bias_index];
        raw * self.scale
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|x| *x = 0.0);
            self.scale = 1.0;
            self.norm_sq = 0.0;
            return;
        }
        self.scale *= factor;
        self.norm_sq *= factor * factor;
        if self.scale < 1e-9 {
            let s = self.scale;
            self.v.iter_mut().for_each(|x| *x *= s);
            self.scale = 1.0;
        }
    }

    fn add(&mut self, c: usize, amount: f64) {
        let old = self.v[c] * self.scale;
        let new = old + amount;
        self.v[c] = new / self.scale;
        self.norm_sq += new * new - old * old;
    }

    fn add_row(&mut self, row: &[(usize, f64)], bias_index: usize, coef: f64) {
        for &(c, x) in row {
            self.add(c, coef * x);
        }
        self.add(bias_index, coef);
    }

    fn project(&mut self, radius: f64) {
        let norm = self.norm_sq.max(0.0).sqrt();
        if norm > radius {
            self.shrink(radius / norm);
        }
    }

    fn resync_norm(&mut self) {
        self.norm_sq = self.v.iter().map(|x| (x * self.scale).powi(2)).sum();
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trains one binary classifier on sparse rows.
pub fn train_linear_sparse(x: &SparseMatrix, y: &[bool], hp: &LinearHyperparams) -> Result<LinearModel, EnsembleError> {
    hp.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(EnsembleError::Empty);
    }
    if n != y.len() {
        return Err(EnsembleError::RowMismatch { x: n, y: y.len() });
    }
    let positives = y.iter().filter(|&&b| b).count();
    if positives == 0 || positives == n {
        return Ok(LinearModel::constant(x.width, positives == n, hp.loss));
    }

    let lambda = 1.0 / (hp.c * n as f64);
    let radius = match hp.loss {
        LossKind::Hinge => 1.0 / lambda.sqrt(),
        LossKind::Logistic => (2.0 * std::f64::consts::LN_2 / lambda).sqrt(),
    };
    let bias_index = x.width;
    let mut w = ScaledVector::new(x.width + 1);
    let mut avg = vec![0.0; x.width + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let last = epoch + 1 == hp.epochs;
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let label = if y[i] { 1.0 } else { -1.0 };
            let margin = label * w.dot(&x.rows[i], bias_index);
            w.shrink(1.0 - eta * lambda);
            let coef = match hp.loss {
                LossKind::Hinge if margin < 1.0 => eta * label,
                LossKind::Hinge => 0.0,
                LossKind::Logistic => eta * label * sigmoid(-margin),
            };
            if coef != 0.0 {
                w.add_row(&x.rows[i], bias_index, coef);
            }
            w.project(radius);
            if t % 1024 == 0 {
                w.resync_norm();
            }
            if last {
                for (a, v) in avg.iter_mut().zip(&w.v) {
                    *a += v * w.scale;
                }
            }
        }
    }
    let inv = 1.0 / n as f64;
    let bias = avg[bias_index] * inv;
    avg.truncate(x.width);
    avg.iter_mut().for_each(|a| *a *= inv);
    Ok(LinearModel {
        weights: avg,
        bias,
        loss: hp.loss,
        degenerate: false,
    })
}

/// Trains one binary classifier on a dense matrix.
pub fn train_linear(x: ArrayView2<'_, f64>, y: &[bool], hp: &LinearHyperparams) -> Result<LinearModel, EnsembleError> {
    train_linear_sparse(&SparseMatrix::from_dense(x), y, hp)
}
