//! Multi-label problem transformations over the linear base learner.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::linear::{train_linear_sparse, LinearHyperparams, LinearModel, LossKind, SparseMatrix};
use super::EnsembleError;
use crate::corpus::LabelVector;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transformation {
    BinaryRelevance,
    /// Labels are predicted in `order`; each model also sees the flags of the
    /// labels before it in the chain.
    ClassifierChains { order: Vec<usize> },
    LabelPowerset,
}

/// The transformation family without chain-order detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformationKind {
    BinaryRelevance,
    ClassifierChains,
    LabelPowerset,
}

impl TransformationKind {
    pub const ALL: [TransformationKind; 3] = [
        TransformationKind::BinaryRelevance,
        TransformationKind::ClassifierChains,
        TransformationKind::LabelPowerset,
    ];

    /// Instantiates the transformation with the identity chain order.
    pub fn with_labels(self, n_labels: usize) -> Transformation {
        match self {
            TransformationKind::BinaryRelevance => Transformation::BinaryRelevance,
            TransformationKind::ClassifierChains => Transformation::ClassifierChains {
                order: (0..n_labels).collect(),
            },
            TransformationKind::LabelPowerset => Transformation::LabelPowerset,
        }
    }
}

impl std::fmt::Display for TransformationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransformationKind::BinaryRelevance => "Binary Relevance",
            TransformationKind::ClassifierChains => "Classifier Chains",
            TransformationKind::LabelPowerset => "Label Powerset",
        })
    }
}

impl Transformation {
    pub fn kind(&self) -> TransformationKind {
        match self {
            Transformation::BinaryRelevance => TransformationKind::BinaryRelevance,
            Transformation::ClassifierChains { .. } => TransformationKind::ClassifierChains,
            Transformation::LabelPowerset => TransformationKind::LabelPowerset,
        }
    }

    fn validate(&self, n_labels: usize) -> Result<(), EnsembleError> {
        if let Transformation::ClassifierChains { order } = self {
            let distinct: BTreeSet<usize> = order.iter().copied().collect();
            if order.len() != n_labels || distinct.len() != n_labels || distinct.iter().any(|&j| j >= n_labels) {
                return Err(EnsembleError::InvalidOrder(order.clone()));
            }
        }
        Ok(())
    }
}

/// A trained stacking meta-classifier, serializable as a versioned JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub format_version: u32,
    pub transformation: Transformation,
    pub n_features: usize,
    pub n_labels: usize,
    pub hyperparams: LinearHyperparams,
    pub models: Vec<LinearModel>,
    /// Label combinations indexed like `models` (label powerset only).
    #[serde(default)]
    pub combinations: Vec<LabelVector>,
    #[serde(default)]
    pub cv_scores: Vec<f64>,
}

/// Seed for the `i`-th base model of a meta-model.
pub(crate) fn model_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1)
}

fn column(y: &[LabelVector], j: usize) -> Vec<bool> {
    y.iter().map(|r| r.get(j)).collect()
}

pub fn train_meta(
    x: &SparseMatrix,
    y: &[LabelVector],
    transformation: &Transformation,
    hp: &LinearHyperparams,
) -> Result<MetaModel, EnsembleError> {
    hp.validate()?;
    if x.n_rows() == 0 {
        return Err(EnsembleError::Empty);
    }
    if x.n_rows() != y.len() {
        return Err(EnsembleError::RowMismatch {
            x: x.n_rows(),
            y: y.len(),
        });
    }
    let n_labels = y[0].len();
    if let Some(bad) = y.iter().find(|r| r.len() != n_labels) {
        return Err(EnsembleError::LabelWidth {
            expected: n_labels,
            got: bad.len(),
        });
    }
    transformation.validate(n_labels)?;
    let seeded = |i: usize| LinearHyperparams {
        seed: model_seed(hp.seed, i),
        ..*hp
    };

    let mut combinations = Vec::new();
    let models = match transformation {
        Transformation::BinaryRelevance => (0..n_labels)
            .map(|j| train_linear_sparse(x, &column(y, j), &seeded(j)))
            .collect::<Result<Vec<_>, _>>()?,
        Transformation::ClassifierChains { order } => {
            let mut models = Vec::with_capacity(n_labels);
            for (pos, &label) in order.iter().enumerate() {
                let preceding: Vec<Vec<bool>> = y
                    .iter()
                    .map(|r| order[..pos].iter().map(|&j| r.get(j)).collect())
                    .collect();
                let augmented = x.with_flags(&preceding);
                models.push(train_linear_sparse(&augmented, &column(y, label), &seeded(pos))?);
            }
            models
        }
        Transformation::LabelPowerset => {
            let distinct: BTreeSet<Vec<u8>> = y.iter().map(LabelVector::to_ints).collect();
            combinations = distinct
                .into_iter()
                .map(|c| LabelVector::from_ints(&c).expect("binary"))
                .collect();
            combinations
                .iter()
                .enumerate()
                .map(|(c, combo)| {
                    let target: Vec<bool> = y.iter().map(|r| r == combo).collect();
                    train_linear_sparse(x, &target, &seeded(c))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(MetaModel {
        format_version: MODEL_FORMAT_VERSION,
        transformation: transformation.clone(),
        n_features: x.width,
        n_labels,
        hyperparams: *hp,
        models,
        combinations,
        cv_scores: Vec::new(),
    })
}

pub fn predict_meta(model: &MetaModel, x: &SparseMatrix) -> Result<Vec<LabelVector>, EnsembleError> {
    if x.width != model.n_features {
        return Err(EnsembleError::FeatureWidth {
            expected: model.n_features,
            got: x.width,
        });
    }
    Ok(x.rows.iter().map(|row| predict_row(model, row)).collect())
}

fn predict_row(model: &MetaModel, row: &[(usize, f64)]) -> LabelVector {
    match &model.transformation {
        Transformation::BinaryRelevance => {
            LabelVector::from_bools(model.models.iter().map(|m| m.predict(row)).collect())
        }
        Transformation::ClassifierChains { order } => {
            let mut out = LabelVector::zeros(model.n_labels);
            let mut augmented = row.to_vec();
            for (pos, (&label, m)) in order.iter().zip(&model.models).enumerate() {
                let flag = m.predict(&augmented);
                out.set(label, flag);
                if flag {
                    augmented.push((model.n_features + pos, 1.0));
                }
            }
            out
        }
        Transformation::LabelPowerset => {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (c, m) in model.models.iter().enumerate() {
                let s = m.decision(row);
                if s > best_score {
                    best = c;
                    best_score = s;
                }
            }
            model.combinations[best].clone()
        }
    }
}

impl MetaModel {
    pub fn loss(&self) -> LossKind {
        self.hyperparams.loss
    }

    pub fn save(&self, path: &Path) -> Result<(), EnsembleError> {
        let body = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, body + "\n").map_err(|e| EnsembleError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, EnsembleError> {
        let body = std::fs::read_to_string(path).map_err(|e| EnsembleError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let model: MetaModel = serde_json::from_str(&body).map_err(|e| EnsembleError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(EnsembleError::Version(model.format_version));
        }
        Ok(model)
    }
}

/// Out-of-fold predictions: each row is predicted by the model that did not see it.
pub fn cross_val_predict(
    x: &SparseMatrix,
    y: &[LabelVector],
    folds: &[crate::corpus::Fold],
    transformation: &Transformation,
    hp: &LinearHyperparams,
) -> Result<Vec<LabelVector>, EnsembleError> {
    let n_labels = y.first().map_or(0, LabelVector::len);
    let mut out = vec![LabelVector::zeros(n_labels); y.len()];
    for (f, fold) in folds.iter().enumerate() {
        let train_y: Vec<LabelVector> = fold.train.iter().map(|&i| y[i].clone()).collect();
        let fold_hp = LinearHyperparams {
            seed: model_seed(hp.seed, 1000 + f),
            ..*hp
        };
        let model = train_meta(&x.select(&fold.train), &train_y, transformation, &fold_hp)?;
        let preds = predict_meta(&model, &x.select(&fold.validation))?;
        for (&i, p) in fold.validation.iter().zip(preds) {
            out[i] = p;
        }
    }
    Ok(out)
}
