use serde::{Deserialize, Serialize};

use super::linear::{LinearHyperparams, LossKind, SparseMatrix};
use super::meta::{model_seed, predict_meta, train_meta, TransformationKind};
use super::EnsembleError;
use crate::corpus::{Fold, LabelVector};
use crate::metrics::example_based_f1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub loss: LossKind,
    pub transformation: TransformationKind,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Grid cells ranked best first, plus warnings about degenerate folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    pub warnings: Vec<String>,
}

impl GridReport {
    pub fn best(&self) -> &GridCell {
        &self.cells[0]
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Rank | Classifier | Transformation | Mean example-based F1 | Std |\n");
        out.push_str("|---:|---|---|---:|---:|\n");
        for (i, c) in self.cells.iter().enumerate() {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                i + 1,
                c.loss,
                c.transformation,
                crate::metrics::pct(c.mean),
                crate::metrics::pct(c.std)
            ));
        }
        for w in &self.warnings {
            out.push_str(&format!("\n> warning: {w}\n"));
        }
        out
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Labels with no positive (or no negative) example in a fold's training rows.
fn degenerate_labels(y: &[LabelVector], fold: &Fold) -> Vec<usize> {
    let n_labels = y.first().map_or(0, LabelVector::len);
    (0..n_labels)
        .filter(|&j| {
            let pos = fold.train.iter().filter(|&&i| y[i].get(j)).count();
            pos == 0 || pos == fold.train.len()
        })
        .collect()
}

/// Scores every (loss, transformation) cell by mean example-based F1 over `folds`.
///
/// Ranking: higher mean first, then lower standard deviation, then the order
/// in which the cells were listed.
pub fn grid_select(
    x: &SparseMatrix,
    y: &[LabelVector],
    losses: &[LossKind],
    transformations: &[TransformationKind],
    folds: &[Fold],
    hp: &LinearHyperparams,
) -> Result<GridReport, EnsembleError> {
    if folds.is_empty() || losses.is_empty() || transformations.is_empty() {
        return Err(EnsembleError::Empty);
    }
    let n_labels = y.first().map_or(0, LabelVector::len);
    let mut warnings = Vec::new();
    for (f, fold) in folds.iter().enumerate() {
        let bad = degenerate_labels(y, fold);
        if !bad.is_empty() {
            warnings.push(format!(
                "fold {}: labels {:?} have a single class in the training rows",
                f + 1,
                bad.iter().map(|j| j + 1).collect::<Vec<_>>()
            ));
        }
    }

    let mut cells = Vec::new();
    for &loss in losses {
        for &kind in transformations {
            let transformation = kind.with_labels(n_labels);
            let mut fold_scores = Vec::with_capacity(folds.len());
            for (f, fold) in folds.iter().enumerate() {
                let fold_hp = LinearHyperparams {
                    loss,
                    seed: model_seed(hp.seed, 1000 + f),
                    ..*hp
                };
                let train_y: Vec<LabelVector> = fold.train.iter().map(|&i| y[i].clone()).collect();
                let val_y: Vec<LabelVector> = fold.validation.iter().map(|&i| y[i].clone()).collect();
                let model = train_meta(&x.select(&fold.train), &train_y, &transformation, &fold_hp)?;
                let pred = predict_meta(&model, &x.select(&fold.validation))?;
                fold_scores.push(example_based_f1(&pred, &val_y).map_err(|e| EnsembleError::Hyperparams(e.to_string()))?);
            }
            let (mean, std) = mean_std(&fold_scores);
            cells.push(GridCell {
                loss,
                transformation: kind,
                fold_scores,
                mean,
                std,
            });
        }
    }
    // Stable sort keeps listing order for exact ties.
    cells.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.std.total_cmp(&b.std)));
    Ok(GridReport { cells, warnings })
}
