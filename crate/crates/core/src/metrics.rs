//! Multi-label evaluation measures.
//!
//! Example-based F1 averages a set-F1 per document. Label-based scores treat
//! each topic as a binary problem: micro pools the confusion counts, macro is
//! the plain mean of per-label F1, weighted uses support-normalized weights.
//! AUC is the Mann-Whitney statistic with ties counted as one half.

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelVector, Taxonomy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction has {pred} rows but gold has {gold}")]
    RowMismatch { pred: usize, gold: usize },
    #[error("row {row}: prediction width {pred} differs from gold width {gold}")]
    WidthMismatch { row: usize, pred: usize, gold: usize },
    #[error("nothing to evaluate")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

fn check_shapes(pred: &[LabelVector], gold: &[LabelVector]) -> Result<(), MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::RowMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (row, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() || g.len() != gold[0].len() {
            return Err(MetricsError::WidthMismatch {
                row,
                pred: p.len(),
                gold: g.len(),
            });
        }
    }
    Ok(())
}

/// Per-label confusion counts.
pub fn confusion(pred: &[LabelVector], gold: &[LabelVector]) -> Result<Vec<ConfusionCounts>, MetricsError> {
    check_shapes(pred, gold)?;
    let width = gold[0].len();
    let mut counts = vec![ConfusionCounts::default(); width];
    for (p, g) in pred.iter().zip(gold) {
        for (j, c) in counts.iter_mut().enumerate() {
            match (p.get(j), g.get(j)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(counts)
}

/// F1 of a confusion cell; 1 when there is nothing to find and nothing was predicted.
pub fn f1_from_counts(c: &ConfusionCounts) -> f64 {
    if c.tp == 0 {
        return if c.fp == 0 && c.fn_ == 0 { 1.0 } else { 0.0 };
    }
    // Equal to 2PR/(P+R) with P = TP/(TP+FP), R = TP/(TP+FN).
    (2 * c.tp) as f64 / (2 * c.tp + c.fp + c.fn_) as f64
}

/// Mean over documents of the F1 between predicted and gold label sets.
pub fn example_based_f1(pred: &[LabelVector], gold: &[LabelVector]) -> Result<f64, MetricsError> {
    check_shapes(pred, gold)?;
    let total: f64 = pred
        .iter()
        .zip(gold)
        .map(|(p, g)| {
            let inter = p.ones().filter(|&j| g.get(j)).count();
            let sizes = p.count_ones() + g.count_ones();
            if sizes == 0 {
                1.0
            } else {
                (2 * inter) as f64 / sizes as f64
            }
        })
        .sum();
    Ok(total / pred.len() as f64)
}

pub fn micro_f1(counts: &[ConfusionCounts]) -> f64 {
    f1_from_counts(&counts.iter().copied().sum())
}

pub fn macro_f1(f1s: &[f64]) -> f64 {
    if f1s.is_empty() {
        return 0.0;
    }
    f1s.iter().sum::<f64>() / f1s.len() as f64
}

/// Support-weighted F1 with weights normalized to sum to one.
///
/// With zero total support every weight is equal, which is the macro mean.
pub fn weighted_f1(f1s: &[f64], supports: &[usize]) -> f64 {
    debug_assert_eq!(f1s.len(), supports.len());
    let total: usize = supports.iter().sum();
    if total == 0 {
        return macro_f1(f1s);
    }
    f1s.iter()
        .zip(supports)
        .map(|(f, &n)| f * n as f64 / total as f64)
        .sum()
}

/// Weighted F1 with per-label weight `support / documents`, unnormalized.
///
/// For multi-label data the weights can sum past one, so this value may exceed 1.
pub fn literal_weighted_f1(f1s: &[f64], supports: &[usize], documents: usize) -> f64 {
    if documents == 0 {
        return 0.0;
    }
    f1s.iter()
        .zip(supports)
        .map(|(f, &n)| f * n as f64 / documents as f64)
        .sum()
}

/// Probability that a random positive outscores a random negative (ties count 1/2).
///
/// `None` when `gold` lacks either class.
pub fn auc(scores: &[f64], gold: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), gold.len(), "scores and gold must align");
    let n_pos = gold.iter().filter(|&&g| g).count();
    let n_neg = gold.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average ranks within tie groups (1-based), summed over positives.
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| gold[i]).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        start = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub name: String,
    pub f1: f64,
    pub auc: Option<f64>,
    pub support: usize,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub documents: usize,
    pub example_f1: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    /// Weighted F1 with weights `support / documents` left unnormalized (debug only).
    pub weighted_f1_unnormalized: f64,
    pub per_label: Vec<LabelMetrics>,
}

impl MetricsReport {
    /// Scores `pred` against `gold`. Per-label AUC uses `scores` when given,
    /// otherwise the binary predictions themselves.
    pub fn compute(
        taxonomy: &Taxonomy,
        pred: &[LabelVector],
        gold: &[LabelVector],
        scores: Option<&[Vec<f64>]>,
    ) -> Result<Self, MetricsError> {
        let counts = confusion(pred, gold)?;
        if counts.len() != taxonomy.len() {
            return Err(MetricsError::WidthMismatch {
                row: 0,
                pred: counts.len(),
                gold: taxonomy.len(),
            });
        }
        if let Some(s) = scores {
            if s.len() != pred.len() {
                return Err(MetricsError::RowMismatch {
                    pred: s.len(),
                    gold: gold.len(),
                });
            }
        }
        let f1s: Vec<f64> = counts.iter().map(f1_from_counts).collect();
        let supports: Vec<usize> = counts.iter().map(|c| c.tp + c.fn_).collect();
        let per_label = taxonomy
            .names()
            .enumerate()
            .map(|(j, name)| {
                let column: Vec<f64> = match scores {
                    Some(s) => s.iter().map(|row| row[j]).collect(),
                    None => pred.iter().map(|p| f64::from(u8::from(p.get(j)))).collect(),
                };
                let truth: Vec<bool> = gold.iter().map(|g| g.get(j)).collect();
                LabelMetrics {
                    name: name.to_owned(),
                    f1: f1s[j],
                    auc: auc(&column, &truth),
                    support: supports[j],
                    counts: counts[j],
                }
            })
            .collect();
        Ok(Self {
            documents: pred.len(),
            example_f1: example_based_f1(pred, gold)?,
            micro_f1: micro_f1(&counts),
            macro_f1: macro_f1(&f1s),
            weighted_f1: weighted_f1(&f1s, &supports),
            weighted_f1_unnormalized: literal_weighted_f1(&f1s, &supports, pred.len()),
            per_label,
        })
    }

    /// Per-topic F1/AUC table followed by the example- and label-based summary.
    pub fn to_markdown(&self, title: &str) -> String {
        let mut out = format!("# {title}\n\nDocuments evaluated: {}\n\n", self.documents);
        out.push_str("| Topic | F1 | AUC | Support |\n|---|---|---|---|\n");
        for l in &self.per_label {
            let auc = l.auc.map_or_else(|| "-".to_owned(), pct);
            out.push_str(&format!("| {} | {} | {} | {} |\n", l.name, pct(l.f1), auc, l.support));
        }
        out.push_str("\n| Example-based F1 | Micro F1 | Macro F1 | Weighted F1 |\n|---|---|---|---|\n");
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            pct(self.example_f1),
            pct(self.micro_f1),
            pct(self.macro_f1),
            pct(self.weighted_f1)
        ));
        out
    }
}

pub(crate) fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(bits: &[u8]) -> LabelVector {
        LabelVector::from_ints(bits).unwrap()
    }

    fn column(pred: &[u8], gold: &[u8]) -> (Vec<LabelVector>, Vec<LabelVector>) {
        (
            pred.iter().map(|&b| lv(&[b])).collect(),
            gold.iter().map(|&b| lv(&[b])).collect(),
        )
    }

    #[test]
    fn confusion_hand_case() {
        let (p, g) = column(&[1, 1, 0], &[1, 0, 1]);
        let c = confusion(&p, &g).unwrap()[0];
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 0 });
    }

    #[test]
    fn confusion_identity_and_complement() {
        let gold = vec![lv(&[1, 0, 1]), lv(&[0, 0, 1]), lv(&[1, 1, 0])];
        for c in confusion(&gold, &gold).unwrap() {
            assert_eq!((c.fp, c.fn_), (0, 0));
        }
        let comp: Vec<_> = gold
            .iter()
            .map(|g| LabelVector::from_bools(g.flags().iter().map(|b| !b).collect()))
            .collect();
        for c in confusion(&comp, &gold).unwrap() {
            assert_eq!((c.tp, c.tn), (0, 0));
        }
    }

    #[test]
    fn shape_mismatch() {
        assert!(confusion(&[lv(&[1])], &[lv(&[1]), lv(&[0])]).is_err());
        assert!(confusion(&[lv(&[1, 0])], &[lv(&[1])]).is_err());
    }

    #[test]
    fn f1_conventions() {
        let c = |tp, fp, fn_| ConfusionCounts { tp, fp, fn_, tn: 0 };
        assert_eq!(f1_from_counts(&c(2, 1, 1)), 2.0 / 3.0);
        assert_eq!(f1_from_counts(&c(0, 0, 0)), 1.0);
        assert_eq!(f1_from_counts(&c(0, 5, 0)), 0.0);
    }

    #[test]
    fn example_based_cases() {
        // gold {A,B}, pred {B,C}
        assert_eq!(example_based_f1(&[lv(&[0, 1, 1])], &[lv(&[1, 1, 0])]).unwrap(), 0.5);
        let g = vec![lv(&[1, 0]), lv(&[0, 0])];
        assert_eq!(example_based_f1(&g, &g).unwrap(), 1.0);
        let p = vec![lv(&[1, 0, 0]), lv(&[0, 1, 1])];
        let g = vec![lv(&[1, 0, 0]), lv(&[1, 1, 0])];
        assert_eq!(example_based_f1(&p, &g).unwrap(), 0.75);
    }

    #[test]
    fn micro_pooled_case() {
        let counts = [
            ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 0 },
            ConfusionCounts { tp: 1, fp: 0, fn_: 1, tn: 0 },
        ];
        assert_eq!(micro_f1(&counts), 2.0 / 3.0);
        let pooled: ConfusionCounts = counts.iter().copied().sum();
        assert_eq!(pooled.precision(), pooled.recall());
    }

    #[test]
    fn macro_and_weighted() {
        assert_eq!(macro_f1(&[0.5, 1.0]), 0.75);
        assert_eq!(macro_f1(&[0.3, 0.3, 0.3]), 0.3);
        assert_eq!(weighted_f1(&[1.0, 0.5], &[3, 1]), 0.875);
        assert_eq!(weighted_f1(&[0.2, 0.6], &[4, 4]), macro_f1(&[0.2, 0.6]));
        assert_eq!(weighted_f1(&[0.2, 0.6, 0.9], &[0, 7, 0]), 0.6);
    }

    #[test]
    fn unnormalized_weights_can_exceed_one() {
        // Two documents, each carrying both labels: weights 1 + 1.
        assert_eq!(literal_weighted_f1(&[1.0, 1.0], &[2, 2], 2), 2.0);
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.9, 0.8, 0.3], &[true, true, false]), Some(1.0));
        assert_eq!(auc(&[0.9, 0.2, 0.8, 0.3], &[true, false, false, true]), Some(0.75));
        assert_eq!(auc(&[0.4; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), None);
    }

    #[test]
    fn auc_binary_is_mean_of_tpr_tnr() {
        let pred = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let gold = [true, false, true, false, true, false];
        // TPR = 2/3, TNR = 2/3
        assert!((auc(&pred, &gold).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_report() {
        let tax = Taxonomy::hallmarks();
        let gold: Vec<_> = (0..6)
            .map(|i| LabelVector::from_indices(10, &[i % 10, (i * 3) % 10]))
            .collect();
        let r = MetricsReport::compute(&tax, &gold, &gold, None).unwrap();
        assert_eq!(
            (r.example_f1, r.micro_f1, r.macro_f1, r.weighted_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(r.to_markdown("t").contains("| 100.00% | 100.00% | 100.00% | 100.00% |"));
    }
}
