use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelVector;
use crate::metrics::{pct, MetricsError, MetricsReport};
use crate::corpus::Taxonomy;

/// Per-topic document counts of one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub name: String,
    pub documents: usize,
    pub counts: Vec<(String, usize)>,
}

impl LabelCounts {
    pub fn proportion(&self, j: usize) -> f64 {
        self.counts[j].1 as f64 / self.documents as f64
    }
}

/// Topic distribution of the parent corpus and each stratified sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub parent: LabelCounts,
    pub samples: Vec<LabelCounts>,
}

impl DistributionReport {
    /// Largest absolute gap between a sample's topic proportion and the parent's.
    pub fn max_deviation(&self) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| (0..s.counts.len()).map(move |j| (s.proportion(j) - self.parent.proportion(j)).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Topic distribution\n\n| Topic | ");
        let all: Vec<&LabelCounts> = std::iter::once(&self.parent).chain(&self.samples).collect();
        out.push_str(
            &all.iter()
                .map(|c| format!("{} (n={})", c.name, c.documents))
                .collect::<Vec<_>>()
                .join(" | "),
        );
        out.push_str(" |\n|---|");
        out.push_str(&"---:|".repeat(all.len()));
        out.push('\n');
        for (j, (topic, _)) in self.parent.counts.iter().enumerate() {
            out.push_str(&format!("| {topic} |"));
            for c in &all {
                out.push_str(&format!(" {} ({}) |", c.counts[j].1, pct(c.proportion(j))));
            }
            out.push('\n');
        }
        out
    }
}

/// Metrics of every evaluated source, keyed by source name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sources: BTreeMap<String, MetricsReport>,
}

impl EvaluationReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Evaluation\n\n| Source | Documents | Example-based F1 | Micro F1 | Macro F1 | Weighted F1 |\n|---|---:|---:|---:|---:|---:|\n");
        for (name, r) in &self.sources {
            out.push_str(&format!(
                "| {name} | {} | {} | {} | {} | {} |\n",
                r.documents,
                pct(r.example_f1),
                pct(r.micro_f1),
                pct(r.macro_f1),
                pct(r.weighted_f1)
            ));
        }
        for (name, r) in &self.sources {
            out.push('\n');
            out.push_str(&r.to_markdown(name).replacen("# ", "## ", 1));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub approach: String,
    pub example_f1: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

/// Channels, hard voting and the stacked model scored on the same documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub documents: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// One row per `(approach, predictions)`, all scored against `gold`.
    pub fn build(
        taxonomy: &Taxonomy,
        approaches: &[(&str, Vec<LabelVector>)],
        gold: &[LabelVector],
    ) -> Result<Self, MetricsError> {
        let rows = approaches
            .iter()
            .map(|(name, pred)| {
                let m = MetricsReport::compute(taxonomy, pred, gold, None)?;
                Ok(AblationRow {
                    approach: name.to_string(),
                    example_f1: m.example_f1,
                    micro_f1: m.micro_f1,
                    macro_f1: m.macro_f1,
                    weighted_f1: m.weighted_f1,
                })
            })
            .collect::<Result<_, MetricsError>>()?;
        Ok(Self {
            documents: gold.len(),
            rows,
        })
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Ablation\n\nDocuments: {}\n\n| Approach | Example-based F1 | Micro F1 | Macro F1 | Weighted F1 |\n|---|---:|---:|---:|---:|\n",
            self.documents
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                r.approach,
                pct(r.example_f1),
                pct(r.micro_f1),
                pct(r.macro_f1),
                pct(r.weighted_f1)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_with_perfect_predictions_scores_one() {
        let taxonomy = Taxonomy::hallmarks();
        let gold: Vec<LabelVector> = (0..6).map(|i| LabelVector::from_indices(10, &[i % 10, (i + 3) % 10])).collect();
        let r = AblationReport::build(&taxonomy, &[("perfect", gold.clone())], &gold).unwrap();
        let row = &r.rows[0];
        for v in [row.example_f1, row.micro_f1, row.macro_f1, row.weighted_f1] {
            assert_eq!(v, 1.0);
        }
        assert!(r.to_markdown().contains("| perfect | 100.00% |"));
    }
}
