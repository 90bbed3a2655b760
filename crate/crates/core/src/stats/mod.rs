//! Replication statistics: descriptives with t-based confidence intervals,
//! unpaired two-sample t-tests and one-way ANOVA with eta-squared.

pub mod distributions;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use distributions::{f_sf, student_t_quantile, student_t_two_sided};

/// Significance level used for the `significant` flag.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("replication set {0:?} is empty")]
    Empty(String),
    #[error("replication set {name:?} has {got} scores; at least {need} are required")]
    TooFewScores { name: String, got: usize, need: usize },
    #[error("both samples have zero variance; the t statistic is undefined")]
    ZeroVariance,
    #[error("ANOVA needs at least two groups")]
    TooFewGroups,
    #[error("all values are identical; the F statistic is undefined")]
    AllIdentical,
}

/// Scores of one approach across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSet {
    pub approach: String,
    pub scores: Vec<f64>,
}

impl ReplicationSet {
    pub fn new(approach: impl Into<String>, scores: Vec<f64>) -> Self {
        Self {
            approach: approach.into(),
            scores,
        }
    }

    fn is_constant(&self) -> bool {
        self.scores.windows(2).all(|w| w[0] == w[1])
    }

    fn mean(&self) -> f64 {
        if self.is_constant() {
            return self.scores[0];
        }
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    /// Sample variance (n - 1); exactly zero for constant sets.
    fn variance(&self) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let m = self.mean();
        self.scores.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (self.scores.len() - 1) as f64
    }

    fn sum_squares(&self) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let m = self.mean();
        self.scores.iter().map(|x| (x - m) * (x - m)).sum()
    }

    fn require(&self, need: usize) -> Result<(), StatsError> {
        if self.scores.is_empty() {
            return Err(StatsError::Empty(self.approach.clone()));
        }
        if self.scores.len() < need {
            return Err(StatsError::TooFewScores {
                name: self.approach.clone(),
                got: self.scores.len(),
                need,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single score.
    pub std: Option<f64>,
    pub min: f64,
    pub max: f64,
    /// 95% t-interval; absent when n < 2 or the standard deviation is zero.
    pub ci95: Option<ConfidenceInterval>,
}

pub fn descriptives(set: &ReplicationSet) -> Result<Descriptives, StatsError> {
    set.require(1)?;
    let n = set.scores.len();
    let mean = set.mean();
    let std = (n >= 2).then(|| set.variance().sqrt());
    let ci95 = match std {
        Some(s) if s > 0.0 => {
            let half = student_t_quantile(0.975, (n - 1) as f64) * s / (n as f64).sqrt();
            Some(ConfidenceInterval {
                lower: mean - half,
                upper: mean + half,
            })
        }
        _ => None,
    };
    Ok(Descriptives {
        n,
        mean,
        std,
        min: set.scores.iter().copied().fold(f64::INFINITY, f64::min),
        max: set.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ci95,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Student's test with pooled variance.
    Pooled,
    /// Welch's unequal-variance test.
    #[default]
    Welch,
}

impl fmt::Display for TTestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TTestKind::Pooled => "pooled",
            TTestKind::Welch => "welch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Unpaired two-sample t-test of `a` against `b` (statistic sign follows mean(a) - mean(b)).
pub fn t_test(a: &ReplicationSet, b: &ReplicationSet, kind: TTestKind) -> Result<TestResult, StatsError> {
    a.require(2)?;
    b.require(2)?;
    let (n1, n2) = (a.scores.len() as f64, b.scores.len() as f64);
    let (v1, v2) = (a.variance(), b.variance());
    if v1 == 0.0 && v2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let diff = a.mean() - b.mean();
    let (se, df) = match kind {
        TTestKind::Pooled => {
            let df = n1 + n2 - 2.0;
            let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / df;
            ((pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), df)
        }
        TTestKind::Welch => {
            let (q1, q2) = (v1 / n1, v2 / n2);
            let df = (q1 + q2).powi(2) / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
            ((q1 + q2).sqrt(), df)
        }
    };
    let statistic = diff / se;
    let p_value = student_t_two_sided(statistic, df);
    Ok(TestResult {
        statistic,
        df,
        p_value,
        significant: p_value < ALPHA,
    })
}

/// An F statistic that may be infinite (zero within-group variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FStatistic {
    Finite(f64),
    PosInfinity,
}

impl FStatistic {
    pub fn value(&self) -> f64 {
        match self {
            FStatistic::Finite(v) => *v,
            FStatistic::PosInfinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for FStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FStatistic::Finite(v) => write!(f, "{v:.2}"),
            FStatistic::PosInfinity => f.write_str("+inf"),
        }
    }
}

impl Serialize for FStatistic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            FStatistic::Finite(v) => serializer.serialize_f64(*v),
            FStatistic::PosInfinity => serializer.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for FStatistic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(FStatistic::Finite(v)),
            Raw::Text(s) if s == "+inf" => Ok(FStatistic::PosInfinity),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("bad F statistic {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: FStatistic,
    pub p_value: f64,
    pub eta_squared: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub significant: bool,
}

pub fn anova(groups: &[ReplicationSet]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    for g in groups {
        g.require(2)?;
    }
    let total_n: usize = groups.iter().map(|g| g.scores.len()).sum();
    let grand = groups.iter().flat_map(|g| &g.scores).sum::<f64>() / total_n as f64;
    let all_same_mean = groups.windows(2).all(|w| w[0].mean() == w[1].mean());
    let ss_between = if all_same_mean {
        0.0
    } else {
        groups
            .iter()
            .map(|g| g.scores.len() as f64 * (g.mean() - grand).powi(2))
            .sum()
    };
    let ss_within: f64 = groups.iter().map(ReplicationSet::sum_squares).sum();
    let df_between = (groups.len() - 1) as f64;
    let df_within = (total_n - groups.len()) as f64;

    let (f, p_value, eta_squared) = if ss_within == 0.0 {
        if ss_between == 0.0 {
            return Err(StatsError::AllIdentical);
        }
        (FStatistic::PosInfinity, 0.0, 1.0)
    } else {
        let f = (ss_between / df_between) / (ss_within / df_within);
        (
            FStatistic::Finite(f),
            f_sf(f, df_between, df_within),
            ss_between / (ss_between + ss_within),
        )
    };
    Ok(AnovaResult {
        f,
        p_value,
        eta_squared,
        df_between,
        df_within,
        ss_between,
        ss_within,
        significant: p_value < ALPHA,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub approach: String,
    #[serde(flatten)]
    pub stats: Descriptives,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub approach: String,
    pub mean_difference: f64,
    pub outcome: Result<TestResult, String>,
}

/// Descriptives table, pairwise tests against a reference approach, and ANOVA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub reference: String,
    pub test_kind: TTestKind,
    pub descriptives: Vec<DescriptiveRow>,
    pub pairwise: Vec<PairwiseRow>,
    pub anova: Result<AnovaResult, String>,
}

impl StatsReport {
    /// Builds the full report. Errors only when descriptives themselves fail;
    /// inferential failures are recorded in the report.
    pub fn build(sets: &[ReplicationSet], reference: &str, kind: TTestKind) -> Result<Self, StatsError> {
        let descriptives = sets
            .iter()
            .map(|s| {
                Ok(DescriptiveRow {
                    approach: s.approach.clone(),
                    stats: descriptives(s)?,
                })
            })
            .collect::<Result<Vec<_>, StatsError>>()?;
        let reference_set = sets.iter().find(|s| s.approach == reference);
        let pairwise = sets
            .iter()
            .filter(|s| s.approach != reference)
            .map(|s| match reference_set {
                None => PairwiseRow {
                    approach: s.approach.clone(),
                    mean_difference: f64::NAN,
                    outcome: Err(format!("reference approach {reference:?} not present")),
                },
                Some(r) => PairwiseRow {
                    approach: s.approach.clone(),
                    mean_difference: s.mean() - r.mean(),
                    outcome: t_test(s, r, kind).map_err(|e| e.to_string()),
                },
            })
            .collect();
        Ok(Self {
            reference: reference.to_owned(),
            test_kind: kind,
            descriptives,
            pairwise,
            anova: anova(sets).map_err(|e| e.to_string()),
        })
    }

    /// True when any pairwise test or the ANOVA could not be computed.
    pub fn has_inferential_errors(&self) -> bool {
        self.anova.is_err() || self.pairwise.iter().any(|p| p.outcome.is_err())
    }

    pub fn to_markdown(&self) -> String {
        use crate::metrics::pct;
        let mut out = String::from("# Replication statistics\n\n");
        out.push_str(&format!(
            "Two-sample t-tests are unpaired ({} variant), each approach against `{}`; alpha = {ALPHA}.\n\n",
            self.test_kind, self.reference
        ));
        out.push_str("## Descriptives\n\n| Approach | Mean | Std Dev | Min | Max | 95% CI Lower | 95% CI Upper |\n|---|---|---|---|---|---|---|\n");
        for row in &self.descriptives {
            let d = &row.stats;
            let (lo, hi) = d
                .ci95
                .map_or(("-".to_owned(), "-".to_owned()), |ci| (pct(ci.lower), pct(ci.upper)));
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                row.approach,
                pct(d.mean),
                d.std.map_or_else(|| "-".to_owned(), pct),
                pct(d.min),
                pct(d.max),
                lo,
                hi
            ));
        }
        out.push_str("\n## Pairwise t-tests\n\n| Approach | Mean Difference | t-statistic | p-value | Significance |\n|---|---|---|---|---|\n");
        for row in &self.pairwise {
            match &row.outcome {
                Ok(t) => out.push_str(&format!(
                    "| {} | {:.4} | {:.2} | {:.4} | {} |\n",
                    row.approach, row.mean_difference, t.statistic, t.p_value, t.significant
                )),
                Err(e) => out.push_str(&format!(
                    "| {} | {:.4} | - | - | undefined: {} |\n",
                    row.approach, row.mean_difference, e
                )),
            }
        }
        out.push_str("\n## One-way ANOVA\n\n| Metric | Value |\n|---|---|\n");
        match &self.anova {
            Ok(a) => out.push_str(&format!(
                "| F-statistic | {} |\n| p-value | {:.4} |\n| eta² | {:.2} |\n",
                a.f, a.p_value, a.eta_squared
            )),
            Err(e) => out.push_str(&format!("| error | {e} |\n")),
        }
        out
    }
}
