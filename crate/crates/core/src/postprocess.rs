//! Turning chat responses into label vectors and joining channels into features.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelVector, Taxonomy};
use crate::providers::ProbabilityVector;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("response is empty")]
    Empty,
    #[error("response is not a JSON array of assignments: {0}")]
    Malformed(String),
    #[error("expected {expected} assignments, got {got}")]
    CountMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{origin} covers a different document set: {missing} missing, {extra} unexpected")]
    IdMismatch {
        origin: String,
        missing: usize,
        extra: usize,
    },
    #[error("threshold must lie strictly between 0 and 1, got {0}")]
    Threshold(f64),
    #[error("expected {expected} labels per row, got {got}")]
    Width { expected: usize, got: usize },
    #[error("unknown source name {0:?}")]
    UnknownSource(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PostprocessError + '_ {
    move |source| PostprocessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> PostprocessError {
    PostprocessError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// One `{Text, Topics}` entry of a chat response, paired to a document id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAssignment {
    pub id: String,
    pub text: String,
    pub topics: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TopicField {
    One(String),
    Many(Vec<String>),
    Null(()),
}

#[derive(Deserialize)]
struct RawAssignment {
    #[serde(rename = "Text", default)]
    text: Option<String>,
    #[serde(rename = "Topics")]
    topics: TopicField,
}

fn strip_fences(raw: &str) -> &str {
    let trimmed = raw.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    // Drop the info string (e.g. `json`) on the opening fence line.
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

/// Parses a JSON array of `{Text, Topics}` objects, optionally inside code
/// fences, and pairs entries with `expected_ids` by position.
pub fn parse_llm_response(raw: &str, expected_ids: &[String]) -> Result<Vec<ParsedAssignment>, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let entries: Vec<RawAssignment> =
        serde_json::from_str(strip_fences(raw)).map_err(|e| ParseError::Malformed(e.to_string()))?;
    if entries.len() != expected_ids.len() {
        return Err(ParseError::CountMismatch {
            expected: expected_ids.len(),
            got: entries.len(),
        });
    }
    Ok(entries
        .into_iter()
        .zip(expected_ids)
        .map(|(e, id)| ParsedAssignment {
            id: id.clone(),
            text: e.text.unwrap_or_default(),
            topics: match e.topics {
                TopicField::One(s) if s.trim().is_empty() => Vec::new(),
                TopicField::One(s) => vec![s],
                TopicField::Many(v) => v,
                TopicField::Null(()) => Vec::new(),
            },
        })
        .collect())
}

/// Maps topic strings onto the taxonomy by trimmed, case-insensitive equality.
///
/// Strings that match no topic are returned unchanged; nothing is guessed.
pub fn normalize_topics<S: AsRef<str>>(topics: &[S], taxonomy: &Taxonomy) -> (LabelVector, Vec<String>) {
    let lookup: HashMap<String, usize> = taxonomy
        .names()
        .enumerate()
        .map(|(j, n)| (n.trim().to_lowercase(), j))
        .collect();
    let mut flags = LabelVector::zeros(taxonomy.len());
    let mut unmatched = Vec::new();
    for t in topics {
        match lookup.get(&t.as_ref().trim().to_lowercase()) {
            Some(&j) => flags.set(j, true),
            None => unmatched.push(t.as_ref().to_string()),
        }
    }
    (flags, unmatched)
}

/// Where a set of predictions came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Source {
    Channel1,
    Channel2,
    Channel3,
    FewShot1,
    FewShot3,
    FewShot5,
    Bart,
    HardVote,
    TfidfLinSvm,
    Stacked,
}

impl Source {
    pub const ALL: [Source; 10] = [
        Source::Channel1,
        Source::Channel2,
        Source::Channel3,
        Source::FewShot1,
        Source::FewShot3,
        Source::FewShot5,
        Source::Bart,
        Source::HardVote,
        Source::TfidfLinSvm,
        Source::Stacked,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Source::Channel1 => "channel1",
            Source::Channel2 => "channel2",
            Source::Channel3 => "channel3",
            Source::FewShot1 => "fewshot1",
            Source::FewShot3 => "fewshot3",
            Source::FewShot5 => "fewshot5",
            Source::Bart => "bart",
            Source::HardVote => "hard-vote",
            Source::TfidfLinSvm => "tfidf-linsvm",
            Source::Stacked => "stacked",
        }
    }

    /// Row label used in ablation tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Source::Channel1 => "Classification 1",
            Source::Channel2 => "Classification 2",
            Source::Channel3 => "Classification 3",
            Source::FewShot1 => "1-shot",
            Source::FewShot3 => "3-shot",
            Source::FewShot5 => "5-shot",
            Source::Bart => "Zero-shot NLI (threshold 0.5)",
            Source::HardVote => "Hard Voting",
            Source::TfidfLinSvm => "TF-IDF + Lin-SVM (Classifier Chains)",
            Source::Stacked => "Stacked meta-classifier",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = PostprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| PostprocessError::UnknownSource(s.to_string()))
    }
}

impl TryFrom<String> for Source {
    type Error = PostprocessError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Source> for String {
    fn from(s: Source) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedTopic {
    pub id: String,
    pub topic: String,
}

/// Predictions of one source over a document set.
///
/// Every document is either in `labels` or in `unclassified`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelOutput {
    pub source: Source,
    pub labels: Vec<(String, LabelVector)>,
    pub unclassified: Vec<String>,
    pub unmatched: Vec<UnmatchedTopic>,
}

#[derive(Serialize, Deserialize)]
struct ChannelLine {
    id: String,
    flags: LabelVector,
}

#[derive(Serialize, Deserialize)]
struct ChannelSideReport {
    unclassified: Vec<String>,
    #[serde(default)]
    unmatched: Vec<UnmatchedTopic>,
}

impl ChannelOutput {
    pub fn new(source: Source, labels: Vec<(String, LabelVector)>, unclassified: Vec<String>) -> Self {
        Self {
            source,
            labels,
            unclassified,
            unmatched: Vec::new(),
        }
    }

    /// All document ids, classified first.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .map(|(id, _)| id.as_str())
            .chain(self.unclassified.iter().map(String::as_str))
    }

    pub fn id_set(&self) -> BTreeSet<&str> {
        self.ids().collect()
    }

    pub fn get(&self, id: &str) -> Option<&LabelVector> {
        self.labels.iter().find(|(i, _)| i == id).map(|(_, l)| l)
    }

    pub fn lookup(&self) -> HashMap<&str, &LabelVector> {
        self.labels.iter().map(|(i, l)| (i.as_str(), l)).collect()
    }

    pub fn len(&self) -> usize {
        self.labels.len() + self.unclassified.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Path of the side report written next to `path`.
    pub fn side_report_path(path: &Path) -> PathBuf {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("channel");
        path.with_file_name(format!("{stem}.unclassified.json"))
    }

    /// Writes `{id, flags}` lines to `path` and the unclassified/unmatched report beside it.
    pub fn write(&self, path: &Path) -> Result<(), PostprocessError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        for (id, flags) in &self.labels {
            let line = serde_json::to_string(&ChannelLine {
                id: id.clone(),
                flags: flags.clone(),
            })
            .expect("serializable");
            writeln!(w, "{line}").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
        let side = Self::side_report_path(path);
        let report = ChannelSideReport {
            unclassified: self.unclassified.clone(),
            unmatched: self.unmatched.clone(),
        };
        std::fs::write(&side, serde_json::to_string_pretty(&report).expect("serializable") + "\n")
            .map_err(io_err(&side))
    }

    pub fn read(path: &Path, source: Source, n_labels: usize) -> Result<Self, PostprocessError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut labels = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ChannelLine = serde_json::from_str(&line).map_err(|e| format_err(path, e))?;
            if parsed.flags.len() != n_labels {
                return Err(PostprocessError::Width {
                    expected: n_labels,
                    got: parsed.flags.len(),
                });
            }
            labels.push((parsed.id, parsed.flags));
        }
        let side = Self::side_report_path(path);
        let report: ChannelSideReport = match std::fs::read_to_string(&side) {
            Ok(s) => serde_json::from_str(&s).map_err(|e| format_err(&side, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => ChannelSideReport {
                unclassified: Vec::new(),
                unmatched: Vec::new(),
            },
            Err(e) => return Err(io_err(&side)(e)),
        };
        Ok(Self {
            source,
            labels,
            unclassified: report.unclassified,
            unmatched: report.unmatched,
        })
    }
}

/// Label-probability vectors for a document set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub rows: Vec<(String, ProbabilityVector)>,
    pub unavailable: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ProbabilityLine {
    id: String,
    probs: Option<Vec<f64>>,
}

impl ProbabilityTable {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows
            .iter()
            .map(|(id, _)| id.as_str())
            .chain(self.unavailable.iter().map(String::as_str))
    }

    /// One `{id, probs}` line per document; `probs` is null when unavailable.
    pub fn write(&self, path: &Path) -> Result<(), PostprocessError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        let lines = self
            .rows
            .iter()
            .map(|(id, p)| ProbabilityLine {
                id: id.clone(),
                probs: Some(p.values().to_vec()),
            })
            .chain(self.unavailable.iter().map(|id| ProbabilityLine {
                id: id.clone(),
                probs: None,
            }));
        for line in lines {
            writeln!(w, "{}", serde_json::to_string(&line).expect("serializable")).map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn read(path: &Path, n_labels: usize) -> Result<Self, PostprocessError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut table = ProbabilityTable {
            rows: Vec::new(),
            unavailable: Vec::new(),
        };
        for line in BufReader::new(file).lines() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ProbabilityLine = serde_json::from_str(&line).map_err(|e| format_err(path, e))?;
            match parsed.probs {
                Some(p) => {
                    let v = ProbabilityVector::new(p, n_labels).map_err(|e| format_err(path, e))?;
                    table.rows.push((parsed.id, v));
                }
                None => table.unavailable.push(parsed.id),
            }
        }
        Ok(table)
    }
}

/// Flags label j when its probability is at least `threshold`.
pub fn threshold_probabilities(probs: &ProbabilityTable, threshold: f64) -> Result<ChannelOutput, PostprocessError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(PostprocessError::Threshold(threshold));
    }
    let labels = probs
        .rows
        .iter()
        .map(|(id, p)| {
            let flags = p.values().iter().map(|&x| x >= threshold).collect();
            (id.clone(), LabelVector::from_bools(flags))
        })
        .collect();
    Ok(ChannelOutput::new(Source::Bart, labels, probs.unavailable.clone()))
}

/// A document left out of the feature matrix, with the sources that lacked it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub missing_from: Vec<String>,
}

/// Stacked features: three binary channel blocks followed by the probability block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub values: Array2<f64>,
    pub excluded: Vec<Exclusion>,
}

/// Column names `c1_t1..c1_tL, c2_*, c3_*, p_t1..p_tL`.
pub fn feature_columns(n_labels: usize) -> Vec<String> {
    ["c1", "c2", "c3", "p"]
        .iter()
        .flat_map(|block| (1..=n_labels).map(move |j| format!("{block}_t{j}")))
        .collect()
}

fn check_ids(reference: &BTreeSet<&str>, other: BTreeSet<&str>, source: &str) -> Result<(), PostprocessError> {
    if *reference != other {
        return Err(PostprocessError::IdMismatch {
            origin: source.to_string(),
            missing: reference.difference(&other).count(),
            extra: other.difference(reference).count(),
        });
    }
    Ok(())
}

/// Joins three channel outputs and the probability table into one matrix.
///
/// Rows follow the classified order of `ch1`; a document unclassified in any
/// source is excluded and reported.
pub fn assemble_features(
    ch1: &ChannelOutput,
    ch2: &ChannelOutput,
    ch3: &ChannelOutput,
    probs: &ProbabilityTable,
) -> Result<FeatureMatrix, PostprocessError> {
    let universe = ch1.id_set();
    check_ids(&universe, ch2.id_set(), ch2.source.name())?;
    check_ids(&universe, ch3.id_set(), ch3.source.name())?;
    check_ids(&universe, probs.ids().collect(), "probabilities")?;

    let n_labels = ch1
        .labels
        .first()
        .map(|(_, l)| l.len())
        .or_else(|| probs.rows.first().map(|(_, p)| p.len()))
        .unwrap_or(0);
    let maps = [ch1.lookup(), ch2.lookup(), ch3.lookup()];
    let prob_map: HashMap<&str, &ProbabilityVector> = probs.rows.iter().map(|(i, p)| (i.as_str(), p)).collect();
    let names = [ch1.source.name(), ch2.source.name(), ch3.source.name()];

    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut excluded = Vec::new();
    for id in ch1.ids() {
        let mut missing: Vec<String> = maps
            .iter()
            .zip(names)
            .filter(|(m, _)| !m.contains_key(id))
            .map(|(_, n)| n.to_string())
            .collect();
        if !prob_map.contains_key(id) {
            missing.push("probabilities".into());
        }
        if !missing.is_empty() {
            excluded.push(Exclusion {
                id: id.to_string(),
                missing_from: missing,
            });
            continue;
        }
        for m in &maps {
            let flags = m[id];
            if flags.len() != n_labels {
                return Err(PostprocessError::Width {
                    expected: n_labels,
                    got: flags.len(),
                });
            }
            data.extend(flags.flags().iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
        let p = prob_map[id];
        if p.len() != n_labels {
            return Err(PostprocessError::Width {
                expected: n_labels,
                got: p.len(),
            });
        }
        data.extend_from_slice(p.values());
        ids.push(id.to_string());
    }
    let values = Array2::from_shape_vec((ids.len(), 4 * n_labels), data).expect("row widths checked");
    Ok(FeatureMatrix { ids, values, excluded })
}

impl FeatureMatrix {
    pub fn n_labels(&self) -> usize {
        self.values.ncols() / 4
    }

    /// Path of the id index written next to the CSV.
    pub fn ids_path(path: &Path) -> PathBuf {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("features");
        path.with_file_name(format!("{stem}.ids.txt"))
    }

    /// Writes the CSV (header + rows) and the id index beside it.
    pub fn write(&self, path: &Path) -> Result<(), PostprocessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, e))?;
        w.write_record(feature_columns(self.n_labels()))
            .map_err(|e| format_err(path, e))?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| format_err(path, e))?;
        }
        w.flush().map_err(io_err(path))?;
        let ids_path = Self::ids_path(path);
        let mut body = self.ids.join("\n");
        body.push('\n');
        std::fs::write(&ids_path, body).map_err(io_err(&ids_path))
    }

    /// Reads a matrix written by [`FeatureMatrix::write`]. Exclusions are not stored.
    pub fn read(path: &Path) -> Result<Self, PostprocessError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| format_err(path, e))?;
        let headers = r.headers().map_err(|e| format_err(path, e))?.clone();
        let width = headers.len();
        let expected = feature_columns(width / 4);
        if width % 4 != 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(format_err(path, "unexpected header"));
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for record in r.records() {
            let record = record.map_err(|e| format_err(path, e))?;
            for field in record.iter() {
                data.push(field.parse::<f64>().map_err(|e| format_err(path, e))?);
            }
            rows += 1;
        }
        let ids_path = Self::ids_path(path);
        let ids: Vec<String> = std::fs::read_to_string(&ids_path)
            .map_err(io_err(&ids_path))?
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        if ids.len() != rows {
            return Err(format_err(&ids_path, format!("{} ids for {rows} rows", ids.len())));
        }
        let values = Array2::from_shape_vec((rows, width), data).map_err(|e| format_err(path, e))?;
        Ok(Self {
            ids,
            values,
            excluded: Vec::new(),
        })
    }
}
