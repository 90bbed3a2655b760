//! Corpora, the topic taxonomy and label vectors.
//!
//! A [`Taxonomy`] fixes the column order used by every label vector,
//! probability vector and feature block in the crate. Corpora are read from
//! line-delimited JSON records of the form
//! `{"id": "...", "text": "...", "labels": ["Topic name", ...]}`; a record
//! without a `labels` key is unannotated.

mod stratify;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use stratify::{iterative_stratified_kfold, stratified_kfold_indices, stratified_sample, Fold};

const BUNDLED_TAXONOMY: &str = include_str!("../../data/hoc_taxonomy.toml");

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("record {id}: unknown label {label:?}")]
    UnknownLabel { id: String, label: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("document {0:?} has no gold labels")]
    Unannotated(String),
    #[error("corpus is empty")]
    Empty,
    #[error("label vector of length {got} does not match taxonomy of length {expected}")]
    LabelLength { expected: usize, got: usize },
    #[error("requested {requested} documents but the corpus holds {available}")]
    SizeTooLarge { requested: usize, available: usize },
    #[error("cannot build {k} folds over {n} documents")]
    InvalidFolds { k: usize, n: usize },
}

/// One classification topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub name: String,
    #[serde(default)]
    pub definition: String,
    #[serde(default)]
    pub instruction: String,
}

/// Ordered, immutable list of topics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Taxonomy {
    topics: Vec<Topic>,
}

#[derive(Deserialize)]
struct TaxonomyFile {
    topics: Vec<Topic>,
}

impl Taxonomy {
    pub fn new(topics: Vec<Topic>) -> Result<Self, CorpusError> {
        if topics.is_empty() {
            return Err(CorpusError::Taxonomy("no topics".into()));
        }
        let mut seen = HashSet::new();
        for topic in &topics {
            if topic.name.trim().is_empty() {
                return Err(CorpusError::Taxonomy("topic with empty name".into()));
            }
            if !seen.insert(topic.name.as_str()) {
                return Err(CorpusError::Taxonomy(format!(
                    "duplicate topic name {:?}",
                    topic.name
                )));
            }
        }
        Ok(Self { topics })
    }

    /// The ten Hallmarks of Cancer, in canonical order.
    pub fn hallmarks() -> Self {
        Self::from_toml_str(BUNDLED_TAXONOMY).expect("bundled taxonomy is valid")
    }

    pub fn from_toml_str(source: &str) -> Result<Self, CorpusError> {
        let file: TaxonomyFile =
            toml::from_str(source).map_err(|e| CorpusError::Taxonomy(e.to_string()))?;
        Self::new(file.topics)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&source)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.topics.iter().map(|t| t.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.name == name)
    }

    /// Topic names whose flag is set in `labels`.
    pub fn names_of(&self, labels: &LabelVector) -> Vec<&str> {
        labels.ones().map(|j| self.topics[j].name.as_str()).collect()
    }

    /// Maps exact topic names to a label vector; returns the first unknown name on failure.
    pub fn encode<'a, I>(&self, names: I) -> Result<LabelVector, &'a str>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut labels = LabelVector::zeros(self.len());
        for name in names {
            let j = self.index_of(name).ok_or(name)?;
            labels.set(j, true);
        }
        Ok(labels)
    }
}

/// Binary flags aligned to taxonomy order. Serialized as an array of 0/1 integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelVector(Vec<bool>);

impl LabelVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_bools(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    /// Builds a vector from 0/1 integers; any other value is rejected.
    pub fn from_ints(flags: &[u8]) -> Option<Self> {
        flags
            .iter()
            .map(|&f| match f {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &j in indices {
            v.set(j, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, value: bool) {
        self.0[j] = value;
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn to_ints(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }

    /// Indices of set flags, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (j, &b) in self.0.iter().enumerate() {
            if j > 0 {
                f.write_str(",")?;
            }
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str("]")
    }
}

impl Serialize for LabelVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_ints().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ints = Vec::<u8>::deserialize(deserializer)?;
        Self::from_ints(&ints).ok_or_else(|| serde::de::Error::custom("flags must be 0 or 1"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub gold: Option<LabelVector>,
}

/// Ordered documents plus the taxonomy their labels refer to.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    taxonomy: Arc<Taxonomy>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Corpus {
    pub fn new(taxonomy: Arc<Taxonomy>, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(doc.id.clone()));
            }
            if let Some(gold) = &doc.gold {
                if gold.len() != taxonomy.len() {
                    return Err(CorpusError::LabelLength {
                        expected: taxonomy.len(),
                        got: gold.len(),
                    });
                }
            }
        }
        Ok(Self {
            documents,
            taxonomy,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn taxonomy(&self) -> &Arc<Taxonomy> {
        &self.taxonomy
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Gold vectors of every document; fails on the first unannotated one.
    pub fn golds(&self) -> Result<Vec<LabelVector>, CorpusError> {
        self.documents
            .iter()
            .map(|d| {
                d.gold
                    .clone()
                    .ok_or_else(|| CorpusError::Unannotated(d.id.clone()))
            })
            .collect()
    }

    /// New corpus holding the documents at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Corpus {
        Corpus {
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
            taxonomy: Arc::clone(&self.taxonomy),
        }
    }

    /// Writes the corpus back out in the line-delimited record format.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let io_err = |source| CorpusError::Io {
            path: path.to_owned(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for doc in &self.documents {
            let record = Record {
                id: doc.id.clone(),
                text: doc.text.clone(),
                labels: doc.gold.as_ref().map(|g| {
                    self.taxonomy
                        .names_of(g)
                        .into_iter()
                        .map(String::from)
                        .collect()
                }),
            };
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Reads a line-delimited corpus file. Blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>, taxonomy: Arc<Taxonomy>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_corpus(BufReader::new(file), taxonomy).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

pub fn parse_corpus(reader: impl BufRead, taxonomy: Arc<Taxonomy>) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.text.trim().is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("record {:?} has empty text", record.id),
            });
        }
        let gold = match &record.labels {
            None => None,
            Some(names) => Some(taxonomy.encode(names.iter().map(String::as_str)).map_err(
                |label| CorpusError::UnknownLabel {
                    id: record.id.clone(),
                    label: label.to_owned(),
                },
            )?),
        };
        documents.push(Document {
            id: record.id,
            text: record.text,
            gold,
        });
    }
    Corpus::new(taxonomy, documents)
}

/// Per-topic count of documents whose gold flag is set, in taxonomy order.
pub fn label_distribution(corpus: &Corpus) -> Result<Vec<(String, usize)>, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut counts = vec![0usize; corpus.taxonomy.len()];
    for gold in corpus.golds()? {
        for j in gold.ones() {
            counts[j] += 1;
        }
    }
    Ok(corpus
        .taxonomy
        .names()
        .map(String::from)
        .zip(counts)
        .collect())
}
