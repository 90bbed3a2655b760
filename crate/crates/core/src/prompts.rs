//! Prompt construction for the classification channels and few-shot baselines.
//!
//! Documents are rendered inside a triple-backtick block as a list of string
//! literals, one per line. Per-document context (key tokens, variations) is
//! placed on `#` comment lines directly below the text it describes, so
//! removing those lines gives back the plain rendering.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document, Taxonomy};
use crate::providers::{KeyTokens, Paraphrases};

pub const TEMPLATE_VERSION: &str = "v1";

const BASE: &str = include_str!("../templates/base.v1.txt");
const KEY_TOKENS: &str = include_str!("../templates/key_tokens.v1.txt");
const VARIATIONS: &str = include_str!("../templates/variations.v1.txt");
const FEWSHOT_EXAMPLE: &str = include_str!("../templates/fewshot_example.v1.txt");

const BLOCK_OPEN: &str = "```\n[\n";
const BLOCK_CLOSE: &str = "]\n```";
const CLAUSE_PREFIX: &str = "  # ";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error("no key tokens for document {0}")]
    MissingKeyTokens(String),
    #[error("no paraphrases for document {0}")]
    MissingParaphrases(String),
    #[error("few-shot count must be 1, 3 or 5, got {0}")]
    InvalidShots(usize),
    #[error("{k}-shot prompt needs {k} exemplars, got {got}")]
    ExemplarCount { k: usize, got: usize },
    #[error("exemplar {0} is also in the batch being classified")]
    ExemplarOverlap(String),
    #[error("exemplar {0} has no gold labels")]
    UnlabeledExemplar(String),
    #[error("template {template}: {message}")]
    Template { template: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptVariant {
    Base,
    KeyTokens,
    Augmented,
    FewShot(usize),
    /// Label-probability thresholding; issues no chat prompt.
    ZeroShotBaseline,
}

impl PromptVariant {
    pub fn few_shot(k: usize) -> Result<Self, PromptError> {
        if matches!(k, 1 | 3 | 5) {
            Ok(Self::FewShot(k))
        } else {
            Err(PromptError::InvalidShots(k))
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Base => f.write_str("base"),
            Self::KeyTokens => f.write_str("key-tokens"),
            Self::Augmented => f.write_str("augmented"),
            Self::FewShot(k) => write!(f, "fewshot{k}"),
            Self::ZeroShotBaseline => f.write_str("zero-shot-baseline"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub variant: PromptVariant,
    pub document_ids: Vec<String>,
    pub prompt: String,
}

/// Substitutes `{name}` placeholders in a single pass.
///
/// Braces that do not enclose a lowercase identifier are copied verbatim.
/// Substituted values are never rescanned.
pub fn render(template: &str, values: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'))
            .unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            let name = &after[..name_len];
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| PromptError::Template {
                    template: "render".into(),
                    message: format!("unknown placeholder {{{name}}}"),
                })?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn placeholders(template: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let n = after
            .find(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'))
            .unwrap_or(after.len());
        if n > 0 && after[n..].starts_with('}') {
            found.push(after[..n].to_string());
        }
        rest = after;
    }
    found
}

/// The four prompt template texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub base: String,
    pub key_tokens: String,
    pub variations: String,
    pub fewshot_example: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            base: BASE.to_string(),
            key_tokens: KEY_TOKENS.to_string(),
            variations: VARIATIONS.to_string(),
            fewshot_example: FEWSHOT_EXAMPLE.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `base.v1.txt`, `key_tokens.v1.txt`, `variations.v1.txt` and
    /// `fewshot_example.v1.txt` from `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let read = |stem: &str| {
            let path = dir.as_ref().join(format!("{stem}.{TEMPLATE_VERSION}.txt"));
            std::fs::read_to_string(&path)
                .map(|s| s.strip_suffix('\n').map(str::to_string).unwrap_or(s))
                .map_err(|e| PromptError::Template {
                    template: path.display().to_string(),
                    message: e.to_string(),
                })
        };
        let templates = Self {
            base: read("base")?,
            key_tokens: read("key_tokens")?,
            variations: read("variations")?,
            fewshot_example: read("fewshot_example")?,
        };
        templates.validate()?;
        Ok(templates)
    }

    /// Checks that each template uses exactly its expected placeholders.
    pub fn validate(&self) -> Result<(), PromptError> {
        let checks: [(&str, &str, &[&str]); 4] = [
            ("base", &self.base, &["topics", "topics_details", "instructions", "input"]),
            ("key_tokens", &self.key_tokens, &["key_tokens"]),
            ("variations", &self.variations, &["variation1", "variation2"]),
            ("fewshot_example", &self.fewshot_example, &["index", "text", "topics"]),
        ];
        for (name, text, expected) in checks {
            let mut found = placeholders(text);
            found.sort();
            found.dedup();
            let mut want: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
            want.sort();
            if found != want {
                return Err(PromptError::Template {
                    template: name.into(),
                    message: format!("expected placeholders {want:?}, found {found:?}"),
                });
            }
        }
        Ok(())
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Flattens a variation onto one line so it cannot break out of its comment.
fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").replace('"', "\\\"")
}

/// Renders prompts for one taxonomy with one set of templates.
#[derive(Debug, Clone, Copy)]
pub struct PromptBuilder<'a> {
    taxonomy: &'a Taxonomy,
    templates: &'a PromptTemplates,
}

impl<'a> PromptBuilder<'a> {
    pub fn new(taxonomy: &'a Taxonomy, templates: &'a PromptTemplates) -> Self {
        Self { taxonomy, templates }
    }

    fn topic_names(&self) -> String {
        serde_json::to_string(&self.taxonomy.names().collect::<Vec<_>>()).expect("serializable")
    }

    fn topic_map(&self, field: impl Fn(&crate::corpus::Topic) -> &str) -> String {
        let mut map = serde_json::Map::new();
        for t in self.taxonomy.topics() {
            map.insert(t.name.clone(), serde_json::Value::String(field(t).to_string()));
        }
        serde_json::Value::Object(map).to_string()
    }

    fn input_block(&self, batch: &[Document], clauses: &dyn Fn(&Document) -> Result<Vec<String>, PromptError>) -> Result<String, PromptError> {
        let mut block = String::from(BLOCK_OPEN);
        for (i, doc) in batch.iter().enumerate() {
            block.push_str("  ");
            block.push_str(&json_string(&doc.text));
            if i + 1 < batch.len() {
                block.push(',');
            }
            block.push('\n');
            for clause in clauses(doc)? {
                block.push_str(CLAUSE_PREFIX);
                block.push_str(&clause);
                block.push('\n');
            }
        }
        block.push_str(BLOCK_CLOSE);
        Ok(block)
    }

    fn body(&self, batch: &[Document], clauses: &dyn Fn(&Document) -> Result<Vec<String>, PromptError>) -> Result<String, PromptError> {
        if batch.is_empty() {
            return Err(PromptError::EmptyBatch);
        }
        let input = self.input_block(batch, clauses)?;
        render(
            &self.templates.base,
            &[
                ("topics", &self.topic_names()),
                ("topics_details", &self.topic_map(|t| &t.definition)),
                ("instructions", &self.topic_map(|t| &t.instruction)),
                ("input", &input),
            ],
        )
    }

    fn bundle(variant: PromptVariant, batch: &[Document], prompt: String) -> PromptBundle {
        PromptBundle {
            variant,
            document_ids: batch.iter().map(|d| d.id.clone()).collect(),
            prompt,
        }
    }

    fn key_token_clause(&self, doc: &Document, tokens: &HashMap<String, KeyTokens>) -> Result<String, PromptError> {
        let kt = tokens
            .get(&doc.id)
            .ok_or_else(|| PromptError::MissingKeyTokens(doc.id.clone()))?;
        if kt.tokens().is_empty() {
            return Err(PromptError::MissingKeyTokens(doc.id.clone()));
        }
        let list = serde_json::to_string(kt.tokens()).expect("serializable");
        render(&self.templates.key_tokens, &[("key_tokens", &list)])
    }

    pub fn base(&self, batch: &[Document]) -> Result<PromptBundle, PromptError> {
        let prompt = self.body(batch, &|_| Ok(Vec::new()))?;
        Ok(Self::bundle(PromptVariant::Base, batch, prompt))
    }

    pub fn key_tokens(&self, batch: &[Document], tokens: &HashMap<String, KeyTokens>) -> Result<PromptBundle, PromptError> {
        let prompt = self.body(batch, &|doc| Ok(vec![self.key_token_clause(doc, tokens)?]))?;
        Ok(Self::bundle(PromptVariant::KeyTokens, batch, prompt))
    }

    pub fn augmented(
        &self,
        batch: &[Document],
        tokens: &HashMap<String, KeyTokens>,
        paraphrases: &HashMap<String, Paraphrases>,
    ) -> Result<PromptBundle, PromptError> {
        let prompt = self.body(batch, &|doc| {
            let keywords = self.key_token_clause(doc, tokens)?;
            let p = paraphrases
                .get(&doc.id)
                .ok_or_else(|| PromptError::MissingParaphrases(doc.id.clone()))?;
            let variations = render(
                &self.templates.variations,
                &[("variation1", &single_line(p.first())), ("variation2", &single_line(p.second()))],
            )?;
            Ok(vec![keywords, variations])
        })?;
        Ok(Self::bundle(PromptVariant::Augmented, batch, prompt))
    }

    pub fn few_shot(&self, batch: &[Document], exemplars: &[Document], k: usize) -> Result<PromptBundle, PromptError> {
        let variant = PromptVariant::few_shot(k)?;
        if exemplars.len() != k {
            return Err(PromptError::ExemplarCount { k, got: exemplars.len() });
        }
        for ex in exemplars {
            if batch.iter().any(|d| d.id == ex.id || d.text == ex.text) {
                return Err(PromptError::ExemplarOverlap(ex.id.clone()));
            }
        }
        let mut prompt = String::new();
        for (i, ex) in exemplars.iter().enumerate() {
            let gold = ex
                .gold
                .as_ref()
                .ok_or_else(|| PromptError::UnlabeledExemplar(ex.id.clone()))?;
            let topics = serde_json::to_string(&self.taxonomy.names_of(gold)).expect("serializable");
            let index = (i + 1).to_string();
            prompt.push_str(&render(
                &self.templates.fewshot_example,
                &[("index", &index), ("text", &json_string(&ex.text)), ("topics", &topics)],
            )?);
            prompt.push_str("\n\n");
        }
        prompt.push_str(&self.body(batch, &|_| Ok(Vec::new()))?);
        Ok(Self::bundle(variant, batch, prompt))
    }
}

pub fn build_base_prompt(batch: &[Document], taxonomy: &Taxonomy) -> Result<PromptBundle, PromptError> {
    PromptBuilder::new(taxonomy, &PromptTemplates::default()).base(batch)
}

pub fn build_keytokens_prompt(
    batch: &[Document],
    taxonomy: &Taxonomy,
    tokens: &HashMap<String, KeyTokens>,
) -> Result<PromptBundle, PromptError> {
    PromptBuilder::new(taxonomy, &PromptTemplates::default()).key_tokens(batch, tokens)
}

pub fn build_augmented_prompt(
    batch: &[Document],
    taxonomy: &Taxonomy,
    tokens: &HashMap<String, KeyTokens>,
    paraphrases: &HashMap<String, Paraphrases>,
) -> Result<PromptBundle, PromptError> {
    PromptBuilder::new(taxonomy, &PromptTemplates::default()).augmented(batch, tokens, paraphrases)
}

pub fn build_fewshot_prompt(
    batch: &[Document],
    taxonomy: &Taxonomy,
    exemplars: &[Document],
    k: usize,
) -> Result<PromptBundle, PromptError> {
    PromptBuilder::new(taxonomy, &PromptTemplates::default()).few_shot(batch, exemplars, k)
}

/// Splits the corpus into consecutive batches of at most `size` documents.
pub fn batch_documents(corpus: &Corpus, size: usize) -> Result<Vec<&[Document]>, PromptError> {
    if size == 0 {
        return Err(PromptError::BatchSize);
    }
    Ok(corpus.documents().chunks(size).collect())
}

/// Removes the per-document `#` clause lines from a rendered prompt.
pub fn strip_clauses(prompt: &str) -> String {
    let Some(start) = prompt.rfind(BLOCK_OPEN) else {
        return prompt.to_string();
    };
    let (head, block) = prompt.split_at(start);
    let kept: Vec<&str> = block.split('\n').filter(|l| !l.starts_with(CLAUSE_PREFIX)).collect();
    format!("{head}{}", kept.join("\n"))
}

/// Recovers the document texts from the input block of a rendered prompt.
pub fn extract_input_texts(prompt: &str) -> Vec<String> {
    let Some(start) = prompt.rfind(BLOCK_OPEN) else {
        return Vec::new();
    };
    let block = &prompt[start + BLOCK_OPEN.len()..];
    let end = block.find(BLOCK_CLOSE).unwrap_or(block.len());
    block[..end]
        .lines()
        .map(str::trim)
        .filter(|l| l.starts_with('"'))
        .filter_map(|l| serde_json::from_str::<String>(l.trim_end_matches(',')).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::corpus::LabelVector;

    fn doc(id: &str, text: &str) -> Document {
        Document {
            id: id.into(),
            text: text.into(),
            gold: None,
        }
    }

    fn tokens_for(batch: &[Document], words: &[&[&str]]) -> HashMap<String, KeyTokens> {
        batch
            .iter()
            .zip(words)
            .map(|(d, w)| {
                let kt = KeyTokens::new(&d.text, w.iter().map(|s| s.to_string()).collect()).unwrap();
                (d.id.clone(), kt)
            })
            .collect()
    }

    #[test]
    fn render_single_pass() {
        assert_eq!(render("{a}-{b}", &[("a", "{b}"), ("b", "x")]).unwrap(), "{b}-x");
        assert_eq!(render("{\"k\": 1} {a}", &[("a", "v")]).unwrap(), "{\"k\": 1} v");
        assert!(render("{missing}", &[]).is_err());
    }

    #[test]
    fn default_templates_validate() {
        PromptTemplates::default().validate().unwrap();
    }

    #[test]
    fn base_prompt_contents() {
        let tax = Taxonomy::hallmarks();
        let batch = vec![doc("a", "First text."), doc("b", "Second \"quoted\" text."), doc("c", "Third.")];
        let b = build_base_prompt(&batch, &tax).unwrap();
        assert!(b.prompt.starts_with("You are a healthcare expert"));
        assert!(b.prompt.contains("JSON format with the following keys: Text, Topics."));
        for name in tax.names() {
            assert!(b.prompt.contains(name));
        }
        assert_eq!(b.document_ids, ["a", "b", "c"]);
        assert_eq!(
            extract_input_texts(&b.prompt),
            batch.iter().map(|d| d.text.clone()).collect::<Vec<_>>()
        );
        assert_eq!(b.prompt.matches("First text.").count(), 1);
        assert!(build_base_prompt(&[], &tax).is_err());
    }

    #[test]
    fn clauses_follow_their_text_and_strip_to_base() {
        let tax = Taxonomy::hallmarks();
        let batch = vec![doc("a", "Tumor growth is fast."), doc("b", "Immune cells respond.")];
        let tokens = tokens_for(&batch, &[&["tumor", "growth"], &["immune"]]);
        let paraphrases: HashMap<String, Paraphrases> = batch
            .iter()
            .map(|d| (d.id.clone(), Paraphrases::new(vec!["v1".into(), "v1".into()]).unwrap()))
            .collect();
        let base = build_base_prompt(&batch, &tax).unwrap().prompt;
        let kt = build_keytokens_prompt(&batch, &tax, &tokens).unwrap().prompt;
        let aug = build_augmented_prompt(&batch, &tax, &tokens, &paraphrases).unwrap().prompt;
        assert!(kt.contains("Tumor growth is fast.\",\n  # The keywords in this text are [\"tumor\",\"growth\"].\n"));
        assert!(kt.contains("Immune cells respond.\"\n  # The keywords in this text are [\"immune\"].\n"));
        assert!(aug.contains("\"v1\" and \"v1\" are two variations of the input text"));
        assert!(aug.contains("solely provided to help you better understand it. Do not assign topics to these variations."));
        assert_eq!(strip_clauses(&kt), base);
        assert_eq!(strip_clauses(&aug), base);
        assert_eq!(extract_input_texts(&aug).len(), 2);

        let missing = tokens_for(&batch[..1], &[&["tumor"]]);
        assert_eq!(
            build_keytokens_prompt(&batch, &tax, &missing),
            Err(PromptError::MissingKeyTokens("b".into()))
        );
        assert_eq!(
            build_augmented_prompt(&batch, &tax, &tokens, &HashMap::new()),
            Err(PromptError::MissingParaphrases("a".into()))
        );
    }

    #[test]
    fn few_shot_blocks_and_guards() {
        let tax = Taxonomy::hallmarks();
        let exemplars: Vec<Document> = (0..5)
            .map(|i| Document {
                id: format!("ex{i}"),
                text: format!("Exemplar {i}."),
                gold: Some(LabelVector::from_indices(10, &[i])),
            })
            .collect();
        let batch = vec![doc("a", "Target.")];
        let base = build_base_prompt(&batch, &tax).unwrap().prompt;
        let one = build_fewshot_prompt(&batch, &tax, &exemplars[..1], 1).unwrap();
        assert_eq!(one.prompt.matches("Example ").count(), 1);
        assert!(one.prompt.ends_with(&base));
        let five = build_fewshot_prompt(&batch, &tax, &exemplars, 5).unwrap().prompt;
        let positions: Vec<usize> = (1..=5).map(|i| five.find(&format!("Example {i}:")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(five.contains("Topics: [\"Resisting cell death\"]"));
        assert_eq!(build_fewshot_prompt(&batch, &tax, &exemplars[..2], 2), Err(PromptError::InvalidShots(2)));
        let leaking = vec![doc("ex0", "Exemplar 0.")];
        assert!(matches!(
            build_fewshot_prompt(&leaking, &tax, &exemplars[..1], 1),
            Err(PromptError::ExemplarOverlap(_))
        ));
    }

    #[test]
    fn batching() {
        let tax = Arc::new(Taxonomy::hallmarks());
        let docs: Vec<Document> = (0..11).map(|i| doc(&format!("d{i}"), "x")).collect();
        let corpus = Corpus::new(tax, docs).unwrap();
        let sizes: Vec<usize> = batch_documents(&corpus, 10).unwrap().iter().map(|b| b.len()).collect();
        assert_eq!(sizes, [10, 1]);
        assert_eq!(batch_documents(&corpus, 50).unwrap().len(), 1);
        assert!(batch_documents(&corpus, 0).is_err());
    }
}
