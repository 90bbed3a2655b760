//! Deterministic offline stand-ins for the chat model and the sidecar.
//!
//! Every answer is a pure function of the request: topics are assigned when a
//! word from the topic name occurs in the text, then perturbed by hash-derived
//! noise so the channels disagree the way real ones do.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::json;
use sha2::{Digest, Sha256};

use super::{
    count_tokens, strip_punctuation, top_k_for, ChatProvider, ChatResponse, HealthResponse, KeyTokenResponse,
    LabelProbResponse, ParaphraseResponse, ProviderError, SidecarProvider,
};
use crate::corpus::Taxonomy;
use crate::prompts::extract_input_texts;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he",
    "her", "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
    "more", "most", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very",
    "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours",
];

/// Uniform value in [0, 1) derived from the given parts.
pub(crate) fn unit_hash(parts: &[&str]) -> f64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0x1f]);
    }
    let digest = h.finalize();
    let word = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    (word >> 11) as f64 / (1u64 << 53) as f64
}

fn words(text: &str) -> Vec<String> {
    strip_punctuation(&text.to_lowercase())
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Lowercase words of a topic name that signal the topic in a text.
pub(crate) fn cue_words(topic: &str) -> Vec<String> {
    words(topic)
        .into_iter()
        .filter(|w| w.chars().count() >= 5 && !matches!(w.as_str(), "and" | "the" | "of"))
        .collect()
}

fn mentions(text_words: &HashSet<String>, topic: &str) -> bool {
    cue_words(topic).iter().any(|c| text_words.contains(c))
}

/// Noise profile per prompt variant, as (miss rate, false-alarm rate).
fn noise_for(prompt: &str) -> (&'static str, f64, f64) {
    if prompt.contains("two variations of the input text") {
        ("augmented", 0.08, 0.02)
    } else if prompt.contains("The keywords in this text are") {
        ("keywords", 0.12, 0.025)
    } else if prompt.contains("Example 1:") {
        ("fewshot", 0.15, 0.03)
    } else {
        ("base", 0.18, 0.03)
    }
}

/// Chat model stand-in answering with a JSON array of `{Text, Topics}`.
pub struct MockChat {
    taxonomy: Arc<Taxonomy>,
    calls: AtomicUsize,
}

impl MockChat {
    pub fn new(taxonomy: Arc<Taxonomy>) -> Self {
        Self {
            taxonomy,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn assign(&self, salt: &str, miss: f64, false_alarm: f64, text: &str) -> Vec<String> {
        let text_words: HashSet<String> = words(text).into_iter().collect();
        self.taxonomy
            .names()
            .filter(|name| {
                let u = unit_hash(&["chat", salt, text, name]);
                if mentions(&text_words, name) {
                    u >= miss
                } else {
                    u < false_alarm
                }
            })
            .map(str::to_string)
            .collect()
    }
}

impl ChatProvider for MockChat {
    fn complete(&self, prompt: &str) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let (salt, miss, false_alarm) = noise_for(prompt);
        let entries: Vec<_> = extract_input_texts(prompt)
            .into_iter()
            .map(|text| {
                let topics = self.assign(salt, miss, false_alarm, &text);
                json!({ "Text": text, "Topics": topics })
            })
            .collect();
        Ok(ChatResponse {
            text: serde_json::Value::Array(entries).to_string(),
            finish_reason: Some("stop".into()),
        })
    }
}

#[derive(Debug, Default)]
pub struct MockSidecarCalls {
    pub key_tokens: AtomicUsize,
    pub paraphrases: AtomicUsize,
    pub label_probabilities: AtomicUsize,
}

/// Sidecar stand-in: hash-ranked key tokens, templated paraphrases, cue-driven probabilities.
#[derive(Debug, Default)]
pub struct MockSidecar {
    pub calls: MockSidecarCalls,
}

impl MockSidecar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn key_token_calls(&self) -> usize {
        self.calls.key_tokens.load(Ordering::SeqCst)
    }

    pub fn paraphrase_calls(&self) -> usize {
        self.calls.paraphrases.load(Ordering::SeqCst)
    }

    pub fn probability_calls(&self) -> usize {
        self.calls.label_probabilities.load(Ordering::SeqCst)
    }
}

const REPHRASINGS: &[&str] = &["In other words,", "Put differently,", "Stated another way,", "That is,", "Namely,"];

impl SidecarProvider for MockSidecar {
    fn key_tokens(&self, text: &str) -> Result<KeyTokenResponse, ProviderError> {
        self.calls.key_tokens.fetch_add(1, Ordering::SeqCst);
        if text.trim().is_empty() {
            return Err(ProviderError::Http {
                status: 400,
                body: "empty text".into(),
            });
        }
        let token_count = count_tokens(text);
        let top_k = top_k_for(token_count);
        let mut seen = HashSet::new();
        let mut candidates: Vec<(f64, String)> = words(text)
            .into_iter()
            .filter(|w| !STOPWORDS.contains(&w.as_str()) && !w.chars().all(|c| c.is_numeric()))
            .filter(|w| seen.insert(w.clone()))
            .map(|w| (unit_hash(&["attention", &w]), w))
            .collect();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let tokens = candidates.into_iter().take(top_k).map(|(_, w)| w).collect();
        Ok(KeyTokenResponse {
            tokens,
            token_count,
            top_k,
        })
    }

    fn paraphrases(&self, text: &str, variations: usize, beams: usize) -> Result<ParaphraseResponse, ProviderError> {
        self.calls.paraphrases.fetch_add(1, Ordering::SeqCst);
        if variations > beams {
            return Err(ProviderError::Http {
                status: 400,
                body: "num_return_variations must not exceed num_beams".into(),
            });
        }
        let body = text.trim();
        let variations = (0..variations)
            .map(|i| format!("{} {}", REPHRASINGS[i % REPHRASINGS.len()], body))
            .collect();
        Ok(ParaphraseResponse { variations })
    }

    fn label_probabilities(&self, text: &str, labels: &[String]) -> Result<LabelProbResponse, ProviderError> {
        self.calls.label_probabilities.fetch_add(1, Ordering::SeqCst);
        if labels.is_empty() {
            return Err(ProviderError::Http {
                status: 400,
                body: "empty label list".into(),
            });
        }
        let text_words: HashSet<String> = words(text).into_iter().collect();
        let probs = labels
            .iter()
            .map(|label| {
                let u = unit_hash(&["nli", text, label]);
                if mentions(&text_words, label) {
                    0.3 + 0.7 * u
                } else {
                    0.55 * u * u
                }
            })
            .collect();
        Ok(LabelProbResponse { probs })
    }

    fn health(&self) -> Result<HealthResponse, ProviderError> {
        Ok(HealthResponse {
            status: "ok".into(),
            models: vec!["mock".into()],
        })
    }
}
