//! One classification channel end to end: batch, prompt, chat, parse, normalize.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{Document, LabelVector, Taxonomy};
use crate::postprocess::{normalize_topics, parse_llm_response, ChannelOutput, ProbabilityTable, Source, UnmatchedTopic};
use crate::prompts::{PromptBuilder, PromptBundle, PromptError, PromptTemplates};
use crate::providers::{
    classify_chat, fetch_key_tokens, fetch_label_probabilities, fetch_paraphrases, ChatProvider, KeyTokens,
    Paraphrases, ProviderError, SidecarProvider,
};

/// Chat attempts per batch: the first try plus one retry on a parse failure.
pub const PARSE_ATTEMPTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BatchOutcome {
    Classified,
    /// Every attempt returned an unusable payload; the last error is kept.
    ParseFailed { error: String },
    ProviderFailed { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub index: usize,
    pub document_ids: Vec<String>,
    pub attempts: usize,
    #[serde(flatten)]
    pub outcome: BatchOutcome,
}

/// A document dropped before prompting because a sidecar call failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparationFailure {
    pub id: String,
    pub error: String,
}

/// Bookkeeping for one channel run, written next to the channel output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLog {
    pub batches: Vec<BatchRecord>,
    pub preparation_failures: Vec<PreparationFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRun {
    pub output: ChannelOutput,
    pub log: ChannelLog,
}

/// Errors that no retry or exclusion can work around.
fn is_fatal(e: &ProviderError) -> bool {
    matches!(
        e,
        ProviderError::MissingApiKey(_) | ProviderError::Auth { .. } | ProviderError::Config(_)
    )
}

/// Everything a chat channel needs besides the documents.
pub struct ChannelContext<'a> {
    pub taxonomy: &'a Taxonomy,
    pub templates: &'a PromptTemplates,
    pub chat: &'a dyn ChatProvider,
    pub sidecar: Option<&'a dyn SidecarProvider>,
    /// Labelled exemplars for few-shot sources, taken from the front.
    pub exemplars: &'a [Document],
    pub batch_size: usize,
}

impl ChannelContext<'_> {
    fn sidecar(&self) -> Result<&dyn SidecarProvider, HarnessError> {
        self.sidecar
            .ok_or_else(|| HarnessError::Config("this channel needs a sidecar provider".into()))
    }
}

fn shots(source: Source) -> Option<usize> {
    match source {
        Source::FewShot1 => Some(1),
        Source::FewShot3 => Some(3),
        Source::FewShot5 => Some(5),
        _ => None,
    }
}

/// Runs a chat-based source over `documents`.
///
/// Documents whose key tokens or paraphrases cannot be fetched, and whole
/// batches whose response stays unparseable after one retry or whose provider
/// call fails, end up in `unclassified`. Labels follow the document order.
pub fn run_chat_channel(source: Source, documents: &[Document], ctx: &ChannelContext<'_>) -> Result<ChannelRun, HarnessError> {
    let needs_tokens = matches!(source, Source::Channel2 | Source::Channel3);
    let needs_paraphrases = source == Source::Channel3;
    let k = shots(source);
    if !needs_tokens && k.is_none() && source != Source::Channel1 {
        return Err(HarnessError::Config(format!("{source} is not a chat channel")));
    }
    if ctx.batch_size == 0 {
        return Err(PromptError::BatchSize.into());
    }
    let exemplars = match k {
        Some(k) if ctx.exemplars.len() < k => {
            return Err(HarnessError::Config(format!(
                "{source} needs {k} exemplars but the pool holds {}",
                ctx.exemplars.len()
            )))
        }
        Some(k) => &ctx.exemplars[..k],
        None => &[][..],
    };

    let mut log = ChannelLog::default();
    let mut tokens: HashMap<String, KeyTokens> = HashMap::new();
    let mut paraphrases: HashMap<String, Paraphrases> = HashMap::new();
    let mut ready: Vec<Document> = Vec::with_capacity(documents.len());
    let mut unclassified: BTreeSet<String> = BTreeSet::new();
    for doc in documents {
        let prepared = (|| -> Result<(), ProviderError> {
            if needs_tokens {
                let sidecar = ctx.sidecar().map_err(|e| ProviderError::Config(e.to_string()))?;
                tokens.insert(doc.id.clone(), fetch_key_tokens(sidecar, &doc.text)?);
                if needs_paraphrases {
                    paraphrases.insert(doc.id.clone(), fetch_paraphrases(sidecar, &doc.text)?);
                }
            }
            Ok(())
        })();
        match prepared {
            Ok(()) => ready.push(doc.clone()),
            Err(e) if is_fatal(&e) => return Err(e.into()),
            Err(e) => {
                log.preparation_failures.push(PreparationFailure {
                    id: doc.id.clone(),
                    error: e.to_string(),
                });
                unclassified.insert(doc.id.clone());
            }
        }
    }

    let builder = PromptBuilder::new(ctx.taxonomy, ctx.templates);
    let mut assigned: HashMap<String, LabelVector> = HashMap::new();
    let mut unmatched = Vec::new();
    for (index, batch) in ready.chunks(ctx.batch_size).enumerate() {
        let bundle: PromptBundle = match source {
            Source::Channel1 => builder.base(batch)?,
            Source::Channel2 => builder.key_tokens(batch, &tokens)?,
            Source::Channel3 => builder.augmented(batch, &tokens, &paraphrases)?,
            _ => builder.few_shot(batch, exemplars, k.expect("few-shot source"))?,
        };
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            let raw = match classify_chat(ctx.chat, &bundle.prompt) {
                Ok(raw) => raw,
                Err(e) if is_fatal(&e) => return Err(e.into()),
                Err(e) => break BatchOutcome::ProviderFailed { error: e.to_string() },
            };
            match parse_llm_response(&raw, &bundle.document_ids) {
                Ok(parsed) => {
                    for a in parsed {
                        let (labels, unknown) = normalize_topics(&a.topics, ctx.taxonomy);
                        unmatched.extend(unknown.into_iter().map(|topic| UnmatchedTopic {
                            id: a.id.clone(),
                            topic,
                        }));
                        assigned.insert(a.id, labels);
                    }
                    break BatchOutcome::Classified;
                }
                Err(e) if attempts < PARSE_ATTEMPTS => log::debug!("batch {index}: {e}; retrying"),
                Err(e) => break BatchOutcome::ParseFailed { error: e.to_string() },
            }
        };
        if outcome != BatchOutcome::Classified {
            log::warn!("{source} batch {index} left unclassified: {outcome:?}");
            unclassified.extend(bundle.document_ids.iter().cloned());
        }
        log.batches.push(BatchRecord {
            index,
            document_ids: bundle.document_ids,
            attempts,
            outcome,
        });
    }

    let labels = documents
        .iter()
        .filter_map(|d| assigned.remove(&d.id).map(|l| (d.id.clone(), l)))
        .collect();
    let unclassified = documents
        .iter()
        .filter(|d| unclassified.contains(&d.id))
        .map(|d| d.id.clone())
        .collect();
    let mut output = ChannelOutput::new(source, labels, unclassified);
    output.unmatched = unmatched;
    Ok(ChannelRun { output, log })
}

/// Fetches label probabilities for every document; failures are listed as unavailable.
pub fn run_probability_channel(
    documents: &[Document],
    taxonomy: &Taxonomy,
    sidecar: &dyn SidecarProvider,
) -> Result<ProbabilityTable, HarnessError> {
    let mut rows = Vec::with_capacity(documents.len());
    let mut unavailable = Vec::new();
    for doc in documents {
        match fetch_label_probabilities(sidecar, &doc.text, taxonomy) {
            Ok(p) => rows.push((doc.id.clone(), p)),
            Err(e) if is_fatal(&e) => return Err(e.into()),
            Err(e) => {
                log::warn!("probabilities unavailable for {}: {e}", doc.id);
                unavailable.push(doc.id.clone());
            }
        }
    }
    Ok(ProbabilityTable { rows, unavailable })
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::providers::{ChatResponse, MockChat, MockSidecar};

    fn docs(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document {
                id: format!("d{i}"),
                text: format!("Tumour cells evade apoptosis and promote angiogenesis in sample {i}."),
                gold: None,
            })
            .collect()
    }

    struct Replies(Mutex<Vec<Result<String, ProviderError>>>);

    impl ChatProvider for Replies {
        fn complete(&self, _prompt: &str) -> Result<ChatResponse, ProviderError> {
            let next = self.0.lock().unwrap().remove(0)?;
            Ok(ChatResponse {
                text: next,
                finish_reason: None,
            })
        }
    }

    fn context<'a>(
        taxonomy: &'a Taxonomy,
        templates: &'a PromptTemplates,
        chat: &'a dyn ChatProvider,
        sidecar: Option<&'a dyn SidecarProvider>,
        batch_size: usize,
    ) -> ChannelContext<'a> {
        ChannelContext {
            taxonomy,
            templates,
            chat,
            sidecar,
            exemplars: &[],
            batch_size,
        }
    }

    #[test]
    fn mock_channel_one_classifies_everything() {
        let taxonomy = Arc::new(Taxonomy::hallmarks());
        let templates = PromptTemplates::default();
        let chat = MockChat::new(taxonomy.clone());
        let run = run_chat_channel(Source::Channel1, &docs(10), &context(&taxonomy, &templates, &chat, None, 4)).unwrap();
        assert_eq!(run.output.labels.len(), 10);
        assert!(run.output.unclassified.is_empty());
        assert_eq!(run.log.batches.len(), 3);
        assert_eq!(chat.calls(), 3);
    }

    #[test]
    fn channel_three_calls_sidecar_once_per_document() {
        let taxonomy = Arc::new(Taxonomy::hallmarks());
        let templates = PromptTemplates::default();
        let chat = MockChat::new(taxonomy.clone());
        let sidecar = MockSidecar::new();
        let ctx = context(&taxonomy, &templates, &chat, Some(&sidecar), 10);
        run_chat_channel(Source::Channel3, &docs(7), &ctx).unwrap();
        assert_eq!(sidecar.key_token_calls(), 7);
        assert_eq!(sidecar.paraphrase_calls(), 7);
    }

    #[test]
    fn unparseable_batch_is_retried_once_then_excluded() {
        let taxonomy = Taxonomy::hallmarks();
        let templates = PromptTemplates::default();
        let ok = r#"[{"Text": "a", "Topics": []}, {"Text": "b", "Topics": ["Resisting cell death"]}]"#;
        let chat = Replies(Mutex::new(vec![
            Ok("garbage".into()),
            Ok("[]".into()),
            Ok("not json either".into()),
            Ok(ok.into()),
        ]));
        let run = run_chat_channel(Source::Channel1, &docs(4), &context(&taxonomy, &templates, &chat, None, 2)).unwrap();
        assert_eq!(run.output.unclassified, ["d0", "d1"]);
        assert_eq!(run.output.labels.len(), 2);
        assert_eq!(run.log.batches[0].attempts, 2);
        assert_eq!(run.log.batches[1].attempts, 2);
        assert!(run.output.get("d3").unwrap().get(1));
    }

    #[test]
    fn provider_failure_marks_batch_without_retry() {
        let taxonomy = Taxonomy::hallmarks();
        let templates = PromptTemplates::default();
        let chat = Replies(Mutex::new(vec![Err(ProviderError::Timeout { attempts: 4 })]));
        let run = run_chat_channel(Source::Channel1, &docs(2), &context(&taxonomy, &templates, &chat, None, 5)).unwrap();
        assert_eq!(run.output.unclassified.len(), 2);
        assert_eq!(run.log.batches[0].attempts, 1);
        assert!(matches!(run.log.batches[0].outcome, BatchOutcome::ProviderFailed { .. }));
    }

    #[test]
    fn auth_failure_aborts() {
        let taxonomy = Taxonomy::hallmarks();
        let templates = PromptTemplates::default();
        let chat = Replies(Mutex::new(vec![Err(ProviderError::Auth { status: 401 })]));
        let err = run_chat_channel(Source::Channel1, &docs(2), &context(&taxonomy, &templates, &chat, None, 5));
        assert!(err.is_err());
    }
}
