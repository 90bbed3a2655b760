//! Renders the base, key-token, augmented and few-shot prompts for one batch.
//!
//! cargo run --example prompt_rendering

use std::collections::HashMap;
use std::error::Error;
use std::sync::Arc;

use quadmltc::corpus::{load_corpus, Taxonomy};
use quadmltc::prompts::{PromptBuilder, PromptTemplates};
use quadmltc::providers::{fetch_key_tokens, fetch_paraphrases, MockSidecar};

fn main() -> Result<(), Box<dyn Error>> {
    let taxonomy = Arc::new(Taxonomy::hallmarks());
    let dir = env!("CARGO_MANIFEST_DIR");
    let corpus = load_corpus(format!("{dir}/fixtures/hoc_synthetic_100.jsonl"), taxonomy.clone())?;
    let pool = load_corpus(format!("{dir}/fixtures/exemplar_pool.jsonl"), taxonomy.clone())?;
    let batch = &corpus.documents()[..2];

    let sidecar = MockSidecar::new();
    let mut tokens = HashMap::new();
    let mut paraphrases = HashMap::new();
    for doc in batch {
        tokens.insert(doc.id.clone(), fetch_key_tokens(&sidecar, &doc.text)?);
        paraphrases.insert(doc.id.clone(), fetch_paraphrases(&sidecar, &doc.text)?);
    }

    let templates = PromptTemplates::from_dir(format!("{dir}/templates"))?;
    let builder = PromptBuilder::new(&taxonomy, &templates);
    let bundles = [
        builder.base(batch)?,
        builder.key_tokens(batch, &tokens)?,
        builder.augmented(batch, &tokens, &paraphrases)?,
        builder.few_shot(batch, &pool.documents()[..3], 3)?,
    ];
    for bundle in bundles {
        println!("===== {} {:?} =====\n{}\n", bundle.variant, bundle.document_ids, bundle.prompt);
    }
    Ok(())
}
