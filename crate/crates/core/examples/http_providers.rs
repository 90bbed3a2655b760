//! Classifies one batch against real endpoints.
//!
//! QUADMLTC_CHAT_ENDPOINT=https://api.openai.com/v1/chat/completions \
//! QUADMLTC_CHAT_MODEL=gpt-3.5-turbo OPENAI_API_KEY=... \
//! QUADMLTC_SIDECAR_URL=http://localhost:8000 \
//! cargo run --example http_providers

use std::error::Error;
use std::sync::Arc;

use quadmltc::corpus::{load_corpus, Taxonomy};
use quadmltc::harness::{run_chat_channel, ChannelContext};
use quadmltc::postprocess::Source;
use quadmltc::prompts::PromptTemplates;
use quadmltc::providers::{HttpChatClient, HttpSidecarClient, ProviderConfig, SidecarProvider};

fn main() -> Result<(), Box<dyn Error>> {
    let (Ok(endpoint), Ok(sidecar_url)) = (
        std::env::var("QUADMLTC_CHAT_ENDPOINT"),
        std::env::var("QUADMLTC_SIDECAR_URL"),
    ) else {
        println!("set QUADMLTC_CHAT_ENDPOINT and QUADMLTC_SIDECAR_URL to run this example");
        return Ok(());
    };
    let model = std::env::var("QUADMLTC_CHAT_MODEL").unwrap_or_else(|_| "gpt-3.5-turbo".into());
    let chat = HttpChatClient::new(ProviderConfig::new(endpoint, model))?;
    let sidecar = HttpSidecarClient::new(ProviderConfig::new(sidecar_url, "sidecar"))?;
    println!("sidecar models: {:?}", sidecar.health()?.models);

    let taxonomy = Arc::new(Taxonomy::hallmarks());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/hoc_synthetic_100.jsonl");
    let corpus = load_corpus(path, taxonomy.clone())?;
    let templates = PromptTemplates::default();
    let ctx = ChannelContext {
        taxonomy: &taxonomy,
        templates: &templates,
        chat: &chat,
        sidecar: Some(&sidecar),
        exemplars: &[],
        batch_size: 10,
    };
    let run = run_chat_channel(Source::Channel3, &corpus.documents()[..10], &ctx)?;
    for (id, labels) in &run.output.labels {
        println!("{id}: {:?}", taxonomy.names_of(labels));
    }
    println!("unclassified: {:?}", run.output.unclassified);
    Ok(())
}
