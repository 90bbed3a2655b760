//! Runs the three chat channels and the probability channel with offline mocks.
//!
//! cargo run --example mock_channels

use std::error::Error;
use std::sync::Arc;

use quadmltc::corpus::{load_corpus, Taxonomy};
use quadmltc::harness::{run_chat_channel, run_probability_channel, ChannelContext};
use quadmltc::metrics::MetricsReport;
use quadmltc::postprocess::{threshold_probabilities, ChannelOutput, Source};
use quadmltc::prompts::PromptTemplates;
use quadmltc::providers::{MockChat, MockSidecar};

fn score(taxonomy: &Taxonomy, out: &ChannelOutput, gold: &[(String, quadmltc::corpus::LabelVector)]) -> f64 {
    let (pred, truth): (Vec<_>, Vec<_>) = out
        .labels
        .iter()
        .map(|(id, l)| (l.clone(), gold.iter().find(|(g, _)| g == id).unwrap().1.clone()))
        .unzip();
    MetricsReport::compute(taxonomy, &pred, &truth, None).unwrap().example_f1
}

fn main() -> Result<(), Box<dyn Error>> {
    let taxonomy = Arc::new(Taxonomy::hallmarks());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/hoc_synthetic_100.jsonl");
    let corpus = load_corpus(path, taxonomy.clone())?;
    let gold: Vec<_> = corpus.ids().into_iter().zip(corpus.golds()?).collect();

    let chat = MockChat::new(taxonomy.clone());
    let sidecar = MockSidecar::new();
    let templates = PromptTemplates::default();
    let ctx = ChannelContext {
        taxonomy: &taxonomy,
        templates: &templates,
        chat: &chat,
        sidecar: Some(&sidecar),
        exemplars: &[],
        batch_size: 10,
    };

    for source in [Source::Channel1, Source::Channel2, Source::Channel3] {
        let run = run_chat_channel(source, corpus.documents(), &ctx)?;
        println!(
            "{source}: {} classified, {} unclassified, {} batches, example F1 {:.3}",
            run.output.labels.len(),
            run.output.unclassified.len(),
            run.log.batches.len(),
            score(&taxonomy, &run.output, &gold)
        );
    }
    let table = run_probability_channel(corpus.documents(), &taxonomy, &sidecar)?;
    let bart = threshold_probabilities(&table, 0.5)?;
    println!("bart: {} classified, example F1 {:.3}", bart.labels.len(), score(&taxonomy, &bart, &gold));
    println!(
        "chat calls {}, key-token calls {}, paraphrase calls {}",
        chat.calls(),
        sidecar.key_token_calls(),
        sidecar.paraphrase_calls()
    );
    Ok(())
}
