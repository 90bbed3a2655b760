//! Draws a 300-document stratified sample and compares label proportions.
//!
//! cargo run --example stratified_sampling

use std::error::Error;
use std::sync::Arc;

use quadmltc::corpus::{label_distribution, load_corpus, stratified_sample, Taxonomy};

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/hoc_synthetic_1499.jsonl");
    let corpus = load_corpus(path, Arc::new(Taxonomy::hallmarks()))?;
    let sample = stratified_sample(&corpus, 300, 42)?;

    let parent = label_distribution(&corpus)?;
    let drawn = label_distribution(&sample)?;
    println!("{:<55} {:>8} {:>8}", "topic", "parent", "sample");
    for ((name, p), (_, s)) in parent.iter().zip(&drawn) {
        let p = *p as f64 / corpus.len() as f64;
        let s = *s as f64 / sample.len() as f64;
        println!("{name:<55} {p:>8.3} {s:>8.3}");
    }
    Ok(())
}
