//! Out-of-fold TF-IDF + linear SVM baseline on the 1,000-document fixture.
//!
//! cargo run --release --example tfidf_baseline

use std::error::Error;
use std::sync::Arc;

use quadmltc::corpus::{iterative_stratified_kfold, load_corpus, Taxonomy};
use quadmltc::ensemble::{tfidf_cross_val_predict, LinearHyperparams};
use quadmltc::metrics::MetricsReport;

fn main() -> Result<(), Box<dyn Error>> {
    let taxonomy = Arc::new(Taxonomy::hallmarks());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/hoc_synthetic_1000.jsonl");
    let corpus = load_corpus(path, taxonomy.clone())?;
    let gold = corpus.golds()?;
    let texts: Vec<&str> = corpus.documents().iter().map(|d| d.text.as_str()).collect();
    let folds = iterative_stratified_kfold(&corpus, 5, 42)?;
    let pred = tfidf_cross_val_predict(&texts, &gold, &folds, &LinearHyperparams::default())?;
    let report = MetricsReport::compute(&taxonomy, &pred, &gold, None)?;
    print!("{}", report.to_markdown("TF-IDF + Lin-SVM"));
    Ok(())
}
