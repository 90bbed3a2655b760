//! Stacks three complementary channels and a probability table, then compares
//! the meta-classifier with each channel and with hard voting.
//!
//! cargo run --example feature_stacking

use std::error::Error;

use quadmltc::corpus::{stratified_kfold_indices, LabelVector, Taxonomy};
use quadmltc::ensemble::{cross_val_predict, hard_vote, LinearHyperparams, SparseMatrix, TransformationKind};
use quadmltc::metrics::MetricsReport;
use quadmltc::postprocess::{assemble_features, ChannelOutput};
use quadmltc::synthetic::complementary_channels;

fn example_f1(taxonomy: &Taxonomy, pred: &[LabelVector], gold: &[LabelVector]) -> f64 {
    MetricsReport::compute(taxonomy, pred, gold, None).unwrap().example_f1
}

fn rows(out: &ChannelOutput) -> Vec<LabelVector> {
    out.labels.iter().map(|(_, l)| l.clone()).collect()
}

fn main() -> Result<(), Box<dyn Error>> {
    let taxonomy = Taxonomy::hallmarks();
    let data = complementary_channels(400, 7);
    let [ch1, ch2, ch3] = &data.channels;
    let features = assemble_features(ch1, ch2, ch3, &data.probabilities)?;
    println!("features: {} rows x {} columns", features.ids.len(), features.values.ncols());

    let ids: Vec<&str> = data.ids.iter().map(String::as_str).collect();
    let folds = stratified_kfold_indices(&data.gold, &ids, 5, 7)?;
    let x = SparseMatrix::from_dense(features.values.view());
    let transformation = TransformationKind::ClassifierChains.with_labels(taxonomy.len());
    let stacked = cross_val_predict(&x, &data.gold, &folds, &transformation, &LinearHyperparams::default())?;

    for (name, out) in [("channel1", ch1), ("channel2", ch2), ("channel3", ch3)] {
        println!("{name:<10} {:.3}", example_f1(&taxonomy, &rows(out), &data.gold));
    }
    let vote = hard_vote(ch1, ch2, ch3)?;
    println!("{:<10} {:.3}", "hard-vote", example_f1(&taxonomy, &rows(&vote), &data.gold));
    println!("{:<10} {:.3}", "stacked", example_f1(&taxonomy, &stacked, &data.gold));
    Ok(())
}
