//! Example-based and label-based F1 on a handful of predictions.
//!
//! cargo run --example metrics_report

use std::error::Error;

use quadmltc::corpus::{LabelVector, Taxonomy};
use quadmltc::metrics::MetricsReport;

fn main() -> Result<(), Box<dyn Error>> {
    let taxonomy = Taxonomy::hallmarks();
    let v = |idx: &[usize]| LabelVector::from_indices(taxonomy.len(), idx);
    let gold = [v(&[0, 3]), v(&[1]), v(&[2, 5, 7]), v(&[9]), v(&[0])];
    let pred = [v(&[0]), v(&[1, 4]), v(&[2, 5, 7]), v(&[]), v(&[0, 3])];
    let report = MetricsReport::compute(&taxonomy, &pred, &gold, None)?;
    print!("{}", report.to_markdown("Five documents"));
    Ok(())
}
