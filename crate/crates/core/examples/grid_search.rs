//! Cross-validated grid over loss and multi-label transformation on a task
//! where one label depends on another.
//!
//! cargo run --example grid_search

use std::error::Error;

use quadmltc::corpus::stratified_kfold_indices;
use quadmltc::ensemble::{grid_select, LinearHyperparams, LossKind, SparseMatrix, TransformationKind};
use quadmltc::synthetic::chain_dependency;

fn main() -> Result<(), Box<dyn Error>> {
    let data = chain_dependency(20, 7);
    let ids: Vec<&str> = data.ids.iter().map(String::as_str).collect();
    let folds = stratified_kfold_indices(&data.gold, &ids, 5, 7)?;
    let x = SparseMatrix::from_dense(data.features.view());
    let report = grid_select(
        &x,
        &data.gold,
        &[LossKind::Hinge, LossKind::Logistic],
        &TransformationKind::ALL,
        &folds,
        &LinearHyperparams::default(),
    )?;
    print!("{}", report.to_markdown());
    let best = report.best();
    println!("\nselected: {} / {:?}", best.loss, best.transformation);
    Ok(())
}
