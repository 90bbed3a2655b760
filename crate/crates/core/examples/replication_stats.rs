//! Descriptive statistics, pairwise t-tests and one-way ANOVA over replication scores.
//!
//! cargo run --example replication_stats

use std::error::Error;

use quadmltc::stats::{ReplicationSet, StatsReport, TTestKind};

fn main() -> Result<(), Box<dyn Error>> {
    let sets = [
        ReplicationSet::new("stacked", vec![0.842, 0.851, 0.838, 0.847, 0.855]),
        ReplicationSet::new("tfidf-linsvm", vec![0.612, 0.598, 0.621, 0.605, 0.617]),
        ReplicationSet::new("hard-vote", vec![0.781, 0.781, 0.781, 0.781, 0.781]),
    ];
    for kind in [TTestKind::Welch, TTestKind::Pooled] {
        let report = StatsReport::build(&sets, "stacked", kind)?;
        println!("## {kind}\n\n{}", report.to_markdown());
    }
    Ok(())
}
