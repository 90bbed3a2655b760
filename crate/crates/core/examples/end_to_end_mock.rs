//! Every pipeline stage in order, offline, on the 100-document fixture.
//!
//! cargo run --release --example end_to_end_mock

use std::error::Error;

use quadmltc::harness::{Harness, RunConfig, RunOptions};
use quadmltc::postprocess::Source;

fn main() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let root = env!("CARGO_MANIFEST_DIR");
    let mut config = RunConfig::new(format!("{root}/fixtures/hoc_synthetic_100.jsonl"));
    config.exemplar_pool = Some(format!("{root}/fixtures/exemplar_pool.jsonl").into());
    config.sample_sizes = vec![50, 100];
    config.output_dir = dir.path().to_path_buf();
    let options = RunOptions {
        mock: true,
        ..Default::default()
    };
    let mut harness = Harness::open(config, options)?;

    harness.sample()?;
    for source in [Source::Channel1, Source::Channel2, Source::Channel3, Source::Bart, Source::FewShot3] {
        harness.classify(source)?;
    }
    harness.features()?;
    harness.train_meta(true)?;
    harness.predict(None)?;
    print!("{}", harness.evaluate()?.to_markdown());
    print!("{}", harness.ablate()?.to_markdown());
    harness.replicate(5)?;
    print!("{}", harness.stats()?.to_markdown());
    println!("\n{} artifacts recorded in {}", harness.manifest().artifacts.len(), dir.path().display());
    Ok(())
}
