//! Full pipeline over the bundled toy dataset: ingest, index, scorer,
//! pretraining, retrieval, mixture finetuning, refiner, rethink selection,
//! and evaluation. Reruns reuse finished stages from the run directory.

use std::path::Path;

use kgr4::pipeline::{run, PipelineConfig};
use kgr4::text::Lexicon;

fn main() -> kgr4::Result<()> {
    env_logger::init();
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut config = PipelineConfig::from_toml_file(&root.join("data/toy/config.toml"))?;
    // the bundled config uses workspace-relative paths; anchor them here so
    // the example works from any working directory
    let data = root.join("data/toy");
    config.paths.ext_corpus = data.join("ext_corpus.jsonl");
    config.paths.train_pairs = data.join("train_pairs.jsonl");
    config.paths.dev_pairs = data.join("dev_pairs.jsonl");
    config.paths.concept_graph = Some(data.join("concept_graph.tsv"));
    config.paths.out_dir = std::env::temp_dir().join("kgr4-example-runs");

    let lexicon = Lexicon::bundled();
    let outcome = run(&config, &lexicon)?;

    println!("run dir: {}\n", outcome.run_dir.display());
    print!("{}", outcome.report.to_table());
    println!("\nsample predictions:");
    for p in outcome.predictions.iter().take(5) {
        println!("  [{:>3}] {:<40} -> {}", p.lambda, p.concepts.join(","), p.prediction);
    }
    Ok(())
}
