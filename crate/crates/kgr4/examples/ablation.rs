//! Cumulative stage ablation: run the pipeline once per toggle ladder row
//! (baseline, +pretraining, +retrieval, ...) and print the metric table.

use std::path::Path;

use kgr4::pipeline::{ablation, ablation_table, cumulative_variants, PipelineConfig};
use kgr4::text::Lexicon;

fn main() -> kgr4::Result<()> {
    env_logger::init();
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut config = PipelineConfig::from_toml_file(&root.join("data/toy/config.toml"))?;
    let data = root.join("data/toy");
    config.paths.ext_corpus = data.join("ext_corpus.jsonl");
    config.paths.train_pairs = data.join("train_pairs.jsonl");
    config.paths.dev_pairs = data.join("dev_pairs.jsonl");
    config.paths.concept_graph = Some(data.join("concept_graph.tsv"));
    config.paths.out_dir = std::env::temp_dir().join("kgr4-ablation-runs");

    let lexicon = Lexicon::bundled();
    let rows = ablation(&config, &cumulative_variants(), &lexicon)?;
    print!("{}", ablation_table(&rows));
    Ok(())
}
