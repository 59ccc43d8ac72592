//! Prototype retrieval: rough concept matching versus scorer re-ranking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use kgr4::corpus::{ingest, ConceptSet, CorpusFormat};
use kgr4::index::{build_index, retrieve_prototypes};
use kgr4::nn::{TrainConfig, Vocab};
use kgr4::scorer::{build_scorer_dataset, train_scorer, ScorerConfig};
use kgr4::text::Lexicon;

fn main() -> kgr4::Result<()> {
    let lexicon = Lexicon::bundled();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let ext = ingest(&data.join("ext_corpus.jsonl"), CorpusFormat::Jsonl, &lexicon)?;
    let train = ingest(
        &data.join("train_pairs.jsonl"),
        CorpusFormat::CommongenPairs,
        &lexicon,
    )?;
    let index = build_index(&ext);

    let concepts = ConceptSet::from_raw(
        &["man".into(), "wash".into(), "sink".into()],
        &lexicon,
    )?;

    println!("rough retrieval (concept-match ranking):");
    let rough = retrieve_prototypes(&index, &ext, &concepts, None, 100, None)?;
    for (p, s) in rough.prototypes.iter().zip(&rough.scores) {
        println!("  {s:.3}  {}", p.text);
    }

    // train a quick scorer on the paired data with sampled negatives
    let mut words = ext.word_forms();
    words.extend(train.word_forms());
    let vocab = Vocab::build(words.iter().map(|s| s.as_str()));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let examples = build_scorer_dataset(&train.paired(), &ext, 3, &mut rng)?;
    let cfg = TrainConfig {
        steps: 200,
        lr: 1e-2,
        ..Default::default()
    };
    let scorer = train_scorer(&examples, ScorerConfig::default(), &cfg, vocab, &mut rng)?;

    println!("\nscorer-ranked retrieval:");
    let ranked = retrieve_prototypes(&index, &ext, &concepts, Some(&scorer), 100, None)?;
    for (p, s) in ranked.prototypes.iter().zip(&ranked.scores) {
        println!("  {s:.3}  {}", p.text);
    }
    Ok(())
}
