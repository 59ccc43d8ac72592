//! Ingest the bundled corpus, build the inverted lemma index, and run a
//! rough concept-match retrieval.

use std::path::Path;

use kgr4::corpus::{ingest, ConceptSet, CorpusFormat};
use kgr4::index::{build_index, rough_search};
use kgr4::text::Lexicon;

fn main() -> kgr4::Result<()> {
    let lexicon = Lexicon::bundled();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");

    let corpus = ingest(&data.join("ext_corpus.jsonl"), CorpusFormat::Jsonl, &lexicon)?;
    println!("corpus: {} sentences, hash {}", corpus.len(), corpus.hash());

    let index = build_index(&corpus);
    println!("index hash: {}", index.structural_hash());

    let concepts = ConceptSet::from_raw(
        &["dog".into(), "ball".into(), "park".into()],
        &lexicon,
    )?;
    println!("\ntop matches for {{dog, ball, park}}:");
    for i in rough_search(&index, &corpus, &concepts, 5) {
        println!("  {}", corpus.get(i).text);
    }
    Ok(())
}
