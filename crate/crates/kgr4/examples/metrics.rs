//! The evaluation toolbox: concept coverage, corpus BLEU-4, repeated-ngram
//! rate, unknown-word rate, difficulty bucketing, and rethink selection.

use std::path::Path;

use kgr4::corpus::{read_concept_graph, ConceptSet};
use kgr4::eval::{
    bleu4, coverage, difficulty_bucket, rep_ngram, rethink_select, unk_words, ScoredCandidate,
};
use kgr4::text::{Lexicon, Sentence};

fn main() -> kgr4::Result<()> {
    let lexicon = Lexicon::bundled();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");

    let concepts = ConceptSet::from_raw(
        &["man".into(), "wash".into(), "dish".into()],
        &lexicon,
    )?;
    let good = Sentence::analyze("a", "a man washes the dishes in the sink", &lexicon);
    let partial = Sentence::analyze("b", "a man sits at the table", &lexicon);
    println!("coverage(good)    = {:.1}%", coverage(&concepts, &good));
    println!("coverage(partial) = {:.1}%", coverage(&concepts, &partial));

    let hyp = vec![good.tokens.clone()];
    let refs =
        vec![vec![Sentence::analyze("r", "the man washes the dishes in his sink", &lexicon).tokens]];
    println!("bleu4             = {:.2}", bleu4(&hyp, &refs)?);

    let sents = vec![
        Sentence::analyze("0", "a man washing in a sink a sink", &lexicon),
        good.clone(),
    ];
    println!("rep_2gram         = {:.1}%", rep_ngram(&sents, 2)?);

    let known = ["a", "man", "washes", "the", "dishes", "in", "sink"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let with_unk = vec![good.clone(), Sentence::analyze("u", "a man zorgles", &lexicon)];
    println!("unk_words         = {:.1}%", unk_words(&with_unk, &known)?);

    // difficulty buckets over the bundled concept graph
    let graph = read_concept_graph(&data.join("concept_graph.tsv"))?;
    let five = ConceptSet::from_raw(
        &["man".into(), "wash".into(), "dish".into(), "kitchen".into(), "sink".into()],
        &lexicon,
    )?;
    println!(
        "difficulty({{man,wash,dish,kitchen,sink}}) = {:?}",
        difficulty_bucket(&five, &graph)?
    );

    // rethink: highest score wins, ties break toward the lower lambda
    let candidates = vec![
        ScoredCandidate { sentence: partial, lambda: 1.0, score: 0.42 },
        ScoredCandidate { sentence: good, lambda: 0.1, score: 0.91 },
    ];
    let best = rethink_select(&candidates)?;
    println!("rethink picks: {}", candidates[best].sentence.text);
    Ok(())
}
