//! Corrupt corpus sentences with repetition and misspelling errors, train
//! the denoising refiner, and show it fixing fresh corruptions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use kgr4::corpus::{ingest, CorpusFormat};
use kgr4::nn::{TrainConfig, Vocab};
use kgr4::refiner::{
    build_refiner_dataset, perturb, refine, train_refiner, ErrorKind, PerturbationSpec,
};
use kgr4::seq2seq::{DecodeConfig, Seq2SeqConfig, Seq2SeqModel};
use kgr4::text::Lexicon;

fn main() -> kgr4::Result<()> {
    let lexicon = Lexicon::bundled();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let ext = ingest(&data.join("ext_corpus.jsonl"), CorpusFormat::Jsonl, &lexicon)?;

    // show the two error types on one sentence
    let spec = PerturbationSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = ext.get(0);
    let rep = perturb(s, ErrorKind::Repetition, &spec, &mut rng, &lexicon)?;
    let mis = perturb(s, ErrorKind::Misspelling, &spec, &mut rng, &lexicon)?;
    println!("clean:       {}", s.text);
    println!("repetition:  {}", rep.corrupted.text);
    println!("misspelling: {}", mis.corrupted.text);

    // train the refiner on the corpus-wide perturbed dataset
    let pairs = build_refiner_dataset(&ext, &spec, &lexicon)?;
    let corrupted = pairs.iter().filter(|p| p.kind != ErrorKind::Identity).count();
    println!("\ndataset: {} pairs, {corrupted} corrupted", pairs.len());

    let vocab = Vocab::build(ext.word_forms().iter().map(|s| s.as_str()));
    let config = Seq2SeqConfig {
        layers: 1,
        embed_dim: 48,
        ff_dim: 96,
        ..Default::default()
    };
    let mut model = Seq2SeqModel::new(config, vocab);
    let cfg = TrainConfig {
        steps: 400,
        lr: 3e-3,
        eval_every: 80,
        ..Default::default()
    };
    println!("training refiner...");
    train_refiner(&mut model, &pairs, &cfg, &mut rng)?;

    for sentence in ext.sentences.iter().skip(10).take(3) {
        let bad = perturb(sentence, ErrorKind::Repetition, &spec, &mut rng, &lexicon)?;
        let fixed = refine(&model, &bad.corrupted, DecodeConfig::default(), &lexicon)?;
        println!("\ncorrupted: {}", bad.corrupted.text);
        println!("refined:   {}", fixed.text);
        println!("clean:     {}", sentence.text);
    }
    Ok(())
}
