//! Pretrain the prototype-editing generator on pseudo-concept instances,
//! finetune it with the edit/copy mixture objective, and generate sentences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use kgr4::corpus::{build_pretrain_set, build_retrospective_augmentation, ingest, CorpusFormat};
use kgr4::generator::{finetune, generate, pretrain, GeneratorInput, MixWeight};
use kgr4::index::{build_index, retrieve_prototypes};
use kgr4::nn::{TrainConfig, Vocab};
use kgr4::seq2seq::{DecodeConfig, Seq2SeqConfig, Seq2SeqModel};
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

    let mut words = ext.word_forms();
    words.extend(train.word_forms());
    let vocab = Vocab::build(words.iter().map(|s| s.as_str()));

    let config = Seq2SeqConfig {
        layers: 1,
        embed_dim: 48,
        ff_dim: 96,
        ..Default::default()
    };
    let mut model = Seq2SeqModel::new(config, vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    // pretraining: pseudo concepts + rough prototypes -> original sentence
    let pretrain_set = build_pretrain_set(&ext, &index, 5, &mut rng)?;
    println!("pretraining on {} instances...", pretrain_set.len());
    let cfg = TrainConfig {
        steps: 500,
        lr: 3e-3,
        eval_every: 80,
        ..Default::default()
    };
    pretrain(&mut model, &pretrain_set, &cfg, &mut rng)?;

    // finetuning: edit instances plus retrospective augmentation
    let pairs = train.paired();
    let mut protos = Vec::new();
    for (concepts, target) in &pairs {
        protos.push(retrieve_prototypes(
            &index,
            &ext,
            concepts,
            None,
            100,
            Some(target.id.as_str()),
        )?);
    }
    let ft_set = build_retrospective_augmentation(&pairs, &protos, 5, &mut rng)?;
    println!("finetuning on {} instances...", ft_set.len());
    let ft_cfg = TrainConfig {
        steps: 300,
        lr: 3e-3,
        eval_every: 80,
        ..Default::default()
    };
    finetune(&mut model, &ft_set, MixWeight::new(0.1)?, &ft_cfg, &mut rng)?;

    // generate for a few held-out concept sets
    let dev = ingest(
        &data.join("dev_pairs.jsonl"),
        CorpusFormat::CommongenPairs,
        &lexicon,
    )?;
    for (concepts, target) in dev.paired().iter().take(5) {
        let p = retrieve_prototypes(&index, &ext, concepts, None, 100, None)?;
        let input = GeneratorInput::new(concepts.clone(), p.prototypes)?;
        let out = generate(&model, &input, DecodeConfig::default(), &lexicon)?;
        let list: Vec<&str> = concepts.iter().collect();
        println!("\nconcepts:  {}", list.join(", "));
        println!("generated: {}", out.text);
        println!("reference: {}", target.text);
    }
    Ok(())
}
