//! The prototype-editing generator: input serialization, the pretraining NLL
//! objective, the edit/copy mixture objective, and decoding.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ConceptSet, InstanceKind, TrainingInstance};
use crate::error::{Kgr4Error, Result};
use crate::nn::{self, zero_grads, Adam, TrainConfig, Vocab};
use crate::seq2seq::{DecodeConfig, Seq2SeqModel};
use crate::text::{Lexicon, Sentence};

/// λ in [0, 1] balancing the edit and copy objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixWeight(f64);

impl MixWeight {
    pub fn new(lambda: f64) -> Result<MixWeight> {
        if !(0.0..=1.0).contains(&lambda) || lambda.is_nan() {
            return Err(Kgr4Error::InvalidArgument(format!(
                "lambda must be in [0, 1], got {lambda}"
            )));
        }
        Ok(MixWeight(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Generator input: a concept set plus exactly three prototypes, serialized
/// as `<concepts> x1 .. xN <proto> p1 <proto> p2 <proto> p3`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorInput {
    pub concepts: ConceptSet,
    pub prototypes: Vec<Sentence>,
}

impl GeneratorInput {
    pub fn new(concepts: ConceptSet, prototypes: Vec<Sentence>) -> Result<GeneratorInput> {
        if prototypes.len() != 3 {
            return Err(Kgr4Error::InvalidArgument(format!(
                "expected exactly 3 prototypes, got {}",
                prototypes.len()
            )));
        }
        Ok(GeneratorInput {
            concepts,
            prototypes,
        })
    }

    pub fn serialize(&self, vocab: &Vocab) -> Vec<usize> {
        let mut ids = vec![vocab.special(nn::CONCEPTS)];
        for c in self.concepts.iter() {
            ids.extend(vocab.encode_word(c));
        }
        for p in &self.prototypes {
            ids.push(vocab.special(nn::PROTO));
            ids.extend(vocab.encode_words(p.tokens.iter().map(|t| t.as_str())));
        }
        ids
    }

    /// Inverse of `serialize` at word level: concept lemmas plus the three
    /// prototype token lists.
    pub fn deserialize(ids: &[usize], vocab: &Vocab) -> Result<(Vec<String>, Vec<Vec<String>>)> {
        let concepts_marker = vocab.special(nn::CONCEPTS);
        let proto_marker = vocab.special(nn::PROTO);
        if ids.first() != Some(&concepts_marker) {
            return Err(Kgr4Error::InvalidArgument(
                "serialized input must start with the concepts marker".into(),
            ));
        }
        let mut segments: Vec<Vec<usize>> = vec![Vec::new()];
        for &id in &ids[1..] {
            if id == proto_marker {
                segments.push(Vec::new());
            } else {
                segments.last_mut().unwrap().push(id);
            }
        }
        if segments.len() != 4 {
            return Err(Kgr4Error::InvalidArgument(format!(
                "expected 3 prototype segments, found {}",
                segments.len() - 1
            )));
        }
        let concepts = vocab.decode(&segments[0]);
        let prototypes = segments[1..].iter().map(|s| vocab.decode(s)).collect();
        Ok((concepts, prototypes))
    }
}

fn target_ids(vocab: &Vocab, target: &Sentence) -> Result<Vec<usize>> {
    if target.is_empty() {
        return Err(Kgr4Error::EmptyTarget);
    }
    Ok(vocab.encode_words(target.tokens.iter().map(|t| t.as_str())))
}

/// Teacher-forced token-sum NLL of the target given the serialized input.
pub fn nll_loss(model: &Seq2SeqModel, input: &GeneratorInput, target: &Sentence) -> Result<f64> {
    let src = input.serialize(&model.vocab);
    let tgt = target_ids(&model.vocab, target)?;
    model.nll_loss(&src, &tgt)
}

fn copy_input(input: &GeneratorInput, target: &Sentence, slot: usize) -> GeneratorInput {
    let mut prototypes = input.prototypes.clone();
    prototypes[slot] = target.clone();
    GeneratorInput {
        concepts: input.concepts.clone(),
        prototypes,
    }
}

/// Joint objective (1-λ)·L_edit + λ·L_copy. L_copy replaces one uniformly
/// drawn prototype slot with the target. The slot is always drawn so the rng
/// stream is identical for every λ; at the endpoints the other side is not
/// evaluated and the returned value equals the active loss bitwise.
pub fn retrospective_loss(
    model: &Seq2SeqModel,
    input: &GeneratorInput,
    target: &Sentence,
    lambda: MixWeight,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let slot = rng.gen_range(0..3usize);
    let lam = lambda.value();
    if lam == 0.0 {
        return nll_loss(model, input, target);
    }
    if lam == 1.0 {
        return nll_loss(model, &copy_input(input, target, slot), target);
    }
    let l_edit = nll_loss(model, input, target)?;
    let l_copy = nll_loss(model, &copy_input(input, target, slot), target)?;
    Ok((1.0 - lam) * l_edit + lam * l_copy)
}

/// Retrospective loss plus parameter gradients; same rng protocol as
/// `retrospective_loss`.
pub fn retrospective_loss_and_grads(
    model: &Seq2SeqModel,
    input: &GeneratorInput,
    target: &Sentence,
    lambda: MixWeight,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let slot = rng.gen_range(0..3usize);
    let lam = lambda.value();
    let tgt = target_ids(&model.vocab, target)?;
    if lam == 0.0 {
        return model.nll_loss_and_grads(&input.serialize(&model.vocab), &tgt);
    }
    if lam == 1.0 {
        let src = copy_input(input, target, slot).serialize(&model.vocab);
        return model.nll_loss_and_grads(&src, &tgt);
    }
    let (le, ge) = model.nll_loss_and_grads(&input.serialize(&model.vocab), &tgt)?;
    let src_copy = copy_input(input, target, slot).serialize(&model.vocab);
    let (lc, gc) = model.nll_loss_and_grads(&src_copy, &tgt)?;
    let mut grads = ge;
    for (g, c) in grads.iter_mut().zip(gc) {
        g.mapv_inplace(|x| x * (1.0 - lam));
        *g += &(c * lam);
    }
    Ok(((1.0 - lam) * le + lam * lc, grads))
}

fn instance_input(inst: &TrainingInstance) -> Result<GeneratorInput> {
    GeneratorInput::new(inst.concepts.clone(), inst.prototypes.clone())
}

/// Pretrain on PRETRAIN instances with the plain NLL objective.
pub fn pretrain(
    model: &mut Seq2SeqModel,
    dataset: &[TrainingInstance],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if dataset.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    if let Some(bad) = dataset.iter().find(|i| i.kind != InstanceKind::Pretrain) {
        return Err(Kgr4Error::InvalidArgument(format!(
            "pretraining expects PRETRAIN instances, found {:?}",
            bad.kind
        )));
    }
    let mut examples = Vec::with_capacity(dataset.len());
    for inst in dataset {
        let src = instance_input(inst)?.serialize(&model.vocab);
        let tgt = target_ids(&model.vocab, &inst.target)?;
        examples.push((src, tgt));
    }
    crate::seq2seq::train_nll(model, &examples, cfg, rng)
}

/// Finetune on EDIT + AUGMENTED instances with the λ mixture. The copy-slot
/// replacement is re-drawn on every batch visit of an example.
pub fn finetune(
    model: &mut Seq2SeqModel,
    dataset: &[TrainingInstance],
    lambda: MixWeight,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if dataset.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    let mut prepared = Vec::with_capacity(dataset.len());
    for inst in dataset {
        if !matches!(inst.kind, InstanceKind::Edit | InstanceKind::Augmented) {
            return Err(Kgr4Error::InvalidArgument(format!(
                "finetuning expects EDIT/AUGMENTED instances, found {:?}",
                inst.kind
            )));
        }
        prepared.push((instance_input(inst)?, inst.target.clone()));
    }
    let (train_idx, holdout_idx) = nn::split_holdout(prepared.len(), cfg.holdout_frac);
    let holdout: Vec<&(GeneratorInput, Sentence)> =
        holdout_idx.iter().map(|&i| &prepared[i]).collect();
    // held-out metric: the same λ mixture as training, with a fixed-seed rng
    // so every evaluation draws identical copy slots and stays comparable
    let mean_holdout = |m: &Seq2SeqModel| -> Result<f64> {
        let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut total = 0.0;
        for (input, target) in &holdout {
            total += retrospective_loss(m, input, target, lambda, &mut eval_rng)?;
        }
        Ok(total / holdout.len().max(1) as f64)
    };

    let mut adam = Adam::new(&model.params, cfg.lr);
    let mut best_params = model.params.clone();
    let mut best_loss = if holdout.is_empty() {
        f64::INFINITY
    } else {
        mean_holdout(model)?
    };
    let mut bad_evals = 0usize;
    let mut order: Vec<usize> = train_idx;
    let mut cursor = 0usize;

    for step in 0..cfg.steps {
        let mut grads = zero_grads(&model.params);
        for _ in 0..cfg.batch_size {
            if cursor == 0 {
                use rand::seq::SliceRandom;
                order.shuffle(rng);
            }
            let (input, target) = &prepared[order[cursor]];
            cursor = (cursor + 1) % order.len();
            let (_, g) = retrospective_loss_and_grads(model, input, target, lambda, rng)?;
            for (acc, gi) in grads.iter_mut().zip(g) {
                *acc += &gi;
            }
        }
        let scale = 1.0 / cfg.batch_size as f64;
        for g in &mut grads {
            g.mapv_inplace(|x| x * scale);
        }
        adam.step(&mut model.params, &grads);

        if !holdout.is_empty() && (step + 1) % cfg.eval_every == 0 {
            let loss = mean_holdout(model)?;
            if loss < best_loss {
                best_loss = loss;
                best_params = model.params.clone();
                bad_evals = 0;
            } else {
                bad_evals += 1;
                if bad_evals >= cfg.patience {
                    break;
                }
            }
        }
    }
    if !holdout.is_empty() {
        let loss = mean_holdout(model)?;
        if loss < best_loss {
            best_params = model.params.clone();
        }
        model.params = best_params;
    }
    Ok(())
}

/// Beam-decode a sentence for the given input. A degenerate empty decode is
/// returned as an empty sentinel sentence with a logged warning.
pub fn generate(
    model: &Seq2SeqModel,
    input: &GeneratorInput,
    decode: DecodeConfig,
    lexicon: &Lexicon,
) -> Result<Sentence> {
    let src = input.serialize(&model.vocab);
    let ids = model.generate(&src, decode)?;
    let words = model.vocab.decode(&ids);
    if words.is_empty() {
        log::warn!("generator produced an empty sentence");
        return Ok(Sentence::sentinel());
    }
    Ok(Sentence::analyze("generated", &words.join(" "), lexicon))
}
