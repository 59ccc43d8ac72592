//! Synthetic error injection (repetition and misspelling) and the denoising
//! refiner trained to undo it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Kgr4Error, Result};
use crate::nn::TrainConfig;
use crate::seq2seq::{train_nll, DecodeConfig, Seq2SeqModel};
use crate::text::{Lexicon, Sentence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// fraction of corpus sentences that get perturbed
    pub instance_rate: f64,
    /// fraction of perturbed sentences that get misspelling (rest repetition)
    pub misspell_share: f64,
    /// per-character deletion probability for misspelling
    pub char_removal_rate: f64,
    /// per-space deletion probability for misspelling
    pub space_removal_rate: f64,
    /// inclusive token-span length range for repetition
    pub rep_span_min: usize,
    pub rep_span_max: usize,
    /// resample until at least one deletion happened (misspelling)
    pub guarantee_deletion: bool,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            instance_rate: 0.05,
            misspell_share: 0.5,
            char_removal_rate: 0.01,
            space_removal_rate: 0.10,
            rep_span_min: 1,
            rep_span_max: 4,
            guarantee_deletion: true,
            seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("instance_rate", self.instance_rate),
            ("misspell_share", self.misspell_share),
            ("char_removal_rate", self.char_removal_rate),
            ("space_removal_rate", self.space_removal_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Kgr4Error::InvalidArgument(format!(
                    "{name} must be in [0, 1], got {rate}"
                )));
            }
        }
        if self.rep_span_min < 1 || self.rep_span_max < self.rep_span_min {
            return Err(Kgr4Error::InvalidArgument(
                "rep_span range must satisfy 1 <= min <= max".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    Repetition,
    Misspelling,
    /// unperturbed pair (clean, clean), kept so the refiner learns to
    /// preserve correct text
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedPair {
    pub clean: Sentence,
    pub corrupted: Sentence,
    pub kind: ErrorKind,
    /// (start, len) of the duplicated token span, for invertibility checks
    pub rep_witness: Option<(usize, usize)>,
}

/// Inject one error of the requested kind into a sentence.
pub fn perturb(
    sentence: &Sentence,
    kind: ErrorKind,
    spec: &PerturbationSpec,
    rng: &mut ChaCha8Rng,
    lexicon: &Lexicon,
) -> Result<PerturbedPair> {
    spec.validate()?;
    match kind {
        ErrorKind::Repetition => {
            if sentence.tokens.len() < spec.rep_span_min {
                return Err(Kgr4Error::InvalidArgument(format!(
                    "repetition needs at least {} tokens, sentence has {}",
                    spec.rep_span_min,
                    sentence.tokens.len()
                )));
            }
            let max_span = spec.rep_span_max.min(sentence.tokens.len());
            let span_len = rng.gen_range(spec.rep_span_min..=max_span);
            let start = rng.gen_range(0..=sentence.tokens.len() - span_len);
            let mut tokens = sentence.tokens.clone();
            let span: Vec<String> = tokens[start..start + span_len].to_vec();
            // duplicate immediately after the original span
            for (i, tok) in span.into_iter().enumerate() {
                tokens.insert(start + span_len + i, tok);
            }
            let corrupted = Sentence::analyze(
                format!("{}-rep", sentence.id),
                &tokens.join(" "),
                lexicon,
            );
            Ok(PerturbedPair {
                clean: sentence.clone(),
                corrupted,
                kind,
                rep_witness: Some((start, span_len)),
            })
        }
        ErrorKind::Misspelling => {
            if sentence.text.chars().count() < 2 {
                return Err(Kgr4Error::InvalidArgument(
                    "misspelling needs at least 2 characters".into(),
                ));
            }
            loop {
                let mut out = String::with_capacity(sentence.text.len());
                let mut deleted = 0usize;
                for ch in sentence.text.chars() {
                    let rate = if ch == ' ' {
                        spec.space_removal_rate
                    } else {
                        spec.char_removal_rate
                    };
                    if rng.gen_range(0.0..1.0) < rate {
                        deleted += 1;
                    } else {
                        out.push(ch);
                    }
                }
                if deleted == 0 && spec.guarantee_deletion {
                    continue;
                }
                let corrupted =
                    Sentence::analyze(format!("{}-mis", sentence.id), &out, lexicon);
                return Ok(PerturbedPair {
                    clean: sentence.clone(),
                    corrupted,
                    kind,
                    rep_witness: None,
                });
            }
        }
        ErrorKind::Identity => Ok(PerturbedPair {
            clean: sentence.clone(),
            corrupted: sentence.clone(),
            kind,
            rep_witness: None,
        }),
    }
}

/// Build the refiner training set: `instance_rate` of sentences perturbed
/// (misspell_share of those with misspelling, rest repetition), everything
/// else emitted as identity pairs.
pub fn build_refiner_dataset(
    ext: &crate::corpus::Corpus,
    spec: &PerturbationSpec,
    lexicon: &Lexicon,
) -> Result<Vec<PerturbedPair>> {
    if ext.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    spec.validate()?;
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(ext.len());
    for sentence in &ext.sentences {
        let perturbed = rng.gen_range(0.0..1.0) < spec.instance_rate;
        if !perturbed {
            out.push(perturb(sentence, ErrorKind::Identity, spec, &mut rng, lexicon)?);
            continue;
        }
        let kind = if rng.gen_range(0.0..1.0) < spec.misspell_share {
            ErrorKind::Misspelling
        } else {
            ErrorKind::Repetition
        };
        match perturb(sentence, kind, spec, &mut rng, lexicon) {
            Ok(pair) => out.push(pair),
            Err(_) => {
                // sentence too short for the drawn error type
                out.push(perturb(sentence, ErrorKind::Identity, spec, &mut rng, lexicon)?)
            }
        }
    }
    Ok(out)
}

fn pair_ids(model: &Seq2SeqModel, pair: &PerturbedPair) -> (Vec<usize>, Vec<usize>) {
    let src = model
        .vocab
        .encode_words(pair.corrupted.tokens.iter().map(|t| t.as_str()));
    let tgt = model
        .vocab
        .encode_words(pair.clean.tokens.iter().map(|t| t.as_str()));
    (src, tgt)
}

/// Train the denoising model to recover clean sentences from corrupted ones.
pub fn train_refiner(
    model: &mut Seq2SeqModel,
    dataset: &[PerturbedPair],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if dataset.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    let examples: Vec<(Vec<usize>, Vec<usize>)> = dataset
        .iter()
        .filter(|p| !p.clean.is_empty())
        .map(|p| pair_ids(model, p))
        .collect();
    if examples.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    train_nll(model, &examples, cfg, rng)
}

/// Beam-decode a corrected sentence. Empty input maps to empty output.
pub fn refine(
    model: &Seq2SeqModel,
    sentence: &Sentence,
    decode: DecodeConfig,
    lexicon: &Lexicon,
) -> Result<Sentence> {
    if sentence.is_empty() {
        return Ok(Sentence::sentinel());
    }
    let src = model
        .vocab
        .encode_words(sentence.tokens.iter().map(|t| t.as_str()));
    let ids = model.generate(&src, decode)?;
    let words = model.vocab.decode(&ids);
    if words.is_empty() {
        return Ok(Sentence::sentinel());
    }
    Ok(Sentence::analyze(
        format!("{}-refined", sentence.id),
        &words.join(" "),
        lexicon,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    clean: String,
    corrupted: String,
    kind: String,
}

fn kind_tag(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Repetition => "REPETITION",
        ErrorKind::Misspelling => "MISSPELLING",
        ErrorKind::Identity => "IDENTITY",
    }
}

fn parse_kind(s: &str) -> Option<ErrorKind> {
    match s {
        "REPETITION" => Some(ErrorKind::Repetition),
        "MISSPELLING" => Some(ErrorKind::Misspelling),
        "IDENTITY" => Some(ErrorKind::Identity),
        _ => None,
    }
}

pub fn write_pairs(path: &Path, pairs: &[PerturbedPair]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for p in pairs {
        let rec = PairRecord {
            clean: p.clean.text.clone(),
            corrupted: p.corrupted.text.clone(),
            kind: kind_tag(p.kind).to_string(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_pairs(path: &Path, lexicon: &Lexicon) -> Result<Vec<PerturbedPair>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(line).map_err(|e| Kgr4Error::Malformed {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        let kind = parse_kind(&rec.kind).ok_or_else(|| Kgr4Error::Malformed {
            line: lineno + 1,
            msg: format!("unknown error kind {:?}", rec.kind),
        })?;
        out.push(PerturbedPair {
            clean: Sentence::analyze(format!("{lineno}-c"), &rec.clean, lexicon),
            corrupted: Sentence::analyze(format!("{lineno}-x"), &rec.corrupted, lexicon),
            kind,
            rep_witness: None,
        });
    }
    Ok(out)
}
