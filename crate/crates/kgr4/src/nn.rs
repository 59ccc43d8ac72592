//! Shared neural-net plumbing: vocabulary with character fallback, parameter
//! sets, Adam, and checkpoint serialization.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Kgr4Error, Result};

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const SEP: &str = "<sep>";
pub const CONCEPTS: &str = "<concepts>";
pub const PROTO: &str = "<proto>";
pub const CDELIM: &str = "<cdelim>";
pub const UNK_CHAR: &str = "<unkch>";
pub const END_WORD: &str = "</w>";

const SPECIALS: &[&str] = &[PAD, BOS, EOS, SEP, CONCEPTS, PROTO, CDELIM, UNK_CHAR, END_WORD];

/// Word-level vocabulary with character fallback. Out-of-vocabulary words are
/// encoded as a run of character tokens terminated by [`END_WORD`], so the
/// models keep an open vocabulary without byte-pair encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Build from word forms (surface tokens plus lemmas). Character tokens
    /// cover every character occurring in the words plus ASCII lowercase.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut word_set: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        let mut char_set: std::collections::BTreeSet<char> = ('a'..='z').collect();
        for w in words {
            if w.is_empty() {
                continue;
            }
            word_set.insert(w.to_string());
            char_set.extend(w.chars());
        }
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(char_set.into_iter().map(|c| format!("#{c}")));
        tokens.extend(word_set);
        let mut v = Vocab {
            tokens,
            index: BTreeMap::new(),
        };
        v.rebuild_index();
        v
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn special(&self, token: &str) -> usize {
        self.index[token]
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    fn is_char_token(&self, id: usize) -> bool {
        self.tokens[id].starts_with('#') && self.tokens[id].len() > 1
    }

    /// Encode one word: a single id when known, character fallback otherwise.
    pub fn encode_word(&self, word: &str) -> Vec<usize> {
        if let Some(id) = self.id(word) {
            return vec![id];
        }
        let mut ids = Vec::new();
        for c in word.chars() {
            let key = format!("#{c}");
            ids.push(self.id(&key).unwrap_or_else(|| self.special(UNK_CHAR)));
        }
        ids.push(self.special(END_WORD));
        ids
    }

    pub fn encode_words<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Vec<usize> {
        words.into_iter().flat_map(|w| self.encode_word(w)).collect()
    }

    /// Decode ids back to a token list, merging character runs into words.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        let end_word = self.special(END_WORD);
        let mut words = Vec::new();
        let mut pending = String::new();
        for &id in ids {
            if self.is_char_token(id) {
                pending.push_str(&self.tokens[id][1..]);
            } else if id == end_word {
                if !pending.is_empty() {
                    words.push(std::mem::take(&mut pending));
                }
            } else {
                if !pending.is_empty() {
                    words.push(std::mem::take(&mut pending));
                }
                if !SPECIALS.contains(&self.tokens[id].as_str()) {
                    words.push(self.tokens[id].clone());
                }
            }
        }
        if !pending.is_empty() {
            words.push(pending);
        }
        words
    }

    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0]);
        }
        hex_digest(hasher)
    }
}

pub fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex_digest(h)
}

/// Named, ordered parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub values: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Array2<f64> {
        &self.values[idx]
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Xavier-style uniform init.
pub fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Adam with per-parameter state. Deterministic given the gradient stream.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.values.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
            v: params.values.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Array2<f64>]) {
        self.t += 1;
        let b1c = 1.0 - self.beta1.powi(self.t as i32);
        let b2c = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.values.len() {
            let g = &grads[i];
            self.m[i] = &self.m[i] * self.beta1 + g * (1.0 - self.beta1);
            self.v[i] = &self.v[i] * self.beta2 + &g.mapv(|x| x * x) * (1.0 - self.beta2);
            let mhat = &self.m[i] / b1c;
            let vhat = &self.v[i] / b2c;
            let update = mhat / (vhat.mapv(f64::sqrt) + self.eps);
            params.values[i] = &params.values[i] - &(update * self.lr);
        }
    }
}

/// Zero-filled gradient accumulator matching a parameter set.
pub fn zero_grads(params: &ParamSet) -> Vec<Array2<f64>> {
    params.values.iter().map(|p| Array2::zeros(p.raw_dim())).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SerializedParam {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// On-disk checkpoint: parameter blob plus JSON metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub vocab_hash: String,
    pub train_data_hash: String,
    pub vocab: Vocab,
    params: Vec<SerializedParam>,
}

impl Checkpoint {
    pub fn new(
        kind: &str,
        config: serde_json::Value,
        vocab: &Vocab,
        train_data_hash: &str,
        params: &ParamSet,
    ) -> Checkpoint {
        let serialized = params
            .names
            .iter()
            .zip(&params.values)
            .map(|(name, v)| SerializedParam {
                name: name.clone(),
                rows: v.nrows(),
                cols: v.ncols(),
                data: v.iter().copied().collect(),
            })
            .collect();
        Checkpoint {
            kind: kind.to_string(),
            config,
            vocab_hash: vocab.hash(),
            train_data_hash: train_data_hash.to_string(),
            vocab: vocab.clone(),
            params: serialized,
        }
    }

    pub fn params(&self) -> Result<ParamSet> {
        let mut set = ParamSet::new();
        for p in &self.params {
            if p.data.len() != p.rows * p.cols {
                return Err(Kgr4Error::Checkpoint(format!(
                    "parameter {} has {} values for shape {}x{}",
                    p.name,
                    p.data.len(),
                    p.rows,
                    p.cols
                )));
            }
            let arr = Array2::from_shape_vec((p.rows, p.cols), p.data.clone())
                .map_err(|e| Kgr4Error::Checkpoint(e.to_string()))?;
            set.add(p.name.clone(), arr);
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let mut ckpt: Checkpoint = serde_json::from_str(&text)?;
        ckpt.vocab.rebuild_index();
        if ckpt.vocab.hash() != ckpt.vocab_hash {
            return Err(Kgr4Error::Checkpoint(
                "vocab hash does not match checkpoint metadata".into(),
            ));
        }
        Ok(ckpt)
    }
}

/// Shared early-stopping config for all trainable modules.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// evaluate held-out loss every this many steps
    pub eval_every: usize,
    /// stop after this many evaluations without improvement
    pub patience: usize,
    /// fraction of the dataset held out for early stopping
    pub holdout_frac: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 300,
            batch_size: 8,
            lr: 1e-3,
            eval_every: 50,
            patience: 3,
            holdout_frac: 0.1,
            seed: 0,
        }
    }
}

/// Deterministic train/holdout split: every ceil(1/frac)-th index held out,
/// at least one on each side when the data allows it.
pub fn split_holdout(n: usize, frac: f64) -> (Vec<usize>, Vec<usize>) {
    if n < 2 || frac <= 0.0 {
        return ((0..n).collect(), Vec::new());
    }
    let stride = (1.0 / frac).ceil().max(2.0) as usize;
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for i in 0..n {
        if i % stride == stride - 1 {
            holdout.push(i);
        } else {
            train.push(i);
        }
    }
    if holdout.is_empty() {
        holdout.push(train.pop().unwrap());
    }
    (train, holdout)
}
