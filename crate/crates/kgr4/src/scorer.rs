//! Trainable binary relevance classifier over (concept set, sentence) pairs.
//! Ranks retrieval candidates and selects the final output at the rethink
//! stage. Desk-scale architecture: bag of embeddings, mean pooling, one
//! hidden layer, sigmoid head.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Graph};
use crate::corpus::{ConceptSet, Corpus};
use crate::error::{Kgr4Error, Result};
use crate::nn::{self, init_matrix, zero_grads, Adam, ParamSet, TrainConfig, Vocab};
use crate::text::Sentence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            embed_dim: 32,
            hidden_dim: 32,
            max_len: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerExample {
    pub concepts: ConceptSet,
    pub sentence: Sentence,
    pub label: bool,
}

#[derive(Debug, Clone)]
pub struct Scorer {
    pub config: ScorerConfig,
    pub vocab: Vocab,
    pub params: ParamSet,
}

// parameter order: emb, w1, b1, w2, b2
const P_EMB: usize = 0;
const P_W1: usize = 1;
const P_B1: usize = 2;
const P_W2: usize = 3;
const P_B2: usize = 4;

impl Scorer {
    /// Fresh scorer. The head (w2, b2) is zero-initialized, so an untrained
    /// scorer outputs exactly 0.5 for any input.
    pub fn new(config: ScorerConfig, vocab: Vocab) -> Scorer {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        params.add("emb", init_matrix(&mut rng, vocab.len(), config.embed_dim));
        params.add("w1", init_matrix(&mut rng, config.embed_dim, config.hidden_dim));
        params.add("b1", Array2::zeros((1, config.hidden_dim)));
        params.add("w2", Array2::zeros((config.hidden_dim, 1)));
        params.add("b2", Array2::zeros((1, 1)));
        Scorer {
            config,
            vocab,
            params,
        }
    }

    /// Serialize (concepts, sentence) into token ids: concepts in sorted
    /// order joined by the concept delimiter, a separator, then the sentence.
    /// Truncation to max_len removes sentence tokens first.
    pub fn serialize_input(&self, concepts: &ConceptSet, sentence: &Sentence) -> Vec<usize> {
        let mut ids = Vec::new();
        for (i, c) in concepts.iter().enumerate() {
            if i > 0 {
                ids.push(self.vocab.special(nn::CDELIM));
            }
            ids.extend(self.vocab.encode_word(c));
        }
        ids.push(self.vocab.special(nn::SEP));
        let budget = self.config.max_len.saturating_sub(ids.len()).max(1);
        let mut sent_ids = self.vocab.encode_words(sentence.tokens.iter().map(|t| t.as_str()));
        sent_ids.truncate(budget);
        ids.extend(sent_ids);
        ids.truncate(self.config.max_len);
        ids
    }

    fn logit_graph(&self, ids: &[usize]) -> (Graph, usize, Vec<usize>) {
        let mut g = Graph::new();
        let param_nodes: Vec<usize> = self
            .params
            .values
            .iter()
            .map(|p| g.leaf(p.clone()))
            .collect();
        let embedded = g.gather_rows(param_nodes[P_EMB], ids);
        let pooled = g.mean_rows(embedded);
        let h = g.matmul(pooled, param_nodes[P_W1]);
        let h = g.add_row(h, param_nodes[P_B1]);
        let h = g.relu(h);
        let z = g.matmul(h, param_nodes[P_W2]);
        let z = g.add_row(z, param_nodes[P_B2]);
        (g, z, param_nodes)
    }

    /// Probability in (0, 1) that the sentence is relevant to the concepts.
    pub fn score(&self, concepts: &ConceptSet, sentence: &Sentence) -> Result<f64> {
        if concepts.is_empty() {
            return Err(Kgr4Error::EmptyConceptSet);
        }
        let ids = self.serialize_input(concepts, sentence);
        let (g, z, _) = self.logit_graph(&ids);
        Ok(sigmoid(g.scalar(z)))
    }

    pub fn checkpoint(&self, train_data_hash: &str) -> crate::nn::Checkpoint {
        crate::nn::Checkpoint::new(
            "scorer",
            serde_json::to_value(&self.config).expect("config serializes"),
            &self.vocab,
            train_data_hash,
            &self.params,
        )
    }

    pub fn from_checkpoint(ckpt: &crate::nn::Checkpoint) -> Result<Scorer> {
        let config: ScorerConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Kgr4Error::Checkpoint(e.to_string()))?;
        Ok(Scorer {
            config,
            vocab: ckpt.vocab.clone(),
            params: ckpt.params()?,
        })
    }

    /// BCE loss of one example, forward only.
    pub fn example_loss(&self, ex: &ScorerExample) -> Result<f64> {
        if ex.concepts.is_empty() {
            return Err(Kgr4Error::EmptyConceptSet);
        }
        let ids = self.serialize_input(&ex.concepts, &ex.sentence);
        let (mut g, z, _) = self.logit_graph(&ids);
        let loss = g.bce_with_logits(z, if ex.label { 1.0 } else { 0.0 });
        Ok(g.scalar(loss))
    }

    /// BCE loss and parameter gradients of one example.
    pub fn example_loss_and_grads(&self, ex: &ScorerExample) -> Result<(f64, Vec<Array2<f64>>)> {
        if ex.concepts.is_empty() {
            return Err(Kgr4Error::EmptyConceptSet);
        }
        let ids = self.serialize_input(&ex.concepts, &ex.sentence);
        let (mut g, z, param_nodes) = self.logit_graph(&ids);
        let loss = g.bce_with_logits(z, if ex.label { 1.0 } else { 0.0 });
        let value = g.scalar(loss);
        let grads = g.backward(loss);
        let out = param_nodes
            .iter()
            .zip(&self.params.values)
            .map(|(&node, p)| {
                grads[node]
                    .clone()
                    .unwrap_or_else(|| Array2::zeros(p.raw_dim()))
            })
            .collect();
        Ok((value, out))
    }

    pub fn mean_loss(&self, data: &[ScorerExample]) -> Result<f64> {
        let mut total = 0.0;
        for ex in data {
            total += self.example_loss(ex)?;
        }
        Ok(total / data.len().max(1) as f64)
    }

    pub fn accuracy(&self, data: &[ScorerExample]) -> Result<f64> {
        let mut correct = 0usize;
        for ex in data {
            let p = self.score(&ex.concepts, &ex.sentence)?;
            if (p > 0.5) == ex.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len().max(1) as f64)
    }
}

/// One positive per training pair plus `neg_ratio` negatives drawn uniformly
/// from the external corpus, never textually equal to the positive.
pub fn build_scorer_dataset(
    train: &[(ConceptSet, Sentence)],
    ext: &Corpus,
    neg_ratio: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ScorerExample>> {
    if neg_ratio == 0 {
        return Err(Kgr4Error::InvalidArgument("neg_ratio must be >= 1".into()));
    }
    if ext.len() < neg_ratio {
        return Err(Kgr4Error::CorpusTooSmall {
            need: neg_ratio,
            got: ext.len(),
        });
    }
    let mut out = Vec::with_capacity(train.len() * (neg_ratio + 1));
    for (concepts, target) in train {
        out.push(ScorerExample {
            concepts: concepts.clone(),
            sentence: target.clone(),
            label: true,
        });
        let mut chosen: Vec<usize> = Vec::with_capacity(neg_ratio);
        let mut attempts = 0usize;
        while chosen.len() < neg_ratio {
            attempts += 1;
            if attempts > 100 * neg_ratio + ext.len() {
                return Err(Kgr4Error::CorpusTooSmall {
                    need: neg_ratio,
                    got: ext.len(),
                });
            }
            let i = rng.gen_range(0..ext.len());
            if ext.sentences[i].text == target.text || chosen.contains(&i) {
                continue;
            }
            chosen.push(i);
        }
        for i in chosen {
            out.push(ScorerExample {
                concepts: concepts.clone(),
                sentence: ext.sentences[i].clone(),
                label: false,
            });
        }
    }
    Ok(out)
}

/// Minimize BCE with Adam and early stopping on a held-out split; returns the
/// best-validation checkpoint.
pub fn train_scorer(
    data: &[ScorerExample],
    config: ScorerConfig,
    train_config: &TrainConfig,
    vocab: Vocab,
    rng: &mut ChaCha8Rng,
) -> Result<Scorer> {
    let has_pos = data.iter().any(|e| e.label);
    let has_neg = data.iter().any(|e| !e.label);
    if !(has_pos && has_neg) {
        return Err(Kgr4Error::SingleLabelData);
    }
    let mut scorer = Scorer::new(config, vocab);
    let (train_idx, holdout_idx) = nn::split_holdout(data.len(), train_config.holdout_frac);
    let holdout: Vec<ScorerExample> = holdout_idx.iter().map(|&i| data[i].clone()).collect();

    let mut adam = Adam::new(&scorer.params, train_config.lr);
    let mut best_params = scorer.params.clone();
    let mut best_loss = if holdout.is_empty() {
        f64::INFINITY
    } else {
        scorer.mean_loss(&holdout)?
    };
    let mut bad_evals = 0usize;
    let mut order: Vec<usize> = train_idx.clone();
    let mut cursor = 0usize;

    for step in 0..train_config.steps {
        let mut grads = zero_grads(&scorer.params);
        let mut batch = 0usize;
        while batch < train_config.batch_size {
            if cursor == 0 {
                use rand::seq::SliceRandom;
                order.shuffle(rng);
            }
            let ex = &data[order[cursor]];
            cursor = (cursor + 1) % order.len();
            let (_, g) = scorer.example_loss_and_grads(ex)?;
            for (acc, gi) in grads.iter_mut().zip(g) {
                *acc += &gi;
            }
            batch += 1;
        }
        let scale = 1.0 / train_config.batch_size as f64;
        for g in &mut grads {
            g.mapv_inplace(|x| x * scale);
        }
        adam.step(&mut scorer.params, &grads);

        if !holdout.is_empty() && (step + 1) % train_config.eval_every == 0 {
            let loss = scorer.mean_loss(&holdout)?;
            if loss < best_loss {
                best_loss = loss;
                best_params = scorer.params.clone();
                bad_evals = 0;
            } else {
                bad_evals += 1;
                if bad_evals >= train_config.patience {
                    break;
                }
            }
        }
    }
    if !holdout.is_empty() {
        let loss = scorer.mean_loss(&holdout)?;
        if loss < best_loss {
            best_params = scorer.params.clone();
        }
        scorer.params = best_params;
    }
    Ok(scorer)
}

/// Separable synthetic scorer data for tests and acceptance: positives
/// mention every concept, negatives none.
pub fn synthetic_separable_data(
    n_pairs: usize,
    neg_per_pos: usize,
    seed: u64,
) -> (Vec<ScorerExample>, Vocab) {
    let lexicon = crate::text::Lexicon::bundled();
    let nouns = [
        "dog", "cat", "ball", "park", "table", "apple", "book", "car", "tree", "river",
    ];
    let verbs = ["run", "sit", "eat", "read", "throw", "play", "walk", "hold", "watch", "climb"];
    let fillers = ["a", "the", "near", "with", "in"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut words: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for i in 0..n_pairs {
        let noun = nouns[rng.gen_range(0..nouns.len())];
        let verb = verbs[rng.gen_range(0..verbs.len())];
        let noun2 = nouns[rng.gen_range(0..nouns.len())];
        let concepts =
            ConceptSet::new([noun.to_string(), verb.to_string(), noun2.to_string()], false)
                .unwrap();
        let text = format!("the {noun} {verb} {noun2}");
        let pos = Sentence::analyze(format!("pos{i}"), &text, &lexicon);
        words.extend(pos.tokens.iter().cloned());
        words.extend(pos.lemmas.iter().cloned());
        data.push(ScorerExample {
            concepts: concepts.clone(),
            sentence: pos,
            label: true,
        });
        for j in 0..neg_per_pos {
            // negatives built only from fillers: no concept overlap
            let mut toks = Vec::new();
            for _ in 0..4 {
                toks.push(fillers[rng.gen_range(0..fillers.len())]);
            }
            let neg = Sentence::analyze(format!("neg{i}-{j}"), &toks.join(" "), &lexicon);
            words.extend(neg.tokens.iter().cloned());
            data.push(ScorerExample {
                concepts: concepts.clone(),
                sentence: neg,
                label: false,
            });
        }
    }
    words.extend(nouns.iter().map(|s| s.to_string()));
    words.extend(verbs.iter().map(|s| s.to_string()));
    let vocab = Vocab::build(words.iter().map(|s| s.as_str()));
    (data, vocab)
}
