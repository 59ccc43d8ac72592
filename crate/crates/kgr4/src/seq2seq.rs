//! Small encoder-decoder transformer with exact gradients via the autodiff
//! tape. Shared by the generator and the refiner.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId};
use crate::error::{Kgr4Error, Result};
use crate::nn::{self, init_matrix, zero_grads, Adam, ParamSet, TrainConfig, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub ff_dim: usize,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub seed: u64,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Seq2SeqConfig {
            layers: 2,
            heads: 4,
            embed_dim: 64,
            ff_dim: 128,
            max_src_len: 64,
            max_tgt_len: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 4,
            max_len: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub config: Seq2SeqConfig,
    pub vocab: Vocab,
    pub params: ParamSet,
}

struct AttnParams {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
}

struct LnParams {
    gain: usize,
    bias: usize,
}

struct FfParams {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

struct EncLayer {
    ln1: LnParams,
    attn: AttnParams,
    ln2: LnParams,
    ff: FfParams,
}

struct DecLayer {
    ln1: LnParams,
    self_attn: AttnParams,
    ln2: LnParams,
    cross_attn: AttnParams,
    ln3: LnParams,
    ff: FfParams,
}

struct Layout {
    emb: usize,
    enc: Vec<EncLayer>,
    dec: Vec<DecLayer>,
    final_ln: LnParams,
    out_w: usize,
    out_b: usize,
}

fn add_ln(params: &mut ParamSet, name: &str, d: usize) -> LnParams {
    LnParams {
        gain: params.add(format!("{name}.g"), Array2::ones((1, d))),
        bias: params.add(format!("{name}.b"), Array2::zeros((1, d))),
    }
}

fn add_attn(params: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, d: usize) -> AttnParams {
    AttnParams {
        wq: params.add(format!("{name}.wq"), init_matrix(rng, d, d)),
        wk: params.add(format!("{name}.wk"), init_matrix(rng, d, d)),
        wv: params.add(format!("{name}.wv"), init_matrix(rng, d, d)),
        wo: params.add(format!("{name}.wo"), init_matrix(rng, d, d)),
    }
}

fn add_ff(params: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, d: usize, f: usize) -> FfParams {
    FfParams {
        w1: params.add(format!("{name}.w1"), init_matrix(rng, d, f)),
        b1: params.add(format!("{name}.b1"), Array2::zeros((1, f))),
        w2: params.add(format!("{name}.w2"), init_matrix(rng, f, d)),
        b2: params.add(format!("{name}.b2"), Array2::zeros((1, d))),
    }
}

fn build_params(config: &Seq2SeqConfig, vocab_size: usize) -> (ParamSet, Layout) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.embed_dim;
    let f = config.ff_dim;
    let mut params = ParamSet::new();
    let emb = params.add("emb", init_matrix(&mut rng, vocab_size, d));
    let mut enc = Vec::new();
    for l in 0..config.layers {
        enc.push(EncLayer {
            ln1: add_ln(&mut params, &format!("enc{l}.ln1"), d),
            attn: add_attn(&mut params, &mut rng, &format!("enc{l}.attn"), d),
            ln2: add_ln(&mut params, &format!("enc{l}.ln2"), d),
            ff: add_ff(&mut params, &mut rng, &format!("enc{l}.ff"), d, f),
        });
    }
    let mut dec = Vec::new();
    for l in 0..config.layers {
        dec.push(DecLayer {
            ln1: add_ln(&mut params, &format!("dec{l}.ln1"), d),
            self_attn: add_attn(&mut params, &mut rng, &format!("dec{l}.self"), d),
            ln2: add_ln(&mut params, &format!("dec{l}.ln2"), d),
            cross_attn: add_attn(&mut params, &mut rng, &format!("dec{l}.cross"), d),
            ln3: add_ln(&mut params, &format!("dec{l}.ln3"), d),
            ff: add_ff(&mut params, &mut rng, &format!("dec{l}.ff"), d, f),
        });
    }
    let final_ln = add_ln(&mut params, "final_ln", d);
    let out_w = params.add("out_w", init_matrix(&mut rng, d, vocab_size));
    let out_b = params.add("out_b", Array2::zeros((1, vocab_size)));
    (
        params,
        Layout {
            emb,
            enc,
            dec,
            final_ln,
            out_w,
            out_b,
        },
    )
}

fn sinusoidal_positions(len: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((len, d));
    for pos in 0..len {
        for i in 0..d {
            let angle = pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            pe[[pos, i]] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

fn causal_mask(len: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, len), |(i, j)| if j > i { -1e9 } else { 0.0 })
}

impl Seq2SeqModel {
    pub fn new(config: Seq2SeqConfig, vocab: Vocab) -> Seq2SeqModel {
        assert!(config.embed_dim % config.heads == 0, "heads must divide embed_dim");
        let (params, _) = build_params(&config, vocab.len());
        Seq2SeqModel {
            config,
            vocab,
            params,
        }
    }

    pub fn from_params(config: Seq2SeqConfig, vocab: Vocab, params: ParamSet) -> Seq2SeqModel {
        Seq2SeqModel {
            config,
            vocab,
            params,
        }
    }

    fn layout(&self) -> Layout {
        // mirrors the parameter ordering of build_params without allocating
        let mut next = 0usize;
        let mut take = || {
            let i = next;
            next += 1;
            i
        };
        let emb = take();
        let mut enc = Vec::new();
        for _ in 0..self.config.layers {
            enc.push(EncLayer {
                ln1: LnParams { gain: take(), bias: take() },
                attn: AttnParams { wq: take(), wk: take(), wv: take(), wo: take() },
                ln2: LnParams { gain: take(), bias: take() },
                ff: FfParams { w1: take(), b1: take(), w2: take(), b2: take() },
            });
        }
        let mut dec = Vec::new();
        for _ in 0..self.config.layers {
            dec.push(DecLayer {
                ln1: LnParams { gain: take(), bias: take() },
                self_attn: AttnParams { wq: take(), wk: take(), wv: take(), wo: take() },
                ln2: LnParams { gain: take(), bias: take() },
                cross_attn: AttnParams { wq: take(), wk: take(), wv: take(), wo: take() },
                ln3: LnParams { gain: take(), bias: take() },
                ff: FfParams { w1: take(), b1: take(), w2: take(), b2: take() },
            });
        }
        let final_ln = LnParams { gain: take(), bias: take() };
        let out_w = take();
        let out_b = take();
        debug_assert_eq!(next, self.params.len());
        Layout {
            emb,
            enc,
            dec,
            final_ln,
            out_w,
            out_b,
        }
    }

    fn attention(
        &self,
        g: &mut Graph,
        nodes: &[NodeId],
        p: &AttnParams,
        q_in: NodeId,
        kv_in: NodeId,
        mask: Option<&Array2<f64>>,
    ) -> NodeId {
        let d = self.config.embed_dim;
        let heads = self.config.heads;
        let dh = d / heads;
        let q = g.matmul(q_in, nodes[p.wq]);
        let k = g.matmul(kv_in, nodes[p.wk]);
        let v = g.matmul(kv_in, nodes[p.wv]);
        let mut contexts = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt);
            let mut scores = g.scale(scores, 1.0 / (dh as f64).sqrt());
            if let Some(m) = mask {
                let mc = g.constant(m.clone());
                scores = g.add(scores, mc);
            }
            let attn = g.softmax_rows(scores);
            contexts.push(g.matmul(attn, vh));
        }
        let ctx = g.concat_cols(&contexts);
        g.matmul(ctx, nodes[p.wo])
    }

    fn feed_forward(&self, g: &mut Graph, nodes: &[NodeId], p: &FfParams, x: NodeId) -> NodeId {
        let h = g.matmul(x, nodes[p.w1]);
        let h = g.add_row(h, nodes[p.b1]);
        let h = g.relu(h);
        let h = g.matmul(h, nodes[p.w2]);
        g.add_row(h, nodes[p.b2])
    }

    fn embed(&self, g: &mut Graph, nodes: &[NodeId], layout: &Layout, ids: &[usize]) -> NodeId {
        let d = self.config.embed_dim;
        let e = g.gather_rows(nodes[layout.emb], ids);
        let e = g.scale(e, (d as f64).sqrt());
        let pe = g.constant(sinusoidal_positions(ids.len(), d));
        g.add(e, pe)
    }

    /// Build the full teacher-forced forward pass; returns decoder logits
    /// (one row per decoder input position).
    fn build_logits(
        &self,
        g: &mut Graph,
        nodes: &[NodeId],
        layout: &Layout,
        src_ids: &[usize],
        dec_in_ids: &[usize],
    ) -> NodeId {
        // encoder
        let mut x = self.embed(g, nodes, layout, src_ids);
        for layer in &layout.enc {
            let n1 = g.layer_norm_rows(x, nodes[layer.ln1.gain], nodes[layer.ln1.bias]);
            let a = self.attention(g, nodes, &layer.attn, n1, n1, None);
            x = g.add(x, a);
            let n2 = g.layer_norm_rows(x, nodes[layer.ln2.gain], nodes[layer.ln2.bias]);
            let f = self.feed_forward(g, nodes, &layer.ff, n2);
            x = g.add(x, f);
        }
        let enc_out = x;

        // decoder with causal self-attention and cross-attention
        let mask = causal_mask(dec_in_ids.len());
        let mut y = self.embed(g, nodes, layout, dec_in_ids);
        for layer in &layout.dec {
            let n1 = g.layer_norm_rows(y, nodes[layer.ln1.gain], nodes[layer.ln1.bias]);
            let a = self.attention(g, nodes, &layer.self_attn, n1, n1, Some(&mask));
            y = g.add(y, a);
            let n2 = g.layer_norm_rows(y, nodes[layer.ln2.gain], nodes[layer.ln2.bias]);
            let c = self.attention(g, nodes, &layer.cross_attn, n2, enc_out, None);
            y = g.add(y, c);
            let n3 = g.layer_norm_rows(y, nodes[layer.ln3.gain], nodes[layer.ln3.bias]);
            let f = self.feed_forward(g, nodes, &layer.ff, n3);
            y = g.add(y, f);
        }
        let yn = g.layer_norm_rows(y, nodes[layout.final_ln.gain], nodes[layout.final_ln.bias]);
        let logits = g.matmul(yn, nodes[layout.out_w]);
        g.add_row(logits, nodes[layout.out_b])
    }

    fn prepare(&self, src_ids: &[usize], tgt_ids: &[usize]) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        if tgt_ids.is_empty() {
            return Err(Kgr4Error::EmptyTarget);
        }
        let mut src: Vec<usize> = src_ids.to_vec();
        src.truncate(self.config.max_src_len);
        if src.is_empty() {
            src.push(self.vocab.special(nn::EOS));
        }
        let mut labels: Vec<usize> = tgt_ids.to_vec();
        labels.truncate(self.config.max_tgt_len.saturating_sub(1).max(1));
        labels.push(self.vocab.special(nn::EOS));
        let mut dec_in = vec![self.vocab.special(nn::BOS)];
        dec_in.extend_from_slice(&labels[..labels.len() - 1]);
        Ok((src, dec_in, labels))
    }

    /// Token-sum teacher-forced negative log-likelihood.
    pub fn nll_loss(&self, src_ids: &[usize], tgt_ids: &[usize]) -> Result<f64> {
        let (src, dec_in, labels) = self.prepare(src_ids, tgt_ids)?;
        let mut g = Graph::new();
        let layout = self.layout();
        let nodes: Vec<NodeId> = self.params.values.iter().map(|p| g.constant(p.clone())).collect();
        let logits = self.build_logits(&mut g, &nodes, &layout, &src, &dec_in);
        let loss = g.cross_entropy_sum(logits, &labels);
        Ok(g.scalar(loss))
    }

    /// NLL plus parameter gradients, optionally pre-scaled by `weight`.
    pub fn nll_loss_and_grads(
        &self,
        src_ids: &[usize],
        tgt_ids: &[usize],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let (src, dec_in, labels) = self.prepare(src_ids, tgt_ids)?;
        let mut g = Graph::new();
        let layout = self.layout();
        let nodes: Vec<NodeId> = self.params.values.iter().map(|p| g.leaf(p.clone())).collect();
        let logits = self.build_logits(&mut g, &nodes, &layout, &src, &dec_in);
        let loss = g.cross_entropy_sum(logits, &labels);
        let value = g.scalar(loss);
        let grads = g.backward(loss);
        let out = nodes
            .iter()
            .zip(&self.params.values)
            .map(|(&n, p)| grads[n].clone().unwrap_or_else(|| Array2::zeros(p.raw_dim())))
            .collect();
        Ok((value, out))
    }

    /// Per-position cross entropies of the teacher-forced target.
    pub fn per_token_losses(&self, src_ids: &[usize], tgt_ids: &[usize]) -> Result<Vec<f64>> {
        let (src, dec_in, labels) = self.prepare(src_ids, tgt_ids)?;
        let mut g = Graph::new();
        let layout = self.layout();
        let nodes: Vec<NodeId> = self.params.values.iter().map(|p| g.constant(p.clone())).collect();
        let logits = self.build_logits(&mut g, &nodes, &layout, &src, &dec_in);
        Ok(g.per_row_cross_entropy(logits, &labels))
    }

    /// Next-token log-probabilities given a decoder prefix (after BOS).
    pub fn next_token_log_probs(&self, src_ids: &[usize], prefix: &[usize]) -> Vec<f64> {
        let mut src: Vec<usize> = src_ids.to_vec();
        src.truncate(self.config.max_src_len);
        if src.is_empty() {
            src.push(self.vocab.special(nn::EOS));
        }
        let mut dec_in = vec![self.vocab.special(nn::BOS)];
        dec_in.extend_from_slice(prefix);
        let mut g = Graph::new();
        let layout = self.layout();
        let nodes: Vec<NodeId> = self.params.values.iter().map(|p| g.constant(p.clone())).collect();
        let logits = self.build_logits(&mut g, &nodes, &layout, &src, &dec_in);
        let row = g.value(logits).row(dec_in.len() - 1).to_owned();
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        row.iter().map(|&v| v - lse).collect()
    }

    /// Beam search with length-normalized log-probability. Returns generated
    /// token ids (EOS excluded). `beam_size == 1` is greedy decoding.
    pub fn generate(&self, src_ids: &[usize], decode: DecodeConfig) -> Result<Vec<usize>> {
        if decode.beam_size == 0 {
            return Err(Kgr4Error::InvalidArgument("beam_size must be >= 1".into()));
        }
        let eos = self.vocab.special(nn::EOS);
        let max_len = decode.max_len.min(self.config.max_tgt_len);

        #[derive(Clone)]
        struct Beam {
            tokens: Vec<usize>,
            log_prob: f64,
            finished: bool,
        }
        let norm = |b: &Beam| b.log_prob / (b.tokens.len().max(1) as f64);

        let mut beams = vec![Beam {
            tokens: Vec::new(),
            log_prob: 0.0,
            finished: false,
        }];
        for _ in 0..max_len {
            if beams.iter().all(|b| b.finished) {
                break;
            }
            let mut candidates: Vec<Beam> = Vec::new();
            for beam in &beams {
                if beam.finished {
                    candidates.push(beam.clone());
                    continue;
                }
                let log_probs = self.next_token_log_probs(src_ids, &beam.tokens);
                let mut ranked: Vec<(usize, f64)> =
                    log_probs.iter().copied().enumerate().collect();
                ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                for &(tok, lp) in ranked.iter().take(decode.beam_size) {
                    let mut next = beam.clone();
                    next.log_prob += lp;
                    if tok == eos {
                        next.finished = true;
                    } else {
                        next.tokens.push(tok);
                    }
                    candidates.push(next);
                }
            }
            candidates.sort_by(|a, b| {
                norm(b)
                    .partial_cmp(&norm(a))
                    .unwrap()
                    .then_with(|| a.tokens.cmp(&b.tokens))
            });
            candidates.truncate(decode.beam_size);
            beams = candidates;
        }
        beams.sort_by(|a, b| {
            norm(b)
                .partial_cmp(&norm(a))
                .unwrap()
                .then_with(|| a.tokens.cmp(&b.tokens))
        });
        Ok(beams.remove(0).tokens)
    }

    pub fn checkpoint(&self, kind: &str, train_data_hash: &str) -> crate::nn::Checkpoint {
        crate::nn::Checkpoint::new(
            kind,
            serde_json::to_value(&self.config).expect("config serializes"),
            &self.vocab,
            train_data_hash,
            &self.params,
        )
    }

    pub fn from_checkpoint(ckpt: &crate::nn::Checkpoint) -> Result<Seq2SeqModel> {
        let config: Seq2SeqConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| Kgr4Error::Checkpoint(e.to_string()))?;
        Ok(Seq2SeqModel {
            config,
            vocab: ckpt.vocab.clone(),
            params: ckpt.params()?,
        })
    }
}

/// Generic Adam + early-stopping training loop over (src, tgt) id pairs with
/// plain NLL. Used for generator pretraining and refiner training.
pub fn train_nll(
    model: &mut Seq2SeqModel,
    examples: &[(Vec<usize>, Vec<usize>)],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if examples.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    let (train_idx, holdout_idx) = nn::split_holdout(examples.len(), cfg.holdout_frac);
    let holdout: Vec<&(Vec<usize>, Vec<usize>)> =
        holdout_idx.iter().map(|&i| &examples[i]).collect();
    let mean_holdout = |m: &Seq2SeqModel| -> Result<f64> {
        let mut total = 0.0;
        for (s, t) in &holdout {
            total += m.nll_loss(s, t)?;
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
            let (src, tgt) = &examples[order[cursor]];
            cursor = (cursor + 1) % order.len();
            let (_, g) = model.nll_loss_and_grads(src, tgt)?;
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
