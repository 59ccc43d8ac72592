//! A small reverse-mode autodiff tape over `ndarray` matrices in f64.
//!
//! Forward calls append nodes to the tape; `backward` walks it in reverse.
//! One graph corresponds to one training example; batching is done by
//! accumulating parameter gradients across graphs, which keeps every loss
//! exactly reproducible and finite-difference checkable.

use ndarray::{Array2, Axis};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// a: (r, c) plus row vector b: (1, c) broadcast over rows
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    LayerNormRows {
        input: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    SliceCols {
        input: NodeId,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<NodeId>),
    /// out[i] = table[rows[i]]
    GatherRows {
        table: NodeId,
        rows: Vec<usize>,
    },
    MeanRows(NodeId),
    SumAll(NodeId),
    /// scalar: sum_i -log softmax(logits[i])[targets[i]]
    CrossEntropySum {
        logits: NodeId,
        targets: Vec<usize>,
    },
    /// scalar: softplus(z) - y * z for a (1,1) logit
    BceWithLogits {
        logit: NodeId,
        label: f64,
    },
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value[[0, 0]]
    }

    pub fn leaf(&mut self, v: Array2<f64>) -> NodeId {
        self.push(v, Op::Leaf, true)
    }

    pub fn constant(&mut self, v: Array2<f64>) -> NodeId {
        self.push(v, Op::Constant, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.dot(&self.nodes[b].value);
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a].value + &self.nodes[b].value;
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Add(a, b), rg)
    }

    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[b].value.nrows(), 1);
        let v = &self.nodes[a].value + &self.nodes[b].value;
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::AddRow(a, b), rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a].value * &self.nodes[b].value;
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[a].value * c;
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, c), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.mapv(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.t().to_owned();
        let rg = self.rg(a);
        self.push(v, Op::Transpose(a), rg)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = softmax_rows(&self.nodes[a].value);
        let rg = self.rg(a);
        self.push(v, Op::SoftmaxRows(a), rg)
    }

    pub fn layer_norm_rows(&mut self, input: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let eps = 1e-5;
        let x = &self.nodes[input].value;
        let mut v = x.clone();
        for mut row in v.rows_mut() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / n;
            let s = (var + eps).sqrt();
            row.mapv_inplace(|x| (x - mean) / s);
        }
        let v = &v * &self.nodes[gain].value + &self.nodes[bias].value;
        let rg = self.rg(input) || self.rg(gain) || self.rg(bias);
        self.push(
            v,
            Op::LayerNormRows {
                input,
                gain,
                bias,
                eps,
            },
            rg,
        )
    }

    pub fn slice_cols(&mut self, input: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.nodes[input]
            .value
            .slice(ndarray::s![.., start..start + len])
            .to_owned();
        let rg = self.rg(input);
        self.push(v, Op::SliceCols { input, start, len }, rg)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let views: Vec<_> = parts.iter().map(|&id| self.nodes[id].value.view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat shapes agree");
        let rg = parts.iter().any(|&id| self.rg(id));
        self.push(v, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn gather_rows(&mut self, table: NodeId, rows: &[usize]) -> NodeId {
        let t = &self.nodes[table].value;
        let mut v = Array2::zeros((rows.len(), t.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            v.row_mut(i).assign(&t.row(r));
        }
        let rg = self.rg(table);
        self.push(
            v,
            Op::GatherRows {
                table,
                rows: rows.to_vec(),
            },
            rg,
        )
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a].value;
        let r = x.nrows() as f64;
        let v = x.sum_axis(Axis(0)).insert_axis(Axis(0)) / r;
        let rg = self.rg(a);
        self.push(v, Op::MeanRows(a), rg)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Array2::from_elem((1, 1), self.nodes[a].value.sum());
        let rg = self.rg(a);
        self.push(v, Op::SumAll(a), rg)
    }

    pub fn cross_entropy_sum(&mut self, logits: NodeId, targets: &[usize]) -> NodeId {
        let x = &self.nodes[logits].value;
        debug_assert_eq!(x.nrows(), targets.len());
        let mut total = 0.0;
        for (row, &t) in x.rows().into_iter().zip(targets) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            total += lse - row[t];
        }
        let rg = self.rg(logits);
        self.push(
            Array2::from_elem((1, 1), total),
            Op::CrossEntropySum {
                logits,
                targets: targets.to_vec(),
            },
            rg,
        )
    }

    pub fn bce_with_logits(&mut self, logit: NodeId, label: f64) -> NodeId {
        let z = self.nodes[logit].value[[0, 0]];
        // softplus(z) - y*z, computed stably
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        let v = softplus - label * z;
        let rg = self.rg(logit);
        self.push(
            Array2::from_elem((1, 1), v),
            Op::BceWithLogits { logit, label },
            rg,
        )
    }

    /// Per-token cross entropies, forward-only (diagnostics; not a tape op).
    pub fn per_row_cross_entropy(&self, logits: NodeId, targets: &[usize]) -> Vec<f64> {
        let x = &self.nodes[logits].value;
        x.rows()
            .into_iter()
            .zip(targets)
            .map(|(row, &t)| {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
                lse - row[t]
            })
            .collect()
    }

    /// Backpropagate from a (1,1) scalar node. Returns one gradient slot per
    /// node; slots of non-grad nodes and unreached nodes are None.
    pub fn backward(&self, root: NodeId) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(Array2::from_elem((1, 1), 1.0));
        for id in (0..=root).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            if !self.nodes[id].requires_grad {
                grads[id] = Some(g);
                continue;
            }
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        grads
    }

    fn propagate(&self, id: NodeId, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        match &self.nodes[id].op {
                Op::Leaf | Op::Constant => {}
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let ga = g.dot(&self.nodes[*b].value.t());
                        accumulate(&mut grads[*a], ga);
                    }
                    if self.rg(*b) {
                        let gb = self.nodes[*a].value.t().dot(g);
                        accumulate(&mut grads[*b], gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads[*a], g.clone());
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads[*b], g.clone());
                    }
                }
                Op::AddRow(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads[*a], g.clone());
                    }
                    if self.rg(*b) {
                        let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads[*b], gb);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads[*a], g * &self.nodes[*b].value);
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads[*b], g * &self.nodes[*a].value);
                    }
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads[*a], g * *c);
                }
                Op::Relu(a) => {
                    let mask = self.nodes[*a].value.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    accumulate(&mut grads[*a], g * &mask);
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads[*a], g.t().to_owned());
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[id].value;
                    let mut ga = Array2::zeros(y.raw_dim());
                    for ((grow, yrow), mut out) in
                        g.rows().into_iter().zip(y.rows()).zip(ga.rows_mut())
                    {
                        let dot: f64 = grow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                        for ((o, &gv), &yv) in out.iter_mut().zip(grow.iter()).zip(yrow.iter()) {
                            *o = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads[*a], ga);
                }
                Op::LayerNormRows {
                    input,
                    gain,
                    bias,
                    eps,
                } => {
                    let x = &self.nodes[*input].value;
                    let gn = &self.nodes[*gain].value;
                    let n = x.ncols() as f64;
                    let mut gx = Array2::zeros(x.raw_dim());
                    let mut ggain = Array2::zeros((1, x.ncols()));
                    let mut gbias = Array2::zeros((1, x.ncols()));
                    for ((xrow, grow), mut gxrow) in
                        x.rows().into_iter().zip(g.rows()).zip(gx.rows_mut())
                    {
                        let mean = xrow.sum() / n;
                        let var = xrow.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n;
                        let s = (var + eps).sqrt();
                        let xhat: Vec<f64> = xrow.iter().map(|&v| (v - mean) / s).collect();
                        let dxhat: Vec<f64> = grow
                            .iter()
                            .zip(gn.row(0).iter())
                            .map(|(&gv, &gg)| gv * gg)
                            .collect();
                        let mean_dxhat = dxhat.iter().sum::<f64>() / n;
                        let mean_dxhat_xhat =
                            dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / n;
                        for ((o, &dxh), &xh) in gxrow.iter_mut().zip(&dxhat).zip(&xhat) {
                            *o = (dxh - mean_dxhat - xh * mean_dxhat_xhat) / s;
                        }
                        for ((gg, &gv), &xh) in
                            ggain.row_mut(0).iter_mut().zip(grow.iter()).zip(&xhat)
                        {
                            *gg += gv * xh;
                        }
                        for (gb, &gv) in gbias.row_mut(0).iter_mut().zip(grow.iter()) {
                            *gb += gv;
                        }
                    }
                    if self.rg(*input) {
                        accumulate(&mut grads[*input], gx);
                    }
                    if self.rg(*gain) {
                        accumulate(&mut grads[*gain], ggain);
                    }
                    if self.rg(*bias) {
                        accumulate(&mut grads[*bias], gbias);
                    }
                }
                Op::SliceCols { input, start, len } => {
                    let src = &self.nodes[*input].value;
                    let mut ga = Array2::zeros(src.raw_dim());
                    ga.slice_mut(ndarray::s![.., *start..*start + *len]).assign(g);
                    accumulate(&mut grads[*input], ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.ncols();
                        if self.rg(p) {
                            let gp = g.slice(ndarray::s![.., offset..offset + w]).to_owned();
                            accumulate(&mut grads[p], gp);
                        }
                        offset += w;
                    }
                }
                Op::GatherRows { table, rows } => {
                    let t = &self.nodes[*table].value;
                    let mut gt = Array2::zeros(t.raw_dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = gt.row_mut(r);
                        dst += &g.row(i);
                    }
                    accumulate(&mut grads[*table], gt);
                }
                Op::MeanRows(a) => {
                    let x = &self.nodes[*a].value;
                    let r = x.nrows();
                    let mut ga = Array2::zeros(x.raw_dim());
                    for mut row in ga.rows_mut() {
                        row.assign(&(&g.row(0) / r as f64));
                    }
                    accumulate(&mut grads[*a], ga);
                }
                Op::SumAll(a) => {
                    let ga = Array2::from_elem(self.nodes[*a].value.raw_dim(), g[[0, 0]]);
                    accumulate(&mut grads[*a], ga);
                }
                Op::CrossEntropySum { logits, targets } => {
                    let x = &self.nodes[*logits].value;
                    let mut ga = softmax_rows(x);
                    for (i, &t) in targets.iter().enumerate() {
                        ga[[i, t]] -= 1.0;
                    }
                    accumulate(&mut grads[*logits], &ga * g[[0, 0]]);
                }
                Op::BceWithLogits { logit, label } => {
                    let z = self.nodes[*logit].value[[0, 0]];
                    let sig = 1.0 / (1.0 + (-z).exp());
                    let ga = Array2::from_elem((1, 1), (sig - label) * g[[0, 0]]);
                    accumulate(&mut grads[*logit], ga);
                }
        }
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(existing) => *existing += &g,
        None => *slot = Some(g),
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
