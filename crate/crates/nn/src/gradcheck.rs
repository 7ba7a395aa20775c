//! Central finite-difference gradient checks for the tape operations and the
//! full models.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flexdiff_core::random::random_connected;
use flexdiff_core::{edge_features, Graph, LaplacianParams, Result};

use crate::layers::{attention_head, gcn_operator, pd_operator, propagate_layer, Activation, AttentionGraph, HeadVars};
use crate::model::{Arch, Model, ModelConfig};
use crate::tape::{Pairs, SparseOp, Tape, Var};
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;

fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `||analytic - numeric|| / max(||analytic||, ||numeric||)` over every entry
/// of every input, for a scalar-valued `f`.
pub fn relative_error(inputs: &[Tensor], f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out);
    let eval = |xs: &[Tensor]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.leaf(x.clone())).collect();
        let o = f(&mut t, &vs);
        t.value(o).get(0, 0)
    };
    let mut acc = Accum::default();
    for (k, input) in inputs.iter().enumerate() {
        let zero = Tensor::zeros(input.rows(), input.cols());
        let analytic = grads.get(vars[k]).unwrap_or(&zero);
        for e in 0..input.data().len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[e] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[e] -= STEP;
            acc.push(analytic.data()[e], (eval(&plus) - eval(&minus)) / (2.0 * STEP));
        }
    }
    acc.relative()
}

#[derive(Default)]
struct Accum {
    diff: f64,
    analytic: f64,
    numeric: f64,
}

impl Accum {
    fn push(&mut self, a: f64, n: f64) {
        self.diff += (a - n) * (a - n);
        self.analytic += a * a;
        self.numeric += n * n;
    }

    fn relative(&self) -> f64 {
        let scale = self.analytic.sqrt().max(self.numeric.sqrt());
        if scale == 0.0 {
            0.0
        } else {
            self.diff.sqrt() / scale
        }
    }
}

/// Reduces `v` to a scalar with fixed random weights so every entry matters.
pub fn weighted_sum(tape: &mut Tape, v: Var, seed: u64) -> Var {
    let (r, c) = tape.value(v).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Arc::new(random_tensor(r, c, &mut rng));
    let m = tape.mask(v, w);
    tape.sum(m)
}

/// Relative errors of every tape operation and of the GCN, PD-GCN, GAT and
/// PD-GAT single layers on small random inputs.
pub fn operation_errors() -> Result<Vec<(&'static str, f64)>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_tensor(4, 3, &mut rng);
    let b = random_tensor(3, 5, &mut rng);
    let c = random_tensor(4, 3, &mut rng);

    out.push((
        "matmul",
        relative_error(&[a.clone(), b.clone()], &|t, v| {
            let m = t.matmul(v[0], v[1]);
            weighted_sum(t, m, 2)
        }),
    ));
    out.push((
        "add",
        relative_error(&[a.clone(), c.clone()], &|t, v| {
            let m = t.add(v[0], v[1]);
            weighted_sum(t, m, 3)
        }),
    ));
    out.push((
        "relu",
        relative_error(&[a.clone()], &|t, v| {
            let m = t.relu(v[0]);
            weighted_sum(t, m, 4)
        }),
    ));
    out.push((
        "leaky_relu",
        relative_error(&[a.clone()], &|t, v| {
            let m = t.leaky_relu(v[0], 0.2);
            weighted_sum(t, m, 5)
        }),
    ));
    out.push((
        "mask",
        relative_error(&[a.clone()], &|t, v| {
            let mask = Arc::new(Tensor::from_fn(4, 3, |i, j| if (i + j) % 3 == 0 { 0.0 } else { 1.25 }));
            let m = t.mask(v[0], mask);
            weighted_sum(t, m, 6)
        }),
    ));
    out.push((
        "concat_cols",
        relative_error(&[a.clone(), c.clone()], &|t, v| {
            let m = t.concat_cols(&[v[0], v[1]]);
            weighted_sum(t, m, 7)
        }),
    ));
    out.push((
        "gather_rows",
        relative_error(&[a.clone()], &|t, v| {
            let m = t.gather_rows(v[0], Arc::new(vec![3, 0, 0, 2, 3, 1]));
            weighted_sum(t, m, 8)
        }),
    ));
    out.push((
        "softmax_rows",
        relative_error(&[a.clone()], &|t, v| {
            let m = t.softmax_rows(v[0]);
            weighted_sum(t, m, 9)
        }),
    ));
    out.push((
        "sum",
        relative_error(&[b], &|t, v| {
            let s = t.sum(v[0]);
            let sq = t.matmul(s, s);
            t.sum(sq)
        }),
    ));
    let logits = random_tensor(6, 4, &mut rng);
    let labels = Arc::new(vec![0, 3, 1, 1, 2, 0]);
    let rows = Arc::new(vec![0, 2, 3, 5]);
    out.push((
        "cross_entropy",
        relative_error(&[logits], &|t, v| {
            let p = t.softmax_rows(v[0]);
            t.cross_entropy(p, labels.clone(), rows.clone())
        }),
    ));

    let g = random_connected(12, 0.25, &mut ChaCha8Rng::seed_from_u64(77));
    let x = random_tensor(12, 3, &mut rng);
    for (name, op) in [
        ("spmm (gcn operator)", gcn_operator(&g)),
        ("spmm (P operator)", pd_operator(&g, LaplacianParams::new(0.3, 0.6)?)?),
    ] {
        let s = Arc::new(SparseOp::new(op));
        out.push((
            name,
            relative_error(&[x.clone()], &|t, v| {
                let m = t.spmm(s.clone(), v[0]);
                weighted_sum(t, m, 12)
            }),
        ));
    }

    let pairs = Arc::new(Pairs::from_graph(&g, true));
    let scores = random_tensor(pairs.len(), 1, &mut rng);
    out.push((
        "edge_softmax",
        relative_error(&[scores.clone()], &|t, v| {
            let m = t.edge_softmax(v[0], pairs.clone());
            weighted_sum(t, m, 14)
        }),
    ));
    out.push((
        "edge_aggregate",
        relative_error(&[scores, x.clone()], &|t, v| {
            let m = t.edge_aggregate(v[0], v[1], pairs.clone());
            weighted_sum(t, m, 15)
        }),
    ));

    out.extend(layer_errors(&g, &mut rng)?);
    Ok(out)
}

fn layer_errors(g: &Graph, rng: &mut ChaCha8Rng) -> Result<Vec<(&'static str, f64)>> {
    let n = g.node_count();
    let h = random_tensor(n, 3, rng);
    let w = random_tensor(3, 4, rng);
    let mut out = Vec::new();
    let s = Arc::new(SparseOp::new(pd_operator(g, LaplacianParams::new(1.0, 0.5)?)?));
    out.push((
        "pd-gcn layer",
        relative_error(&[h.clone(), w.clone()], &|t, v| {
            let o = propagate_layer(t, &s, v[0], v[1], Activation::Relu);
            weighted_sum(t, o, 17)
        }),
    ));
    let sg = Arc::new(SparseOp::new(gcn_operator(g)));
    out.push((
        "gcn layer",
        relative_error(&[h.clone(), w.clone()], &|t, v| {
            let o = propagate_layer(t, &sg, v[0], v[1], Activation::Relu);
            weighted_sum(t, o, 18)
        }),
    ));

    let a_src = random_tensor(4, 1, rng);
    let a_dst = random_tensor(4, 1, rng);
    let w_e = random_tensor(2, 4, rng);
    let a_e = random_tensor(4, 1, rng);
    let plain = AttentionGraph::new(g, true, None)?;
    out.push((
        "gat head",
        relative_error(&[h.clone(), w.clone(), a_src.clone(), a_dst.clone()], &|t, v| {
            let head = HeadVars {
                w: v[1],
                a_src: v[2],
                a_dst: v[3],
                edge: None,
            };
            let o = attention_head(t, &plain, v[0], &head, 0.2, None, Activation::Relu);
            weighted_sum(t, o, 19)
        }),
    ));
    let table = edge_features::<f64>(g, LaplacianParams::new(1.0, 0.4)?)?;
    let featured = AttentionGraph::new(g, true, Some(&table))?;
    out.push((
        "pd-gat head",
        relative_error(&[h, w, a_src, a_dst, w_e, a_e], &|t, v| {
            let head = HeadVars {
                w: v[1],
                a_src: v[2],
                a_dst: v[3],
                edge: Some((v[4], v[5])),
            };
            let o = attention_head(t, &featured, v[0], &head, 0.2, None, Activation::Relu);
            weighted_sum(t, o, 20)
        }),
    ));
    Ok(out)
}

/// Relative error of the training-loss gradient of a full model on a
/// 20-node random graph. With `replay_dropout` every evaluation draws the
/// same dropout masks.
pub fn model_error(cfg: &ModelConfig, replay_dropout: bool) -> Result<f64> {
    let g = random_connected(20, 0.15, &mut ChaCha8Rng::seed_from_u64(21));
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = random_tensor(20, 3, &mut rng);
    let labels = Arc::new((0..20).map(|i| i % 3).collect::<Vec<_>>());
    let rows = Arc::new((0..14).collect::<Vec<_>>());
    let model = Model::new(cfg, &g, 3, 3)?;
    let loss = |params: &[Tensor]| -> Result<(f64, Vec<Tensor>)> {
        let mut drop = ChaCha8Rng::seed_from_u64(99);
        let d = if replay_dropout { Some(&mut drop) } else { None };
        model.loss_and_grad(params, &x, &labels, &rows, d)
    };
    let params = model.params().to_vec();
    let (_, analytic) = loss(&params)?;
    let mut acc = Accum::default();
    for k in 0..params.len() {
        for e in 0..params[k].data().len() {
            let mut plus = params.clone();
            plus[k].data_mut()[e] += STEP;
            let mut minus = params.clone();
            minus[k].data_mut()[e] -= STEP;
            let numeric = (loss(&plus)?.0 - loss(&minus)?.0) / (2.0 * STEP);
            acc.push(analytic[k].data()[e], numeric);
        }
    }
    Ok(acc.relative())
}

/// Two-layer configuration small enough for exhaustive finite differences.
pub fn small_config(arch: Arch) -> ModelConfig {
    ModelConfig {
        hidden: 8,
        heads: 2,
        dropout: 0.0,
        params: LaplacianParams::new(1.0, 0.5).expect("valid parameters"),
        ..ModelConfig::new(arch)
    }
}
