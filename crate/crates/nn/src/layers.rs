//! Aggregation operators and the single-layer building blocks.

use std::sync::Arc;

use flexdiff_core::{param_adjacency, CsrMatrix, EdgeFeatureTable, Graph, LaplacianParams, Result};

use crate::tape::{Pairs, SparseOp, Tape, Var};
use crate::tensor::Tensor;

/// `D^-1/2 (A + I) D^-1/2` with `D` the degrees of `A + I`.
pub fn gcn_operator(g: &Graph) -> CsrMatrix<f64> {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt()).collect();
    let rows = (0..n)
        .map(|i| {
            let nb = g.neighbors(i);
            let split = nb.partition_point(|&j| j < i);
            let mut row: Vec<(usize, f64)> = nb[..split].iter().map(|&j| (j, inv_sqrt[i] * inv_sqrt[j])).collect();
            row.push((i, inv_sqrt[i] * inv_sqrt[i]));
            row.extend(nb[split..].iter().map(|&j| (j, inv_sqrt[i] * inv_sqrt[j])));
            row
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

/// Sparse `P(alpha, gamma) = I - L(alpha, gamma)`.
pub fn pd_operator(g: &Graph, p: LaplacianParams) -> Result<CsrMatrix<f64>> {
    Ok(param_adjacency::<f64>(g, p)?.to_sparse())
}

/// Activation between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

fn activate(tape: &mut Tape, x: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => tape.relu(x),
        Activation::Identity => x,
    }
}

/// `act(S H W)` for a fixed sparse operator `S`: the GCN layer with the
/// self-looped symmetric operator, the PD-GCN layer with `P(alpha, gamma)`.
pub fn propagate_layer(tape: &mut Tape, s: &Arc<SparseOp>, h: Var, w: Var, act: Activation) -> Var {
    let hw = tape.matmul(h, w);
    let shw = tape.spmm(s.clone(), hw);
    activate(tape, shw, act)
}

/// Unnormalized GAT score `LeakyReLU(a^T [W h_i || W h_j])`.
///
/// `w` is `d_in x d_out`, `a` has length `2 d_out`.
pub fn gat_attention(h_i: &[f64], h_j: &[f64], w: &Tensor, a: &[f64], leaky_slope: f64) -> f64 {
    pd_gat_attention(h_i, h_j, &[], w, None, a, leaky_slope)
}

/// Unnormalized PD-GAT score `LeakyReLU(a^T [W_n h_i || W_n h_j || W_e f_ij])`.
///
/// With `w_e = None` the edge block is dropped and `a` has length `2 d_out`.
pub fn pd_gat_attention(
    h_i: &[f64],
    h_j: &[f64],
    f_ij: &[f64],
    w_n: &Tensor,
    w_e: Option<&Tensor>,
    a: &[f64],
    leaky_slope: f64,
) -> f64 {
    let project = |x: &[f64], w: &Tensor| -> Vec<f64> {
        (0..w.cols()).map(|c| x.iter().enumerate().map(|(r, v)| v * w.get(r, c)).sum()).collect()
    };
    let mut z = project(h_i, w_n);
    z.extend(project(h_j, w_n));
    if let Some(we) = w_e {
        z.extend(project(f_ij, we));
    }
    assert_eq!(z.len(), a.len(), "attention vector length mismatch");
    let s: f64 = z.iter().zip(a).map(|(x, y)| x * y).sum();
    if s > 0.0 {
        s
    } else {
        leaky_slope * s
    }
}

/// Pair structure shared by all heads of the attention layers.
#[derive(Debug, Clone)]
pub struct AttentionGraph {
    pub pairs: Arc<Pairs>,
    pub owners: Arc<Vec<usize>>,
    pub targets: Arc<Vec<usize>>,
    /// `pairs x 2` edge features, self pairs included when present.
    pub edge_features: Option<Arc<Tensor>>,
}

impl AttentionGraph {
    pub fn new(g: &Graph, self_pairs: bool, features: Option<&EdgeFeatureTable<f64>>) -> Result<Self> {
        let pairs = Pairs::from_graph(g, self_pairs);
        let edge_features = match features {
            None => None,
            Some(table) => {
                let mut t = Tensor::zeros(pairs.len(), 2);
                for (k, (&i, &j)) in pairs.owners().iter().zip(pairs.targets()).enumerate() {
                    let f = if i == j {
                        table.self_feature(i)
                    } else {
                        table.get(i, j).ok_or_else(|| {
                            flexdiff_core::Error::data(format!("missing edge feature for ({i}, {j})"))
                        })?
                    };
                    t.set(k, 0, f[0]);
                    t.set(k, 1, f[1]);
                }
                Some(Arc::new(t))
            }
        };
        Ok(AttentionGraph {
            owners: Arc::new(pairs.owners().to_vec()),
            targets: Arc::new(pairs.targets().to_vec()),
            pairs: Arc::new(pairs),
            edge_features,
        })
    }
}

/// Parameters of one attention head, as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub w: Var,
    pub a_src: Var,
    pub a_dst: Var,
    /// `W_e` (`2 x d_e`) and its block of the attention vector.
    pub edge: Option<(Var, Var)>,
}

/// Pair scores `LeakyReLU(a_src^T z_i + a_dst^T z_j [+ a_e^T W_e f_ij])` for `z = H W`.
pub fn attention_scores(tape: &mut Tape, ag: &AttentionGraph, z: Var, head: &HeadVars, slope: f64) -> Var {
    let s_src = tape.matmul(z, head.a_src);
    let s_dst = tape.matmul(z, head.a_dst);
    let src = tape.gather_rows(s_src, ag.owners.clone());
    let dst = tape.gather_rows(s_dst, ag.targets.clone());
    let mut scores = tape.add(src, dst);
    if let (Some((w_e, a_e)), Some(f)) = (head.edge, ag.edge_features.as_ref()) {
        let fv = tape.leaf((**f).clone());
        let fw = tape.matmul(fv, w_e);
        let se = tape.matmul(fw, a_e);
        scores = tape.add(scores, se);
    }
    tape.leaky_relu(scores, slope)
}

/// One head: `act(sum_j alpha_ij W h_j)` with softmax-normalized scores.
/// `coef_dropout` rescales the attention coefficients when training.
pub fn attention_head(
    tape: &mut Tape,
    ag: &AttentionGraph,
    h: Var,
    head: &HeadVars,
    slope: f64,
    coef_dropout: Option<Arc<Tensor>>,
    act: Activation,
) -> Var {
    let z = tape.matmul(h, head.w);
    let e = attention_scores(tape, ag, z, head, slope);
    let mut alpha = tape.edge_softmax(e, ag.pairs.clone());
    if let Some(mask) = coef_dropout {
        alpha = tape.mask(alpha, mask);
    }
    let agg = tape.edge_aggregate(alpha, z, ag.pairs.clone());
    activate(tape, agg, act)
}

#[cfg(test)]
mod tests {
    use super::*;
    use flexdiff_core::graph::named::*;

    #[test]
    fn gcn_operator_on_path() {
        let s = gcn_operator(&path(3));
        // degrees with self loops: 2, 3, 2
        assert!((s.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((s.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((s.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.get(0, 2), 0.0);
    }

    #[test]
    fn pd_operator_random_walk_is_row_normalized_adjacency() {
        let g = star(3);
        let p = pd_operator(&g, LaplacianParams::RANDOM_WALK).unwrap();
        assert!((p.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.get(1, 0) - 1.0).abs() < 1e-15);
        assert!(p.get(0, 0).abs() < 1e-15);
        // differs from the self-looped GCN operator
        assert!(gcn_operator(&g).get(0, 0) > 0.0);
    }

    #[test]
    fn zero_attention_vector_gives_zero_score() {
        let w = Tensor::from_fn(3, 2, |i, j| (i + j) as f64);
        assert_eq!(gat_attention(&[1.0, 2.0, 3.0], &[0.5, 0.0, 1.0], &w, &[0.0; 4], 0.2), 0.0);
    }

    #[test]
    fn zero_edge_projection_matches_plain_score() {
        let w = Tensor::from_fn(3, 2, |i, j| (i as f64 - j as f64) * 0.3);
        let we = Tensor::zeros(2, 2);
        let a = [0.1, -0.4, 0.7, 0.2, 0.9, -1.3];
        let plain = gat_attention(&[1.0, -2.0, 0.3], &[0.5, 0.1, 1.0], &w, &a[..4], 0.2);
        let pd = pd_gat_attention(&[1.0, -2.0, 0.3], &[0.5, 0.1, 1.0], &[0.4, -0.8], &w, Some(&we), &a, 0.2);
        assert_eq!(plain, pd);
        let zero_f = pd_gat_attention(&[1.0, -2.0, 0.3], &[0.5, 0.1, 1.0], &[0.0, 0.0], &w, Some(&Tensor::from_fn(2, 2, |_, _| 1.0)), &a, 0.2);
        assert_eq!(plain, zero_f);
    }
}
