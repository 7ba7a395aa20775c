//! Topology-guided rewiring: every node in the lower half of the spectral
//! embedding that is not already a neighbor of the gradient node gets an
//! edge to it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::param::LaplacianParams;
use crate::spectral::first_nontrivial;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewireReport {
    pub gradient_node: usize,
    pub added_edges: Vec<(usize, usize)>,
    pub params: LaplacianParams,
    /// `max phi - min phi`.
    pub span: f64,
    /// Nodes with `phi_grad - phi_i >= threshold` are candidates.
    pub threshold: f64,
    pub degenerate: bool,
}

/// Argmax of `phi`, lowest index on ties.
pub fn gradient_node(phi: &[f64]) -> Result<usize> {
    if phi.is_empty() {
        return Err(Error::usage("empty eigenvector"));
    }
    let mut best = 0;
    for (i, &v) in phi.iter().enumerate().skip(1) {
        if v > phi[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Rewires `g` with the first non-trivial eigenvector of `L(alpha, gamma)`.
pub fn rewire(g: &Graph, p: LaplacianParams) -> Result<(Graph, RewireReport)> {
    g.require_connected()?;
    let (phi, degenerate) = first_nontrivial::<f64>(g, p)?;
    let (out, mut report) = rewire_with_embedding(g, &phi, p)?;
    report.degenerate = degenerate;
    Ok((out, report))
}

/// Applies the rule for a fixed embedding `phi`.
pub fn rewire_with_embedding(
    g: &Graph,
    phi: &[f64],
    p: LaplacianParams,
) -> Result<(Graph, RewireReport)> {
    if phi.len() != g.node_count() {
        return Err(Error::usage("embedding length differs from node count"));
    }
    let grad = gradient_node(phi)?;
    let lo = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let span = phi[grad] - lo;
    let threshold = 0.5 * span;
    let added_edges: Vec<(usize, usize)> = (0..g.node_count())
        .filter(|&v| v != grad && !g.has_edge(v, grad) && phi[grad] - phi[v] >= threshold)
        .map(|v| (v.min(grad), v.max(grad)))
        .collect();
    let out = g.with_added_edges(&added_edges)?;
    Ok((
        out,
        RewireReport {
            gradient_node: grad,
            added_edges,
            params: p,
            span,
            threshold,
            degenerate: false,
        },
    ))
}
