//! Edge, node, class, adjusted edge, label-informativeness and aggregation
//! homophily.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomophilyReport {
    pub h_edge: f64,
    pub h_node: f64,
    pub h_class: f64,
    /// NaN when every edge endpoint falls in one class.
    pub h_edge_adjusted: f64,
    /// NaN when every edge endpoint falls in one class.
    pub label_informativeness: f64,
    pub h_agg: f64,
    pub flags: HomophilyFlags,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HomophilyFlags {
    /// Nodes without neighbors, skipped by `h_node`.
    pub isolated_nodes: usize,
    pub degenerate_class_distribution: bool,
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

pub fn metrics(g: &Graph, labels: &[usize], c: usize) -> Result<HomophilyReport> {
    let n = g.node_count();
    if labels.len() != n {
        return Err(Error::usage(format!("{} labels for {} nodes", labels.len(), n)));
    }
    if let Some(&z) = labels.iter().find(|&&z| z >= c) {
        return Err(Error::data(format!("label {z} outside [0, {c})")));
    }
    if g.edge_count() == 0 {
        return Err(Error::data("homophily is undefined on a graph without edges"));
    }
    let half_edges = (2 * g.edge_count()) as f64;

    // pair[c1][c2]: directed half-edges from class c1 to class c2
    let mut pair = vec![vec![0u64; c]; c];
    let mut node_sum = 0.0;
    let mut isolated = 0;
    for i in 0..n {
        let nb = g.neighbors(i);
        if nb.is_empty() {
            isolated += 1;
            continue;
        }
        let mut same = 0;
        for &j in nb {
            pair[labels[i]][labels[j]] += 1;
            same += usize::from(labels[i] == labels[j]);
        }
        node_sum += same as f64 / nb.len() as f64;
    }
    let intra: u64 = (0..c).map(|k| pair[k][k]).sum();
    let h_edge = intra as f64 / half_edges;
    let h_node = if n > isolated { node_sum / (n - isolated) as f64 } else { f64::NAN };

    let degree_mass: Vec<u64> = (0..c).map(|k| pair[k].iter().sum()).collect();
    let p: Vec<f64> = degree_mass.iter().map(|&m| m as f64 / half_edges).collect();
    let sum_p2: f64 = p.iter().map(|x| x * x).sum();
    let degenerate = (1.0 - sum_p2).abs() < 1e-15;
    let h_edge_adjusted = if degenerate {
        f64::NAN
    } else {
        (h_edge - sum_p2) / (1.0 - sum_p2)
    };

    let entropy_c: f64 = p.iter().map(|&x| xlnx(x)).sum();
    let entropy_pair: f64 = pair
        .iter()
        .flatten()
        .map(|&k| xlnx(k as f64 / half_edges))
        .sum();
    let label_informativeness = if degenerate {
        f64::NAN
    } else {
        2.0 - entropy_pair / entropy_c
    };

    let mut class_size = vec![0usize; c];
    for &z in labels {
        class_size[z] += 1;
    }
    let h_class = (0..c)
        .map(|k| {
            if degree_mass[k] == 0 {
                return 0.0;
            }
            let hk = pair[k][k] as f64 / degree_mass[k] as f64;
            (hk - class_size[k] as f64 / n as f64).max(0.0)
        })
        .sum::<f64>()
        / (c as f64 - 1.0);

    Ok(HomophilyReport {
        h_edge,
        h_node,
        h_class,
        h_edge_adjusted,
        label_informativeness,
        h_agg: aggregation_homophily(g, labels, c, &class_size),
        flags: HomophilyFlags {
            isolated_nodes: isolated,
            degenerate_class_distribution: degenerate,
        },
    })
}

/// Fraction of nodes whose mean post-aggregation similarity to same-class
/// nodes is at least that to other-class nodes, with `S = (A+I)Z ((A+I)Z)^T`.
///
/// Row sums of `S` over a class `k` equal `<(AZ)_i, T_k>` where `T_k` sums the
/// rows of `(A+I)Z` in class `k`, so `S` is never formed. All quantities are
/// integers and the comparison of means is done by cross-multiplication.
fn aggregation_homophily(g: &Graph, labels: &[usize], c: usize, class_size: &[usize]) -> f64 {
    let n = g.node_count();
    let mut az = vec![0u64; n * c];
    for i in 0..n {
        az[i * c + labels[i]] += 1;
        for &j in g.neighbors(i) {
            az[i * c + labels[j]] += 1;
        }
    }
    let mut totals = vec![0u64; c * c];
    for i in 0..n {
        for k in 0..c {
            totals[labels[i] * c + k] += az[i * c + k];
        }
    }
    let mut satisfied = 0usize;
    for i in 0..n {
        let row = &az[i * c..(i + 1) * c];
        let sim = |k: usize| -> u128 {
            row.iter()
                .zip(&totals[k * c..(k + 1) * c])
                .map(|(&a, &b)| a as u128 * b as u128)
                .sum()
        };
        let zi = labels[i];
        let same_count = class_size[zi] as u128;
        let other_count = (n - class_size[zi]) as u128;
        if other_count == 0 {
            satisfied += 1;
            continue;
        }
        let same = sim(zi);
        let other: u128 = (0..c).filter(|&k| k != zi).map(sim).sum();
        if same * other_count >= other * same_count {
            satisfied += 1;
        }
    }
    satisfied as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::graph::named::*;
    use crate::random::random_connected;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixtures() {
        let k3 = complete(3);
        let r = metrics(&k3, &[0, 1, 2], 3).unwrap();
        assert_eq!((r.h_edge, r.h_node), (0.0, 0.0));
        let r = metrics(&k3, &[0, 0, 0], 1).unwrap();
        assert_eq!((r.h_edge, r.h_node), (1.0, 1.0));
        assert!(r.h_edge_adjusted.is_nan() && r.label_informativeness.is_nan());
        assert!(r.flags.degenerate_class_distribution);
        assert_eq!(r.h_agg, 1.0);
        let r = metrics(&path(3), &[0, 0, 1], 2).unwrap();
        assert_eq!((r.h_edge, r.h_node), (0.5, 0.5));
    }

    #[test]
    fn p3_remaining_metrics() {
        // p = (3/4, 1/4); pairs (0,0)=2/4, (0,1)=(1,0)=1/4
        let r = metrics(&path(3), &[0, 0, 1], 2).unwrap();
        let sp = 0.75f64.powi(2) + 0.25f64.powi(2);
        assert!((r.h_edge_adjusted - (0.5 - sp) / (1.0 - sp)).abs() < 1e-15);
        let hc = 0.75f64.ln() * 0.75 + 0.25 * 0.25f64.ln();
        let hp = 0.5 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln();
        assert!((r.label_informativeness - (2.0 - hp / hc)).abs() < 1e-15);
        // h_0 = 2/3 vs 2/3 -> 0; h_1 = 0
        assert!(r.h_class.abs() < 1e-15);
    }

    /// Appendix formula with the full similarity matrix.
    fn h_agg_dense(g: &Graph, labels: &[usize], c: usize) -> f64 {
        let n = g.node_count();
        let ahat = DenseMatrix::from_fn(n, n, |i, j| if i == j || g.has_edge(i, j) { 1.0 } else { 0.0 });
        let z = DenseMatrix::from_fn(n, c, |i, k| if labels[i] == k { 1.0 } else { 0.0 });
        let az = ahat.matmul(&z);
        let s = az.matmul(&az.transpose());
        let mut count = 0;
        for i in 0..n {
            let same: Vec<f64> = (0..n).filter(|&j| labels[j] == labels[i]).map(|j| s[(i, j)]).collect();
            let diff: Vec<f64> = (0..n).filter(|&j| labels[j] != labels[i]).map(|j| s[(i, j)]).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            if diff.is_empty() || mean(&same) >= mean(&diff) {
                count += 1;
            }
        }
        count as f64 / n as f64
    }

    #[test]
    fn h_agg_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let g = random_connected(40, 0.1, &mut rng);
            let labels: Vec<usize> = (0..40).map(|_| rng.random_range(0..4)).collect();
            let r = metrics(&g, &labels, 4).unwrap();
            assert_eq!(r.h_agg, h_agg_dense(&g, &labels, 4));
        }
    }

    #[test]
    fn ranges_and_edge_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let g = random_connected(60, 0.08, &mut rng);
            let labels: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
            let r = metrics(&g, &labels, 3).unwrap();
            // sum_k z_k^T A z_k / 2|E|
            let quad: f64 = (0..3)
                .map(|k| {
                    g.directed_edges()
                        .filter(|&(i, j)| labels[i] == k && labels[j] == k)
                        .count() as f64
                })
                .sum();
            assert!((r.h_edge - quad / (2 * g.edge_count()) as f64).abs() < 1e-12);
            for v in [r.h_edge, r.h_node, r.h_class, r.h_agg] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(r.h_edge_adjusted <= 1.0);
            assert!(r.label_informativeness <= 2.0);
        }
    }

    #[test]
    fn isolated_nodes_flagged() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        let r = metrics(&g, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.flags.isolated_nodes, 1);
        assert!((r.h_node - 0.5).abs() < 1e-15);
    }
}
