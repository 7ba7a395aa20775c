//! Random graph families used by the property checks and verifiers.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::Graph;

/// G(n, p) Erdős–Rényi graph.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges).expect("ids in range")
}

/// G(n, p) with every stray component linked to a random node of the
/// component holding node 0, so the result is always connected.
pub fn random_connected<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let g = erdos_renyi(n, p, rng);
    connect_components(&g, rng)
}

fn connect_components<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Graph {
    let labels = g.component_labels();
    let mut reached: Vec<usize> = (0..g.node_count()).filter(|&i| labels[i] == 0).collect();
    let mut extra = Vec::new();
    let mut roots: Vec<usize> = (0..g.node_count()).filter(|&i| labels[i] == i && i != 0).collect();
    roots.sort_unstable();
    for root in roots {
        let anchor = reached[rng.random_range(0..reached.len())];
        extra.push((root, anchor));
        reached.extend((0..g.node_count()).filter(|&i| labels[i] == root));
    }
    g.with_added_edges(&extra).expect("ids in range")
}

/// Connected random graph whose maximum degree never exceeds `max_degree`:
/// a random spanning tree (attachment restricted to unsaturated nodes)
/// followed by random extra edges between unsaturated pairs.
pub fn random_bounded_degree<R: Rng + ?Sized>(
    n: usize,
    max_degree: usize,
    extra_edges: usize,
    rng: &mut R,
) -> Graph {
    assert!(max_degree >= 2 || n <= 2, "a connected graph needs max degree >= 2");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    for k in 1..n {
        let open: Vec<usize> = order[..k].iter().copied().filter(|&v| degree[v] < max_degree).collect();
        let u = open[rng.random_range(0..open.len())];
        let v = order[k];
        degree[u] += 1;
        degree[v] += 1;
        edges.push((u, v));
    }
    let mut g = Graph::from_edges(n, edges.iter().copied()).expect("ids in range");
    let mut attempts = 0;
    let mut added = 0;
    while added < extra_edges && attempts < 50 * extra_edges.max(1) {
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || g.has_edge(u, v) || degree[u] >= max_degree || degree[v] >= max_degree {
            continue;
        }
        degree[u] += 1;
        degree[v] += 1;
        edges.push((u, v));
        added += 1;
        g = Graph::from_edges(n, edges.iter().copied()).expect("ids in range");
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_graphs_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..100 {
            let n = 2 + (k * 37) % 199;
            let g = erdos_renyi(n, 0.05, &mut rng);
            g.check_invariants().unwrap();
            let c = random_connected(n, 0.02, &mut rng);
            c.check_invariants().unwrap();
            assert!(c.is_connected());
        }
    }

    #[test]
    fn bounded_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let g = random_bounded_degree(50, 10, 80, &mut rng);
            g.check_invariants().unwrap();
            assert!(g.is_connected());
            assert!(g.degrees().max() <= 10);
        }
    }
}
