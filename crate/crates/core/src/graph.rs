//! Undirected simple graphs in compressed sparse row form.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Immutable undirected simple graph.
///
/// Every undirected edge is stored in both directions; each row of
/// `col_indices` is strictly increasing and never contains the row itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_count: usize,
}

/// Node degrees, `d[i] = |N(i)|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(pub Vec<usize>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl Graph {
    /// Builds a graph on `n` nodes from arbitrary edge pairs. Self-loops are
    /// dropped and duplicates (in either orientation) merged.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::data(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        let edge_count = col_indices.len() / 2;
        Ok(Graph {
            n,
            row_offsets,
            col_indices,
            edge_count,
        })
    }

    /// Parses the edge-list text format: one `u v` pair per line, `#` comment
    /// lines and blank lines ignored. The node count is `max id + 1`.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_id: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (a, b) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected two node ids, got {line:?}"),
                    })
                }
            };
            let u = parse_id(a, lineno + 1)?;
            let v = parse_id(b, lineno + 1)?;
            max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
            edges.push((u, v));
        }
        let n = max_id.map_or(0, |m| m + 1);
        Graph::from_edges(n, edges)
    }

    /// Same as [`Graph::parse_edge_list`] but with an explicit node count, so
    /// that trailing isolated nodes survive a round trip.
    pub fn parse_edge_list_with_nodes(text: &str, n: usize) -> Result<Self> {
        let g = Graph::parse_edge_list(text)?;
        if g.n > n {
            return Err(Error::data(format!(
                "edge list references node {} but the node count is {n}",
                g.n - 1
            )));
        }
        Graph::from_edges(n, g.edges())
    }

    /// Renders the graph in the edge-list format, each edge once with `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {} edges {}", self.n, self.edge_count);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn degrees(&self) -> DegreeVector {
        DegreeVector((0..self.n).map(|i| self.degree(i)).collect())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Position of the directed entry `(i, j)` inside `col_indices`.
    pub fn edge_position(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors(i)
            .binary_search(&j)
            .ok()
            .map(|k| self.row_offsets[i] + k)
    }

    /// Undirected edges, each once with `u < v`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Directed edges `(i, j)` in CSR order, both orientations.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// Returns a new graph with the extra edges merged in.
    pub fn with_added_edges(&self, extra: &[(usize, usize)]) -> Result<Self> {
        Graph::from_edges(self.n, self.edges().chain(extra.iter().copied()))
    }

    /// Hop distances from `src`; unreachable nodes get `None`.
    pub fn bfs_distances(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        if src >= self.n {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// True iff a breadth-first search from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        self.n >= 1 && self.bfs_distances(0).iter().all(Option::is_some)
    }

    pub(crate) fn require_connected(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::data("graph has no nodes"));
        }
        if !self.is_connected() {
            return Err(Error::data(
                "graph is disconnected; route it through largest_component first",
            ));
        }
        Ok(())
    }

    /// Component label per node; labels are the smallest node id in the component.
    pub fn component_labels(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            label[start] = start;
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = start;
                        queue.push_back(v);
                    }
                }
            }
        }
        label
    }

    /// Induced subgraph of the largest connected component (ties broken by
    /// the smallest contained node id) and the old-to-new id map.
    pub fn largest_component(&self) -> (Graph, Vec<Option<usize>>) {
        let labels = self.component_labels();
        let mut sizes = vec![0usize; self.n];
        for &l in &labels {
            sizes[l] += 1;
        }
        // Labels are the minimum id of their component, so scanning in id order
        // and keeping the first strict maximum implements the tie rule.
        let mut best = 0;
        for l in 0..self.n {
            if sizes[l] > sizes[best] {
                best = l;
            }
        }
        let mut map = vec![None; self.n];
        let mut next = 0;
        for (i, &l) in labels.iter().enumerate() {
            if l == best {
                map[i] = Some(next);
                next += 1;
            }
        }
        let edges = self.edges().filter_map(|(u, v)| Some((map[u]?, map[v]?)));
        let sub = Graph::from_edges(next, edges).expect("remapped ids are in range");
        (sub, map)
    }

    /// Checks the structural invariants: offsets, sortedness, no self-loops,
    /// symmetry, and degree consistency.
    pub fn check_invariants(&self) -> Result<()> {
        if self.row_offsets.len() != self.n + 1 || self.row_offsets[0] != 0 {
            return Err(Error::data("row offsets malformed"));
        }
        if self.row_offsets[self.n] != self.col_indices.len()
            || self.col_indices.len() != 2 * self.edge_count
        {
            return Err(Error::data("offset/edge count mismatch"));
        }
        for i in 0..self.n {
            if self.row_offsets[i + 1] < self.row_offsets[i] {
                return Err(Error::data(format!("row offsets decrease at {i}")));
            }
            let row = self.neighbors(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::data(format!("row {i} not strictly increasing")));
            }
            for &j in row {
                if j >= self.n {
                    return Err(Error::data(format!("row {i} has out-of-range column {j}")));
                }
                if j == i {
                    return Err(Error::data(format!("self-loop at {i}")));
                }
                if !self.has_edge(j, i) {
                    return Err(Error::data(format!("edge ({i},{j}) lacks its reverse")));
                }
            }
        }
        let total: usize = self.degrees().0.iter().sum();
        if total != 2 * self.edge_count {
            return Err(Error::data("degree sum differs from 2|E|"));
        }
        Ok(())
    }
}

fn parse_id(tok: &str, line: usize) -> Result<usize> {
    let value: i64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid node id {tok:?}"),
    })?;
    if value < 0 {
        return Err(Error::Parse {
            line,
            msg: format!("negative node id {value}"),
        });
    }
    Ok(value as usize)
}

/// Small named graphs used throughout the tests and examples.
pub mod named {
    use super::Graph;

    pub fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("valid path")
    }

    pub fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).expect("valid cycle")
    }

    pub fn complete(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
            .expect("valid complete graph")
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("valid star")
    }
}

#[cfg(test)]
mod tests {
    use super::named::*;
    use super::*;

    #[test]
    fn parse_path() {
        let g = Graph::parse_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g, path(3));
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn parse_dedups_and_strips_loops() {
        let g = Graph::parse_edge_list("0 1\n1 0\n0 0").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        g.check_invariants().unwrap();
    }

    #[test]
    fn parse_triangle_with_comments() {
        let g = Graph::parse_edge_list("# triangle\n\n0 1\n0 2\n  1 2  \n").unwrap();
        assert_eq!(g, complete(3));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Graph::parse_edge_list("0 1\n# ok\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match Graph::parse_edge_list("0 -1") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Graph::parse_edge_list("0 1 2").is_err());
        assert!(Graph::parse_edge_list("7").is_err());
    }

    #[test]
    fn connectivity() {
        assert!(path(3).is_connected());
        assert!(complete(3).is_connected());
        let two = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!two.is_connected());
        assert!(matches!(two.require_connected(), Err(Error::Data(_))));
    }

    #[test]
    fn largest_component_cases() {
        let (k3, map) = complete(3).largest_component();
        assert_eq!(k3, complete(3));
        assert_eq!(map, vec![Some(0), Some(1), Some(2)]);

        let g = Graph::from_edges(5, [(0, 1), (2, 3), (3, 4), (2, 4)]).unwrap();
        let (tri, map) = g.largest_component();
        assert_eq!(tri, complete(3));
        assert_eq!(map, vec![None, None, Some(0), Some(1), Some(2)]);

        let g = Graph::from_edges(6, [(0, 1), (1, 2)]).unwrap();
        let (p3, map) = g.largest_component();
        assert_eq!(p3, path(3));
        assert_eq!(map[5], None);

        // equal sizes: the component holding node 0 wins
        let g = Graph::from_edges(4, [(2, 3), (0, 1)]).unwrap();
        let (_, map) = g.largest_component();
        assert_eq!(map, vec![Some(0), Some(1), None, None]);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Graph::from_edges(6, [(0, 3), (3, 5), (1, 2)]).unwrap();
        let back = Graph::parse_edge_list_with_nodes(&g.to_edge_list(), 6).unwrap();
        assert_eq!(back, g);
        assert!(Graph::parse_edge_list_with_nodes("0 9", 3).is_err());
    }

    #[test]
    fn bfs_on_cycle() {
        let d = cycle(6).bfs_distances(0);
        assert_eq!(d, vec![Some(0), Some(1), Some(2), Some(3), Some(2), Some(1)]);
    }
}
