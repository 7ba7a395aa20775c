//! Directional matrices built from an eigenvector field and the per-edge
//! feature table consumed by the attention models.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::param::LaplacianParams;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;
use crate::spectral::first_nontrivial;

/// `grad_ij = phi_j - phi_i` on the edge pattern.
pub fn gradient_field<T: Scalar>(g: &Graph, phi: &[T]) -> Result<CsrMatrix<T>> {
    if phi.len() != g.node_count() {
        return Err(Error::usage(format!(
            "field has length {}, graph has {} nodes",
            phi.len(),
            g.node_count()
        )));
    }
    let rows = (0..g.node_count())
        .map(|i| g.neighbors(i).iter().map(|&j| (j, phi[j] - phi[i])).collect())
        .collect();
    Ok(CsrMatrix::from_rows(g.node_count(), rows))
}

/// Directional average `|grad|`.
pub fn b_av<T: Scalar>(field: &CsrMatrix<T>) -> CsrMatrix<T> {
    let rows = (0..field.n_rows())
        .map(|i| field.row(i).map(|(j, v)| (j, v.abs())).collect())
        .collect();
    CsrMatrix::from_rows(field.n_cols(), rows)
}

/// Directional derivative `grad - diag(grad 1)`. The diagonal is stored
/// explicitly, even when zero.
pub fn b_dx<T: Scalar>(field: &CsrMatrix<T>) -> CsrMatrix<T> {
    let rows = (0..field.n_rows())
        .map(|i| {
            let mut row: Vec<(usize, T)> = field.row(i).collect();
            let sum = row.iter().fold(T::zero(), |acc, &(_, v)| acc + v);
            let pos = row.partition_point(|&(j, _)| j < i);
            row.insert(pos, (i, -sum));
            row
        })
        .collect();
    CsrMatrix::from_rows(field.n_cols(), rows)
}

/// `(B_av, B_dx)` per directed edge, indexed like the graph's CSR columns,
/// plus the retained `B_dx` diagonal for self pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatureTable<T> {
    params: LaplacianParams,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    features: Vec<[T; 2]>,
    self_dx: Vec<T>,
    degenerate: bool,
}

impl<T: Scalar> EdgeFeatureTable<T> {
    /// Tabulates both matrices for an explicit field.
    pub fn from_field(g: &Graph, phi: &[T], params: LaplacianParams) -> Result<Self> {
        let field = gradient_field(g, phi)?;
        let av = b_av(&field);
        let dx = b_dx(&field);
        let mut features = Vec::with_capacity(g.col_indices().len());
        let mut self_dx = Vec::with_capacity(g.node_count());
        for i in 0..g.node_count() {
            for (&j, (_, a)) in g.neighbors(i).iter().zip(av.row(i)) {
                features.push([a, dx.get(i, j)]);
            }
            self_dx.push(dx.get(i, i));
        }
        Ok(EdgeFeatureTable {
            params,
            row_offsets: g.row_offsets().to_vec(),
            col_indices: g.col_indices().to_vec(),
            features,
            self_dx,
            degenerate: false,
        })
    }

    pub fn params(&self) -> LaplacianParams {
        self.params
    }

    /// Set when the field came from a repeated first eigenvalue.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Features in CSR order of the graph they were built on.
    pub fn as_slice(&self) -> &[[T; 2]] {
        &self.features
    }

    /// Feature of directed edge `(i, j)`, or `None` if it is not an edge.
    pub fn get(&self, i: usize, j: usize) -> Option<[T; 2]> {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.features[span.start + k])
    }

    /// Self-pair feature `(0, B_dx_ii)`.
    pub fn self_feature(&self, i: usize) -> [T; 2] {
        [T::zero(), self.self_dx[i]]
    }

    /// Rows `i,j,b_av,b_dx`, one per directed edge.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,b_av,b_dx\n");
        for i in 0..self.row_offsets.len() - 1 {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let [a, d] = self.features[k];
                writeln!(out, "{},{},{},{}", i, self.col_indices[k], a, d).expect("string write");
            }
        }
        out
    }
}

/// Edge features from the first non-trivial eigenvector of `L(alpha, gamma)`.
pub fn edge_features<T: Scalar>(g: &Graph, p: LaplacianParams) -> Result<EdgeFeatureTable<T>> {
    let (phi, degenerate) = first_nontrivial::<T>(g, p)?;
    let mut table = EdgeFeatureTable::from_field(g, &phi, p)?;
    table.degenerate = degenerate;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::named::*;
    use crate::random::random_connected;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p3_field() {
        let g = path(3);
        let f = gradient_field(&g, &[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(f.get(0, 1), -1.0);
        assert_eq!(f.get(1, 2), -1.0);
        assert_eq!(f.get(1, 0), 1.0);
        let av = b_av(&f);
        assert_eq!((av.get(1, 0), av.get(1, 1), av.get(1, 2)), (1.0, 0.0, 1.0));
        let dx = b_dx(&f);
        assert_eq!(dx.get(1, 1), 0.0);
        assert_eq!(dx.get(0, 0), 1.0);
    }

    #[test]
    fn constant_field_is_zero() {
        let g = cycle(5);
        let f = gradient_field(&g, &[0.3; 5]).unwrap();
        let av = b_av(&f);
        let dx = b_dx(&f);
        for i in 0..5 {
            assert!(av.row(i).all(|(_, v)| v == 0.0));
            assert!(dx.row(i).all(|(_, v)| v == 0.0));
        }
    }

    #[test]
    fn structural_properties_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_connected(40, 0.1, &mut rng);
            let phi: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = gradient_field(&g, &phi).unwrap();
            let av = b_av(&f);
            let dx = b_dx(&f);
            for (i, j) in g.directed_edges() {
                assert_eq!(f.get(i, j), -f.get(j, i));
                assert!(av.get(i, j) >= 0.0);
                assert_eq!(av.get(i, j), dx.get(i, j).abs());
            }
            for i in 0..40 {
                let s: f64 = dx.row(i).map(|(_, v)| v).sum();
                assert!(s.abs() < 1e-12);
            }
            let neg: Vec<f64> = phi.iter().map(|v| -v).collect();
            let fneg = gradient_field(&g, &neg).unwrap();
            assert_eq!(b_av(&fneg), av);
            for (i, j) in g.directed_edges() {
                assert_eq!(b_dx(&fneg).get(i, j), -dx.get(i, j));
            }
        }
    }

    #[test]
    fn p3_edge_features() {
        let t = edge_features::<f64>(&path(3), LaplacianParams::RANDOM_WALK).unwrap();
        let s = 0.5f64.sqrt();
        let f01 = t.get(0, 1).unwrap();
        assert!((f01[0] - s).abs() < 1e-12);
        assert!((f01[1] + s).abs() < 1e-12);
        assert_eq!(t.get(1, 0).unwrap()[0], f01[0]);
        assert!(t.get(0, 2).is_none());
        assert_eq!(t.len(), 4);
        assert!((t.self_feature(0)[1] - s).abs() < 1e-12);
        assert!(t.to_csv().starts_with("i,j,b_av,b_dx\n0,1,"));
    }

    #[test]
    fn gamma_changes_table() {
        let g = crate::random::random_bounded_degree(40, 8, 30, &mut ChaCha8Rng::seed_from_u64(9));
        let a = edge_features::<f64>(&g, LaplacianParams::new(1.0, 0.2).unwrap()).unwrap();
        let b = edge_features::<f64>(&g, LaplacianParams::new(1.0, 1.0).unwrap()).unwrap();
        let diff = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()))
            .fold(0.0, f64::max);
        assert!(diff > 0.0);
        let again = edge_features::<f64>(&g, LaplacianParams::new(1.0, 0.2).unwrap()).unwrap();
        assert_eq!(a, again);
    }
}
