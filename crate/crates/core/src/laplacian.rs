//! The classical Laplacians: combinatorial `L = D - A`, random-walk
//! `D^-1 L` and symmetric `D^-1/2 L D^-1/2`.

use num_traits::{FromPrimitive, Num};

use crate::dense::{check_dense_size, DenseMatrix};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// Matrix-free `L = D - A`. Works over any numeric type, including integers.
#[derive(Debug, Clone, Copy)]
pub struct CombinatorialLaplacian<'g> {
    graph: &'g Graph,
}

pub fn combinatorial_laplacian(g: &Graph) -> CombinatorialLaplacian<'_> {
    CombinatorialLaplacian { graph: g }
}

fn count<T: FromPrimitive>(d: usize) -> T {
    T::from_usize(d).expect("degree representable")
}

impl<'g> CombinatorialLaplacian<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn apply<T: Copy + Num + FromPrimitive>(&self, x: &[T]) -> Vec<T> {
        let g = self.graph;
        assert_eq!(x.len(), g.node_count(), "vector length must equal node count");
        (0..g.node_count())
            .map(|i| {
                let nb = g.neighbors(i).iter().fold(T::zero(), |acc, &j| acc + x[j]);
                count::<T>(g.degree(i)) * x[i] - nb
            })
            .collect()
    }

    /// Entry `L_ij`.
    pub fn entry<T: Copy + Num + FromPrimitive>(&self, i: usize, j: usize) -> T {
        if i == j {
            count(self.graph.degree(i))
        } else if self.graph.has_edge(i, j) {
            T::zero() - T::one()
        } else {
            T::zero()
        }
    }

    pub fn to_dense<T: Copy + Num + FromPrimitive>(&self) -> Result<DenseMatrix<T>> {
        let n = self.graph.node_count();
        check_dense_size(n)?;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = count(self.graph.degree(i));
            for &j in self.graph.neighbors(i) {
                m[(i, j)] = T::zero() - T::one();
            }
        }
        Ok(m)
    }
}

fn require_no_isolated(g: &Graph) -> Result<()> {
    match (0..g.node_count()).find(|&i| g.degree(i) == 0) {
        Some(i) => Err(Error::data(format!("node {i} is isolated; D^-1 undefined"))),
        None => Ok(()),
    }
}

/// Dense `L_rw = D^-1 L`, built entrywise as `delta_ij - a_ij / d_i`.
pub fn random_walk_laplacian<T: Scalar>(g: &Graph) -> Result<DenseMatrix<T>> {
    require_no_isolated(g)?;
    let n = g.node_count();
    check_dense_size(n)?;
    let mut m = DenseMatrix::identity(n);
    for i in 0..n {
        let inv = T::one() / T::of(g.degree(i) as f64);
        for &j in g.neighbors(i) {
            m[(i, j)] = -inv;
        }
    }
    Ok(m)
}

/// Dense `L_sym = D^-1/2 L D^-1/2`, built entrywise as `delta_ij - a_ij / sqrt(d_i d_j)`.
pub fn symmetric_laplacian<T: Scalar>(g: &Graph) -> Result<DenseMatrix<T>> {
    require_no_isolated(g)?;
    let n = g.node_count();
    check_dense_size(n)?;
    let mut m = DenseMatrix::identity(n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            let dd = T::of((g.degree(i) * g.degree(j)) as f64);
            m[(i, j)] = -T::one() / dd.sqrt();
        }
    }
    Ok(m)
}
