//! The parameterized normalized Laplacian family
//! `L(a,g) = g [gD + (1-g)I]^-a  L  [gD + (1-g)I]^(a-1)` and its adjacency
//! counterpart `P(a,g) = I - L(a,g)`.
//!
//! `a = 1, g = 1` gives the random-walk Laplacian, `a = 1/2, g = 1` the
//! symmetric one. `g -> 0` recovers the combinatorial Laplacian after
//! dividing by `g` (see [`limit_check`]).

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::laplacian::combinatorial_laplacian;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// A member of the Laplacian family: `alpha` in `[0, 1]`, `gamma` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct LaplacianParams {
    alpha: f64,
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    gamma: f64,
}

impl TryFrom<RawParams> for LaplacianParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        LaplacianParams::new(raw.alpha, raw.gamma)
    }
}

impl From<LaplacianParams> for RawParams {
    fn from(p: LaplacianParams) -> Self {
        RawParams {
            alpha: p.alpha,
            gamma: p.gamma,
        }
    }
}

impl LaplacianParams {
    pub const RANDOM_WALK: LaplacianParams = LaplacianParams {
        alpha: 1.0,
        gamma: 1.0,
    };
    pub const SYMMETRIC: LaplacianParams = LaplacianParams {
        alpha: 0.5,
        gamma: 1.0,
    };

    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param(format!("alpha = {alpha} outside [0, 1]")));
        }
        check_gamma(gamma)?;
        Ok(LaplacianParams { alpha, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        LaplacianParams::new(alpha, self.gamma)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("gamma = {gamma} outside (0, 1]")))
    }
}

/// Diagonal of `gD + (1-g)I`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGamma<T> {
    entries: Vec<T>,
}

impl<T: Scalar> DiagGamma<T> {
    pub fn new(g: &Graph, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let gm = T::of(gamma);
        let rest = T::one() - gm;
        let entries = (0..g.node_count())
            .map(|i| gm * T::of(g.degree(i) as f64) + rest)
            .collect::<Vec<T>>();
        if let Some(i) = entries.iter().position(|&e| e <= T::zero()) {
            return Err(Error::data(format!(
                "node {i} is isolated and gamma = 1; the diagonal is singular"
            )));
        }
        Ok(DiagGamma { entries })
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    /// Entrywise `e^p`, evaluated as `exp(p ln e)`.
    pub fn power(&self, p: f64) -> Vec<T> {
        let p = T::of(p);
        self.entries.iter().map(|&e| (p * e.ln()).exp()).collect()
    }
}

pub fn diag_gamma<T: Scalar>(g: &Graph, p: LaplacianParams) -> Result<DiagGamma<T>> {
    DiagGamma::new(g, p.gamma)
}

/// Matrix-free `L(a,g)`, applied as diagonal scaling, `L`, diagonal scaling.
#[derive(Debug, Clone)]
pub struct ParamLaplacian<'g, T> {
    graph: &'g Graph,
    params: LaplacianParams,
    // gamma * e^-alpha
    left: Vec<T>,
    // e^(alpha - 1)
    right: Vec<T>,
}

pub fn param_laplacian<T: Scalar>(g: &Graph, p: LaplacianParams) -> Result<ParamLaplacian<'_, T>> {
    let diag = DiagGamma::<T>::new(g, p.gamma)?;
    let gm = T::of(p.gamma);
    let left = diag.power(-p.alpha).into_iter().map(|v| gm * v).collect();
    let right = diag.power(p.alpha - 1.0);
    Ok(ParamLaplacian {
        graph: g,
        params: p,
        left,
        right,
    })
}

impl<'g, T: Scalar> ParamLaplacian<'g, T> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn params(&self) -> LaplacianParams {
        self.params
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let scaled: Vec<T> = x.iter().zip(&self.right).map(|(&a, &b)| a * b).collect();
        combinatorial_laplacian(self.graph)
            .apply(&scaled)
            .into_iter()
            .zip(&self.left)
            .map(|(a, &b)| a * b)
            .collect()
    }

    /// Entry `L(a,g)_ij`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        let l: T = combinatorial_laplacian(self.graph).entry(i, j);
        self.left[i] * l * self.right[j]
    }

    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        let l: DenseMatrix<T> = combinatorial_laplacian(self.graph).to_dense()?;
        Ok(l.scale_rows_cols(&self.left, &self.right))
    }
}

/// Matrix-free `P(a,g) = I - L(a,g)`.
#[derive(Debug, Clone)]
pub struct ParamAdjacency<'g, T> {
    laplacian: ParamLaplacian<'g, T>,
}

pub fn param_adjacency<T: Scalar>(g: &Graph, p: LaplacianParams) -> Result<ParamAdjacency<'_, T>> {
    Ok(ParamAdjacency {
        laplacian: param_laplacian(g, p)?,
    })
}

impl<'g, T: Scalar> ParamAdjacency<'g, T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.laplacian
            .apply(x)
            .into_iter()
            .zip(x)
            .map(|(lx, &xi)| xi - lx)
            .collect()
    }

    /// Dense `I - L(a,g)`, straight from the definition.
    pub fn to_dense(&self) -> Result<DenseMatrix<T>> {
        Ok(DenseMatrix::identity(self.laplacian.graph.node_count()).sub(&self.laplacian.to_dense()?))
    }

    /// Sparse form on the edge pattern plus the diagonal, assembled from the
    /// factorization `e^-a (gA + (1-g)I) e^(a-1)`. Not limited by the dense size cap.
    pub fn to_sparse(&self) -> CsrMatrix<T> {
        let g = self.laplacian.graph;
        let p = self.laplacian.params;
        let diag = DiagGamma::<T>::new(g, p.gamma).expect("validated at construction");
        let left = diag.power(-p.alpha);
        let right = diag.power(p.alpha - 1.0);
        let gm = T::of(p.gamma);
        let self_weight = T::one() - gm;
        let rows = (0..g.node_count())
            .map(|i| {
                let mut row: Vec<(usize, T)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&j| (j, left[i] * gm * right[j]))
                    .collect();
                let pos = row.partition_point(|&(j, _)| j < i);
                row.insert(pos, (i, left[i] * self_weight * right[i]));
                row
            })
            .collect();
        CsrMatrix::from_rows(g.node_count(), rows)
    }
}

/// `max |(1/g) L(a,g) - L|` for each `g` in a strictly decreasing grid.
///
/// Evaluated entrywise over the edge pattern and the diagonal, so it needs
/// no dense materialization.
pub fn limit_check(g: &Graph, alpha: f64, gammas: &[f64]) -> Result<Vec<f64>> {
    if gammas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("gamma grid must be strictly decreasing"));
    }
    let comb = combinatorial_laplacian(g);
    gammas
        .iter()
        .map(|&gamma| {
            let op = param_laplacian::<f64>(g, LaplacianParams::new(alpha, gamma)?)?;
            let mut worst = 0.0f64;
            for i in 0..g.node_count() {
                let diag_dev = (op.entry(i, i) / gamma - comb.entry::<f64>(i, i)).abs();
                worst = worst.max(diag_dev);
                for &j in g.neighbors(i) {
                    let dev = (op.entry(i, j) / gamma - comb.entry::<f64>(i, j)).abs();
                    worst = worst.max(dev);
                }
            }
            Ok(worst)
        })
        .collect()
}
