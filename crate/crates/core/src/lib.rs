//! Parameterized normalized graph Laplacians and the tooling around them:
//! spectral decompositions, diffusion and spectral distances, directional
//! edge features, gradient-node rewiring, synthetic homophily graphs and
//! homophily metrics.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! combinatorial Laplacian also works over integers. The aliases below fix
//! the common double-precision instantiations.

pub mod dense;
pub mod directional;
pub mod eigen;
pub mod error;
pub mod graph;
pub mod homophily;
mod lanczos;
pub mod laplacian;
pub mod param;
pub mod random;
pub mod rewire;
pub mod scalar;
pub mod sparse;
pub mod spectral;
pub mod stats;
pub mod synth;
pub mod verify;

pub use dense::{DenseMatrix, DENSE_LIMIT};
pub use directional::{b_av, b_dx, edge_features, gradient_field, EdgeFeatureTable};
pub use error::{Error, Result};
pub use graph::{DegreeVector, Graph};
pub use homophily::{metrics, HomophilyReport};
pub use laplacian::{combinatorial_laplacian, random_walk_laplacian, symmetric_laplacian};
pub use param::{diag_gamma, limit_check, param_adjacency, param_laplacian, DiagGamma, LaplacianParams};
pub use rewire::{gradient_node, rewire, RewireReport};
pub use scalar::Scalar;
pub use sparse::CsrMatrix;
pub use spectral::{eig_sym, EigvecView, SolverMode, SpectralDecomposition};
pub use synth::{generate, Dataset, Splits, SynthConfig};

pub type Matrix = DenseMatrix<f64>;
pub type IntMatrix = DenseMatrix<i64>;
pub type SparseMatrix = CsrMatrix<f64>;
pub type Decomposition = SpectralDecomposition<f64>;
pub type View = EigvecView<f64>;
pub type EdgeFeatures = EdgeFeatureTable<f64>;
