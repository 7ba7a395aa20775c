//! Eigendecomposition of the symmetric member `L(1/2, g)`, the similarity
//! transform to any `alpha`, and the diffusion and spectral distances built
//! on top of it.
//!
//! Eigenvector sign convention: within each column the entry of largest
//! magnitude is positive (ties go to the lowest index).

use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::eigen::SymmetricEigen;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::lanczos::{smallest_pairs, LanczosOptions};
use crate::param::{param_laplacian, DiagGamma, LaplacianParams};
use crate::scalar::Scalar;

/// Gap `lambda_2 - lambda_1` below which the first non-trivial eigenvalue is
/// treated as repeated.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Bound on the trivial eigenvalue and on the range slack.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;
pub const ITERATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Dense,
    Iterative,
}

/// Eigenpairs of `L(1/2, g)`: the trivial pair at index 0 followed by `k`
/// non-trivial pairs in ascending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T> {
    params: LaplacianParams,
    eigenvalues: Vec<T>,
    eigvecs_sym: DenseMatrix<T>,
    diag_gamma: DiagGamma<T>,
    k: usize,
    degenerate: bool,
}

/// Flips `v` so that its largest-magnitude entry (lowest index on ties) is positive.
pub fn fix_sign<T: Scalar>(v: &mut [T]) {
    let peak = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if peak == T::zero() {
        return;
    }
    let slack = peak * T::of(1e-12);
    let lead = v
        .iter()
        .position(|x| x.abs() >= peak - slack)
        .expect("peak is attained");
    if v[lead] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let nrm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if nrm > T::zero() {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// Eigendecomposition of `L(1/2, gamma)`.
///
/// `Dense` computes the full spectrum and ignores `k`. `Iterative` computes
/// the `k` smallest non-trivial pairs by Lanczos with the analytic null
/// vector `e^1/2 1` deflated.
pub fn eig_sym<T: Scalar>(
    g: &Graph,
    gamma: f64,
    k: usize,
    mode: SolverMode,
) -> Result<SpectralDecomposition<T>> {
    g.require_connected()?;
    let n = g.node_count();
    let params = LaplacianParams::new(0.5, gamma)?;
    let op = param_laplacian::<T>(g, params)?;
    let diag_gamma = DiagGamma::<T>::new(g, gamma)?;

    let mut null: Vec<T> = diag_gamma.power(0.5);
    normalize(&mut null);
    fix_sign(&mut null);

    let (mut eigenvalues, mut columns) = (vec![T::zero()], vec![null.clone()]);
    let tol = match mode {
        SolverMode::Dense => {
            let dense = op.to_dense()?;
            let eig = SymmetricEigen::new(&dense)?;
            if eig.values[0].abs().as_f64() > ZERO_EIGENVALUE_TOL {
                return Err(Error::numerical(format!(
                    "smallest eigenvalue {} is not zero on a connected graph",
                    eig.values[0]
                )));
            }
            for j in 1..n {
                eigenvalues.push(eig.values[j]);
                columns.push(eig.vectors.column(j));
            }
            T::dense_tolerance()
        }
        SolverMode::Iterative => {
            if k == 0 || k + 1 > n {
                return Err(Error::usage(format!("k = {k} must lie in [1, n-1 = {}]", n - 1)));
            }
            let opts = LanczosOptions {
                tolerance: ITERATIVE_TOL,
                max_steps: 10 * n,
            };
            let pairs = locked_lanczos(&op, &null, k, &opts)?;
            for (val, vec) in pairs {
                eigenvalues.push(val);
                columns.push(vec);
            }
            T::of(ITERATIVE_TOL)
        }
    };

    for col in columns.iter_mut() {
        fix_sign(col);
    }
    for (val, col) in eigenvalues.iter().zip(&columns).skip(1) {
        let lv = op.apply(col);
        let res = lv
            .iter()
            .zip(col)
            .map(|(&a, &b)| (a - *val * b) * (a - *val * b))
            .sum::<T>()
            .sqrt();
        if res > tol {
            return Err(Error::numerical(format!(
                "eigenpair residual {res} exceeds tolerance {tol}"
            )));
        }
    }
    let k = eigenvalues.len() - 1;
    let degenerate = k >= 2 && (eigenvalues[2] - eigenvalues[1]).as_f64() < DEGENERACY_GAP;
    let eigvecs_sym = DenseMatrix::from_fn(n, k + 1, |i, j| columns[j][i]);
    Ok(SpectralDecomposition {
        params,
        eigenvalues,
        eigvecs_sym,
        diag_gamma,
        k,
        degenerate,
    })
}

/// Lanczos for `k` pairs, then repeated one-pair searches in the complement
/// of everything found so far to catch copies of repeated eigenvalues that a
/// single Krylov sequence cannot see.
fn locked_lanczos<T: Scalar>(
    op: &crate::param::ParamLaplacian<'_, T>,
    null: &[T],
    k: usize,
    opts: &LanczosOptions,
) -> Result<Vec<(T, Vec<T>)>> {
    let n = op.graph().node_count();
    let mut pairs = smallest_pairs(op, &[null.to_vec()], k, opts, 0)?;
    let mut stream = 1;
    while pairs.len() + 1 < n {
        let mut deflate = vec![null.to_vec()];
        deflate.extend(pairs.iter().map(|(_, v)| v.clone()));
        let extra = smallest_pairs(op, &deflate, 1, opts, stream)?;
        stream += 1;
        let (val, vec) = extra.into_iter().next().expect("one pair requested");
        let kth = pairs.last().map(|p| p.0).unwrap_or(T::infinity());
        if val >= kth - T::of(opts.tolerance) {
            break;
        }
        pairs.push((val, vec));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        pairs.truncate(k);
    }
    Ok(pairs)
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn params(&self) -> LaplacianParams {
        self.params
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma()
    }

    /// `lambda_0 ..= lambda_k`, ascending.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors of `L(1/2, g)` as columns, trivial one first.
    pub fn eigvecs_sym(&self) -> &DenseMatrix<T> {
        &self.eigvecs_sym
    }

    pub fn diag_gamma(&self) -> &DiagGamma<T> {
        &self.diag_gamma
    }

    /// Number of non-trivial pairs.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.eigvecs_sym.rows()
    }

    /// True when every non-trivial pair is present.
    pub fn is_full(&self) -> bool {
        self.k + 1 == self.node_count()
    }

    /// `lambda_1` is repeated within [`DEGENERACY_GAP`].
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Eigenvectors of `L(alpha, g)`: the columns of `e^(1/2 - alpha) U`,
    /// rescaled to unit length with the sign convention re-applied.
    pub fn eigvec_view(&self, alpha: f64) -> Result<EigvecView<T>> {
        self.params.with_alpha(alpha)?;
        let scale = self.diag_gamma.power(0.5 - alpha);
        let n = self.node_count();
        let mut columns: Vec<Vec<T>> = (0..=self.k)
            .map(|j| (0..n).map(|i| scale[i] * self.eigvecs_sym[(i, j)]).collect())
            .collect();
        for col in columns.iter_mut() {
            normalize(col);
            fix_sign(col);
        }
        Ok(EigvecView {
            alpha,
            gamma: self.params.gamma(),
            eigenvalues: self.eigenvalues.clone(),
            vectors: DenseMatrix::from_fn(n, self.k + 1, |i, j| columns[j][i]),
            degenerate: self.degenerate,
            full: self.is_full(),
        })
    }
}

/// Eigenvectors of `L(alpha, g)` paired with the shared eigenvalues.
#[derive(Debug, Clone)]
pub struct EigvecView<T> {
    alpha: f64,
    gamma: f64,
    eigenvalues: Vec<T>,
    vectors: DenseMatrix<T>,
    degenerate: bool,
    full: bool,
}

/// Spectral distance with the degeneracy warning attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDistance<T> {
    pub value: T,
    pub degenerate: bool,
}

impl<T: Scalar> EigvecView<T> {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DenseMatrix<T> {
        &self.vectors
    }

    pub fn node_count(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Column `k` (0 is the trivial vector).
    pub fn phi(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }

    /// First non-trivial eigenvector.
    pub fn fiedler(&self) -> Result<Vec<T>> {
        if self.vectors.cols() < 2 {
            return Err(Error::usage("view holds no non-trivial eigenvector"));
        }
        Ok(self.phi(1))
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.node_count() {
            return Err(Error::usage(format!("node {i} out of range")));
        }
        Ok(())
    }

    /// `d_t(i, j) = sqrt( sum_k exp(-2 t lambda_k) (phi_ik - phi_jk)^2 )`
    /// over all non-trivial pairs. Requires the full decomposition.
    pub fn diffusion_distance(&self, i: usize, j: usize, t: T) -> Result<T> {
        if !self.full {
            return Err(Error::usage(
                "diffusion distance needs every eigenpair; use the dense solver",
            ));
        }
        if !(t > T::zero()) {
            return Err(Error::usage("diffusion time must be positive"));
        }
        self.check_node(i)?;
        self.check_node(j)?;
        let two = T::of(2.0);
        let sum: T = (1..self.vectors.cols())
            .map(|k| {
                let diff = self.vectors[(i, k)] - self.vectors[(j, k)];
                (-two * t * self.eigenvalues[k]).exp() * diff * diff
            })
            .sum();
        Ok(sum.sqrt())
    }

    /// `ln d_t(i, j)`, evaluated as `-t lambda_1 + ln(sum_k exp(-2t (lambda_k - lambda_1)) ..) / 2`
    /// so that it stays finite at diffusion times where `d_t` underflows.
    /// Negative infinity when `d_t = 0`.
    pub fn log_diffusion_distance(&self, i: usize, j: usize, t: T) -> Result<T> {
        if !self.full {
            return Err(Error::usage(
                "diffusion distance needs every eigenpair; use the dense solver",
            ));
        }
        if !(t > T::zero()) {
            return Err(Error::usage("diffusion time must be positive"));
        }
        self.check_node(i)?;
        self.check_node(j)?;
        if self.vectors.cols() < 2 {
            return Ok(T::neg_infinity());
        }
        let two = T::of(2.0);
        let base = self.eigenvalues[1];
        let sum: T = (1..self.vectors.cols())
            .map(|k| {
                let diff = self.vectors[(i, k)] - self.vectors[(j, k)];
                (-two * t * (self.eigenvalues[k] - base)).exp() * diff * diff
            })
            .sum();
        Ok(-t * base + sum.ln() / two)
    }

    /// `d_s(i, j) = |phi1_i - phi1_j|`.
    pub fn spectral_distance(&self, i: usize, j: usize) -> Result<SpectralDistance<T>> {
        self.check_node(i)?;
        self.check_node(j)?;
        let phi = self.fiedler()?;
        Ok(SpectralDistance {
            value: (phi[i] - phi[j]).abs(),
            degenerate: self.degenerate,
        })
    }

    /// Ordering constant for the triple `(i, j, m)` with
    /// `d_s(m, j) < d_s(i, j)`:
    ///
    /// `C = ln(N / S) / (2 (lambda_1 - lambda_2))`, with
    /// `N = (phi1_i - phi1_j)^2 - (phi1_m - phi1_j)^2` and
    /// `S = sum_{k >= 2} |(phik_m - phik_j)^2 - (phik_i - phik_j)^2|`.
    ///
    /// For every integer `t >= max(floor(C) + 1, 1)`, `d_t(m, j) < d_t(i, j)`.
    /// Returns negative infinity when `S = 0`.
    pub fn order_constant(&self, i: usize, j: usize, m: usize) -> Result<T> {
        if !self.full {
            return Err(Error::usage("order constant needs the full decomposition"));
        }
        if self.degenerate {
            return Err(Error::usage("lambda_1 is repeated; the order constant is undefined"));
        }
        for v in [i, j, m] {
            self.check_node(v)?;
        }
        let sq = |a: usize, b: usize, k: usize| {
            let d = self.vectors[(a, k)] - self.vectors[(b, k)];
            d * d
        };
        let numer = sq(i, j, 1) - sq(m, j, 1);
        if !(numer > T::zero()) {
            return Err(Error::usage(format!(
                "ordering precondition violated: d_s({m},{j}) must be below d_s({i},{j})"
            )));
        }
        let denom: T = (2..self.vectors.cols())
            .map(|k| (sq(m, j, k) - sq(i, j, k)).abs())
            .sum();
        if denom == T::zero() {
            return Ok(T::neg_infinity());
        }
        let gap = self.eigenvalues[1] - self.eigenvalues[2];
        Ok((numer / denom).ln() / (T::of(2.0) * gap))
    }
}

/// First non-trivial eigenvector of `L(alpha, gamma)` and the degeneracy
/// flag. Dense below the dense size cap, Lanczos above it.
pub fn first_nontrivial<T: Scalar>(g: &Graph, p: LaplacianParams) -> Result<(Vec<T>, bool)> {
    let mode = if g.node_count() <= crate::dense::DENSE_LIMIT {
        SolverMode::Dense
    } else {
        SolverMode::Iterative
    };
    let view = eig_sym::<T>(g, p.gamma(), 1, mode)?.eigvec_view(p.alpha())?;
    Ok((view.fiedler()?, view.is_degenerate()))
}

/// Eigenvalues of `L(1/2, g)` across an ascending gamma grid.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub gammas: Vec<f64>,
    /// `eigenvalues[s]` is the full ascending spectrum at `gammas[s]`.
    pub eigenvalues: Vec<Vec<f64>>,
    pub min_forward_difference: f64,
    pub max_trivial_eigenvalue: f64,
    pub range_ok: bool,
    pub pass: bool,
}

/// Strict increase of every non-trivial eigenvalue in gamma, plus the
/// `[0, 2]` range, checked with the dense solver.
pub fn verify_monotonicity(g: &Graph, gammas: &[f64]) -> Result<MonotonicityReport> {
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("gamma grid must be strictly increasing"));
    }
    g.require_connected()?;
    let n = g.node_count();
    let mut eigenvalues = Vec::with_capacity(gammas.len());
    let mut max_trivial = 0.0f64;
    let mut range_ok = true;
    for &gamma in gammas {
        let params = LaplacianParams::new(0.5, gamma)?;
        let dense = param_laplacian::<f64>(g, params)?.to_dense()?;
        let eig = SymmetricEigen::new(&dense)?;
        max_trivial = max_trivial.max(eig.values[0].abs());
        range_ok &= eig
            .values
            .iter()
            .all(|&v| (-ZERO_EIGENVALUE_TOL..=2.0 + ZERO_EIGENVALUE_TOL).contains(&v));
        range_ok &= n < 2 || eig.values[1] > ZERO_EIGENVALUE_TOL;
        eigenvalues.push(eig.values);
    }
    let mut min_diff = f64::INFINITY;
    for w in eigenvalues.windows(2) {
        for i in 1..n {
            min_diff = min_diff.min(w[1][i] - w[0][i]);
        }
    }
    let pass = range_ok && max_trivial <= ZERO_EIGENVALUE_TOL && (gammas.len() < 2 || min_diff > 1e-12);
    Ok(MonotonicityReport {
        gammas: gammas.to_vec(),
        eigenvalues,
        min_forward_difference: min_diff,
        max_trivial_eigenvalue: max_trivial,
        range_ok,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::named::*;
    use crate::random::random_connected;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const S2: f64 = std::f64::consts::SQRT_2;

    fn dense(g: &Graph, gamma: f64) -> SpectralDecomposition<f64> {
        eig_sym(g, gamma, 0, SolverMode::Dense).unwrap()
    }

    #[test]
    fn p3_first_eigenvalue_equals_gamma() {
        for gamma in [0.1, 0.5, 0.77, 1.0] {
            let d = dense(&path(3), gamma);
            assert!((d.eigenvalues()[1] - gamma).abs() < 1e-12, "{:?}", d.eigenvalues());
        }
    }

    #[test]
    fn k3_spectrum() {
        let d = dense(&complete(3), 1.0);
        let ev = d.eigenvalues();
        assert!(ev[0].abs() < 1e-15);
        assert!((ev[1] - 1.5).abs() < 1e-12 && (ev[2] - 1.5).abs() < 1e-12);
        assert!(d.is_degenerate());
    }

    #[test]
    fn trivial_vector_is_sqrt_degree() {
        let g = random_connected(30, 0.1, &mut ChaCha8Rng::seed_from_u64(4));
        let d = dense(&g, 1.0);
        let total: f64 = (0..30).map(|i| g.degree(i) as f64).sum();
        for i in 0..30 {
            let expected = (g.degree(i) as f64 / total).sqrt();
            assert!((d.eigvecs_sym()[(i, 0)] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn invariants_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let g = random_connected(50, 0.08, &mut rng);
            for gamma in [0.2, 0.6, 1.0] {
                let d = dense(&g, gamma);
                let ev = d.eigenvalues();
                assert!(ev.windows(2).all(|w| w[0] <= w[1]));
                assert!(ev[1] > 1e-10);
                assert!(*ev.last().unwrap() <= 2.0 + 1e-10);
                let u = d.eigvecs_sym();
                let gram = u.transpose().matmul(u);
                assert!(gram.max_abs_diff(&DenseMatrix::identity(50)) < 1e-8);
                for j in 0..=d.k() {
                    let mut col = u.column(j);
                    let before = col.clone();
                    fix_sign(&mut col);
                    assert_eq!(col, before);
                }
            }
        }
    }

    #[test]
    fn disconnected_rejected() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(eig_sym::<f64>(&g, 1.0, 0, SolverMode::Dense), Err(Error::Data(_))));
    }

    #[test]
    fn iterative_agrees_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let g = random_connected(120, 0.04, &mut rng);
            let d = dense(&g, 0.7);
            let it = eig_sym::<f64>(&g, 0.7, 5, SolverMode::Iterative).unwrap();
            assert_eq!(it.k(), 5);
            for k in 1..=5 {
                assert!((d.eigenvalues()[k] - it.eigenvalues()[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn iterative_finds_repeated_eigenvalues() {
        // K6 at gamma = 1: every non-trivial eigenvalue is 6/5
        let it = eig_sym::<f64>(&complete(6), 1.0, 3, SolverMode::Iterative).unwrap();
        for k in 1..=3 {
            assert!((it.eigenvalues()[k] - 1.2).abs() < 1e-8);
        }
        let c = eig_sym::<f64>(&cycle(8), 0.5, 4, SolverMode::Iterative).unwrap();
        let d = dense(&cycle(8), 0.5);
        for k in 1..=4 {
            assert!((c.eigenvalues()[k] - d.eigenvalues()[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn iterative_rejects_bad_k() {
        assert!(eig_sym::<f64>(&path(4), 1.0, 0, SolverMode::Iterative).is_err());
        assert!(eig_sym::<f64>(&path(4), 1.0, 4, SolverMode::Iterative).is_err());
        assert!(eig_sym::<f64>(&path(4), 1.0, 3, SolverMode::Iterative).is_ok());
    }

    #[test]
    fn view_alpha_half_is_identity() {
        let g = random_connected(20, 0.2, &mut ChaCha8Rng::seed_from_u64(1));
        let d = dense(&g, 0.4);
        let v = d.eigvec_view(0.5).unwrap();
        assert!(v.vectors().max_abs_diff(d.eigvecs_sym()) < 1e-14);
    }

    #[test]
    fn p3_view_and_distances() {
        let d = dense(&path(3), 1.0);
        let v = d.eigvec_view(1.0).unwrap();
        let phi = v.fiedler().unwrap();
        assert!((phi[0] - 1.0 / S2).abs() < 1e-12);
        assert!(phi[1].abs() < 1e-12);
        assert!((phi[2] + 1.0 / S2).abs() < 1e-12);
        for t in [0.5, 1.0, 3.0] {
            let dt = v.diffusion_distance(0, 2, t).unwrap();
            assert!((dt - S2 * (-t).exp()).abs() < 1e-12);
            assert_eq!(v.diffusion_distance(1, 1, t).unwrap(), 0.0);
        }
        let ds = v.spectral_distance(0, 2).unwrap();
        assert!((ds.value - S2).abs() < 1e-12);
        assert!(!ds.degenerate);
        assert_eq!(v.spectral_distance(2, 2).unwrap().value, 0.0);
        assert!(v.diffusion_distance(0, 2, 0.0).is_err());
    }

    #[test]
    fn log_diffusion_distance_survives_underflow() {
        let d = dense(&path(3), 1.0);
        let v = d.eigvec_view(1.0).unwrap();
        for t in [0.5, 2.0, 7.0] {
            let direct = v.diffusion_distance(0, 2, t).unwrap().ln();
            assert!((v.log_diffusion_distance(0, 2, t).unwrap() - direct).abs() < 1e-12);
        }
        // closed form ln(sqrt2) - t where exp(-t) has underflowed
        let t = 900.0;
        assert_eq!(v.diffusion_distance(0, 2, t).unwrap(), 0.0);
        let log = v.log_diffusion_distance(0, 2, t).unwrap();
        assert!((log - (S2.ln() - t)).abs() < 1e-9);
        assert_eq!(v.log_diffusion_distance(1, 1, t).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn k3_spectral_distance_warns() {
        let v = dense(&complete(3), 1.0).eigvec_view(1.0).unwrap();
        assert!(v.spectral_distance(0, 1).unwrap().degenerate);
    }

    #[test]
    fn partial_decomposition_rejects_diffusion_distance() {
        let g = random_connected(40, 0.1, &mut ChaCha8Rng::seed_from_u64(2));
        let it = eig_sym::<f64>(&g, 1.0, 3, SolverMode::Iterative).unwrap();
        let v = it.eigvec_view(1.0).unwrap();
        assert!(matches!(v.diffusion_distance(0, 1, 1.0), Err(Error::Usage(_))));
        assert!(v.spectral_distance(0, 1).is_ok());
    }

    /// `L(alpha, g)` from its definition, for residual checks of the views.
    fn residual_oracle(g: &Graph, alpha: f64, gamma: f64, v: &EigvecView<f64>) -> f64 {
        let l = param_laplacian::<f64>(g, LaplacianParams::new(alpha, gamma).unwrap())
            .unwrap()
            .to_dense()
            .unwrap();
        (0..v.vectors().cols())
            .map(|k| {
                let phi = v.phi(k);
                let lv = l.matvec(&phi);
                lv.iter()
                    .zip(&phi)
                    .map(|(a, b)| (a - v.eigenvalues()[k] * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn views_are_eigenvectors_of_every_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let g = random_connected(50, 0.08, &mut rng);
            for gamma in [0.15, 0.9] {
                let d = dense(&g, gamma);
                for alpha in [0.0, 0.3, 1.0] {
                    let v = d.eigvec_view(alpha).unwrap();
                    assert!(residual_oracle(&g, alpha, gamma, &v) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn diffusion_distance_symmetric_and_decreasing() {
        let g = random_connected(20, 0.2, &mut ChaCha8Rng::seed_from_u64(6));
        let v = dense(&g, 0.8).eigvec_view(1.0).unwrap();
        for i in 0..10 {
            for j in 10..15 {
                let a = v.diffusion_distance(i, j, 1.3).unwrap();
                let b = v.diffusion_distance(j, i, 1.3).unwrap();
                assert!((a - b).abs() < 1e-12);
                assert!(v.diffusion_distance(i, j, 2.0).unwrap() < a);
            }
        }
    }

    #[test]
    fn order_constant_p3() {
        let v = dense(&path(3), 1.0).eigvec_view(1.0).unwrap();
        // d_s(1,2) < d_s(0,2)
        let c = v.order_constant(0, 2, 1).unwrap();
        let t = (c.ceil() + 1.0).max(1.0);
        assert!(v.diffusion_distance(1, 2, t).unwrap() < v.diffusion_distance(0, 2, t).unwrap());
        assert!(matches!(v.order_constant(1, 2, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn monotonicity_closed_forms() {
        let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let p3 = verify_monotonicity(&path(3), &grid).unwrap();
        assert!(p3.pass);
        for (s, &g) in grid.iter().enumerate() {
            assert!((p3.eigenvalues[s][1] - g).abs() < 1e-10);
        }
        assert!((p3.min_forward_difference - 0.1).abs() < 1e-10);
        let k3 = verify_monotonicity(&complete(3), &grid).unwrap();
        assert!(k3.pass);
        for (s, &g) in grid.iter().enumerate() {
            assert!((k3.eigenvalues[s][1] - 3.0 * g / (1.0 + g)).abs() < 1e-10);
        }
        assert!(verify_monotonicity(&path(3), &[0.5, 0.2]).is_err());
    }
}
