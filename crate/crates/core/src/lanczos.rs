//! Lanczos with full reorthogonalization for the smallest non-trivial
//! eigenpairs of the symmetric member `L(1/2, g)`.
//!
//! The iteration runs on `2I - L(1/2, g)`, whose largest eigenvalues are the
//! smallest ones of the Laplacian because the spectrum lies in `[0, 2]`.
//! Caller-supplied vectors (the analytic null vector, and any already locked
//! pairs) are projected out of every Krylov vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::eigen::SymmetricEigen;
use crate::error::{Error, Result};
use crate::param::ParamLaplacian;
use crate::scalar::Scalar;

const START_SEED: u64 = 0x1a2c_2050;

pub(crate) struct LanczosOptions {
    pub tolerance: f64,
    pub max_steps: usize,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn project_out<T: Scalar>(w: &mut [T], basis: &[Vec<T>]) {
    for q in basis {
        let c = dot(q, w);
        for (wi, &qi) in w.iter_mut().zip(q) {
            *wi -= c * qi;
        }
    }
}

/// Returns the `want` smallest eigenpairs of `op` restricted to the
/// orthogonal complement of `deflate` (orthonormal vectors), ascending.
pub(crate) fn smallest_pairs<T: Scalar>(
    op: &ParamLaplacian<'_, T>,
    deflate: &[Vec<T>],
    want: usize,
    opts: &LanczosOptions,
    stream: u64,
) -> Result<Vec<(T, Vec<T>)>> {
    let n = op.graph().node_count();
    let space = n.saturating_sub(deflate.len());
    if want == 0 {
        return Ok(Vec::new());
    }
    if want > space {
        return Err(Error::usage(format!(
            "requested {want} eigenpairs from a {space}-dimensional subspace"
        )));
    }
    let two = T::of(2.0);
    let tol = T::of(opts.tolerance);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    rng.set_stream(stream);

    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut alphas: Vec<T> = Vec::new();
    // betas[j] couples basis[j] and basis[j + 1]; zero marks a restart.
    let mut betas: Vec<T> = Vec::new();
    let mut q = fresh_vector(n, deflate, &basis, &mut rng)?;
    let mut steps = 0;

    loop {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::numerical(format!(
                "Lanczos did not converge within {} steps",
                opts.max_steps
            )));
        }
        let lq = op.apply(&q);
        let mut w: Vec<T> = q.iter().zip(&lq).map(|(&a, &b)| two * a - b).collect();
        let a = dot(&q, &w);
        basis.push(q.clone());
        alphas.push(a);
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            project_out(&mut w, deflate);
            project_out(&mut w, &basis);
        }
        let b = norm(&w);
        let m = basis.len();
        let exhausted = m >= space;

        if m >= want || exhausted {
            let tri = DenseMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alphas[i]
                } else if i + 1 == j {
                    betas[i]
                } else if j + 1 == i {
                    betas[j]
                } else {
                    T::zero()
                }
            });
            let eig = SymmetricEigen::new(&tri)?;
            // Largest Ritz values of 2I - L are the smallest of L.
            let converged = (0..want).all(|r| {
                let col = m - 1 - r;
                (b * eig.vectors[(m - 1, col)]).abs() <= tol * T::of(0.01)
            });
            let breakdown = b <= T::of(1e-12);
            if exhausted || converged {
                return Ok(ritz_pairs(&basis, &eig, want, two));
            }
            if breakdown {
                betas.push(T::zero());
                q = fresh_vector(n, deflate, &basis, &mut rng)?;
                continue;
            }
        } else if b <= T::of(1e-12) {
            betas.push(T::zero());
            q = fresh_vector(n, deflate, &basis, &mut rng)?;
            continue;
        }
        betas.push(b);
        q = w.into_iter().map(|x| x / b).collect();
    }
}

fn ritz_pairs<T: Scalar>(
    basis: &[Vec<T>],
    eig: &SymmetricEigen<T>,
    want: usize,
    two: T,
) -> Vec<(T, Vec<T>)> {
    let m = basis.len();
    let n = basis[0].len();
    (0..want)
        .map(|r| {
            let col = m - 1 - r;
            let mut y = vec![T::zero(); n];
            for (k, qk) in basis.iter().enumerate() {
                let s = eig.vectors[(k, col)];
                for (yi, &qi) in y.iter_mut().zip(qk) {
                    *yi += s * qi;
                }
            }
            let nrm = norm(&y);
            y.iter_mut().for_each(|v| *v /= nrm);
            (two - eig.values[col], y)
        })
        .collect()
}

fn fresh_vector<T: Scalar>(
    n: usize,
    deflate: &[Vec<T>],
    basis: &[Vec<T>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<T>> {
    for _ in 0..8 {
        let mut v: Vec<T> = (0..n).map(|_| T::of(rng.random_range(-1.0..1.0))).collect();
        for _ in 0..2 {
            project_out(&mut v, deflate);
            project_out(&mut v, basis);
        }
        let nrm = norm(&v);
        if nrm > T::of(1e-8) {
            return Ok(v.into_iter().map(|x| x / nrm).collect());
        }
    }
    Err(Error::numerical("could not draw a vector outside the Krylov basis"))
}
