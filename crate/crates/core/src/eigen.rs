//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicit QL iteration with Wilkinson-style shifts.
//!
//! Adapted from the classic EISPACK `tred2`/`tql2` pair. Eigenvalues come out
//! ascending; eigenvectors are the columns of `vectors` and are orthonormal.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_QL_SWEEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// Decomposes a symmetric matrix. Only the lower triangle is read.
    pub fn new(a: &DenseMatrix<T>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::usage("eigendecomposition of a non-square matrix"));
        }
        let n = a.rows();
        if n == 0 {
            return Ok(SymmetricEigen {
                values: Vec::new(),
                vectors: DenseMatrix::zeros(0, 0),
            });
        }
        let mut v: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| if j <= i { a[(i, j)] } else { a[(j, i)] }).collect())
            .collect();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        tridiagonalize(&mut v, &mut d, &mut e);
        ql_implicit(&mut v, &mut d, &mut e)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&k| d[k]).collect();
        let vectors = DenseMatrix::from_fn(n, n, |i, j| v[i][order[j]]);
        Ok(SymmetricEigen { values, vectors })
    }
}

fn tridiagonalize<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }

    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = zero;
                v[j][i] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }

            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[k][j] -= upd;
                }
                d[j] = v[i - 1][j];
                v[i][j] = zero;
            }
        }
        d[i] = h;
    }

    // Accumulate the transformations.
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[k][j] -= upd;
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = zero;
    }
    v[n - 1][n - 1] = T::one();
    e[0] = zero;
}

fn ql_implicit<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = one + one;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] is zero, so m < n always holds here.
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::numerical(format!(
                        "implicit QL did not converge for eigenvalue {l}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &DenseMatrix<f64>, eig: &SymmetricEigen<f64>) -> f64 {
        let n = a.rows();
        let mut worst = 0.0f64;
        for k in 0..n {
            let u = eig.vectors.column(k);
            let au = a.matvec(&u);
            let r: f64 = au
                .iter()
                .zip(&u)
                .map(|(x, y)| (x - eig.values[k] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }

    #[test]
    fn two_by_two() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0f64, 1.0, 1.0, 2.0]);
        let eig = SymmetricEigen::new(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
        assert!(residual(&a, &eig) < 1e-13);
    }

    #[test]
    fn diagonal_and_one_by_one() {
        let a = DenseMatrix::from_diagonal(&[3.0, -1.0, 2.0]);
        let eig = SymmetricEigen::new(&a).unwrap();
        assert_eq!(eig.values, vec![-1.0, 2.0, 3.0]);
        let one = SymmetricEigen::new(&DenseMatrix::from_row_major(1, 1, vec![5.0])).unwrap();
        assert_eq!(one.values, vec![5.0]);
    }

    #[test]
    fn agrees_with_nalgebra() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 7, 20, 41] {
            let mut a = DenseMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
            let ours = SymmetricEigen::new(&a).unwrap();
            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
            let mut theirs: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
            theirs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in ours.values.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
            assert!(residual(&a, &ours) < 1e-12);
            let vtv = ours.vectors.transpose().matmul(&ours.vectors);
            assert!(vtv.max_abs_diff(&DenseMatrix::identity(n)) < 1e-12);
        }
    }

    #[test]
    fn single_precision() {
        let a = DenseMatrix::from_row_major(3, 3, vec![2.0f32, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let eig = SymmetricEigen::new(&a).unwrap();
        let expected = [2.0 - 2f32.sqrt(), 2.0, 2.0 + 2f32.sqrt()];
        for (x, y) in eig.values.iter().zip(expected) {
            assert!((x - y).abs() < 1e-5);
        }
    }
}
