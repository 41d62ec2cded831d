//! Fixed-size dense matrix helpers on plain arrays.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Vector<T, const N: usize> = [T; N];
pub type Matrix<T, const R: usize, const C: usize> = [[T; C]; R];

pub fn zeros<T: Scalar, const R: usize, const C: usize>() -> Matrix<T, R, C> {
    [[T::zero(); C]; R]
}

pub fn identity<T: Scalar, const N: usize>() -> Matrix<T, N, N> {
    let mut m = zeros();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn diag<T: Scalar, const N: usize>(d: [T; N]) -> Matrix<T, N, N> {
    let mut m = zeros();
    for i in 0..N {
        m[i][i] = d[i];
    }
    m
}

pub fn transpose<T: Scalar, const R: usize, const C: usize>(a: &Matrix<T, R, C>) -> Matrix<T, C, R> {
    let mut t = zeros();
    for i in 0..R {
        for j in 0..C {
            t[j][i] = a[i][j];
        }
    }
    t
}

pub fn mat_mul<T: Scalar, const R: usize, const K: usize, const C: usize>(
    a: &Matrix<T, R, K>,
    b: &Matrix<T, K, C>,
) -> Matrix<T, R, C> {
    let mut m = zeros();
    for i in 0..R {
        for j in 0..C {
            let mut s = T::zero();
            for k in 0..K {
                s = s + a[i][k] * b[k][j];
            }
            m[i][j] = s;
        }
    }
    m
}

pub fn mat_vec<T: Scalar, const R: usize, const C: usize>(a: &Matrix<T, R, C>, v: &Vector<T, C>) -> Vector<T, R> {
    let mut out = [T::zero(); R];
    for i in 0..R {
        let mut s = T::zero();
        for j in 0..C {
            s = s + a[i][j] * v[j];
        }
        out[i] = s;
    }
    out
}

pub fn mat_add<T: Scalar, const R: usize, const C: usize>(a: &Matrix<T, R, C>, b: &Matrix<T, R, C>) -> Matrix<T, R, C> {
    let mut m = *a;
    for i in 0..R {
        for j in 0..C {
            m[i][j] = m[i][j] + b[i][j];
        }
    }
    m
}

pub fn mat_sub<T: Scalar, const R: usize, const C: usize>(a: &Matrix<T, R, C>, b: &Matrix<T, R, C>) -> Matrix<T, R, C> {
    let mut m = *a;
    for i in 0..R {
        for j in 0..C {
            m[i][j] = m[i][j] - b[i][j];
        }
    }
    m
}

pub fn mat_scale<T: Scalar, const R: usize, const C: usize>(a: &Matrix<T, R, C>, s: T) -> Matrix<T, R, C> {
    let mut m = *a;
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = *v * s;
        }
    }
    m
}

pub fn outer<T: Scalar, const R: usize, const C: usize>(a: &Vector<T, R>, b: &Vector<T, C>) -> Matrix<T, R, C> {
    let mut m = zeros();
    for i in 0..R {
        for j in 0..C {
            m[i][j] = a[i] * b[j];
        }
    }
    m
}

pub fn vec_sub<T: Scalar, const N: usize>(a: &Vector<T, N>, b: &Vector<T, N>) -> Vector<T, N> {
    let mut out = *a;
    for i in 0..N {
        out[i] = out[i] - b[i];
    }
    out
}

pub fn symmetrize<T: Scalar, const N: usize>(a: &Matrix<T, N, N>) -> Matrix<T, N, N> {
    let half = T::lit(0.5);
    let mut m = *a;
    for i in 0..N {
        for j in 0..N {
            m[i][j] = (a[i][j] + a[j][i]) * half;
        }
    }
    m
}

pub fn trace<T: Scalar, const N: usize>(a: &Matrix<T, N, N>) -> T {
    (0..N).map(|i| a[i][i]).sum()
}

pub fn max_abs_diff<T: Scalar, const R: usize, const C: usize>(a: &Matrix<T, R, C>, b: &Matrix<T, R, C>) -> T {
    let mut m = T::zero();
    for i in 0..R {
        for j in 0..C {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Lower Cholesky factor `L` with `L L^T = a`.
pub fn cholesky<T: Scalar, const N: usize>(a: &Matrix<T, N, N>) -> Result<Matrix<T, N, N>> {
    let mut l = zeros::<T, N, N>();
    for j in 0..N {
        let mut d = a[j][j];
        for k in 0..j {
            d = d - l[j][k] * l[j][k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "matrix not positive definite (pivot {j} = {d})"
            )));
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in (j + 1)..N {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            l[i][j] = s / djj;
        }
    }
    Ok(l)
}

/// Symmetrizes, adds `jitter` to the diagonal, then factors.
pub fn cholesky_jittered<T: Scalar, const N: usize>(a: &Matrix<T, N, N>, jitter: T) -> Result<Matrix<T, N, N>> {
    let mut s = symmetrize(a);
    for i in 0..N {
        s[i][i] = s[i][i] + jitter;
    }
    cholesky(&s)
}

/// Inverse of a symmetric positive definite matrix from its Cholesky factor.
pub fn cholesky_inverse<T: Scalar, const N: usize>(l: &Matrix<T, N, N>) -> Matrix<T, N, N> {
    // Invert L by forward substitution, then A^-1 = L^-T L^-1.
    let mut linv = zeros::<T, N, N>();
    for col in 0..N {
        for i in 0..N {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in 0..i {
                s = s - l[i][k] * linv[k][col];
            }
            linv[i][col] = s / l[i][i];
        }
    }
    mat_mul(&transpose(&linv), &linv)
}

/// `log det a` from its Cholesky factor.
pub fn cholesky_log_det<T: Scalar, const N: usize>(l: &Matrix<T, N, N>) -> T {
    let two = T::lit(2.0);
    (0..N).map(|i| two * l[i][i].ln()).sum()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues<T: Scalar, const N: usize>(a: &Matrix<T, N, N>) -> [T; N] {
    let mut m = symmetrize(a);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..N {
            for j in (i + 1)..N {
                off = off + m[i][j] * m[i][j];
            }
        }
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..N {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev = [T::zero(); N];
    for i in 0..N {
        ev[i] = m[i][i];
    }
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_roundtrip_and_inverse() {
        let a: Matrix<f64, 3, 3> = [[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let back = mat_mul(&l, &transpose(&l));
        assert!(max_abs_diff(&a, &back) < 1e-12);
        let inv = cholesky_inverse(&l);
        assert!(max_abs_diff(&mat_mul(&a, &inv), &identity()) < 1e-12);
        let det: f64 = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.6) + 0.6 * (2.0 - 5.0 * 0.6);
        assert!((cholesky_log_det(&l) - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a: Matrix<f64, 2, 2> = [[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(cholesky(&a), Err(Error::NumericalBreakdown(_))));
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a: Matrix<f64, 2, 2> = [[2.0, 1.0], [1.0, 2.0]];
        let mut ev = symmetric_eigenvalues(&a);
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
