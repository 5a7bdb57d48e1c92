//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! `DMatrix` is column-major, so `m.as_slice()` is exactly `vec(m)` under the
//! crate-wide first-index-fastest convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Kronecker product: `(A ⊗ B)[p*rb + q, r*cb + s] = A[p, r] * B[q, s]`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Commutation matrix `K_{mn}` (size `mn × mn`) with `K vec(A) = vec(Aᵀ)` for
/// every `m × n` matrix `A`.
pub fn commutation_matrix(m: usize, n: usize) -> Matrix {
    let size = m.checked_mul(n).expect("commutation matrix size overflows");
    let mut k = Matrix::zeros(size, size);
    // vec(A)[i + m j] = A[i, j] = Aᵀ[j, i] = vec(Aᵀ)[j + n i]
    for i in 0..m {
        for j in 0..n {
            k[(j + n * i, i + m * j)] = 1.0;
        }
    }
    k
}

/// Rearranges the second moment `S = E[vec(G) vec(G)ᵀ]` of an `r0 × r1`
/// random matrix `G` into `E[G ⊗ G]` (size `r0² × r1²`).
///
/// Entry-wise: `out[a*r0 + a', b*r1 + b'] = S[a + r0 b, a' + r0 b']`. This is
/// the permutation `vec(E[G ⊗ G]) = (I_{r1} ⊗ K_{r1 r0} ⊗ I_{r0}) vec(S)`;
/// [`kron_moment_via_commutation`] evaluates that product literally.
pub fn kron_moment(s: &Matrix, r0: usize, r1: usize) -> Matrix {
    let d = r0 * r1;
    debug_assert_eq!(s.shape(), (d, d));
    let mut out = Matrix::zeros(r0 * r0, r1 * r1);
    for bp in 0..r1 {
        for ap in 0..r0 {
            let col = ap + r0 * bp;
            for b in 0..r1 {
                for a in 0..r0 {
                    out[(a * r0 + ap, b * r1 + bp)] = s[(a + r0 * b, col)];
                }
            }
        }
    }
    out
}

/// Reference route for [`kron_moment`] through the explicit
/// `I ⊗ K ⊗ I` permutation matrix. Quadratic in the output size; test use.
pub fn kron_moment_via_commutation(s: &Matrix, r0: usize, r1: usize) -> Matrix {
    let perm = kron(
        &kron(&Matrix::identity(r1, r1), &commutation_matrix(r1, r0)),
        &Matrix::identity(r0, r0),
    );
    let v = Vector::from_column_slice(s.as_slice());
    let out = perm * v;
    Matrix::from_column_slice(r0 * r0, r1 * r1, out.as_slice())
}

/// Inverse of a symmetric positive definite matrix via Cholesky, with jitter
/// escalation: `1e-12 * trace/size`, times ten, up to three retries.
/// The result is symmetrized.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to invert has non-finite entries".into()));
    }
    let base = (a.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    for attempt in 0..4 {
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..n {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = m.cholesky() {
            let inv = chol.inverse();
            return Ok(symmetrize(&inv));
        }
        jitter = if attempt == 0 { 1e-12 * base } else { jitter * 10.0 };
    }
    Err(Error::NotSpd(format!(
        "Cholesky failed for {n}x{n} system after jitter {jitter:e}"
    )))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities() {
        let k = kron(&Matrix::identity(2, 2), &Matrix::identity(3, 3));
        assert_eq!(k, Matrix::identity(6, 6));
    }

    #[test]
    fn commutation_small_cases() {
        assert_eq!(commutation_matrix(1, 1), Matrix::identity(1, 1));
        let k = commutation_matrix(2, 2);
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!((k * v).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn commutation_transposes() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 7 + j * 3) as f64 - 4.5);
        let k = commutation_matrix(3, 4);
        let lhs = k.clone() * Vector::from_column_slice(a.as_slice());
        assert_eq!(lhs.as_slice(), a.transpose().as_slice());
        assert_eq!(k.clone() * k.transpose(), Matrix::identity(12, 12));
    }

    #[test]
    fn kron_moment_of_outer_product_is_kron() {
        let g = Matrix::from_fn(2, 3, |i, j| 1.0 + i as f64 - 0.5 * j as f64);
        let v = Vector::from_column_slice(g.as_slice());
        let s = &v * v.transpose();
        let expect = kron(&g, &g);
        assert_eq!(kron_moment(&s, 2, 3), expect);
        assert_eq!(kron_moment_via_commutation(&s, 2, 3), expect);
    }

    #[test]
    fn spd_inverse_roundtrip_and_failure() {
        let a = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&a).unwrap();
        assert!((a * inv - Matrix::identity(2, 2)).norm() < 1e-12);
        let neg = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(spd_inverse(&neg), Err(Error::NotSpd(_))));
    }
}
