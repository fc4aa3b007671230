//! Small dense linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Result, SilrError};

/// Dense real matrix. Storage is `nalgebra`'s column-major layout.
pub type DenseMatrix = DMatrix<f64>;

const SINGULAR_RTOL: f64 = 1e-14;

/// Thin QR of an `r x c` matrix with `r >= c`: `Q` is `r x c` with
/// orthonormal columns and `R` is `c x c` upper triangular.
pub fn dense_qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if m.nrows() < m.ncols() {
        return Err(SilrError::InvalidArgument(format!(
            "dense_qr needs rows >= cols, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let qr = m.clone().qr();
    Ok((qr.q(), qr.r()))
}

/// Thin SVD `M = U diag(sigma) V^T` with `sigma` in descending order.
pub fn dense_svd(m: &DenseMatrix) -> (DenseMatrix, DVector<f64>, DenseMatrix) {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return (
            DenseMatrix::zeros(m.nrows(), 0),
            DVector::zeros(0),
            DenseMatrix::zeros(m.ncols(), 0),
        );
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = DVector::from_iterator(k, order.iter().map(|&i| svd.singular_values[i]));
    let u_sorted = DenseMatrix::from_fn(m.nrows(), k, |r, c| u[(r, order[c])]);
    let v_sorted = DenseMatrix::from_fn(m.ncols(), k, |r, c| vt[(order[c], r)]);
    (u_sorted, sigma, v_sorted)
}

/// Singular values only, descending.
pub fn singular_values(m: &DenseMatrix) -> DVector<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(s)
}

/// Eigenpairs of a symmetric tridiagonal matrix. Returns the eigenvalues in
/// ascending order and the first component of each normalized eigenvector.
pub fn symtrid_eig(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    assert!(
        offdiag.len() + 1 == n || (n == 0 && offdiag.is_empty()),
        "symtrid_eig: offdiag must have length n - 1"
    );
    if n == 0 {
        return (vec![], vec![]);
    }
    let t = DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            offdiag[i]
        } else if j + 1 == i {
            offdiag[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let first = order.iter().map(|&i| eig.eigenvectors[(0, i)]).collect();
    (vals, first)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(s: &DenseMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = s.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn check_triangular_diag(r: &DenseMatrix) -> Result<()> {
    let d = r.diagonal();
    let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dmin = d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(dmin > SINGULAR_RTOL * dmax) || dmax == 0.0 {
        return Err(SilrError::Singular(format!(
            "triangular factor has min |diag| {dmin:e} vs max {dmax:e}"
        )));
    }
    Ok(())
}

/// Solves `R x = y` for upper-triangular `R`.
pub fn tri_solve(r: &DenseMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    if r.nrows() != r.ncols() || r.nrows() != y.len() {
        return Err(SilrError::Length {
            expected: r.nrows(),
            got: y.len(),
        });
    }
    check_triangular_diag(r)?;
    r.solve_upper_triangular(y)
        .ok_or_else(|| SilrError::Singular("upper triangular solve".into()))
}

/// Solves `L x = y` for lower-triangular `L`.
pub fn tri_solve_lower(l: &DenseMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    if l.nrows() != l.ncols() || l.nrows() != y.len() {
        return Err(SilrError::Length {
            expected: l.nrows(),
            got: y.len(),
        });
    }
    check_triangular_diag(l)?;
    l.solve_lower_triangular(y)
        .ok_or_else(|| SilrError::Singular("lower triangular solve".into()))
}

/// Solves `S x = y` for symmetric positive definite `S` by Cholesky.
pub fn spd_solve(s: &DenseMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    if s.nrows() != s.ncols() || s.nrows() != y.len() {
        return Err(SilrError::Length {
            expected: s.nrows(),
            got: y.len(),
        });
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| SilrError::Singular("matrix is not positive definite".into()))?;
    // Pivots are the squared diagonal of L; reject a numerically zero pivot.
    let piv: Vec<f64> = chol.l_dirty().diagonal().iter().map(|d| d * d).collect();
    let pmax = piv.iter().fold(0.0f64, |m, &v| m.max(v));
    if piv.iter().any(|&v| !(v > SINGULAR_RTOL * pmax)) {
        return Err(SilrError::Singular("numerically singular pivot in Cholesky".into()));
    }
    Ok(chol.solve(y))
}

/// Least-squares solve of `min ||M x - y||` through thin QR (`M` full column rank).
pub fn lstsq_qr(m: &DenseMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (q, r) = dense_qr(m)?;
    tri_solve(&r, &(q.transpose() * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(r: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn qr_examples() {
        let (q, r) = dense_qr(&DenseMatrix::identity(4, 4)).unwrap();
        assert_relative_eq!((q.abs() - DenseMatrix::identity(4, 4)).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!((r.abs() - DenseMatrix::identity(4, 4)).norm(), 0.0, epsilon = 1e-15);
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let (_, r) = dense_qr(&d).unwrap();
        assert_relative_eq!(r[(0, 0)].abs(), 2.0);
        assert_relative_eq!(r[(1, 1)].abs(), 3.0);
        let m = random(10, 4, 1);
        let (q, r) = dense_qr(&m).unwrap();
        assert_eq!((q.nrows(), q.ncols(), r.nrows(), r.ncols()), (10, 4, 4, 4));
        assert!((&m - &q * &r).norm() <= 1e-12 * m.norm());
        assert!((q.transpose() * &q - DenseMatrix::identity(4, 4)).norm() <= 1e-12);
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
        assert!(dense_qr(&random(2, 3, 1)).is_err());
    }

    #[test]
    fn svd_examples() {
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let (_, s, _) = dense_svd(&d);
        assert_relative_eq!(s[0], 3.0);
        assert_relative_eq!(s[1], 1.0);
        let (_, s, _) = dense_svd(&DenseMatrix::zeros(3, 3));
        assert!(s.iter().all(|&v| v == 0.0));
        let m = random(6, 6, 2);
        let (u, s, v) = dense_svd(&m);
        let rec = &u * DenseMatrix::from_diagonal(&s) * v.transpose();
        assert!((&m - rec).norm() <= 1e-12 * m.norm());
        for w in s.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let mut eig = sym_eigenvalues(&(m.transpose() * &m));
        eig.reverse();
        for (si, ei) in s.iter().zip(&eig) {
            assert!((si * si - ei).abs() <= 1e-10 * eig[0]);
        }
    }

    #[test]
    fn symtrid_examples() {
        let (v, _) = symtrid_eig(&[0.0], &[]);
        assert_eq!(v, vec![0.0]);
        let b = 1.0 / 3f64.sqrt();
        let (v, f) = symtrid_eig(&[0.0, 0.0], &[b]);
        assert_relative_eq!(v[0], -b, epsilon = 1e-15);
        assert_relative_eq!(v[1], b, epsilon = 1e-15);
        assert_relative_eq!(f[0] * f[0], 0.5, epsilon = 1e-14);
        let (v, _) = symtrid_eig(&[1.5, 1.5], &[0.0]);
        assert_eq!(v, vec![1.5, 1.5]);
    }

    #[test]
    fn symtrid_residual() {
        let diag: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let off: Vec<f64> = (0..11).map(|i| 0.5 + (i as f64).cos().abs()).collect();
        let (vals, _) = symtrid_eig(&diag, &off);
        let t = DenseMatrix::from_fn(12, 12, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let oracle = sym_eigenvalues(&t);
        for (a, b) in vals.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn triangular_and_spd_solves() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(tri_solve(&DenseMatrix::identity(3, 3), &y).unwrap(), y);
        let x = tri_solve(&DenseMatrix::from_element(1, 1, 2.0), &DVector::from_element(1, 4.0)).unwrap();
        assert_eq!(x[0], 2.0);
        let mut r = random(8, 8, 3).upper_triangle();
        for i in 0..8 {
            r[(i, i)] = 2.0 + r[(i, i)].abs();
        }
        let y = DVector::from_fn(8, |i, _| i as f64 - 3.0);
        let x = tri_solve(&r, &y).unwrap();
        assert!((&r * &x - &y).norm() <= 1e-10 * y.norm());
        let lx = tri_solve_lower(&r.transpose(), &y).unwrap();
        assert!((r.transpose() * &lx - &y).norm() <= 1e-10 * y.norm());
        let mut sing = DenseMatrix::identity(2, 2);
        sing[(1, 1)] = 0.0;
        assert!(matches!(
            tri_solve(&sing, &DVector::from_element(2, 1.0)),
            Err(SilrError::Singular(_))
        ));
        let a = random(8, 8, 4);
        let s = a.transpose() * &a + DenseMatrix::identity(8, 8);
        let x = spd_solve(&s, &y).unwrap();
        assert!((&s * &x - &y).norm() <= 1e-10 * y.norm());
        assert!(spd_solve(&DenseMatrix::zeros(2, 2), &DVector::zeros(2)).is_err());
    }
}
