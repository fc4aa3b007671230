//! QR and SVD of tall quasimatrices, and the condition number.

use nalgebra::DVector;

use crate::densela::{dense_svd, DenseMatrix};
use crate::funspace::{self, ChebFun, FunopLedger};
use crate::quasimatrix::TallQuasimatrix;
use crate::{Result, SilrError};

/// Relative threshold on a column's remaining norm below which the column is
/// treated as linearly dependent on its predecessors.
pub const RANK_RTOL: f64 = 1e-12;

/// `A = Q R` with `Q*Q = I` and `R` upper triangular with non-negative diagonal.
#[derive(Clone, Debug)]
pub struct QmQR {
    pub q: TallQuasimatrix,
    pub r: DenseMatrix,
}

/// `A = U diag(sigma) V^T`, `sigma` descending.
#[derive(Clone, Debug)]
pub struct QmSVD {
    pub u: TallQuasimatrix,
    pub sigma: DVector<f64>,
    pub v: DenseMatrix,
}

/// QR by modified Gram-Schmidt over the function columns.
///
/// Costs exactly `3 n (n + 1) / 2 - n` operations: per pair `i < j` one inner
/// product, one scale and one add; per column one norm and one scale.
pub fn qr_gs(a: &TallQuasimatrix, ledger: &mut FunopLedger) -> Result<QmQR> {
    let n = a.ncols();
    let mut r = DenseMatrix::zeros(n, n);
    let mut q: Vec<ChebFun> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = a.col(j).clone();
        for (i, qi) in q.iter().enumerate() {
            let rij = funspace::inner(qi, &v, ledger);
            r[(i, j)] = rij;
            v = funspace::axpy(-rij, qi, &v, ledger);
        }
        let rjj = funspace::norm(&v, ledger);
        // |a_j|^2 = sum_i r_ij^2 + r_jj^2, so no extra inner product is needed.
        let col_norm = (r.column(j).rows(0, j).norm_squared() + rjj * rjj).sqrt();
        if !(rjj > RANK_RTOL * col_norm) {
            return Err(SilrError::RankDeficient(j));
        }
        r[(j, j)] = rjj;
        q.push(funspace::scale(1.0 / rjj, &v, ledger));
    }
    Ok(QmQR {
        q: TallQuasimatrix::new(q)?,
        r,
    })
}

/// QR by Householder reflections in function space, triangularizing against
/// the normalized Legendre polynomials.
pub fn qr_householder(a: &TallQuasimatrix, ledger: &mut FunopLedger) -> Result<QmQR> {
    householder(a, ledger, true)
}

fn householder(a: &TallQuasimatrix, ledger: &mut FunopLedger, strict: bool) -> Result<QmQR> {
    let n = a.ncols();
    let e = funspace::legendre_normalized(n);
    let mut cols: Vec<ChebFun> = a.columns().to_vec();
    let mut r = DenseMatrix::zeros(n, n);
    // Reflector k is I - 2 v v* / |v|^2; None means identity.
    let mut reflectors: Vec<Option<(ChebFun, f64)>> = Vec::with_capacity(n);
    let mut col_norms = Vec::with_capacity(n);
    for x in &cols {
        col_norms.push(funspace::norm(x, ledger));
    }
    for k in 0..n {
        let x = cols[k].clone();
        let mut y = x.clone();
        for i in 0..k {
            let rik = funspace::inner(&e[i], &x, ledger);
            r[(i, k)] = rik;
            y = funspace::axpy(-rik, &e[i], &y, ledger);
        }
        let ny = funspace::norm(&y, ledger);
        if !(ny > RANK_RTOL * col_norms[k]) {
            if strict {
                return Err(SilrError::RankDeficient(k));
            }
            r[(k, k)] = 0.0;
            reflectors.push(None);
            continue;
        }
        let s = if funspace::inner(&e[k], &y, ledger) >= 0.0 {
            1.0
        } else {
            -1.0
        };
        let v = funspace::axpy(s * ny, &e[k], &y, ledger);
        let vv = funspace::inner(&v, &v, ledger);
        r[(k, k)] = -s * ny;
        for col in cols.iter_mut().skip(k + 1) {
            let t = 2.0 * funspace::inner(&v, col, ledger) / vv;
            *col = funspace::axpy(-t, &v, col, ledger);
        }
        reflectors.push(Some((v, vv)));
    }
    // q_k = H_1 ... H_k e_k, then flip signs so diag(R) >= 0.
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        let mut qk = e[k].clone();
        for (v, vv) in reflectors[..=k].iter().rev().flatten() {
            let t = 2.0 * funspace::inner(v, &qk, ledger) / vv;
            qk = funspace::axpy(-t, v, &qk, ledger);
        }
        if r[(k, k)] < 0.0 {
            qk = funspace::scale(-1.0, &qk, ledger);
            for j in k..n {
                r[(k, j)] = -r[(k, j)];
            }
        }
        q.push(qk);
    }
    Ok(QmQR {
        q: TallQuasimatrix::new(q)?,
        r,
    })
}

/// Reduced SVD via `A = Q R`, `R = U_R S V^T`, `U = Q U_R`.
/// Rank-deficient inputs are allowed and give zero singular values.
pub fn qm_svd(a: &TallQuasimatrix, ledger: &mut FunopLedger) -> Result<QmSVD> {
    let qr = householder(a, ledger, false)?;
    svd_from_qr(&qr, ledger)
}

/// The post-QR stage of [`qm_svd`]. Costs `n (2n - 1)` operations.
pub fn svd_from_qr(qr: &QmQR, ledger: &mut FunopLedger) -> Result<QmSVD> {
    let (ur, sigma, v) = dense_svd(&qr.r);
    let u = qr.q.recombine(&ur, ledger)?;
    Ok(QmSVD { u, sigma, v })
}

/// `sigma_1 / sigma_n`.
pub fn cond(a: &TallQuasimatrix, ledger: &mut FunopLedger) -> Result<f64> {
    let svd = qm_svd(a, ledger)?;
    let s1 = svd.sigma[0];
    let sn = svd.sigma[svd.sigma.len() - 1];
    if !(sn > 1e-14 * s1) {
        return Err(SilrError::Singular(format!(
            "sigma_min {sn:e} vs sigma_max {s1:e}"
        )));
    }
    Ok(s1 / sn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::sym_eigenvalues;
    use crate::quasimatrix::{gram, qm_apply};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn check_qr(a: &TallQuasimatrix, f: &QmQR, tol: f64) {
        let n = a.ncols();
        let mut l = FunopLedger::new();
        let g = gram(&f.q, &mut l);
        assert!((g - DenseMatrix::identity(n, n)).amax() <= tol);
        for j in 0..n {
            for i in j + 1..n {
                assert_eq!(f.r[(i, j)], 0.0);
            }
            assert!(f.r[(j, j)] >= 0.0);
            let rec = qm_apply(&f.q, &f.r.column(j).into_owned(), &mut l).unwrap();
            let diff = funspace::axpy(-1.0, &rec, a.col(j), &mut l);
            let nd = funspace::norm(&diff, &mut l);
            assert!(nd <= tol * funspace::norm(a.col(j), &mut l), "col {j}: {nd:e}");
        }
    }

    #[test]
    fn gs_examples() {
        let mut l = FunopLedger::new();
        let f = qr_gs(&TallQuasimatrix::legendre(6), &mut l).unwrap();
        assert!((f.r.clone() - DenseMatrix::identity(6, 6)).amax() < 1e-12);
        let f = qr_gs(&TallQuasimatrix::chebyshev(2), &mut l).unwrap();
        assert_relative_eq!(f.r[(0, 0)], 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(f.r[(1, 1)], (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(f.r[(0, 1)], 0.0);
        assert_relative_eq!(f.q.col(0).coeffs()[0], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(f.q.col(1).coeffs()[1], (1.5f64).sqrt(), epsilon = 1e-15);
        let dup = TallQuasimatrix::new(vec![ChebFun::cheb_t(0), ChebFun::cheb_t(0)]).unwrap();
        assert_eq!(qr_gs(&dup, &mut l).unwrap_err(), SilrError::RankDeficient(1));
    }

    #[test]
    fn householder_examples() {
        let mut l = FunopLedger::new();
        let f = qr_householder(&TallQuasimatrix::legendre(6), &mut l).unwrap();
        assert!((f.r.clone() - DenseMatrix::identity(6, 6)).amax() < 1e-10);
        let a = TallQuasimatrix::chebyshev(10);
        let h = qr_householder(&a, &mut l).unwrap();
        let g = qr_gs(&a, &mut l).unwrap();
        assert!((h.r.clone() - g.r).amax() < 1e-8);
        check_qr(&a, &h, 1e-12);
        let f = qr_householder(&TallQuasimatrix::chebyshev(1), &mut l).unwrap();
        assert_relative_eq!(f.r[(0, 0)], 2f64.sqrt(), epsilon = 1e-15);
        let dup = TallQuasimatrix::new(vec![ChebFun::cheb_t(0), ChebFun::cheb_t(0)]).unwrap();
        assert_eq!(qr_householder(&dup, &mut l).unwrap_err(), SilrError::RankDeficient(1));
    }

    #[test]
    fn gs_funop_count_is_exact() {
        for n in [1usize, 2, 5, 20, 50] {
            let mut l = FunopLedger::new();
            qr_gs(&TallQuasimatrix::chebyshev(n), &mut l).unwrap();
            assert_eq!(l.total() as usize, 3 * n * (n + 1) / 2 - n);
            let table = (n * (n + 1)) as f64;
            let ratio = l.total() as f64 / table;
            assert!((1.0 / 1.5..=1.5).contains(&ratio));
        }
    }

    #[test]
    fn svd_examples() {
        let mut l = FunopLedger::new();
        let s = qm_svd(&TallQuasimatrix::legendre(5), &mut l).unwrap();
        for v in s.sigma.iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
        let s = qm_svd(&TallQuasimatrix::chebyshev(2), &mut l).unwrap();
        assert_relative_eq!(s.sigma[0], 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(s.sigma[1], (2.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        let a = TallQuasimatrix::chebyshev(20);
        let s = qm_svd(&a, &mut l).unwrap();
        let mut ev = sym_eigenvalues(&gram(&a, &mut l));
        ev.reverse();
        for (si, ei) in s.sigma.iter().zip(&ev) {
            assert!((si * si - ei).abs() <= 1e-8);
        }
        // Rank deficiency is tolerated.
        let dup = TallQuasimatrix::new(vec![ChebFun::cheb_t(0), ChebFun::cheb_t(0)]).unwrap();
        let s = qm_svd(&dup, &mut l).unwrap();
        assert_relative_eq!(s.sigma[0], 2.0, epsilon = 1e-14);
        assert!(s.sigma[1].abs() < 1e-12);
    }

    #[test]
    fn svd_post_qr_count() {
        for n in [3usize, 10, 25] {
            let a = TallQuasimatrix::chebyshev(n);
            let mut l = FunopLedger::new();
            let qr = householder(&a, &mut l, false).unwrap();
            let before = l;
            svd_from_qr(&qr, &mut l).unwrap();
            let inc = l.since(&before).total() as usize;
            assert_eq!(inc, n * (2 * n - 1));
            assert!(inc <= 2 * (2 * n - 1) * n);
        }
    }

    #[test]
    fn cond_examples() {
        let mut l = FunopLedger::new();
        assert_relative_eq!(cond(&TallQuasimatrix::legendre(7), &mut l).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(cond(&TallQuasimatrix::chebyshev(2), &mut l).unwrap(), 3f64.sqrt(), epsilon = 1e-14);
        let dup = TallQuasimatrix::new(vec![ChebFun::cheb_t(0), ChebFun::cheb_t(0)]).unwrap();
        assert!(matches!(cond(&dup, &mut l), Err(SilrError::Singular(_))));
    }

    fn poly_cols(n: usize, deg: usize) -> impl Strategy<Value = TallQuasimatrix> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, deg + 1), n).prop_map(|cols| {
            TallQuasimatrix::new(cols.into_iter().map(ChebFun::from_coeffs).collect()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn both_qr_variants_factor(n in 1usize..=40, seed_cols in poly_cols(40, 45)) {
            let cols = seed_cols.columns()[..n].to_vec();
            let a = TallQuasimatrix::new(cols).unwrap();
            let mut l = FunopLedger::new();
            check_qr(&a, &qr_gs(&a, &mut l).unwrap(), 1e-8);
            check_qr(&a, &qr_householder(&a, &mut l).unwrap(), 1e-8);
        }
    }
}
