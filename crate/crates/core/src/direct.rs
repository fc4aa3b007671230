//! Direct solvers for the overdetermined and underdetermined ridge problems,
//! and kernel ridge regression.

use nalgebra::DVector;

use crate::densela::{dense_qr, spd_solve, sym_eigenvalues, tri_solve, tri_solve_lower, DenseMatrix};
use crate::factor::{qm_svd, qr_householder};
use crate::funspace::{self, ChebFun, FunopLedger};
use crate::quasimatrix::{gram, qm_adjoint_apply, qm_apply, TallQuasimatrix, WideQuasimatrix};
use crate::{Result, SilrError, Vector};

/// `min_x ||A x - b||^2 + lambda ||x||^2` for a tall quasimatrix `A`.
#[derive(Clone, Debug)]
pub struct OverSilrProblem {
    pub a: TallQuasimatrix,
    pub b: ChebFun,
    pub lambda: f64,
}

/// `min_x ||A x - b||^2 + lambda ||x||^2` for a wide quasimatrix `A`, whose
/// solution is `x = A* y` with `(A A* + lambda I) y = b`.
#[derive(Clone, Debug)]
pub struct UnderSilrProblem {
    pub rows: WideQuasimatrix,
    pub b: Vector,
    pub lambda: f64,
}

/// Solution of an underdetermined problem.
#[derive(Clone, Debug)]
pub struct UnderSolution {
    pub y: Vector,
    pub x: ChebFun,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SilrError::InvalidArgument(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

impl OverSilrProblem {
    pub fn new(a: TallQuasimatrix, b: ChebFun, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { a, b, lambda })
    }

    /// `||A x - b||^2 + lambda ||x||^2`, evaluated exactly.
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        Ok(self.residual_norm(x)?.powi(2) + self.lambda * x.norm_squared())
    }

    /// `||A x - b||` in `L2([-1, 1])`.
    pub fn residual_norm(&self, x: &Vector) -> Result<f64> {
        let mut scratch = FunopLedger::new();
        let ax = qm_apply(&self.a, x, &mut scratch)?;
        let r = funspace::axpy(-1.0, &self.b, &ax, &mut scratch);
        Ok(funspace::norm(&r, &mut scratch))
    }
}

impl UnderSilrProblem {
    pub fn new(rows: WideQuasimatrix, b: Vector, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if b.len() != rows.nrows() {
            return Err(SilrError::Length {
                expected: rows.nrows(),
                got: b.len(),
            });
        }
        Ok(Self { rows, b, lambda })
    }
}

fn shifted(g: &DenseMatrix, lambda: f64) -> DenseMatrix {
    let mut s = g.clone();
    for i in 0..s.nrows() {
        s[(i, i)] += lambda;
    }
    s
}

/// Normal equations `(A*A + lambda I) x = A* b`. Costs `n (n + 3) / 2` inner products.
pub fn solve_over_normal(p: &OverSilrProblem, ledger: &mut FunopLedger) -> Result<Vector> {
    let g = gram(&p.a, ledger);
    let atb = qm_adjoint_apply(&p.a, &p.b, ledger);
    spd_solve(&shifted(&g, p.lambda), &atb)
}

/// QR route: `A = Q_A R_A`, `[R_A; sqrt(lambda) I] = Q_C R_C`,
/// `R_C x = Q_{C,1}^T Q_A* b`.
pub fn solve_over_qr(p: &OverSilrProblem, ledger: &mut FunopLedger) -> Result<Vector> {
    let n = p.a.ncols();
    let qr = qr_householder(&p.a, ledger)?;
    let qtb = qm_adjoint_apply(&qr.q, &p.b, ledger);
    if p.lambda == 0.0 {
        return tri_solve(&qr.r, &qtb);
    }
    let mut c = DenseMatrix::zeros(2 * n, n);
    c.view_mut((0, 0), (n, n)).copy_from(&qr.r);
    let sl = p.lambda.sqrt();
    for i in 0..n {
        c[(n + i, i)] = sl;
    }
    let (qc, rc) = dense_qr(&c)?;
    let rhs = qc.rows(0, n).transpose() * qtb;
    tri_solve(&rc, &rhs)
}

/// SVD route: `x = V (S^2 + lambda)^-1 S U* b`.
pub fn solve_over_svd(p: &OverSilrProblem, ledger: &mut FunopLedger) -> Result<Vector> {
    let svd = qm_svd(&p.a, ledger)?;
    let utb = qm_adjoint_apply(&svd.u, &p.b, ledger);
    let s1 = svd.sigma[0];
    let mut coef = DVector::zeros(svd.sigma.len());
    for (i, &s) in svd.sigma.iter().enumerate() {
        let d = s * s + p.lambda;
        if p.lambda == 0.0 && !(s > 1e-14 * s1) || d == 0.0 {
            return Err(SilrError::Singular(format!(
                "sigma_{i} = {s:e} with lambda = {}",
                p.lambda
            )));
        }
        coef[i] = s * utb[i] / d;
    }
    Ok(&svd.v * coef)
}

/// Default overdetermined solver (QR route).
pub fn solve_over(p: &OverSilrProblem, ledger: &mut FunopLedger) -> Result<Vector> {
    solve_over_qr(p, ledger)
}

/// `y = (K + lambda I)^-1 b` with `K = A A*`, then `x = A* y`.
pub fn solve_under(p: &UnderSilrProblem, ledger: &mut FunopLedger) -> Result<UnderSolution> {
    let tall = p.rows.adjoint();
    let k = gram(tall, ledger);
    let y = spd_solve(&shifted(&k, p.lambda), &p.b)?;
    let x = qm_apply(tall, &y, ledger)?;
    Ok(UnderSolution { y, x })
}

/// LQ route: `A* = Q R` so `A = R^T Q*`; the augmented `[R; sqrt(lambda) I] = Q_C R_C`
/// gives `K + lambda I = R_C^T R_C`.
pub fn solve_under_lq(p: &UnderSilrProblem, ledger: &mut FunopLedger) -> Result<UnderSolution> {
    let tall = p.rows.adjoint();
    let n = tall.ncols();
    let qr = qr_householder(tall, ledger)?;
    let rc = if p.lambda == 0.0 {
        qr.r.clone()
    } else {
        let mut c = DenseMatrix::zeros(2 * n, n);
        c.view_mut((0, 0), (n, n)).copy_from(&qr.r);
        let sl = p.lambda.sqrt();
        for i in 0..n {
            c[(n + i, i)] = sl;
        }
        dense_qr(&c)?.1
    };
    let w = tri_solve_lower(&rc.transpose(), &p.b)?;
    let y = tri_solve(&rc, &w)?;
    let x = qm_apply(tall, &y, ledger)?;
    Ok(UnderSolution { y, x })
}

/// Positive semidefinite kernel on `R^d`.
pub trait Kernel: Send + Sync {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
}

/// `k(x, y) = exp(-|x - y|^2 / (2 h^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianKernel {
    pub bandwidth: f64,
}

impl Kernel for GaussianKernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-0.5 * d2 / (self.bandwidth * self.bandwidth)).exp()
    }
}

/// Kernel matrix `K_ij = k(x_i, y_j)` over the rows of `x` and `y`.
pub fn kernel_matrix(kernel: &dyn Kernel, x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    let xr: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let yr: Vec<Vec<f64>> = y.row_iter().map(|r| r.iter().copied().collect()).collect();
    DenseMatrix::from_fn(xr.len(), yr.len(), |i, j| kernel.eval(&xr[i], &yr[j]))
}

/// Fitted kernel ridge regression model `f(x) = sum_i alpha_i k(x_i, x)`.
pub struct KrrModel<'k> {
    pub alpha: Vector,
    pub points: DenseMatrix,
    pub kernel: &'k dyn Kernel,
}

impl KrrModel<'_> {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.points
            .row_iter()
            .zip(self.alpha.iter())
            .map(|(p, a)| {
                let p: Vec<f64> = p.iter().copied().collect();
                a * self.kernel.eval(&p, x)
            })
            .sum()
    }

    /// Predictions at each row of `x`.
    pub fn predict_many(&self, x: &DenseMatrix) -> Vector {
        kernel_matrix(self.kernel, x, &self.points) * &self.alpha
    }
}

/// Solves `(K + lambda I) alpha = y` with `K_ij = k(x_i, x_j)`.
///
/// Cholesky is retried once with jitter `1e-12 trace(K) / m` on failure.
pub fn krr_fit<'k>(
    points: &DenseMatrix,
    y: &Vector,
    kernel: &'k dyn Kernel,
    lambda: f64,
) -> Result<KrrModel<'k>> {
    if !(lambda > 0.0) {
        return Err(SilrError::InvalidArgument("krr_fit needs lambda > 0".into()));
    }
    let m = points.nrows();
    if y.len() != m {
        return Err(SilrError::Length { expected: m, got: y.len() });
    }
    let k = kernel_matrix(kernel, points, points);
    let min_eig = sym_eigenvalues(&k)[0];
    if min_eig < -1e-8 {
        return Err(SilrError::NotPsd(min_eig));
    }
    let alpha = match spd_solve(&shifted(&k, lambda), y) {
        Ok(a) => a,
        Err(_) => {
            let jitter = 1e-12 * k.trace() / m as f64;
            spd_solve(&shifted(&k, lambda + jitter), y)?
        }
    };
    Ok(KrrModel {
        alpha,
        points: points.clone(),
        kernel,
    })
}
