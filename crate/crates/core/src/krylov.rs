//! Golub-Kahan bidiagonalization of a tall quasimatrix and LSMR.

use std::fmt;

use nalgebra::DVector;

use crate::densela::{dense_qr, singular_values, tri_solve, DenseMatrix};
use crate::funspace::{self, ChebFun, FunopLedger};
use crate::quasimatrix::{qm_adjoint_apply, qm_apply, TallQuasimatrix};
use crate::{Result, SilrError, Vector};

/// Breakdown threshold relative to the first `alpha`.
pub const BREAKDOWN_RTOL: f64 = 1e-14;
/// Reorthogonalization is on by default up to this many columns.
pub const REORTH_MAX_COLS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GkStatus {
    Active,
    /// `b = 0`; the solution is `x = 0`.
    ZeroRhs,
    /// An `alpha` or `beta` vanished; the Krylov space is exhausted.
    Breakdown,
}

/// Golub-Kahan state after `k` steps: `U_{k+1}`, `V_{k+1}`,
/// `alpha_1..alpha_{k+1}`, `beta_1..beta_{k+1}`.
#[derive(Clone, Debug)]
pub struct GkState {
    pub k: usize,
    pub us: Vec<ChebFun>,
    pub vs: Vec<Vector>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub status: GkStatus,
    reorth: bool,
}

impl GkState {
    /// `B_k`: `(k+1) x k` lower bidiagonal, `alpha_1..alpha_k` on the diagonal
    /// and `beta_2..beta_{k+1}` below it.
    pub fn b_matrix(&self) -> DenseMatrix {
        let k = self.k;
        let mut b = DenseMatrix::zeros(k + 1, k);
        for j in 0..k {
            b[(j, j)] = self.alphas[j];
            b[(j + 1, j)] = self.betas[j + 1];
        }
        b
    }

    /// `L_{k+1} = [B_k, alpha_{k+1} e_{k+1}]`.
    pub fn l_matrix(&self) -> DenseMatrix {
        let k = self.k;
        let mut l = DenseMatrix::zeros(k + 1, k + 1);
        l.view_mut((0, 0), (k + 1, k)).copy_from(&self.b_matrix());
        l[(k, k)] = self.alphas.get(k).copied().unwrap_or(0.0);
        l
    }

    /// `V_k` as an `n x k` matrix.
    pub fn v_matrix(&self, k: usize) -> DenseMatrix {
        let n = self.vs.first().map_or(0, |v| v.len());
        DenseMatrix::from_fn(n, k, |i, j| self.vs[j][i])
    }
}

fn orthogonalize_fun(w: ChebFun, basis: &[ChebFun], ledger: &mut FunopLedger) -> ChebFun {
    let mut w = w;
    for _ in 0..2 {
        for u in basis {
            let c = funspace::inner(u, &w, ledger);
            w = funspace::axpy(-c, u, &w, ledger);
        }
    }
    w
}

fn orthogonalize_vec(w: &mut Vector, basis: &[Vector]) {
    for _ in 0..2 {
        for v in basis {
            let c = v.dot(w);
            w.axpy(-c, v, 1.0);
        }
    }
}

/// `beta_1 = |b|`, `u_1 = b / beta_1`, `alpha_1 = |A* u_1|`, `v_1 = A* u_1 / alpha_1`.
pub fn gk_init(
    a: &TallQuasimatrix,
    b: &ChebFun,
    reorth: bool,
    ledger: &mut FunopLedger,
) -> GkState {
    let beta = funspace::norm(b, ledger);
    let mut st = GkState {
        k: 0,
        us: vec![],
        vs: vec![],
        alphas: vec![],
        betas: vec![beta],
        status: GkStatus::Active,
        reorth,
    };
    if beta == 0.0 {
        st.status = GkStatus::ZeroRhs;
        return st;
    }
    let u = funspace::scale(1.0 / beta, b, ledger);
    let atu = qm_adjoint_apply(a, &u, ledger);
    let alpha = atu.norm();
    st.us.push(u);
    st.alphas.push(alpha);
    // |u_1| = 1, so alpha_1 <= |A|_F; compare against that scale.
    let a_fro = a
        .columns()
        .iter()
        .map(|c| funspace::inner(c, c, ledger))
        .sum::<f64>()
        .sqrt();
    if !(alpha > BREAKDOWN_RTOL * a_fro) {
        st.status = GkStatus::Breakdown;
        return st;
    }
    st.vs.push(atu / alpha);
    st
}

/// One Golub-Kahan step:
/// `beta_{k+1} u_{k+1} = A v_k - alpha_k u_k`,
/// `alpha_{k+1} v_{k+1} = A* u_{k+1} - beta_{k+1} v_k`.
pub fn gk_step(a: &TallQuasimatrix, st: &mut GkState, ledger: &mut FunopLedger) -> Result<()> {
    if st.status != GkStatus::Active {
        return Err(SilrError::InvalidArgument(
            "gk_step called after breakdown".into(),
        ));
    }
    let k = st.k;
    let tol = BREAKDOWN_RTOL * st.alphas[0];
    let av = qm_apply(a, &st.vs[k], ledger)?;
    let mut w = funspace::axpy(-st.alphas[k], &st.us[k], &av, ledger);
    if st.reorth {
        w = orthogonalize_fun(w, &st.us, ledger);
    }
    let beta = funspace::norm(&w, ledger);
    st.k += 1;
    st.betas.push(beta);
    if !(beta > tol) {
        st.status = GkStatus::Breakdown;
        return Ok(());
    }
    let u = funspace::scale(1.0 / beta, &w, ledger);
    let mut p = qm_adjoint_apply(a, &u, ledger);
    p.axpy(-beta, &st.vs[k], 1.0);
    if st.reorth {
        orthogonalize_vec(&mut p, &st.vs);
    }
    let alpha = p.norm();
    st.us.push(u);
    st.alphas.push(alpha);
    if !(alpha > tol) {
        st.status = GkStatus::Breakdown;
        return Ok(());
    }
    st.vs.push(p / alpha);
    Ok(())
}

/// Why LSMR stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    S1,
    S2,
    S3,
    MaxIt,
    Breakdown,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::S1 => "S1",
            Termination::S2 => "S2",
            Termination::S3 => "S3",
            Termination::MaxIt => "maxit",
            Termination::Breakdown => "breakdown",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct LsmrOptions {
    pub lambda: f64,
    pub atol: f64,
    pub btol: f64,
    pub conlim: f64,
    pub maxit: usize,
    /// `None` picks reorthogonalization for `n <= 512`.
    pub reorth: Option<bool>,
}

impl Default for LsmrOptions {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            atol: 1e-7,
            btol: 1e-7,
            conlim: 1e8,
            maxit: 1000,
            reorth: None,
        }
    }
}

/// One row of the LSMR history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsmrIter {
    pub iter: usize,
    /// `|b - A x_k|`, computed exactly.
    pub resid: f64,
    /// `|A* r_k - lambda x_k|` from the projected problem.
    pub normal_resid: f64,
    pub smax: f64,
    pub smin: f64,
}

#[derive(Clone, Debug)]
pub struct LsmrReport {
    pub x: Vector,
    pub iterations: usize,
    pub history: Vec<LsmrIter>,
    pub termination: Termination,
    pub funops: FunopLedger,
}

impl LsmrReport {
    /// History as CSV with header `iter,resid,normal_resid,smax,smin`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,resid,normal_resid,smax,smin\n");
        for h in &self.history {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                h.iter, h.resid, h.normal_resid, h.smax, h.smin
            ));
        }
        s
    }
}

// min_y | [B^T B + lambda I; alpha_{k+1} beta_{k+1} e_k^T] y - alpha_1 beta_1 e_1 |
fn projected_solve(st: &GkState, lambda: f64) -> Result<(Vector, f64)> {
    let k = st.k;
    let b = st.b_matrix();
    let mut m = DenseMatrix::zeros(k + 1, k);
    let btb = b.transpose() * &b;
    m.view_mut((0, 0), (k, k)).copy_from(&btb);
    for i in 0..k {
        m[(i, i)] += lambda;
    }
    let a_next = st.alphas.get(k).copied().unwrap_or(0.0);
    m[(k, k - 1)] = a_next * st.betas[k];
    let mut rhs = DVector::zeros(k + 1);
    rhs[0] = st.alphas[0] * st.betas[0];
    let (q, r) = dense_qr(&m)?;
    let y = tri_solve(&r, &(q.transpose() * &rhs))?;
    let res = (&m * &y - rhs).norm();
    Ok((y, res))
}

/// LSMR for `min |A x - b|^2 + lambda |x|^2`.
///
/// The projected problem is re-solved from scratch each iteration and the
/// residual `|b - A x_k|` is evaluated exactly. Stopping rules, with
/// `s = sigma(B_k)`:
///
/// ```text
/// S1: sqrt(|r|^2 + lambda |x|^2) <= BTOL |b| + ATOL sqrt(smax^2 + lambda) |x|
/// S2: |A* r - lambda x| <= ATOL sqrt(smax^2 + lambda) sqrt(|r|^2 + lambda)
/// S3: sqrt((smax^2 + lambda) / (smin^2 + lambda)) >= CONLIM
/// ```
pub fn lsmr(
    a: &TallQuasimatrix,
    b: &ChebFun,
    opts: &LsmrOptions,
    ledger: &mut FunopLedger,
) -> Result<LsmrReport> {
    let n = a.ncols();
    let lambda = opts.lambda;
    if !(lambda >= 0.0) {
        return Err(SilrError::InvalidArgument("lambda must be non-negative".into()));
    }
    let start = *ledger;
    let reorth = opts.reorth.unwrap_or(n <= REORTH_MAX_COLS);
    let mut st = gk_init(a, b, reorth, ledger);
    let bnorm = st.betas[0];
    let done = |x: Vector, it, history, term, ledger: &FunopLedger| LsmrReport {
        x,
        iterations: it,
        history,
        termination: term,
        funops: ledger.since(&start),
    };
    match st.status {
        GkStatus::ZeroRhs => return Ok(done(DVector::zeros(n), 0, vec![], Termination::S1, ledger)),
        GkStatus::Breakdown => {
            return Ok(done(DVector::zeros(n), 0, vec![], Termination::Breakdown, ledger))
        }
        GkStatus::Active => {}
    }
    let mut history = Vec::new();
    let mut x = DVector::zeros(n);
    for it in 1..=opts.maxit {
        gk_step(a, &mut st, ledger)?;
        let (y, normal_resid) = projected_solve(&st, lambda)?;
        x = st.v_matrix(st.k) * &y;
        let ax = qm_apply(a, &x, ledger)?;
        let r = funspace::axpy(-1.0, &ax, b, ledger);
        let resid = funspace::norm(&r, ledger);
        let sv = singular_values(&st.b_matrix());
        let (smax, smin) = (sv[0], sv[sv.len() - 1]);
        history.push(LsmrIter {
            iter: it,
            resid,
            normal_resid,
            smax,
            smin,
        });
        let xnorm = x.norm();
        let anorm = (smax * smax + lambda).sqrt();
        let term = if (resid * resid + lambda * xnorm * xnorm).sqrt()
            <= opts.btol * bnorm + opts.atol * anorm * xnorm
        {
            Some(Termination::S1)
        } else if normal_resid <= opts.atol * anorm * (resid * resid + lambda).sqrt() {
            Some(Termination::S2)
        } else if (anorm * anorm / (smin * smin + lambda)).sqrt() >= opts.conlim {
            Some(Termination::S3)
        } else if st.status == GkStatus::Breakdown {
            Some(Termination::Breakdown)
        } else {
            None
        };
        if let Some(t) = term {
            return Ok(done(x, it, history, t, ledger));
        }
    }
    Ok(done(x, opts.maxit, history, Termination::MaxIt, ledger))
}
