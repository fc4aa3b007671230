//! SVRG for objectives given as integrals `f(x) = int f_eta(x) d mu(eta)`,
//! and its instantiations for the overdetermined and underdetermined ridge
//! problems and for kernel ridge regression with random features.
//!
//! Measures `c p(eta) d eta` are handled by drawing `eta ~ p` and folding the
//! mass into the coordinates, `z~ = sqrt(c) z`, so that
//! `grad f_eta(x) = c z (z^T x - z_b) + lambda x` is unbiased.

use std::fmt;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::densela::DenseMatrix;
use crate::direct::{kernel_matrix, GaussianKernel, Kernel, OverSilrProblem, UnderSilrProblem};
use crate::funspace::{self, ChebFun, FunopLedger};
use crate::quasimatrix::{gram, qm_adjoint_apply, qm_apply, CoordinateRep};
use crate::rng::{self, SilrRng};
use crate::{Result, SilrError, Vector};

/// Divergence is declared once `|x_k| > DIVERGENCE_FACTOR (1 + |x_0|)`.
pub const DIVERGENCE_FACTOR: f64 = 1e8;
/// Draws used to spot-check the sup bound `M`.
pub const SUP_CHECK_DRAWS: usize = 10_000;

/// How the next anchor is formed from an epoch's inner iterates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Averaging {
    /// Option I: the last inner iterate.
    LastIterate,
    /// Option II: the mean of `x_1, ..., x_m`.
    #[default]
    Average,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvrgConfig {
    pub alpha: f64,
    pub m: usize,
    pub s_max: usize,
    pub averaging: Averaging,
    pub seed: u64,
}

impl SvrgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(SilrError::InvalidArgument(format!("step size must be positive, got {}", self.alpha)));
        }
        if self.m == 0 || self.s_max == 0 {
            return Err(SilrError::InvalidArgument("m and s_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// `f(x) = int f_eta(x) d mu(eta)` with oracles for the full and the
/// per-sample gradients. `eta` is drawn from the normalized measure.
pub trait IntegrableObjective: Sync {
    type Eta;

    fn dim(&self) -> usize;
    fn sample_eta(&self, rng: &mut SilrRng) -> Self::Eta;
    /// Unbiased per-sample gradient.
    fn stoch_grad(&self, eta: &Self::Eta, x: &Vector) -> Vector;
    /// Per-sample objective whose gradient is [`Self::stoch_grad`].
    fn stoch_objective(&self, eta: &Self::Eta, x: &Vector) -> f64;
    fn full_grad(&self, x: &Vector, ledger: &mut FunopLedger) -> Result<Vector>;
    /// Objective value, for reporting. Never charged to a ledger.
    fn objective(&self, x: &Vector) -> f64;
    /// Sup bound `M` on the (mass-folded) `|z(eta)|^2`.
    fn sup_bound(&self) -> f64;
    /// Lower bound on the smallest singular value of the operator.
    fn gamma(&self) -> f64;
    fn lambda(&self) -> f64;
    /// Rough flop count of one inner iteration.
    fn inner_flops(&self) -> u64 {
        10 * self.dim() as u64
    }
    /// Rough flop count of one full gradient, excluding function operations.
    fn full_grad_flops(&self) -> u64 {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `f(x~_s)`.
    pub objective: f64,
    /// `|grad f(x~_s)|`.
    pub grad_norm: f64,
    /// Cumulative function operations charged so far.
    pub funops: u64,
    /// Cumulative flop estimate.
    pub flops: u64,
}

#[derive(Clone, Debug)]
pub struct SvrgReport {
    pub x: Vector,
    /// Epoch 0 is the starting point.
    pub history: Vec<EpochRecord>,
    pub funops: FunopLedger,
}

impl SvrgReport {
    /// CSV with header `epoch,objective,grad_norm,wall_funops,wall_flops_estimate`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,objective,grad_norm,wall_funops,wall_flops_estimate\n");
        for r in &self.history {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{},{}\n",
                r.epoch, r.objective, r.grad_norm, r.funops, r.flops
            ));
        }
        s
    }
}

fn diverged(x: &Vector, limit: f64) -> bool {
    let n = x.norm();
    !n.is_finite() || n > limit
}

/// The SVRG outer/inner loop. The full gradient is computed once per epoch
/// at the anchor; the reported gradient norm at the final anchor uses a
/// scratch ledger.
pub fn svrg_integrable<O: IntegrableObjective>(
    obj: &O,
    cfg: &SvrgConfig,
    x0: &Vector,
    ledger: &mut FunopLedger,
) -> Result<SvrgReport> {
    svrg_integrable_observed(obj, cfg, x0, ledger, |_, _| {})
}

/// [`svrg_integrable`] calling `observer(s, x~_s)` after every epoch.
pub fn svrg_integrable_observed<O, F>(
    obj: &O,
    cfg: &SvrgConfig,
    x0: &Vector,
    ledger: &mut FunopLedger,
    mut observer: F,
) -> Result<SvrgReport>
where
    O: IntegrableObjective,
    F: FnMut(usize, &Vector),
{
    cfg.validate()?;
    if x0.len() != obj.dim() {
        return Err(SilrError::Length {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    let start = *ledger;
    let limit = DIVERGENCE_FACTOR * (1.0 + x0.norm());
    let mut r = rng::stream(cfg.seed, rng::ETA_STREAM);
    let mut anchor = x0.clone();
    let mut flops = 0u64;
    let mut history = vec![EpochRecord {
        epoch: 0,
        objective: obj.objective(x0),
        grad_norm: f64::NAN,
        funops: 0,
        flops: 0,
    }];
    for s in 1..=cfg.s_max {
        let mu = obj.full_grad(&anchor, ledger)?;
        flops += obj.full_grad_flops();
        history[s - 1].grad_norm = mu.norm();
        let mut x = anchor.clone();
        let mut sum = DVector::zeros(x.len());
        for _ in 0..cfg.m {
            let eta = obj.sample_eta(&mut r);
            let v = &(&obj.stoch_grad(&eta, &x) - &obj.stoch_grad(&eta, &anchor)) + &mu;
            x.axpy(-cfg.alpha, &v, 1.0);
            if diverged(&x, limit) {
                return Err(SilrError::Divergence(s));
            }
            if cfg.averaging == Averaging::Average {
                sum += &x;
            }
        }
        flops += cfg.m as u64 * obj.inner_flops();
        anchor = match cfg.averaging {
            Averaging::LastIterate => x,
            Averaging::Average => sum / cfg.m as f64,
        };
        observer(s, &anchor);
        history.push(EpochRecord {
            epoch: s,
            objective: obj.objective(&anchor),
            grad_norm: f64::NAN,
            funops: ledger.since(&start).total(),
            flops,
        });
    }
    let mut scratch = FunopLedger::new();
    history[cfg.s_max].grad_norm = obj.full_grad(&anchor, &mut scratch)?.norm();
    Ok(SvrgReport {
        x: anchor,
        history,
        funops: ledger.since(&start),
    })
}

/// Convergence factor `1 / (mu alpha (1 - 2 L alpha) m) + 2 L alpha / (1 - 2 L alpha)`
/// for strong convexity `mu` and `L = L_sup`. Infinite when `alpha >= 1 / (2L)`.
pub fn convergence_rate(mu: f64, l_sup: f64, alpha: f64, m: usize) -> f64 {
    let d = 1.0 - 2.0 * l_sup * alpha;
    if !(d > 0.0) || !(mu > 0.0) {
        return f64::INFINITY;
    }
    1.0 / (mu * alpha * d * m as f64) + 2.0 * l_sup * alpha / d
}

/// `alpha = 1 / (5 (M + lambda))` and `m = ceil(50 (M + lambda) / (gamma^2 + lambda))`.
pub fn step_and_length(m_bound: f64, gamma: f64, lambda: f64) -> Result<(f64, usize)> {
    let mu = gamma * gamma + lambda;
    if !(mu > 0.0) {
        return Err(SilrError::InvalidArgument("need lambda > 0 or gamma > 0".into()));
    }
    if !(m_bound >= 0.0) {
        return Err(SilrError::InvalidArgument("sup bound must be non-negative".into()));
    }
    let l = m_bound + lambda;
    Ok((1.0 / (5.0 * l), (50.0 * l / mu).ceil().max(1.0) as usize))
}

/// `s_max = ceil(log(|b|^2 / (2 eps)) / log(6/5))`, at least 1.
pub fn over_epochs(b_norm2: f64, eps: f64) -> usize {
    epochs_from(b_norm2 / (2.0 * eps))
}

/// `s_max = ceil(log(|b|^2 + |b|^2 / (eps sqrt(lambda_min(K) + lambda))) / log(6/5))`,
/// at least 1, with `lambda_min(K)` replaced by its lower bound `gamma^2`.
pub fn under_epochs(b_norm2: f64, eps: f64, gamma: f64, lambda: f64) -> usize {
    epochs_from(b_norm2 + b_norm2 / (eps * (gamma * gamma + lambda).sqrt()))
}

fn epochs_from(ratio: f64) -> usize {
    if !(ratio > 1.0) {
        return 1;
    }
    (ratio.ln() / (6.0f64 / 5.0).ln()).ceil().max(1.0) as usize
}

fn check_sup_bound(rep: &CoordinateRep, m_bound: f64) -> Result<()> {
    let mut r = rng::stream(0, rng::ETA_STREAM);
    let c = rep.mass();
    let mut z = vec![0.0; rep.dim()];
    for _ in 0..SUP_CHECK_DRAWS {
        let eta = rep.sample(&mut r);
        rep.eval_into(&eta, &mut z);
        let v = c * z.iter().map(|t| t * t).sum::<f64>();
        if v > m_bound * (1.0 + 1e-12) {
            return Err(SilrError::InvalidArgument(format!(
                "sup bound M = {m_bound} is below c |z(eta)|^2 = {v}"
            )));
        }
    }
    Ok(())
}

/// Finite sum `f(x) = (1/N) sum_i [ (a_i^T x - b_i)^2 / 2 + lambda |x|^2 / 2 ]`
/// with `i` uniform: the discrete special case.
#[derive(Clone, Debug)]
pub struct DiscreteObjective {
    pub rows: DenseMatrix,
    pub b: Vector,
    pub lambda: f64,
}

impl DiscreteObjective {
    pub fn new(rows: DenseMatrix, b: Vector, lambda: f64) -> Result<Self> {
        if rows.nrows() != b.len() || rows.nrows() == 0 {
            return Err(SilrError::Length {
                expected: rows.nrows(),
                got: b.len(),
            });
        }
        Ok(Self { rows, b, lambda })
    }

    /// `(A^T A / N + lambda I)^-1 A^T b / N`.
    pub fn minimizer(&self) -> Result<Vector> {
        let nn = self.rows.nrows() as f64;
        let mut h = self.rows.transpose() * &self.rows / nn;
        for i in 0..h.nrows() {
            h[(i, i)] += self.lambda;
        }
        crate::densela::spd_solve(&h, &(self.rows.transpose() * &self.b / nn))
    }

    fn hessian_min(&self) -> f64 {
        let nn = self.rows.nrows() as f64;
        let h = self.rows.transpose() * &self.rows / nn;
        crate::densela::sym_eigenvalues(&h)[0].max(0.0)
    }
}

impl IntegrableObjective for DiscreteObjective {
    type Eta = usize;

    fn dim(&self) -> usize {
        self.rows.ncols()
    }
    fn sample_eta(&self, rng: &mut SilrRng) -> usize {
        rng.random_range(0..self.rows.nrows())
    }
    fn stoch_grad(&self, &i: &usize, x: &Vector) -> Vector {
        let a = self.rows.row(i).transpose();
        let r = a.dot(x) - self.b[i];
        a * r + self.lambda * x
    }
    fn stoch_objective(&self, &i: &usize, x: &Vector) -> f64 {
        let r = self.rows.row(i).transpose().dot(x) - self.b[i];
        0.5 * r * r + 0.5 * self.lambda * x.norm_squared()
    }
    fn full_grad(&self, x: &Vector, _ledger: &mut FunopLedger) -> Result<Vector> {
        let nn = self.rows.nrows() as f64;
        Ok(self.rows.transpose() * (&self.rows * x - &self.b) / nn + self.lambda * x)
    }
    fn objective(&self, x: &Vector) -> f64 {
        let nn = self.rows.nrows() as f64;
        0.5 * (&self.rows * x - &self.b).norm_squared() / nn + 0.5 * self.lambda * x.norm_squared()
    }
    fn sup_bound(&self) -> f64 {
        self.rows.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max)
    }
    fn gamma(&self) -> f64 {
        self.hessian_min().sqrt()
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn full_grad_flops(&self) -> u64 {
        4 * (self.rows.nrows() * self.rows.ncols()) as u64
    }
}

/// Overdetermined SILR, `f(x) = |A x - b|^2 / 2 + lambda |x|^2 / 2`.
/// The full gradient `A*(A x - b) + lambda x` is the only step that
/// performs function operations.
pub struct OverSilrObjective<'a> {
    problem: &'a OverSilrProblem,
    z_a: &'a CoordinateRep,
    z_b: &'a CoordinateRep,
    m_bound: f64,
    gamma: f64,
    gram: DenseMatrix,
    atb: Vector,
    b_norm2: f64,
}

impl fmt::Debug for OverSilrObjective<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OverSilrObjective")
            .field("n", &self.gram.nrows())
            .field("m_bound", &self.m_bound)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

impl<'a> OverSilrObjective<'a> {
    /// `M` is spot-checked against `c |z_A(eta)|^2` on fixed draws.
    pub fn new(
        problem: &'a OverSilrProblem,
        z_a: &'a CoordinateRep,
        z_b: &'a CoordinateRep,
        m_bound: f64,
        gamma: f64,
    ) -> Result<Self> {
        if z_a.dim() != problem.a.ncols() || z_b.dim() != 1 {
            return Err(SilrError::Length {
                expected: problem.a.ncols(),
                got: z_a.dim(),
            });
        }
        if !(gamma >= 0.0) {
            return Err(SilrError::InvalidArgument("gamma must be non-negative".into()));
        }
        check_sup_bound(z_a, m_bound)?;
        // Reporting data; not charged.
        let mut scratch = FunopLedger::new();
        let gram = gram(&problem.a, &mut scratch);
        let atb = qm_adjoint_apply(&problem.a, &problem.b, &mut scratch);
        let b_norm2 = funspace::inner(&problem.b, &problem.b, &mut scratch);
        Ok(Self {
            problem,
            z_a,
            z_b,
            m_bound,
            gamma,
            gram,
            atb,
            b_norm2,
        })
    }

    pub fn b_norm2(&self) -> f64 {
        self.b_norm2
    }

    /// Algorithm parameters for target accuracy `eps` in objective value.
    pub fn config(&self, eps: f64, seed: u64) -> Result<SvrgConfig> {
        let (alpha, m) = step_and_length(self.m_bound, self.gamma, self.problem.lambda)?;
        Ok(SvrgConfig {
            alpha,
            m,
            s_max: over_epochs(self.b_norm2, eps),
            averaging: Averaging::Average,
            seed,
        })
    }
}

impl IntegrableObjective for OverSilrObjective<'_> {
    type Eta = Vec<f64>;

    fn dim(&self) -> usize {
        self.problem.a.ncols()
    }
    fn sample_eta(&self, rng: &mut SilrRng) -> Vec<f64> {
        self.z_a.sample(rng)
    }
    fn stoch_grad(&self, eta: &Vec<f64>, x: &Vector) -> Vector {
        let z = self.z_a.eval(eta);
        let zb = self.z_b.eval(eta)[0];
        let c = self.z_a.mass();
        let r = z.dot(x) - zb;
        z * (c * r) + self.problem.lambda * x
    }
    fn stoch_objective(&self, eta: &Vec<f64>, x: &Vector) -> f64 {
        let z = self.z_a.eval(eta);
        let zb = self.z_b.eval(eta)[0];
        let r = z.dot(x) - zb;
        0.5 * self.z_a.mass() * r * r + 0.5 * self.problem.lambda * x.norm_squared()
    }
    fn full_grad(&self, x: &Vector, ledger: &mut FunopLedger) -> Result<Vector> {
        let ax = qm_apply(&self.problem.a, x, ledger)?;
        let r = funspace::axpy(-1.0, &self.problem.b, &ax, ledger);
        Ok(qm_adjoint_apply(&self.problem.a, &r, ledger) + self.problem.lambda * x)
    }
    fn objective(&self, x: &Vector) -> f64 {
        let kx = &self.gram * x;
        0.5 * x.dot(&kx) + 0.5 * self.problem.lambda * x.norm_squared() - x.dot(&self.atb)
            + 0.5 * self.b_norm2
    }
    fn sup_bound(&self) -> f64 {
        self.m_bound
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn lambda(&self) -> f64 {
        self.problem.lambda
    }
}

/// Runs SVRG on the overdetermined problem from `x = 0` with step
/// `1/(5(M+lambda))`, inner length `50(M+lambda)/(gamma^2+lambda)` and
/// `log(|b|^2/(2 eps))/log(6/5)` epochs.
#[allow(clippy::too_many_arguments)]
pub fn svrg_over_silr(
    problem: &OverSilrProblem,
    z_a: &CoordinateRep,
    z_b: &CoordinateRep,
    m_bound: f64,
    gamma: f64,
    eps: f64,
    seed: u64,
    ledger: &mut FunopLedger,
) -> Result<SvrgReport> {
    let obj = OverSilrObjective::new(problem, z_a, z_b, m_bound, gamma)?;
    let cfg = obj.config(eps, seed)?;
    svrg_integrable(&obj, &cfg, &DVector::zeros(obj.dim()), ledger)
}

/// Underdetermined SILR in the dual variable,
/// `f(y) = y^T (K + lambda I) y / 2 - y^T b` with `K = A A*`.
/// `z_rows(eta)` holds the row functions at `eta`.
pub struct UnderSilrObjective<'a> {
    problem: &'a UnderSilrProblem,
    z_rows: &'a CoordinateRep,
    m_bound: f64,
    gamma: f64,
    gram: DenseMatrix,
}

impl fmt::Debug for UnderSilrObjective<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnderSilrObjective")
            .field("n", &self.gram.nrows())
            .field("m_bound", &self.m_bound)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

impl<'a> UnderSilrObjective<'a> {
    pub fn new(problem: &'a UnderSilrProblem, z_rows: &'a CoordinateRep, m_bound: f64, gamma: f64) -> Result<Self> {
        if z_rows.dim() != problem.rows.nrows() {
            return Err(SilrError::Length {
                expected: problem.rows.nrows(),
                got: z_rows.dim(),
            });
        }
        if !(gamma >= 0.0) {
            return Err(SilrError::InvalidArgument("gamma must be non-negative".into()));
        }
        check_sup_bound(z_rows, m_bound)?;
        let mut scratch = FunopLedger::new();
        let gram = gram(problem.rows.adjoint(), &mut scratch);
        Ok(Self {
            problem,
            z_rows,
            m_bound,
            gamma,
            gram,
        })
    }

    pub fn config(&self, eps: f64, seed: u64) -> Result<SvrgConfig> {
        let lambda = self.problem.lambda;
        let (alpha, m) = step_and_length(self.m_bound, self.gamma, lambda)?;
        Ok(SvrgConfig {
            alpha,
            m,
            s_max: under_epochs(self.problem.b.norm_squared(), eps, self.gamma, lambda),
            averaging: Averaging::Average,
            seed,
        })
    }
}

impl IntegrableObjective for UnderSilrObjective<'_> {
    type Eta = Vec<f64>;

    fn dim(&self) -> usize {
        self.problem.rows.nrows()
    }
    fn sample_eta(&self, rng: &mut SilrRng) -> Vec<f64> {
        self.z_rows.sample(rng)
    }
    fn stoch_grad(&self, eta: &Vec<f64>, y: &Vector) -> Vector {
        let z = self.z_rows.eval(eta);
        let t = self.z_rows.mass() * z.dot(y);
        z * t + self.problem.lambda * y - &self.problem.b
    }
    fn stoch_objective(&self, eta: &Vec<f64>, y: &Vector) -> f64 {
        let t = self.z_rows.eval(eta).dot(y);
        0.5 * self.z_rows.mass() * t * t + 0.5 * self.problem.lambda * y.norm_squared() - y.dot(&self.problem.b)
    }
    fn full_grad(&self, y: &Vector, ledger: &mut FunopLedger) -> Result<Vector> {
        let tall = self.problem.rows.adjoint();
        let x = qm_apply(tall, y, ledger)?;
        Ok(qm_adjoint_apply(tall, &x, ledger) + self.problem.lambda * y - &self.problem.b)
    }
    fn objective(&self, y: &Vector) -> f64 {
        0.5 * y.dot(&(&self.gram * y)) + 0.5 * self.problem.lambda * y.norm_squared() - y.dot(&self.problem.b)
    }
    fn sup_bound(&self) -> f64 {
        self.m_bound
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn lambda(&self) -> f64 {
        self.problem.lambda
    }
}

/// Result of [`svrg_under_silr`]: dual iterate `y` and `x = A* y`.
#[derive(Clone, Debug)]
pub struct UnderSvrgSolution {
    pub y: Vector,
    pub x: ChebFun,
    pub report: SvrgReport,
}

/// Runs SVRG on the dual of the underdetermined problem from `y = 0`.
pub fn svrg_under_silr(
    problem: &UnderSilrProblem,
    z_rows: &CoordinateRep,
    m_bound: f64,
    gamma: f64,
    eps: f64,
    seed: u64,
    ledger: &mut FunopLedger,
) -> Result<UnderSvrgSolution> {
    if !(problem.lambda > 0.0) {
        return Err(SilrError::InvalidArgument("the dual SVRG route needs lambda > 0".into()));
    }
    let obj = UnderSilrObjective::new(problem, z_rows, m_bound, gamma)?;
    let cfg = obj.config(eps, seed)?;
    let report = svrg_integrable(&obj, &cfg, &DVector::zeros(obj.dim()), ledger)?;
    let x = qm_apply(problem.rows.adjoint(), &report.x, ledger)?;
    Ok(UnderSvrgSolution {
        y: report.x.clone(),
        x,
        report,
    })
}

/// Gaussian-kernel ridge regression in the dual,
/// `f(a) = a^T (K + lambda I) a / 2 - a^T y`, with per-sample gradients from
/// one real random feature `z(omega, b)_i = sqrt(2) cos(x_i . omega + b)`.
/// The full gradient uses the exact kernel matrix.
#[derive(Clone, Debug)]
pub struct KrrObjective {
    points: DenseMatrix,
    y: Vector,
    kernel: GaussianKernel,
    lambda: f64,
    kmat: DenseMatrix,
}

impl KrrObjective {
    pub fn new(points: &DenseMatrix, y: &Vector, bandwidth: f64, lambda: f64) -> Result<Self> {
        if points.nrows() != y.len() || y.is_empty() {
            return Err(SilrError::Length {
                expected: points.nrows(),
                got: y.len(),
            });
        }
        if !(bandwidth > 0.0) || !(lambda > 0.0) {
            return Err(SilrError::InvalidArgument("need positive bandwidth and lambda".into()));
        }
        let kernel = GaussianKernel { bandwidth };
        let kmat = kernel_matrix(&kernel, points, points);
        Ok(Self {
            points: points.clone(),
            y: y.clone(),
            kernel,
            lambda,
            kmat,
        })
    }

    pub fn kernel_matrix(&self) -> &DenseMatrix {
        &self.kmat
    }

    fn features(&self, eta: &(Vec<f64>, f64)) -> Vector {
        let (omega, b) = eta;
        DVector::from_fn(self.points.nrows(), |i, _| {
            let dot: f64 = omega.iter().enumerate().map(|(k, w)| self.points[(i, k)] * w).sum();
            std::f64::consts::SQRT_2 * (dot + b).cos()
        })
    }

    /// `alpha = 1/(5(M+lambda))`, `m = 50(M+lambda)/lambda` and the dual
    /// epoch count with `gamma = 0`, for `M = 2n`.
    pub fn default_config(&self, eps: f64, seed: u64) -> Result<SvrgConfig> {
        let (alpha, m) = step_and_length(self.sup_bound(), 0.0, self.lambda)?;
        Ok(SvrgConfig {
            alpha,
            m,
            s_max: under_epochs(self.y.norm_squared(), eps, 0.0, self.lambda),
            averaging: Averaging::Average,
            seed,
        })
    }
}

impl IntegrableObjective for KrrObjective {
    type Eta = (Vec<f64>, f64);

    fn dim(&self) -> usize {
        self.points.nrows()
    }
    fn sample_eta(&self, rng: &mut SilrRng) -> (Vec<f64>, f64) {
        let h = self.kernel.bandwidth;
        let omega = (0..self.points.ncols())
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                g / h
            })
            .collect();
        (omega, rng.random_range(0.0..2.0 * std::f64::consts::PI))
    }
    fn stoch_grad(&self, eta: &(Vec<f64>, f64), a: &Vector) -> Vector {
        let z = self.features(eta);
        let t = z.dot(a);
        z * t + self.lambda * a - &self.y
    }
    fn stoch_objective(&self, eta: &(Vec<f64>, f64), a: &Vector) -> f64 {
        let t = self.features(eta).dot(a);
        0.5 * t * t + 0.5 * self.lambda * a.norm_squared() - a.dot(&self.y)
    }
    fn full_grad(&self, a: &Vector, _ledger: &mut FunopLedger) -> Result<Vector> {
        Ok(&self.kmat * a + self.lambda * a - &self.y)
    }
    fn objective(&self, a: &Vector) -> f64 {
        0.5 * a.dot(&(&self.kmat * a)) + 0.5 * self.lambda * a.norm_squared() - a.dot(&self.y)
    }
    /// `sup_eta |z(eta)|^2 = 2n`.
    fn sup_bound(&self) -> f64 {
        2.0 * self.points.nrows() as f64
    }
    fn gamma(&self) -> f64 {
        0.0
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn inner_flops(&self) -> u64 {
        let (n, d) = self.points.shape();
        (2 * n * (2 * d + 6)) as u64
    }
    fn full_grad_flops(&self) -> u64 {
        let n = self.points.nrows() as u64;
        2 * n * n + 3 * n
    }
}

/// Output of [`svrg_krr`], predicting `f(x) = sum_i a_i k(x_i, x)`.
#[derive(Clone, Debug)]
pub struct KrrSvrgFit {
    pub coeffs: Vector,
    pub points: DenseMatrix,
    pub kernel: GaussianKernel,
    pub report: SvrgReport,
}

impl KrrSvrgFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.points
            .row_iter()
            .zip(self.coeffs.iter())
            .map(|(p, a)| {
                let p: Vec<f64> = p.iter().copied().collect();
                a * self.kernel.eval(&p, x)
            })
            .sum()
    }
}

/// Overrides for the parameters [`KrrObjective::default_config`] would pick.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KrrOverrides {
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub s_max: Option<usize>,
    pub averaging: Option<Averaging>,
}

/// SVRG for Gaussian-kernel ridge regression from `a = 0`.
pub fn svrg_krr(
    points: &DenseMatrix,
    y: &Vector,
    bandwidth: f64,
    lambda: f64,
    eps: f64,
    overrides: KrrOverrides,
    seed: u64,
) -> Result<KrrSvrgFit> {
    let obj = KrrObjective::new(points, y, bandwidth, lambda)?;
    let mut cfg = obj.default_config(eps, seed)?;
    if let Some(a) = overrides.alpha {
        cfg.alpha = a;
    }
    if let Some(m) = overrides.m {
        cfg.m = m;
    }
    if let Some(s) = overrides.s_max {
        cfg.s_max = s;
    }
    if let Some(av) = overrides.averaging {
        cfg.averaging = av;
    }
    let mut ledger = FunopLedger::new();
    let report = svrg_integrable(&obj, &cfg, &DVector::zeros(obj.dim()), &mut ledger)?;
    Ok(KrrSvrgFit {
        coeffs: report.x.clone(),
        points: points.clone(),
        kernel: obj.kernel,
        report,
    })
}
