//! Reductions of SILR to finite ridge regression by choosing nodes and
//! weights: natural sampling, leverage-score sampling, and Gauss-Legendre
//! quadrature. Also random Fourier features and Gaussian sketching.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::densela::{
    dense_qr, spd_solve, sym_eigenvalues, symtrid_eig, tri_solve, DenseMatrix,
};
use crate::direct::{kernel_matrix, GaussianKernel};
use crate::quasimatrix::{CoordinateRep, Domain};
use crate::rng::SilrRng;
use crate::{Result, SilrError, Vector};

/// Default number of grid points for leverage tables.
pub const LEVERAGE_GRID: usize = 10_001;
/// Points on the Bernstein ellipse used by the sup-bound helpers.
pub const ELLIPSE_POINTS: usize = 2048;

/// Finite ridge problem `min |A_eta x - b_eta|^2 + lambda |x|^2` built from
/// weighted rows `w_j z_A(eta_j)`, `w_j z_b(eta_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledProblem {
    pub a_eta: DenseMatrix,
    pub b_eta: Vector,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl SampledProblem {
    fn from_nodes(
        z_a: &CoordinateRep,
        z_b: &CoordinateRep,
        nodes: Vec<Vec<f64>>,
        weights: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if z_b.dim() != 1 {
            return Err(SilrError::InvalidArgument(
                "right-hand side representation must be scalar".into(),
            ));
        }
        let s = nodes.len();
        let n = z_a.dim();
        let mut a_eta = DenseMatrix::zeros(s, n);
        let mut b_eta = DVector::zeros(s);
        let mut za = vec![0.0; n];
        let mut zb = [0.0];
        for (j, (eta, &w)) in nodes.iter().zip(&weights).enumerate() {
            z_a.eval_into(eta, &mut za);
            z_b.eval_into(eta, &mut zb);
            for (i, v) in za.iter().enumerate() {
                a_eta[(j, i)] = w * v;
            }
            b_eta[j] = w * zb[0];
        }
        Ok(Self {
            a_eta,
            b_eta,
            nodes,
            weights,
            lambda,
        })
    }

    /// `[A_eta b_eta]^T [A_eta b_eta]`.
    pub fn augmented_gram(&self) -> DenseMatrix {
        let mut ab = DenseMatrix::zeros(self.a_eta.nrows(), self.a_eta.ncols() + 1);
        ab.view_mut((0, 0), self.a_eta.shape()).copy_from(&self.a_eta);
        ab.set_column(self.a_eta.ncols(), &self.b_eta);
        ab.transpose() * ab
    }

    /// CSV with header `node,weight,b,a_0,...,a_{n-1}` (first node coordinate only).
    pub fn to_csv(&self) -> String {
        let n = self.a_eta.ncols();
        let mut s = String::from("node,weight,b");
        for i in 0..n {
            s.push_str(&format!(",a_{i}"));
        }
        s.push('\n');
        for j in 0..self.nodes.len() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}",
                self.nodes[j][0], self.weights[j], self.b_eta[j]
            ));
            for i in 0..n {
                s.push_str(&format!(",{:.16e}", self.a_eta[(j, i)]));
            }
            s.push('\n');
        }
        s
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Golub-Welsch.
pub fn gauss_legendre(s: usize) -> (Vec<f64>, Vec<f64>) {
    if s == 0 {
        return (vec![], vec![]);
    }
    let diag = vec![0.0; s];
    let off: Vec<f64> = (1..s)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (x, v0) = symtrid_eig(&diag, &off);
    let mut nodes = vec![0.0; s];
    let mut weights = vec![0.0; s];
    // Symmetrize: the rule is exactly symmetric about 0.
    for i in 0..s {
        let j = s - 1 - i;
        nodes[i] = 0.5 * (x[i] - x[j]);
        weights[i] = v0[i] * v0[i] + v0[j] * v0[j];
    }
    if s % 2 == 1 {
        nodes[s / 2] = 0.0;
    }
    (nodes, weights)
}

/// `Tr((K + lambda I)^-1 K)`.
pub fn statistical_dimension(khat: &DenseMatrix, lambda: f64) -> Result<f64> {
    let ev = sym_eigenvalues(khat);
    let mut s = 0.0;
    for mu in ev {
        let d = mu + lambda;
        if !(d > 0.0) {
            return Err(SilrError::Singular("K + lambda I is not positive definite".into()));
        }
        s += mu / d;
    }
    Ok(s)
}

/// Evaluator of `tau(eta) = c p(eta) z(eta)^T (K + lambda I)^-1 z(eta)`.
#[derive(Clone, Debug)]
pub struct LeverageFn {
    rep: CoordinateRep,
    chol_l: DenseMatrix,
}

impl LeverageFn {
    pub fn new(rep: &CoordinateRep, khat: &DenseMatrix, lambda: f64) -> Result<Self> {
        if khat.nrows() != rep.dim() || khat.ncols() != rep.dim() {
            return Err(SilrError::Length {
                expected: rep.dim(),
                got: khat.nrows(),
            });
        }
        let mut s = khat.clone();
        for i in 0..s.nrows() {
            s[(i, i)] += lambda;
        }
        let chol = s
            .cholesky()
            .ok_or_else(|| SilrError::Singular("K + lambda I is not positive definite".into()))?;
        Ok(Self {
            rep: rep.clone(),
            chol_l: chol.l(),
        })
    }

    /// `z^T (K + lambda I)^-1 z`, i.e. `tau / (c p)`.
    pub fn ridge_score(&self, eta: &[f64]) -> f64 {
        let z = self.rep.eval(eta);
        let w = self
            .chol_l
            .solve_lower_triangular(&z)
            .expect("Cholesky factor is non-singular");
        w.norm_squared()
    }

    pub fn tau(&self, eta: &[f64]) -> f64 {
        self.rep.mass() * self.rep.density(eta) * self.ridge_score(eta)
    }
}

/// Single evaluation of the leverage function of the stacked representation
/// `z = (z_A; z_b)` with Gram `khat`.
pub fn leverage_fn(rep_ab: &CoordinateRep, khat: &DenseMatrix, lambda: f64, eta: &[f64]) -> Result<f64> {
    Ok(LeverageFn::new(rep_ab, khat, lambda)?.tau(eta))
}

/// `sup_eta tau(eta) / (c p(eta))` over `grid`. A lower bound for the true sup.
pub fn coherence(rep_ab: &CoordinateRep, khat: &DenseMatrix, lambda: f64, grid: &[f64]) -> Result<f64> {
    let lev = LeverageFn::new(rep_ab, khat, lambda)?;
    Ok(grid
        .iter()
        .map(|&x| lev.ridge_score(&[x]))
        .fold(0.0, f64::max))
}

/// Sample-count bound `(8/3) s_tau eps^-2 ln(16 s_lambda / delta)`.
pub fn leverage_sample_count(s_tau: f64, s_lambda: f64, eps: f64, delta: f64) -> f64 {
    8.0 / 3.0 * s_tau / (eps * eps) * (16.0 * s_lambda / delta).ln()
}

/// Tabulated leverage function and its CDF on a uniform grid over an interval.
#[derive(Clone, Debug)]
pub struct LeverageTable {
    pub grid: Vec<f64>,
    pub tau: Vec<f64>,
    pub cdf: Vec<f64>,
    /// `Tr((K + lambda I)^-1 K)`.
    pub s_lambda: f64,
    /// Trapezoid integral of `tau` over the grid.
    pub s_lambda_grid: f64,
    /// Grid sup of `tau / (c p)`.
    pub coherence: f64,
    pub lambda: f64,
    /// Whether `|K| >= lambda` holds.
    pub premise_ok: bool,
    lev: LeverageFn,
}

impl LeverageTable {
    pub fn build(rep_ab: &CoordinateRep, khat: &DenseMatrix, lambda: f64, points: usize) -> Result<Self> {
        let (a, b) = match rep_ab.domain() {
            Domain::Interval(a, b) => (*a, *b),
            _ => {
                return Err(SilrError::Unsupported(
                    "leverage tables need an interval domain".into(),
                ))
            }
        };
        if points < 2 {
            return Err(SilrError::InvalidArgument("need at least two grid points".into()));
        }
        let lev = LeverageFn::new(rep_ab, khat, lambda)?;
        let s_lambda = statistical_dimension(khat, lambda)?;
        let top = sym_eigenvalues(khat).last().copied().unwrap_or(0.0);
        let premise_ok = top >= lambda;
        if !premise_ok {
            log::warn!("|[A b]*[A b]| = {top:e} is below lambda = {lambda:e}; sample bounds may not apply");
        }
        let h = (b - a) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| a + h * i as f64).collect();
        let mut coherence = 0.0f64;
        let mut tau = Vec::with_capacity(points);
        for &x in &grid {
            let r = lev.ridge_score(&[x]);
            coherence = coherence.max(r);
            tau.push(rep_ab.mass() * rep_ab.density(&[x]) * r);
        }
        let mut cdf = vec![0.0; points];
        for i in 1..points {
            cdf[i] = cdf[i - 1] + 0.5 * h * (tau[i - 1] + tau[i]);
        }
        let total = cdf[points - 1];
        if !(total > 0.0) || !(s_lambda > 0.0) {
            return Err(SilrError::InvalidArgument("degenerate leverage table".into()));
        }
        for c in cdf.iter_mut() {
            *c /= total;
        }
        cdf[points - 1] = 1.0;
        Ok(Self {
            grid,
            tau,
            cdf,
            s_lambda,
            s_lambda_grid: total,
            coherence,
            lambda,
            premise_ok,
            lev,
        })
    }

    pub fn tau_at(&self, eta: f64) -> f64 {
        self.lev.tau(&[eta])
    }

    fn cell(&self, eta: f64) -> usize {
        let h = self.grid[1] - self.grid[0];
        let i = ((eta - self.grid[0]) / h).floor() as isize + 1;
        i.clamp(1, self.grid.len() as isize - 1) as usize
    }

    /// Density of the tabulated sampler at `eta` (constant on each grid cell).
    pub fn sampling_density(&self, eta: f64) -> f64 {
        let i = self.cell(eta);
        (self.cdf[i] - self.cdf[i - 1]) / (self.grid[i] - self.grid[i - 1])
    }

    /// CDF of the tabulated sampler at `eta`.
    pub fn cdf_at(&self, eta: f64) -> f64 {
        if eta <= self.grid[0] {
            return 0.0;
        }
        if eta >= self.grid[self.grid.len() - 1] {
            return 1.0;
        }
        let i = self.cell(eta);
        let t = (eta - self.grid[i - 1]) / (self.grid[i] - self.grid[i - 1]);
        self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1])
    }

    /// Inverse-transform draw: binary search on the CDF, linear within a cell.
    pub fn sample(&self, rng: &mut SilrRng) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u).max(1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.grid[i - 1] + t * (self.grid[i] - self.grid[i - 1])
    }

    /// CSV with header `eta,tau,cdf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eta,tau,cdf\n");
        for i in 0..self.grid.len() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.grid[i], self.tau[i], self.cdf[i]
            ));
        }
        s
    }
}

fn check_pair(z_a: &CoordinateRep, z_b: &CoordinateRep, s: usize) -> Result<()> {
    if s == 0 {
        return Err(SilrError::InvalidArgument("need at least one sample".into()));
    }
    if z_a.domain() != z_b.domain() || z_a.mass() != z_b.mass() {
        return Err(SilrError::InvalidArgument(
            "z_A and z_b must share domain and measure".into(),
        ));
    }
    Ok(())
}

/// `eta_j ~ p` i.i.d. with `w_j = sqrt(c / s)`.
pub fn sample_natural(
    z_a: &CoordinateRep,
    z_b: &CoordinateRep,
    lambda: f64,
    s: usize,
    rng: &mut SilrRng,
) -> Result<SampledProblem> {
    check_pair(z_a, z_b, s)?;
    let nodes: Vec<Vec<f64>> = (0..s).map(|_| z_a.sample(rng)).collect();
    let w = (z_a.mass() / s as f64).sqrt();
    SampledProblem::from_nodes(z_a, z_b, nodes, vec![w; s], lambda)
}

/// `eta_j` drawn from the tabulated leverage density `q`, with
/// `w_j = sqrt(c p(eta_j) / (s q(eta_j)))`.
pub fn sample_leverage(
    z_a: &CoordinateRep,
    z_b: &CoordinateRep,
    table: &LeverageTable,
    s: usize,
    rng: &mut SilrRng,
) -> Result<SampledProblem> {
    check_pair(z_a, z_b, s)?;
    if !(table.s_lambda > 0.0) {
        return Err(SilrError::InvalidArgument("degenerate leverage table".into()));
    }
    let mut nodes = Vec::with_capacity(s);
    let mut weights = Vec::with_capacity(s);
    for _ in 0..s {
        let eta = table.sample(rng);
        let q = table.sampling_density(eta);
        let w = (z_a.mass() * z_a.density(&[eta]) / (s as f64 * q)).sqrt();
        nodes.push(vec![eta]);
        weights.push(w);
    }
    SampledProblem::from_nodes(z_a, z_b, nodes, weights, table.lambda)
}

/// Gauss-Legendre nodes with `w_j^2` the quadrature weights of the working
/// measure (for Lebesgue on `[-1, 1]`, exactly the Gauss-Legendre weights).
pub fn sample_quadrature(
    z_a: &CoordinateRep,
    z_b: &CoordinateRep,
    lambda: f64,
    s: usize,
) -> Result<SampledProblem> {
    check_pair(z_a, z_b, s)?;
    let (a, b) = match z_a.domain() {
        Domain::Interval(a, b) => (*a, *b),
        _ => {
            return Err(SilrError::Unsupported(
                "quadrature sampling needs an interval domain".into(),
            ))
        }
    };
    let (t, gw) = gauss_legendre(s);
    let h = 0.5 * (b - a);
    let mut nodes = Vec::with_capacity(s);
    let mut weights = Vec::with_capacity(s);
    for (&t, &gw) in t.iter().zip(&gw) {
        let eta = [a + h * (t + 1.0)];
        let w2 = h * gw * z_a.mass() * z_a.density(&eta);
        nodes.push(eta.to_vec());
        weights.push(w2.sqrt());
    }
    SampledProblem::from_nodes(z_a, z_b, nodes, weights, lambda)
}

/// Ridge solution of a sampled problem via QR of `[A_eta; sqrt(lambda) I]`.
pub fn solve_sampled(p: &SampledProblem) -> Result<Vector> {
    let (s, n) = p.a_eta.shape();
    if p.lambda == 0.0 {
        if s < n {
            return Err(SilrError::RankDeficient(s));
        }
        let (q, r) = dense_qr(&p.a_eta)?;
        return tri_solve(&r, &(q.transpose() * &p.b_eta));
    }
    let mut c = DenseMatrix::zeros(s + n, n);
    c.view_mut((0, 0), (s, n)).copy_from(&p.a_eta);
    let sl = p.lambda.sqrt();
    for i in 0..n {
        c[(s + i, i)] = sl;
    }
    let mut rhs = DVector::zeros(s + n);
    rhs.rows_mut(0, s).copy_from(&p.b_eta);
    let (q, r) = dense_qr(&c)?;
    tri_solve(&r, &(q.transpose() * rhs))
}

/// Extreme generalized eigenvalues of `(K_eta + lambda I, K + lambda I)`,
/// with `K_eta` the Gram of the sampled `[A_eta b_eta]` and `khat` that of `[A b]`.
/// The sampled problem is an `eps`-distortion when both lie in `[1 - eps, 1 + eps]`.
pub fn distortion(p: &SampledProblem, khat: &DenseMatrix) -> Result<(f64, f64)> {
    let n1 = khat.nrows();
    let ke = p.augmented_gram();
    if ke.nrows() != n1 {
        return Err(SilrError::Length {
            expected: n1,
            got: ke.nrows(),
        });
    }
    let mut s = khat.clone();
    let mut t = ke;
    for i in 0..n1 {
        s[(i, i)] += p.lambda;
        t[(i, i)] += p.lambda;
    }
    let l = s
        .cholesky()
        .ok_or_else(|| SilrError::Singular("K + lambda I is not positive definite".into()))?
        .l();
    let li_t = l
        .solve_lower_triangular(&t)
        .ok_or_else(|| SilrError::Singular("Cholesky factor".into()))?;
    let m = l
        .solve_lower_triangular(&li_t.transpose())
        .ok_or_else(|| SilrError::Singular("Cholesky factor".into()))?;
    let sym = 0.5 * (&m + m.transpose());
    let ev = sym_eigenvalues(&sym);
    Ok((ev[0], ev[ev.len() - 1]))
}

/// Node count for quadrature sampling:
/// `ceil([ln(8 (lambda^-1 (n M_A^2 + M_b^2) + 1)) - ln eps - ln sqrt 2] / (2 ln(1 + sqrt 2)) + 1)`.
pub fn quadrature_node_count(n: usize, m_a: f64, m_b: f64, lambda: f64, eps: f64) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(SilrError::Unsupported("node count needs lambda > 0".into()));
    }
    if !(eps > 0.0 && eps < 1.0) || m_a < 0.0 || m_b < 0.0 {
        return Err(SilrError::InvalidArgument("need eps in (0, 1) and non-negative bounds".into()));
    }
    Ok(quadrature_node_bound(n, m_a, m_b, lambda, eps).ceil() as usize)
}

/// The real-valued bound behind [`quadrature_node_count`].
pub fn quadrature_node_bound(n: usize, m_a: f64, m_b: f64, lambda: f64, eps: f64) -> f64 {
    let rho = 1.0 + std::f64::consts::SQRT_2;
    let top = (8.0 * ((n as f64 * m_a * m_a + m_b * m_b) / lambda + 1.0)).ln()
        - eps.ln()
        - std::f64::consts::SQRT_2.ln();
    top / (2.0 * rho.ln()) + 1.0
}

/// Points on the Bernstein ellipse with foci `+-1` through `i`
/// (`rho = 1 + sqrt 2`).
pub fn bernstein_ellipse(points: usize) -> Vec<Complex64> {
    let rho = 1.0 + std::f64::consts::SQRT_2;
    (0..points)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / points as f64;
            let e = Complex64::from_polar(1.0, th);
            0.5 * (rho * e + e.inv() / rho)
        })
        .collect()
}

/// `sup |f|` over a discretized Bernstein ellipse.
pub fn ellipse_sup<F: Fn(Complex64) -> Complex64>(f: F, points: usize) -> f64 {
    bernstein_ellipse(points)
        .into_iter()
        .map(|z| f(z).norm())
        .fold(0.0, f64::max)
}

/// `sup_z max_{k < n} |T_k(z)|` over a discretized Bernstein ellipse.
pub fn chebyshev_ellipse_bound(n: usize, points: usize) -> f64 {
    bernstein_ellipse(points)
        .into_iter()
        .map(|z| {
            let (mut t0, mut t1) = (Complex64::new(1.0, 0.0), z);
            let mut best = if n > 1 { t1.norm().max(1.0) } else { 1.0 };
            for _ in 2..n {
                let t2 = 2.0 * z * t1 - t0;
                t0 = t1;
                t1 = t2;
                best = best.max(t1.norm());
            }
            best
        })
        .fold(0.0, f64::max)
}

/// Random-feature approximation of Gaussian-kernel ridge regression.
#[derive(Clone, Debug)]
pub struct RffModel {
    /// `s x d` frequencies.
    pub omegas: DenseMatrix,
    pub phases: Vec<f64>,
    /// `n x s` feature matrix `B_eta = s^-1/2 [sqrt 2 cos(x_i . omega_j + b_j)]`.
    pub features: DenseMatrix,
    pub w: Vector,
}

impl RffModel {
    fn feature_row(&self, x: &[f64]) -> Vector {
        let s = self.phases.len();
        let scale = (2.0 / s as f64).sqrt();
        DVector::from_fn(s, |j, _| {
            let dot: f64 = x.iter().enumerate().map(|(k, v)| v * self.omegas[(j, k)]).sum();
            scale * (dot + self.phases[j]).cos()
        })
    }

    /// `f(x) = sum_j sqrt(2) cos(x . omega_j + b_j) w_j / sqrt(s)`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.feature_row(x).dot(&self.w)
    }
}

/// Samples `s` real Fourier features of the Gaussian kernel with bandwidth
/// `h` and solves the `s`-dimensional ridge problem
/// `min |B_eta w - y|^2 + lambda |w|^2`.
pub fn rff_sample(
    points: &DenseMatrix,
    bandwidth: f64,
    s: usize,
    rng: &mut SilrRng,
    lambda: f64,
    y: &Vector,
) -> Result<RffModel> {
    if s == 0 || !(lambda > 0.0) || !(bandwidth > 0.0) {
        return Err(SilrError::InvalidArgument(
            "rff_sample needs s >= 1, lambda > 0 and a positive bandwidth".into(),
        ));
    }
    let (n, d) = points.shape();
    if y.len() != n {
        return Err(SilrError::Length { expected: n, got: y.len() });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut omegas = DenseMatrix::zeros(s, d);
    let mut phases = Vec::with_capacity(s);
    for j in 0..s {
        for k in 0..d {
            let g: f64 = StandardNormal.sample(rng);
            omegas[(j, k)] = g / bandwidth;
        }
        phases.push(rng.random_range(0.0..two_pi));
    }
    let scale = (2.0 / s as f64).sqrt();
    let proj = points * omegas.transpose();
    let features = DenseMatrix::from_fn(n, s, |i, j| scale * (proj[(i, j)] + phases[j]).cos());
    let w = if s <= n {
        let mut g = features.transpose() * &features;
        for i in 0..s {
            g[(i, i)] += lambda;
        }
        spd_solve(&g, &(features.transpose() * y))?
    } else {
        // w = B^T (B B^T + lambda I)^-1 y, an n x n solve.
        let mut g = &features * features.transpose();
        for i in 0..n {
            g[(i, i)] += lambda;
        }
        features.transpose() * spd_solve(&g, y)?
    };
    Ok(RffModel {
        omegas,
        phases,
        features,
        w,
    })
}

/// Gaussian kernel matrix helper re-exported for the sampling demos.
pub fn gaussian_kernel_matrix(x: &DenseMatrix, y: &DenseMatrix, bandwidth: f64) -> DenseMatrix {
    kernel_matrix(&GaussianKernel { bandwidth }, x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SketchKind {
    /// i.i.d. `N(0, 1/s)` entries.
    Gaussian,
    /// `s x n` with orthonormal columns (`s >= n`), an exact embedding.
    Orthogonal,
}

/// Sketch `(S X, S y)` with an `s x n` random matrix `S`.
pub fn stretch_sample(
    x: &DenseMatrix,
    y: &Vector,
    s: usize,
    kind: SketchKind,
    rng: &mut SilrRng,
) -> Result<(DenseMatrix, Vector)> {
    let n = x.nrows();
    if s == 0 {
        return Err(SilrError::InvalidArgument("sketch size must be positive".into()));
    }
    if y.len() != n {
        return Err(SilrError::Length { expected: n, got: y.len() });
    }
    let mut g = DenseMatrix::zeros(s, n);
    for v in g.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    let sk = match kind {
        SketchKind::Gaussian => g / (s as f64).sqrt(),
        SketchKind::Orthogonal => {
            if s < n {
                return Err(SilrError::InvalidArgument(
                    "orthogonal sketch needs s >= n".into(),
                ));
            }
            dense_qr(&g)?.0
        }
    };
    Ok((&sk * x, &sk * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funspace::{adaptive_fit, FunopLedger};
    use crate::quasimatrix::{gram, TallQuasimatrix};
    use crate::{rng, runge};
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_examples() {
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.0]);
        assert_relative_eq!(w[0], 2.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(w[1], 1.0, epsilon = 1e-14);
        let (x, w) = gauss_legendre(10);
        for k in 0..20 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - want).abs() < 1e-12, "x^{k}");
        }
        for s in [5usize, 64, 256] {
            let (x, w) = gauss_legendre(s);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v > 0.0));
            assert!(x.iter().all(|&v| v > -1.0 && v < 1.0));
            for i in 0..s {
                assert_eq!(x[i], -x[s - 1 - i]);
            }
        }
    }

    fn runge_setup(n: usize) -> (CoordinateRep, CoordinateRep, CoordinateRep, DenseMatrix) {
        let a = TallQuasimatrix::chebyshev(n);
        let b = adaptive_fit(runge, 1e-14).unwrap();
        let ab = a.with_column(b.clone());
        let mut l = FunopLedger::new();
        let khat = gram(&ab, &mut l);
        let za = CoordinateRep::from_tall(&a);
        let zb = CoordinateRep::from_fun(&b);
        let zab = za.stack(&zb).unwrap();
        (za, zb, zab, khat)
    }

    #[test]
    fn leverage_examples() {
        // Orthonormal rep, lambda = 0: tau = c p |z|^2.
        let rep = CoordinateRep::legendre(4);
        let id = DenseMatrix::identity(4, 4);
        let t = leverage_fn(&rep, &id, 0.0, &[0.3]).unwrap();
        assert_relative_eq!(t, rep.eval(&[0.3]).norm_squared(), epsilon = 1e-14);
        let t = leverage_fn(&rep, &id, 1e12, &[0.3]).unwrap();
        assert!(t < 1e-10);
        // Bounded z with K = I: coherence <= n.
        let cheb_ortho = CoordinateRep::new(
            3,
            Domain::Interval(-1.0, 1.0),
            2.0,
            |eta, out| {
                let x = eta[0];
                out[0] = (0.5f64).sqrt();
                out[1] = (std::f64::consts::PI * x).cos();
                out[2] = (std::f64::consts::PI * x).sin();
            },
            |_| 0.5,
            |rng| vec![rng.random_range(-1.0..1.0)],
        )
        .unwrap();
        let g = crate::quasimatrix::coord_gram_oracle(&cheb_ortho, 64).unwrap();
        assert!((&g - DenseMatrix::identity(3, 3)).amax() < 1e-12);
        let grid: Vec<f64> = (0..201).map(|i| -1.0 + 0.01 * i as f64).collect();
        assert!(coherence(&cheb_ortho, &g, 0.0, &grid).unwrap() <= 3.0);
    }

    #[test]
    fn runge_statistical_dimension_and_coherence() {
        let (_, _, zab, khat) = runge_setup(40);
        let t = LeverageTable::build(&zab, &khat, 1e-4, LEVERAGE_GRID).unwrap();
        assert!((t.s_lambda - 39.99).abs() <= 0.2, "s_lambda {}", t.s_lambda);
        assert!((t.s_lambda_grid - t.s_lambda).abs() <= 0.2);
        assert!((t.coherence / 798.28 - 1.0).abs() <= 0.05, "M {}", t.coherence);
        assert!(t.coherence >= t.s_lambda);
        assert!(t.premise_ok);
        for w in t.cdf.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(t.cdf[0], 0.0);
        assert_eq!(*t.cdf.last().unwrap(), 1.0);
    }

    #[test]
    fn trapezoid_matches_trace_on_smooth_instance() {
        // A well-resolved case: the grid integral agrees with the trace to 1e-4.
        let a = TallQuasimatrix::chebyshev(6);
        let b = adaptive_fit(|x| (2.0 * x).exp(), 1e-14).unwrap();
        let mut l = FunopLedger::new();
        let khat = gram(&a.with_column(b.clone()), &mut l);
        let zab = CoordinateRep::from_tall(&a).stack(&CoordinateRep::from_fun(&b)).unwrap();
        let t = LeverageTable::build(&zab, &khat, 1e-2, LEVERAGE_GRID).unwrap();
        assert!((t.s_lambda_grid / t.s_lambda - 1.0).abs() < 1e-4);
        assert!(t.coherence >= t.s_lambda);
    }

    #[test]
    fn leverage_sampler_histogram() {
        let (_, _, zab, khat) = runge_setup(40);
        let t = LeverageTable::build(&zab, &khat, 1e-4, LEVERAGE_GRID).unwrap();
        let mut r = rng::stream(11, rng::ETA_STREAM);
        let draws = 10_000;
        let mut counts = [0usize; 20];
        for _ in 0..draws {
            let x = t.sample(&mut r);
            let b = (((x + 1.0) / 0.1).floor() as usize).min(19);
            counts[b] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let lo = -1.0 + 0.1 * b as f64;
            let p = t.cdf_at(lo + 0.1) - t.cdf_at(lo);
            let e = p * draws as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // 0.999 quantile of chi-square with 19 degrees of freedom.
        assert!(chi2 < 43.82, "chi2 {chi2}");
    }

    #[test]
    fn constant_leverage_reduces_to_natural() {
        // Orthonormal rep with constant |z|: tau is flat and the weights are sqrt(c/s).
        let rep = CoordinateRep::new(
            2,
            Domain::Interval(-1.0, 1.0),
            2.0,
            |eta, out| {
                out[0] = (0.5f64).sqrt();
                out[1] = (0.5f64).sqrt() * if eta[0] >= 0.0 { 1.0 } else { -1.0 };
            },
            |_| 0.5,
            |rng| vec![rng.random_range(-1.0..1.0)],
        )
        .unwrap();
        let zb = CoordinateRep::new(
            1,
            Domain::Interval(-1.0, 1.0),
            2.0,
            |_, out| out[0] = 0.0,
            |_| 0.5,
            |rng| vec![rng.random_range(-1.0..1.0)],
        )
        .unwrap();
        let zab = rep.stack(&zb).unwrap();
        let mut khat = DenseMatrix::identity(3, 3);
        khat[(2, 2)] = 0.0;
        let t = LeverageTable::build(&zab, &khat, 0.0 + 1e-300, 2001).unwrap();
        let mut r = rng::stream(1, rng::ETA_STREAM);
        let p = sample_leverage(&rep, &zb, &t, 50, &mut r).unwrap();
        let want = (2.0f64 / 50.0).sqrt();
        for &w in &p.weights {
            assert_relative_eq!(w, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn natural_sampling_shapes() {
        let (za, zb, _, _) = runge_setup(5);
        let mut r = rng::stream(3, rng::ETA_STREAM);
        let p = sample_natural(&za, &zb, 0.0, 1, &mut r).unwrap();
        assert_eq!(p.a_eta.shape(), (1, 5));
        assert_relative_eq!(p.weights[0], 2f64.sqrt());
        assert!(sample_natural(&za, &zb, 0.0, 0, &mut r).is_err());
    }

    #[test]
    fn quadrature_exactness_and_determinism() {
        let (za, zb, _, _) = runge_setup(10);
        let p = sample_quadrature(&za, &zb, 0.0, 10).unwrap();
        let mut l = FunopLedger::new();
        let g = gram(&TallQuasimatrix::chebyshev(10), &mut l);
        assert!((p.a_eta.transpose() * &p.a_eta - g).amax() < 1e-12);
        let q = sample_quadrature(&za, &zb, 0.0, 10).unwrap();
        assert_eq!(p, q);
        let t0 = CoordinateRep::chebyshev(1);
        let p = sample_quadrature(&t0, &zb, 0.0, 1).unwrap();
        assert_relative_eq!(p.a_eta[(0, 0)], 2f64.sqrt(), epsilon = 1e-15);
        let pts = DenseMatrix::from_element(1, 1, 0.0);
        let rff = CoordinateRep::rff(&pts, 1.0).unwrap();
        assert!(sample_quadrature(&rff, &rff, 0.0, 3).is_err());
    }

    #[test]
    fn solve_sampled_examples() {
        let a = DenseMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let p = SampledProblem {
            a_eta: a.clone(),
            b_eta: b.clone(),
            nodes: vec![vec![0.0], vec![0.0]],
            weights: vec![1.0, 1.0],
            lambda: 0.0,
        };
        let x = solve_sampled(&p).unwrap();
        assert!((&a * &x - &b).norm() < 1e-14);
        let big = SampledProblem { lambda: 1e12, ..p.clone() };
        assert!(solve_sampled(&big).unwrap().norm() < 1e-10);
        let ridge = SampledProblem { lambda: 0.3, ..p };
        let x = solve_sampled(&ridge).unwrap();
        let grad = a.transpose() * (&a * &x - &b) + 0.3 * &x;
        assert!(grad.norm() <= 1e-10);
    }

    #[test]
    fn node_count_formula() {
        // Only the ln 8 term survives: (ln 8 - ln sqrt 2) / (2 ln(1 + sqrt 2)) + 1.
        let floor = quadrature_node_bound(10, 1e-12, 1e-12, 1.0, 1.0 - 1e-12);
        assert_relative_eq!(floor, 1.0 + (8f64.ln() - 2f64.sqrt().ln()) / (2.0 * (1.0 + 2f64.sqrt()).ln()), epsilon = 1e-9);
        assert_eq!(quadrature_node_count(10, 1e-12, 1e-12, 1.0, 1.0 - 1e-12).unwrap(), 2);
        let base = quadrature_node_bound(40, 3.0, 1.0, 1e-4, 0.01);
        let half = quadrature_node_bound(40, 3.0, 1.0, 1e-4, 0.005);
        let step = 2f64.ln() / (2.0 * (1.0 + 2f64.sqrt()).ln());
        assert_relative_eq!(half - base, step, epsilon = 1e-12);
        assert!(step.ceil() <= 1.0);
        assert!(quadrature_node_count(4, 1.0, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn ellipse_bound_matches_closed_form() {
        // max_k |T_k| on the ellipse is attained on the real axis: (rho^k + rho^-k) / 2.
        let rho = 1.0 + 2f64.sqrt();
        let want = 0.5 * (rho.powi(39) + rho.powi(-39));
        let got = chebyshev_ellipse_bound(40, ELLIPSE_POINTS);
        assert!((got / want - 1.0).abs() < 1e-12);
        let mb = ellipse_sup(|z| 1.0 / (1.0 + 25.0 * z * z), ELLIPSE_POINTS);
        assert_relative_eq!(mb, 1.0 / 24.0, epsilon = 1e-12);
    }

    #[test]
    fn sample_count_helper_is_monotone() {
        let mut prev = f64::INFINITY;
        for eps in [0.05, 0.1, 0.2, 0.5] {
            let v = leverage_sample_count(40.0, 40.0, eps, 0.1);
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for delta in [0.01, 0.05, 0.1, 0.5] {
            let v = leverage_sample_count(40.0, 40.0, 0.1, delta);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn rff_examples() {
        let x = DenseMatrix::from_fn(6, 1, |i, _| -1.0 + 0.4 * i as f64);
        let mut r = rng::stream(1, rng::FEATURE_STREAM);
        let m = rff_sample(&x, 0.5, 30, &mut r, 0.1, &DVector::zeros(6)).unwrap();
        assert!(m.w.iter().all(|&v| v == 0.0));
        let m = rff_sample(&x, 0.5, 4, &mut r, 0.1, &DVector::from_element(6, 1.0)).unwrap();
        assert_eq!(m.w.len(), 4);
        assert_relative_eq!(m.predict(&[x[(2, 0)]]), (&m.features * &m.w)[2], epsilon = 1e-12);
    }

    #[test]
    fn sketch_kinds() {
        let mut r = rng::stream(2, rng::FEATURE_STREAM);
        let x = DenseMatrix::from_fn(20, 3, |i, j| ((i * 3 + j) as f64).sin());
        let y = DVector::from_fn(20, |i, _| (i as f64).cos());
        let (sx, sy) = stretch_sample(&x, &y, 25, SketchKind::Orthogonal, &mut r).unwrap();
        assert!((sx.transpose() * &sx - x.transpose() * &x).amax() < 1e-12);
        assert_relative_eq!(sy.norm(), y.norm(), epsilon = 1e-12);
        assert!(stretch_sample(&x, &y, 10, SketchKind::Orthogonal, &mut r).is_err());
        let (sx, _) = stretch_sample(&x, &y, 7, SketchKind::Gaussian, &mut r).unwrap();
        assert_eq!(sx.shape(), (7, 3));
    }
}
