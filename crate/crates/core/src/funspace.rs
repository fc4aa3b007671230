//! Functions on `[-1, 1]` as Chebyshev series, and the four unit-cost
//! function operations (scale, add, eval, inner) with explicit accounting.

use std::sync::Arc;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::{Result, SilrError};

/// Default relative tail cutoff for [`adaptive_fit`].
pub const DEFAULT_REL_TOL: f64 = 1e-14;
/// Default degree cap for [`adaptive_fit`].
pub const DEFAULT_DEGREE_CAP: usize = 1 << 16;

const START_DEGREE: usize = 16;
const DOMAIN_SLACK: f64 = 1e-12;

/// Chebyshev-T series `sum_k c_k T_k(x)` on `[-1, 1]`.
///
/// Immutable once built; cloning copies the coefficient vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebFun {
    coeffs: Vec<f64>,
}

/// Running tally of function operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FunopLedger {
    pub scale: u64,
    pub add: u64,
    pub eval: u64,
    pub inner: u64,
}

impl FunopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.scale + self.add + self.eval + self.inner
    }

    /// Counts accumulated since `earlier` was snapshotted.
    pub fn since(&self, earlier: &FunopLedger) -> FunopLedger {
        FunopLedger {
            scale: self.scale - earlier.scale,
            add: self.add - earlier.add,
            eval: self.eval - earlier.eval,
            inner: self.inner - earlier.inner,
        }
    }
}

impl ChebFun {
    /// Series with the given coefficients. An empty vector is the zero function.
    pub fn from_coeffs(mut coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            coeffs: vec![value],
        }
    }

    /// The Chebyshev polynomial `T_k`.
    pub fn cheb_t(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Adaptive construction, see [`adaptive_fit`].
    pub fn fit<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> Result<Self> {
        adaptive_fit(f, rel_tol)
    }

    /// Interpolant through values at the `N + 1` Chebyshev extreme points
    /// `x_j = cos(j pi / N)`, `j = 0..=N`.
    pub fn from_cheb_values(values: &[f64]) -> Self {
        Self::from_coeffs(cheb_transform(values))
    }

    /// Clenshaw evaluation without domain check or accounting.
    pub fn value(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, x)
    }

    /// Multiplication by the identity function `x`.
    pub fn mul_x(&self) -> Self {
        let c = &self.coeffs;
        let mut out = vec![0.0; c.len() + 1];
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            if j == 0 {
                out[1] += cj;
            } else {
                out[j + 1] += 0.5 * cj;
                out[j - 1] += 0.5 * cj;
            }
        }
        Self::from_coeffs(out)
    }

    /// Drops trailing coefficients with magnitude `<= rel_tol * max|c|`.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let cmax = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if cmax == 0.0 {
            return Self::zero();
        }
        let cut = rel_tol * cmax;
        let last = self
            .coeffs
            .iter()
            .rposition(|c| c.abs() > cut)
            .unwrap_or(0);
        Self::from_coeffs(self.coeffs[..=last].to_vec())
    }

    /// `max_k |c_k|`.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// Chebyshev extreme points `cos(j pi / n)`, `j = 0..=n`, in descending order.
pub fn cheb_points(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect()
}

fn clenshaw(c: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    let two_x = 2.0 * x;
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + two_x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + x * b1 - b2
}

// DCT-I of the values at the n + 1 extreme points, through a length-2n FFT of
// the even extension.
fn cheb_transform(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    if n == 0 {
        return vec![values[0]];
    }
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(2 * n);
    buf.extend(values.iter().map(|&v| Complex::new(v, 0.0)));
    buf.extend(values[1..n].iter().rev().map(|&v| Complex::new(v, 0.0)));
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(2 * n);
    fft.process(&mut buf);
    let mut c: Vec<f64> = buf[..=n].iter().map(|z| z.re / n as f64).collect();
    c[0] *= 0.5;
    c[n] *= 0.5;
    c
}

/// Builds a Chebyshev interpolant of `f`, doubling the degree from 16 until
/// the trailing coefficients fall below `rel_tol * max|c|`, then trims.
pub fn adaptive_fit<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> Result<ChebFun> {
    adaptive_fit_capped(f, rel_tol, DEFAULT_DEGREE_CAP)
}

pub fn adaptive_fit_capped<F: Fn(f64) -> f64>(
    f: F,
    rel_tol: f64,
    degree_cap: usize,
) -> Result<ChebFun> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-3) {
        return Err(SilrError::InvalidArgument(format!(
            "rel_tol must lie in (0, 1e-3], got {rel_tol}"
        )));
    }
    let mut n = START_DEGREE;
    while n <= degree_cap {
        let xs = cheb_points(n);
        let mut vals = Vec::with_capacity(n + 1);
        for &x in &xs {
            let v = f(x);
            if !v.is_finite() {
                return Err(SilrError::NonFinite(x));
            }
            vals.push(v);
        }
        let c = cheb_transform(&vals);
        let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if cmax == 0.0 {
            return Ok(ChebFun::zero());
        }
        let tail = (n / 8).max(4);
        let tail_max = c[n + 1 - tail..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if tail_max <= rel_tol * cmax {
            return Ok(ChebFun::from_coeffs(c).trimmed(rel_tol));
        }
        n *= 2;
    }
    Err(SilrError::Resolution(degree_cap))
}

/// Point evaluation. Costs 1 eval.
pub fn eval(f: &ChebFun, x: f64, ledger: &mut FunopLedger) -> Result<f64> {
    if !(x.abs() <= 1.0 + DOMAIN_SLACK) {
        return Err(SilrError::Domain(x));
    }
    ledger.eval += 1;
    Ok(f.value(x.clamp(-1.0, 1.0)))
}

/// `alpha * f`. Costs 1 scale.
pub fn scale(alpha: f64, f: &ChebFun, ledger: &mut FunopLedger) -> ChebFun {
    ledger.scale += 1;
    ChebFun::from_coeffs(f.coeffs.iter().map(|c| alpha * c).collect())
}

/// `f + g`. Costs 1 add.
pub fn add(f: &ChebFun, g: &ChebFun, ledger: &mut FunopLedger) -> ChebFun {
    ledger.add += 1;
    let (long, short) = if f.coeffs.len() >= g.coeffs.len() {
        (f, g)
    } else {
        (g, f)
    };
    let mut out = long.coeffs.clone();
    for (o, s) in out.iter_mut().zip(&short.coeffs) {
        *o += s;
    }
    ChebFun::from_coeffs(out)
}

/// `alpha * f + g`. Costs 1 scale and 1 add.
pub fn axpy(alpha: f64, f: &ChebFun, g: &ChebFun, ledger: &mut FunopLedger) -> ChebFun {
    ledger.scale += 1;
    ledger.add += 1;
    let len = f.coeffs.len().max(g.coeffs.len());
    let mut out = vec![0.0; len];
    for (o, c) in out.iter_mut().zip(&g.coeffs) {
        *o = *c;
    }
    for (o, c) in out.iter_mut().zip(&f.coeffs) {
        *o += alpha * c;
    }
    ChebFun::from_coeffs(out)
}

/// `sum_i w_i f_i`. Costs `k` scales and `k - 1` adds for `k` terms.
pub fn lincomb(weights: &[f64], funs: &[&ChebFun], ledger: &mut FunopLedger) -> ChebFun {
    assert_eq!(weights.len(), funs.len(), "lincomb: length mismatch");
    if funs.is_empty() {
        return ChebFun::zero();
    }
    let k = funs.len() as u64;
    ledger.scale += k;
    ledger.add += k - 1;
    let len = funs.iter().map(|f| f.coeffs.len()).max().unwrap_or(1);
    let mut out = vec![0.0; len];
    for (&w, f) in weights.iter().zip(funs) {
        if w == 0.0 {
            continue;
        }
        for (o, c) in out.iter_mut().zip(&f.coeffs) {
            *o += w * c;
        }
    }
    ChebFun::from_coeffs(out)
}

#[inline]
fn moment(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        let k = k as f64;
        2.0 / (1.0 - k * k)
    }
}

/// `int_{-1}^{1} f g dx` without accounting.
pub fn inner_raw(f: &ChebFun, g: &ChebFun) -> f64 {
    // T_i T_j = (T_{i+j} + T_{|i-j|}) / 2; only i + j even survives.
    let (a, b) = (&f.coeffs, &g.coeffs);
    let mut total = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        let mut j = i % 2;
        while j < b.len() {
            let bj = b[j];
            if bj != 0.0 {
                acc += bj * (moment(i + j) + moment(i.abs_diff(j)));
            }
            j += 2;
        }
        total += ai * acc;
    }
    0.5 * total
}

/// Lebesgue inner product on `[-1, 1]`. Costs 1 inner.
pub fn inner(f: &ChebFun, g: &ChebFun, ledger: &mut FunopLedger) -> f64 {
    ledger.inner += 1;
    inner_raw(f, g)
}

/// `sqrt(inner(f, f))`. Costs 1 inner.
pub fn norm(f: &ChebFun, ledger: &mut FunopLedger) -> f64 {
    inner(f, f, ledger).max(0.0).sqrt()
}

/// Normalized Legendre polynomials `sqrt((2k+1)/2) P_k`, `k < n`, which are
/// orthonormal in `L2([-1, 1])`.
pub fn legendre_normalized(n: usize) -> Vec<ChebFun> {
    let mut raw: Vec<ChebFun> = Vec::with_capacity(n);
    for k in 0..n {
        let p = match k {
            0 => ChebFun::constant(1.0),
            1 => ChebFun::cheb_t(1),
            _ => {
                // (k) P_k = (2k - 1) x P_{k-1} - (k - 1) P_{k-2}
                let kf = k as f64;
                let xp = raw[k - 1].mul_x();
                let prev = &raw[k - 2];
                let mut c = vec![0.0; k + 1];
                for (j, v) in xp.coeffs.iter().enumerate().take(k + 1) {
                    c[j] += (2.0 * kf - 1.0) / kf * v;
                }
                for (j, v) in prev.coeffs.iter().enumerate() {
                    c[j] -= (kf - 1.0) / kf * v;
                }
                ChebFun::from_coeffs(c)
            }
        };
        raw.push(p);
    }
    raw.into_iter()
        .enumerate()
        .map(|(k, p)| {
            let s = ((2 * k + 1) as f64 / 2.0).sqrt();
            ChebFun::from_coeffs(p.coeffs.iter().map(|c| s * c).collect())
        })
        .collect()
}
