//! Tall and wide quasimatrices over [`ChebFun`] columns, and coordinate
//! representations of their rows.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::densela::DenseMatrix;
use crate::funspace::{self, ChebFun, FunopLedger};
use crate::rng::SilrRng;
use crate::sampling::gauss_legendre;
use crate::{Result, SilrError, Vector};

const DOMAIN_SLACK: f64 = 1e-12;

/// `inf x n` quasimatrix: an ordered list of `n` function columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TallQuasimatrix {
    cols: Vec<ChebFun>,
}

/// `n x inf` quasimatrix whose rows are the adjoints of `n` functions.
///
/// Stored as the tall quasimatrix of its rows; all algebra goes through that.
#[derive(Clone, Debug, PartialEq)]
pub struct WideQuasimatrix {
    rows: TallQuasimatrix,
}

impl TallQuasimatrix {
    pub fn new(cols: Vec<ChebFun>) -> Result<Self> {
        if cols.is_empty() {
            return Err(SilrError::InvalidArgument(
                "a quasimatrix needs at least one column".into(),
            ));
        }
        Ok(Self { cols })
    }

    /// `[T_0, T_1, ..., T_{n-1}]`.
    pub fn chebyshev(n: usize) -> Self {
        assert!(n >= 1, "chebyshev: n must be positive");
        Self {
            cols: (0..n).map(ChebFun::cheb_t).collect(),
        }
    }

    /// Normalized Legendre polynomials, orthonormal in `L2([-1, 1])`.
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1, "legendre: n must be positive");
        Self {
            cols: funspace::legendre_normalized(n),
        }
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, j: usize) -> &ChebFun {
        &self.cols[j]
    }

    pub fn columns(&self) -> &[ChebFun] {
        &self.cols
    }

    pub fn into_columns(self) -> Vec<ChebFun> {
        self.cols
    }

    /// `[A f]`.
    pub fn with_column(&self, f: ChebFun) -> Self {
        let mut cols = self.cols.clone();
        cols.push(f);
        Self { cols }
    }

    pub fn adjoint(&self) -> WideQuasimatrix {
        WideQuasimatrix { rows: self.clone() }
    }

    /// Row at `x`: `(a_1(x), ..., a_n(x))`, without accounting.
    pub fn row(&self, x: f64) -> Vector {
        DVector::from_iterator(self.cols.len(), self.cols.iter().map(|c| c.value(x)))
    }

    /// Column recombination `A M` for an `n x k` matrix `M`.
    pub fn recombine(&self, m: &DenseMatrix, ledger: &mut FunopLedger) -> Result<Self> {
        if m.nrows() != self.ncols() {
            return Err(SilrError::Length {
                expected: self.ncols(),
                got: m.nrows(),
            });
        }
        let refs: Vec<&ChebFun> = self.cols.iter().collect();
        let cols = (0..m.ncols())
            .map(|j| {
                let w: Vec<f64> = m.column(j).iter().copied().collect();
                funspace::lincomb(&w, &refs, ledger)
            })
            .collect();
        Ok(Self { cols })
    }
}

impl WideQuasimatrix {
    pub fn new(rows: Vec<ChebFun>) -> Result<Self> {
        Ok(Self {
            rows: TallQuasimatrix::new(rows)?,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows.ncols()
    }

    /// The tall quasimatrix `A*`.
    pub fn adjoint(&self) -> &TallQuasimatrix {
        &self.rows
    }

    /// `A u`, entries `<a_j, u>`. Costs `n` inner products.
    pub fn apply(&self, u: &ChebFun, ledger: &mut FunopLedger) -> Vector {
        qm_adjoint_apply(&self.rows, u, ledger)
    }

    /// `A* y = sum_j y_j a_j`.
    pub fn adjoint_apply(&self, y: &Vector, ledger: &mut FunopLedger) -> Result<ChebFun> {
        qm_apply(&self.rows, y, ledger)
    }
}

/// `A x = sum_j x_j a_j`. Costs `n` scales and `n - 1` adds.
pub fn qm_apply(a: &TallQuasimatrix, x: &Vector, ledger: &mut FunopLedger) -> Result<ChebFun> {
    if x.len() != a.ncols() {
        return Err(SilrError::Length {
            expected: a.ncols(),
            got: x.len(),
        });
    }
    let refs: Vec<&ChebFun> = a.cols.iter().collect();
    Ok(funspace::lincomb(x.as_slice(), &refs, ledger))
}

/// `A* u`, entries `<a_j, u>`. Costs `n` inner products.
pub fn qm_adjoint_apply(a: &TallQuasimatrix, u: &ChebFun, ledger: &mut FunopLedger) -> Vector {
    DVector::from_iterator(a.ncols(), a.cols.iter().map(|c| funspace::inner(c, u, ledger)))
}

/// `A* A`. Costs `n (n + 1) / 2` inner products.
pub fn gram(a: &TallQuasimatrix, ledger: &mut FunopLedger) -> DenseMatrix {
    let n = a.ncols();
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = funspace::inner(&a.cols[i], &a.cols[j], ledger);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Index set of a coordinate representation.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Interval(f64, f64),
    Boxed(Vec<(f64, f64)>),
    /// Unbounded set of the given dimension (e.g. `R^d x [0, 2 pi]`).
    Unbounded(usize),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval(..) => 1,
            Domain::Boxed(b) => b.len(),
            Domain::Unbounded(d) => *d,
        }
    }

    fn contains(&self, eta: &[f64]) -> bool {
        let inside = |x: f64, (a, b): (f64, f64)| x >= a - DOMAIN_SLACK && x <= b + DOMAIN_SLACK;
        match self {
            Domain::Interval(a, b) => inside(eta[0], (*a, *b)),
            Domain::Boxed(bounds) => eta.iter().zip(bounds).all(|(&x, &ab)| inside(x, ab)),
            Domain::Unbounded(_) => eta.iter().all(|x| x.is_finite()),
        }
    }
}

type CoordFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type SamplerFn = Arc<dyn Fn(&mut SilrRng) -> Vec<f64> + Send + Sync>;

/// Coordinate representation `z: Omega -> R^n` together with the working
/// measure `c * p(eta) d eta` (`p` a probability density, `c > 0` the mass)
/// and a sampler for `p`.
#[derive(Clone)]
pub struct CoordinateRep {
    dim: usize,
    domain: Domain,
    mass: f64,
    z: CoordFn,
    density: DensityFn,
    sampler: SamplerFn,
}

impl fmt::Debug for CoordinateRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordinateRep")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("mass", &self.mass)
            .finish_non_exhaustive()
    }
}

impl CoordinateRep {
    /// Generic constructor. For interval domains the density is checked to
    /// integrate to one (64-node Gauss-Legendre, tolerance `1e-8`).
    pub fn new<Z, P, S>(
        dim: usize,
        domain: Domain,
        mass: f64,
        z: Z,
        density: P,
        sampler: S,
    ) -> Result<Self>
    where
        Z: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        P: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        S: Fn(&mut SilrRng) -> Vec<f64> + Send + Sync + 'static,
    {
        if !(mass > 0.0) {
            return Err(SilrError::InvalidArgument(format!("mass must be positive, got {mass}")));
        }
        if dim == 0 {
            return Err(SilrError::InvalidArgument("dimension must be positive".into()));
        }
        if let Domain::Interval(a, b) = domain {
            let (t, w) = gauss_legendre(64);
            let h = 0.5 * (b - a);
            let total: f64 = t
                .iter()
                .zip(&w)
                .map(|(&t, &w)| h * w * density(&[a + h * (t + 1.0)]))
                .sum();
            if (total - 1.0).abs() > 1e-8 {
                return Err(SilrError::InvalidArgument(format!(
                    "density integrates to {total}, not 1"
                )));
            }
        }
        Ok(Self {
            dim,
            domain,
            mass,
            z: Arc::new(z),
            density: Arc::new(density),
            sampler: Arc::new(sampler),
        })
    }

    /// `z(eta) = (T_0(eta), ..., T_{n-1}(eta))` under Lebesgue measure on `[-1, 1]`.
    pub fn chebyshev(n: usize) -> Self {
        Self::new(
            n,
            Domain::Interval(-1.0, 1.0),
            2.0,
            move |eta, out| {
                let x = eta[0];
                let (mut t0, mut t1) = (1.0, x);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = match k {
                        0 => 1.0,
                        1 => x,
                        _ => {
                            let t2 = 2.0 * x * t1 - t0;
                            t0 = t1;
                            t1 = t2;
                            t2
                        }
                    };
                }
            },
            |_| 0.5,
            |rng| vec![rng.random_range(-1.0..=1.0)],
        )
        .expect("chebyshev rep is valid")
    }

    /// Rows of a tall quasimatrix: `z(eta) = (a_1(eta), ..., a_n(eta))`
    /// under Lebesgue measure on `[-1, 1]`.
    pub fn from_tall(a: &TallQuasimatrix) -> Self {
        let cols = a.columns().to_vec();
        Self::new(
            cols.len(),
            Domain::Interval(-1.0, 1.0),
            2.0,
            move |eta, out| {
                for (o, c) in out.iter_mut().zip(&cols) {
                    *o = c.value(eta[0]);
                }
            },
            |_| 0.5,
            |rng| vec![rng.random_range(-1.0..=1.0)],
        )
        .expect("tall rep is valid")
    }

    /// Normalized Legendre basis on `[-1, 1]`.
    pub fn legendre(n: usize) -> Self {
        Self::from_tall(&TallQuasimatrix::legendre(n))
    }

    /// Scalar representation of a single function on `[-1, 1]`.
    pub fn from_fun(f: &ChebFun) -> Self {
        Self::from_tall(&TallQuasimatrix { cols: vec![f.clone()] })
    }

    /// Real random-feature representation of the Gaussian kernel
    /// `exp(-|x - x'|^2 / (2 h^2))` over the rows `x_i` of `points`:
    /// `z(omega, b)_i = sqrt(2) cos(x_i . omega + b)`, with
    /// `omega ~ N(0, h^-2 I)` and `b ~ U[0, 2 pi]`. `eta = (omega, b)`.
    pub fn rff(points: &DenseMatrix, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(SilrError::InvalidArgument("bandwidth must be positive".into()));
        }
        let d = points.ncols();
        let pts = points.clone();
        let inv_h2 = 1.0 / (bandwidth * bandwidth);
        let two_pi = 2.0 * std::f64::consts::PI;
        Self::new(
            points.nrows(),
            Domain::Unbounded(d + 1),
            1.0,
            move |eta, out| {
                let (omega, b) = eta.split_at(d);
                for (i, o) in out.iter_mut().enumerate() {
                    let dot: f64 = (0..d).map(|k| pts[(i, k)] * omega[k]).sum();
                    *o = std::f64::consts::SQRT_2 * (dot + b[0]).cos();
                }
            },
            move |eta| {
                let (omega, b) = eta.split_at(d);
                if b[0] < 0.0 || b[0] > two_pi {
                    return 0.0;
                }
                let q: f64 = omega.iter().map(|w| w * w).sum::<f64>() / inv_h2;
                let norm = (two_pi * inv_h2).powf(-0.5 * d as f64);
                norm * (-0.5 * q).exp() / two_pi
            },
            move |rng| {
                let mut eta: Vec<f64> = (0..d)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(rng);
                        g / bandwidth
                    })
                    .collect();
                eta.push(rng.random_range(0.0..two_pi));
                eta
            },
        )
    }

    /// `(z_self; z_other)` over the same index set and measure.
    pub fn stack(&self, other: &CoordinateRep) -> Result<Self> {
        if self.domain != other.domain || self.mass != other.mass {
            return Err(SilrError::InvalidArgument(
                "stacked representations must share domain and measure".into(),
            ));
        }
        let (za, zb, na) = (self.z.clone(), other.z.clone(), self.dim);
        Ok(Self {
            dim: self.dim + other.dim,
            domain: self.domain.clone(),
            mass: self.mass,
            z: Arc::new(move |eta, out| {
                let (head, tail) = out.split_at_mut(na);
                za(eta, head);
                zb(eta, tail);
            }),
            density: self.density.clone(),
            sampler: self.sampler.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn density(&self, eta: &[f64]) -> f64 {
        (self.density)(eta)
    }

    /// Draws `eta ~ p`.
    pub fn sample(&self, rng: &mut SilrRng) -> Vec<f64> {
        (self.sampler)(rng)
    }

    /// `z(eta)` into a caller buffer, without domain check.
    pub fn eval_into(&self, eta: &[f64], out: &mut [f64]) {
        (self.z)(eta, out)
    }

    /// `z(eta)` without domain check.
    pub fn eval(&self, eta: &[f64]) -> Vector {
        let mut out = DVector::zeros(self.dim);
        (self.z)(eta, out.as_mut_slice());
        out
    }
}

/// Row `eta` of the represented quasimatrix, `z(eta)`.
pub fn coord_row(rep: &CoordinateRep, eta: &[f64]) -> Result<Vector> {
    if eta.len() != rep.domain.dim() {
        return Err(SilrError::Length {
            expected: rep.domain.dim(),
            got: eta.len(),
        });
    }
    if !rep.domain.contains(eta) {
        return Err(SilrError::Domain(eta[0]));
    }
    Ok(rep.eval(eta))
}

/// Brute-force `c * int z z^T p d eta` by tensor Gauss-Legendre quadrature.
pub fn coord_gram_oracle(rep: &CoordinateRep, quad_order: usize) -> Result<DenseMatrix> {
    let bounds: Vec<(f64, f64)> = match &rep.domain {
        Domain::Interval(a, b) => vec![(*a, *b)],
        Domain::Boxed(b) => b.clone(),
        Domain::Unbounded(_) => {
            return Err(SilrError::Unsupported(
                "quadrature oracle needs a bounded domain".into(),
            ))
        }
    };
    let (t, w) = gauss_legendre(quad_order);
    let d = bounds.len();
    let n = rep.dim;
    let mut g = DenseMatrix::zeros(n, n);
    let mut idx = vec![0usize; d];
    let mut eta = vec![0.0; d];
    let mut z = vec![0.0; n];
    loop {
        let mut weight = rep.mass;
        for k in 0..d {
            let (a, b) = bounds[k];
            let h = 0.5 * (b - a);
            eta[k] = a + h * (t[idx[k]] + 1.0);
            weight *= h * w[idx[k]];
        }
        weight *= rep.density(&eta);
        rep.eval_into(&eta, &mut z);
        for i in 0..n {
            let wi = weight * z[i];
            for j in i..n {
                g[(i, j)] += wi * z[j];
            }
        }
        let mut k = 0;
        loop {
            if k == d {
                for i in 0..n {
                    for j in 0..i {
                        g[(i, j)] = g[(j, i)];
                    }
                }
                return Ok(g);
            }
            idx[k] += 1;
            if idx[k] < quad_order {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::sym_eigenvalues;
    use crate::funspace::{adaptive_fit, inner_raw};
    use crate::rng;
    use crate::runge;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn apply_examples() {
        let mut l = FunopLedger::new();
        let a = TallQuasimatrix::chebyshev(2);
        let f = qm_apply(&a, &DVector::from_vec(vec![1.0, 0.0]), &mut l).unwrap();
        assert_eq!(f.coeffs(), &[1.0, 0.0]);
        let f = qm_apply(&a, &DVector::from_vec(vec![2.0, 3.0]), &mut l).unwrap();
        assert_eq!(f.coeffs(), &[2.0, 3.0]);
        let a10 = TallQuasimatrix::chebyshev(10);
        for j in 0..10 {
            let mut e = DVector::zeros(10);
            e[j] = 1.0;
            let f = qm_apply(&a10, &e, &mut l).unwrap();
            assert_eq!(f.trimmed(0.0), ChebFun::cheb_t(j));
        }
        assert_eq!(
            qm_apply(&a, &DVector::zeros(3), &mut l).unwrap_err(),
            SilrError::Length { expected: 2, got: 3 }
        );
        let mut l = FunopLedger::new();
        qm_apply(&a10, &DVector::from_element(10, 1.0), &mut l).unwrap();
        assert_eq!((l.scale, l.add), (10, 9));
    }

    #[test]
    fn adjoint_apply_examples() {
        let mut l = FunopLedger::new();
        let a = TallQuasimatrix::chebyshev(2);
        let v = qm_adjoint_apply(&a, &ChebFun::cheb_t(0), &mut l);
        assert_eq!(v.as_slice(), &[2.0, 0.0]);
        let v = qm_adjoint_apply(&a, &ChebFun::cheb_t(1), &mut l);
        assert_relative_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(l.inner, 4);
        let r = adaptive_fit(runge, 1e-14).unwrap();
        let v = qm_adjoint_apply(&TallQuasimatrix::chebyshev(1), &r, &mut l);
        assert_relative_eq!(v[0], 0.4 * 5f64.atan(), epsilon = 1e-13);
    }

    #[test]
    fn gram_examples() {
        let mut l = FunopLedger::new();
        let g = gram(&TallQuasimatrix::legendre(5), &mut l);
        assert!((g - DenseMatrix::identity(5, 5)).amax() < 1e-12);
        assert_eq!(l.inner, 15);
        let g = gram(&TallQuasimatrix::chebyshev(2), &mut l);
        assert_relative_eq!(g[(0, 0)], 2.0);
        assert_relative_eq!(g[(1, 1)], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
        let a = TallQuasimatrix::chebyshev(40);
        let g = gram(&a, &mut l);
        let (t, w) = gauss_legendre(256);
        let mut oracle = DenseMatrix::zeros(40, 40);
        for (&x, &wx) in t.iter().zip(&w) {
            let r = a.row(x);
            oracle += wx * &r * r.transpose();
        }
        assert!((g - oracle).amax() < 1e-10);
    }

    #[test]
    fn coord_row_examples() {
        let rep = CoordinateRep::chebyshev(5);
        assert_eq!(coord_row(&rep, &[1.0]).unwrap(), DVector::from_element(5, 1.0));
        let rep3 = CoordinateRep::chebyshev(3);
        assert_eq!(coord_row(&rep3, &[0.0]).unwrap().as_slice(), &[1.0, 0.0, -1.0]);
        assert!(matches!(coord_row(&rep3, &[1.5]), Err(SilrError::Domain(_))));
        let pts = DenseMatrix::from_column_slice(4, 1, &[-0.5, 0.0, 0.3, 0.9]);
        let rff = CoordinateRep::rff(&pts, 0.3).unwrap();
        let z = coord_row(&rff, &[0.0, 0.0]).unwrap();
        for v in z.iter() {
            assert_relative_eq!(*v, 2f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn gram_oracle_examples() {
        let g = coord_gram_oracle(&CoordinateRep::chebyshev(5), 128).unwrap();
        let mut l = FunopLedger::new();
        let want = gram(&TallQuasimatrix::chebyshev(5), &mut l);
        assert!((g - want).amax() < 1e-12);
        let g = coord_gram_oracle(&CoordinateRep::legendre(6), 64).unwrap();
        assert!((g - DenseMatrix::identity(6, 6)).amax() < 1e-12);
        let one = CoordinateRep::new(
            1,
            Domain::Interval(-1.0, 1.0),
            2.0,
            |_, out| out[0] = 1.0,
            |_| 0.5,
            |_| vec![0.0],
        )
        .unwrap();
        let g = coord_gram_oracle(&one, 8).unwrap();
        assert_relative_eq!(g[(0, 0)], 2.0, epsilon = 1e-14);
        let pts = DenseMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            coord_gram_oracle(&CoordinateRep::rff(&pts, 1.0).unwrap(), 8),
            Err(SilrError::Unsupported(_))
        ));
    }

    #[test]
    fn box_oracle_tensorizes() {
        // z(x, y) = (1, x y) on [0,1]^2, uniform density.
        let rep = CoordinateRep::new(
            2,
            Domain::Boxed(vec![(0.0, 1.0), (0.0, 1.0)]),
            1.0,
            |eta, out| {
                out[0] = 1.0;
                out[1] = eta[0] * eta[1];
            },
            |_| 1.0,
            |rng| vec![rng.random(), rng.random()],
        )
        .unwrap();
        let g = coord_gram_oracle(&rep, 6).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g[(0, 1)], 0.25, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 1)], 1.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_density() {
        let bad = CoordinateRep::new(
            1,
            Domain::Interval(-1.0, 1.0),
            2.0,
            |_, out| out[0] = 1.0,
            |_| 1.0,
            |_| vec![0.0],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn rff_sampler_matches_density_moments() {
        let pts = DenseMatrix::from_column_slice(1, 1, &[0.0]);
        let rep = CoordinateRep::rff(&pts, 0.5).unwrap();
        let mut r = rng::stream(7, rng::FEATURE_STREAM);
        let draws: Vec<Vec<f64>> = (0..20000).map(|_| rep.sample(&mut r)).collect();
        let var: f64 = draws.iter().map(|e| e[0] * e[0]).sum::<f64>() / draws.len() as f64;
        assert!((var - 4.0).abs() < 0.2, "omega variance {var}");
        assert!(draws.iter().all(|e| (0.0..2.0 * std::f64::consts::PI).contains(&e[1])));
    }

    fn poly_cols(n: usize, deg: usize) -> impl Strategy<Value = TallQuasimatrix> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, deg + 1), n).prop_map(|cols| {
            TallQuasimatrix::new(cols.into_iter().map(ChebFun::from_coeffs).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn apply_is_associative(
            a in poly_cols(4, 12),
            m in prop::collection::vec(-1.0f64..1.0, 12),
            x in prop::collection::vec(-1.0f64..1.0, 3),
        ) {
            let mut l = FunopLedger::new();
            let m = DenseMatrix::from_column_slice(4, 3, &m);
            let x = DVector::from_vec(x);
            let lhs = qm_apply(&a, &(&m * &x), &mut l).unwrap();
            let am = a.recombine(&m, &mut l).unwrap();
            let rhs = qm_apply(&am, &x, &mut l).unwrap();
            for i in 0..50 {
                let t = -1.0 + 2.0 * i as f64 / 49.0;
                prop_assert!((lhs.value(t) - rhs.value(t)).abs() <= 1e-12 * (1.0 + lhs.value(t).abs()));
            }
        }

        #[test]
        fn adjoint_is_consistent(
            a in poly_cols(5, 15),
            x in prop::collection::vec(-1.0f64..1.0, 5),
            u in prop::collection::vec(-1.0f64..1.0, 20),
        ) {
            let mut l = FunopLedger::new();
            let x = DVector::from_vec(x);
            let u = ChebFun::from_coeffs(u);
            let lhs = inner_raw(&qm_apply(&a, &x, &mut l).unwrap(), &u);
            let rhs = x.dot(&qm_adjoint_apply(&a, &u, &mut l));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn gram_is_psd(a in poly_cols(8, 10)) {
            let mut l = FunopLedger::new();
            let g = gram(&a, &mut l);
            let ev = sym_eigenvalues(&g);
            prop_assert!(ev[0] >= -1e-10 * g.norm());
        }

        #[test]
        fn gram_rank_is_bounded(a in poly_cols(3, 6), m in prop::collection::vec(-1.0f64..1.0, 21)) {
            // 7 columns spanning at most 3 dimensions.
            let mut l = FunopLedger::new();
            let wide = a.recombine(&DenseMatrix::from_column_slice(3, 7, &m), &mut l).unwrap();
            let g = gram(&wide, &mut l);
            let ev = sym_eigenvalues(&g);
            let top = ev[6].abs().max(1e-300);
            let rank = ev.iter().filter(|&&e| e > 1e-10 * top).count();
            prop_assert!(rank <= 3);
            prop_assert!(rank <= wide.ncols());
        }
    }
}
