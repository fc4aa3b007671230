//! `silr`: command-line driver for the SILR experiments. Writes CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use silr::densela::{lstsq_qr, DenseMatrix};
use silr::direct::{kernel_matrix, krr_fit, solve_over_qr, GaussianKernel};
use silr::funspace::{adaptive_fit, FunopLedger};
use silr::krylov::lsmr;
use silr::quasimatrix::{gram, CoordinateRep, TallQuasimatrix};
use silr::sampling::{
    sample_leverage, sample_natural, sample_quadrature, solve_sampled, stretch_sample,
    LeverageTable, SketchKind, LEVERAGE_GRID,
};
use silr::svrg::{svrg_integrable_observed, KrrObjective, SvrgConfig};
use silr::rng::SilrRng;
use silr::{rng, runge, Averaging, LsmrOptions, OverSilrProblem, SilrError, Vector};

const SCHEMAS: &str = "\
CSV schemas (first line is the header, floats carry 17 significant digits):
  runge-lsmr    iter,resid,normal_resid,smax,smin
  runge-sample  x,abs_err, then a footer `# max_abs_error=..,s_lambda=..,M_lambda=..`
  krr-svrg      epoch,test_err,funops,flops (funops stay 0: the KRR objective is discrete)
  stretch       seed,ratio,success, then a footer `# success_fraction=..`

Exit codes: 0 success, 1 numerical failure, 2 usage error.
SILR_THREADS caps the number of threads used for multi-seed runs.";

#[derive(Parser, Debug)]
#[command(name = "silr", version, about = "Semi-infinite ridge regression experiments", after_help = SCHEMAS)]
struct Cli {
    /// Output file (stdout when omitted).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// LSMR on the Runge function with Chebyshev columns T_0..T_degree.
    RungeLsmr(LsmrArgs),
    /// Degree-`degree` Runge fit through a sampled finite problem.
    RungeSample(SampleArgs),
    /// SVRG for Gaussian-kernel ridge regression on sin(6x) + sin(60 e^x).
    KrrSvrg(KrrArgs),
    /// Gaussian sketching of a random least-squares problem.
    Stretch(StretchArgs),
}

#[derive(Args, Debug)]
struct LsmrArgs {
    #[arg(long, default_value_t = 300)]
    degree: usize,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-7)]
    atol: f64,
    #[arg(long, default_value_t = 1e-7)]
    btol: f64,
    #[arg(long, default_value_t = 1e8)]
    conlim: f64,
    #[arg(long, default_value_t = 1000)]
    maxit: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Natural,
    Leverage,
    Quadrature,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, default_value_t = 39)]
    degree: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Method::Quadrature)]
    method: Method,
    #[arg(long, default_value_t = 100)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct KrrArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 1e-2)]
    lambda: f64,
    #[arg(long, default_value_t = 0.02)]
    bandwidth: f64,
    /// Target accuracy in objective value.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    alpha: f64,
    /// Inner iterations per epoch.
    #[arg(long, default_value_t = 1000)]
    m: usize,
    /// Outer epochs; defaults to the dual epoch formula evaluated at --eps.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sketch {
    Gaussian,
    /// Orthonormal columns: exact recovery once s >= n.
    Orthogonal,
}

#[derive(Args, Debug)]
struct StretchArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 500)]
    s: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Sketch::Gaussian)]
    sketch: Sketch,
}

enum Failure {
    Usage(String),
    Numerical(SilrError),
    Io(std::io::Error),
}

impl From<SilrError> for Failure {
    fn from(e: SilrError) -> Self {
        Failure::Numerical(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn runge_lsmr(a: &LsmrArgs) -> Result<String, Failure> {
    if a.atol < 0.0 || a.btol < 0.0 || a.maxit == 0 || !(a.lambda >= 0.0) {
        return usage("atol, btol, lambda must be non-negative and maxit positive");
    }
    let cols = TallQuasimatrix::chebyshev(a.degree + 1);
    let b = adaptive_fit(runge, 1e-14)?;
    let opts = LsmrOptions {
        lambda: a.lambda,
        atol: a.atol,
        btol: a.btol,
        conlim: a.conlim,
        maxit: a.maxit,
        reorth: None,
    };
    let mut ledger = FunopLedger::new();
    let rep = lsmr(&cols, &b, &opts, &mut ledger)?;
    let p = OverSilrProblem::new(cols, b, a.lambda)?;
    let xd = solve_over_qr(&p, &mut FunopLedger::new())?;
    eprintln!(
        "termination {} after {} iterations, {} funops; residual {} (direct {}), |x - x_qr| {}",
        rep.termination,
        rep.iterations,
        rep.funops.total(),
        g17(p.residual_norm(&rep.x)?),
        g17(p.residual_norm(&xd)?),
        g17((&rep.x - &xd).norm()),
    );
    Ok(rep.history_csv())
}

fn runge_sample(a: &SampleArgs) -> Result<String, Failure> {
    if a.s == 0 {
        return usage("--s must be at least 1");
    }
    if !(a.lambda > 0.0) {
        return usage("--lambda must be positive");
    }
    let n = a.degree + 1;
    let cols = TallQuasimatrix::chebyshev(n);
    let b = adaptive_fit(runge, 1e-14)?;
    let za = CoordinateRep::chebyshev(n);
    let zb = CoordinateRep::from_fun(&b);
    let khat = gram(&cols.with_column(b.clone()), &mut FunopLedger::new());
    let table = LeverageTable::build(&za.stack(&zb)?, &khat, a.lambda, LEVERAGE_GRID)?;
    let mut r = rng::stream(a.seed, rng::ETA_STREAM);
    let p = match a.method {
        Method::Natural => sample_natural(&za, &zb, a.lambda, a.s, &mut r)?,
        Method::Leverage => sample_leverage(&za, &zb, &table, a.s, &mut r)?,
        Method::Quadrature => sample_quadrature(&za, &zb, a.lambda, a.s)?,
    };
    let x = solve_sampled(&p)?;
    let mut out = String::from("x,abs_err\n");
    let mut worst = 0.0f64;
    for i in 0..2001 {
        let t = -1.0 + i as f64 / 1000.0;
        let e = (cols.row(t).dot(&x) - runge(t)).abs();
        worst = worst.max(e);
        writeln!(out, "{},{}", g17(t), g17(e)).unwrap();
    }
    writeln!(
        out,
        "# max_abs_error={},s_lambda={},M_lambda={}",
        g17(worst),
        g17(table.s_lambda),
        g17(table.coherence)
    )
    .unwrap();
    Ok(out)
}

fn gaussian(r: &mut SilrRng) -> f64 {
    StandardNormal.sample(r)
}

fn krr_target(x: f64) -> f64 {
    (6.0 * x).sin() + (60.0 * x.exp()).sin()
}

fn krr_svrg(a: &KrrArgs) -> Result<String, Failure> {
    if a.n == 0 || a.m == 0 || a.epochs == Some(0) {
        return usage("--n, --m and --epochs must be positive");
    }
    if !(a.lambda > 0.0) || !(a.bandwidth > 0.0) || !(a.alpha > 0.0) || !(a.noise >= 0.0) {
        return usage("--lambda, --bandwidth, --alpha must be positive and --noise non-negative");
    }
    let n = a.n;
    let denom = (n.max(2) - 1) as f64;
    let pts = DenseMatrix::from_fn(n, 1, |i, _| if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / denom });
    let mut r = rng::stream(a.seed, rng::NOISE_STREAM);
    let y = Vector::from_fn(n, |i, _| krr_target(pts[(i, 0)]) + a.noise * gaussian(&mut r));
    let kernel = GaussianKernel { bandwidth: a.bandwidth };
    let exact = krr_fit(&pts, &y, &kernel, a.lambda)?;
    let test = DenseMatrix::from_fn(1000, 1, |i, _| -1.0 + 2.0 * (i as f64 + 0.5) / 1000.0);
    let k_test = kernel_matrix(&kernel, &test, &pts);
    let reference = &k_test * &exact.alpha;
    let test_err = |coef: &Vector| (&k_test * coef - &reference).norm_squared() / 1000.0;

    let obj = KrrObjective::new(&pts, &y, a.bandwidth, a.lambda)?;
    if !(a.eps > 0.0) {
        return usage("--eps must be positive");
    }
    let s_max = match a.epochs {
        Some(e) => e,
        None => obj.default_config(a.eps, a.seed)?.s_max,
    };
    let cfg = SvrgConfig {
        alpha: a.alpha,
        m: a.m,
        s_max,
        averaging: Averaging::Average,
        seed: a.seed,
    };
    let mut errs = vec![test_err(&Vector::zeros(n))];
    let rep = svrg_integrable_observed(&obj, &cfg, &Vector::zeros(n), &mut FunopLedger::new(), |_, x| {
        errs.push(test_err(x))
    })?;
    let mut out = String::from("epoch,test_err,funops,flops\n");
    for (h, e) in rep.history.iter().zip(&errs) {
        writeln!(out, "{},{},{},{}", h.epoch, g17(*e), h.funops, h.flops).unwrap();
    }
    Ok(out)
}

fn stretch(a: &StretchArgs) -> Result<String, Failure> {
    if a.d == 0 || a.s == 0 || a.trials == 0 {
        return usage("--d, --s and --trials must be positive");
    }
    if a.d > a.n {
        return usage(format!("--d ({}) must not exceed --n ({})", a.d, a.n));
    }
    if a.s < a.d {
        return usage("--s must be at least --d");
    }
    if matches!(a.sketch, Sketch::Orthogonal) && a.s < a.n {
        return usage("the orthogonal sketch needs --s >= --n");
    }
    if !(a.eps > 0.0) {
        return usage("--eps must be positive");
    }
    let kind = match a.sketch {
        Sketch::Gaussian => SketchKind::Gaussian,
        Sketch::Orthogonal => SketchKind::Orthogonal,
    };
    let rows: Vec<Result<(u64, f64), SilrError>> = (0..a.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = a.seed + t;
            let mut r = rng::stream(seed, rng::NOISE_STREAM);
            let x = DenseMatrix::from_fn(a.n, a.d, |_, _| gaussian(&mut r));
            let w = Vector::from_fn(a.d, |_, _| gaussian(&mut r));
            let y = &x * w + Vector::from_fn(a.n, |_, _| gaussian(&mut r));
            let opt = (&x * lstsq_qr(&x, &y)? - &y).norm();
            let mut sr = rng::stream(seed, rng::FEATURE_STREAM);
            let (sx, sy) = stretch_sample(&x, &y, a.s, kind, &mut sr)?;
            let got = (&x * lstsq_qr(&sx, &sy)? - &y).norm();
            Ok((seed, got / opt))
        })
        .collect();
    let mut out = String::from("seed,ratio,success\n");
    let mut ok = 0;
    for row in rows {
        let (seed, ratio) = row?;
        let success = ratio <= 1.0 + a.eps;
        ok += success as usize;
        writeln!(out, "{seed},{},{}", g17(ratio), success as u8).unwrap();
    }
    writeln!(out, "# success_fraction={}", g17(ok as f64 / a.trials as f64)).unwrap();
    Ok(out)
}

fn configure_threads() {
    if let Ok(v) = std::env::var("SILR_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.cmd {
        Cmd::RungeLsmr(a) => runge_lsmr(a),
        Cmd::RungeSample(a) => runge_sample(a),
        Cmd::KrrSvrg(a) => krr_svrg(a),
        Cmd::Stretch(a) => stretch(a),
    };
    let result = result.and_then(|csv| {
        match &cli.output {
            Some(p) => std::fs::write(p, csv)?,
            None => std::io::stdout().write_all(csv.as_bytes())?,
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("io error: {e}");
            ExitCode::from(1)
        }
    }
}
