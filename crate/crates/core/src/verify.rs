//! Monte-Carlo and pathwise checks of the deflator and of the arbitrage
//! strategy.
//!
//! Per-path quantities are computed in parallel and collected in path order;
//! every reduction then runs sequentially so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristics::Triplet;
use crate::deflator::{deflator_along_path, DeflatorPath, DeflatorSpec};
use crate::error::{Error, Result};
use crate::growth::window;
use crate::simulate::{log_stoch_exp, simulate_paths, ExpMode, Law, Path, PathLaw, SimConfig};
use crate::tilt::TiltField;
use crate::viability::check_lambda;

pub const DEFAULT_THRESHOLD: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    TwoSided,
    /// Passes when `mean ≤ target + threshold·stderr`.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub target: f64,
    #[serde(with = "crate::extreal")]
    pub z: f64,
    pub threshold: f64,
    pub sidedness: Sidedness,
    pub pass: bool,
    pub n_paths: usize,
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `z` with a zero standard error treated as an exact comparison.
fn z_score(diff: f64, stderr: f64, scale: f64) -> f64 {
    if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-12 * scale.max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

fn report(name: &str, mean: f64, stderr: f64, target: f64, threshold: f64, side: Sidedness, n: usize) -> TestReport {
    let z = z_score(mean - target, stderr, target.abs().max(mean.abs()));
    let pass = match side {
        Sidedness::TwoSided => z.abs() <= threshold,
        Sidedness::Upper => z <= threshold,
    };
    TestReport { name: name.to_string(), mean, stderr, target, z, threshold, sidedness: side, pass, n_paths: n }
}

/// Two-sided z-test of the sample mean against `target`.
pub fn martingale_test(name: &str, samples: &[f64], target: f64, threshold: f64) -> TestReport {
    let (m, se) = mean_stderr(samples);
    report(name, m, se, target, threshold, Sidedness::TwoSided, samples.len())
}

/// One-sided test `mean ≤ bound + threshold·stderr`.
pub fn supermartingale_test(name: &str, samples: &[f64], bound: f64, threshold: f64) -> TestReport {
    let (m, se) = mean_stderr(samples);
    report(name, m, se, bound, threshold, Sidedness::Upper, samples.len())
}

/// `E|L(T) − 1| ≤ ε` and `E[sup_t |L(t) − 1|] ≤ ε`, both one-sided.
pub fn tv_bound_test(l_paths: &[Vec<f64>], epsilon: f64, threshold: f64) -> (TestReport, TestReport) {
    let terminal: Vec<f64> = l_paths.iter().map(|l| (l.last().copied().unwrap_or(1.0) - 1.0).abs()).collect();
    let sup: Vec<f64> = l_paths.iter().map(|l| l.iter().fold(0.0f64, |m, &x| m.max((x - 1.0).abs()))).collect();
    (
        supermartingale_test("tv_bound_terminal", &terminal, epsilon, threshold),
        supermartingale_test("tv_bound_sup", &sup, epsilon, threshold),
    )
}

/// Bounded test functions of `S(T) − S(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    One,
    Up,
    Clamped,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] = [TestFunction::One, TestFunction::Up, TestFunction::Clamped];

    pub fn eval(self, s: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Up => f64::from(u8::from(s > 0.0)),
            TestFunction::Clamped => s.clamp(-10.0, 10.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Up => "up",
            TestFunction::Clamped => "clamp",
        }
    }
}

/// Seed for the independent tilted-law sample.
pub fn tilted_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Compares `E_P[L(T) f(S_T)]` with `E_{P^Y}[f(S_T)]` from two independent samples.
pub fn girsanov_consistency_test(
    t: &Triplet,
    y: &TiltField,
    fs: &[TestFunction],
    cfg: &SimConfig,
    threshold: f64,
) -> Result<Vec<TestReport>> {
    let base = simulate_paths(t, cfg, Law::Base)?;
    let lt: Vec<(f64, f64)> = base
        .par_iter()
        .map(|p| Ok((crate::simulate::log_density_path(p, y)?.last().copied().unwrap_or(0.0).exp(), p.terminal())))
        .collect::<Result<_>>()?;
    let tcfg = SimConfig { seed: tilted_seed(cfg.seed), ..*cfg };
    let tilted = simulate_paths(t, &tcfg, Law::Tilted(y))?;
    girsanov_from_samples(&lt, &tilted.iter().map(Path::terminal).collect::<Vec<_>>(), fs, threshold)
}

fn girsanov_from_samples(
    base: &[(f64, f64)],
    tilted: &[f64],
    fs: &[TestFunction],
    threshold: f64,
) -> Result<Vec<TestReport>> {
    Ok(fs
        .iter()
        .map(|&f| {
            let a: Vec<f64> = base.iter().map(|&(l, s)| l * f.eval(s)).collect();
            let b: Vec<f64> = tilted.iter().map(|&s| f.eval(s)).collect();
            let (ma, sa) = mean_stderr(&a);
            let (mb, sb) = mean_stderr(&b);
            let se = (sa * sa + sb * sb).sqrt();
            report(&format!("girsanov[{}]", f.label()), ma, se, mb, threshold, Sidedness::TwoSided, a.len())
        })
        .collect())
}

/// Outcome of running the arbitrage strategy `X = ϑ(S − S(0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageReport {
    pub strategy: i8,
    pub nondecreasing: bool,
    pub min_terminal: f64,
    pub frac_positive: f64,
    /// Mean of `X(T)` against `ϑ a T`.
    pub mean: TestReport,
    pub pass: bool,
}

pub fn arbitrage_demo(t: &Triplet, cfg: &SimConfig, threshold: f64) -> Result<ArbitrageReport> {
    let verdict = check_lambda(t)?;
    if verdict.is_viable() {
        return Err(Error::NotApplicable("model is viable; no arbitrage strategy".into()));
    }
    cfg.validate()?;
    let theta = f64::from(verdict.strategy);
    let pl = PathLaw::new(t)?;
    let stats: Vec<(bool, f64)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = pl.simulate(cfg, i)?;
            let s0 = p.s[0];
            let mono = p.s.windows(2).all(|w| theta * (w[1] - w[0]) >= 0.0);
            Ok((mono, theta * (p.terminal() - s0)))
        })
        .collect::<Result<_>>()?;
    let nondecreasing = stats.iter().all(|s| s.0);
    let xt: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let min_terminal = xt.iter().copied().fold(f64::INFINITY, f64::min);
    let frac_positive = xt.iter().filter(|&&x| x > 0.0).count() as f64 / xt.len() as f64;
    let mean = martingale_test("arbitrage_mean", &xt, theta * t.a * t.horizon, threshold);
    let active = verdict.drift_rate.is_some_and(|r| r > 0.0) || t.kappa.total_mass() > 0.0;
    let pass = nondecreasing && (!active || frac_positive == 1.0) && mean.pass;
    Ok(ArbitrageReport { strategy: verdict.strategy, nondecreasing, min_terminal, frac_positive, mean, pass })
}

/// Full verification output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub tests: Vec<TestReport>,
    pub all_pass: bool,
}

impl VerificationReport {
    pub fn failing(&self) -> Vec<&str> {
        self.tests.iter().filter(|t| !t.pass).map(|t| t.name.as_str()).collect()
    }
}

/// Fractions tested for the equality `E[Z(T) X(T)] = X(0)`.
pub fn martingale_fractions(spec: &DeflatorSpec) -> Vec<f64> {
    let b = spec.base.bounds();
    let mut ps = vec![0.0];
    for p in [0.2, spec.p_tilde()] {
        if b.contains(p) && !ps.contains(&p) {
            ps.push(p);
        }
    }
    ps
}

/// Seven interior points of the fraction window around `p̃`.
pub fn supermartingale_grid(spec: &DeflatorSpec) -> Vec<f64> {
    let (lo, hi) = window(&spec.base.bounds(), spec.p_tilde());
    (1..=7).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect()
}

struct PathOutcome {
    l: Vec<f64>,
    s_t: f64,
    /// `Z(T) X^p(T)` for the equality fractions followed by the grid fractions.
    zx: Vec<f64>,
}

fn evaluate_path(spec: &DeflatorSpec, path: &Path, fractions: &[f64], mode: ExpMode) -> Result<PathOutcome> {
    let d: DeflatorPath = deflator_along_path(spec, path, mode)?;
    let ln_z = d.terminal_z().ln();
    let incs = path.increments();
    let mut zx = Vec::with_capacity(fractions.len());
    for &p in fractions {
        let u: Vec<_> = incs.iter().map(|i| i.scale(p)).collect();
        let ln_x = *log_stoch_exp(path, &u, mode)?.last().unwrap_or(&0.0);
        zx.push((ln_z + ln_x).exp());
    }
    Ok(PathOutcome { l: d.l, s_t: path.terminal(), zx })
}

/// Runs martingale, supermartingale, total-variation and change-of-measure
/// checks for `spec`.
pub fn run_suite(spec: &DeflatorSpec, cfg: &SimConfig, threshold: f64) -> Result<VerificationReport> {
    if !spec.simulable {
        return Err(Error::InfiniteActivity);
    }
    cfg.validate()?;
    let eq = martingale_fractions(spec);
    let grid = supermartingale_grid(spec);
    let fractions: Vec<f64> = eq.iter().chain(&grid).copied().collect();
    let pl = PathLaw::new(&spec.base)?;
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| evaluate_path(spec, &pl.simulate(cfg, i)?, &fractions, ExpMode::Exact))
        .collect::<Result<_>>()?;

    let mut tests = Vec::new();
    let lt: Vec<f64> = outcomes.iter().map(|o| *o.l.last().unwrap_or(&1.0)).collect();
    tests.push(martingale_test("martingale[L]", &lt, 1.0, threshold));
    for (k, &p) in fractions.iter().enumerate() {
        let xs: Vec<f64> = outcomes.iter().map(|o| o.zx[k]).collect();
        if k < eq.len() {
            tests.push(martingale_test(&format!("martingale[ZX,p={p}]"), &xs, 1.0, threshold));
        } else {
            tests.push(supermartingale_test(&format!("supermartingale[ZX,p={p}]"), &xs, 1.0, threshold));
        }
    }
    let l_paths: Vec<Vec<f64>> = outcomes.iter().map(|o| o.l.clone()).collect();
    let (tv_t, tv_s) = tv_bound_test(&l_paths, spec.epsilon, threshold);
    tests.push(tv_t);
    tests.push(tv_s);

    let base: Vec<(f64, f64)> = outcomes.iter().zip(&lt).map(|(o, &l)| (l, o.s_t)).collect();
    let tcfg = SimConfig { seed: tilted_seed(cfg.seed), ..*cfg };
    let tilted_law = PathLaw::new(&spec.tilted)?;
    let tilted: Vec<f64> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| Ok(tilted_law.simulate(&tcfg, i)?.terminal()))
        .collect::<Result<_>>()?;
    tests.extend(girsanov_from_samples(&base, &tilted, &TestFunction::ALL, threshold)?);

    let all_pass = tests.iter().all(|t| t.pass);
    Ok(VerificationReport { n_paths: cfg.n_paths, n_steps: cfg.n_steps, seed: cfg.seed, tests, all_pass })
}
