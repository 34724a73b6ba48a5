//! Growth rate `g(p)`, its derivative `∇g(p)`, relative rates and the
//! growth-optimal fraction `p̃`.

use serde::{Deserialize, Serialize};

use crate::characteristics::{edge_at, PartitionCase, SupportInterval, Triplet};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::jump_measure::EdgeBehavior;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Tolerance on `|∇g(p̃)|` used for the first-order diagnostic.
    pub tol: f64,
    /// Cap for geometric bracket expansion on unbounded intervals.
    pub p_max: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, p_max: 1e8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalFraction {
    #[serde(with = "crate::extreal")]
    pub p: f64,
    #[serde(with = "crate::extreal")]
    pub dg_l: f64,
    #[serde(with = "crate::extreal")]
    pub dg_r: f64,
    #[serde(with = "crate::extreal::opt")]
    pub dg_at_p: Option<f64>,
    pub first_order: bool,
}

fn log_integrand(p: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let px = p * x;
        px - px.ln_1p()
    }
}

fn derivative_integrand(p: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| p * x * x / (1.0 + p * x)
}

/// `g(p)`; `−∞` outside `I` and at endpoints where the log-integral diverges.
pub fn growth(t: &Triplet, p: f64) -> Result<f64> {
    let b = t.bounds();
    if !b.contains(p) {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == b.r || p == b.l {
        let e = edge_at(&t.kappa, p);
        if matches!(t.kappa.edge_behavior(e), EdgeBehavior::Atom | EdgeBehavior::Singular) {
            return Ok(f64::NEG_INFINITY);
        }
    }
    let j = t.kappa.integrate_all(log_integrand(p))?;
    Ok(p * t.a - 0.5 * t.c * p * p - j)
}

/// `∇g` at `p ∈ ℝ`, extended constantly outside `I`.
pub fn growth_derivative(t: &Triplet, p: f64) -> Result<f64> {
    let b = t.bounds();
    if b.case() == PartitionCase::P8 {
        return Ok(0.0);
    }
    if p <= b.l {
        return endpoint_derivative(t, &b, b.l);
    }
    if p >= b.r {
        return endpoint_derivative(t, &b, b.r);
    }
    interior_derivative(t, p)
}

fn interior_derivative(t: &Triplet, p: f64) -> Result<f64> {
    if p == 0.0 {
        return Ok(t.a);
    }
    let j = t.kappa.integrate_all(derivative_integrand(p))?;
    Ok(t.a - p * t.c - j)
}

/// `∇g(ℓ)` or `∇g(r)` including the infinite-endpoint limits.
fn endpoint_derivative(t: &Triplet, b: &SupportInterval, p: f64) -> Result<f64> {
    if p.is_infinite() {
        let sign = p.signum();
        if t.c > 0.0 {
            return Ok(-sign * f64::INFINITY);
        }
        let iv = if sign > 0.0 { Interval::positive() } else { Interval::negative() };
        let mean = t.kappa.integrate(|x| x, &iv)?;
        let v = t.a - mean;
        return Ok(if v.is_nan() { -sign * f64::INFINITY } else { v });
    }
    if p == 0.0 {
        return Ok(t.a);
    }
    let e = edge_at(&t.kappa, p);
    let sign = if p == b.r { -1.0 } else { 1.0 };
    match t.kappa.edge_behavior(e) {
        EdgeBehavior::Atom | EdgeBehavior::Singular | EdgeBehavior::PositiveDensity => Ok(sign * f64::INFINITY),
        EdgeBehavior::VanishingDensity | EdgeBehavior::None => interior_derivative(t, p),
    }
}

/// `∇g(ℓ)` and `∇g(r)`.
pub fn endpoint_derivatives(t: &Triplet) -> Result<(f64, f64)> {
    let b = t.bounds();
    if b.case() == PartitionCase::P8 {
        return Ok((0.0, 0.0));
    }
    Ok((endpoint_derivative(t, &b, b.l)?, endpoint_derivative(t, &b, b.r)?))
}

/// `rel(p | p′) = (p − p′) ∇g(p′)`.
pub fn rel_rate(t: &Triplet, p: f64, p_ref: f64) -> Result<f64> {
    if p == p_ref {
        return Ok(0.0);
    }
    let d = growth_derivative(t, p_ref)?;
    if !d.is_finite() {
        return Err(Error::DivergentIntegral(format!("∇g is infinite at p' = {p_ref}")));
    }
    Ok((p - p_ref) * d)
}

/// `p̃ = inf{p ∈ I : ∇g(p) ≤ 0}` with the boundary conventions.
pub fn optimal_fraction(t: &Triplet, opts: &SolverOptions) -> Result<OptimalFraction> {
    let b = t.bounds();
    let (dg_l, dg_r) = endpoint_derivatives(t)?;
    let done = |p: f64, dg_at_p: Option<f64>| {
        let first_order = dg_at_p.is_some_and(|d| d.abs() <= opts.tol);
        OptimalFraction { p, dg_l, dg_r, dg_at_p, first_order }
    };
    if b.case() == PartitionCase::P8 || (dg_l == 0.0 && dg_r == 0.0) {
        return Ok(done(0.0, Some(0.0)));
    }
    if dg_l <= 0.0 {
        return Ok(done(b.l, Some(dg_l)));
    }
    if dg_r > 0.0 {
        return Ok(done(b.r, Some(dg_r)));
    }
    let dg = |p: f64| growth_derivative(t, p);
    let (mut lo, mut hi) = if b.contains(0.0) && t.a > 0.0 { (0.0, f64::NAN) } else { (f64::NAN, 0.0) };
    if hi.is_nan() {
        hi = if b.r.is_finite() { b.r } else { 1.0 };
        while dg(hi)? > 0.0 {
            if hi >= b.r {
                break;
            }
            lo = hi;
            hi = (hi * 4.0).min(b.r);
            if hi > opts.p_max {
                return Err(Error::BracketFailure { last_lo: lo, last_hi: hi });
            }
        }
    } else {
        lo = if b.l.is_finite() { b.l } else { -1.0 };
        while dg(lo)? <= 0.0 {
            if lo <= b.l {
                break;
            }
            hi = lo;
            lo = (lo * 4.0).max(b.l);
            if -lo > opts.p_max {
                return Err(Error::BracketFailure { last_lo: lo, last_hi: hi });
            }
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) || hi - lo <= 1e-15 * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
        if dg(mid)? <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let at = dg(hi)?;
    Ok(done(hi, Some(at)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: f64,
    #[serde(with = "crate::extreal")]
    pub g: f64,
    #[serde(with = "crate::extreal")]
    pub dg: f64,
}

/// A finite window of `I` around `center` used for grids and curve dumps.
pub fn window(b: &SupportInterval, center: f64) -> (f64, f64) {
    let c = if center.is_finite() { center } else { 0.0 };
    let s = c.abs().max(1.0);
    let lo = if b.l.is_finite() { b.l } else { c - 2.0 * s };
    let hi = if b.r.is_finite() { b.r } else { c + 2.0 * s };
    (lo, hi)
}

/// `n` equally spaced samples of `(p, g, ∇g)` over `[lo, hi]`.
pub fn growth_curve(t: &Triplet, lo: f64, hi: f64, n: usize) -> Result<Vec<CurvePoint>> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let p = if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            Ok(CurvePoint { p, g: growth(t, p)?, dg: growth_derivative(t, p)? })
        })
        .collect()
}
