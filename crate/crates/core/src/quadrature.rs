//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Subintervals are kept in a max-heap keyed by their error estimate and the
//! worst one is bisected until the summed estimate meets
//! `max(abs_tol, rel_tol * |result|)` or the subdivision budget runs out.
//! Semi-infinite ranges are mapped onto `[0, 1)` with `x = a + t / (1 - t)`,
//! so nodes concentrate near finite endpoints where integrands with
//! integrable singularities need them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_subdivisions: 4000,
        }
    }
}

impl QuadConfig {
    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        fv1[j] = f(center - dx);
        fv2[j] = f(center + dx);
        resk += WGK[j] * (fv1[j] + fv2[j]);
        if j % 2 == 1 {
            resg += WG[j / 2] * (fv1[j] + fv2[j]);
        }
    }
    let value = resk * half;
    let mut error = ((resk - resg) * half).abs();
    if !value.is_finite() || !error.is_finite() {
        return (value, f64::INFINITY);
    }
    // QUADPACK-style sharpening of the raw Gauss/Kronrod difference.
    let mean = resk * 0.5;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let asc = asc * half.abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    (value, error)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (v0, e0) = kronrod(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v0, error: e0 });
    let mut total = v0;
    let mut total_err = e0;
    // Segments too narrow to split further are parked here.
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let mut splits = 0;
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if splits >= cfg.max_subdivisions {
            return Err(Error::QuadratureFailure { lo: a, hi: b, tol: target, estimate: total_err });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a.min(seg.b) && mid < seg.a.max(seg.b)) {
            frozen_value += seg.value;
            frozen_err += seg.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod(f, seg.a, mid);
        let (v2, e2) = kronrod(f, mid, seg.b);
        splits += 1;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        // Recompute sums from scratch to avoid drift from repeated updates.
        total = frozen_value;
        total_err = frozen_err;
        for s in heap.iter() {
            total += s.value;
            total_err += s.error;
        }
    }
    let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
    if !total.is_finite() || total_err > target {
        return Err(Error::QuadratureFailure { lo: a, hi: b, tol: target, estimate: total_err });
    }
    Ok(Estimate { value: total, error: total_err })
}

/// Integrates `f` over `[lo, hi]`; either end may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<Estimate> {
    integrate_dyn(&f, lo, hi, cfg)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<Estimate> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidParam("NaN integration bound".into()));
    }
    if lo > hi {
        let e = integrate_dyn(f, hi, lo, cfg)?;
        return Ok(Estimate { value: -e.value, error: e.error });
    }
    if lo == hi {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adaptive(&f, lo, hi, cfg),
        (true, false) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                let x = lo + t / s;
                let v = f(x) / (s * s);
                if v.is_finite() { v } else if x.is_infinite() { 0.0 } else { v }
            };
            adaptive(&g, 0.0, 1.0, cfg)
        }
        (false, true) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                let x = hi - t / s;
                let v = f(x) / (s * s);
                if v.is_finite() { v } else if x.is_infinite() { 0.0 } else { v }
            };
            adaptive(&g, 0.0, 1.0, cfg)
        }
        (false, false) => {
            let half = QuadConfig { abs_tol: cfg.abs_tol * 0.5, ..*cfg };
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, &half)?;
            let right = integrate_dyn(f, 0.0, f64::INFINITY, &half)?;
            Ok(Estimate { value: left.value + right.value, error: left.error + right.error })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        integrate(f, a, b, &QuadConfig::default()).unwrap().value
    }

    #[test]
    fn polynomial_exact() {
        assert!((q(|x| x * x, 0.0, 3.0) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        assert!((q(|x| (-x).exp(), 0.0, f64::INFINITY) - 1.0).abs() < 1e-11);
        assert!((q(|x| x.exp(), f64::NEG_INFINITY, 0.0) - 1.0).abs() < 1e-11);
        let g = q(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn endpoint_log_singularity() {
        // ∫_0^1 ln x dx = -1
        assert!((q(|x| x.ln(), 0.0, 1.0) + 1.0).abs() < 1e-10);
        // ∫_0^1 x^{-1/2} dx = 2
        assert!((q(|x| 1.0 / x.sqrt(), 0.0, 1.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_negate() {
        assert!((q(|x| x, 1.0, 0.0) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn divergent_integral_fails() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, &QuadConfig::default());
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
