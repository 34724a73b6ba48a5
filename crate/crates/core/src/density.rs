//! Density components of a jump measure with closed-form masses.
//!
//! Every part lives on one side of the origin. Masses are evaluated on
//! [`Span`]s (start point, direction, width) so that stretches adjacent to a
//! support edge keep full relative precision.

use rand::Rng;

use crate::error::{Error, Result};
use crate::interval::Span;
use crate::quadrature::{integrate, QuadConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// `scale * rate * exp(-rate * |x|)`
    Exponential { scale: f64, rate: f64 },
    /// Constant `height`.
    Uniform { height: f64 },
    /// `coef * |x|^(-exponent)`
    Power { coef: f64, exponent: f64 },
    /// Piecewise-linear interpolation through `(xs[i], ys[i])`.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityPart {
    pub kind: DensityKind,
    pub lo: f64,
    pub hi: f64,
}

fn log_expm1(x: f64) -> f64 {
    if x > 30.0 { x + (-(-x).exp_m1()).ln() } else { x.exp_m1().ln() }
}

/// `∫_p^q s^{-a} ds` for `0 <= p <= q <= ∞`, evaluated from the lower end and
/// the width so that narrow stretches keep their precision.
fn power_integral(p: f64, width: f64, a: f64) -> f64 {
    if width == 0.0 {
        return 0.0;
    }
    if p == 0.0 {
        if a < 1.0 && width.is_finite() {
            return width.powf(1.0 - a) / (1.0 - a);
        }
        return f64::INFINITY;
    }
    if width.is_infinite() {
        return if a > 1.0 { p.powf(1.0 - a) / (a - 1.0) } else { f64::INFINITY };
    }
    let l = (width / p).ln_1p();
    if a == 1.0 {
        l
    } else {
        p.powf(1.0 - a) * ((1.0 - a) * l).exp_m1() / (1.0 - a)
    }
}

impl DensityPart {
    pub fn new(kind: DensityKind, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParam(format!("density support [{lo}, {hi}] is empty")));
        }
        if lo < 0.0 && hi > 0.0 {
            return Err(Error::InvalidParam("density support must not contain the origin".into()));
        }
        match &kind {
            DensityKind::Exponential { scale, rate } => {
                if !(*scale > 0.0 && *rate > 0.0) {
                    return Err(Error::InvalidParam("exponential density needs scale > 0 and rate > 0".into()));
                }
            }
            DensityKind::Uniform { height } => {
                if !(*height > 0.0) || !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidParam("uniform density needs height > 0 and bounded support".into()));
                }
            }
            DensityKind::Power { coef, exponent } => {
                if !(*coef > 0.0) || !exponent.is_finite() {
                    return Err(Error::InvalidParam("power density needs coef > 0 and finite exponent".into()));
                }
            }
            DensityKind::Table { xs, ys } => {
                if xs.len() < 2 || xs.len() != ys.len() {
                    return Err(Error::InvalidParam("table density needs >= 2 knots with matching values".into()));
                }
                if xs.windows(2).any(|w| !(w[0] < w[1])) || ys.iter().any(|y| !(*y >= 0.0) || !y.is_finite()) {
                    return Err(Error::InvalidParam("table knots must increase and values be finite, >= 0".into()));
                }
                if xs[0] != lo || xs[xs.len() - 1] != hi {
                    return Err(Error::InvalidParam("table support must match its first and last knot".into()));
                }
            }
        }
        Ok(Self { kind, lo, hi })
    }

    pub fn side(&self) -> f64 {
        if self.hi <= 0.0 { -1.0 } else { 1.0 }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi || x == 0.0 {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Exponential { scale, rate } => scale * rate * (-rate * x.abs()).exp(),
            DensityKind::Uniform { height } => *height,
            DensityKind::Power { coef, exponent } => coef * x.abs().powf(-exponent),
            DensityKind::Table { xs, ys } => table_value(xs, ys, x),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi || x == 0.0 {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            DensityKind::Exponential { scale, rate } => (scale * rate).ln() - rate * x.abs(),
            DensityKind::Power { coef, exponent } => coef.ln() - exponent * x.abs().ln(),
            _ => self.density(x).ln(),
        }
    }

    /// Density value at a support endpoint, or `None` if `e` is not one.
    pub fn edge_value(&self, e: f64) -> Option<f64> {
        if e != self.lo && e != self.hi {
            return None;
        }
        match &self.kind {
            DensityKind::Table { ys, .. } => Some(if e == self.lo { ys[0] } else { ys[ys.len() - 1] }),
            _ => Some(self.density(e)),
        }
    }

    /// Whether the part carries infinite mass.
    pub fn infinite_mass(&self) -> bool {
        match &self.kind {
            DensityKind::Power { exponent, .. } => {
                let near0 = self.lo == 0.0 || self.hi == 0.0;
                let far = self.lo.is_infinite() || self.hi.is_infinite();
                (near0 && *exponent >= 1.0) || (far && *exponent <= 1.0)
            }
            DensityKind::Uniform { .. } | DensityKind::Table { .. } => false,
            DensityKind::Exponential { .. } => false,
        }
    }

    /// Closed-form test of `∫ (|x| ∧ x²) dκ < ∞` for this part.
    pub fn is_special(&self) -> bool {
        match &self.kind {
            DensityKind::Power { exponent, .. } => {
                let near0 = self.lo == 0.0 || self.hi == 0.0;
                let far = self.lo.is_infinite() || self.hi.is_infinite();
                !(near0 && *exponent >= 3.0) && !(far && *exponent <= 2.0)
            }
            _ => true,
        }
    }

    /// `(|start|, outward)`: distance of the span start from the origin and
    /// whether the span moves away from it.
    fn radial(&self, span: &Span) -> (f64, bool) {
        let a = span.start.abs();
        let outward = if span.start == 0.0 { true } else { span.start.signum() * span.dir > 0.0 };
        (a, outward)
    }

    pub fn span_mass(&self, span: &Span) -> f64 {
        if span.width <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform { height } => height * span.width,
            DensityKind::Exponential { .. } | DensityKind::Power { .. } => self.span_log_mass(span).exp(),
            DensityKind::Table { xs, ys } => table_span_mass(xs, ys, span),
        }
    }

    pub fn span_log_mass(&self, span: &Span) -> f64 {
        if span.width <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            DensityKind::Exponential { scale, rate } => {
                let (a, outward) = self.radial(span);
                let w = span.width;
                if outward {
                    scale.ln() - rate * a + (-(-rate * w).exp_m1()).ln()
                } else {
                    scale.ln() - rate * a + log_expm1(rate * w)
                }
            }
            DensityKind::Power { coef, exponent } => {
                let (a, outward) = self.radial(span);
                let w = span.width;
                let v = if outward {
                    power_integral(a, w, *exponent)
                } else {
                    let p = (a - w).max(0.0);
                    power_integral(p, a - p, *exponent)
                };
                coef.ln() + v.ln()
            }
            DensityKind::Table { xs, ys } => table_span_log_mass(xs, ys, span),
            DensityKind::Uniform { height } => height.ln() + span.width.ln(),
        }
    }

    /// `e^{log_scale} ∫_span f dκ_part`.
    pub fn span_integrate(
        &self,
        f: &dyn Fn(f64) -> f64,
        span: &Span,
        log_scale: f64,
        cfg: &QuadConfig,
    ) -> Result<f64> {
        if span.width <= 0.0 {
            return Ok(0.0);
        }
        if let DensityKind::Power { coef, exponent } = &self.kind {
            let (a, outward) = self.radial(span);
            let (p, q) = if outward { (a, a + span.width) } else { ((a - span.width).max(0.0), a) };
            if p == 0.0 || q.is_infinite() {
                return self.power_log_integrate(f, p, q, *coef, *exponent, log_scale, cfg);
            }
        }
        if let DensityKind::Table { xs, ys } = &self.kind {
            // Density from the offset, not from the rounded point, so a
            // density vanishing at the edge stays smooth in the offset.
            let mut acc = 0.0;
            for (ta, w, fa, k) in table_pieces(xs, ys, span) {
                let g = |s: f64| {
                    let d = fa + k * s;
                    if !(d > 0.0) {
                        return 0.0;
                    }
                    let v = f(span.point(ta + s));
                    if v == 0.0 { 0.0 } else { v * (d.ln() + log_scale).exp() }
                };
                acc += integrate(g, 0.0, w, cfg)?.value;
            }
            return Ok(acc);
        }
        let g = |t: f64| {
            let x = span.point(t);
            let ld = self.log_density(x);
            if ld == f64::NEG_INFINITY {
                return 0.0;
            }
            let v = f(x);
            if v == 0.0 { 0.0 } else { v * (ld + log_scale).exp() }
        };
        Ok(integrate(g, 0.0, span.width, cfg)?.value)
    }

    /// Power parts reaching 0 or ∞ are integrated in `u = ln|x|`, where the
    /// integrand decays exponentially; divergence is classified from the
    /// local growth exponent of `f`.
    #[allow(clippy::too_many_arguments)]
    fn power_log_integrate(
        &self,
        f: &dyn Fn(f64) -> f64,
        p: f64,
        q: f64,
        coef: f64,
        exponent: f64,
        log_scale: f64,
        cfg: &QuadConfig,
    ) -> Result<f64> {
        let side = self.side();
        let local_exponent = |s1: f64, s2: f64| -> Option<(f64, f64)> {
            let f1 = f(side * s1);
            let f2 = f(side * s2);
            if f1 == 0.0 || f2 == 0.0 || !f1.is_finite() || !f2.is_finite() {
                return None;
            }
            Some(((f1.abs() / f2.abs()).ln() / (s1 / s2).ln(), f2.signum()))
        };
        if p == 0.0 && exponent >= 1.0 {
            let base = q.min(1.0);
            if let Some((k, sign)) = local_exponent(base * 1e-7, base * 1e-9) {
                if k - exponent <= -1.0 + 1e-3 {
                    return Ok(sign * f64::INFINITY);
                }
            }
        }
        if q.is_infinite() && exponent <= 2.0 {
            let base = p.max(1.0);
            if let Some((k, sign)) = local_exponent(base * 1e9, base * 1e7) {
                if k - exponent >= -1.0 - 1e-3 {
                    return Ok(sign * f64::INFINITY);
                }
            }
        }
        let lo = if p == 0.0 { f64::NEG_INFINITY } else { p.ln() };
        let hi = q.ln();
        let lc = coef.ln() + log_scale;
        let g = |u: f64| {
            let x = side * u.exp();
            let v = f(x);
            if v == 0.0 { 0.0 } else { v * (lc + (1.0 - exponent) * u).exp() }
        };
        Ok(integrate(g, lo, hi, cfg)?.value)
    }

    /// Draws a point from the part restricted to `span`, given `u ∈ (0, 1)`.
    pub fn sample_span<R: Rng + ?Sized>(&self, span: &Span, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let t = match &self.kind {
            DensityKind::Uniform { .. } => u * span.width,
            DensityKind::Exponential { rate, .. } => {
                let (_, outward) = self.radial(span);
                if outward {
                    -(u * (-rate * span.width).exp_m1()).ln_1p() / rate
                } else {
                    (u * (rate * span.width).exp_m1()).ln_1p() / rate
                }
            }
            DensityKind::Power { exponent, .. } => {
                let (a, outward) = self.radial(span);
                let (p, q) = if outward { (a, a + span.width) } else { ((a - span.width).max(0.0), a) };
                let r = sample_power_radius(p, q, *exponent, u);
                if outward { r - p } else { a - r }
            }
            DensityKind::Table { xs, ys } => table_sample(xs, ys, span, u),
        };
        span.point(t.clamp(0.0, span.width))
    }

    pub fn reflect(&self) -> DensityPart {
        let kind = match &self.kind {
            DensityKind::Table { xs, ys } => DensityKind::Table {
                xs: xs.iter().rev().map(|x| -x).collect(),
                ys: ys.iter().rev().copied().collect(),
            },
            k => k.clone(),
        };
        DensityPart { kind, lo: -self.hi, hi: -self.lo }
    }
}

fn sample_power_radius(p: f64, q: f64, a: f64, u: f64) -> f64 {
    if a == 1.0 {
        return p * (q / p).powf(u);
    }
    let e = 1.0 - a;
    if q.is_infinite() {
        // a > 1
        return p * (1.0 - u).powf(1.0 / e);
    }
    let pe = if p == 0.0 { 0.0 } else { p.powf(e) };
    let target = pe + u * (q.powf(e) - pe);
    target.powf(1.0 / e).clamp(p, q)
}

fn table_value(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&k| k <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

/// Pieces `(t_a, width, f_a, slope along dir)` of a span split at table knots.
fn table_pieces(xs: &[f64], ys: &[f64], span: &Span) -> Vec<(f64, f64, f64, f64)> {
    let mut cuts: Vec<f64> = xs
        .iter()
        .map(|&k| span.dir * (k - span.start))
        .filter(|&t| t > 0.0 && t < span.width)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut ta = 0.0;
    for tb in cuts.into_iter().chain(std::iter::once(span.width)) {
        if tb > ta {
            let xa = span.point(ta);
            let xm = span.point(0.5 * (ta + tb));
            let i = xs.partition_point(|&k| k <= xm).clamp(1, xs.len() - 1) - 1;
            let slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            let fa = if ta == 0.0 { table_value(xs, ys, xa) } else { ys[i] + slope * (xa - xs[i]) };
            out.push((ta, tb - ta, fa.max(0.0), span.dir * slope));
        }
        ta = tb;
    }
    out
}

fn table_span_mass(xs: &[f64], ys: &[f64], span: &Span) -> f64 {
    table_pieces(xs, ys, span).iter().map(|&(_, w, fa, k)| (fa * w + 0.5 * k * w * w).max(0.0)).sum()
}

/// Log of [`table_span_mass`], kept finite for spans whose linear mass
/// underflows.
fn table_span_log_mass(xs: &[f64], ys: &[f64], span: &Span) -> f64 {
    table_pieces(xs, ys, span)
        .iter()
        .map(|&(_, w, fa, k)| {
            let avg = fa + 0.5 * k * w;
            if avg > 0.0 { w.ln() + avg.ln() } else { f64::NEG_INFINITY }
        })
        .fold(f64::NEG_INFINITY, crate::jump_measure::log_add)
}

fn table_sample(xs: &[f64], ys: &[f64], span: &Span, u: f64) -> f64 {
    let pieces = table_pieces(xs, ys, span);
    let masses: Vec<f64> = pieces.iter().map(|&(_, w, fa, k)| (fa * w + 0.5 * k * w * w).max(0.0)).collect();
    let total: f64 = masses.iter().sum();
    let mut target = u * total;
    for (i, &(ta, w, fa, k)) in pieces.iter().enumerate() {
        if target <= masses[i] || i == pieces.len() - 1 {
            let disc = (fa * fa + 2.0 * k * target).max(0.0);
            let denom = fa + disc.sqrt();
            let t = if denom > 0.0 { 2.0 * target / denom } else { 0.0 };
            return ta + t.min(w);
        }
        target -= masses[i];
    }
    span.width
}
