//! Jump measures: atoms plus closed-form density parts, optionally reweighted
//! by a stack of tilt layers.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{DensityKind, DensityPart};
use crate::error::{Error, Result};
use crate::interval::{Interval, Region, Span};
use crate::quadrature::QuadConfig;
use crate::weighting::Weighting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn region(self) -> Region {
        match self {
            Side::Positive => Interval::positive().into(),
            Side::Negative => Interval::negative().into(),
        }
    }
}

/// How the measure behaves at a finite support extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeBehavior {
    None,
    Atom,
    /// A density part ends at the edge with a strictly positive value.
    PositiveDensity,
    /// A density part ends at the edge with value zero.
    VanishingDensity,
    /// A tilt layer blows up at the edge.
    Singular,
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m.is_infinite() {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug)]
enum Repr {
    Base {
        atoms: Vec<(f64, f64)>,
        parts: Vec<Arc<DensityPart>>,
    },
    Tilted {
        inner: JumpMeasure,
        weighting: Arc<Weighting>,
        atoms: Vec<(f64, f64)>,
        log_pos: f64,
        log_neg: f64,
    },
}

/// A jump measure on `ℝ \ {0}`. Cheap to clone; immutable.
#[derive(Debug, Clone)]
pub struct JumpMeasure(Arc<Repr>);

impl Default for JumpMeasure {
    fn default() -> Self {
        Self::null()
    }
}

impl JumpMeasure {
    pub fn null() -> Self {
        Self(Arc::new(Repr::Base { atoms: Vec::new(), parts: Vec::new() }))
    }

    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::sum(atoms, Vec::new())
    }

    pub fn density(part: DensityPart) -> Result<Self> {
        Self::sum(&[], vec![part])
    }

    pub fn sum(atoms: &[(f64, f64)], parts: Vec<DensityPart>) -> Result<Self> {
        let mut list: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for &(x, w) in atoms {
            if !x.is_finite() || x == 0.0 {
                return Err(Error::InvalidParam(format!("atom location {x} must be finite and nonzero")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParam(format!("atom mass {w} must be finite and positive")));
            }
            list.push((x, w));
        }
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(list.len());
        for (x, w) in list {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let parts = parts.into_iter().map(trim_table).collect::<Result<Vec<_>>>()?;
        Ok(Self(Arc::new(Repr::Base { atoms: merged, parts: parts.into_iter().map(Arc::new).collect() })))
    }

    /// `Y · κ` for a single tilt layer `Y`.
    pub fn tilt(&self, weighting: Weighting) -> Result<Self> {
        let cfg = QuadConfig::default();
        let atoms = self
            .atoms()
            .iter()
            .map(|&(x, w)| Ok((x, (w.ln() + weighting.log_value_at(self, x, &cfg)?).exp())))
            .collect::<Result<Vec<_>>>()?;
        let log_pos = weighting.log_mass(self, &Side::Positive.region(), &cfg)?;
        let log_neg = weighting.log_mass(self, &Side::Negative.region(), &cfg)?;
        Ok(Self(Arc::new(Repr::Tilted {
            inner: self.clone(),
            weighting: Arc::new(weighting),
            atoms,
            log_pos,
            log_neg,
        })))
    }

    pub fn is_null(&self) -> bool {
        match &*self.0 {
            Repr::Base { atoms, parts } => atoms.is_empty() && parts.is_empty(),
            Repr::Tilted { inner, .. } => inner.is_null(),
        }
    }

    /// Atoms as `(location, mass)`, sorted by location.
    pub fn atoms(&self) -> &[(f64, f64)] {
        match &*self.0 {
            Repr::Base { atoms, .. } | Repr::Tilted { atoms, .. } => atoms,
        }
    }

    pub fn is_atomic(&self) -> bool {
        match &*self.0 {
            Repr::Base { parts, .. } => parts.is_empty(),
            Repr::Tilted { inner, .. } => inner.is_atomic(),
        }
    }

    pub fn has_atom_at(&self, x: f64) -> bool {
        self.atoms().iter().any(|a| a.0 == x)
    }

    pub fn side_log_mass(&self, side: Side) -> f64 {
        match &*self.0 {
            Repr::Base { atoms, parts } => {
                let r = side.region();
                let mut acc = f64::NEG_INFINITY;
                for &(x, w) in atoms {
                    if r.contains(x) {
                        acc = log_add(acc, w.ln());
                    }
                }
                for p in parts {
                    if (p.side() > 0.0) == (side == Side::Positive) {
                        let lm = if p.infinite_mass() {
                            f64::INFINITY
                        } else {
                            r.span_within(p.lo, p.hi).map_or(f64::NEG_INFINITY, |s| p.span_log_mass(&s))
                        };
                        acc = log_add(acc, lm);
                    }
                }
                acc
            }
            Repr::Tilted { log_pos, log_neg, .. } => match side {
                Side::Positive => *log_pos,
                Side::Negative => *log_neg,
            },
        }
    }

    pub fn side_mass(&self, side: Side) -> f64 {
        self.side_log_mass(side).exp()
    }

    /// `κ[ℝ]`, with `+∞` reported symbolically.
    pub fn total_mass(&self) -> f64 {
        log_add(self.side_log_mass(Side::Positive), self.side_log_mass(Side::Negative)).exp()
    }

    pub fn has_infinite_mass(&self) -> bool {
        self.total_mass() == f64::INFINITY
    }

    /// `ln κ[R]` for a region, exact at atoms according to the region's flags.
    pub fn log_mass_region(&self, r: &Region) -> Result<f64> {
        match &*self.0 {
            Repr::Base { atoms, parts } => {
                let mut acc = f64::NEG_INFINITY;
                for &(x, w) in atoms {
                    if r.contains(x) {
                        acc = log_add(acc, w.ln());
                    }
                }
                for p in parts {
                    if let Some(s) = r.span_within(p.lo, p.hi) {
                        acc = log_add(acc, p.span_log_mass(&s));
                    }
                }
                Ok(acc)
            }
            Repr::Tilted { inner, weighting, .. } => weighting.log_mass(inner, r, &QuadConfig::default()),
        }
    }

    pub fn mass_region(&self, r: &Region) -> Result<f64> {
        Ok(self.log_mass_region(r)?.exp())
    }

    pub fn interval_mass(&self, iv: &Interval) -> Result<f64> {
        self.mass_region(&(*iv).into())
    }

    /// `e^{log_scale} ∫_R f dκ`.
    pub fn integrate_region(
        &self,
        f: &dyn Fn(f64) -> f64,
        r: &Region,
        log_scale: f64,
        cfg: &QuadConfig,
    ) -> Result<f64> {
        match &*self.0 {
            Repr::Base { atoms, parts } => {
                let mut acc = 0.0;
                for &(x, w) in atoms {
                    if r.contains(x) {
                        let v = f(x);
                        if v != 0.0 {
                            acc += v * (w.ln() + log_scale).exp();
                        }
                    }
                }
                for p in parts {
                    if let Some(s) = r.span_within(p.lo, p.hi) {
                        acc += p.span_integrate(f, &s, log_scale, cfg)?;
                    }
                }
                Ok(acc)
            }
            Repr::Tilted { inner, weighting, .. } => weighting.integrate(inner, f, r, log_scale, cfg),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, iv: &Interval) -> Result<f64> {
        self.integrate_region(&f, &(*iv).into(), 0.0, &QuadConfig::default())
    }

    pub fn integrate_all(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.integrate(f, &Interval::all())
    }

    /// `(x_min, x_max)` of the support; `(+∞, −∞)` for the null measure.
    pub fn support_bounds(&self) -> (f64, f64) {
        match &*self.0 {
            Repr::Base { atoms, parts } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &(x, _) in atoms {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                for p in parts {
                    lo = lo.min(p.lo);
                    hi = hi.max(p.hi);
                }
                (lo, hi)
            }
            Repr::Tilted { inner, .. } => inner.support_bounds(),
        }
    }

    pub fn is_special(&self) -> bool {
        match &*self.0 {
            Repr::Base { parts, .. } => parts.iter().all(|p| p.is_special()),
            Repr::Tilted { inner, .. } => inner.is_special(),
        }
    }

    /// Behaviour at a finite nonzero point `e`, normally a support extreme.
    pub fn edge_behavior(&self, e: f64) -> EdgeBehavior {
        if self.has_atom_at(e) {
            return EdgeBehavior::Atom;
        }
        match &*self.0 {
            Repr::Base { parts, .. } => {
                let mut out = EdgeBehavior::None;
                for p in parts {
                    match p.edge_value(e) {
                        Some(v) if v > 0.0 => return EdgeBehavior::PositiveDensity,
                        Some(_) => out = EdgeBehavior::VanishingDensity,
                        None => {}
                    }
                }
                out
            }
            Repr::Tilted { inner, weighting, .. } => {
                if weighting.profile().is_some_and(|p| p.edge == e) {
                    EdgeBehavior::Singular
                } else {
                    inner.edge_behavior(e)
                }
            }
        }
    }

    /// Image under `x -> -x`.
    pub fn reflect(&self) -> JumpMeasure {
        match &*self.0 {
            Repr::Base { atoms, parts } => {
                let atoms = atoms.iter().rev().map(|&(x, w)| (-x, w)).collect();
                let parts = parts.iter().map(|p| Arc::new(p.reflect())).collect();
                Self(Arc::new(Repr::Base { atoms, parts }))
            }
            Repr::Tilted { inner, weighting, atoms, log_pos, log_neg } => Self(Arc::new(Repr::Tilted {
                inner: inner.reflect(),
                weighting: Arc::new(weighting.reflect()),
                atoms: atoms.iter().rev().map(|&(x, w)| (-x, w)).collect(),
                log_pos: *log_neg,
                log_neg: *log_pos,
            })),
        }
    }

    /// `inf{x > 0 : κ[(0, x]] ≥ m}` on the positive side, or
    /// `sup{x < 0 : κ[[x, 0)] ≥ m}` on the negative side.
    ///
    /// A side carrying infinite mass (necessarily accumulating at the origin
    /// for special measures) yields 0.
    pub fn lower_quantile(&self, side: Side, m: f64) -> Result<f64> {
        if side == Side::Negative {
            return Ok(-self.reflect().lower_quantile(Side::Positive, m)?);
        }
        if !(m > 0.0) || m.is_nan() {
            return Err(Error::InvalidParam(format!("quantile level {m} must be positive")));
        }
        let available = self.side_mass(Side::Positive);
        if available == f64::INFINITY {
            return Ok(0.0);
        }
        if available < m * (1.0 - 1e-12) {
            return Err(Error::InsufficientMass { requested: m, available });
        }
        if self.is_atomic() {
            let mut acc = 0.0;
            let pos: Vec<_> = self.atoms().iter().filter(|a| a.0 > 0.0).collect();
            for (i, &&(x, w)) in pos.iter().enumerate() {
                acc += w;
                if acc >= m || i == pos.len() - 1 {
                    return Ok(x);
                }
            }
        }
        let target = m.min(available);
        let cdf = |x: f64| self.interval_mass(&Interval::open_closed(0.0, x));
        let (_, x_max) = self.support_bounds();
        let mut hi = if x_max.is_finite() { x_max } else { 1.0 };
        while cdf(hi)? < target * (1.0 - 1e-13) {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::InsufficientMass { requested: m, available });
            }
        }
        let mut lo = 0.0;
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            if cdf(mid)? >= target * (1.0 - 1e-13) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if let Some(&(x, _)) = self.atoms().iter().find(|a| a.0 > lo && a.0 <= hi) {
            return Ok(x);
        }
        Ok(hi)
    }

    pub(crate) fn collect_pieces(&self, r: &Region, log_scale: f64, out: &mut Vec<(f64, Piece)>) -> Result<()> {
        match &*self.0 {
            Repr::Base { atoms, parts } => {
                for &(x, w) in atoms {
                    if r.contains(x) {
                        out.push((w.ln() + log_scale, Piece::Atom(x)));
                    }
                }
                for p in parts {
                    if let Some(s) = r.span_within(p.lo, p.hi) {
                        if p.infinite_mass() && s.width.is_infinite() {
                            return Err(Error::InfiniteActivity);
                        }
                        let lm = p.span_log_mass(&s);
                        if lm == f64::INFINITY {
                            return Err(Error::InfiniteActivity);
                        }
                        out.push((lm + log_scale, Piece::Span(p.clone(), s)));
                    }
                }
                Ok(())
            }
            Repr::Tilted { inner, weighting, .. } => weighting.collect_pieces(inner, r, log_scale, out),
        }
    }

    /// Sampler for the normalised restriction of the measure to `r`.
    pub fn sampler_region(&self, r: &Region) -> Result<Sampler> {
        let mut pieces = Vec::new();
        self.collect_pieces(r, 0.0, &mut pieces)?;
        Sampler::new(pieces)
    }

    /// Sampler for `κ / κ[ℝ]`; requires finite total mass.
    pub fn sampler(&self) -> Result<Sampler> {
        if self.has_infinite_mass() {
            return Err(Error::InfiniteActivity);
        }
        self.sampler_region(&Region::all())
    }
}

/// Normalise a table so that its support excludes zero-density end segments.
fn trim_table(p: DensityPart) -> Result<DensityPart> {
    let DensityKind::Table { xs, ys } = &p.kind else { return Ok(p) };
    let first = ys.iter().position(|&y| y > 0.0);
    let last = ys.iter().rposition(|&y| y > 0.0);
    let (Some(i), Some(j)) = (first, last) else {
        return Err(Error::InvalidParam("table density is identically zero".into()));
    };
    let i = i.saturating_sub(1);
    let j = (j + 1).min(xs.len() - 1);
    if i == 0 && j == xs.len() - 1 {
        return Ok(p);
    }
    let xs = xs[i..=j].to_vec();
    let ys = ys[i..=j].to_vec();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    DensityPart::new(DensityKind::Table { xs, ys }, lo, hi)
}

#[derive(Debug, Clone)]
pub(crate) enum Piece {
    Atom(f64),
    Span(Arc<DensityPart>, Span),
    /// The `I`-weighted part of an edge profile over its full cell.
    Profile { edge: f64, dir: f64, rho: f64, v_max: f64, reference: JumpMeasure },
}

/// Inverse-CDF sampler over a finite list of pieces.
#[derive(Debug, Clone)]
pub struct Sampler {
    pieces: Vec<Piece>,
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(weighted: Vec<(f64, Piece)>) -> Result<Self> {
        let top = weighted.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::InvalidParam("cannot sample from a null measure".into()));
        }
        if !top.is_finite() {
            return Err(Error::InfiniteActivity);
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(weighted.len());
        let mut pieces = Vec::with_capacity(weighted.len());
        for (lw, p) in weighted {
            acc += (lw - top).exp();
            cumulative.push(acc);
            pieces.push(p);
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        Ok(Self { pieces, cumulative })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.pieces.len() - 1);
        match &self.pieces[i] {
            Piece::Atom(x) => Ok(*x),
            Piece::Span(part, span) => Ok(part.sample_span(span, rng)),
            Piece::Profile { edge, dir, rho, v_max, reference } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let d = (v_max / u).exp() / rho;
                if d == 0.0 {
                    return Ok(*edge);
                }
                reference.sampler_region(&Region::edge(*edge, *dir, 0.0, d))?.sample(rng)
            }
        }
    }
}

/// Serialized form of a jump measure in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Atomic { atoms: Vec<AtomSpec> },
    Density {
        kind: DensityKindSpec,
        params: serde_json::Map<String, serde_json::Value>,
        support: [crate::extreal::Ext; 2],
        #[serde(default)]
        infinite_mass: Option<bool>,
    },
    Sum { parts: Vec<MeasureSpec> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKindSpec {
    Exponential,
    Uniform,
    Table,
    Power,
}

fn param_f64(params: &serde_json::Map<String, serde_json::Value>, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::Config(format!("density params: missing numeric field `{key}`")))
}

fn param_vec(params: &serde_json::Map<String, serde_json::Value>, key: &str) -> Result<Vec<f64>> {
    let arr = params
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Config(format!("density params: missing array field `{key}`")))?;
    arr.iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::Config(format!("density params: `{key}` must hold numbers"))))
        .collect()
}

impl MeasureSpec {
    fn collect(&self, atoms: &mut Vec<(f64, f64)>, parts: &mut Vec<DensityPart>) -> Result<()> {
        match self {
            MeasureSpec::Atomic { atoms: list } => {
                atoms.extend(list.iter().map(|a| (a.x, a.w)));
            }
            MeasureSpec::Density { kind, params, support, infinite_mass } => {
                let (lo, hi) = (support[0].0, support[1].0);
                let kind = match kind {
                    DensityKindSpec::Exponential => DensityKind::Exponential {
                        scale: param_f64(params, "scale").unwrap_or(1.0),
                        rate: param_f64(params, "rate")?,
                    },
                    DensityKindSpec::Uniform => DensityKind::Uniform { height: param_f64(params, "height")? },
                    DensityKindSpec::Power => DensityKind::Power {
                        coef: param_f64(params, "coef")?,
                        exponent: param_f64(params, "exponent")?,
                    },
                    DensityKindSpec::Table => DensityKind::Table { xs: param_vec(params, "xs")?, ys: param_vec(params, "ys")? },
                };
                let part = DensityPart::new(kind, lo, hi).map_err(|e| Error::Config(e.to_string()))?;
                if let Some(flag) = infinite_mass {
                    if *flag != part.infinite_mass() {
                        return Err(Error::Config(format!(
                            "infinite_mass = {flag} contradicts the density on [{lo}, {hi}]"
                        )));
                    }
                }
                parts.push(part);
            }
            MeasureSpec::Sum { parts: list } => {
                for p in list {
                    p.collect(atoms, parts)?;
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<JumpMeasure> {
        let mut atoms = Vec::new();
        let mut parts = Vec::new();
        self.collect(&mut atoms, &mut parts)?;
        JumpMeasure::sum(&atoms, parts).map_err(|e| match e {
            Error::InvalidParam(s) => Error::Config(s),
            other => other,
        })
    }
}
