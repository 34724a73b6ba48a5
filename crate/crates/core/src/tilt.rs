//! The tilt field `Y` and the tilted triplet `(a^Y, c, κ^Y)`.
//!
//! A field is a stack of at most two layers. Each layer is built against the
//! measure produced by the layers before it, and `Y` is their pointwise
//! product.

use serde::{Deserialize, Serialize};

use crate::characteristics::{bounds, edge_at, PartitionCase, Triplet};
use crate::error::{Error, Result};
use crate::growth::endpoint_derivatives;
use crate::interval::{Interval, Region};
use crate::jump_measure::{JumpMeasure, Side};
use crate::quadrature::QuadConfig;
use crate::weighting::{intersect, ln_abs_exp_m1, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Y1,
    Y2,
    Y3,
    Y4,
}

impl LayerKind {
    fn mirror(self) -> Self {
        match self {
            LayerKind::Y1 => LayerKind::Y2,
            LayerKind::Y2 => LayerKind::Y1,
            LayerKind::Y3 => LayerKind::Y4,
            LayerKind::Y4 => LayerKind::Y3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// The additive constant outside the singular cell of `y3`/`y4`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub kind: LayerKind,
    pub eta: f64,
    pub params: LayerParams,
    pub weighting: Weighting,
    /// The measure this layer was built against.
    pub reference: JumpMeasure,
}

impl Layer {
    fn identity(kind: LayerKind, eta: f64, reference: &JumpMeasure) -> Self {
        Self { kind, eta, params: LayerParams::default(), weighting: Weighting::identity(), reference: reference.clone() }
    }

    pub fn is_identity(&self) -> bool {
        self.weighting.is_identity()
    }

    pub fn reflect(&self) -> Self {
        Self {
            kind: self.kind.mirror(),
            eta: self.eta,
            params: self.params,
            weighting: self.weighting.reflect(),
            reference: self.reference.reflect(),
        }
    }

    pub fn log_value(&self, x: f64) -> Result<f64> {
        self.weighting.log_value_at(&self.reference, x, &QuadConfig::default())
    }
}

/// `y1(a, κ, η)`: lifts a negative drift on `{ℓ = 0, r = ∞}`.
///
/// The quantile level uses the positive-side mass, which coincides with
/// `κ[ℝ]` when κ has no negative support.
pub fn y1(a: f64, kappa: &JumpMeasure, eta: f64) -> Result<Layer> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParam(format!("tilt budget η = {eta} must be positive")));
    }
    if a >= 0.0 {
        return Ok(Layer::identity(LayerKind::Y1, eta, kappa));
    }
    let m_pos = kappa.side_mass(Side::Positive);
    if !(m_pos > 0.0) {
        return Err(Error::InsufficientMass { requested: f64::MIN_POSITIVE, available: m_pos });
    }
    let q = kappa.lower_quantile(Side::Positive, m_pos / 2.0)?;
    let delta = 1.0 + 4.0 / m_pos + q;
    let sb = delta - a + 2.0 / eta;
    let b = sb * sb;
    let lm_tail = kappa.log_mass_region(&Interval::open(b, f64::INFINITY).into())?;
    if lm_tail == f64::NEG_INFINITY {
        return Err(Error::InsufficientMass { requested: f64::MIN_POSITIVE, available: 0.0 });
    }
    let lv_tail = -sb.ln() - lm_tail;
    let cells = if kappa.has_infinite_mass() {
        vec![(Interval::open_closed(f64::NEG_INFINITY, b), 0.0), (Interval::open(b, f64::INFINITY), lv_tail)]
    } else {
        let m_low = kappa.interval_mass(&Interval::open_closed(0.0, delta))?;
        let lv_low = (-1.0 / (sb * m_low)).ln_1p();
        vec![
            (Interval::open_closed(f64::NEG_INFINITY, 0.0), 0.0),
            (Interval::open_closed(0.0, delta), lv_low),
            (Interval::open_closed(delta, b), 0.0),
            (Interval::open(b, f64::INFINITY), lv_tail),
        ]
    };
    Ok(Layer {
        kind: LayerKind::Y1,
        eta,
        params: LayerParams { delta: Some(delta), b: Some(b), ..Default::default() },
        weighting: Weighting::piecewise(cells),
        reference: kappa.clone(),
    })
}

/// `y2(a, κ, η; x) = y1(−a, κ∘(−·), η; −x)`.
pub fn y2(a: f64, kappa: &JumpMeasure, eta: f64) -> Result<Layer> {
    Ok(y1(-a, &kappa.reflect(), eta)?.reflect())
}

/// `y3(a, κ, η)`: makes `∇g(r) = −∞` on `{ℓ = −∞, 0 < r < ∞}`-type edges.
pub fn y3(_a: f64, kappa: &JumpMeasure, eta: f64) -> Result<Layer> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParam(format!("tilt budget η = {eta} must be positive")));
    }
    let r = bounds(kappa).r;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParam(format!("y3 needs a finite positive r, got {r}")));
    }
    let edge = edge_at(kappa, r);
    if kappa.has_atom_at(edge) {
        return Ok(Layer::identity(LayerKind::Y3, eta, kappa));
    }
    let m = kappa.total_mass();
    let beta = (0.5f64).min((-2.0 * r / m).exp()).min((-2.0 * r / eta).exp()) / r;
    let probe = Weighting::with_profile(edge, 1.0, r, beta, 0.0, 0.0);
    let v_max = probe.profile().map(|p| p.v_max).unwrap_or(f64::NAN);
    let constant = if m.is_finite() { r / (m * v_max) } else { 0.0 };
    let lv = constant.ln_1p();
    Ok(Layer {
        kind: LayerKind::Y3,
        eta,
        params: LayerParams { beta: Some(beta), constant: Some(constant), ..Default::default() },
        weighting: Weighting::with_profile(edge, 1.0, r, beta, lv, lv),
        reference: kappa.clone(),
    })
}

/// Mirror of [`y3`] at the edge `−1/ℓ`.
pub fn y4(a: f64, kappa: &JumpMeasure, eta: f64) -> Result<Layer> {
    Ok(y3(-a, &kappa.reflect(), eta)?.reflect())
}

#[derive(Debug, Clone)]
pub struct TiltField {
    pub case: PartitionCase,
    pub eta: f64,
    pub layers: Vec<Layer>,
    pub base: JumpMeasure,
    pub tilted: JumpMeasure,
    /// `∫ x (Y − 1) dκ`.
    pub drift_shift: f64,
}

impl TiltField {
    pub fn identity(case: PartitionCase, eta: f64, kappa: &JumpMeasure) -> Self {
        Self { case, eta, layers: Vec::new(), base: kappa.clone(), tilted: kappa.clone(), drift_shift: 0.0 }
    }

    /// Stacks `layer` (built against the current tilted measure) on top.
    fn push(&mut self, layer: Layer) -> Result<()> {
        if !layer.is_identity() {
            let cfg = QuadConfig::default();
            self.drift_shift += layer.weighting.deviation_integral(&layer.reference, &|x| x, &cfg)?;
            self.tilted = self.tilted.tilt(layer.weighting.clone())?;
        }
        self.layers.push(layer);
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.layers.iter().all(Layer::is_identity)
    }

    pub fn is_composed(&self) -> bool {
        self.layers.len() > 1
    }

    pub fn log_evaluate(&self, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for l in &self.layers {
            if !l.is_identity() {
                acc += l.log_value(x)?;
            }
        }
        Ok(acc)
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.log_evaluate(x)?.exp())
    }

    /// `1/2` for single-layer fields, `1/4` for composed ones.
    pub fn lower_bound(&self) -> f64 {
        if self.case.is_composed() {
            0.25
        } else {
            0.5
        }
    }

    /// `Y(−x)` as a field for the reflected model.
    pub fn reflect(&self) -> Self {
        Self {
            case: self.case.mirror(),
            eta: self.eta,
            layers: self.layers.iter().map(Layer::reflect).collect(),
            base: self.base.reflect(),
            tilted: self.tilted.reflect(),
            drift_shift: -self.drift_shift,
        }
    }

    /// `∫ (Y − 1) dκ`, summed layer by layer.
    pub fn mass_shift(&self) -> Result<f64> {
        let mut acc = 0.0;
        for l in self.layers.iter().filter(|l| !l.is_identity()) {
            acc += l.weighting.mass_shift(&l.reference)?;
        }
        Ok(acc)
    }

    /// `∫ |Y − 1| dκ`, exact over the overlay of the layer partitions.
    pub fn abs_deviation(&self) -> Result<f64> {
        let cfg = QuadConfig::default();
        let active: Vec<&Layer> = self.layers.iter().filter(|l| !l.is_identity()).collect();
        match active.as_slice() {
            [] => Ok(0.0),
            [l] => l.weighting.abs_deviation(&l.reference, &cfg),
            [inner, outer] => overlay_abs_deviation(inner, outer, &cfg),
            _ => Err(Error::NotApplicable("more than two active tilt layers".into())),
        }
    }

    /// Evaluation points covering every cell, with refinement towards finite
    /// cell boundaries and support edges.
    pub fn evaluation_grid(&self, n: usize) -> Vec<f64> {
        let (x_min, x_max) = self.base.support_bounds();
        if x_min > x_max {
            return Vec::new();
        }
        let mut anchors = vec![x_min, x_max];
        for l in &self.layers {
            for c in l.weighting.cells() {
                let iv = c.region.to_interval();
                anchors.push(iv.lo);
                anchors.push(iv.hi);
            }
        }
        let anchors: Vec<f64> = anchors.into_iter().filter(|x| x.is_finite()).collect();
        let lo = x_min.max(anchors.iter().copied().fold(f64::INFINITY, f64::min) - 1.0);
        let hi = x_max.min(anchors.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0);
        let mut pts = Vec::with_capacity(n);
        let uniform = n / 2;
        for i in 0..uniform {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / uniform as f64;
            pts.push(x);
        }
        let per = ((n - uniform) / (2 * anchors.len().max(1))).max(1);
        for &a in &anchors {
            for k in 0..per {
                let d = 10f64.powf(-(k as f64) * 12.0 / per as f64) * a.abs().max(1.0) * 0.1;
                for x in [a - d, a + d] {
                    if x > x_min && x < x_max && x != 0.0 {
                        pts.push(x);
                    }
                }
            }
        }
        pts.retain(|&x| x != 0.0 && x >= x_min && x <= x_max);
        pts.truncate(n);
        pts
    }
}

fn overlay_abs_deviation(inner: &Layer, outer: &Layer, cfg: &QuadConfig) -> Result<f64> {
    let kappa = &inner.reference;
    let mut acc = 0.0;
    for c1 in inner.weighting.cells() {
        for c2 in outer.weighting.cells() {
            if c1.profile && c2.profile {
                let r: Region = c1.region;
                if intersect(&r, c2).is_some() {
                    return Err(Error::NotApplicable("overlapping edge profiles".into()));
                }
                continue;
            }
            let c0 = (c1.log_value + c2.log_value).exp_m1();
            if c1.profile {
                let Some(sub) = intersect(&c2.region, c1) else { continue };
                acc += inner.weighting.abs_affine(kappa, &sub, c0, c2.log_value.exp(), cfg)?;
            } else if c2.profile {
                let Some(sub) = intersect(&c1.region, c2) else { continue };
                let s = c1.log_value.exp();
                acc += outer.weighting.abs_affine(&outer.reference, &sub, c0, s, cfg)? / s;
            } else {
                let Some(sub) = intersect(&c1.region, c2) else { continue };
                let lv = c1.log_value + c2.log_value;
                if lv != 0.0 {
                    let lm = kappa.log_mass_region(&sub)?;
                    if lm > f64::NEG_INFINITY {
                        acc += (lm + ln_abs_exp_m1(lv)).exp();
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Dispatches on the partition case of `t` with budget `eta`.
pub fn build_tilt(t: &Triplet, eta: f64) -> Result<TiltField> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParam(format!("tilt budget η = {eta} must be positive")));
    }
    let case = t.bounds().case();
    let mut field = TiltField::identity(case, eta, &t.kappa);
    let half = eta / 2.0;
    match case {
        PartitionCase::P1 => field.push(y1(t.a, &t.kappa, eta)?)?,
        PartitionCase::P2 => field.push(y2(t.a, &t.kappa, eta)?)?,
        PartitionCase::P3 => field.push(y3(t.a, &t.kappa, eta)?)?,
        PartitionCase::P4 => field.push(y4(t.a, &t.kappa, eta)?)?,
        PartitionCase::P5 | PartitionCase::P6 | PartitionCase::P7 => {
            let first = match case {
                PartitionCase::P5 => y3(t.a, &t.kappa, half)?,
                _ => y4(t.a, &t.kappa, half)?,
            };
            field.push(first)?;
            let a1 = t.a + field.drift_shift;
            let k1 = field.tilted.clone();
            let second = match case {
                PartitionCase::P5 => y1(a1, &k1, half)?,
                PartitionCase::P6 => y2(a1, &k1, half)?,
                _ => y3(a1, &k1, half)?,
            };
            field.push(second)?;
        }
        PartitionCase::P8 | PartitionCase::P9 => {}
    }
    Ok(field)
}

/// `(a + ∫x(Y−1)dκ, c, Y·κ, T)`.
pub fn tilted_triplet(t: &Triplet, y: &TiltField) -> Triplet {
    Triplet { a: t.a + y.drift_shift, c: t.c, kappa: y.tilted.clone(), horizon: t.horizon }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub pass: bool,
    #[serde(with = "crate::extreal")]
    pub value: f64,
    #[serde(with = "crate::extreal")]
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltReport {
    /// `∫ (|x| ∧ x²) Y dκ`.
    pub y1: ConditionCheck,
    /// `∫ |Y − 1| dκ` against `η`.
    pub y2: ConditionCheck,
    /// `κ^Y[ℝ] − κ[ℝ]`, symbolic when both are infinite.
    pub y3: ConditionCheck,
    pub y3_symbolic: bool,
    /// `∇g^Y(ℓ) ≥ −tol`.
    pub y4_left: ConditionCheck,
    /// `∇g^Y(r) ≤ tol`.
    pub y4_right: ConditionCheck,
}

impl TiltReport {
    pub fn all_pass(&self) -> bool {
        self.y1.pass && self.y2.pass && self.y3.pass && self.y4_left.pass && self.y4_right.pass
    }
}

/// Checks (Y1)–(Y4) for the field `y` on `t`; failures are reported as data.
pub fn validate_tilt(t: &Triplet, y: &TiltField, eta: f64, tol: f64) -> Result<TiltReport> {
    let tilted = tilted_triplet(t, y);
    let special = tilted.kappa.integrate_all(|x: f64| x.abs().min(x * x))?;
    let y1 = ConditionCheck { pass: special.is_finite(), value: special, bound: f64::INFINITY };
    let dev = y.abs_deviation()?;
    let y2 = ConditionCheck { pass: dev <= eta + tol.max(1e-8), value: dev, bound: eta };
    let base_mass = t.kappa.total_mass();
    let symbolic = base_mass.is_infinite();
    let y3 = if symbolic {
        let tilted_mass = tilted.kappa.total_mass();
        ConditionCheck { pass: tilted_mass.is_infinite(), value: 0.0, bound: 0.0 }
    } else {
        let shift = y.mass_shift()?;
        let direct = tilted.kappa.total_mass() - base_mass;
        let bound = 1e-8 * base_mass.max(1.0);
        ConditionCheck { pass: shift.abs() <= bound && direct.abs() <= bound, value: shift, bound }
    };
    let (dl, dr) = endpoint_derivatives(&tilted)?;
    Ok(TiltReport {
        y1,
        y2,
        y3,
        y3_symbolic: symbolic,
        y4_left: ConditionCheck { pass: dl >= -tol, value: dl, bound: -tol },
        y4_right: ConditionCheck { pass: dr <= tol, value: dr, bound: tol },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{DensityKind, DensityPart};
    use crate::growth::growth;

    fn expo() -> JumpMeasure {
        JumpMeasure::density(
            DensityPart::new(DensityKind::Exponential { scale: 1.0, rate: 1.0 }, 0.0, f64::INFINITY).unwrap(),
        )
        .unwrap()
    }

    fn unif() -> JumpMeasure {
        JumpMeasure::density(DensityPart::new(DensityKind::Uniform { height: 2.0 }, -0.5, 0.0).unwrap()).unwrap()
    }

    fn p1_field() -> (Triplet, TiltField) {
        let t = Triplet::new(-1.0, 0.0, expo(), 1.0);
        let y = build_tilt(&t, 0.5).unwrap();
        (t, y)
    }

    #[test]
    fn y1_parameters() {
        let (_, y) = p1_field();
        let p = y.layers[0].params;
        let delta = 5.0 + 2f64.ln();
        assert!((p.delta.unwrap() - delta).abs() < 1e-12);
        let sb = delta + 1.0 + 4.0;
        assert!((p.b.unwrap() - sb * sb).abs() < 1e-9);
        // Y on (0, δ] is 1 − 1/(√b (1 − e^{−δ})).
        let low = 1.0 - 1.0 / (sb * (1.0 - (-delta).exp()));
        assert!((y.evaluate(1.0).unwrap() - low).abs() < 1e-14);
        assert_eq!(y.evaluate(50.0).unwrap(), 1.0);
        let lv = y.log_evaluate(sb * sb + 1.0).unwrap();
        assert!((lv - (sb * sb - sb.ln())).abs() < 1e-9);
    }

    #[test]
    fn y1_budget_mass_and_drift() {
        let (t, y) = p1_field();
        let delta = 5.0 + 2f64.ln();
        let sb = delta + 5.0;
        assert!(y.mass_shift().unwrap().abs() < 1e-12);
        assert!((y.abs_deviation().unwrap() - 2.0 / sb).abs() < 1e-12);
        // E[x | x ≤ δ] for the unit exponential.
        let low_mean = (1.0 - (1.0 + delta) * (-delta).exp()) / (1.0 - (-delta).exp());
        let oracle = -1.0 + (sb * sb + 1.0) / sb - low_mean / sb;
        let ty = tilted_triplet(&t, &y);
        assert!((ty.a - oracle).abs() < 1e-9, "{} vs {oracle}", ty.a);
        let r = validate_tilt(&t, &y, 0.5, 1e-8).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert!((r.y4_left.value - oracle).abs() < 1e-9);
    }

    #[test]
    fn y1_identity_for_nonnegative_drift() {
        let t = Triplet::new(0.3, 0.0, expo(), 1.0);
        assert!(build_tilt(&t, 0.5).unwrap().is_identity());
        let bad = TiltField::identity(PartitionCase::P1, 0.5, &expo());
        let t = Triplet::new(-1.0, 0.0, expo(), 1.0);
        let r = validate_tilt(&t, &bad, 0.5, 1e-8).unwrap();
        assert!(!r.y4_left.pass);
        assert_eq!(r.y4_left.value, -1.0);
    }

    #[test]
    fn y2_mirrors_y1() {
        let (_, y) = p1_field();
        let t2 = Triplet::new(1.0, 0.0, expo().reflect(), 1.0);
        let y2f = build_tilt(&t2, 0.5).unwrap();
        assert_eq!(y2f.case, PartitionCase::P2);
        for i in 0..1000 {
            let x = 0.013 * i as f64 + 1e-3;
            let a = y.log_evaluate(x).unwrap();
            let b = y2f.log_evaluate(-x).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert!(build_tilt(&Triplet::new(-0.3, 0.0, expo().reflect(), 1.0), 0.5).unwrap().is_identity());
    }

    #[test]
    fn y3_uniform_example() {
        let t = Triplet::new(0.2, 0.0, unif(), 1.0);
        let y = build_tilt(&t, 0.5).unwrap();
        let p = y.layers[0].params;
        assert!((p.beta.unwrap() - (-8.0f64).exp() / 2.0).abs() < 1e-18);
        assert!((p.constant.unwrap() + 0.25).abs() < 1e-12);
        assert!((y.evaluate(-0.1).unwrap() - 0.75).abs() < 1e-12);
        assert!(y.mass_shift().unwrap().abs() < 1e-12);
        let shift = y.layers[0].weighting.deviation_integral(&unif(), &|_| 1.0, &QuadConfig::default()).unwrap();
        assert!(shift.abs() < 1e-9);
        let r = validate_tilt(&t, &y, 0.5, 1e-8).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.y4_right.value, f64::NEG_INFINITY);
        assert!(y.evaluate(-0.5 + 1e-6).unwrap() > 1.0);
    }

    #[test]
    fn y3_boundary_atom_gives_identity() {
        let t = Triplet::new(0.1, 0.0, JumpMeasure::atomic(&[(-0.5, 1.0)]).unwrap(), 1.0);
        assert!(build_tilt(&t, 0.5).unwrap().is_identity());
    }

    #[test]
    fn y3_growth_diverges_at_the_edge() {
        let t = Triplet::new(0.2, 0.0, unif(), 1.0);
        let y = build_tilt(&t, 0.5).unwrap();
        let ty = tilted_triplet(&t, &y);
        let g: Vec<f64> = (2..6).map(|k| growth(&ty, 2.0 - 10f64.powi(-k)).unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]), "{g:?}");
    }

    #[test]
    fn y4_mirrors_y3() {
        let t = Triplet::new(0.2, 0.0, unif(), 1.0);
        let y = build_tilt(&t, 0.5).unwrap();
        let m = build_tilt(&t.reflect(), 0.5).unwrap();
        assert_eq!(m.case, PartitionCase::P4);
        for x in [-0.49, -0.4999, -0.3, -0.1] {
            let a = y.log_evaluate(x).unwrap();
            let b = m.log_evaluate(-x).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn composed_p5_field() {
        let k = JumpMeasure::sum(
            &[],
            vec![
                DensityPart::new(DensityKind::Exponential { scale: 1.0, rate: 1.0 }, 0.0, f64::INFINITY).unwrap(),
                DensityPart::new(DensityKind::Uniform { height: 2.0 }, -0.5, 0.0).unwrap(),
            ],
        )
        .unwrap();
        let t = Triplet::new(-1.0, 0.0, k, 1.0);
        let y = build_tilt(&t, 0.5).unwrap();
        assert_eq!(y.case, PartitionCase::P5);
        assert_eq!(y.layers.len(), 2);
        let r = validate_tilt(&t, &y, 0.5, 1e-8).unwrap();
        assert!(r.all_pass(), "{r:?}");
        // Product of the factors, pointwise.
        let x = 1.0;
        let v = y.layers[0].log_value(x).unwrap() + y.layers[1].log_value(x).unwrap();
        assert!((y.log_evaluate(x).unwrap() - v).abs() < 1e-15);
        for x in y.evaluation_grid(200) {
            assert!(y.evaluate(x).unwrap() >= 0.25);
        }
    }
}
