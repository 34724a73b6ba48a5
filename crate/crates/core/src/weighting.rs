//! Piecewise tilt layers.
//!
//! A layer is a partition of ℝ into cells carrying constant log-values. At
//! most one cell, adjacent to a finite support edge `e`, additionally carries
//! the boundary profile
//!
//! ```text
//! I(d) = ∫_{ln(ρd)}^{v_max} ρ / (v² K(e^v / ρ)) dv,   K(s) = μ[(e, e + dir·s]],
//! ```
//!
//! where `d = dir·(x − e)` is the distance to the edge and `μ` is the measure
//! the layer was built against. Integrals of `f·I` against `μ` are evaluated
//! by swapping the order of integration, which keeps the singular behaviour
//! at the edge inside a closed-form mass ratio.

use crate::error::{Error, Result};
use crate::interval::{Interval, Region};
use crate::jump_measure::{log_add, JumpMeasure, Piece};
use crate::quadrature::{integrate, QuadConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeProfile {
    pub edge: f64,
    pub dir: f64,
    pub rho: f64,
    pub width: f64,
    pub v_max: f64,
}

impl EdgeProfile {
    /// `∫ I dμ` over the whole profile cell.
    pub fn full_mass(&self) -> f64 {
        self.rho / -self.v_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub region: Region,
    pub log_value: f64,
    pub profile: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weighting {
    cells: Vec<Cell>,
    profile: Option<EdgeProfile>,
}

pub(crate) fn intersect(r: &Region, cell: &Cell) -> Option<Region> {
    if !cell.profile {
        return r.intersect(&cell.region.span);
    }
    let c = &cell.region;
    let rr = if r.origin == c.origin && r.dir == c.dir { *r } else { r.reframe(c.origin, c.dir) };
    rr.span.intersect(&c.span).map(|span| Region { span, ..*c })
}

impl Weighting {
    pub fn identity() -> Self {
        Self::piecewise(vec![(Interval::all(), 0.0)])
    }

    /// Constant log-values on a partition of ℝ given as intervals.
    pub fn piecewise(cells: Vec<(Interval, f64)>) -> Self {
        let cells = cells
            .into_iter()
            .filter(|(iv, _)| !iv.is_empty())
            .map(|(iv, lv)| Cell { region: iv.into(), log_value: lv, profile: false })
            .collect();
        Self { cells, profile: None }
    }

    /// Log-value `log_inside` plus the profile on the cell of width `beta`
    /// next to `edge` (on side `dir`), `log_outside` elsewhere.
    pub fn with_profile(edge: f64, dir: f64, rho: f64, beta: f64, log_inside: f64, log_outside: f64) -> Self {
        // The profile cell keeps the exact width in its own frame. The
        // neighbouring cell starts at the last float not beyond `edge + beta`,
        // so no representable point is in both; the continuous overlap is
        // below one ulp.
        let width = beta;
        let mut x1 = edge + dir * beta;
        while dir * (x1 - edge) > beta {
            x1 = if dir > 0.0 { x1.next_down() } else { x1.next_up() };
        }
        let profile = EdgeProfile { edge, dir, rho, width, v_max: (rho * width).ln() };
        let inside = Cell { region: Region::edge(edge, dir, 0.0, width), log_value: log_inside, profile: true };
        let plain = |iv: Interval| Cell { region: iv.into(), log_value: log_outside, profile: false };
        let cells = if dir > 0.0 {
            vec![plain(Interval::open_closed(f64::NEG_INFINITY, edge)), inside, plain(Interval::open(x1, f64::INFINITY))]
        } else {
            vec![plain(Interval::open(f64::NEG_INFINITY, x1)), inside, plain(Interval::closed_open(edge, f64::INFINITY))]
        };
        Self { cells, profile: Some(profile) }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn profile(&self) -> Option<&EdgeProfile> {
        self.profile.as_ref()
    }

    pub fn is_identity(&self) -> bool {
        self.profile.is_none() && self.cells.iter().all(|c| c.log_value == 0.0)
    }

    pub fn reflect(&self) -> Self {
        let cells = self
            .cells
            .iter()
            .map(|c| {
                let region = if c.profile {
                    Region { origin: -c.region.origin, dir: -c.region.dir, span: c.region.span }
                } else {
                    c.region.span.reflect().into()
                };
                Cell { region, ..*c }
            })
            .collect();
        let profile = self.profile.map(|p| EdgeProfile { edge: -p.edge, dir: -p.dir, ..p });
        Self { cells, profile }
    }

    fn profile_ref(&self) -> Result<&EdgeProfile> {
        self.profile.as_ref().ok_or_else(|| Error::InvalidParam("layer has no edge profile".into()))
    }

    /// `I(d)` for the profile built against `reference`.
    pub fn profile_integral(&self, reference: &JumpMeasure, d: f64, cfg: &QuadConfig) -> Result<f64> {
        Ok(self.log_profile_integral(reference, d, cfg)?.exp())
    }

    /// `ln I(d)`, finite where `I(d)` itself overflows.
    pub fn log_profile_integral(&self, reference: &JumpMeasure, d: f64, cfg: &QuadConfig) -> Result<f64> {
        let p = self.profile_ref()?;
        if d >= p.width {
            return Ok(f64::NEG_INFINITY);
        }
        if !(d > 0.0) {
            return Ok(f64::INFINITY);
        }
        let log_g = |v: f64| {
            let s = v.exp() / p.rho;
            let lk = reference.log_mass_region(&Region::edge(p.edge, p.dir, 0.0, s)).unwrap_or(f64::NAN);
            p.rho.ln() - 2.0 * (-v).ln() - lk
        };
        let v0 = (p.rho * d).ln();
        let scale = log_g(v0);
        if !scale.is_finite() {
            return Ok(scale);
        }
        let q = integrate(|v| (log_g(v) - scale).exp(), v0, p.v_max, cfg)?.value;
        Ok(scale + q.ln())
    }

    pub fn log_value_at(&self, reference: &JumpMeasure, x: f64, cfg: &QuadConfig) -> Result<f64> {
        let Some(cell) = self.cells.iter().find(|c| c.region.contains(x)) else { return Ok(0.0) };
        if cell.profile {
            let d = cell.region.coord(x);
            return Ok(log_add(cell.log_value, self.log_profile_integral(reference, d, cfg)?));
        }
        Ok(cell.log_value)
    }

    /// `e^{ls} ∫_{sub} f·I dμ`, `sub` given in the profile frame.
    fn fubini(
        &self,
        reference: &JumpMeasure,
        f: &dyn Fn(f64) -> f64,
        sub: &Region,
        log_scale: f64,
        cfg: &QuadConfig,
    ) -> Result<f64> {
        let p = self.profile_ref()?;
        let da = sub.span.lo.max(0.0);
        let db = sub.span.hi.min(p.width);
        if !(db > da) {
            return Ok(0.0);
        }
        let v_lo = if da > 0.0 { (p.rho * da).ln() } else { f64::NEG_INFINITY };
        let g = |v: f64| {
            let s = v.exp() / p.rho;
            let top = s.min(db);
            let w = p.rho.ln() - 2.0 * (-v).ln();
            // Below the float spacing at the edge every point of (0, s] rounds
            // to the edge, so the normalised inner integral is f(edge).
            if da == 0.0 && p.edge + p.dir * s == p.edge {
                let fe = f(p.edge);
                return if fe.is_finite() { fe * (w + log_scale).exp() } else { 0.0 };
            }
            if !(top > da) {
                return 0.0;
            }
            let lk = match reference.log_mass_region(&Region::edge(p.edge, p.dir, 0.0, s)) {
                Ok(v) => v,
                Err(_) => return f64::NAN,
            };
            // Normalised by K(s) so that the inner value stays of order f(edge).
            match reference.integrate_region(f, &Region::edge(p.edge, p.dir, da, top), log_scale - lk, cfg) {
                Ok(fv) => fv * w.exp(),
                Err(_) => f64::NAN,
            }
        };
        Ok(integrate(g, v_lo, p.v_max, cfg)?.value)
    }

    /// `∫_{sub} I dμ`, `sub` in the profile frame.
    fn profile_mass(&self, reference: &JumpMeasure, sub: &Region, cfg: &QuadConfig) -> Result<f64> {
        let p = self.profile_ref()?;
        let da = sub.span.lo.max(0.0);
        let db = sub.span.hi.min(p.width);
        if !(db > da) {
            return Ok(0.0);
        }
        if da == 0.0 && db == p.width {
            return Ok(p.full_mass());
        }
        let v_lo = if da > 0.0 { (p.rho * da).ln() } else { f64::NEG_INFINITY };
        let g = |v: f64| {
            let s = v.exp() / p.rho;
            let w = p.rho.ln() - 2.0 * (-v).ln();
            if s == 0.0 {
                return w.exp();
            }
            let top = s.min(db);
            if !(top > da) {
                return 0.0;
            }
            let lk = reference.log_mass_region(&Region::edge(p.edge, p.dir, 0.0, s));
            let ls = reference.log_mass_region(&Region::edge(p.edge, p.dir, da, top));
            match (lk, ls) {
                (Ok(lk), Ok(ls)) => (w + ls - lk).exp(),
                _ => f64::NAN,
            }
        };
        Ok(integrate(g, v_lo, p.v_max, cfg)?.value)
    }

    pub fn integrate(
        &self,
        reference: &JumpMeasure,
        f: &dyn Fn(f64) -> f64,
        r: &Region,
        log_scale: f64,
        cfg: &QuadConfig,
    ) -> Result<f64> {
        let mut acc = 0.0;
        for cell in &self.cells {
            let Some(sub) = intersect(r, cell) else { continue };
            acc += reference.integrate_region(f, &sub, log_scale + cell.log_value, cfg)?;
            if cell.profile {
                acc += self.fubini(reference, f, &sub, log_scale, cfg)?;
            }
        }
        Ok(acc)
    }

    pub fn log_mass(&self, reference: &JumpMeasure, r: &Region, cfg: &QuadConfig) -> Result<f64> {
        let mut acc = f64::NEG_INFINITY;
        for cell in &self.cells {
            let Some(sub) = intersect(r, cell) else { continue };
            acc = log_add(acc, cell.log_value + reference.log_mass_region(&sub)?);
            if cell.profile {
                acc = log_add(acc, self.profile_mass(reference, &sub, cfg)?.ln());
            }
        }
        Ok(acc)
    }

    pub(crate) fn collect_pieces(
        &self,
        reference: &JumpMeasure,
        r: &Region,
        log_scale: f64,
        out: &mut Vec<(f64, Piece)>,
    ) -> Result<()> {
        for cell in &self.cells {
            let Some(sub) = intersect(r, cell) else { continue };
            reference.collect_pieces(&sub, log_scale + cell.log_value, out)?;
            if cell.profile {
                let p = self.profile_ref()?;
                if sub.span.lo > 0.0 || sub.span.hi < p.width {
                    return Err(Error::NotApplicable("sampling a partial edge-profile cell".into()));
                }
                out.push((
                    log_scale + p.full_mass().ln(),
                    Piece::Profile { edge: p.edge, dir: p.dir, rho: p.rho, v_max: p.v_max, reference: reference.clone() },
                ));
            }
        }
        Ok(())
    }

    /// `∫ (Y − 1) dμ` over cells where the layer differs from 1.
    pub fn mass_shift(&self, reference: &JumpMeasure) -> Result<f64> {
        let mut acc = 0.0;
        for cell in &self.cells {
            if cell.log_value != 0.0 {
                let lm = reference.log_mass_region(&cell.region)?;
                if lm > f64::NEG_INFINITY {
                    acc += (cell.log_value + lm).exp() - lm.exp();
                }
            }
            if cell.profile {
                acc += self.profile_ref()?.full_mass();
            }
        }
        Ok(acc)
    }

    /// `∫ f (Y − 1) dμ` over cells where the layer differs from 1.
    pub fn deviation_integral(&self, reference: &JumpMeasure, f: &dyn Fn(f64) -> f64, cfg: &QuadConfig) -> Result<f64> {
        let mut acc = 0.0;
        for cell in &self.cells {
            if cell.log_value != 0.0 {
                acc += reference.integrate_region(f, &cell.region, cell.log_value, cfg)?;
                acc -= reference.integrate_region(f, &cell.region, 0.0, cfg)?;
            }
            if cell.profile {
                acc += self.fubini(reference, f, &cell.region, 0.0, cfg)?;
            }
        }
        Ok(acc)
    }

    /// `∫ |Y − 1| dμ`.
    pub fn abs_deviation(&self, reference: &JumpMeasure, cfg: &QuadConfig) -> Result<f64> {
        let mut acc = 0.0;
        for cell in &self.cells {
            if cell.profile {
                acc += self.abs_affine(reference, &cell.region, cell.log_value.exp_m1(), 1.0, cfg)?;
            } else if cell.log_value != 0.0 {
                let lm = reference.log_mass_region(&cell.region)?;
                if lm > f64::NEG_INFINITY {
                    acc += (lm + ln_abs_exp_m1(cell.log_value)).exp();
                }
            }
        }
        Ok(acc)
    }

    /// `∫_{sub} |c0 + s·I| dμ` over a part of the profile cell (profile frame).
    pub(crate) fn abs_affine(&self, reference: &JumpMeasure, sub: &Region, c0: f64, s: f64, cfg: &QuadConfig) -> Result<f64> {
        let p = self.profile_ref()?;
        let da = sub.span.lo.max(0.0);
        let db = sub.span.hi.min(p.width);
        if !(db > da) {
            return Ok(0.0);
        }
        let piece = |lo: f64, hi: f64| -> Result<f64> {
            if !(hi > lo) {
                return Ok(0.0);
            }
            let r = Region::edge(p.edge, p.dir, lo, hi);
            Ok(c0 * reference.mass_region(&r)? + s * self.profile_mass(reference, &r, cfg)?)
        };
        if c0 >= 0.0 {
            return piece(da, db);
        }
        // c0 + s·I(d) decreases in d and changes sign where I(d*) = −c0/s.
        let target = (-c0 / s).ln();
        let mut hi = p.width.ln();
        let mut lo = hi - 50.0;
        while self.log_profile_integral(reference, lo.exp(), cfg)? < target {
            lo -= 50.0;
            if lo < -745.0 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            if self.log_profile_integral(reference, mid.exp(), cfg)? >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let d_star = hi.exp().clamp(da, db);
        // Whole-range value (closed form on the full cell) minus twice the
        // small negative tail.
        Ok(piece(da, db)? - 2.0 * piece(d_star, db)?)
    }
}

/// `ln|e^v − 1|` without overflow for large `v`.
pub(crate) fn ln_abs_exp_m1(v: f64) -> f64 {
    if v > 1.0 {
        v + (-(-v).exp()).ln_1p()
    } else {
        v.exp_m1().abs().ln()
    }
}
