//! Detection of arbitrage of the first kind through the sets `Λ₊`, `Λ₋`.

use serde::{Deserialize, Serialize};

use crate::characteristics::Triplet;
use crate::error::Result;
use crate::interval::Interval;
use crate::jump_measure::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViabilityStatus {
    Viable,
    ArbitragePlus,
    ArbitrageMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViabilityVerdict {
    pub status: ViabilityStatus,
    pub strategy: i8,
    pub drift_rate: Option<f64>,
}

impl ViabilityVerdict {
    pub fn viable() -> Self {
        Self { status: ViabilityStatus::Viable, strategy: 0, drift_rate: None }
    }

    pub fn is_viable(&self) -> bool {
        self.status == ViabilityStatus::Viable
    }
}

/// Relative slack separating a genuine strict inequality from quadrature noise.
const MARGIN: f64 = 1e-9;

fn one_sided(t: &Triplet, side: Side) -> Result<Option<f64>> {
    let opposite = match side {
        Side::Positive => Side::Negative,
        Side::Negative => Side::Positive,
    };
    if t.c != 0.0 || t.kappa.side_mass(opposite) > 0.0 {
        return Ok(None);
    }
    let iv = match side {
        Side::Positive => Interval::positive(),
        Side::Negative => Interval::negative(),
    };
    let mean = t.kappa.integrate(|x| x, &iv)?;
    if !mean.is_finite() {
        return Ok(None);
    }
    let excess = match side {
        Side::Positive => t.a - mean,
        Side::Negative => mean - t.a,
    };
    let margin = MARGIN * t.a.abs().max(mean.abs()).max(1.0);
    Ok((excess > margin).then_some(excess))
}

/// Evaluates the `Λ₊` / `Λ₋` predicates for a time-homogeneous triplet.
pub fn check_lambda(t: &Triplet) -> Result<ViabilityVerdict> {
    if let Some(rate) = one_sided(t, Side::Positive)? {
        return Ok(ViabilityVerdict { status: ViabilityStatus::ArbitragePlus, strategy: 1, drift_rate: Some(rate) });
    }
    if let Some(rate) = one_sided(t, Side::Negative)? {
        return Ok(ViabilityVerdict { status: ViabilityStatus::ArbitrageMinus, strategy: -1, drift_rate: Some(rate) });
    }
    Ok(ViabilityVerdict::viable())
}
