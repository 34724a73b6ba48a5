//! Model triplets, the admissible-fraction interval and the nine-case partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump_measure::JumpMeasure;

/// Characteristics `(a, c, κ)` per unit time over the horizon `[0, T]`.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub a: f64,
    pub c: f64,
    pub kappa: JumpMeasure,
    pub horizon: f64,
}

impl Triplet {
    pub fn new(a: f64, c: f64, kappa: JumpMeasure, horizon: f64) -> Self {
        Self { a, c, kappa, horizon }
    }

    /// Checks `c ≥ 0`, `T > 0` and that κ integrates `|x| ∧ x²`.
    pub fn validate(self) -> Result<Self> {
        if !self.a.is_finite() {
            return Err(Error::InvalidParam(format!("drift a = {} must be finite", self.a)));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParam(format!("diffusion c = {} must be finite and >= 0", self.c)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParam(format!("horizon T = {} must be finite and > 0", self.horizon)));
        }
        if !self.kappa.is_special() {
            return Err(Error::NotSpecial);
        }
        Ok(self)
    }

    /// The model driven by `-S`: `(-a, c, κ∘(x ↦ -x))`.
    pub fn reflect(&self) -> Self {
        Self { a: -self.a, c: self.c, kappa: self.kappa.reflect(), horizon: self.horizon }
    }

    pub fn bounds(&self) -> SupportInterval {
        bounds(&self.kappa)
    }
}

/// `ℓ ≤ 0 ≤ r` and `I = [ℓ, r] ∩ ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    #[serde(with = "crate::extreal")]
    pub l: f64,
    #[serde(with = "crate::extreal")]
    pub r: f64,
}

impl SupportInterval {
    pub fn contains(&self, p: f64) -> bool {
        p.is_finite() && p >= self.l && p <= self.r
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.l, self.r)
    }

    pub fn is_bounded(&self) -> bool {
        self.l.is_finite() && self.r.is_finite()
    }

    pub fn reflect(&self) -> Self {
        Self { l: -self.r, r: -self.l }
    }

    pub fn case(&self) -> PartitionCase {
        classify(self)
    }
}

/// The jump size `e` with `1 + p e = 0` at a finite nonzero endpoint `p` of
/// `bounds(kappa)`, read from the support itself so that `e` is exact.
pub fn edge_at(kappa: &JumpMeasure, p: f64) -> f64 {
    let b = bounds(kappa);
    let (x_min, x_max) = kappa.support_bounds();
    if p == b.r && x_min.is_finite() {
        x_min
    } else if p == b.l && x_max.is_finite() {
        x_max
    } else {
        -1.0 / p
    }
}

pub fn bounds(kappa: &JumpMeasure) -> SupportInterval {
    let (x_min, x_max) = kappa.support_bounds();
    let l = if x_max <= 0.0 || x_max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x_max == f64::INFINITY {
        0.0
    } else {
        -1.0 / x_max
    };
    let r = if x_min >= 0.0 || x_min == f64::INFINITY {
        f64::INFINITY
    } else if x_min == f64::NEG_INFINITY {
        0.0
    } else {
        -1.0 / x_min
    };
    SupportInterval { l, r }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartitionCase {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
}

impl PartitionCase {
    pub const ALL: [PartitionCase; 9] = [
        PartitionCase::P1,
        PartitionCase::P2,
        PartitionCase::P3,
        PartitionCase::P4,
        PartitionCase::P5,
        PartitionCase::P6,
        PartitionCase::P7,
        PartitionCase::P8,
        PartitionCase::P9,
    ];

    /// The case of the reflected model.
    pub fn mirror(self) -> Self {
        use PartitionCase::*;
        match self {
            P1 => P2,
            P2 => P1,
            P3 => P4,
            P4 => P3,
            P5 => P6,
            P6 => P5,
            other => other,
        }
    }

    pub fn is_composed(self) -> bool {
        matches!(self, PartitionCase::P5 | PartitionCase::P6 | PartitionCase::P7)
    }
}

impl std::fmt::Display for PartitionCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

pub fn classify(b: &SupportInterval) -> PartitionCase {
    use PartitionCase::*;
    let l_inf = b.l == f64::NEG_INFINITY;
    let l_zero = b.l == 0.0;
    let r_inf = b.r == f64::INFINITY;
    let r_zero = b.r == 0.0;
    match (l_inf, l_zero, r_inf, r_zero) {
        (false, true, true, _) => P1,
        (true, _, false, true) => P2,
        (true, _, false, false) => P3,
        (false, false, true, _) => P4,
        (false, true, false, false) => P5,
        (false, false, false, true) => P6,
        (false, false, false, false) => P7,
        (false, true, false, true) => P8,
        (true, _, true, _) => P9,
    }
}
