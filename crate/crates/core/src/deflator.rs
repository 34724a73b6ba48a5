//! Assembly of the deflator `Z = L / X̃` from the tilt field and the
//! growth-optimal fraction of the tilted model.

use serde::{Deserialize, Serialize};

use crate::characteristics::{PartitionCase, Triplet};
use crate::error::{Error, Result};
use crate::growth::{growth_derivative, optimal_fraction, window, OptimalFraction, SolverOptions};
use crate::simulate::{log_density_path, log_stoch_exp, ExpMode, Path};
use crate::tilt::{build_tilt, tilted_triplet, validate_tilt, TiltField, TiltReport};
use crate::viability::check_lambda;

/// Check that `X^p / X̃` has zero drift under the tilted law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelCheck {
    pub pass: bool,
    /// `max |rel^Y(p | p̃)|` over the sampled fractions.
    #[serde(with = "crate::extreal")]
    pub max_abs: f64,
    pub tol: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone)]
pub struct DeflatorSpec {
    pub base: Triplet,
    pub epsilon: f64,
    /// Per-unit-time tilt budget.
    pub eta: f64,
    pub y: TiltField,
    pub tilted: Triplet,
    pub optimum: OptimalFraction,
    pub tilt_report: TiltReport,
    pub rel: RelCheck,
    /// Whether paths can be simulated (finite jump activity).
    pub simulable: bool,
}

impl DeflatorSpec {
    pub fn p_tilde(&self) -> f64 {
        self.optimum.p
    }

    pub fn case(&self) -> PartitionCase {
        self.y.case
    }

    pub fn report(&self) -> DeflatorReport {
        let margin = |c: &crate::tilt::ConditionCheck, sign: f64| sign * c.value;
        DeflatorReport {
            epsilon: self.epsilon,
            eta: self.eta,
            case: self.case(),
            p_tilde: self.p_tilde(),
            y4_left_margin: margin(&self.tilt_report.y4_left, 1.0),
            y4_right_margin: margin(&self.tilt_report.y4_right, -1.0),
            tilt_valid: self.tilt_report.all_pass(),
            rel_max: self.rel.max_abs,
            simulable: self.simulable,
        }
    }
}

/// Serializable summary of a [`DeflatorSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeflatorReport {
    pub epsilon: f64,
    pub eta: f64,
    pub case: PartitionCase,
    #[serde(with = "crate::extreal")]
    pub p_tilde: f64,
    /// `∇g^Y(ℓ)`; nonnegative when the left condition holds.
    #[serde(with = "crate::extreal")]
    pub y4_left_margin: f64,
    /// `−∇g^Y(r)`; nonnegative when the right condition holds.
    #[serde(with = "crate::extreal")]
    pub y4_right_margin: f64,
    pub tilt_valid: bool,
    #[serde(with = "crate::extreal")]
    pub rel_max: f64,
    pub simulable: bool,
}

/// Builds the deflator with the budget `η̄ = ε / (2T)`.
pub fn build_deflator(t: &Triplet, epsilon: f64, tol: f64) -> Result<DeflatorSpec> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParam(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    build_deflator_with_eta(t, epsilon, epsilon / (2.0 * t.horizon), tol)
}

/// As [`build_deflator`] but with an explicit tilt budget `eta`.
pub fn build_deflator_with_eta(t: &Triplet, epsilon: f64, eta: f64, tol: f64) -> Result<DeflatorSpec> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParam(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let t = t.clone().validate()?;
    let verdict = check_lambda(&t)?;
    if !verdict.is_viable() {
        return Err(Error::ArbitrageDetected(verdict));
    }
    let y = build_tilt(&t, eta)?;
    let tilted = tilted_triplet(&t, &y);
    let optimum = optimal_fraction(&tilted, &SolverOptions::default())?;
    let tilt_report = validate_tilt(&t, &y, eta, tol)?;
    let rel = rel_check(&tilted, optimum.p, tol)?;
    let simulable = t.kappa.total_mass().is_finite();
    Ok(DeflatorSpec { base: t, epsilon, eta, y, tilted, optimum, tilt_report, rel, simulable })
}

/// `rel^Y(p | p̃) = (p − p̃) ∇g^Y(p̃)` on a grid over the admissible interval.
fn rel_check(tilted: &Triplet, p_tilde: f64, tol: f64) -> Result<RelCheck> {
    let b = tilted.bounds();
    let (lo, hi) = window(&b, p_tilde);
    let n = 9;
    let d = growth_derivative(tilted, p_tilde)?;
    let mut max_abs: f64 = 0.0;
    for i in 0..n {
        let p = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = if p == p_tilde { 0.0 } else { (p - p_tilde) * d };
        max_abs = max_abs.max(v.abs());
    }
    if max_abs.is_nan() {
        max_abs = f64::INFINITY;
    }
    let bound = tol * (hi - lo).abs().max(1.0);
    Ok(RelCheck { pass: max_abs <= bound, max_abs, tol: bound, n_points: n })
}

/// `L`, `X̃` and `Z` on a path's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflatorPath {
    pub l: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub z: Vec<f64>,
}

impl DeflatorPath {
    pub fn terminal_z(&self) -> f64 {
        *self.z.last().unwrap_or(&1.0)
    }

    pub fn terminal_l(&self) -> f64 {
        *self.l.last().unwrap_or(&1.0)
    }
}

/// Evaluates the deflator along a path drawn under the base law.
pub fn deflator_along_path(spec: &DeflatorSpec, path: &Path, mode: ExpMode) -> Result<DeflatorPath> {
    if !spec.simulable {
        return Err(Error::InfiniteActivity);
    }
    let ln_l = log_density_path(path, &spec.y)?;
    let p = spec.p_tilde();
    let ln_x = if p == 0.0 {
        vec![0.0; path.times.len()]
    } else {
        let inc: Vec<_> = path.increments().into_iter().map(|i| i.scale(p)).collect();
        log_stoch_exp(path, &inc, mode).map_err(|e| match e {
            Error::NonpositiveWealth { step } => {
                Error::InvalidPath(format!("1 + p̃·ΔS <= 0 at step {step} (p̃ = {p})"))
            }
            other => other,
        })?
    };
    let mut l = Vec::with_capacity(ln_l.len());
    let mut x_tilde = Vec::with_capacity(ln_l.len());
    let mut z = Vec::with_capacity(ln_l.len());
    for (&a, &b) in ln_l.iter().zip(&ln_x) {
        l.push(a.exp());
        x_tilde.push(b.exp());
        z.push((a - b).exp());
    }
    Ok(DeflatorPath { l, x_tilde, z })
}
