//! Path simulation for finite-activity triplets and discrete stochastic
//! exponentials along simulated paths.
//!
//! With jump insertion off, jumps falling inside a step are summed into that
//! step's increment. Each path uses its own ChaCha stream selected by the path index, so a path
//! depends only on `(seed, index)` and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristics::Triplet;
use crate::error::{Error, Result};
use crate::jump_measure::Sampler;
use crate::tilt::TiltField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Insert jump times into the time grid.
    pub insert_jumps: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, n_steps: 64, seed: 42, insert_jumps: true }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be >= 1".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidConfig("n_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Discretisation of `𝓔` on the continuous part of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpMode {
    /// `exp(Δdrift + σΔW − σ²Δt/2)`, exact for constant coefficients.
    #[default]
    Exact,
    /// `1 + Δdrift + σΔW`.
    Euler,
}

/// One grid step: `ΔS = drift + √c·dw + jump`, the jump occurring at the step end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub dt: f64,
    pub dw: f64,
    pub drift: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub steps: Vec<Step>,
    /// Jump events `(time, size)` in time order.
    pub events: Vec<(f64, f64)>,
    /// Diffusion coefficient `c` of the law the path was drawn from.
    pub c: f64,
}

impl Path {
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.events.iter().copied()
    }

    pub fn terminal(&self) -> f64 {
        *self.s.last().unwrap_or(&0.0)
    }

    pub fn increments(&self) -> Vec<Incr> {
        let sigma = self.c.sqrt();
        self.steps.iter().map(|s| Incr { drift: s.drift, sigma, jump: s.jump }).collect()
    }
}

/// Per-step increment of a semimartingale `U` along a path:
/// `ΔU = drift + sigma·dW + jump`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Incr {
    pub drift: f64,
    pub sigma: f64,
    pub jump: f64,
}

impl Incr {
    pub fn scale(self, k: f64) -> Self {
        Self { drift: k * self.drift, sigma: k * self.sigma, jump: k * self.jump }
    }
}

/// Increments of `U + V + [U, V]`, consistent with the chosen discretisation.
pub fn yor_sum(path: &Path, u: &[Incr], v: &[Incr], mode: ExpMode) -> Vec<Incr> {
    path.steps
        .iter()
        .zip(u.iter().zip(v))
        .map(|(st, (a, b))| {
            let cov = match mode {
                ExpMode::Exact => a.sigma * b.sigma * st.dt,
                ExpMode::Euler => (a.drift + a.sigma * st.dw) * (b.drift + b.sigma * st.dw),
            };
            Incr { drift: a.drift + b.drift + cov, sigma: a.sigma + b.sigma, jump: a.jump + b.jump + a.jump * b.jump }
        })
        .collect()
}

/// `ln 𝓔(U)` on the path grid; fails if a factor is not positive.
pub fn log_stoch_exp(path: &Path, u: &[Incr], mode: ExpMode) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(u.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for (k, (st, inc)) in path.steps.iter().zip(u).enumerate() {
        let cont = match mode {
            ExpMode::Exact => inc.drift + inc.sigma * st.dw - 0.5 * inc.sigma * inc.sigma * st.dt,
            ExpMode::Euler => {
                let f = 1.0 + inc.drift + inc.sigma * st.dw;
                if !(f > 0.0) {
                    return Err(Error::NonpositiveWealth { step: k });
                }
                f.ln()
            }
        };
        let jf = 1.0 + inc.jump;
        if !(jf > 0.0) {
            return Err(Error::NonpositiveWealth { step: k });
        }
        acc += cont + inc.jump.ln_1p();
        out.push(acc);
    }
    Ok(out)
}

pub fn stoch_exp_incr(path: &Path, u: &[Incr], mode: ExpMode) -> Result<Vec<f64>> {
    Ok(log_stoch_exp(path, u, mode)?.into_iter().map(f64::exp).collect())
}

/// Wealth `𝓔(∫p dS)` of the constant fraction `p`, with `X(0) = 1`.
pub fn stoch_exp(path: &Path, p: f64, mode: ExpMode) -> Result<Vec<f64>> {
    let u: Vec<Incr> = path.increments().into_iter().map(|i| i.scale(p)).collect();
    stoch_exp_incr(path, &u, mode)
}

/// Increments of `R^{p|p̃}`, whose stochastic exponential is `X^p / X^{p̃}`.
pub fn ratio_increments(path: &Path, p: f64, p_ref: f64, mode: ExpMode) -> Vec<Incr> {
    let dp = p - p_ref;
    let sigma = path.c.sqrt();
    path.steps
        .iter()
        .map(|st| {
            let jump = dp * st.jump / (1.0 + p_ref * st.jump);
            match mode {
                ExpMode::Exact => Incr { drift: dp * st.drift - dp * p_ref * path.c * st.dt, sigma: dp * sigma, jump },
                ExpMode::Euler => {
                    let a = st.drift + sigma * st.dw;
                    Incr { drift: dp * a / (1.0 + p_ref * a), sigma: 0.0, jump }
                }
            }
        })
        .collect()
}

/// `ln L_t = Σ_{jumps ≤ t} ln Y(ΔS)` on the path grid.
pub fn log_density_path(path: &Path, y: &TiltField) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(path.steps.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    let trivial = y.is_identity();
    let mut ev = path.events.iter().peekable();
    for &t in &path.times[1..] {
        while let Some(&&(tj, x)) = ev.peek() {
            if tj > t {
                break;
            }
            if !trivial {
                acc += y.log_evaluate(x)?;
            }
            ev.next();
        }
        out.push(acc);
    }
    Ok(out)
}

pub fn density_path(path: &Path, y: &TiltField) -> Result<Vec<f64>> {
    Ok(log_density_path(path, y)?.into_iter().map(f64::exp).collect())
}

/// Pre-computed ingredients for drawing paths of one law.
#[derive(Debug, Clone)]
pub struct PathLaw {
    pub a: f64,
    pub c: f64,
    pub horizon: f64,
    pub intensity: f64,
    /// `a − ∫x dκ`, the drift of the continuous part.
    pub drift_rate: f64,
    sampler: Option<Sampler>,
}

impl PathLaw {
    pub fn new(t: &Triplet) -> Result<Self> {
        let intensity = t.kappa.total_mass();
        if !intensity.is_finite() {
            return Err(Error::InfiniteActivity);
        }
        let (sampler, mean) = if intensity > 0.0 {
            let m = t.kappa.integrate_all(|x| x)?;
            (Some(t.kappa.sampler()?), m)
        } else {
            (None, 0.0)
        };
        if !mean.is_finite() {
            return Err(Error::InvalidConfig("jump measure has no finite first moment".into()));
        }
        Ok(Self { a: t.a, c: t.c, horizon: t.horizon, intensity, drift_rate: t.a - mean, sampler })
    }

    pub fn rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    pub fn simulate(&self, cfg: &SimConfig, index: u64) -> Result<Path> {
        let mut rng = Self::rng(cfg.seed, index);
        let t_end = self.horizon;
        let n_jumps = if self.intensity > 0.0 {
            let pois = Poisson::new(self.intensity * t_end)
                .map_err(|e| Error::InvalidConfig(format!("jump intensity: {e}")))?;
            pois.sample(&mut rng) as usize
        } else {
            0
        };
        let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(n_jumps);
        for _ in 0..n_jumps {
            let tj = rng.random::<f64>() * t_end;
            let size = match &self.sampler {
                Some(s) => s.sample(&mut rng)?,
                None => 0.0,
            };
            jumps.push((tj, size));
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

        let n = cfg.n_steps;
        let mut times = Vec::with_capacity(n + n_jumps + 1);
        let mut jump_at = Vec::with_capacity(n + n_jumps + 1);
        times.push(0.0);
        jump_at.push(0.0);
        let mut ji = 0;
        for k in 1..=n {
            let tk = if k == n { t_end } else { t_end * k as f64 / n as f64 };
            let mut pending = 0.0;
            while ji < jumps.len() && jumps[ji].0 <= tk {
                let (tj, size) = jumps[ji];
                if cfg.insert_jumps && tj < tk && tj > *times.last().unwrap() {
                    times.push(tj);
                    jump_at.push(size);
                } else if cfg.insert_jumps && tj < tk {
                    *jump_at.last_mut().unwrap() += size;
                } else {
                    pending += size;
                }
                ji += 1;
            }
            times.push(tk);
            jump_at.push(pending);
        }
        let sigma = self.c.sqrt();
        let mut s = Vec::with_capacity(times.len());
        let mut steps = Vec::with_capacity(times.len() - 1);
        s.push(0.0);
        for k in 1..times.len() {
            let dt = times[k] - times[k - 1];
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = z * dt.sqrt();
            let st = Step { dt, dw, drift: self.drift_rate * dt, jump: jump_at[k] };
            s.push(s[k - 1] + st.drift + sigma * dw + st.jump);
            steps.push(st);
        }
        Ok(Path { times, s, steps, events: jumps, c: self.c })
    }

    pub fn simulate_many(&self, cfg: &SimConfig, start: u64, count: usize) -> Result<Vec<Path>> {
        (0..count as u64).into_par_iter().map(|i| self.simulate(cfg, start + i)).collect()
    }
}

/// Which law to draw paths from.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    Base,
    Tilted(&'a TiltField),
}

/// Simulates `cfg.n_paths` paths under the base or the tilted law.
pub fn simulate_paths(t: &Triplet, cfg: &SimConfig, law: Law<'_>) -> Result<Vec<Path>> {
    cfg.validate()?;
    let triplet = match law {
        Law::Base => t.clone(),
        Law::Tilted(y) => crate::tilt::tilted_triplet(t, y),
    };
    let pl = PathLaw::new(&triplet)?;
    pl.simulate_many(cfg, 0, cfg.n_paths)
}
