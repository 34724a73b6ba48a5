#![allow(dead_code)]

use elmd::characteristics::{PartitionCase, Triplet};
use elmd::density::{DensityKind, DensityPart};
use elmd::jump_measure::JumpMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unif<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn configs_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Atoms plus density parts, before assembly.
#[derive(Debug, Clone, Default)]
pub struct Pieces {
    pub atoms: Vec<(f64, f64)>,
    pub parts: Vec<DensityPart>,
}

impl Pieces {
    pub fn join(mut self, other: Pieces) -> Pieces {
        self.atoms.extend(other.atoms);
        self.parts.extend(other.parts);
        self
    }

    pub fn reflect(self) -> Pieces {
        Pieces {
            atoms: self.atoms.into_iter().map(|(x, w)| (-x, w)).collect(),
            parts: self.parts.iter().map(DensityPart::reflect).collect(),
        }
    }

    pub fn build(&self) -> JumpMeasure {
        JumpMeasure::sum(&self.atoms, self.parts.clone()).unwrap()
    }
}

fn part(kind: DensityKind, lo: f64, hi: f64) -> DensityPart {
    DensityPart::new(kind, lo, hi).unwrap()
}

/// Positive jumps with unbounded support, sometimes of infinite activity.
pub fn pos_unbounded<R: Rng>(rng: &mut R, allow_infinite: bool) -> Pieces {
    let mut p = Pieces::default();
    p.parts.push(part(
        DensityKind::Exponential { scale: unif(rng, 0.2, 2.0), rate: unif(rng, 0.5, 3.0) },
        0.0,
        f64::INFINITY,
    ));
    match rng.random_range(0..3) {
        0 if allow_infinite => p.parts.push(part(
            DensityKind::Power { coef: unif(rng, 0.05, 0.5), exponent: unif(rng, 1.1, 1.9) },
            0.0,
            unif(rng, 0.2, 1.0),
        )),
        1 => p.atoms.push((unif(rng, 0.1, 3.0), unif(rng, 0.1, 1.0))),
        _ => {}
    }
    p
}

/// Negative jumps on `[x_min, 0)` with one of several edge behaviours.
pub fn neg_bounded<R: Rng>(rng: &mut R) -> Pieces {
    let x_min = unif(rng, -0.95, -0.05);
    let mut p = Pieces::default();
    match rng.random_range(0..5) {
        0 => p.parts.push(part(DensityKind::Uniform { height: unif(rng, 0.2, 3.0) }, x_min, 0.0)),
        1 => {
            p.atoms.push((x_min, unif(rng, 0.1, 1.0)));
            p.atoms.push((x_min * unif(rng, 0.1, 0.9), unif(rng, 0.1, 1.0)));
        }
        2 => {
            let mid = x_min * unif(rng, 0.3, 0.7);
            p.parts.push(part(
                DensityKind::Table { xs: vec![x_min, mid, 0.0], ys: vec![0.0, unif(rng, 0.5, 3.0), unif(rng, 0.1, 1.0)] },
                x_min,
                0.0,
            ));
        }
        3 => p.parts.push(part(
            DensityKind::Exponential { scale: unif(rng, 0.2, 2.0), rate: unif(rng, 0.5, 3.0) },
            x_min,
            0.0,
        )),
        _ => {
            p.parts.push(part(DensityKind::Uniform { height: unif(rng, 0.2, 3.0) }, x_min, x_min * 0.5));
            p.atoms.push((x_min * unif(rng, 0.1, 0.4), unif(rng, 0.1, 1.0)));
        }
    }
    p
}

pub fn pieces_for_case<R: Rng>(rng: &mut R, case: PartitionCase, allow_infinite: bool) -> Pieces {
    use PartitionCase::*;
    match case {
        P1 => pos_unbounded(rng, allow_infinite),
        P2 => pos_unbounded(rng, allow_infinite).reflect(),
        P3 => neg_bounded(rng),
        P4 => neg_bounded(rng).reflect(),
        P5 => pos_unbounded(rng, allow_infinite).join(neg_bounded(rng)),
        P6 => pos_unbounded(rng, allow_infinite).join(neg_bounded(rng)).reflect(),
        P7 => neg_bounded(rng).join(neg_bounded(rng).reflect()),
        P8 => pos_unbounded(rng, allow_infinite).join(pos_unbounded(rng, allow_infinite).reflect()),
        P9 => Pieces::default(),
    }
}

/// A random viable triplet whose support interval falls in `case`.
pub fn random_model<R: Rng>(rng: &mut R, case: PartitionCase, allow_infinite: bool) -> Triplet {
    let kappa = pieces_for_case(rng, case, allow_infinite).build();
    let c = if rng.random_bool(0.5) { 0.0 } else { unif(rng, 0.01, 0.5) };
    let pos = kappa.side_mass(elmd::jump_measure::Side::Positive) > 0.0;
    let neg = kappa.side_mass(elmd::jump_measure::Side::Negative) > 0.0;
    let mean = if pos || neg { kappa.integrate_all(|x| x).unwrap() } else { 0.0 };
    let a = match (c == 0.0, pos, neg) {
        (true, true, false) => mean - unif(rng, 0.05, 3.0),
        (true, false, true) => mean + unif(rng, 0.05, 3.0),
        (true, false, false) => 0.0,
        _ => unif(rng, -2.0, 2.0),
    };
    let t = Triplet::new(a, c, kappa, 1.0).validate().unwrap();
    assert_eq!(t.bounds().case(), case, "generator produced the wrong case");
    t
}

pub fn cp_model() -> Triplet {
    Triplet::new(0.1, 0.0, JumpMeasure::atomic(&[(-0.5, 1.0)]).unwrap(), 1.0)
}

pub fn exponential_model(horizon: f64) -> Triplet {
    let k = JumpMeasure::density(part(DensityKind::Exponential { scale: 1.0, rate: 1.0 }, 0.0, f64::INFINITY)).unwrap();
    Triplet::new(-1.0, 0.0, k, horizon)
}
