mod common;

use elmd::characteristics::{PartitionCase, Triplet};
use elmd::growth::{growth, growth_derivative};
use elmd::jump_measure::JumpMeasure;
use elmd::simulate::{density_path, log_density_path, PathLaw, SimConfig};
use elmd::tilt::build_tilt;
use elmd::verify::{martingale_test, pairwise_sum, DEFAULT_THRESHOLD};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.9f64..2.0, 0.05f64..2.0), 1..5)
        .prop_map(|v| v.into_iter().filter(|(x, _)| x.abs() > 1e-3).collect::<Vec<_>>())
        .prop_filter("needs an atom", |v| !v.is_empty())
}

fn normals(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Vec<f64> {
    (0..n).map(|_| mean + Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

fn interior(t: &Triplet) -> (f64, f64) {
    let b = t.bounds();
    let lo = if b.l.is_finite() { b.l } else { -5.0 };
    let hi = if b.r.is_finite() { b.r } else { 5.0 };
    (lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn growth_is_concave_on_the_interval(a in -2.0f64..2.0, c in 0.0f64..1.0, at in atoms(), u in 0.05f64..0.95, v in 0.05f64..0.95) {
        let t = Triplet::new(a, c, JumpMeasure::atomic(&at).unwrap(), 1.0);
        let (lo, hi) = interior(&t);
        let p = lo + u * (hi - lo);
        let q = lo + v * (hi - lo);
        let m = 0.5 * (p + q);
        let gp = growth(&t, p).unwrap();
        let gq = growth(&t, q).unwrap();
        let gm = growth(&t, m).unwrap();
        prop_assert!(gm >= 0.5 * (gp + gq) - 1e-12 * (1.0 + gp.abs() + gq.abs()));
    }

    #[test]
    fn derivative_is_nonincreasing(a in -2.0f64..2.0, c in 0.0f64..1.0, at in atoms(), u in 0.05f64..0.95, v in 0.05f64..0.95) {
        let t = Triplet::new(a, c, JumpMeasure::atomic(&at).unwrap(), 1.0);
        let (lo, hi) = interior(&t);
        let (p, q) = if u <= v { (u, v) } else { (v, u) };
        let dp = growth_derivative(&t, lo + p * (hi - lo)).unwrap();
        let dq = growth_derivative(&t, lo + q * (hi - lo)).unwrap();
        prop_assert!(dq <= dp + 1e-10 * (1.0 + dp.abs()));
    }

    #[test]
    fn growth_mirrors_under_reflection(a in -2.0f64..2.0, c in 0.0f64..1.0, at in atoms(), u in 0.05f64..0.95) {
        let t = Triplet::new(a, c, JumpMeasure::atomic(&at).unwrap(), 1.0);
        let (lo, hi) = interior(&t);
        let p = lo + u * (hi - lo);
        let g = growth(&t, p).unwrap();
        let gm = growth(&t.reflect(), -p).unwrap();
        prop_assert!((g - gm).abs() <= 1e-12 * (1.0 + g.abs()));
    }

    #[test]
    fn tilt_preserves_finite_mass(seed in 0u64..10_000, case_ix in 0usize..7) {
        let case = PartitionCase::ALL[case_ix];
        let mut r = common::rng(seed);
        let t = common::random_model(&mut r, case, false);
        let y = build_tilt(&t, 0.3).unwrap();
        let m = t.kappa.total_mass();
        prop_assert!((y.mass_shift().unwrap()).abs() <= 1e-8 * m);
    }
}

#[test]
fn density_path_is_the_product_over_jumps() {
    let t = common::exponential_model(1.0);
    let y = build_tilt(&t, 0.1).unwrap();
    let law = PathLaw::new(&t).unwrap();
    let cfg = SimConfig { n_paths: 200, n_steps: 8, seed: 11, insert_jumps: true };
    for i in 0..200 {
        let path = law.simulate(&cfg, i).unwrap();
        let l = density_path(&path, &y).unwrap();
        let ll = log_density_path(&path, &y).unwrap();
        let mut direct = 1.0;
        for (_, dx) in path.jumps() {
            direct *= y.evaluate(dx).unwrap();
        }
        let last = *l.last().unwrap();
        assert!((last - direct).abs() <= 1e-12 * direct.max(1.0), "path {i}: {last} vs {direct}");
        assert!((ll.last().unwrap().exp() - last).abs() <= 1e-12 * last.max(1.0));
        assert_eq!(l[0], 1.0);
    }
}

#[test]
fn density_path_ignores_jump_insertion() {
    let t = common::exponential_model(1.0);
    let y = build_tilt(&t, 0.1).unwrap();
    let law = PathLaw::new(&t).unwrap();
    for insert_jumps in [true, false] {
        let cfg = SimConfig { n_paths: 50, n_steps: 4, seed: 5, insert_jumps };
        for i in 0..50 {
            let path = law.simulate(&cfg, i).unwrap();
            let direct: f64 = path.jumps().map(|(_, dx)| y.evaluate(dx).unwrap()).product();
            let last = *density_path(&path, &y).unwrap().last().unwrap();
            assert!((last - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }
}

#[test]
fn z_test_is_calibrated_on_gaussian_samples() {
    // 50 sets of exact-mean samples; at 3.5σ the false-alarm rate is about
    // 5e-4 per set.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = 0;
    for k in 0..50 {
        let xs: Vec<f64> = normals(&mut rng, 2000, 1.0);
        let r = martingale_test(&format!("set{k}"), &xs, 1.0, DEFAULT_THRESHOLD);
        if !r.pass {
            failures += 1;
        }
    }
    assert!(failures <= 2, "{failures} of 50 exact-mean sets rejected");
}

#[test]
fn z_test_detects_a_shifted_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xs: Vec<f64> = normals(&mut rng, 5000, 1.1);
    assert!(!martingale_test("shifted", &xs, 1.0, DEFAULT_THRESHOLD).pass);
}

#[test]
fn pairwise_sum_matches_exact_integer_sum() {
    let xs: Vec<f64> = (1..=100_000).map(|k| k as f64).collect();
    assert_eq!(pairwise_sum(&xs), 100_000.0 * 100_001.0 / 2.0);
}
