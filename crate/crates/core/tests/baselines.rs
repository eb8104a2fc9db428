use std::f64::consts::LN_2;
use std::sync::Arc;

use approx::assert_relative_eq;

use szilard::baselines::{
    classical_optimum, classical_work, ideal_canonical_log_z, perturbative_energy, IdealGasModel,
    PerturbativeModel, Statistics,
};
use szilard::engine::{optimal_work, optimize_insertion, SearchOptions};
use szilard::spectrum::{BasisPolicy, SpectrumStore};
use szilard::thermo::{outcome_distribution, ExactModel};
use szilard::units::EngineParams;

/// Sum over occupation vectors on `levels` with `n` particles.
fn brute_force_z(n: usize, levels: &[f64], t: f64, max_occupation: usize) -> f64 {
    fn rec(i: usize, left: usize, levels: &[f64], t: f64, cap: usize, energy: f64) -> f64 {
        if i == levels.len() {
            return if left == 0 { (-energy / t).exp() } else { 0.0 };
        }
        (0..=left.min(cap))
            .map(|k| {
                rec(
                    i + 1,
                    left - k,
                    levels,
                    t,
                    cap,
                    energy + k as f64 * levels[i],
                )
            })
            .sum()
    }
    rec(0, n, levels, t, max_occupation, 0.0)
}

#[test]
fn ideal_recursion_matches_brute_force() {
    // the top level must carry negligible weight for the recursion to accept it
    let levels = [0.3, 1.1, 60.0];
    for t in [0.4, 1.0, 2.0] {
        for n in 1..=3 {
            let bose = ideal_canonical_log_z(n, &levels, t, Statistics::Bose).unwrap();
            assert_relative_eq!(
                bose,
                brute_force_z(n, &levels, t, n).ln(),
                max_relative = 1e-12
            );
        }
        for n in 1..=3 {
            let fermi = ideal_canonical_log_z(n, &levels, t, Statistics::Fermi).unwrap();
            assert_relative_eq!(
                fermi,
                brute_force_z(n, &levels, t, 1).ln(),
                max_relative = 1e-12
            );
        }
    }
}

#[test]
fn fermi_recursion_matches_brute_force_on_many_levels() {
    let levels: Vec<f64> = (1..=40).map(|k| (k * k) as f64).collect();
    for n in 1..=3 {
        let got = ideal_canonical_log_z(n, &levels, 1.5, Statistics::Fermi).unwrap();
        assert_relative_eq!(
            got,
            brute_force_z(n, &levels, 1.5, 1).ln(),
            max_relative = 1e-12
        );
    }
}

fn classical_gap(n: usize, t: f64) -> f64 {
    let model = IdealGasModel {
        statistics: Statistics::Bose,
    };
    let params = EngineParams::new(n, 0.0, t).unwrap();
    let quantum = optimize_insertion(&model, &params, &SearchOptions::default()).unwrap();
    let classical = classical_optimum(n).unwrap().value / LN_2;
    (quantum.best.ratio - classical).abs() / classical
}

#[test]
fn classical_limit_of_ideal_bosons() {
    // the wall layer of width ~λ_th shifts Z_1 by −1/2, so the gap closes like (E1/k_BT)^{1/2}
    for n in 1..=2 {
        assert!(classical_gap(n, 100.0) < 0.03, "N={n}");
    }
    for n in 1..=3 {
        assert!(classical_gap(n, 1000.0) < 0.03, "N={n}");
    }
    for n in 2..=3 {
        let shrink = classical_gap(n, 10000.0) / classical_gap(n, 1000.0);
        assert!((0.2..0.45).contains(&shrink), "N={n}: {shrink}");
    }
}

#[test]
fn classical_closed_form_limits() {
    assert_relative_eq!(classical_work(1, 0.5).unwrap(), LN_2, epsilon = 1e-12);
    // two particles at 1/2: outcomes 1/4, 1/2, 1/4; removals at 0, 1/2, 1 recover 1, 1/2, 1
    let p: [f64; 3] = [0.25, 0.5, 0.25];
    let q: [f64; 3] = [1.0, 0.5, 1.0];
    let expected: f64 = -p.iter().zip(&q).map(|(p, q)| p * (p / q).ln()).sum::<f64>();
    assert_relative_eq!(classical_work(2, 0.5).unwrap(), expected, epsilon = 1e-12);
    // three particles at 1/3: binomial outcomes, removals at n/3
    let binom = |n: usize, k: usize, x: f64| {
        let c = [1.0, 3.0, 3.0, 1.0][k];
        assert_eq!(n, 3);
        c * x.powi(k as i32) * (1.0 - x).powi((n - k) as i32)
    };
    let expected: f64 = -(0..=3)
        .map(|k| {
            let p = binom(3, k, 1.0 / 3.0);
            p * (p / binom(3, k, k as f64 / 3.0)).ln()
        })
        .sum::<f64>();
    assert_relative_eq!(
        classical_work(3, 1.0 / 3.0).unwrap(),
        expected,
        epsilon = 1e-12
    );
}

#[test]
fn perturbative_error_is_second_order() {
    let store = Arc::new(SpectrumStore::new(BasisPolicy::default()));
    let n = 3;
    let residual = |g: f64| {
        // all three particles on one side of a wall at 1/2
        let unit = store.unit_spectrum(n, g * 0.5, 1.0).unwrap();
        assert!(unit.converged);
        let exact = unit.ground_energy() / 0.25;
        (exact - perturbative_energy(3, 3, 0.5, g).unwrap()).abs()
    };
    let r: Vec<f64> = [-0.02, -0.04, -0.08].iter().map(|&g| residual(g)).collect();
    for w in r.windows(2) {
        let ratio = w[1] / w[0];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn perturbative_low_temperature_plateau() {
    for n in [2usize, 3, 4] {
        let params = EngineParams::new(n, -1.0, 0.02).unwrap();
        let w = optimal_work(&PerturbativeModel, 0.5, &params, &SearchOptions::default()).unwrap();
        assert!((w.ratio - 1.0).abs() < 0.01, "N={n}: {}", w.ratio);
    }
}

#[test]
fn free_pair_at_midpoint_is_balanced() {
    let store = Arc::new(SpectrumStore::new(BasisPolicy::default()));
    let params = EngineParams::new(2, 0.0, 0.7).unwrap();
    let exact = ExactModel::new(store, params.temperature);
    let d = outcome_distribution(&exact, 0.5, &params).unwrap();
    assert_relative_eq!(d.probabilities[0], d.probabilities[2], max_relative = 1e-12);
    let ideal = IdealGasModel {
        statistics: Statistics::Bose,
    };
    let reference = outcome_distribution(&ideal, 0.5, &params).unwrap();
    for (a, b) in d.probabilities.iter().zip(&reference.probabilities) {
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }
}

#[test]
fn high_temperature_outcomes_become_binomial() {
    let model = IdealGasModel {
        statistics: Statistics::Bose,
    };
    for n in 1..=4usize {
        let params = EngineParams::new(n, 0.0, 1e6).unwrap();
        for wall in [0.3, 0.5, 0.65] {
            let d = outcome_distribution(&model, wall, &params).unwrap();
            let mut c = 1.0;
            for (k, p) in d.probabilities.iter().enumerate() {
                let binom = c * wall.powi(k as i32) * (1.0 - wall).powi((n - k) as i32);
                assert!(
                    (p - binom).abs() / binom < 0.02,
                    "N={n} ℓ={wall} n={k}: {p} vs {binom}"
                );
                c = c * (n - k) as f64 / (k + 1) as f64;
            }
        }
    }
}
