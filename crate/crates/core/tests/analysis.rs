mod common;

use common::*;
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};
use vqephase::analysis::*;
use vqephase::engine::StateVector;
use vqephase::lattice::{Boundary, Geometry};
use vqephase::optimize::sgd_step;
use vqephase::spectrum::dense;
use vqephase::Error;

#[test]
fn temperature_arithmetic() {
    let r = effective_temperature(1.0, 0.1, 10.0, 4).unwrap();
    assert!((r.temperature - 0.01).abs() < 1e-15);
    assert!((r.epsilon - 0.02).abs() < 1e-15);
    let d = effective_temperature(1.0, 0.2, 10.0, 4).unwrap();
    assert!((d.temperature - 2.0 * r.temperature).abs() < 1e-15);
    assert!((d.epsilon - 2.0 * r.epsilon).abs() < 1e-15);
    assert!(effective_temperature(1.0, 0.0, 10.0, 4).is_err());
    assert!(effective_temperature(1.0, 0.1, 0.0, 4).is_err());
    assert!(effective_temperature(-1.0, 0.1, 1.0, 4).is_err());
}

#[test]
fn specific_heat_bookkeeping() {
    assert_eq!(effective_specific_heat(8.0, 0.25), 16.0);
}

proptest! {
    #[test]
    fn epsilon_invariant_under_joint_rescaling(
        var_f in 0.0f64..10.0, eta in 1e-3f64..1.0, ns in 1.0f64..1e4, c in 0.1f64..10.0, np in 1usize..200,
    ) {
        let a = effective_temperature(var_f, eta, ns, np).unwrap();
        let b = effective_temperature(var_f, c * eta, c * ns, np).unwrap();
        prop_assert!((a.epsilon - b.epsilon).abs() <= 1e-12 * a.epsilon.max(1e-300));
        prop_assert!(a.epsilon >= 0.0);
    }
}

fn sweep(fid: &[f64], var: &[f64]) -> Vec<SweepPoint> {
    fid.iter()
        .zip(var)
        .enumerate()
        .map(|(i, (&f, &v))| SweepPoint { x: 2f64.powi(i as i32 + 1), fidelity: f, var_e: v })
        .collect()
}

#[test]
fn transition_at_variance_peak() {
    let pts = sweep(&[0.001, 0.002, 0.05, 0.4, 0.8], &[0.1, 0.2, 0.9, 0.3, 0.1]);
    let t = detect_transition(&pts).unwrap();
    assert_eq!(t.peak, 8.0);
    assert_eq!(t.departure, Some(8.0));
    assert!(!t.discrepant);
}

#[test]
fn discrepancy_is_flagged() {
    let pts = sweep(&[0.001, 0.002, 0.003, 0.004, 0.5, 0.8], &[0.1, 0.9, 0.2, 0.2, 0.1, 0.1]);
    let t = detect_transition(&pts).unwrap();
    assert_eq!(t.peak_index, 1);
    assert_eq!(t.departure_index, Some(4));
    assert!(t.discrepant);
    let none = sweep(&[0.0; 5], &[0.1, 0.9, 0.2, 0.2, 0.1]);
    assert!(detect_transition(&none).unwrap().discrepant);
}

#[test]
fn monotone_grid_is_not_bracketed() {
    let pts = sweep(&[0.001, 0.01, 0.1, 0.5, 0.9], &[0.1, 0.2, 0.3, 0.4, 0.5]);
    assert!(matches!(detect_transition(&pts), Err(Error::TransitionNotBracketed(_))));
    assert!(detect_transition(&pts[..3]).is_err());
}

#[test]
fn custom_statistic_selects_peak() {
    let pts = sweep(&[0.0, 0.0, 0.1, 0.5], &[1.0, 0.5, 0.4, 0.1]);
    assert!(detect_transition(&pts).is_err());
    let t = detect_transition_with(&pts, |p| p.x * p.x * p.var_e).unwrap();
    assert_eq!(t.peak_index, 2);
}

#[test]
fn linear_fit_recovers_exact_line() {
    let x = [1.0, 2.0, 3.0, 5.0];
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
    let f = linear_fit(&x, &y).unwrap();
    assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!(matches!(linear_fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::Fit(_))));
}

fn synthetic(alpha: f64, sigma: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let x: Vec<f64> = (2..=9).map(|k| 2f64.powi(k)).collect();
    let y = x.iter().map(|v| 2.0 * v.powf(-alpha) + 0.01 + noise.sample(&mut r)).collect();
    (x, y)
}

#[test]
fn infidelity_fit_fixed_alpha() {
    let (x, y) = synthetic(1.0, 1e-4, 1);
    let f = fit_infidelity(&x, &y, false).unwrap();
    assert_eq!(f.alpha, 1.0);
    assert!((f.a - 2.0).abs() < 3.0 * f.a_err(), "{} ± {}", f.a, f.a_err());
    assert!((f.i0 - 0.01).abs() < 3.0 * f.i0_err(), "{} ± {}", f.i0, f.i0_err());
}

#[test]
fn infidelity_fit_free_alpha() {
    for seed in 0..5 {
        let (x, y) = synthetic(1.0, 1e-4, seed);
        let f = fit_infidelity(&x, &y, true).unwrap();
        assert!((f.alpha - 1.0).abs() < 3.0 * f.alpha_err(), "{} ± {}", f.alpha, f.alpha_err());
        assert!((f.a - 2.0).abs() < 3.0 * f.a_err());
        assert!((f.i0 - 0.01).abs() < 3.0 * f.i0_err());
        assert!(f.alpha_err() > 0.0 && f.alpha_err() < 0.05);
    }
    let (x, y) = synthetic(0.7, 0.0, 0);
    let f = fit_infidelity(&x, &y, true).unwrap();
    assert!((f.alpha - 0.7).abs() < 1e-6, "{}", f.alpha);
}

#[test]
fn infidelity_fit_guards() {
    assert!(fit_infidelity(&[1.0, 2.0], &[0.1, 0.2], false).is_err());
    assert!(fit_infidelity(&[1.0, -2.0, 3.0], &[0.1, 0.2, 0.3], false).is_err());
    assert!(fit_infidelity(&[2.0, 2.0, 2.0], &[0.1, 0.2, 0.3], false).is_err());
}

#[test]
fn gap_scaling_recovers_inverse_square() {
    let gaps = [0.2, 0.5, 0.9, 1.4];
    let a: Vec<f64> = gaps.iter().map(|d| 3.0 / (d * d)).collect();
    let f = fit_gap_scaling(&gaps, &a).unwrap();
    assert!((f.exponent + 2.0).abs() < 1e-12);
    assert!((f.prefactor - 3.0).abs() < 1e-10);
    assert!(fit_gap_scaling(&[0.1, 0.0, 1.0], &[1.0, 1.0, 1.0]).is_err());
    assert!(fit_gap_scaling(&[0.1, 1.0], &[1.0, 1.0]).is_err());
}

#[test]
fn gap_scaling_with_noise_has_error_bar() {
    let mut r = rng(4);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let gaps: Vec<f64> = (1..=8).map(|k| 0.15 * k as f64).collect();
    let a: Vec<f64> = gaps.iter().map(|d| 3.0 / (d * d) * f64::exp(noise.sample(&mut r))).collect();
    let f = fit_gap_scaling(&gaps, &a).unwrap();
    assert!((f.exponent + 2.0).abs() < 3.0 * f.exponent_err, "{} ± {}", f.exponent, f.exponent_err);
}

#[test]
fn decay_comparison_tells_forms_apart() {
    let x = [2.0f64, 3.0, 4.0, 5.0, 6.0];
    let exp: Vec<f64> = x.iter().map(|v| (-0.9 * v).exp() * (1.0 + 0.01 * (v * 7.0).sin())).collect();
    let pow: Vec<f64> = x.iter().map(|v| v.powf(-1.5) * (1.0 + 0.01 * (v * 7.0).sin())).collect();
    assert!(!compare_decay(&x, &exp).unwrap().prefers_power_law());
    assert!(compare_decay(&x, &pow).unwrap().prefers_power_law());
}

#[test]
fn barren_scan_zero_width_is_deterministic() {
    let s = spec(Geometry::Square, 2, 3, Boundary::Open, Boundary::Open);
    let a = ansatz(&s, 0.4, 4, None);
    let scan = barren_scan(&a, 5, (0.03, 0.03), 1).unwrap();
    assert_eq!(scan.sem, 0.0);
    let theta = vec![0.03; a.parameter_count()];
    let g = a.exact_gradient(&theta).unwrap();
    let expected = g.forces.iter().map(|f| f * f).sum::<f64>().sqrt() / (a.parameter_count() * 6) as f64;
    assert!((scan.mean - expected).abs() < 1e-15);
    assert!(barren_scan(&a, 1, (0.0, 0.1), 1).is_err());
    let random = barren_scan(&a, 20, (0.0, 0.1), 1).unwrap();
    assert!(random.sem > 0.0 && random.mean > 0.0);
}

#[test]
fn overlaps_over_complete_basis_sum_to_one() {
    let s = spec(Geometry::Square, 2, 2, Boundary::Open, Boundary::Open);
    let h = hamiltonian(&s, 0.3);
    let basis: Vec<StateVector> =
        (0..=4).flat_map(|up| dense::diagonalize(&h, Some(up)).unwrap().eigenstates).collect();
    assert_eq!(basis.len(), 16);
    let psi = StateVector::random(4, &mut rng(2));
    let stats = overlap_histogram(std::slice::from_ref(&psi), &basis, 16, 8).unwrap();
    assert!((stats.overlaps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((stats.mean - 1.0 / 16.0).abs() < 1e-12);
    assert_eq!(stats.histogram.counts.iter().sum::<usize>(), 16);
    assert!(!stats.short);
    let more = overlap_histogram(&[psi], &basis, 40, 8).unwrap();
    assert!(more.short && more.overlaps.len() == 16);
}

#[test]
fn total_cost_is_product() {
    assert_eq!(total_cost(120.0, 16.0), 1920.0);
}

/// Discrete SGD with Gaussian force noise on E = Σ D_k θ_k²/2 has the exact
/// stationary energy Σ_k T / (2 (2 − η D_k)) with T = η Var f / N_s.
#[test]
fn langevin_toy_matches_discrete_stationary_energy() {
    let d = [0.5, 1.0, 2.0, 4.0];
    let (eta, var_f, ns) = (0.05, 2.0, 8.0);
    let t = effective_temperature(var_f, eta, ns, d.len()).unwrap().temperature;
    let expected: f64 = d.iter().map(|k| t / (2.0 * (2.0 - eta * k))).sum();
    let noise = Normal::new(0.0, (var_f / ns).sqrt()).unwrap();
    let mut r = rng(6);
    let mut theta = vec![0.0; d.len()];
    let (burn, steps) = (5_000, 400_000);
    let mut acc = 0.0;
    for i in 0..burn + steps {
        let f: Vec<f64> = theta.iter().zip(&d).map(|(x, k)| k * x + noise.sample(&mut r)).collect();
        theta = sgd_step(&theta, &f, eta).unwrap();
        if i >= burn {
            acc += theta.iter().zip(&d).map(|(x, k)| 0.5 * k * x * x).sum::<f64>();
        }
    }
    let mean = acc / steps as f64;
    assert!((mean - expected).abs() < 0.05 * expected, "{mean} vs {expected}");
}
