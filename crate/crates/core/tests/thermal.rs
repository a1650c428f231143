mod common;

use common::*;
use vqephase::lattice::{checkerboard_layers, Boundary, Geometry};
use vqephase::optimize::{run, Method, OptimizerConfig};
use vqephase::spectrum::dense;
use vqephase::thermal::{acceptance_probability, metropolis, metropolis_chain, ThermalConfig};

fn quadratic(d: Vec<f64>) -> impl FnMut(&[f64]) -> vqephase::Result<(f64, f64)> {
    move |theta: &[f64]| Ok((theta.iter().zip(&d).map(|(t, k)| 0.5 * k * t * t).sum(), 0.0))
}

fn cfg(beta: f64, seed: u64) -> ThermalConfig {
    ThermalConfig { beta, step_scale: 0.1, chain_length: 200_000, burn_in: 20_000, seed, ..ThermalConfig::default() }
}

#[test]
fn equipartition_single_mode() {
    let beta = 10.0;
    let obs = metropolis(quadratic(vec![3.0]), &[0.0], &cfg(beta, 1)).unwrap();
    let expected = 0.5 / beta;
    assert!((obs.energy - expected).abs() < 0.05 * expected, "{} vs {expected}", obs.energy);
    assert!(obs.acceptance > 0.25 && obs.acceptance < 0.65, "{}", obs.acceptance);
    assert!(obs.warnings.is_empty());
    // Var E of one quadratic mode is T²/2
    assert!((obs.var_e - 0.5 / beta / beta).abs() < 0.1 * 0.5 / beta / beta);
    assert!((obs.specific_heat - beta * beta * obs.var_e).abs() < 1e-15);
}

#[test]
fn equipartition_many_modes() {
    let beta = 4.0;
    let d: Vec<f64> = (1..=5).map(|k| k as f64).collect();
    let obs = metropolis(quadratic(d), &[0.0; 5], &cfg(beta, 2)).unwrap();
    let expected = 5.0 * 0.5 / beta;
    assert!((obs.energy - expected).abs() < 0.05 * expected, "{} vs {expected}", obs.energy);
}

#[test]
fn two_state_transition_matrix_is_stationary() {
    for &(e0, e1, beta) in &[(0.0, 1.0, 1.0), (-0.3, 0.2, 5.0), (2.0, -1.0, 0.1)] {
        // symmetric proposal: always propose the other state
        let p01 = acceptance_probability(e1 - e0, beta);
        let p10 = acceptance_probability(e0 - e1, beta);
        let w0 = (-beta * e0).exp();
        let w1 = (-beta * e1).exp();
        let (pi0, pi1) = (w0 / (w0 + w1), w1 / (w0 + w1));
        let next0 = pi0 * (1.0 - p01) + pi1 * p10;
        let next1 = pi0 * p01 + pi1 * (1.0 - p10);
        assert!((next0 - pi0).abs() < 1e-14 && (next1 - pi1).abs() < 1e-14);
        assert!((pi0 * p01 - pi1 * p10).abs() < 1e-14);
    }
}

#[test]
fn thinning_does_not_shift_estimates() {
    let d = vec![1.0, 2.0];
    let a = metropolis(quadratic(d.clone()), &[0.0; 2], &cfg(2.0, 5)).unwrap();
    let b = metropolis(quadratic(d), &[0.0; 2], &ThermalConfig { thinning: 7, ..cfg(2.0, 5) }).unwrap();
    assert!(b.samples < a.samples / 6);
    let sigma = (a.energy_sem.powi(2) + b.energy_sem.powi(2)).sqrt();
    assert!((a.energy - b.energy).abs() < 3.0 * sigma, "{} {} ± {sigma}", a.energy, b.energy);
}

#[test]
fn mistuned_step_is_flagged() {
    let c = ThermalConfig { step_scale: 1e3, tune: false, chain_length: 5_000, burn_in: 1_000, ..cfg(10.0, 3) };
    let obs = metropolis(quadratic(vec![1.0]), &[0.0], &c).unwrap();
    assert!(obs.acceptance < 0.01);
    assert_eq!(obs.warnings.len(), 1);
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        ThermalConfig { beta: 0.0, ..ThermalConfig::default() },
        ThermalConfig { beta: -1.0, ..ThermalConfig::default() },
        ThermalConfig { burn_in: 10, chain_length: 10, ..ThermalConfig::default() },
        ThermalConfig { thinning: 0, ..ThermalConfig::default() },
    ] {
        assert!(metropolis(quadratic(vec![1.0]), &[0.0], &bad).is_err());
    }
}

#[test]
fn chains_are_reproducible() {
    let a =
        metropolis(quadratic(vec![1.0]), &[0.0], &ThermalConfig { chain_length: 2000, burn_in: 100, ..cfg(1.0, 8) });
    let b =
        metropolis(quadratic(vec![1.0]), &[0.0], &ThermalConfig { chain_length: 2000, burn_in: 100, ..cfg(1.0, 8) });
    assert_eq!(a.unwrap(), b.unwrap());
}

#[test]
fn cold_chain_stays_near_optimum() {
    let s = spec(Geometry::Square, 2, 2, Boundary::Open, Boundary::Open);
    let layers = checkerboard_layers(&s).unwrap().layers.len();
    let a = ansatz(&s, 0.0, 2 * layers, None);
    let ground = dense::diagonalize(a.hamiltonian(), None).unwrap();
    let targets = vec![ground.eigenstates[0].clone()];
    let opt = OptimizerConfig {
        method: Method::Sr,
        learning_rate: 0.1,
        max_steps: 400,
        restarts: 1,
        window: 20,
        tail: 5,
        tolerance: 1e-6,
        ..OptimizerConfig::default()
    };
    let best = run(&a, &opt, &targets).unwrap();
    let theta = &best.restarts[0].final_theta;
    let e0 = ground.eigenvalues[0];
    let beta = 1000.0;
    let c = ThermalConfig { chain_length: 20_000, burn_in: 2_000, step_scale: 0.01, ..cfg(beta, 4) };
    let obs = metropolis_chain(&a, &c, theta, &targets).unwrap();
    assert!(obs.energy < e0 + 3.0 / beta, "{} vs {}", obs.energy, e0);
    assert!(obs.fidelity > 0.99);
}
