mod common;

use common::*;
use proptest::prelude::*;
use vqephase::ansatz::Estimator;
use vqephase::lattice::{Boundary::*, Geometry, SymmetrySelection};
use vqephase::shots::{component_rng, estimate_matrix_element, force_variance, ShotConfig, ShotMode, ShotSampler};

fn cfg(mode: ShotMode, shots: u64, seed: u64) -> ShotConfig {
    ShotConfig { shots, mode, seed, sample_metric: false }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn certain_outcomes_are_exact() {
    let mut r = rng(1);
    for shots in [1, 7, 1000] {
        assert_eq!(estimate_matrix_element(1.0, shots, &mut r).unwrap(), 1.0);
        assert_eq!(estimate_matrix_element(-1.0, shots, &mut r).unwrap(), -1.0);
    }
    assert!(estimate_matrix_element(1.0 + 1e-9, 3, &mut r).is_ok());
    assert!(estimate_matrix_element(1.01, 3, &mut r).is_err());
}

#[test]
fn binomial_statistics_at_zero() {
    let shots = 10_000;
    let mut r = rng(2);
    let xs: Vec<f64> = (0..10_000).map(|_| estimate_matrix_element(0.0, shots, &mut r).unwrap()).collect();
    let (m, v) = mean_var(&xs);
    let sigma = (1.0 / shots as f64 / xs.len() as f64).sqrt();
    assert!(m.abs() < 5.0 * sigma, "{m}");
    assert!((v * shots as f64 - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn exact_mode_is_bitwise_exact() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let a = ansatz(&s, 0.4, 4, None);
    let theta = random_theta(a.parameter_count(), &mut rng(3), 1.0);
    let mut sampler = ShotSampler::new(ShotConfig::exact()).unwrap();
    assert_eq!(sampler.gradient(&a, &theta).unwrap(), a.exact_gradient(&theta).unwrap());
}

#[test]
fn sampled_forces_are_unbiased_for_identity_group() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let a = ansatz(&s, 0.4, 3, None);
    let theta = random_theta(a.parameter_count(), &mut rng(4), 1.0);
    let exact = a.exact_gradient(&theta).unwrap();
    let mut sampler = ShotSampler::new(cfg(ShotMode::HadamardBernoulli, 16, 5)).unwrap();
    let draws: Vec<Vec<f64>> = (0..1000).map(|_| sampler.gradient(&a, &theta).unwrap().forces).collect();
    for k in 0..a.parameter_count() {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let (m, v) = mean_var(&col);
        let se = (v / col.len() as f64).sqrt();
        assert!((m - exact.forces[k]).abs() < 3.0 * se.max(1e-12) + 1e-12, "k={k}: {m} vs {}", exact.forces[k]);
    }
}

#[test]
fn variance_scales_inversely_with_shots() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let a = ansatz(&s, 0.4, 3, None);
    let theta = random_theta(a.parameter_count(), &mut rng(6), 1.0);
    let predicted = force_variance(&a, &theta).unwrap();
    let k = 3;
    let mut points = Vec::new();
    for shots in [4u64, 16, 64, 256] {
        let mut sampler = ShotSampler::new(cfg(ShotMode::HadamardBernoulli, shots, 7)).unwrap();
        let col: Vec<f64> = (0..1500).map(|_| sampler.gradient(&a, &theta).unwrap().forces[k]).collect();
        let (_, v) = mean_var(&col);
        assert!((v * shots as f64 / predicted[k] - 1.0).abs() < 0.15);
        points.push(((shots as f64).ln(), v.ln()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn projected_estimates_converge_to_exact() {
    let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
    let h = hamiltonian(&s, 0.5);
    let p = ground_projector(&s, &h, SymmetrySelection::Translations);
    let a = ansatz(&s, 0.5, 2, Some(p));
    let theta = random_theta(a.parameter_count(), &mut rng(8), 1.0);
    let exact = a.exact_gradient(&theta).unwrap();
    let mut sampler = ShotSampler::new(cfg(ShotMode::HadamardBernoulli, 1 << 22, 9)).unwrap();
    let g = sampler.gradient(&a, &theta).unwrap();
    assert_eq!(g.estimator, Estimator::Sampled { shots: 1 << 22 });
    assert!((g.energy - exact.energy).abs() < 5e-3);
    assert!((g.norm - exact.norm).abs() < 5e-3);
    for (x, y) in g.forces.iter().zip(&exact.forces) {
        assert!((x - y).abs() < 2e-2, "{x} vs {y}");
    }
    for (x, y) in g.connection.iter().zip(&exact.connection) {
        assert!((x.re - y.re).abs() < 5e-3);
    }
    assert!(sampler.shots_spent > 0);
}

#[test]
fn projected_variance_prediction_matches_empirical() {
    let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
    let h = hamiltonian(&s, 0.5);
    let p = ground_projector(&s, &h, SymmetrySelection::Translations);
    let a = ansatz(&s, 0.5, 2, Some(p));
    let theta = random_theta(a.parameter_count(), &mut rng(10), 1.0);
    let predicted = force_variance(&a, &theta).unwrap();
    let shots = 4096;
    let mut sampler = ShotSampler::new(cfg(ShotMode::HadamardBernoulli, shots, 11)).unwrap();
    let draws: Vec<Vec<f64>> = (0..400).map(|_| sampler.gradient(&a, &theta).unwrap().forces).collect();
    for k in [0, 5] {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let (_, v) = mean_var(&col);
        let ratio = v * shots as f64 / predicted[k];
        assert!((ratio - 1.0).abs() < 0.25, "k={k} ratio {ratio}");
    }
}

#[test]
fn surrogate_noise_has_requested_variance() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let a = ansatz(&s, 0.4, 3, None);
    let theta = random_theta(a.parameter_count(), &mut rng(12), 1.0);
    let exact = a.exact_gradient(&theta).unwrap();
    let shots = 32;
    let mut sampler = ShotSampler::new(cfg(ShotMode::GaussianSurrogate, shots, 13)).unwrap();
    let draws: Vec<Vec<f64>> = (0..3000).map(|_| sampler.gradient(&a, &theta).unwrap().forces).collect();
    let var = sampler.surrogate_variance().unwrap().to_vec();
    for k in [0, 2] {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let (m, v) = mean_var(&col);
        assert!((m - exact.forces[k]).abs() < 4.0 * (v / 3000.0).sqrt());
        assert!((v * shots as f64 / var[k] - 1.0).abs() < 0.1);
    }
}

#[test]
fn identical_seeds_reproduce() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let a = ansatz(&s, 0.4, 3, None);
    let theta = random_theta(a.parameter_count(), &mut rng(14), 1.0);
    let run = || {
        let mut sampler = ShotSampler::new(cfg(ShotMode::HadamardBernoulli, 8, 99)).unwrap();
        (0..5).map(|_| sampler.gradient(&a, &theta).unwrap().forces).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn sampled_metric_is_symmetric_and_close() {
    let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
    let h = hamiltonian(&s, 0.5);
    let p = ground_projector(&s, &h, SymmetrySelection::Translations);
    let a = ansatz(&s, 0.5, 2, Some(p));
    let theta = random_theta(a.parameter_count(), &mut rng(15), 1.0);
    let exact = a.metric(&theta).unwrap().0;
    let mut sampler = ShotSampler::new(ShotConfig {
        shots: 1 << 22,
        mode: ShotMode::HadamardBernoulli,
        seed: 1,
        sample_metric: true,
    })
    .unwrap();
    let g = sampler.metric(&a, &theta).unwrap();
    for i in 0..g.size {
        for j in 0..g.size {
            assert_eq!(g.get(i, j), g.get(j, i));
            assert!((g.get(i, j).re - exact.get(i, j).re).abs() < 2e-2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn element_estimates_stay_in_range(x in -1.0f64..1.0, shots in 1u64..200, seed in 0u64..1000) {
        let e = estimate_matrix_element(x, shots, &mut component_rng(seed, 0, 0)).unwrap();
        prop_assert!((-1.0..=1.0).contains(&e));
        prop_assert!(vqephase::shots::single_shot_variance(x) / shots as f64 <= 1.0 / shots as f64);
    }
}
