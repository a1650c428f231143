mod common;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use vqephase::ansatz::{prepare, Ansatz, Circuit, SymmetryProjector};
use vqephase::engine::{dimer_state, DimerPattern, StateVector};
use vqephase::lattice::{
    checkerboard_layers, dimer_pairs, symmetry_group, Boundary::*, DimerAlignment, Geometry, Irrep, SymmetrySelection,
};
use vqephase::spectrum::{dense, total_spin_sq, HamiltonianSpec};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense 2^N × 2^N matrix of exp(iθP_ij), built from the SWAP permutation.
fn eswap_matrix(n: usize, i: usize, j: usize, theta: f64) -> DMatrix<Complex64> {
    let dim = 1 << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for x in 0..dim {
        let bi = (x >> i) & 1;
        let bj = (x >> j) & 1;
        let y = (x & !(1 << i) & !(1 << j)) | (bj << i) | (bi << j);
        m[(x, x)] += Complex64::new(theta.cos(), 0.0);
        m[(y, x)] += Complex64::new(0.0, theta.sin());
    }
    m
}

fn as_column(v: &StateVector) -> DMatrix<Complex64> {
    DMatrix::from_column_slice(v.dim(), 1, v.amplitudes())
}

fn distance(a: &StateVector, b: &StateVector) -> f64 {
    let mut d = a.clone();
    d.add_scaled(-ONE, b);
    d.norm()
}

fn fd_energy(a: &Ansatz, theta: &[f64], k: usize, h: f64) -> f64 {
    let mut p = theta.to_vec();
    p[k] += h;
    let up = a.projected_energy(&p).unwrap().0;
    p[k] -= 2.0 * h;
    let down = a.projected_energy(&p).unwrap().0;
    (up - down) / (2.0 * h)
}

#[test]
fn zero_parameters_return_the_dimer_state() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let a = ansatz(&s, 0.3, 5, None);
    let psi = a.prepare(&vec![0.0; a.parameter_count()]).unwrap();
    assert_eq!(&psi, a.reference());
}

#[test]
fn matches_dense_gate_product() {
    let s = spec(Geometry::Square, 2, 2, Periodic, Periodic);
    let layers = checkerboard_layers(&s).unwrap();
    let circuit = Circuit::new(&layers, 1).unwrap();
    let pattern = DimerPattern::new(4, dimer_pairs(&s, DimerAlignment::J1).unwrap()).unwrap();
    let theta = random_theta(circuit.parameter_count(), &mut rng(5), 3.0);
    let psi = prepare(&circuit, &theta, &pattern).unwrap();
    let mut u = as_column(&dimer_state(&pattern));
    for (&(i, j), &t) in circuit.gates().iter().zip(&theta) {
        u = eswap_matrix(4, i, j, t) * u;
    }
    for (a, b) in psi.amplitudes().iter().zip(u.iter()) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn circuit_output_is_singlet() {
    let s = spec(Geometry::Hexagonal, 2, 2, Periodic, Periodic);
    let a = ansatz(&s, 0.2, 6, None);
    let theta = random_theta(a.parameter_count(), &mut rng(1), 3.0);
    assert!(total_spin_sq(&a.prepare(&theta).unwrap()).abs() < 1e-10);
}

#[test]
fn derivative_states_match_central_differences() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let a = ansatz(&s, 0.4, 4, None);
    let theta = random_theta(a.parameter_count(), &mut rng(2), 1.0);
    let all = a.derivative_states(&theta).unwrap();
    let h = 1e-4;
    for k in 0..a.parameter_count() {
        let d = a.derivative_state(&theta, k).unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-12);
        assert!(distance(&d, &all[k]) < 1e-12);
        let mut p = theta.clone();
        p[k] += h;
        let mut fd = a.prepare(&p).unwrap();
        p[k] -= 2.0 * h;
        fd.add_scaled(-ONE, &a.prepare(&p).unwrap());
        fd.scale(Complex64::new(0.5 / h, 0.0));
        assert!(distance(&fd, &d) < 1e-6, "k = {k}");
    }
}

#[test]
fn single_gate_derivative_at_identity() {
    let circuit = Circuit::from_gates(2, vec![(0, 1)]).unwrap();
    let pattern = DimerPattern::new(2, vec![(0, 1)]).unwrap();
    let h = HamiltonianSpec::from_terms(2, vec![((0, 1), 1.0)]).unwrap();
    let a = Ansatz::new(circuit, &pattern, SymmetryProjector::identity(2), h).unwrap();
    let d = a.derivative_state(&[0.0], 0).unwrap();
    let mut expected = dimer_state(&pattern);
    expected.apply_i_swap(0, 1);
    assert!(distance(&d, &expected) < 1e-15);
    assert!((a.projected_energy(&[0.0]).unwrap().0 + 0.75).abs() < 1e-15);
}

#[test]
fn gradient_matches_finite_differences_across_geometries() {
    let cases = [
        (spec(Geometry::Square, 2, 2, Periodic, Periodic), SymmetrySelection::Identity),
        (spec(Geometry::Square, 2, 4, Periodic, Periodic), SymmetrySelection::Translations),
        (spec(Geometry::Square, 2, 4, Open, Periodic), SymmetrySelection::Full),
        (spec(Geometry::Triangular, 2, 4, Periodic, Periodic), SymmetrySelection::PointGroup),
        (spec(Geometry::Hexagonal, 1, 3, Periodic, Periodic), SymmetrySelection::Full),
    ];
    for (idx, (s, sel)) in cases.into_iter().enumerate() {
        let h = hamiltonian(&s, 0.45);
        let p = ground_projector(&s, &h, sel);
        let a = ansatz(&s, 0.45, 3, Some(p));
        let theta = random_theta(a.parameter_count(), &mut rng(idx as u64), 1.0);
        let g = a.exact_gradient(&theta).unwrap();
        let (e, n) = a.projected_energy(&theta).unwrap();
        assert!((g.energy - e).abs() < 1e-12 && (g.norm - n).abs() < 1e-12);
        for k in 0..a.parameter_count() {
            let fd = fd_energy(&a, &theta, k, 1e-4);
            let err = (g.forces[k] - fd).abs() / fd.abs().max(1e-3);
            assert!(err < 1e-6, "{} {sel} k={k}: {} vs {fd}", s.label(), g.forces[k]);
        }
    }
}

#[test]
fn identity_group_gradient_is_plain_expectation_derivative() {
    let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
    let a = ansatz(&s, 0.3, 4, None);
    let theta = random_theta(a.parameter_count(), &mut rng(8), 1.0);
    let g = a.exact_gradient(&theta).unwrap();
    let psi = a.prepare(&theta).unwrap();
    let hpsi = a.hamiltonian().apply(&psi).unwrap();
    for k in 0..a.parameter_count() {
        let d = a.derivative_state(&theta, k).unwrap();
        let direct = 2.0 * hpsi.inner(&d).unwrap().re;
        assert!((g.forces[k] - direct).abs() < 1e-12);
        assert!(g.connection[k].re.abs() < 1e-12);
    }
}

#[test]
fn energy_is_variational() {
    let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
    let h = hamiltonian(&s, 0.5);
    let e0 = dense::diagonalize(&h, None).unwrap().eigenvalues[0];
    let p = ground_projector(&s, &h, SymmetrySelection::Full);
    let a = ansatz(&s, 0.5, 6, Some(p));
    let mut r = rng(4);
    for _ in 0..20 {
        let theta = random_theta(a.parameter_count(), &mut r, 3.0);
        assert!(a.projected_energy(&theta).unwrap().0 >= e0 - 1e-12);
    }
}

#[test]
fn symmetric_reference_has_unit_norm() {
    let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
    let h = hamiltonian(&s, 0.0);
    let group = symmetry_group(&s, SymmetrySelection::Translations, &Irrep::Trivial).unwrap();
    let a0 = ansatz(&s, 0.0, 1, None);
    let p = SymmetryProjector::from_state(group, a0.reference()).unwrap();
    let a = ansatz(&s, 0.0, 1, Some(p));
    let (_, n) = a.projected_energy(&vec![0.0; a.parameter_count()]).unwrap();
    assert!((n - 1.0).abs() < 1e-12);
    drop(h);
}

#[test]
fn annihilated_state_is_an_error() {
    // The dimer reference is odd under the swap of its first pair.
    let s = spec(Geometry::Square, 2, 2, Open, Open);
    let (i, j) = dimer_pairs(&s, DimerAlignment::J1).unwrap()[0];
    let pair = vqephase::lattice::Permutation::transposition(4, i, j);
    let group =
        vqephase::lattice::SymmetryGroup::from_elements(4, vec![vqephase::lattice::Permutation::identity(4), pair])
            .unwrap();
    let a = ansatz(&s, 0.0, 1, Some(SymmetryProjector::new(group)));
    let r = a.projected_energy(&vec![0.0; a.parameter_count()]);
    assert!(matches!(r, Err(vqephase::Error::ProjectorAnnihilated { .. })), "{r:?}");
}

#[test]
fn metric_properties() {
    let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
    let h = hamiltonian(&s, 0.5);
    let p = ground_projector(&s, &h, SymmetrySelection::Translations);
    let a = ansatz(&s, 0.5, 3, Some(p));
    let theta = random_theta(a.parameter_count(), &mut rng(6), 1.0);
    let (g, conn) = a.metric(&theta).unwrap();
    assert!(g.hermiticity_error() < 1e-10);
    let re = DMatrix::from_row_slice(g.size, g.size, &g.real_part());
    let min = re.symmetric_eigenvalues().min();
    assert!(min > -1e-10, "{min}");
    let grad = a.exact_gradient(&theta).unwrap();
    for (x, y) in conn.iter().zip(&grad.connection) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn single_parameter_metric() {
    let circuit = Circuit::from_gates(4, vec![(1, 2)]).unwrap();
    let pattern = DimerPattern::new(4, vec![(0, 1), (2, 3)]).unwrap();
    let h = HamiltonianSpec::from_terms(4, vec![((1, 2), 1.0)]).unwrap();
    let a = Ansatz::new(circuit, &pattern, SymmetryProjector::identity(4), h).unwrap();
    for t in [0.0, 0.3, 1.2] {
        let (g, _) = a.metric(&[t]).unwrap();
        let psi = a.prepare(&[t]).unwrap();
        let d = a.derivative_state(&[t], 0).unwrap();
        let expected = 1.0 - psi.inner(&d).unwrap().norm_sqr();
        assert!((g.get(0, 0).re - expected).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&g.get(0, 0).re));
    }
}

#[test]
fn fidelity_and_overlaps() {
    let s = spec(Geometry::Square, 2, 4, Open, Periodic);
    let h = hamiltonian(&s, 0.3);
    let d = dense::diagonalize(&h, None).unwrap();
    let a = ansatz(&s, 0.3, 4, None);
    let theta = random_theta(a.parameter_count(), &mut rng(7), 2.0);
    let o = a.overlaps(&theta, &d.eigenstates).unwrap();
    assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let f = a.fidelity(&theta, &d.eigenstates[..1]).unwrap();
    assert!((f - o[0]).abs() < 1e-15);

    let psi = a.prepare(&theta).unwrap();
    let target = vec![psi.clone()];
    assert!((a.fidelity(&theta, &target).unwrap() - 1.0).abs() < 1e-12);
    // Global phase changes nothing.
    let mut phased = psi.clone();
    phased.scale(Complex64::from_polar(1.0, 0.7));
    assert!((a.fidelity(&theta, &[phased]).unwrap() - 1.0).abs() < 1e-12);
    let mut orth = StateVector::basis(8, 0b1111_0000);
    let c = psi.inner(&orth).unwrap();
    orth.add_scaled(-c, &psi);
    orth.normalize();
    assert!(a.fidelity(&theta, &[orth]).unwrap() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projector_is_idempotent_and_commutes(seed in 0u64..500, which in 0usize..3) {
        let clusters = [
            spec(Geometry::Square, 4, 4, Periodic, Periodic),
            spec(Geometry::Triangular, 2, 4, Periodic, Periodic),
            spec(Geometry::Hexagonal, 2, 2, Periodic, Periodic),
        ];
        let s = &clusters[which];
        let h = hamiltonian(s, 0.4);
        let group = symmetry_group(s, SymmetrySelection::Full, &Irrep::Trivial).unwrap();
        let p = SymmetryProjector::new(group);
        let v = StateVector::random(s.site_count(), &mut rng(seed));
        let pv = p.apply(&v);
        prop_assert!(distance(&p.apply(&pv), &pv) < 1e-10);
        let a = h.apply(&pv).unwrap();
        let b = p.apply(&h.apply(&v).unwrap());
        prop_assert!(distance(&a, &b) < 1e-10);
    }

    #[test]
    fn energy_invariant_under_global_phase(seed in 0u64..500) {
        let s = spec(Geometry::Square, 2, 4, Periodic, Periodic);
        let h = hamiltonian(&s, 0.5);
        let p = ground_projector(&s, &h, SymmetrySelection::Translations);
        let a = ansatz(&s, 0.5, 2, Some(p.clone()));
        let theta = random_theta(a.parameter_count(), &mut rng(seed), 2.0);
        let psi = a.prepare(&theta).unwrap();
        let mut phased = psi.clone();
        phased.scale(Complex64::from_polar(1.0, 1.3));
        let e = |v: &StateVector| {
            let pv = p.apply(v);
            v.inner(&h.apply(&pv).unwrap()).unwrap().re / v.inner(&pv).unwrap().re
        };
        prop_assert!((e(&psi) - e(&phased)).abs() < 1e-12);
        prop_assert!((e(&psi) - a.projected_energy(&theta).unwrap().0).abs() < 1e-12);
    }
}
