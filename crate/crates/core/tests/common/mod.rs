#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vqephase::ansatz::{Ansatz, Circuit, SymmetryProjector};
use vqephase::engine::DimerPattern;
use vqephase::lattice::{
    build_lattice, checkerboard_layers, dimer_pairs, symmetry_group, Boundary, DimerAlignment, Geometry, Irrep,
    LatticeSpec, SymmetrySelection,
};
use vqephase::spectrum::{dense, HamiltonianSpec};

pub fn spec(geometry: Geometry, l1: usize, l2: usize, b1: Boundary, b2: Boundary) -> LatticeSpec {
    LatticeSpec::new(geometry, [l1, l2], [b1, b2]).unwrap()
}

pub fn hamiltonian(spec: &LatticeSpec, j2: f64) -> HamiltonianSpec {
    HamiltonianSpec::new(&build_lattice(spec).unwrap(), 1.0, j2).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_theta(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Projector onto the irrep of the dense ground state.
pub fn ground_projector(spec: &LatticeSpec, h: &HamiltonianSpec, selection: SymmetrySelection) -> SymmetryProjector {
    let group = symmetry_group(spec, selection, &Irrep::Trivial).unwrap();
    let ground = dense::diagonalize(h, None).unwrap();
    SymmetryProjector::from_state(group, &ground.eigenstates[0]).unwrap()
}

pub fn ansatz(spec: &LatticeSpec, j2: f64, depth: usize, projector: Option<SymmetryProjector>) -> Ansatz {
    let h = hamiltonian(spec, j2);
    let circuit = Circuit::new(&checkerboard_layers(spec).unwrap(), depth).unwrap();
    let pattern = DimerPattern::new(spec.site_count(), dimer_pairs(spec, DimerAlignment::J1).unwrap()).unwrap();
    let p = projector.unwrap_or_else(|| SymmetryProjector::identity(spec.site_count()));
    Ansatz::new(circuit, &pattern, p, h).unwrap()
}
