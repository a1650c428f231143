//! Symmetry-projected eSWAP circuit state: preparation, derivative states,
//! projected energy, exact gradient, connection, metric tensor, fidelity.

mod projector;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use projector::SymmetryProjector;

use crate::engine::{dimer_state, swap_inner, DimerPattern, StateVector};
use crate::lattice::{Bond, LayerDecomposition};
use crate::spectrum::HamiltonianSpec;
use crate::{par, Error, Result};

/// Below this the projected norm is rejected outright.
pub const MIN_NORM: f64 = 1e-12;
/// Below this the projected norm is flagged as numerically unreliable.
pub const LOW_NORM: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Ordered eSWAP gates, one parameter each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    qubits: usize,
    gates: Vec<Bond>,
    depth: usize,
}

impl Circuit {
    /// `depth` layers taken cyclically from the decomposition.
    pub fn new(layers: &LayerDecomposition, depth: usize) -> Result<Self> {
        if layers.layers.is_empty() {
            return Err(Error::InvalidInput("empty layer decomposition".into()));
        }
        let gates = (0..depth).flat_map(|d| layers.layers[d % layers.layers.len()].pairs.iter().copied()).collect();
        Ok(Circuit { qubits: layers.site_count, gates, depth })
    }

    /// Explicit gate list; depth is reported as the gate count.
    pub fn from_gates(qubits: usize, gates: Vec<Bond>) -> Result<Self> {
        if gates.iter().any(|&(i, j)| i == j || i >= qubits || j >= qubits) {
            return Err(Error::InvalidInput("gate acts on invalid sites".into()));
        }
        let depth = gates.len();
        Ok(Circuit { qubits, gates, depth })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[Bond] {
        &self.gates
    }

    /// N_p.
    pub fn parameter_count(&self) -> usize {
        self.gates.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.gates.len() {
            return Err(Error::DimensionMismatch { expected: self.gates.len(), actual: theta.len() });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical("non-finite circuit parameter".into()));
        }
        Ok(())
    }

    /// Applies gates `range` in order.
    pub fn apply_range(&self, v: &mut StateVector, theta: &[f64], range: std::ops::Range<usize>) {
        for k in range {
            let (i, j) = self.gates[k];
            v.apply_eswap(i, j, theta[k]);
        }
    }

    /// Circuit output on `reference`.
    pub fn prepare_from(&self, reference: &StateVector, theta: &[f64]) -> Result<StateVector> {
        self.check(theta)?;
        let mut v = reference.clone();
        self.apply_range(&mut v, theta, 0..self.gates.len());
        Ok(v)
    }
}

/// Circuit output on the dimer product state.
pub fn prepare(circuit: &Circuit, theta: &[f64], pattern: &DimerPattern) -> Result<StateVector> {
    if pattern.qubits() != circuit.qubits() {
        return Err(Error::DimensionMismatch { expected: circuit.qubits(), actual: pattern.qubits() });
    }
    circuit.prepare_from(&dimer_state(pattern), theta)
}

/// How a gradient was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Exact,
    Sampled { shots: u64 },
}

/// Energy, forces f_k = ∂_k E, and connection at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub energy: f64,
    pub norm: f64,
    pub forces: Vec<f64>,
    pub connection: Vec<Complex64>,
    /// Single-shot variance of each force component; zero when exact.
    pub variance: Vec<f64>,
    pub estimator: Estimator,
    /// The projected norm fell below `LOW_NORM`.
    pub low_norm: bool,
}

/// Metric tensor G_ij = ⟨∂_i|P̂|∂_j⟩/N − A_i* A_j.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub size: usize,
    /// Row-major.
    pub entries: Vec<Complex64>,
}

impl MetricTensor {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.size + j]
    }

    /// Re G, row-major.
    pub fn real_part(&self) -> Vec<f64> {
        self.entries.iter().map(|c| c.re).collect()
    }

    /// max |G_ij − G_ji*|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.size;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (self.get(i, j) - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Exact energy, projected norm and fidelity at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub energy: f64,
    pub norm: f64,
    pub fidelity: f64,
}

/// Circuit, reference state, projector and Hamiltonian of one variational
/// problem.
#[derive(Debug, Clone)]
pub struct Ansatz {
    circuit: Circuit,
    reference: StateVector,
    projector: SymmetryProjector,
    hamiltonian: HamiltonianSpec,
}

impl Ansatz {
    pub fn new(
        circuit: Circuit,
        pattern: &DimerPattern,
        projector: SymmetryProjector,
        hamiltonian: HamiltonianSpec,
    ) -> Result<Self> {
        let n = circuit.qubits();
        if pattern.qubits() != n || projector.qubits() != n || hamiltonian.qubits() != n {
            return Err(Error::InvalidInput(
                "circuit, dimer pattern, projector and Hamiltonian disagree on size".into(),
            ));
        }
        Ok(Ansatz { circuit, reference: dimer_state(pattern), projector, hamiltonian })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn projector(&self) -> &SymmetryProjector {
        &self.projector
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    pub fn parameter_count(&self) -> usize {
        self.circuit.parameter_count()
    }

    /// |ψ(θ)⟩.
    pub fn prepare(&self, theta: &[f64]) -> Result<StateVector> {
        self.circuit.prepare_from(&self.reference, theta)
    }

    /// |∂_k ψ⟩: iP on gate k inserted after that gate.
    pub fn derivative_state(&self, theta: &[f64], k: usize) -> Result<StateVector> {
        self.circuit.check(theta)?;
        let np = self.parameter_count();
        if k >= np {
            return Err(Error::InvalidInput(format!("parameter index {k} out of range (N_p = {np})")));
        }
        let mut v = self.reference.clone();
        self.circuit.apply_range(&mut v, theta, 0..k + 1);
        let (i, j) = self.circuit.gates[k];
        v.apply_i_swap(i, j);
        self.circuit.apply_range(&mut v, theta, k + 1..np);
        Ok(v)
    }

    /// All derivative states, from one forward sweep over prefixes.
    pub fn derivative_states(&self, theta: &[f64]) -> Result<Vec<StateVector>> {
        self.circuit.check(theta)?;
        let np = self.parameter_count();
        let mut prefix = self.reference.clone();
        let mut out = Vec::with_capacity(np);
        for k in 0..np {
            self.circuit.apply_range(&mut prefix, theta, k..k + 1);
            let mut d = prefix.clone();
            let (i, j) = self.circuit.gates[k];
            d.apply_i_swap(i, j);
            self.circuit.apply_range(&mut d, theta, k + 1..np);
            out.push(d);
        }
        Ok(out)
    }

    /// N(θ) = ⟨ψ|P̂|ψ⟩ for a prepared state.
    pub fn projected_norm(&self, psi: &StateVector) -> Result<f64> {
        let n = self.projector.expectation(psi, psi)?.re;
        if !(n >= MIN_NORM) {
            return Err(Error::ProjectorAnnihilated { norm: n });
        }
        Ok(n)
    }

    /// (E, N) with E = ⟨ψ|ĤP̂|ψ⟩/N.
    pub fn projected_energy(&self, theta: &[f64]) -> Result<(f64, f64)> {
        let psi = self.prepare(theta)?;
        let ppsi = self.projector.apply(&psi);
        let norm = psi.inner(&ppsi)?.re;
        if !(norm >= MIN_NORM) {
            return Err(Error::ProjectorAnnihilated { norm });
        }
        let e = psi.inner(&self.hamiltonian.apply(&ppsi)?)?.re / norm;
        Ok((e, norm))
    }

    /// Exact forces and connection by back-propagating the bras ĤP̂ψ and
    /// P̂ψ through the circuit.
    pub fn exact_gradient(&self, theta: &[f64]) -> Result<GradientEstimate> {
        let mut phi = self.prepare(theta)?;
        let mut mu = self.projector.apply(&phi);
        let norm = phi.inner(&mu)?.re;
        if !(norm >= MIN_NORM) {
            return Err(Error::ProjectorAnnihilated { norm });
        }
        let mut lambda = self.hamiltonian.apply(&mu)?;
        let energy = phi.inner(&lambda)?.re / norm;
        let np = self.parameter_count();
        let mut h_terms = vec![Complex64::new(0.0, 0.0); np];
        let mut connection = vec![Complex64::new(0.0, 0.0); np];
        for k in (0..np).rev() {
            let (i, j) = self.circuit.gates[k];
            h_terms[k] = I * swap_inner(&lambda, &phi, i, j) / norm;
            connection[k] = I * swap_inner(&mu, &phi, i, j) / norm;
            for v in [&mut phi, &mut mu, &mut lambda] {
                v.apply_eswap(i, j, -theta[k]);
            }
        }
        let forces = h_terms.iter().zip(&connection).map(|(h, a)| 2.0 * (h - a * energy).re).collect();
        Ok(GradientEstimate {
            energy,
            norm,
            forces,
            connection,
            variance: vec![0.0; np],
            estimator: Estimator::Exact,
            low_norm: norm < LOW_NORM,
        })
    }

    /// Metric tensor and connection.
    pub fn metric(&self, theta: &[f64]) -> Result<(MetricTensor, Vec<Complex64>)> {
        let psi = self.prepare(theta)?;
        let norm = self.projected_norm(&psi)?;
        let ppsi = self.projector.apply(&psi);
        let derivs = self.derivative_states(theta)?;
        let projected: Vec<StateVector> = par::map_jobs(derivs.len(), |k| self.projector.apply(&derivs[k]));
        let np = derivs.len();
        let connection: Vec<Complex64> =
            derivs.iter().map(|d| ppsi.inner(d).map(|c| c / norm)).collect::<Result<_>>()?;
        let mut entries = vec![Complex64::new(0.0, 0.0); np * np];
        for i in 0..np {
            for j in i..np {
                let g = derivs[i].inner(&projected[j])? / norm - connection[i].conj() * connection[j];
                entries[i * np + j] = g;
                entries[j * np + i] = g.conj();
            }
        }
        Ok((MetricTensor { size: np, entries }, connection))
    }

    /// Weight of the normalized projected state on the span of `targets`
    /// (orthonormal, e.g. a degenerate ground space).
    pub fn fidelity(&self, theta: &[f64], targets: &[StateVector]) -> Result<f64> {
        Ok(self.overlaps(theta, targets)?.iter().sum::<f64>().min(1.0))
    }

    /// |⟨Φ_m|P̂|ψ⟩|²/N for each target.
    pub fn overlaps(&self, theta: &[f64], targets: &[StateVector]) -> Result<Vec<f64>> {
        let psi = self.prepare(theta)?;
        let ppsi = self.projector.apply(&psi);
        let norm = psi.inner(&ppsi)?.re;
        if !(norm >= MIN_NORM) {
            return Err(Error::ProjectorAnnihilated { norm });
        }
        targets.iter().map(|t| Ok(t.inner(&ppsi)?.norm_sqr() / norm)).collect()
    }

    /// Energy, norm and fidelity from a single preparation. `projected`
    /// selects whether the fidelity uses the projected or the raw state.
    pub fn observe(&self, theta: &[f64], targets: &[StateVector], projected: bool) -> Result<Observation> {
        let psi = self.prepare(theta)?;
        let ppsi = self.projector.apply(&psi);
        let norm = psi.inner(&ppsi)?.re;
        if !(norm >= MIN_NORM) {
            return Err(Error::ProjectorAnnihilated { norm });
        }
        let energy = psi.inner(&self.hamiltonian.apply(&ppsi)?)?.re / norm;
        let mut fidelity = 0.0;
        for t in targets {
            fidelity += if projected { t.inner(&ppsi)?.norm_sqr() / norm } else { t.inner(&psi)?.norm_sqr() };
        }
        Ok(Observation { energy, norm, fidelity: fidelity.min(1.0) })
    }

    /// Fidelity of the raw (unprojected) circuit state.
    pub fn raw_fidelity(&self, theta: &[f64], targets: &[StateVector]) -> Result<f64> {
        let psi = self.prepare(theta)?;
        let mut f = 0.0;
        for t in targets {
            f += t.inner(&psi)?.norm_sqr();
        }
        Ok(f.min(1.0))
    }
}
