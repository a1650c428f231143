//! Exact-diagonalization oracle: Hamiltonian action, total spin, Lanczos
//! low-lying spectra in symmetry sectors, gaps, and a dense full-spectrum
//! route for small clusters.

pub mod cache;
pub mod dense;
mod lanczos;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use lanczos::{lowest_k, LanczosConfig, Sector};

use crate::engine::StateVector;
use crate::lattice::{Bond, BondSet};
use crate::{par, Error, Result};

/// Levels closer than this (in units of |j1|) count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Heisenberg couplings over a bond set: H = Σ J_b S_i · S_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    qubits: usize,
    j1: f64,
    j2: f64,
    terms: Vec<(Bond, f64)>,
}

impl HamiltonianSpec {
    pub fn new(bonds: &BondSet, j1: f64, j2: f64) -> Result<Self> {
        if j1 == 0.0 || !j1.is_finite() || !j2.is_finite() {
            return Err(Error::InvalidInput(format!("couplings must be finite with j1 != 0 (j1={j1}, j2={j2})")));
        }
        let terms = bonds
            .j1_bonds
            .iter()
            .map(|&b| (b, j1))
            .chain(bonds.j2_bonds.iter().map(|&b| (b, j2)))
            .filter(|(_, j)| *j != 0.0)
            .collect();
        Ok(HamiltonianSpec { qubits: bonds.site_count, j1, j2, terms })
    }

    /// Arbitrary couplings; `j1` is reported as 1.
    pub fn from_terms(qubits: usize, terms: Vec<(Bond, f64)>) -> Result<Self> {
        if terms.iter().any(|&((i, j), _)| i == j || i >= qubits || j >= qubits) {
            return Err(Error::InvalidInput("bond endpoints out of range".into()));
        }
        Ok(HamiltonianSpec { qubits, j1: 1.0, j2: 0.0, terms })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn j1(&self) -> f64 {
        self.j1
    }

    pub fn j2(&self) -> f64 {
        self.j2
    }

    /// Bonds with non-zero coupling.
    pub fn terms(&self) -> &[(Bond, f64)] {
        &self.terms
    }

    /// S_i · S_j = P_ij / 2 − 1/4, so H = Σ (J/2) P_b − `swap_offset()`.
    pub fn swap_offset(&self) -> f64 {
        self.terms.iter().map(|(_, j)| j / 4.0).sum()
    }

    /// H|v⟩.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        let mut out = StateVector::zeros(self.qubits);
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, v: &StateVector, out: &mut StateVector) -> Result<()> {
        if v.dim() != 1 << self.qubits {
            return Err(Error::DimensionMismatch { expected: 1 << self.qubits, actual: v.dim() });
        }
        let src = v.amplitudes();
        let terms: Vec<(usize, usize, usize, f64)> =
            self.terms.iter().map(|&((i, j), c)| (i, j, (1 << i) | (1 << j), c)).collect();
        par::fill_indexed(out.amplitudes_mut(), |x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(i, j, mask, c) in &terms {
                if ((x >> i) ^ (x >> j)) & 1 == 0 {
                    acc += 0.25 * c * src[x];
                } else {
                    acc += 0.5 * c * src[x ^ mask] - 0.25 * c * src[x];
                }
            }
            acc
        });
        Ok(())
    }

    /// ⟨v|H|v⟩ for normalized v.
    pub fn expectation(&self, v: &StateVector) -> Result<f64> {
        let hv = self.apply(v)?;
        Ok(v.inner(&hv)?.re)
    }
}

/// H|v⟩.
pub fn apply_hamiltonian(h: &HamiltonianSpec, v: &StateVector) -> Result<StateVector> {
    h.apply(v)
}

/// Ŝ²|v⟩ through the all-pairs exchange action.
pub fn apply_total_spin_sq(v: &StateVector) -> StateVector {
    let n = v.qubits();
    let src = v.amplitudes();
    let mut out = StateVector::zeros(n);
    par::fill_indexed(out.amplitudes_mut(), |x| {
        let up = n - x.count_ones() as usize;
        let down = n - up;
        let equal = (up * up.saturating_sub(1) + down * down.saturating_sub(1)) / 2;
        let differ = up * down;
        let mut acc = src[x] * (0.75 * n as f64 + 0.5 * (equal as f64 - differ as f64));
        for i in 0..n {
            for j in i + 1..n {
                if ((x >> i) ^ (x >> j)) & 1 == 1 {
                    acc += src[x ^ ((1 << i) | (1 << j))];
                }
            }
        }
        acc
    });
    out
}

/// Rotates each cluster of degenerate eigenvectors (ascending `values`) so
/// that Ŝ² is diagonal inside it. Generic numerical eigenvectors of a
/// degenerate level mix spin multiplets.
pub fn resolve_spin_degeneracies(values: &[f64], states: &mut [StateVector], tol: f64) {
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[start] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let block = &mut states[start..end];
            let m = block.len();
            let applied: Vec<StateVector> = block.iter().map(apply_total_spin_sq).collect();
            let mat = nalgebra::DMatrix::from_fn(m, m, |a, b| {
                crate::engine::inner_unchecked(block[a].amplitudes(), applied[b].amplitudes())
            });
            let mat = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = nalgebra::SymmetricEigen::new(mat);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let rotated: Vec<StateVector> = order
                .iter()
                .map(|&c| {
                    let mut v = StateVector::zeros(block[0].qubits());
                    for (r, s) in block.iter().enumerate() {
                        v.add_scaled(eig.eigenvectors[(r, c)], s);
                    }
                    v.normalize();
                    v
                })
                .collect();
            block.clone_from_slice(&rotated);
        }
        start = end;
    }
}

/// ⟨v|Ŝ²|v⟩ = 3N/4 + 2 Σ_{i<j} ⟨S_i · S_j⟩ for normalized v.
pub fn total_spin_sq(v: &StateVector) -> f64 {
    let n = v.qubits();
    let amps = v.amplitudes();
    let pair_sum = par::chunked_sum_real(v.dim(), |r| {
        let mut acc = 0.0;
        for x in r {
            let a = amps[x];
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let up = n - x.count_ones() as usize;
            let down = n - up;
            let equal = (up * up.saturating_sub(1) + down * down.saturating_sub(1)) / 2;
            let differ = up * down;
            acc += a.norm_sqr() * 0.25 * (equal as f64 - differ as f64);
            for i in 0..n {
                for j in i + 1..n {
                    if ((x >> i) ^ (x >> j)) & 1 == 1 {
                        acc += 0.5 * (a.conj() * amps[x ^ ((1 << i) | (1 << j))]).re;
                    }
                }
            }
        }
        acc
    });
    0.75 * n as f64 + 2.0 * pair_sum
}

/// Per-eigenstate sector metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorLabel {
    /// ⟨Ŝ²⟩ of the eigenvector.
    pub spin_sq: f64,
    /// Norm of the projector applied to the eigenvector (1 inside the sector).
    pub projector_weight: f64,
}

/// Low-lying eigenpairs in ascending order.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenstates: Vec<StateVector>,
    pub labels: Vec<SectorLabel>,
    pub residuals: Vec<f64>,
    /// Fewer pairs than requested were available in the sector.
    pub truncated: bool,
}

impl SpectralData {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> &StateVector {
        &self.eigenstates[0]
    }

    /// Distance to the first level above E₀ by more than the degeneracy
    /// tolerance; `None` when every computed level is degenerate with E₀.
    pub fn gap(&self) -> Option<f64> {
        gap_of(&self.eigenvalues)
    }

    /// States degenerate with the ground level.
    pub fn ground_space(&self) -> &[StateVector] {
        let e0 = self.eigenvalues[0];
        let count = self.eigenvalues.iter().take_while(|&&e| e - e0 <= DEGENERACY_TOL).count();
        &self.eigenstates[..count]
    }

    /// Keeps only the pairs whose ⟨Ŝ²⟩ is below `max_spin_sq`.
    pub fn singlets(&self, max_spin_sq: f64) -> SpectralData {
        let keep: Vec<usize> = (0..self.eigenvalues.len()).filter(|&i| self.labels[i].spin_sq < max_spin_sq).collect();
        SpectralData {
            eigenvalues: keep.iter().map(|&i| self.eigenvalues[i]).collect(),
            eigenstates: keep.iter().map(|&i| self.eigenstates[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            residuals: keep.iter().map(|&i| self.residuals[i]).collect(),
            truncated: self.truncated,
        }
    }
}

pub fn gap_of(eigenvalues: &[f64]) -> Option<f64> {
    let e0 = *eigenvalues.first()?;
    eigenvalues.iter().find(|&&e| e - e0 > DEGENERACY_TOL).map(|e| e - e0)
}
