//! Full diagonalization of a fixed-magnetization block. Builds the matrix
//! element by element, independently of the matrix-free Hamiltonian action,
//! so it can serve as a cross-check for small clusters.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::HamiltonianSpec;
use crate::engine::StateVector;
use crate::{Error, Result};

/// Largest block this route will diagonalize.
pub const MAX_BLOCK: usize = 4096;

#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors embedded in the full 2^N space; degenerate levels are
    /// rotated to diagonalize Ŝ².
    pub eigenstates: Vec<StateVector>,
}

/// Basis states with exactly `up` bits set.
pub fn magnetization_basis(qubits: usize, up: usize) -> Vec<usize> {
    (0..1usize << qubits).filter(|x| x.count_ones() as usize == up).collect()
}

/// Real symmetric matrix of H on the given basis. The basis must be closed
/// under the exchange moves of every bond.
pub fn block_matrix(h: &HamiltonianSpec, basis: &[usize]) -> Result<DMatrix<f64>> {
    let index: HashMap<usize, usize> = basis.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let dim = basis.len();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (col, &x) in basis.iter().enumerate() {
        for &((i, j), c) in h.terms() {
            let si = (x >> i) & 1;
            let sj = (x >> j) & 1;
            if si == sj {
                m[(col, col)] += c / 4.0;
            } else {
                m[(col, col)] -= c / 4.0;
                let y = x ^ (1 << i) ^ (1 << j);
                let row =
                    *index.get(&y).ok_or_else(|| Error::InvalidInput("basis not closed under exchange".into()))?;
                m[(row, col)] += c / 2.0;
            }
        }
    }
    Ok(m)
}

/// All eigenpairs of the block with `up` spins up (N/2 when `None`).
pub fn diagonalize(h: &HamiltonianSpec, up: Option<usize>) -> Result<DenseSpectrum> {
    let n = h.qubits();
    let basis = magnetization_basis(n, up.unwrap_or(n / 2));
    if basis.len() > MAX_BLOCK {
        return Err(Error::Budget(format!("dense block of dimension {} exceeds {MAX_BLOCK}", basis.len())));
    }
    let m = block_matrix(h, &basis)?;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..basis.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenstates: Vec<StateVector> = order
        .iter()
        .map(|&k| {
            let mut v = StateVector::zeros(n);
            for (r, &x) in basis.iter().enumerate() {
                v[x] = Complex64::new(eig.eigenvectors[(r, k)], 0.0);
            }
            v
        })
        .collect();
    super::resolve_spin_degeneracies(&eigenvalues, &mut eigenstates, super::DEGENERACY_TOL);
    Ok(DenseSpectrum { eigenvalues, eigenstates })
}
