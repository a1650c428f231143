use num_complex::Complex64;

use crate::engine::{BitPermuter, StateVector};
use crate::lattice::SymmetryGroup;
use crate::{par, Error, Result};

/// P̂ = (1/|G|) Σ_g χ_g ĝ. Its image consists of states with ĝ|v⟩ = χ_g* |v⟩.
#[derive(Debug, Clone)]
pub struct SymmetryProjector {
    group: SymmetryGroup,
    // Gather tables for ĝ: (ĝv)[y] = v[g⁻¹(y)].
    gathers: Vec<BitPermuter>,
}

impl SymmetryProjector {
    pub fn new(group: SymmetryGroup) -> Self {
        let gathers = group.elements().iter().map(|g| BitPermuter::new(&g.inverse())).collect();
        SymmetryProjector { group, gathers }
    }

    pub fn identity(qubits: usize) -> Self {
        SymmetryProjector::new(SymmetryGroup::identity(qubits))
    }

    /// Projector onto the irrep that contains `v`, with χ_g = ⟨v|ĝ|v⟩*.
    pub fn from_state(group: SymmetryGroup, v: &StateVector) -> Result<Self> {
        let probe = SymmetryProjector::new(group.clone());
        let norm = v.norm_sqr();
        let mut characters = Vec::with_capacity(group.order());
        for idx in 0..group.order() {
            let c = probe.element_overlap(idx, v, v)? / norm;
            if (c.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::SymmetryRejected(format!(
                    "state is not an eigenvector of group element {idx} (|<v|g|v>| = {:.3e})",
                    c.norm()
                )));
            }
            characters.push((c / c.norm()).conj());
        }
        Ok(SymmetryProjector::new(group.with_characters(characters)?))
    }

    pub fn group(&self) -> &SymmetryGroup {
        &self.group
    }

    pub fn order(&self) -> usize {
        self.group.order()
    }

    pub fn is_trivial(&self) -> bool {
        self.group.is_trivial()
    }

    pub fn qubits(&self) -> usize {
        self.group.site_count()
    }

    /// ĝ|v⟩ for the element at `idx`.
    pub fn apply_element(&self, idx: usize, v: &StateVector) -> StateVector {
        let mut out = StateVector::zeros(v.qubits());
        let src = v.amplitudes();
        let g = &self.gathers[idx];
        par::fill_indexed(out.amplitudes_mut(), |y| src[g.apply(y)]);
        out
    }

    /// ⟨a|ĝ|b⟩ without materializing ĝ|b⟩.
    pub fn element_overlap(&self, idx: usize, a: &StateVector, b: &StateVector) -> Result<Complex64> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (a.amplitudes(), b.amplitudes());
        let g = &self.gathers[idx];
        Ok(par::chunked_sum(a.dim(), |r| {
            r.fold(Complex64::new(0.0, 0.0), |acc, y| acc + av[y].conj() * bv[g.apply(y)])
        }))
    }

    /// P̂|v⟩.
    pub fn apply(&self, v: &StateVector) -> StateVector {
        if self.is_trivial() {
            return v.clone();
        }
        let src = v.amplitudes();
        let chars = self.group.characters();
        let inv_order = 1.0 / self.order() as f64;
        let mut out = StateVector::zeros(v.qubits());
        par::fill_indexed(out.amplitudes_mut(), |y| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (g, chi) in self.gathers.iter().zip(chars) {
                acc += chi * src[g.apply(y)];
            }
            acc * inv_order
        });
        out
    }

    /// ⟨a|P̂|b⟩.
    pub fn expectation(&self, a: &StateVector, b: &StateVector) -> Result<Complex64> {
        self.check(a)?;
        a.inner(&self.apply(b))
    }

    fn check(&self, v: &StateVector) -> Result<()> {
        if v.qubits() != self.qubits() {
            return Err(Error::DimensionMismatch { expected: 1 << self.qubits(), actual: v.dim() });
        }
        Ok(())
    }
}
