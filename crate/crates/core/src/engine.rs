//! State-vector kernels.
//!
//! Basis index bit `k` holds the spin of site `k` (0 = up). Two-site gates
//! update amplitudes in place over index pairs that differ in bits `i` and
//! `j`; site permutations become bit permutations of the index.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lattice::{Bond, Permutation, MAX_SITES};
use crate::{par, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex amplitudes over the 2^N spin configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(qubits: usize) -> Self {
        assert!(qubits <= MAX_SITES, "{qubits} qubits exceeds the supported maximum");
        StateVector { qubits, amps: vec![ZERO; 1 << qubits] }
    }

    pub fn basis(qubits: usize, index: usize) -> Self {
        let mut v = Self::zeros(qubits);
        v.amps[index] = ONE;
        v
    }

    pub fn from_amplitudes(qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << qubits {
            return Err(Error::DimensionMismatch { expected: 1 << qubits, actual: amps.len() });
        }
        Ok(StateVector { qubits, amps })
    }

    /// Normalized vector with i.i.d. complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Self {
        let amps = (0..1usize << qubits)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut v = StateVector { qubits, amps };
        v.normalize();
        v
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        par::chunked_sum_real(self.dim(), |r| self.amps[r].iter().map(|a| a.norm_sqr()).sum())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scales to unit norm; returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
        n
    }

    pub fn scale(&mut self, c: Complex64) {
        par::for_each_chunk_mut(&mut self.amps, par::REDUCE_CHUNK, |_, chunk| {
            for a in chunk {
                *a *= c;
            }
        });
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &StateVector) {
        assert_eq!(self.dim(), other.dim());
        let src = &other.amps;
        par::for_each_chunk_mut(&mut self.amps, par::REDUCE_CHUNK, |k, chunk| {
            let off = k * par::REDUCE_CHUNK;
            for (t, a) in chunk.iter_mut().enumerate() {
                *a += c * src[off + t];
            }
        });
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    fn check_dim(&self, other: &StateVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(())
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_dim(other)?;
        Ok(inner_unchecked(&self.amps, &other.amps))
    }

    /// exp(iθ P_ij) = cos θ + i sin θ P_ij applied in place.
    pub fn apply_eswap(&mut self, i: usize, j: usize, theta: f64) {
        let (s, c) = theta.sin_cos();
        self.two_site(i, j, Complex64::new(c, s), Complex64::new(c, 0.0), Complex64::new(0.0, s));
    }

    /// i P_ij applied in place: the derivative factor of an eSWAP gate.
    pub fn apply_i_swap(&mut self, i: usize, j: usize) {
        self.two_site(i, j, I, ZERO, I);
    }

    /// P_ij applied in place.
    pub fn apply_swap(&mut self, i: usize, j: usize) {
        self.two_site(i, j, ONE, ZERO, ONE);
    }

    /// Generic SWAP-algebra gate `a 1 + b P` written in the pair basis: amplitudes
    /// with equal bits i, j scale by `same`; each mixed pair (u, w) maps to
    /// (keep u + cross w, keep w + cross u).
    fn two_site(&mut self, i: usize, j: usize, same: Complex64, keep: Complex64, cross: Complex64) {
        assert!(i != j && i < self.qubits && j < self.qubits, "invalid site pair ({i}, {j})");
        let low = 1usize << i.min(j);
        let high = 1usize << i.max(j);
        par::for_each_chunk_mut(&mut self.amps, 2 * high, |_, block| {
            let (lo, hi) = block.split_at_mut(high);
            par::for_each_chunk_pair_mut(lo, hi, 2 * low, |a, b| {
                let (a0, a1) = a.split_at_mut(low);
                let (b0, b1) = b.split_at_mut(low);
                for x in a0.iter_mut().chain(b1.iter_mut()) {
                    *x *= same;
                }
                for (u, w) in a1.iter_mut().zip(b0.iter_mut()) {
                    let (uu, ww) = (*u, *w);
                    *u = keep * uu + cross * ww;
                    *w = keep * ww + cross * uu;
                }
            });
        });
    }

    /// Basis relabeling |s⟩ → |g(s)⟩: the spin on site k moves to site g(k).
    pub fn apply_permutation(&self, g: &Permutation) -> StateVector {
        let mut out = StateVector::zeros(self.qubits);
        self.permute_into(g, &mut out);
        out
    }

    /// Writes ĝ|self⟩ into `out` without allocating.
    pub fn permute_into(&self, g: &Permutation, out: &mut StateVector) {
        assert_eq!(g.len(), self.qubits, "permutation size differs from qubit count");
        assert_eq!(out.dim(), self.dim());
        if g.is_identity() {
            out.amps.copy_from_slice(&self.amps);
            return;
        }
        // Gather form: out[y] = v[g⁻¹(y)].
        let inv = BitPermuter::new(&g.inverse());
        let src = &self.amps;
        par::fill_indexed(&mut out.amps, |y| src[inv.apply(y)]);
    }
}

impl Index<usize> for StateVector {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.amps[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.amps[i]
    }
}

/// ⟨a|b⟩ on raw amplitude slices of equal length.
pub fn inner_unchecked(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    par::chunked_sum(a.len(), |r| a[r.clone()].iter().zip(&b[r]).fold(ZERO, |acc, (x, y)| acc + x.conj() * y))
}

/// ⟨a|P_ij|b⟩ without materializing P_ij|b⟩.
pub fn swap_inner(a: &StateVector, b: &StateVector, i: usize, j: usize) -> Complex64 {
    assert_eq!(a.dim(), b.dim());
    let mask = (1usize << i) | (1usize << j);
    let (av, bv) = (&a.amps, &b.amps);
    par::chunked_sum(a.dim(), |r| {
        r.fold(ZERO, |acc, x| {
            let y = if ((x >> i) ^ (x >> j)) & 1 == 1 { x ^ mask } else { x };
            acc + av[x].conj() * bv[y]
        })
    })
}

/// Index-bit permutation through per-byte lookup tables.
#[derive(Debug, Clone)]
pub struct BitPermuter {
    tables: Vec<[usize; 256]>,
}

impl BitPermuter {
    /// Maps index bit `k` to bit `g(k)`.
    pub fn new(g: &Permutation) -> Self {
        let n = g.len();
        let tables = (0..n.div_ceil(8))
            .map(|byte| {
                let mut t = [0usize; 256];
                for (v, slot) in t.iter_mut().enumerate() {
                    for b in 0..8 {
                        let k = byte * 8 + b;
                        if k < n && (v >> b) & 1 == 1 {
                            *slot |= 1 << g.image(k);
                        }
                    }
                }
                t
            })
            .collect();
        BitPermuter { tables }
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.tables.iter().enumerate().fold(0, |acc, (byte, t)| acc | t[(x >> (8 * byte)) & 0xff])
    }
}

/// Validated perfect matching of all sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimerPattern {
    pairs: Vec<Bond>,
}

impl DimerPattern {
    pub fn new(qubits: usize, pairs: Vec<Bond>) -> Result<Self> {
        if !qubits.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("{qubits} sites cannot be fully dimerized")));
        }
        let mut used = vec![false; qubits];
        for &(i, j) in &pairs {
            if i == j || i >= qubits || j >= qubits || used[i] || used[j] {
                return Err(Error::InvalidInput(format!("{pairs:?} is not a matching of {qubits} sites")));
            }
            used[i] = true;
            used[j] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidInput(format!("{pairs:?} leaves sites unpaired")));
        }
        Ok(DimerPattern { pairs })
    }

    pub fn pairs(&self) -> &[Bond] {
        &self.pairs
    }

    pub fn qubits(&self) -> usize {
        2 * self.pairs.len()
    }
}

/// Tensor product of singlets over the pattern's pairs. For a pair (i, j) the
/// configuration (i down, j up) carries +1/√2 and (i up, j down) −1/√2.
pub fn dimer_state(pattern: &DimerPattern) -> StateVector {
    let n = pattern.qubits();
    let mut v = StateVector::zeros(n);
    let amp = std::f64::consts::FRAC_1_SQRT_2.powi(pattern.pairs.len() as i32);
    let pairs = &pattern.pairs;
    par::fill_indexed(&mut v.amps, |x| {
        let mut sign = 1.0;
        for &(i, j) in pairs {
            let (bi, bj) = ((x >> i) & 1, (x >> j) & 1);
            if bi == bj {
                return ZERO;
            }
            if bi == 0 {
                sign = -sign;
            }
        }
        Complex64::new(sign * amp, 0.0)
    });
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn close(a: &StateVector, b: &StateVector, tol: f64) -> bool {
        a.amplitudes().iter().zip(b.amplitudes()).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn two_site_singlet_layout() {
        let v = dimer_state(&DimerPattern::new(2, vec![(0, 1)]).unwrap());
        let expect = [0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0];
        for (a, e) in v.amplitudes().iter().zip(expect) {
            assert!((a - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn distinct_pairings_give_distinct_states() {
        let a = dimer_state(&DimerPattern::new(4, vec![(0, 1), (2, 3)]).unwrap());
        let b = dimer_state(&DimerPattern::new(4, vec![(0, 3), (1, 2)]).unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-14 && (b.norm() - 1.0).abs() < 1e-14);
        assert!(!close(&a, &b, 1e-6));
    }

    #[test]
    fn bad_patterns_rejected() {
        assert!(DimerPattern::new(3, vec![(0, 1)]).is_err());
        assert!(DimerPattern::new(4, vec![(0, 1), (1, 2)]).is_err());
        assert!(DimerPattern::new(4, vec![(0, 1)]).is_err());
    }

    #[test]
    fn eswap_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = StateVector::random(5, &mut rng);
        let mut w = v.clone();
        w.apply_eswap(1, 3, 0.0);
        assert_eq!(v, w);
    }

    #[test]
    fn eswap_quarter_turn_swaps_with_phase() {
        // |↑↓⟩: site 0 up, site 1 down -> index 0b10
        let mut v = StateVector::basis(2, 0b10);
        v.apply_eswap(0, 1, FRAC_PI_2);
        let mut expect = StateVector::zeros(2);
        expect[0b01] = I;
        assert!(close(&v, &expect, 1e-15));
    }

    #[test]
    fn transposition_matches_half_pi_eswap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = StateVector::random(6, &mut rng);
        let p = v.apply_permutation(&Permutation::transposition(6, 1, 4));
        let mut e = v.clone();
        e.apply_eswap(1, 4, FRAC_PI_2);
        e.scale(-I);
        assert!(close(&p, &e, 1e-14));
    }

    #[test]
    fn permutation_moves_spins() {
        // site 0 down only; cycle 0 -> 1 -> 2 -> 0 moves it to site 1
        let v = StateVector::basis(3, 0b001);
        let g = Permutation::new(vec![1, 2, 0]).unwrap();
        let w = v.apply_permutation(&g);
        assert_eq!(w[0b010], ONE);
        assert!(v.apply_permutation(&Permutation::identity(3)) == v);
    }

    #[test]
    fn swap_inner_matches_materialized_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = StateVector::random(5, &mut rng);
        let b = StateVector::random(5, &mut rng);
        let mut pb = b.clone();
        pb.apply_swap(0, 3);
        let direct = a.inner(&pb).unwrap();
        assert!((swap_inner(&a, &b, 0, 3) - direct).norm() < 1e-14);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let a = StateVector::zeros(2);
        let b = StateVector::zeros(3);
        assert!(matches!(a.inner(&b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn orthogonal_basis_states() {
        let a = StateVector::basis(3, 1);
        let b = StateVector::basis(3, 6);
        assert_eq!(a.inner(&b).unwrap(), ZERO);
        assert_eq!(a.inner(&a).unwrap(), ONE);
    }
}
