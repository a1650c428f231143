use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{resolve_spin_degeneracies, total_spin_sq, HamiltonianSpec, SectorLabel, SpectralData, DEGENERACY_TOL};
use crate::ansatz::SymmetryProjector;
use crate::engine::{dimer_state, DimerPattern, StateVector};
use crate::{Error, Result};

/// Which part of the Hilbert space the eigensolver explores.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sector<'a> {
    /// Start from an S = 0 state and keep only eigenvectors with ⟨Ŝ²⟩ below
    /// `SINGLET_TOL`.
    pub singlet_only: bool,
    /// Restrict to the image of a symmetry projector.
    pub projector: Option<&'a SymmetryProjector>,
}

impl<'a> Sector<'a> {
    pub const SINGLET_TOL: f64 = 1e-6;

    pub fn full() -> Self {
        Sector::default()
    }

    pub fn singlet() -> Self {
        Sector { singlet_only: true, projector: None }
    }

    pub fn with_projector(mut self, p: &'a SymmetryProjector) -> Self {
        self.projector = Some(p);
        self
    }

    fn project(&self, v: &StateVector) -> StateVector {
        let mut out = match self.projector {
            Some(p) if !p.is_trivial() => p.apply(v),
            _ => v.clone(),
        };
        if self.singlet_only {
            singlet_parity_filter(&mut out);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosConfig {
    /// Krylov vectors kept per restart.
    pub max_krylov: usize,
    /// Required ‖Hv − Ev‖ per returned pair.
    pub tol: f64,
    pub seed: u64,
    /// Deflated restarts used to complete degenerate multiplets.
    pub max_restarts: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig { max_krylov: 300, tol: 1e-8, seed: 0x5eed, max_restarts: 12 }
    }
}

/// Lowest `k` eigenpairs of `h` inside `sector`, with full
/// reorthogonalization and deflated restarts. Returns fewer pairs (with
/// `truncated` set) when the sector is smaller than `k`.
pub fn lowest_k(h: &HamiltonianSpec, k: usize, sector: &Sector<'_>, cfg: &LanczosConfig) -> Result<SpectralData> {
    if k == 0 {
        return Err(Error::InvalidInput("requested zero eigenpairs".into()));
    }
    let n = h.qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut locked: Vec<(f64, StateVector, f64)> = Vec::new();
    let mut exhausted = false;
    let mut worst_residual = 0.0f64;

    for _ in 0..=cfg.max_restarts {
        let mut start = sector.project(&start_vector(n, sector.singlet_only, &mut rng));
        for (_, u, _) in &locked {
            let c = u.inner(&start)?;
            start.add_scaled(-c, u);
        }
        if start.normalize() < 1e-10 {
            exhausted = true;
            break;
        }
        let wanted = k.saturating_sub(count_kept(&locked, sector)).max(1);
        let run = krylov(h, start, &locked, sector, cfg, wanted)?;
        worst_residual = worst_residual.max(run.worst_estimate);
        let lowest_new = run.pairs.first().map(|p| p.0);
        locked.extend(run.pairs);
        locked.sort_by(|a, b| a.0.total_cmp(&b.0));
        resolve_locked(&mut locked);
        if run.exhausted && lowest_new.is_none() {
            exhausted = true;
            break;
        }
        let kept: Vec<f64> = kept_values(&locked, sector);
        if kept.len() >= k {
            let kth = kept[k - 1];
            if lowest_new.is_none_or(|e| e > kth + DEGENERACY_TOL) {
                break;
            }
        }
        if run.exhausted {
            exhausted = true;
        }
    }

    let mut data = SpectralData {
        eigenvalues: Vec::new(),
        eigenstates: Vec::new(),
        labels: Vec::new(),
        residuals: Vec::new(),
        truncated: false,
    };
    for (e, v, r) in locked {
        let spin_sq = total_spin_sq(&v);
        if sector.singlet_only && spin_sq >= Sector::SINGLET_TOL {
            continue;
        }
        let projector_weight = match sector.projector {
            Some(p) => p.apply(&v).norm(),
            None => 1.0,
        };
        data.eigenvalues.push(e);
        data.eigenstates.push(v);
        data.labels.push(SectorLabel { spin_sq, projector_weight });
        data.residuals.push(r);
    }
    // Keep whole degenerate multiplets even past k.
    if data.eigenvalues.len() > k {
        let kth = data.eigenvalues[k - 1];
        let keep = data.eigenvalues.iter().take_while(|&&e| e <= kth + DEGENERACY_TOL).count();
        data.eigenvalues.truncate(keep);
        data.eigenstates.truncate(keep);
        data.labels.truncate(keep);
        data.residuals.truncate(keep);
    }
    if data.eigenvalues.is_empty() {
        return Err(Error::NotConverged { iterations: cfg.max_krylov, residual: worst_residual });
    }
    data.truncated = data.eigenvalues.len() < k;
    if data.truncated && !exhausted {
        return Err(Error::NotConverged {
            iterations: cfg.max_krylov * (cfg.max_restarts + 1),
            residual: worst_residual,
        });
    }
    Ok(data)
}

fn resolve_locked(locked: &mut [(f64, StateVector, f64)]) {
    let values: Vec<f64> = locked.iter().map(|p| p.0).collect();
    let mut states: Vec<StateVector> = locked.iter().map(|p| p.1.clone()).collect();
    resolve_spin_degeneracies(&values, &mut states, DEGENERACY_TOL);
    for (slot, v) in locked.iter_mut().zip(states) {
        slot.1 = v;
    }
}

fn count_kept(locked: &[(f64, StateVector, f64)], sector: &Sector<'_>) -> usize {
    kept_values(locked, sector).len()
}

fn kept_values(locked: &[(f64, StateVector, f64)], sector: &Sector<'_>) -> Vec<f64> {
    locked
        .iter()
        .filter(|(_, v, _)| !sector.singlet_only || total_spin_sq(v) < Sector::SINGLET_TOL)
        .map(|p| p.0)
        .collect()
}

/// Keeps the zero-magnetization, spin-flip-parity (−1)^{N/2} part, which
/// contains every singlet and removes all odd-spin multiplets. Stops
/// round-off from leaking triplets into a singlet Krylov space.
fn singlet_parity_filter(v: &mut StateVector) {
    let n = v.qubits();
    if n % 2 == 1 {
        return;
    }
    let sign = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let full = v.dim() - 1;
    let amps = v.amplitudes_mut();
    for x in 0..amps.len() {
        if x.count_ones() as usize != n / 2 {
            amps[x] = Complex64::new(0.0, 0.0);
        } else if x < full ^ x {
            let y = full ^ x;
            let s = 0.5 * (amps[x] + sign * amps[y]);
            amps[x] = s;
            amps[y] = sign * s;
        }
    }
}

/// A generic state in the S = 0 sector (a dimer product scrambled by random
/// exchange rotations) or a random vector with zero magnetization.
fn start_vector(n: usize, singlet: bool, rng: &mut ChaCha8Rng) -> StateVector {
    if singlet && n.is_multiple_of(2) {
        let pairs = (0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        let mut v = dimer_state(&DimerPattern::new(n, pairs).expect("valid pairing"));
        for _ in 0..4 * n * n {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            v.apply_eswap(i, j, rng.random_range(0.0..std::f64::consts::TAU));
        }
        v
    } else {
        let mut v = StateVector::random(n, rng);
        if n.is_multiple_of(2) {
            for (x, a) in v.amplitudes_mut().iter_mut().enumerate() {
                if x.count_ones() as usize != n / 2 {
                    *a = Complex64::new(0.0, 0.0);
                }
            }
            v.normalize();
        }
        v
    }
}

struct KrylovRun {
    pairs: Vec<(f64, StateVector, f64)>,
    exhausted: bool,
    worst_estimate: f64,
}

fn orthogonalize(w: &mut StateVector, basis: &[StateVector]) -> Result<()> {
    for _ in 0..2 {
        for q in basis {
            let c = q.inner(w)?;
            w.add_scaled(-c, q);
        }
    }
    Ok(())
}

fn krylov(
    h: &HamiltonianSpec,
    start: StateVector,
    locked: &[(f64, StateVector, f64)],
    sector: &Sector<'_>,
    cfg: &LanczosConfig,
    wanted: usize,
) -> Result<KrylovRun> {
    let locked_vecs: Vec<StateVector> = locked.iter().map(|p| p.1.clone()).collect();
    let mut q = vec![start];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut exhausted = false;
    let scale = h.terms().iter().map(|(_, j)| j.abs()).sum::<f64>().max(1e-300);
    let mut w = StateVector::zeros(h.qubits());

    loop {
        let m = q.len();
        h.apply_into(&q[m - 1], &mut w)?;
        let mut hw = sector.project(&w);
        let a = q[m - 1].inner(&hw)?.re;
        alpha.push(a);
        orthogonalize(&mut hw, &q)?;
        orthogonalize(&mut hw, &locked_vecs)?;
        let b = hw.norm();
        let done = b < 1e-8 * scale;
        if done {
            exhausted = true;
        }
        let check = done || m >= cfg.max_krylov || (m >= wanted && m % 5 == 0);
        if check {
            let (values, vectors) = tridiagonal_eigen(&alpha, &beta);
            let last = if done { 0.0 } else { b };
            let estimates: Vec<f64> = (0..m).map(|i| (last * vectors[(m - 1, i)]).abs()).collect();
            let converged_prefix = estimates.iter().take_while(|&&r| r < 0.1 * cfg.tol).count();
            if done || m >= cfg.max_krylov || converged_prefix >= wanted.min(m) {
                let take = if done { m } else { converged_prefix };
                let mut pairs = Vec::with_capacity(take);
                for i in 0..take {
                    let mut y = StateVector::zeros(h.qubits());
                    for (j, qj) in q.iter().enumerate() {
                        y.add_scaled(Complex64::new(vectors[(j, i)], 0.0), qj);
                    }
                    y.normalize();
                    let mut r = h.apply(&y)?;
                    let e = y.inner(&r)?.re;
                    r.add_scaled(Complex64::new(-e, 0.0), &y);
                    let res = r.norm();
                    if res >= cfg.tol {
                        break;
                    }
                    pairs.push((e, y, res));
                }
                let worst = estimates.iter().take(wanted.min(m)).fold(0.0f64, |acc, &r| acc.max(r));
                let _ = values;
                return Ok(KrylovRun { pairs, exhausted, worst_estimate: worst });
            }
        }
        beta.push(b);
        hw.scale(Complex64::new(1.0 / b, 0.0));
        q.push(hw);
    }
}

/// Eigen-decomposition of the tridiagonal matrix, eigenvalues ascending.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
