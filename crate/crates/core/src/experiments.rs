//! Sweep orchestration shared by the command-line harness and the
//! acceptance suite: system construction with its sector spectrum, shot
//! sweeps, temperature sweeps and matched-ε runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{effective_specific_heat, effective_temperature, SweepPoint};
use crate::ansatz::{Ansatz, Circuit, SymmetryProjector};
use crate::engine::{DimerPattern, StateVector};
use crate::lattice::{
    build_lattice, checkerboard_layers, dimer_pairs, symmetry_group, Boundary, DimerAlignment, Geometry, Irrep,
    LatticeSpec, SymmetrySelection,
};
use crate::optimize::{restart_seed, run, OptimizerConfig, RunRecord, Summary};
use crate::shots::{component_rng, force_variance};
use crate::spectrum::{dense, total_spin_sq, HamiltonianSpec, DEGENERACY_TOL};
use crate::spectrum::{lowest_k, LanczosConfig, Sector};
use crate::thermal::{metropolis_chain, ThermalConfig};
use crate::{par, Error, Result};

/// Clusters above this many qubits need an explicit opt-in.
pub const LARGE_QUBITS: usize = 16;
// Independent eigensolver runs agree on a level to this accuracy.
const LEVEL_MATCH_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub geometry: Geometry,
    pub extents: [usize; 2],
    pub boundary: [Boundary; 2],
    pub j2: f64,
    /// Circuit layers, cycled through the checkerboard decomposition.
    pub depth: usize,
    pub symmetry: SymmetrySelection,
    pub dimers: DimerAlignment,
    /// Index of the S = 0 level to target (0 = ground state). Excited levels
    /// must be the lowest state of their symmetry sector.
    pub target_level: usize,
}

impl SystemConfig {
    pub fn square(l1: usize, l2: usize, j2: f64, depth: usize) -> Self {
        SystemConfig {
            geometry: Geometry::Square,
            extents: [l1, l2],
            boundary: [Boundary::Periodic, Boundary::Periodic],
            j2,
            depth,
            symmetry: SymmetrySelection::Identity,
            dimers: DimerAlignment::J1,
            target_level: 0,
        }
    }

    pub fn spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.geometry, self.extents, self.boundary)
    }
}

/// Levels of the S = 0 symmetry sector containing the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorInfo {
    /// Ascending sector energies (as many as were computed).
    pub energies: Vec<f64>,
    /// First sector level above the target.
    pub gap: Option<f64>,
    /// Target energy.
    pub energy: f64,
    /// Degeneracy of the target level inside the sector.
    pub degeneracy: usize,
    /// Computed by dense diagonalization (complete sector) or Lanczos.
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub struct System {
    pub config: SystemConfig,
    pub spec: LatticeSpec,
    pub ansatz: Ansatz,
    /// Orthonormal basis of the target level inside the sector.
    pub targets: Vec<StateVector>,
    pub sector: SectorInfo,
    /// Every S = 0 level found before sector selection, ascending.
    pub singlet_energies: Vec<f64>,
    pub singlet_states: Vec<StateVector>,
}

/// S = 0 eigenpairs: all of them when the zero-magnetization block is small
/// enough for dense diagonalization, otherwise the lowest `k` from Lanczos.
pub fn singlet_spectrum(h: &HamiltonianSpec, k: usize) -> Result<(Vec<f64>, Vec<StateVector>, bool)> {
    match dense::diagonalize(h, None) {
        Ok(d) => {
            let keep: Vec<usize> =
                (0..d.eigenvalues.len()).filter(|&i| total_spin_sq(&d.eigenstates[i]) < Sector::SINGLET_TOL).collect();
            Ok((
                keep.iter().map(|&i| d.eigenvalues[i]).collect(),
                keep.into_iter().map(|i| d.eigenstates[i].clone()).collect(),
                true,
            ))
        }
        Err(Error::Budget(_)) => {
            let data = lowest_k(h, k.max(1), &Sector::singlet(), &LanczosConfig::default())?;
            let complete = data.truncated;
            Ok((data.eigenvalues, data.eigenstates, complete))
        }
        Err(e) => Err(e),
    }
}

/// Projects each degenerate cluster onto the sector and orthonormalizes,
/// so that levels degenerate across sectors are split correctly.
pub fn sector_levels(
    energies: &[f64],
    states: &[StateVector],
    projector: &SymmetryProjector,
) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let mut out_e = Vec::new();
    let mut out_v: Vec<StateVector> = Vec::new();
    let mut i = 0;
    while i < energies.len() {
        let mut j = i + 1;
        while j < energies.len() && energies[j] - energies[i] <= DEGENERACY_TOL {
            j += 1;
        }
        let start = out_v.len();
        for v in &states[i..j] {
            let mut p = projector.apply(v);
            for u in &out_v[start..] {
                let c = u.inner(&p)?;
                p.add_scaled(-c, u);
            }
            if p.normalize() > 1e-6 {
                out_v.push(p);
                out_e.push(energies[i]);
            }
        }
        i = j;
    }
    Ok((out_e, out_v))
}

impl System {
    pub fn build(config: &SystemConfig, allow_large: bool) -> Result<System> {
        let spec = config.spec()?;
        let n = spec.site_count();
        if n > LARGE_QUBITS && !allow_large {
            return Err(Error::Budget(format!("{n} qubits exceeds {LARGE_QUBITS} without the large-system opt-in")));
        }
        if n % 2 == 1 {
            return Err(Error::InvalidInput("singlet targets need an even number of sites".into()));
        }
        let bonds = build_lattice(&spec)?;
        let h = HamiltonianSpec::new(&bonds, 1.0, config.j2)?;
        let circuit = Circuit::new(&checkerboard_layers(&spec)?, config.depth)?;
        let pattern = DimerPattern::new(n, dimer_pairs(&spec, config.dimers)?)?;

        let (singlet_energies, singlet_states, complete) = singlet_spectrum(&h, config.target_level + 8)?;
        let levels = distinct_levels(&singlet_energies);
        let Some(&(lo, hi)) = levels.get(config.target_level) else {
            return Err(Error::InvalidInput(format!(
                "target level {} not available ({} S = 0 levels computed)",
                config.target_level,
                levels.len()
            )));
        };

        let projector = match config.symmetry {
            SymmetrySelection::Identity => SymmetryProjector::identity(n),
            sel => {
                if hi - lo > 1 {
                    return Err(Error::SymmetryRejected(format!(
                        "target level is {}-fold degenerate; choose a symmetry it does not break or identity",
                        hi - lo
                    )));
                }
                let group = symmetry_group(&spec, sel, &Irrep::Trivial)?;
                SymmetryProjector::from_state(group, &singlet_states[lo])?
            }
        };

        let (energies, states, complete) = if complete || projector.is_trivial() {
            let (e, v) = sector_levels(&singlet_energies, &singlet_states, &projector)?;
            (e, v, complete)
        } else {
            let sector = Sector::singlet().with_projector(&projector);
            let data = lowest_k(&h, 2, &sector, &LanczosConfig::default())?;
            (data.eigenvalues, data.eigenstates, data.truncated)
        };
        let target_energy = singlet_energies[lo];
        let first = energies
            .iter()
            .position(|e| (e - target_energy).abs() <= LEVEL_MATCH_TOL)
            .ok_or_else(|| Error::Numerical("target level missing from its own sector".into()))?;
        if first != 0 {
            return Err(Error::InvalidInput(format!(
                "target level {} is not the lowest state of its symmetry sector",
                config.target_level
            )));
        }
        let degeneracy = energies.iter().take_while(|e| (*e - target_energy).abs() <= LEVEL_MATCH_TOL).count();
        let targets = states[..degeneracy].to_vec();
        let gap = energies.get(degeneracy).map(|e| e - target_energy);
        let ansatz = Ansatz::new(circuit, &pattern, projector, h)?;
        Ok(System {
            config: config.clone(),
            spec,
            ansatz,
            targets,
            sector: SectorInfo { energies, gap, energy: target_energy, degeneracy, complete },
            singlet_energies,
            singlet_states,
        })
    }

    pub fn qubits(&self) -> usize {
        self.spec.site_count()
    }

    pub fn parameter_count(&self) -> usize {
        self.ansatz.parameter_count()
    }

    /// Number of S = 0 states in the full Hilbert space.
    pub fn singlet_dimension(&self) -> u64 {
        singlet_dimension(self.qubits())
    }
}

/// Multiplicity of total spin 0 among N spin-1/2: C(N, N/2) − C(N, N/2 + 1).
pub fn singlet_dimension(n: usize) -> u64 {
    if n % 2 == 1 {
        return 0;
    }
    binomial(n as u64, n as u64 / 2) - binomial(n as u64, n as u64 / 2 + 1)
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `(start, end)` index ranges of degenerate clusters.
fn distinct_levels(energies: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < energies.len() {
        let mut j = i + 1;
        while j < energies.len() && energies[j] - energies[i] <= DEGENERACY_TOL {
            j += 1;
        }
        out.push((i, j));
        i = j;
    }
    out
}

/// Summary of one optimizer run at fixed shot count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotPoint {
    pub shots: u64,
    pub learning_rate: f64,
    pub parameter_count: usize,
    pub fidelity: f64,
    pub fidelity_sem: f64,
    pub energy: f64,
    pub energy_sem: f64,
    pub var_e: f64,
    pub var_e_sem: f64,
    /// N_s² Var E.
    pub specific_heat: f64,
    pub n_sgd: f64,
    pub n_sgd_sem: f64,
    pub var_f_init: f64,
    pub var_f_tail: f64,
    /// From the tail force variance.
    pub temperature: f64,
    pub epsilon: f64,
    pub unconverged: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl ShotPoint {
    pub fn from_record(shots: u64, cfg: &OptimizerConfig, rec: &RunRecord) -> Result<ShotPoint> {
        let fl =
            effective_temperature(rec.var_f_tail.mean.max(0.0), cfg.learning_rate, shots as f64, rec.parameter_count)?;
        Ok(ShotPoint {
            shots,
            learning_rate: cfg.learning_rate,
            parameter_count: rec.parameter_count,
            fidelity: rec.fidelity.mean,
            fidelity_sem: rec.fidelity.sem,
            energy: rec.energy.mean,
            energy_sem: rec.energy.sem,
            var_e: rec.var_e.mean,
            var_e_sem: rec.var_e.sem,
            specific_heat: effective_specific_heat(shots as f64, rec.var_e.mean),
            n_sgd: rec.n_sgd.mean,
            n_sgd_sem: rec.n_sgd.sem,
            var_f_init: rec.var_f_init.mean,
            var_f_tail: rec.var_f_tail.mean,
            temperature: fl.temperature,
            epsilon: fl.epsilon,
            unconverged: rec.unconverged,
            restarts: rec.restarts.len(),
            seed: cfg.seed,
        })
    }

    pub fn sweep_point(&self) -> SweepPoint {
        SweepPoint { x: self.shots as f64, fidelity: self.fidelity, var_e: self.var_e }
    }
}

/// Runs the optimizer at every shot count of `grid` (same seed at every
/// point, so initial angles are shared across the grid).
pub fn shots_sweep(
    system: &System,
    base: &OptimizerConfig,
    grid: &[u64],
    mut on_point: impl FnMut(&ShotPoint, &RunRecord) -> Result<()>,
) -> Result<Vec<ShotPoint>> {
    if base.shots.mode == crate::shots::ShotMode::Exact {
        return Err(Error::InvalidInput("a shot sweep needs a sampled shot mode".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for &ns in grid {
        let mut cfg = base.clone();
        cfg.shots.shots = ns;
        let rec = run(&system.ansatz, &cfg, &system.targets)?;
        let point = ShotPoint::from_record(ns, &cfg, &rec)?;
        on_point(&point, &rec)?;
        out.push(point);
    }
    Ok(out)
}

/// Thermal averages at one β pooled over independent chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub fidelity: f64,
    pub fidelity_sem: f64,
    pub energy: f64,
    pub energy_sem: f64,
    pub var_e: f64,
    /// β² Var E.
    pub specific_heat: f64,
    pub acceptance: f64,
    pub samples: usize,
    pub chains: usize,
    pub warnings: Vec<String>,
    pub seed: u64,
}

impl BetaPoint {
    pub fn sweep_point(&self) -> SweepPoint {
        SweepPoint { x: self.beta, fidelity: self.fidelity, var_e: self.var_e }
    }
}

/// Metropolis chains at each β, started from angles drawn uniformly from
/// `init_range`.
pub fn beta_sweep(
    system: &System,
    base: &ThermalConfig,
    betas: &[f64],
    chains: usize,
    init_range: (f64, f64),
) -> Result<Vec<BetaPoint>> {
    if chains == 0 {
        return Err(Error::InvalidInput("need at least one chain".into()));
    }
    let np = system.parameter_count();
    let mut out = Vec::with_capacity(betas.len());
    for (bi, &beta) in betas.iter().enumerate() {
        let results: Vec<Result<_>> = par::map_jobs(chains, |c| {
            let seed = restart_seed(base.seed, bi * chains + c);
            let mut rng = component_rng(seed, 0, 1);
            let theta0: Vec<f64> = (0..np)
                .map(|_| {
                    if init_range.1 > init_range.0 {
                        rng.random_range(init_range.0..init_range.1)
                    } else {
                        init_range.0
                    }
                })
                .collect();
            let cfg = ThermalConfig { beta, seed, ..base.clone() };
            metropolis_chain(&system.ansatz, &cfg, &theta0, &system.targets)
        });
        let obs = results.into_iter().collect::<Result<Vec<_>>>()?;
        let f = Summary::of(&obs.iter().map(|o| o.fidelity).collect::<Vec<_>>());
        let e = Summary::of(&obs.iter().map(|o| o.energy).collect::<Vec<_>>());
        // pooled variance: within-chain plus between-chain spread
        let within = obs.iter().map(|o| o.var_e).sum::<f64>() / chains as f64;
        let between = obs.iter().map(|o| (o.energy - e.mean).powi(2)).sum::<f64>() / chains as f64;
        let var_e = within + between;
        let mut warnings: Vec<String> = obs.iter().flat_map(|o| o.warnings.iter().cloned()).collect();
        warnings.dedup();
        out.push(BetaPoint {
            beta,
            fidelity: f.mean,
            fidelity_sem: if chains > 1 { f.sem } else { obs[0].fidelity_sem },
            energy: e.mean,
            energy_sem: if chains > 1 { e.sem } else { obs[0].energy_sem },
            var_e,
            specific_heat: beta * beta * var_e,
            acceptance: obs.iter().map(|o| o.acceptance).sum::<f64>() / chains as f64,
            samples: obs.iter().map(|o| o.samples).sum(),
            chains,
            warnings,
            seed: base.seed,
        });
    }
    Ok(out)
}

/// Mean single-shot force variance over components and `samples` random
/// initial points.
pub fn initial_force_variance(system: &System, init_range: (f64, f64), samples: usize, seed: u64) -> Result<f64> {
    let np = system.parameter_count();
    let vals: Vec<Result<f64>> = par::map_jobs(samples.max(1), |s| {
        let mut rng = component_rng(seed, s as u64, 2);
        let theta: Vec<f64> =
            (0..np)
                .map(|_| {
                    if init_range.1 > init_range.0 {
                        rng.random_range(init_range.0..init_range.1)
                    } else {
                        init_range.0
                    }
                })
                .collect();
        let v = force_variance(&system.ansatz, &theta)?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    });
    let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Shot count whose effective ε = N_p η Var f / (2 N_s) equals `epsilon`.
pub fn shots_for_epsilon(parameter_count: usize, learning_rate: f64, var_f: f64, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let ns = parameter_count as f64 * learning_rate * var_f / (2.0 * epsilon);
    Ok(ns.round().max(1.0) as u64)
}
