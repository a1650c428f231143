//! Metropolis sampling of exp(−E(θ)/T) over circuit parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ansatz::Ansatz;
use crate::engine::StateVector;
use crate::optimize::block_sem;
use crate::shots::component_rng;
use crate::{Error, Result};

/// Acceptance window targeted while tuning the step scale.
pub const TARGET_ACCEPTANCE: (f64, f64) = (0.3, 0.6);
/// Post burn-in acceptance outside this range is reported as mis-tuned.
pub const ACCEPTANCE_LIMITS: (f64, f64) = (0.01, 0.99);
const TUNE_INTERVAL: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig {
    /// Inverse temperature in units of 1/j1.
    pub beta: f64,
    /// Initial standard deviation of the per-angle Gaussian proposal.
    pub step_scale: f64,
    /// Total proposals including burn-in.
    pub chain_length: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Adapt the step scale during burn-in.
    pub tune: bool,
    pub projected_fidelity: bool,
    pub seed: u64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            beta: 1.0,
            step_scale: 0.05,
            chain_length: 100_000,
            burn_in: 20_000,
            thinning: 1,
            tune: true,
            projected_fidelity: true,
            seed: 1,
        }
    }
}

impl ThermalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive and finite");
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return bad("step_scale must be positive");
        }
        if self.burn_in >= self.chain_length {
            return bad("burn_in must be shorter than chain_length");
        }
        if self.thinning == 0 {
            return bad("thinning must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalObservables {
    pub beta: f64,
    pub fidelity: f64,
    pub fidelity_sem: f64,
    pub energy: f64,
    pub energy_sem: f64,
    pub var_e: f64,
    /// β² Var E.
    pub specific_heat: f64,
    /// Post burn-in acceptance rate.
    pub acceptance: f64,
    pub samples: usize,
    /// Step scale after tuning.
    pub step_scale: f64,
    pub warnings: Vec<String>,
    pub final_theta: Vec<f64>,
}

/// min(1, e^{−β ΔE}).
pub fn acceptance_probability(delta_e: f64, beta: f64) -> f64 {
    if delta_e <= 0.0 {
        1.0
    } else {
        (-beta * delta_e).exp()
    }
}

/// Runs a chain on an arbitrary energy; `observe` returns (E, F) at θ.
pub fn metropolis<F>(mut observe: F, theta0: &[f64], cfg: &ThermalConfig) -> Result<ThermalObservables>
where
    F: FnMut(&[f64]) -> Result<(f64, f64)>,
{
    cfg.validate()?;
    let mut rng = component_rng(cfg.seed, 0, 0);
    let mut theta = theta0.to_vec();
    let (mut e, mut f) = observe(&theta)?;
    if !e.is_finite() {
        return Err(Error::Numerical("non-finite initial energy".into()));
    }
    let mut scale = cfg.step_scale;
    let mut window_accepted = 0usize;
    let mut accepted = 0usize;
    let mut energies = Vec::new();
    let mut fidelities = Vec::new();
    let mut proposal = vec![0.0; theta.len()];

    for t in 0..cfg.chain_length {
        for (p, th) in proposal.iter_mut().zip(&theta) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = th + scale * z;
        }
        let (e_new, f_new) = observe(&proposal)?;
        let u: f64 = rng.random();
        let ok = e_new.is_finite() && u < acceptance_probability(e_new - e, cfg.beta);
        if ok {
            std::mem::swap(&mut theta, &mut proposal);
            e = e_new;
            f = f_new;
        }
        if t < cfg.burn_in {
            window_accepted += ok as usize;
            if cfg.tune && (t + 1) % TUNE_INTERVAL == 0 {
                let rate = window_accepted as f64 / TUNE_INTERVAL as f64;
                if rate < TARGET_ACCEPTANCE.0 {
                    scale *= 0.8;
                } else if rate > TARGET_ACCEPTANCE.1 {
                    scale *= 1.25;
                }
                window_accepted = 0;
            }
        } else {
            accepted += ok as usize;
            if (t - cfg.burn_in).is_multiple_of(cfg.thinning) {
                energies.push(e);
                fidelities.push(f);
            }
        }
    }

    let n = energies.len() as f64;
    let energy = energies.iter().sum::<f64>() / n;
    let fidelity = fidelities.iter().sum::<f64>() / n;
    let var_e =
        if energies.len() > 1 { energies.iter().map(|x| (x - energy).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let acceptance = accepted as f64 / (cfg.chain_length - cfg.burn_in) as f64;
    let mut warnings = Vec::new();
    if acceptance < ACCEPTANCE_LIMITS.0 || acceptance > ACCEPTANCE_LIMITS.1 {
        warnings.push(format!("acceptance {acceptance:.4} outside [0.01, 0.99]; step scale mis-tuned"));
    }
    Ok(ThermalObservables {
        beta: cfg.beta,
        fidelity,
        fidelity_sem: block_sem(&fidelities),
        energy,
        energy_sem: block_sem(&energies),
        var_e,
        specific_heat: cfg.beta * cfg.beta * var_e,
        acceptance,
        samples: energies.len(),
        step_scale: scale,
        warnings,
        final_theta: theta,
    })
}

/// Chain over circuit parameters using the exact projected energy.
pub fn metropolis_chain(
    ansatz: &Ansatz,
    cfg: &ThermalConfig,
    theta0: &[f64],
    targets: &[StateVector],
) -> Result<ThermalObservables> {
    if theta0.len() != ansatz.parameter_count() {
        return Err(Error::DimensionMismatch { expected: ansatz.parameter_count(), actual: theta0.len() });
    }
    metropolis(
        |theta| {
            let o = ansatz.observe(theta, targets, cfg.projected_fidelity)?;
            Ok((o.energy, o.fidelity))
        },
        theta0,
        cfg,
    )
}
