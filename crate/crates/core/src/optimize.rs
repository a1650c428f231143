//! SGD and stochastic-reconfiguration loops with a sliding-window
//! convergence and tail-averaging protocol.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, MetricTensor};
use crate::engine::StateVector;
use crate::shots::{component_rng, ShotConfig, ShotMode, ShotSampler};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sgd,
    Sr,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sgd => "sgd",
            Method::Sr => "sr",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Method::Sgd),
            "sr" => Ok(Method::Sr),
            other => Err(Error::InvalidInput(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub max_steps: usize,
    pub shots: ShotConfig,
    /// β added to |Re G| in SR.
    pub regularization: f64,
    /// Initial angles drawn uniformly from this interval.
    pub init_range: (f64, f64),
    pub restarts: usize,
    /// Sliding window for the stabilization test.
    pub window: usize,
    /// Largest change of the windowed fidelity mean that counts as stable.
    pub tolerance: f64,
    /// Steps averaged after stabilization.
    pub tail: usize,
    /// Trailing window used to locate the 90 % fidelity crossing.
    pub crossing_window: usize,
    /// Measure fidelity on the projected state instead of the raw one.
    pub projected_fidelity: bool,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Sgd,
            learning_rate: 0.05,
            max_steps: 20_000,
            shots: ShotConfig::exact(),
            regularization: 1e-3,
            init_range: (0.0, 0.1),
            restarts: 10,
            window: 300,
            tolerance: 0.005,
            tail: 1000,
            crossing_window: 50,
            projected_fidelity: true,
            seed: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.window == 0 || self.tail == 0 || self.crossing_window == 0 {
            return bad("window, tail and crossing_window must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.regularization >= 0.0) {
            return bad("regularization must be non-negative");
        }
        if !(self.init_range.0 <= self.init_range.1) {
            return bad("init_range must be ordered");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        self.shots.validate()
    }
}

/// θ' = θ − η f.
pub fn sgd_step(theta: &[f64], forces: &[f64], eta: f64) -> Result<Vec<f64>> {
    if theta.len() != forces.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), actual: forces.len() });
    }
    if forces.iter().any(|f| !f.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    Ok(theta.iter().zip(forces).map(|(t, f)| t - eta * f).collect())
}

/// Outcome of an SR update.
#[derive(Debug, Clone, PartialEq)]
pub struct SrUpdate {
    pub theta: Vec<f64>,
    /// The regularized metric was singular; an SGD step was taken instead.
    pub fell_back: bool,
}

/// (|Re G| + β)⁻¹ f, with |·| taken through the symmetric eigendecomposition.
pub fn regularized_solve(g: &MetricTensor, forces: &[f64], beta: f64) -> Option<Vec<f64>> {
    let n = g.size;
    let re = DMatrix::from_row_slice(n, n, &g.real_part());
    let re = (&re + re.transpose()) * 0.5;
    let eig = SymmetricEigen::new(re);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(beta);
    let f = DVector::from_column_slice(forces);
    let coeffs = eig.eigenvectors.transpose() * f;
    let mut out = DVector::<f64>::zeros(n);
    for (i, c) in coeffs.iter().enumerate() {
        let d = eig.eigenvalues[i].abs() + beta;
        if !(d > 1e-12 * scale.max(1e-300)) {
            return None;
        }
        out += eig.eigenvectors.column(i) * (c / d);
    }
    out.iter().all(|x| x.is_finite()).then(|| out.iter().copied().collect())
}

/// θ' = θ − η (|Re G| + β)⁻¹ f, falling back to SGD if the solve fails.
pub fn sr_step(theta: &[f64], forces: &[f64], g: &MetricTensor, eta: f64, beta: f64) -> Result<SrUpdate> {
    if g.size != theta.len() {
        return Err(Error::DimensionMismatch { expected: theta.len(), actual: g.size });
    }
    match regularized_solve(g, forces, beta) {
        Some(dir) => Ok(SrUpdate { theta: sgd_step(theta, &dir, eta)?, fell_back: false }),
        None => Ok(SrUpdate { theta: sgd_step(theta, forces, eta)?, fell_back: true }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub energy: f64,
    pub fidelity: f64,
    pub grad_norm: f64,
    /// Mean over components of the single-shot force variance (0 if exact).
    pub var_f: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub seed: u64,
    pub steps: Vec<StepLog>,
    /// Step at which the windowed fidelity mean stabilized.
    pub converged_at: Option<usize>,
    pub fidelity: f64,
    pub energy: f64,
    pub energy_sem: f64,
    /// Variance of the energy over the tail.
    pub var_e: f64,
    /// Steps until the trailing fidelity mean first reached 90 % of the tail
    /// fidelity.
    pub n_sgd: Option<usize>,
    /// Mean single-shot force variance at the first step and over the tail.
    pub var_f_init: f64,
    pub var_f_tail: f64,
    pub sr_fallbacks: usize,
    pub shots_spent: u64,
    pub final_theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sem: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Summary { mean: f64::NAN, sem: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let sem = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Summary { mean, sem }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub restarts: Vec<RestartRecord>,
    pub fidelity: Summary,
    pub energy: Summary,
    pub var_e: Summary,
    pub n_sgd: Summary,
    pub var_f_init: Summary,
    pub var_f_tail: Summary,
    /// Restarts that hit `max_steps` before stabilizing.
    pub unconverged: usize,
    pub parameter_count: usize,
}

impl RunRecord {
    /// One JSON object per step, tagged with the restart index.
    pub fn write_step_log<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            restart: usize,
            seed: u64,
            #[serde(flatten)]
            step: &'a StepLog,
        }
        for r in &self.restarts {
            for s in &r.steps {
                let line = serde_json::to_string(&Line { restart: r.restart, seed: r.seed, step: s })
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Optimizes from `restarts` random starts and tail-averages fidelity and
/// energy against the target space (e.g. a degenerate ground space).
pub fn run(ansatz: &Ansatz, cfg: &OptimizerConfig, targets: &[StateVector]) -> Result<RunRecord> {
    cfg.validate()?;
    let results: Vec<Result<RestartRecord>> = par::map_jobs(cfg.restarts, |r| run_one(ansatz, cfg, targets, r));
    let restarts = results.into_iter().collect::<Result<Vec<_>>>()?;
    let collect = |f: &dyn Fn(&RestartRecord) -> f64| restarts.iter().map(f).collect::<Vec<f64>>();
    let n_sgd: Vec<f64> = restarts.iter().filter_map(|r| r.n_sgd.map(|n| n as f64)).collect();
    Ok(RunRecord {
        fidelity: Summary::of(&collect(&|r| r.fidelity)),
        energy: Summary::of(&collect(&|r| r.energy)),
        var_e: Summary::of(&collect(&|r| r.var_e)),
        n_sgd: Summary::of(&n_sgd),
        var_f_init: Summary::of(&collect(&|r| r.var_f_init)),
        var_f_tail: Summary::of(&collect(&|r| r.var_f_tail)),
        unconverged: restarts.iter().filter(|r| r.converged_at.is_none()).count(),
        parameter_count: ansatz.parameter_count(),
        restarts,
    })
}

/// Seed of restart `r`.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    component_rng(seed, u64::MAX, r as u64).random()
}

fn run_one(ansatz: &Ansatz, cfg: &OptimizerConfig, targets: &[StateVector], r: usize) -> Result<RestartRecord> {
    let seed = restart_seed(cfg.seed, r);
    let mut init_rng = component_rng(seed, 0, u64::MAX);
    let (lo, hi) = cfg.init_range;
    let mut theta: Vec<f64> =
        (0..ansatz.parameter_count()).map(|_| if hi > lo { init_rng.random_range(lo..hi) } else { lo }).collect();
    let mut sampler = ShotSampler::new(ShotConfig { seed, ..cfg.shots })?;
    let needs_variance = cfg.shots.mode != ShotMode::Exact;
    let mut steps: Vec<StepLog> = Vec::new();
    let mut converged_at = None;
    let mut stop_at = cfg.max_steps;
    let mut sr_fallbacks = 0;
    let w = cfg.window;

    for t in 0..cfg.max_steps {
        if t >= stop_at {
            break;
        }
        let obs = ansatz.observe(&theta, targets, cfg.projected_fidelity)?;
        let grad = sampler.gradient(ansatz, &theta)?;
        let grad_norm = grad.forces.iter().map(|f| f * f).sum::<f64>().sqrt();
        let var_f = if needs_variance { mean(&grad.variance) } else { 0.0 };
        steps.push(StepLog { step: t, energy: obs.energy, fidelity: obs.fidelity, grad_norm, var_f, norm: obs.norm });

        if converged_at.is_none() && steps.len() >= 2 * w {
            let n = steps.len();
            let recent = mean(&steps[n - w..].iter().map(|s| s.fidelity).collect::<Vec<_>>());
            let before = mean(&steps[n - 2 * w..n - w].iter().map(|s| s.fidelity).collect::<Vec<_>>());
            if (recent - before).abs() < cfg.tolerance {
                converged_at = Some(t);
                stop_at = (t + 1 + cfg.tail).min(cfg.max_steps);
            }
        }
        if t + 1 >= stop_at {
            break;
        }

        theta = match cfg.method {
            Method::Sgd => sgd_step(&theta, &grad.forces, cfg.learning_rate)?,
            Method::Sr => {
                let g = sampler.metric(ansatz, &theta)?;
                let u = sr_step(&theta, &grad.forces, &g, cfg.learning_rate, cfg.regularization)?;
                sr_fallbacks += u.fell_back as usize;
                u.theta
            }
        };
    }

    let tail_start = match converged_at {
        Some(c) => c + 1,
        None => steps.len().saturating_sub(cfg.tail.min(w).max(1)),
    };
    let tail_start = tail_start.min(steps.len() - 1);
    let tail = &steps[tail_start..];
    let tail_e: Vec<f64> = tail.iter().map(|s| s.energy).collect();
    let e = Summary::of(&tail_e);
    let var_e = if tail_e.len() > 1 {
        tail_e.iter().map(|x| (x - e.mean).powi(2)).sum::<f64>() / (tail_e.len() - 1) as f64
    } else {
        0.0
    };
    let fidelity = mean(&tail.iter().map(|s| s.fidelity).collect::<Vec<_>>());
    let n_sgd = first_crossing(&steps, 0.9 * fidelity, cfg.crossing_window);
    Ok(RestartRecord {
        restart: r,
        seed,
        var_f_init: steps[0].var_f,
        var_f_tail: mean(&tail.iter().map(|s| s.var_f).collect::<Vec<_>>()),
        converged_at,
        fidelity,
        energy: e.mean,
        energy_sem: block_sem(&tail_e),
        var_e,
        n_sgd,
        sr_fallbacks,
        shots_spent: sampler.shots_spent,
        final_theta: theta,
        steps,
    })
}

/// First step at which the trailing mean of fidelity over `window` steps
/// reaches `level`.
pub fn first_crossing(steps: &[StepLog], level: f64, window: usize) -> Option<usize> {
    let mut sum = 0.0;
    for (i, s) in steps.iter().enumerate() {
        sum += s.fidelity;
        if i >= window {
            sum -= steps[i - window].fidelity;
        }
        let n = (i + 1).min(window) as f64;
        if sum / n >= level {
            return Some(s.step);
        }
    }
    None
}

/// Standard error of the mean of a correlated series by blocking: the
/// largest estimate over block sizes 1, 2, 4, … with at least 8 blocks.
pub fn block_sem(xs: &[f64]) -> f64 {
    let mut series = xs.to_vec();
    let mut best: f64 = 0.0;
    while series.len() >= 8 {
        best = best.max(Summary::of(&series).sem);
        series = series.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    }
    if best == 0.0 && xs.len() > 1 {
        Summary::of(xs).sem
    } else {
        best
    }
}

/// Wall-clock seconds of `f`.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}
