//! Effective temperature, transition detection, infidelity and gap-scaling
//! fits, gradient-magnitude scans and overlap statistics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::Ansatz;
use crate::engine::StateVector;
use crate::shots::component_rng;
use crate::{par, Error, Result};

/// Fidelity above which the optimized state counts as departed from the
/// untrainable regime.
pub const DEPARTURE_FIDELITY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationRecord {
    pub var_f: f64,
    pub learning_rate: f64,
    pub shots: f64,
    pub parameter_count: usize,
    /// T = Var f · η / N_s.
    pub temperature: f64,
    /// ε = N_p T / 2.
    pub epsilon: f64,
}

pub fn effective_temperature(
    var_f: f64,
    learning_rate: f64,
    shots: f64,
    parameter_count: usize,
) -> Result<FluctuationRecord> {
    if !(var_f >= 0.0 && learning_rate > 0.0 && shots > 0.0) || !var_f.is_finite() {
        return Err(Error::InvalidInput("effective temperature needs var_f ≥ 0, η > 0, N_s > 0".into()));
    }
    let temperature = var_f * learning_rate / shots;
    Ok(FluctuationRecord {
        var_f,
        learning_rate,
        shots,
        parameter_count,
        temperature,
        epsilon: 0.5 * parameter_count as f64 * temperature,
    })
}

/// N_s² Var E.
pub fn effective_specific_heat(shots: f64, var_e: f64) -> f64 {
    shots * shots * var_e
}

/// One grid point of a sweep (N_s, ε or β on the x axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub fidelity: f64,
    pub var_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Grid value with the largest Var E.
    pub peak: f64,
    pub peak_index: usize,
    /// Smallest grid value with fidelity above [`DEPARTURE_FIDELITY`].
    pub departure: Option<f64>,
    pub departure_index: Option<usize>,
    /// Peak and departure differ by more than one grid step.
    pub discrepant: bool,
}

/// Locates the transition on a grid sorted by increasing x.
pub fn detect_transition(points: &[SweepPoint]) -> Result<Transition> {
    detect_transition_with(points, |p| p.var_e)
}

/// Same as [`detect_transition`] with a caller-chosen peak statistic
/// (e.g. β² Var E for thermal scans).
pub fn detect_transition_with(points: &[SweepPoint], stat: impl Fn(&SweepPoint) -> f64) -> Result<Transition> {
    if points.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 grid points, got {}", points.len())));
    }
    if points.windows(2).any(|w| !(w[1].x > w[0].x)) {
        return Err(Error::InvalidInput("grid must be strictly increasing".into()));
    }
    let values: Vec<f64> = points.iter().map(&stat).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite peak statistic".into()));
    }
    let peak_index = values.iter().enumerate().fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
    if peak_index == 0 || peak_index == points.len() - 1 {
        return Err(Error::TransitionNotBracketed(format!(
            "peak statistic is maximal at the grid edge (x = {})",
            points[peak_index].x
        )));
    }
    let departure_index = points.iter().position(|p| p.fidelity > DEPARTURE_FIDELITY);
    Ok(Transition {
        peak: points[peak_index].x,
        peak_index,
        departure: departure_index.map(|i| points[i].x),
        departure_index,
        discrepant: departure_index.is_none_or(|d| d.abs_diff(peak_index) > 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    pub r_squared: f64,
    pub rss: f64,
    pub points: usize,
}

fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let (n, p) = design.shape();
    let normal = design.transpose() * design;
    let inv = normal.clone().try_inverse().ok_or_else(|| Error::Fit("singular design matrix".into()))?;
    let cond_ok = normal.norm() * inv.norm() < 1e14;
    if !cond_ok {
        return Err(Error::Fit("singular design matrix".into()));
    }
    let beta = &inv * design.transpose() * y;
    let resid = y - design * &beta;
    let rss = resid.norm_squared();
    let s2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    Ok((beta, inv * s2, rss))
}

fn r_squared(y: &[f64], rss: f64) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
    if tss > 0.0 {
        1.0 - rss / tss
    } else {
        1.0
    }
}

/// Ordinary least squares y = slope·x + intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    if x.len() < 2 || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("linear fit needs at least 2 finite points".into()));
    }
    let design = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { x[i] } else { 1.0 });
    let (b, cov, rss) = least_squares(&design, &DVector::from_column_slice(y))?;
    Ok(LinearFit {
        slope: b[0],
        intercept: b[1],
        slope_err: cov[(0, 0)].sqrt(),
        intercept_err: cov[(1, 1)].sqrt(),
        r_squared: r_squared(y, rss),
        rss,
        points: x.len(),
    })
}

/// ℐ = A / x^α + I₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfidelityFit {
    pub a: f64,
    pub i0: f64,
    pub alpha: f64,
    /// Row-major covariance of (A, I₀, α); α entries are zero when fixed.
    pub covariance: [[f64; 3]; 3],
    pub rss: f64,
    pub r_squared: f64,
    pub points: usize,
    pub free_alpha: bool,
}

impl InfidelityFit {
    pub fn a_err(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn i0_err(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn alpha_err(&self) -> f64 {
        self.covariance[2][2].sqrt()
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.a * x.powf(-self.alpha) + self.i0
    }
}

fn fixed_alpha(x: &[f64], y: &[f64], alpha: f64) -> Result<(f64, f64, DMatrix<f64>, f64)> {
    let design = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { x[i].powf(-alpha) } else { 1.0 });
    let (b, cov, rss) = least_squares(&design, &DVector::from_column_slice(y))?;
    Ok((b[0], b[1], cov, rss))
}

/// Least squares for ℐ = A/x^α + I₀. With `free_alpha`, α is found by a
/// one-dimensional profile search over the analytic (A, I₀) sub-solve and
/// uncertainties come from the full Jacobian at the optimum.
pub fn fit_infidelity(x: &[f64], y: &[f64], free_alpha: bool) -> Result<InfidelityFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    let min = if free_alpha { 4 } else { 3 };
    if x.len() < min {
        return Err(Error::Fit(format!("need at least {min} points, got {}", x.len())));
    }
    if x.iter().any(|v| !(*v > 0.0 && v.is_finite())) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("abscissae must be positive and data finite".into()));
    }
    if !free_alpha {
        let (a, i0, cov, rss) = fixed_alpha(x, y, 1.0)?;
        let mut c = [[0.0; 3]; 3];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = cov[(i, j)];
            }
        }
        return Ok(InfidelityFit {
            a,
            i0,
            alpha: 1.0,
            covariance: c,
            rss,
            r_squared: r_squared(y, rss),
            points: x.len(),
            free_alpha,
        });
    }

    let profile = |alpha: f64| fixed_alpha(x, y, alpha).map(|r| r.3).unwrap_or(f64::INFINITY);
    // coarse grid then golden-section refinement
    let grid: Vec<f64> = (0..=160).map(|i| 0.05 * i as f64 - 2.0).filter(|a| a.abs() > 1e-9).collect();
    let best = grid.iter().copied().fold(1.0, |b, a| if profile(a) < profile(b) { a } else { b });
    let (mut lo, mut hi) = (best - 0.05, best + 0.05);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if profile(m1) < profile(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let (a, i0, _, rss) = fixed_alpha(x, y, alpha)?;
    let n = x.len();
    let jac = DMatrix::from_fn(n, 3, |i, j| {
        let p = x[i].powf(-alpha);
        match j {
            0 => p,
            1 => 1.0,
            _ => -a * x[i].ln() * p,
        }
    });
    let inv =
        (jac.transpose() * &jac).try_inverse().ok_or_else(|| Error::Fit("singular Jacobian at optimum".into()))?;
    let s2 = rss / (n - 3).max(1) as f64;
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = inv[(i, j)] * s2;
        }
    }
    Ok(InfidelityFit { a, i0, alpha, covariance: c, rss, r_squared: r_squared(y, rss), points: n, free_alpha })
}

/// y = A₀ x^α from a log-log regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub exponent_err: f64,
    /// Uncertainty of ln A₀.
    pub log_prefactor_err: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Fit("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let f = linear_fit(&lx, &ly)?;
    Ok(PowerLawFit {
        prefactor: f.intercept.exp(),
        exponent: f.slope,
        exponent_err: f.slope_err,
        log_prefactor_err: f.intercept_err,
        r_squared: f.r_squared,
        points: f.points,
    })
}

/// A = A₀ Δ^α across systems with distinct gaps.
pub fn fit_gap_scaling(gaps: &[f64], slopes: &[f64]) -> Result<PowerLawFit> {
    if gaps.len() != slopes.len() {
        return Err(Error::DimensionMismatch { expected: gaps.len(), actual: slopes.len() });
    }
    if gaps.len() < 3 {
        return Err(Error::Fit("gap scaling needs at least 3 systems".into()));
    }
    if gaps.iter().chain(slopes).any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("gaps and slopes must be positive".into()));
    }
    fit_power_law(gaps, slopes)
}

/// Exponential versus power-law description of a positive decay y(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayComparison {
    /// ln y = a + b x.
    pub exponential: LinearFit,
    /// ln y = a + b ln x.
    pub power_law: LinearFit,
    pub exponential_aic: f64,
    pub power_law_aic: f64,
}

impl DecayComparison {
    pub fn prefers_power_law(&self) -> bool {
        self.power_law_aic < self.exponential_aic
    }
}

fn aic(rss: f64, n: usize, params: usize) -> f64 {
    n as f64 * (rss.max(1e-300) / n as f64).ln() + 2.0 * params as f64
}

pub fn compare_decay(x: &[f64], y: &[f64]) -> Result<DecayComparison> {
    if x.len() < 3 {
        return Err(Error::Fit("decay comparison needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Fit("decay comparison needs positive data".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let exponential = linear_fit(x, &ly)?;
    let power_law = linear_fit(&lx, &ly)?;
    Ok(DecayComparison {
        exponential_aic: aic(exponential.rss, x.len(), 2),
        power_law_aic: aic(power_law.rss, x.len(), 2),
        exponential,
        power_law,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientScan {
    pub parameter_count: usize,
    pub qubits: usize,
    /// Mean of ‖∇E‖ / (j1 N_p N_q) over trials.
    pub mean: f64,
    pub sem: f64,
    pub trials: usize,
}

/// Gradient magnitude per parameter and qubit at random initial angles drawn
/// uniformly from `range`.
pub fn barren_scan(ansatz: &Ansatz, trials: usize, range: (f64, f64), seed: u64) -> Result<GradientScan> {
    if trials < 2 {
        return Err(Error::InvalidInput("barren scan needs at least 2 trials".into()));
    }
    if !(range.0 <= range.1) {
        return Err(Error::InvalidInput("angle range must be ordered".into()));
    }
    let np = ansatz.parameter_count();
    let nq = ansatz.circuit().qubits();
    let j1 = ansatz.hamiltonian().j1().abs();
    let norms: Vec<Result<f64>> = par::map_jobs(trials, |t| {
        let mut rng = component_rng(seed, t as u64, 0);
        let theta: Vec<f64> =
            (0..np).map(|_| if range.1 > range.0 { rng.random_range(range.0..range.1) } else { range.0 }).collect();
        let g = ansatz.exact_gradient(&theta)?;
        Ok(g.forces.iter().map(|f| f * f).sum::<f64>().sqrt() / (j1 * np as f64 * nq as f64))
    });
    let norms = norms.into_iter().collect::<Result<Vec<_>>>()?;
    let s = crate::optimize::Summary::of(&norms);
    Ok(GradientScan { parameter_count: np, qubits: nq, mean: s.mean, sem: s.sem, trials })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    /// O_k averaged over the supplied states.
    pub overlaps: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub histogram: Histogram,
    /// Fewer eigenstates were available than requested.
    pub short: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if values.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo, lo + 1.0)
        };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }
}

/// Overlaps O_k = |⟨φ_k|ψ⟩|² of normalized states against the first
/// `requested` eigenstates.
pub fn overlap_histogram(
    states: &[StateVector],
    eigenstates: &[StateVector],
    requested: usize,
    bins: usize,
) -> Result<OverlapStats> {
    if states.is_empty() {
        return Err(Error::InvalidInput("no states to analyse".into()));
    }
    let k = requested.min(eigenstates.len());
    if k == 0 {
        return Err(Error::InvalidInput("no eigenstates".into()));
    }
    let mut overlaps = vec![0.0; k];
    for psi in states {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::Numerical("zero state".into()));
        }
        for (o, phi) in overlaps.iter_mut().zip(eigenstates) {
            *o += phi.inner(psi)?.norm_sqr() / (n * n) / states.len() as f64;
        }
    }
    let mean = overlaps.iter().sum::<f64>() / k as f64;
    let std_dev =
        if k > 1 { (overlaps.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt() } else { 0.0 };
    Ok(OverlapStats { histogram: Histogram::new(&overlaps, bins), overlaps, mean, std_dev, short: k < requested })
}

/// N_tot = N_SGD × N_s^c.
pub fn total_cost(n_sgd: f64, critical_shots: f64) -> f64 {
    n_sgd * critical_shots
}
