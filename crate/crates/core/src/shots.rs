//! Finite-shot estimators. Every matrix element ⟨ψ|U|φ⟩ of a unitary U that
//! enters the gradient, energy, norm or metric is replaced by the outcome
//! average of a Hadamard test with `shots` repetitions.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, Estimator, GradientEstimate, MetricTensor, LOW_NORM};
use crate::engine::{swap_inner, StateVector};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    Exact,
    /// Exact force plus Gaussian noise of variance Var f_k / N_s.
    GaussianSurrogate,
    /// Binomial outcomes of every Hadamard test.
    HadamardBernoulli,
}

impl std::fmt::Display for ShotMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShotMode::Exact => "exact",
            ShotMode::GaussianSurrogate => "gaussian_surrogate",
            ShotMode::HadamardBernoulli => "hadamard_bernoulli",
        })
    }
}

impl std::str::FromStr for ShotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ShotMode::Exact),
            "gaussian_surrogate" => Ok(ShotMode::GaussianSurrogate),
            "hadamard_bernoulli" => Ok(ShotMode::HadamardBernoulli),
            other => Err(Error::InvalidInput(format!("unknown shot mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    /// Shots per matrix element (per gradient component, Hamiltonian term
    /// and group element).
    pub shots: u64,
    pub mode: ShotMode,
    pub seed: u64,
    /// Sample the metric tensor too; otherwise SR uses the exact metric.
    pub sample_metric: bool,
}

impl ShotConfig {
    pub fn exact() -> Self {
        ShotConfig { shots: 0, mode: ShotMode::Exact, seed: 0, sample_metric: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != ShotMode::Exact && self.shots == 0 {
            return Err(Error::InvalidInput("sampled modes need at least one shot".into()));
        }
        Ok(())
    }
}

/// Estimate of a real matrix element `x` ∈ [−1, 1] from `shots` Hadamard
/// tests: m ~ Binomial(N_s, (1 + x)/2), returns 2m/N_s − 1.
pub fn estimate_matrix_element<R: rand::Rng + ?Sized>(x: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + 1e-6 {
        return Err(Error::Numerical(format!("matrix element {x} of a unitary exceeds 1 in magnitude")));
    }
    if shots == 0 {
        return Err(Error::InvalidInput("zero shots".into()));
    }
    let p = (0.5 * (1.0 + x)).clamp(0.0, 1.0);
    let m = Binomial::new(shots, p).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
    Ok(2.0 * m as f64 / shots as f64 - 1.0)
}

/// Single-shot variance of the Hadamard-test outcome for element `x`.
pub fn single_shot_variance(x: f64) -> f64 {
    (1.0 - x * x).max(0.0)
}

/// Exact values of every sampled matrix element at one parameter point.
/// H' = Σ_b (J_b/2) P_b is used in place of H; the constant offset cancels in
/// the forces.
#[derive(Debug, Clone)]
pub struct ElementTable {
    /// ⟨ψ|P_b ĝ|∂_kψ⟩ indexed [k][g * n_terms + b].
    pub y: Vec<Vec<Complex64>>,
    /// ⟨ψ|ĝ|∂_kψ⟩ indexed [k][g].
    pub z: Vec<Vec<Complex64>>,
    /// ⟨ψ|P_b ĝ|ψ⟩ indexed [g * n_terms + b].
    pub w: Vec<Complex64>,
    /// ⟨ψ|ĝ|ψ⟩ indexed [g].
    pub v: Vec<Complex64>,
    pub derivatives: Vec<StateVector>,
    pub psi: StateVector,
}

impl ElementTable {
    pub fn compute(ansatz: &Ansatz, theta: &[f64]) -> Result<Self> {
        let psi = ansatz.prepare(theta)?;
        let derivatives = ansatz.derivative_states(theta)?;
        let p = ansatz.projector();
        let terms = ansatz.hamiltonian().terms();
        let order = p.order();
        let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = par::map_jobs(derivatives.len(), |k| {
            let mut y = Vec::with_capacity(order * terms.len());
            let mut z = Vec::with_capacity(order);
            for g in 0..order {
                let u = if g == 0 { derivatives[k].clone() } else { p.apply_element(g, &derivatives[k]) };
                z.push(crate::engine::inner_unchecked(psi.amplitudes(), u.amplitudes()));
                y.extend(terms.iter().map(|&((i, j), _)| swap_inner(&psi, &u, i, j)));
            }
            (y, z)
        });
        let (y, z) = rows.into_iter().unzip();
        let mut w = Vec::with_capacity(order * terms.len());
        let mut v = Vec::with_capacity(order);
        for g in 0..order {
            let u = if g == 0 { psi.clone() } else { p.apply_element(g, &psi) };
            v.push(psi.inner(&u)?);
            w.extend(terms.iter().map(|&((i, j), _)| swap_inner(&psi, &u, i, j)));
        }
        Ok(ElementTable { y, z, w, v, derivatives, psi })
    }
}

/// One real quantity assembled from sampled elements: value and single-shot
/// variance (sum of coefficient² · (1 − x²)).
#[derive(Debug, Clone, Copy, Default)]
struct Aggregate {
    value: f64,
    variance: f64,
}

/// Draws (or copies, when `sampler` is `None`) the real or imaginary part of
/// an element with a coefficient.
struct Accumulator<'a> {
    shots: u64,
    rng: Option<&'a mut ChaCha8Rng>,
    drawn: u64,
}

impl Accumulator<'_> {
    fn add(&mut self, agg: &mut Aggregate, coef: f64, x: f64) -> Result<()> {
        if coef == 0.0 {
            return Ok(());
        }
        let est = match self.rng.as_deref_mut() {
            Some(rng) => {
                self.drawn += self.shots;
                estimate_matrix_element(x, self.shots, rng)?
            }
            None => x,
        };
        agg.value += coef * est;
        agg.variance += coef * coef * single_shot_variance(x);
        Ok(())
    }

    /// Adds Re(χ · z) · scale.
    fn add_re(&mut self, agg: &mut Aggregate, chi: Complex64, z: Complex64, scale: f64) -> Result<()> {
        self.add(agg, chi.re * scale, z.re)?;
        if chi.im.abs() > 1e-14 {
            self.add(agg, -chi.im * scale, z.im)?;
        }
        Ok(())
    }

    /// Adds Im(χ · z) · scale.
    fn add_im(&mut self, agg: &mut Aggregate, chi: Complex64, z: Complex64, scale: f64) -> Result<()> {
        self.add(agg, chi.re * scale, z.im)?;
        if chi.im.abs() > 1e-14 {
            self.add(agg, chi.im * scale, z.re)?;
        }
        Ok(())
    }
}

/// Independent stream per (seed, step, component).
pub fn component_rng(seed: u64, step: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(step)));
    rng.set_stream(component);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Assembled {
    forces: Vec<f64>,
    variance: Vec<f64>,
    connection: Vec<Complex64>,
    energy_prime: f64,
    norm: f64,
    shots_used: u64,
}

/// Combines (sampled or exact) elements exactly as in the exact formulas.
fn assemble(ansatz: &Ansatz, t: &ElementTable, sampling: Option<(u64, u64, u64)>) -> Result<Assembled> {
    let p = ansatz.projector();
    let chars = p.group().characters();
    let order = p.order() as f64;
    let terms = ansatz.hamiltonian().terms();
    let np = t.y.len();
    let trivial = p.is_trivial();
    let (shots, seed, step) = sampling.unwrap_or((0, 0, 0));

    // Shared energy and norm aggregates.
    let mut shared_rng = sampling.map(|_| component_rng(seed, step, np as u64));
    let mut acc = Accumulator { shots, rng: shared_rng.as_mut(), drawn: 0 };
    let mut e = Aggregate::default();
    let mut n = Aggregate { value: 1.0 / order, variance: 0.0 };
    if !trivial {
        for (g, chi) in chars.iter().enumerate() {
            for (b, &(_, jb)) in terms.iter().enumerate() {
                acc.add_re(&mut e, *chi, t.w[g * terms.len() + b], 0.5 * jb / order)?;
            }
            if g > 0 {
                acc.add_re(&mut n, *chi, t.v[g], 1.0 / order)?;
            }
        }
    } else {
        // Only multiplies a vanishing connection term; kept exact.
        e.value = terms.iter().zip(&t.w).map(|(&(_, jb), w)| 0.5 * jb * w.re).sum();
    }
    let mut shots_used = acc.drawn;

    let rows: Vec<Result<(Aggregate, Aggregate, u64)>> = par::map_jobs(np, |k| {
        let mut rng = sampling.map(|_| component_rng(seed, step, k as u64));
        let mut acc = Accumulator { shots, rng: rng.as_mut(), drawn: 0 };
        let mut a = Aggregate::default();
        let mut b = Aggregate::default();
        for (g, chi) in chars.iter().enumerate() {
            for (bi, &(_, jb)) in terms.iter().enumerate() {
                acc.add_re(&mut a, *chi, t.y[k][g * terms.len() + bi], 0.5 * jb / order)?;
            }
            // Re⟨ψ|∂_kψ⟩ vanishes identically.
            if g > 0 {
                acc.add_re(&mut b, *chi, t.z[k][g], 1.0 / order)?;
            }
        }
        Ok((a, b, acc.drawn))
    });

    let mut forces = Vec::with_capacity(np);
    let mut variance = Vec::with_capacity(np);
    let mut connection = Vec::with_capacity(np);
    let nv = n.value;
    if !(nv.is_finite() && nv > 0.0) {
        return Err(Error::ProjectorAnnihilated { norm: nv });
    }
    for row in rows {
        let (a, b, drawn) = row?;
        shots_used += drawn;
        let f = 2.0 * a.value / nv - 2.0 * b.value * e.value / (nv * nv);
        let da = 2.0 / nv;
        let db = -2.0 * e.value / (nv * nv);
        let de = -2.0 * b.value / (nv * nv);
        let dn = -2.0 * a.value / (nv * nv) + 4.0 * b.value * e.value / (nv * nv * nv);
        let var = da * da * a.variance + db * db * b.variance + de * de * e.variance + dn * dn * n.variance;
        forces.push(f);
        variance.push(var);
        // Only Re A_k enters the forces; the imaginary part is not measured here.
        connection.push(Complex64::new(b.value / nv, 0.0));
    }
    Ok(Assembled { forces, variance, connection, energy_prime: e.value / nv, norm: nv, shots_used })
}

/// Per-component single-shot variance Var f_k at θ (delta method).
pub fn force_variance(ansatz: &Ansatz, theta: &[f64]) -> Result<Vec<f64>> {
    let table = ElementTable::compute(ansatz, theta)?;
    Ok(assemble(ansatz, &table, None)?.variance)
}

/// Stateful sampler: advances its step counter on every estimate so that
/// streams never repeat within a run.
#[derive(Debug, Clone)]
pub struct ShotSampler {
    cfg: ShotConfig,
    step: u64,
    surrogate_variance: Option<Vec<f64>>,
    /// Total shots spent so far.
    pub shots_spent: u64,
    /// Number of estimates that needed a re-draw because the sampled norm was
    /// below the floor.
    pub redraws: u64,
}

impl ShotSampler {
    pub fn new(cfg: ShotConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ShotSampler { cfg, step: 0, surrogate_variance: None, shots_spent: 0, redraws: 0 })
    }

    pub fn config(&self) -> &ShotConfig {
        &self.cfg
    }

    /// Variance used by the Gaussian surrogate, once fixed.
    pub fn surrogate_variance(&self) -> Option<&[f64]> {
        self.surrogate_variance.as_deref()
    }

    /// Forces at θ under the configured mode.
    pub fn gradient(&mut self, ansatz: &Ansatz, theta: &[f64]) -> Result<GradientEstimate> {
        let step = self.step;
        self.step += 1;
        match self.cfg.mode {
            ShotMode::Exact => ansatz.exact_gradient(theta),
            ShotMode::GaussianSurrogate => {
                let mut g = ansatz.exact_gradient(theta)?;
                if self.surrogate_variance.is_none() {
                    self.surrogate_variance = Some(force_variance(ansatz, theta)?);
                }
                let var = self.surrogate_variance.as_ref().expect("set above");
                for (k, (f, v)) in g.forces.iter_mut().zip(var).enumerate() {
                    let sd = (v / self.cfg.shots as f64).sqrt();
                    if sd > 0.0 {
                        let mut rng = component_rng(self.cfg.seed, step, k as u64);
                        *f += Normal::new(0.0, sd).map_err(|e| Error::Numerical(e.to_string()))?.sample(&mut rng);
                    }
                }
                g.variance = var.clone();
                g.estimator = Estimator::Sampled { shots: self.cfg.shots };
                Ok(g)
            }
            ShotMode::HadamardBernoulli => {
                let table = ElementTable::compute(ansatz, theta)?;
                let mut result = None;
                for attempt in 0..2u64 {
                    let sub = step.wrapping_mul(2).wrapping_add(attempt);
                    let a = assemble(ansatz, &table, Some((self.cfg.shots, self.cfg.seed, sub)));
                    match a {
                        Ok(a) if a.norm >= LOW_NORM => {
                            result = Some(a);
                            break;
                        }
                        Ok(a) => {
                            self.shots_spent += a.shots_used;
                            self.redraws += 1;
                        }
                        Err(Error::ProjectorAnnihilated { .. }) => self.redraws += 1,
                        Err(e) => return Err(e),
                    }
                }
                let Some(a) = result else {
                    return Err(Error::UnreliableNormalization { norm: assemble(ansatz, &table, None)?.norm });
                };
                self.shots_spent += a.shots_used;
                let exact = assemble(ansatz, &table, None)?;
                Ok(GradientEstimate {
                    energy: a.energy_prime - ansatz.hamiltonian().swap_offset(),
                    norm: a.norm,
                    forces: a.forces,
                    connection: a.connection,
                    variance: exact.variance,
                    estimator: Estimator::Sampled { shots: self.cfg.shots },
                    low_norm: false,
                })
            }
        }
    }

    /// Metric tensor: exact unless the configuration asks for sampling.
    pub fn metric(&mut self, ansatz: &Ansatz, theta: &[f64]) -> Result<MetricTensor> {
        if self.cfg.mode != ShotMode::HadamardBernoulli || !self.cfg.sample_metric {
            return Ok(ansatz.metric(theta)?.0);
        }
        let step = self.step;
        self.step += 1;
        let (m, used) = sampled_metric(ansatz, theta, self.cfg.shots, self.cfg.seed, step)?;
        self.shots_spent += used;
        Ok(m)
    }
}

/// Re G from sampled ⟨∂_i|ĝ|∂_j⟩, ⟨ψ|ĝ|∂_k⟩ (both parts) and ⟨ψ|ĝ|ψ⟩.
fn sampled_metric(ansatz: &Ansatz, theta: &[f64], shots: u64, seed: u64, step: u64) -> Result<(MetricTensor, u64)> {
    let t = ElementTable::compute(ansatz, theta)?;
    let p = ansatz.projector();
    let chars = p.group().characters().to_vec();
    let order = p.order() as f64;
    let np = t.derivatives.len();
    let mut used = 0;

    let mut rng = component_rng(seed, step, (2 * np) as u64);
    let mut acc = Accumulator { shots, rng: Some(&mut rng), drawn: 0 };
    let mut n = Aggregate { value: 1.0 / order, variance: 0.0 };
    for (chi, v) in chars.iter().zip(&t.v).skip(1) {
        acc.add_re(&mut n, *chi, *v, 1.0 / order)?;
    }
    let mut conn = Vec::with_capacity(np);
    for k in 0..np {
        let mut re = Aggregate::default();
        let mut im = Aggregate::default();
        for (g, chi) in chars.iter().enumerate() {
            if g > 0 {
                acc.add_re(&mut re, *chi, t.z[k][g], 1.0 / order)?;
            }
            acc.add_im(&mut im, *chi, t.z[k][g], 1.0 / order)?;
        }
        conn.push(Complex64::new(re.value, im.value) / n.value);
    }
    used += acc.drawn;
    if !(n.value >= LOW_NORM) {
        return Err(Error::UnreliableNormalization { norm: n.value });
    }

    let rows: Vec<Result<(Vec<f64>, u64)>> = par::map_jobs(np, |i| {
        let mut rng = component_rng(seed, step, (np + i) as u64);
        let mut acc = Accumulator { shots, rng: Some(&mut rng), drawn: 0 };
        let mut row = vec![0.0; np];
        for (j, slot) in row.iter_mut().enumerate().skip(i) {
            let mut agg = Aggregate::default();
            for (g, chi) in chars.iter().enumerate() {
                if g == 0 && i == j {
                    agg.value += 1.0 / order;
                    continue;
                }
                let u = if g == 0 { t.derivatives[j].clone() } else { p.apply_element(g, &t.derivatives[j]) };
                let x = t.derivatives[i].inner(&u)?;
                acc.add_re(&mut agg, *chi, x, 1.0 / order)?;
            }
            *slot = agg.value;
        }
        Ok((row, acc.drawn))
    });
    let mut entries = vec![Complex64::new(0.0, 0.0); np * np];
    for (i, row) in rows.into_iter().enumerate() {
        let (row, drawn) = row?;
        used += drawn;
        for j in i..np {
            let g = row[j] / n.value - (conn[i].conj() * conn[j]).re;
            entries[i * np + j] = Complex64::new(g, 0.0);
            entries[j * np + i] = Complex64::new(g, 0.0);
        }
    }
    Ok((MetricTensor { size: np, entries }, used))
}
