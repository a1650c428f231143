//! Run configuration: TOML sections with per-scenario defaults, strict key
//! checking and range validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};
use vqephase::experiments::SystemConfig;
use vqephase::lattice::{Boundary, DimerAlignment, Geometry, SymmetrySelection};
use vqephase::optimize::{Method, OptimizerConfig};
use vqephase::shots::{ShotConfig, ShotMode};
use vqephase::thermal::ThermalConfig;

use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("unknown key `{key}`{}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default(),
        suggestion.as_ref().map(|s| format!("; did you mean `{s}`?")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize>, suggestion: Option<String> },
    #[error("`{key}`: {message}")]
    Range { key: String, message: String },
    #[error("override `{0}`: {1}")]
    Override(String, String),
    #[error("unknown scenario `{0}`; known: {1}")]
    UnknownScenario(String, String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: String,
    pub seed: u64,
    /// Permit clusters above 16 qubits.
    pub allow_large: bool,
    pub system: SystemSection,
    pub optimizer: OptimizerSection,
    pub shots: ShotsSection,
    pub sweep: SweepSection,
    pub thermal: ThermalSection,
    pub barren: BarrenSection,
    pub overlaps: OverlapSection,
    pub spectrum: SpectrumSection,
    pub gap: GapSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub geometry: Geometry,
    pub extents: [usize; 2],
    pub boundary: [Boundary; 2],
    pub j2: f64,
    pub depth: usize,
    pub symmetry: SymmetrySelection,
    pub dimers: DimerAlignment,
    pub target_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub method: Method,
    pub learning_rate: f64,
    pub max_steps: usize,
    pub restarts: usize,
    pub window: usize,
    pub tolerance: f64,
    pub tail: usize,
    pub crossing_window: usize,
    pub regularization: f64,
    pub init_range: [f64; 2],
    pub projected_fidelity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotsSection {
    pub mode: ShotMode,
    pub sample_metric: bool,
}

/// Sweep axes. Each scenario reads the axes it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub shots: Vec<u64>,
    pub j2: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub depths: Vec<usize>,
    /// L values of L × extents[1] clusters.
    pub lengths: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalSection {
    pub chains: usize,
    pub chain_length: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub step_scale: f64,
    pub tune: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrenSection {
    pub trials: usize,
    pub init_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapSection {
    pub levels: usize,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSection {
    /// Explicit (system, sector) cases. When empty, cases are generated from
    /// `sweep.j2` × `selections` on the `[system]` cluster.
    pub cases: Vec<GapCase>,
    pub selections: Vec<SymmetrySelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapCase {
    pub label: String,
    pub geometry: Geometry,
    pub extents: [usize; 2],
    pub boundary: [Boundary; 2],
    pub j2: f64,
    pub symmetry: SymmetrySelection,
    pub dimers: DimerAlignment,
    pub target_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Write every n-th optimizer step to the JSON-lines log; 0 disables it.
    pub log_stride: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            scenario: String::new(),
            seed: 1,
            allow_large: false,
            system: SystemSection::default(),
            optimizer: OptimizerSection::default(),
            shots: ShotsSection::default(),
            sweep: SweepSection::default(),
            thermal: ThermalSection::default(),
            barren: BarrenSection::default(),
            overlaps: OverlapSection::default(),
            spectrum: SpectrumSection::default(),
            gap: GapSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            geometry: Geometry::Square,
            extents: [2, 4],
            boundary: [Boundary::Periodic, Boundary::Periodic],
            j2: 0.0,
            depth: 5,
            symmetry: SymmetrySelection::Identity,
            dimers: DimerAlignment::J1,
            target_level: 0,
        }
    }
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        OptimizerSection {
            method: d.method,
            learning_rate: d.learning_rate,
            max_steps: d.max_steps,
            restarts: d.restarts,
            window: d.window,
            tolerance: d.tolerance,
            tail: d.tail,
            crossing_window: d.crossing_window,
            regularization: d.regularization,
            init_range: [d.init_range.0, d.init_range.1],
            projected_fidelity: d.projected_fidelity,
        }
    }
}

impl Default for ShotsSection {
    fn default() -> Self {
        ShotsSection { mode: ShotMode::HadamardBernoulli, sample_metric: false }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            shots: vec![1, 2, 4, 8, 16, 32, 64],
            j2: vec![],
            learning_rates: vec![],
            depths: vec![],
            lengths: vec![],
            epsilon: vec![],
            betas: vec![],
        }
    }
}

impl Default for ThermalSection {
    fn default() -> Self {
        let d = ThermalConfig::default();
        ThermalSection {
            chains: 4,
            chain_length: d.chain_length,
            burn_in: d.burn_in,
            thinning: d.thinning,
            step_scale: d.step_scale,
            tune: d.tune,
        }
    }
}

impl Default for BarrenSection {
    fn default() -> Self {
        BarrenSection { trials: 100, init_range: [0.0, 0.1] }
    }
}

impl Default for OverlapSection {
    fn default() -> Self {
        OverlapSection { levels: 14, bins: 20 }
    }
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { levels: 8 }
    }
}

impl Default for GapSection {
    fn default() -> Self {
        GapSection { cases: vec![], selections: vec![SymmetrySelection::Identity] }
    }
}

impl Default for GapCase {
    fn default() -> Self {
        let s = SystemSection::default();
        GapCase {
            label: String::new(),
            geometry: s.geometry,
            extents: s.extents,
            boundary: s.boundary,
            j2: s.j2,
            symmetry: s.symmetry,
            dimers: s.dimers,
            target_level: 0,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { log_stride: 10 }
    }
}

impl Config {
    pub fn system_config(&self) -> SystemConfig {
        let s = &self.system;
        SystemConfig {
            geometry: s.geometry,
            extents: s.extents,
            boundary: s.boundary,
            j2: s.j2,
            depth: s.depth,
            symmetry: s.symmetry,
            dimers: s.dimers,
            target_level: s.target_level,
        }
    }

    /// Optimizer settings at one sweep point. The shot-stream seed is
    /// derived inside the optimizer from `seed`.
    pub fn optimizer_config(&self, shots: u64) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            method: o.method,
            learning_rate: o.learning_rate,
            max_steps: o.max_steps,
            shots: ShotConfig {
                shots,
                mode: self.shots.mode,
                seed: self.seed,
                sample_metric: self.shots.sample_metric,
            },
            regularization: o.regularization,
            init_range: (o.init_range[0], o.init_range[1]),
            restarts: o.restarts,
            window: o.window,
            tolerance: o.tolerance,
            tail: o.tail,
            crossing_window: o.crossing_window,
            projected_fidelity: o.projected_fidelity,
            seed: self.seed,
        }
    }

    pub fn thermal_config(&self) -> ThermalConfig {
        let t = &self.thermal;
        ThermalConfig {
            beta: 1.0,
            step_scale: t.step_scale,
            chain_length: t.chain_length,
            burn_in: t.burn_in,
            thinning: t.thinning,
            tune: t.tune,
            projected_fidelity: self.optimizer.projected_fidelity,
            seed: self.seed,
        }
    }

    /// Canonical TOML form with every key present.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the normalized form, hex encoded (first 16 characters).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.normalized().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn validate(&self) -> Result<()> {
        let range = |key: &str, message: String| Err(ConfigError::Range { key: key.into(), message });
        if self.seed > i64::MAX as u64 {
            return range("seed", format!("must be at most {}", i64::MAX));
        }
        let s = &self.system;
        if s.extents.contains(&0) {
            return range("system.extents", format!("extents must be positive, got {:?}", s.extents));
        }
        if !s.j2.is_finite() {
            return range("system.j2", "must be finite".into());
        }
        if s.depth == 0 {
            return range("system.depth", "must be at least 1".into());
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0) || !o.learning_rate.is_finite() {
            return range("optimizer.learning_rate", format!("must be positive, got {}", o.learning_rate));
        }
        for (key, v) in [
            ("optimizer.max_steps", o.max_steps),
            ("optimizer.restarts", o.restarts),
            ("optimizer.window", o.window),
            ("optimizer.tail", o.tail),
            ("optimizer.crossing_window", o.crossing_window),
        ] {
            if v == 0 {
                return range(key, "must be at least 1".into());
            }
        }
        if !(o.tolerance > 0.0) {
            return range("optimizer.tolerance", format!("must be positive, got {}", o.tolerance));
        }
        if !(o.regularization >= 0.0) {
            return range("optimizer.regularization", format!("must be non-negative, got {}", o.regularization));
        }
        if !(o.init_range[0] <= o.init_range[1]) {
            return range("optimizer.init_range", format!("must be ordered, got {:?}", o.init_range));
        }
        let w = &self.sweep;
        if w.shots.contains(&0) {
            return range("sweep.shots", "shot counts must be positive".into());
        }
        if w.learning_rates.iter().any(|x| !(*x > 0.0)) {
            return range("sweep.learning_rates", "learning rates must be positive".into());
        }
        if w.depths.contains(&0) {
            return range("sweep.depths", "depths must be at least 1".into());
        }
        if w.lengths.contains(&0) {
            return range("sweep.lengths", "lengths must be at least 1".into());
        }
        if w.epsilon.iter().any(|x| !(*x > 0.0)) {
            return range("sweep.epsilon", "epsilon values must be positive".into());
        }
        if w.betas.iter().any(|x| !(*x > 0.0)) {
            return range("sweep.betas", "inverse temperatures must be positive".into());
        }
        if w.j2.iter().any(|x| !x.is_finite()) {
            return range("sweep.j2", "values must be finite".into());
        }
        let t = &self.thermal;
        if t.chains == 0 {
            return range("thermal.chains", "must be at least 1".into());
        }
        if t.burn_in >= t.chain_length {
            return range("thermal.burn_in", format!("must be below chain_length ({})", t.chain_length));
        }
        if t.thinning == 0 {
            return range("thermal.thinning", "must be at least 1".into());
        }
        if !(t.step_scale > 0.0) {
            return range("thermal.step_scale", format!("must be positive, got {}", t.step_scale));
        }
        if self.barren.trials < 2 {
            return range("barren.trials", "must be at least 2".into());
        }
        if !(self.barren.init_range[0] <= self.barren.init_range[1]) {
            return range("barren.init_range", "must be ordered".into());
        }
        if self.overlaps.levels == 0 {
            return range("overlaps.levels", "must be at least 1".into());
        }
        if self.overlaps.bins == 0 {
            return range("overlaps.bins", "must be at least 1".into());
        }
        if self.spectrum.levels == 0 {
            return range("spectrum.levels", "must be at least 1".into());
        }
        for (i, c) in self.gap.cases.iter().enumerate() {
            if c.extents.contains(&0) {
                return range(&format!("gap.cases[{i}].extents"), "extents must be positive".into());
            }
        }
        Ok(())
    }
}

/// Command-line overrides, applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub allow_large: bool,
    /// `LxM`.
    pub lattice: Option<String>,
    /// `a:b` (doubling) or a comma-separated list.
    pub ns: Option<String>,
    /// A single value or a comma-separated list.
    pub j2: Option<String>,
    /// `section.key=value` with a TOML value.
    pub set: Vec<String>,
}

/// Resolves scenario defaults, the optional config file and overrides.
pub fn resolve(scenario: Option<&str>, file: Option<(&str, &str)>, ov: &Overrides) -> Result<Config> {
    let file_table = match file {
        Some((name, text)) => Some(parse_file(name, text)?),
        None => None,
    };
    let name = scenario
        .map(str::to_string)
        .or_else(|| file_table.as_ref().and_then(|t| t.get("scenario")).and_then(|v| v.as_str()).map(str::to_string))
        .ok_or_else(|| ConfigError::Parse("no scenario given (use --scenario or a `scenario` key)".into()))?;
    let scen = Scenario::parse(&name)?;
    let mut merged = to_table(&scen.defaults());
    if let Some(t) = file_table {
        merge(&mut merged, t);
    }
    merged.insert("scenario".into(), Value::String(scen.name().into()));
    apply_overrides(&mut merged, ov)?;
    let cfg: Config = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(format!("invalid value: {}", e.message())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a config file: syntax, unknown keys (with suggestions), types.
pub fn parse_file(name: &str, text: &str) -> Result<Table> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(format!("{name}: {e}")))?;
    check_keys(&table, &schema(), "", text)?;
    // typed pass for line-referenced type errors
    toml::from_str::<Config>(text).map_err(|e| ConfigError::Parse(format!("{name}: {e}")))?;
    Ok(table)
}

/// Full key tree: the default config with one gap case so that the case
/// table keys are known.
fn schema() -> Table {
    let mut c = Config::default();
    c.gap.cases.push(GapCase::default());
    to_table(&c)
}

fn to_table(c: &Config) -> Table {
    match Value::try_from(c).expect("config serializes") {
        Value::Table(t) => t,
        _ => unreachable!(),
    }
}

fn check_keys(table: &Table, schema: &Table, prefix: &str, text: &str) -> Result<()> {
    for (key, value) in table {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        let Some(expected) = schema.get(key) else {
            let suggestion = schema
                .keys()
                .map(|k| (strsim::jaro_winkler(k, key), k))
                .filter(|(score, _)| *score > 0.8)
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, k)| if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") });
            return Err(ConfigError::UnknownKey { line: key_line(text, prefix, key), key: path, suggestion });
        };
        match (value, expected) {
            (Value::Table(t), Value::Table(s)) => check_keys(t, s, &path, text)?,
            (Value::Array(items), Value::Array(s)) => {
                if let Some(Value::Table(s)) = s.first() {
                    for item in items {
                        if let Value::Table(t) = item {
                            check_keys(t, s, &path, text)?;
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// 1-based line of `key` inside the `[section]` (or `[[section]]`) header.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = l.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn apply_overrides(t: &mut Table, ov: &Overrides) -> Result<()> {
    if let Some(seed) = ov.seed {
        t.insert("seed".into(), Value::Integer(seed as i64));
    }
    if ov.allow_large {
        t.insert("allow_large".into(), Value::Boolean(true));
    }
    if let Some(lat) = &ov.lattice {
        let (a, b) = lat
            .split_once(['x', 'X'])
            .and_then(|(a, b)| Some((a.trim().parse::<i64>().ok()?, b.trim().parse::<i64>().ok()?)))
            .ok_or_else(|| ConfigError::Override("--lattice".into(), format!("expected LxM, got `{lat}`")))?;
        set_path(t, "system.extents", Value::Array(vec![Value::Integer(a), Value::Integer(b)]))?;
    }
    if let Some(ns) = &ov.ns {
        let grid = parse_shots(ns).map_err(|m| ConfigError::Override("--ns".into(), m))?;
        set_path(t, "sweep.shots", Value::Array(grid.into_iter().map(|x| Value::Integer(x as i64)).collect()))?;
    }
    if let Some(j2) = &ov.j2 {
        let vals: Vec<f64> = j2
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| ConfigError::Override("--j2".into(), e.to_string()))?;
        set_path(t, "system.j2", Value::Float(vals[0]))?;
        set_path(t, "sweep.j2", Value::Array(vals.into_iter().map(Value::Float).collect()))?;
    }
    for s in &ov.set {
        let (path, raw) =
            s.split_once('=').ok_or_else(|| ConfigError::Override(s.clone(), "expected key=value".into()))?;
        let value: Value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.trim().to_string()));
        set_path(t, path.trim(), value)?;
    }
    let schema = schema();
    check_keys(t, &schema, "", "")
}

fn set_path(t: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last =
        parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| ConfigError::Override(path.into(), "empty key".into()))?;
    let mut cur = t;
    for p in parts {
        cur = match cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(t) => t,
            _ => return Err(ConfigError::Override(path.into(), format!("`{p}` is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// `a:b` is the doubling grid a, 2a, … ≤ b; otherwise a comma-separated list.
pub fn parse_shots(s: &str) -> std::result::Result<Vec<u64>, String> {
    let grid: Vec<u64> = if let Some((a, b)) = s.split_once(':') {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad start in `{s}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad end in `{s}`"))?;
        if a == 0 || b < a {
            return Err(format!("range `{s}` must satisfy 0 < start <= end"));
        }
        std::iter::successors(Some(a), |x| x.checked_mul(2)).take_while(|x| *x <= b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|_| format!("bad shot count `{x}`")))
            .collect::<std::result::Result<_, _>>()?
    };
    if grid.is_empty() || grid.contains(&0) {
        return Err(format!("`{s}` gives no positive shot counts"));
    }
    Ok(grid)
}
