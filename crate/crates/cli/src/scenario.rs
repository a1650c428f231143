//! Scenario registry and runners. Each scenario fixes reduced-scale
//! defaults; every run writes `<name>.csv`, optionally `<name>_steps.jsonl`,
//! and for scenarios with derived quantities `<name>_fit.csv`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;
use vqephase::analysis::{
    barren_scan, compare_decay, detect_transition, detect_transition_with, fit_gap_scaling, fit_infidelity, linear_fit,
    overlap_histogram, total_cost, SweepPoint,
};
use vqephase::engine::StateVector;
use vqephase::experiments::{
    beta_sweep, initial_force_variance, shots_for_epsilon, singlet_spectrum, ShotPoint, System, SystemConfig,
};
use vqephase::lattice::{Boundary, Geometry, SymmetrySelection};
use vqephase::optimize::{run as optimize, Method, RunRecord};

use crate::config::{Config, ConfigError, GapCase};
use crate::output::{LogWriter, Row, TableWriter};
use crate::pool::{run_ordered, Job};
use crate::RunError;

/// State vectors above this many qubits are refused even with the
/// large-system opt-in.
pub const HARD_QUBIT_LIMIT: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Ed,
    Fig1a,
    Fig1c,
    Fig1d,
    Fig1e,
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    AppC,
    AppD,
    AppE,
    AppF,
}

const ALL: [(Scenario, &str, &str); 13] = [
    (Scenario::Ed, "ed", "exact S = 0 levels and gaps"),
    (Scenario::Fig1a, "fig1a", "SGD fidelity, Var E and c_V versus N_s"),
    (Scenario::Fig1c, "fig1c", "Metropolis fidelity and c_V versus beta"),
    (Scenario::Fig1d, "fig1d", "critical N_s versus learning rate"),
    (Scenario::Fig1e, "fig1e", "fidelity versus epsilon on L x 4 clusters"),
    (Scenario::Fig2a, "fig2a", "SR infidelity versus N_s per depth"),
    (Scenario::Fig2b, "fig2b", "SR infidelity versus learning rate"),
    (Scenario::Fig3a, "fig3a", "infidelity prefactor A versus sector gap"),
    (Scenario::Fig3b, "fig3b", "gap and A versus j2 per symmetry selection"),
    (Scenario::AppC, "appC", "infidelity-law fits with free and fixed exponent"),
    (Scenario::AppD, "appD", "gradient norm versus N_p and L"),
    (Scenario::AppE, "appE", "overlap distributions over eigenstates"),
    (Scenario::AppF, "appF", "N_SGD at matched epsilon versus L"),
];

impl Scenario {
    pub fn parse(name: &str) -> Result<Scenario, ConfigError> {
        ALL.iter()
            .find(|(_, n, _)| n.eq_ignore_ascii_case(name))
            .map(|(s, _, _)| *s)
            .ok_or_else(|| ConfigError::UnknownScenario(name.into(), Self::names().join(", ")))
    }

    pub fn names() -> Vec<&'static str> {
        ALL.iter().map(|(_, n, _)| *n).collect()
    }

    pub fn list() -> impl Iterator<Item = (&'static str, &'static str)> {
        ALL.iter().map(|(_, n, d)| (*n, *d))
    }

    pub fn name(self) -> &'static str {
        ALL.iter().find(|(s, _, _)| *s == self).unwrap().1
    }

    pub fn defaults(self) -> Config {
        let mut c = Config { scenario: self.name().into(), ..Config::default() };
        let small_grid = vec![1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64];
        let sr = |c: &mut Config| {
            c.optimizer.method = Method::Sr;
            c.optimizer.learning_rate = 0.1;
            c.optimizer.regularization = 1.0;
            c.optimizer.max_steps = 3000;
            c.optimizer.restarts = 6;
            c.optimizer.window = 200;
            c.optimizer.tail = 500;
            c.optimizer.projected_fidelity = true;
        };
        match self {
            Scenario::Ed => {}
            Scenario::Fig1a => {
                c.optimizer.learning_rate = 0.2;
                c.sweep.shots = small_grid;
                c.sweep.j2 = vec![0.0, 0.4];
            }
            Scenario::Fig1c => {
                c.thermal.chain_length = 20_000;
                c.thermal.burn_in = 4_000;
                c.sweep.betas = (0..17).map(|i| 0.25 * 2f64.powf(i as f64 / 2.0)).collect();
                c.sweep.j2 = vec![0.0, 0.4];
            }
            Scenario::Fig1d => {
                c.sweep.learning_rates = vec![0.2, 0.25, 0.3, 0.35, 0.4];
                c.sweep.shots = vec![1, 2, 3, 4, 6, 8, 11, 16, 23, 32, 45, 64];
            }
            Scenario::Fig1e | Scenario::AppF => {
                c.system.extents = [2, 4];
                c.system.boundary = [Boundary::Open, Boundary::Periodic];
                c.system.j2 = 0.4;
                c.system.depth = 8;
                c.optimizer.restarts = 4;
                c.optimizer.max_steps = 5000;
                c.sweep.lengths = vec![2, 3];
                c.sweep.epsilon =
                    if self == Scenario::AppF { vec![0.5] } else { vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] };
            }
            Scenario::Fig2a | Scenario::AppC => {
                sr(&mut c);
                c.system.j2 = 0.4;
                c.sweep.depths = if self == Scenario::AppC { vec![4, 6, 8] } else { vec![4, 8] };
                c.sweep.shots = vec![64, 128, 256, 512, 1024, 2048, 4096];
            }
            Scenario::Fig2b => {
                sr(&mut c);
                c.system.depth = 8;
                c.sweep.j2 = vec![0.0, 0.4, 0.6];
                c.sweep.learning_rates = vec![0.025, 0.05, 0.1, 0.2];
                c.sweep.shots = vec![1024];
            }
            Scenario::Fig3a | Scenario::Fig3b => {
                sr(&mut c);
                c.optimizer.restarts = 4;
                c.system.depth = 8;
                c.sweep.shots = vec![128, 256, 512, 1024, 2048];
                if self == Scenario::Fig3a {
                    let hex = |label: &str, j2: f64, symmetry: SymmetrySelection| GapCase {
                        label: label.into(),
                        geometry: Geometry::Hexagonal,
                        extents: [2, 2],
                        j2,
                        symmetry,
                        ..GapCase::default()
                    };
                    c.gap.cases = vec![
                        hex("hex-0.6-identity", 0.6, SymmetrySelection::Identity),
                        hex("hex-0.6-full", 0.6, SymmetrySelection::Full),
                        hex("hex-0.4-identity", 0.4, SymmetrySelection::Identity),
                        hex("hex-0.4-full", 0.4, SymmetrySelection::Full),
                        GapCase { label: "square-2x4-0.0".into(), ..GapCase::default() },
                    ];
                } else {
                    c.system.extents = [3, 4];
                    c.system.boundary = [Boundary::Open, Boundary::Periodic];
                    c.sweep.j2 = vec![0.0, 0.4, 0.5, 0.6];
                    c.gap.selections = vec![SymmetrySelection::PointGroup, SymmetrySelection::Translations];
                }
            }
            Scenario::AppD => {
                c.system.extents = [4, 4];
                c.system.j2 = 0.4;
                c.system.depth = 8;
                c.sweep.depths = vec![1, 2, 4, 8, 16, 32];
                c.sweep.lengths = vec![2, 3, 4];
            }
            Scenario::AppE => {
                c.system.j2 = 0.4;
                c.optimizer.learning_rate = 0.2;
                c.sweep.shots = vec![1, 64];
            }
        }
        c
    }
}

/// Where and how a run executes; not part of the hashed config.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// Files written and human-readable summary lines.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Meta {
    scenario: String,
    hash: String,
    seed: u64,
    log_stride: usize,
}

impl Meta {
    fn row(&self) -> Row {
        Row::default()
            .with("scenario", self.scenario.as_str())
            .with("config_hash", self.hash.as_str())
            .with("seed", self.seed)
    }

    fn step_lines(&self, point: &str, rec: &RunRecord) -> Vec<String> {
        if self.log_stride == 0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for r in &rec.restarts {
            for (i, s) in r.steps.iter().enumerate() {
                if i % self.log_stride != 0 && i + 1 != r.steps.len() {
                    continue;
                }
                out.push(
                    json!({
                        "scenario": self.scenario, "config_hash": self.hash, "seed": self.seed, "point": point,
                        "restart": r.restart, "restart_seed": r.seed, "step": s.step, "energy": s.energy,
                        "fidelity": s.fidelity, "grad_norm": s.grad_norm, "var_f": s.var_f, "norm": s.norm,
                    })
                    .to_string(),
                );
            }
        }
        out
    }
}

/// Output of one grid point.
struct Out {
    rows: Vec<Row>,
    log: Vec<String>,
}

type PointJob<'a> = Job<'a, Out, RunError>;

pub fn run(cfg: &Config, ctx: &RunContext) -> Result<Report, RunError> {
    let scenario = Scenario::parse(&cfg.scenario)?;
    std::fs::create_dir_all(&ctx.out_dir)?;
    let meta =
        Meta { scenario: scenario.name().into(), hash: cfg.hash(), seed: cfg.seed, log_stride: cfg.output.log_stride };
    let config_json = serde_json::to_string(cfg).expect("config serializes");
    let mut report = Report::default();
    let base = ctx.out_dir.join(scenario.name());
    let main_path = base.with_extension("csv");
    let mut table = TableWriter::create(&main_path, &config_json)?;
    let log_path = ctx.out_dir.join(format!("{}_steps.jsonl", scenario.name()));
    let mut log =
        if cfg.output.log_stride > 0 && scenario.uses_optimizer() { Some(LogWriter::create(&log_path)?) } else { None };
    let mut rows = Vec::new();

    let fits = {
        let mut sink = |_: usize, out: Out| -> Result<(), RunError> {
            for r in &out.rows {
                table.write(r)?;
            }
            if let Some(l) = log.as_mut() {
                l.write_lines(&out.log)?;
            }
            rows.extend(out.rows);
            Ok(())
        };
        let plan = plan(scenario, cfg, &meta)?;
        run_ordered(plan.jobs, ctx.workers, &mut sink)?;
        plan.post
    };
    let (path, digest) = table.finish()?;
    report.files.push(path);
    if let Some(l) = log {
        l.finish()?;
        report.files.push(log_path);
    }
    let fit_rows = fits(&rows)?;
    if !fit_rows.is_empty() {
        let fit_path = PathBuf::from(format!("{}_fit.csv", base.display()));
        let mut w = TableWriter::create(&fit_path, &config_json)?;
        for f in &fit_rows {
            let row = meta.row().with("input_sha256", digest.as_str()).extend(f);
            w.write(&row)?;
            report.summary.push(format!(
                "{:<24} {:<22} {:>14} {:>12} {}",
                f.text("group"),
                f.text("quantity"),
                fmt_num(f.f64("value")),
                fmt_num(f.f64("error")),
                f.text("note")
            ));
        }
        report.files.push(w.finish()?.0);
    }
    report.summary.insert(0, format!("{}: {} rows, config {}", scenario.name(), rows.len(), meta.hash));
    Ok(report)
}

/// Serde name of a unit enum variant.
fn tag<T: serde::Serialize>(x: &T) -> String {
    match serde_json::to_value(x) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.6}")
    }
}

impl Scenario {
    fn uses_optimizer(self) -> bool {
        !matches!(self, Scenario::Ed | Scenario::Fig1c | Scenario::AppD)
    }
}

type Post<'a> = Box<dyn FnOnce(&[Row]) -> Result<Vec<Row>, RunError> + 'a>;

struct Plan<'a> {
    jobs: Vec<PointJob<'a>>,
    post: Post<'a>,
}

fn fit_row(group: impl Into<String>, quantity: &str, value: f64, error: f64, note: impl Into<String>) -> Row {
    Row::default()
        .with("group", group.into())
        .with("quantity", quantity)
        .with("value", value)
        .with("error", error)
        .with("note", note.into())
}

fn guard(cfg: &SystemConfig) -> Result<(), RunError> {
    let n = cfg.spec()?.site_count();
    if n > HARD_QUBIT_LIMIT {
        return Err(vqephase::Error::Budget(format!("{n} qubits exceeds the hard limit of {HARD_QUBIT_LIMIT}")).into());
    }
    Ok(())
}

fn build(cfg: &SystemConfig, allow_large: bool) -> Result<Arc<System>, RunError> {
    guard(cfg)?;
    Ok(Arc::new(System::build(cfg, allow_large)?))
}

fn j2_values(cfg: &Config) -> Vec<f64> {
    if cfg.sweep.j2.is_empty() {
        vec![cfg.system.j2]
    } else {
        cfg.sweep.j2.clone()
    }
}

fn require<T>(values: &[T], key: &str) -> Result<(), RunError> {
    if values.is_empty() {
        return Err(
            ConfigError::Range { key: key.into(), message: "this scenario needs a non-empty list".into() }.into()
        );
    }
    Ok(())
}

fn shot_point_row(p: &ShotPoint) -> Row {
    Row::default()
        .with("shots", p.shots)
        .with("learning_rate", p.learning_rate)
        .with("parameter_count", p.parameter_count)
        .with("fidelity", p.fidelity)
        .with("fidelity_sem", p.fidelity_sem)
        .with("energy", p.energy)
        .with("energy_sem", p.energy_sem)
        .with("var_e", p.var_e)
        .with("var_e_sem", p.var_e_sem)
        .with("specific_heat", p.specific_heat)
        .with("n_sgd", p.n_sgd)
        .with("n_sgd_sem", p.n_sgd_sem)
        .with("var_f_init", p.var_f_init)
        .with("var_f_tail", p.var_f_tail)
        .with("temperature", p.temperature)
        .with("epsilon", p.epsilon)
        .with("unconverged", p.unconverged)
        .with("restarts", p.restarts)
}

/// One optimizer run at `shots` with learning rate `eta`; `prefix` names
/// the grid point.
fn shot_job<'a>(
    meta: &'a Meta,
    cfg: &'a Config,
    system: Arc<System>,
    prefix: Row,
    shots: u64,
    eta: f64,
) -> PointJob<'a> {
    Box::new(move || {
        let mut oc = cfg.optimizer_config(shots);
        oc.learning_rate = eta;
        let rec = optimize(&system.ansatz, &oc, &system.targets)?;
        let p = ShotPoint::from_record(shots, &oc, &rec)?;
        let point =
            prefix.0.iter().map(|(k, v)| format!("{k}={v}")).chain([format!("shots={shots}")]).collect::<Vec<_>>();
        let log = meta.step_lines(&point.join(","), &rec);
        Ok(Out { rows: vec![meta.row().extend(&prefix).extend(&shot_point_row(&p))], log })
    })
}

fn sweep_points<'r>(rows: impl Iterator<Item = &'r Row>, x: &str) -> Vec<SweepPoint> {
    rows.map(|r| SweepPoint { x: r.f64(x), fidelity: r.f64("fidelity"), var_e: r.f64("var_e") }).collect()
}

fn transition_rows(group: &str, points: &[SweepPoint], x_name: &str, out: &mut Vec<Row>) {
    match detect_transition(points) {
        Ok(t) => {
            out.push(fit_row(group, &format!("{x_name}_c_var_e_peak"), t.peak, f64::NAN, ""));
            out.push(fit_row(
                group,
                &format!("{x_name}_departure"),
                t.departure.unwrap_or(f64::NAN),
                f64::NAN,
                if t.discrepant { "discrepant with Var E peak" } else { "" },
            ));
        }
        Err(e) => out.push(fit_row(group, &format!("{x_name}_c_var_e_peak"), f64::NAN, f64::NAN, e.to_string())),
    }
    let cv = detect_transition_with(points, |p| p.x * p.x * p.var_e);
    match cv {
        Ok(t) => out.push(fit_row(group, &format!("{x_name}_c_specific_heat_peak"), t.peak, f64::NAN, "")),
        Err(e) => {
            out.push(fit_row(group, &format!("{x_name}_c_specific_heat_peak"), f64::NAN, f64::NAN, e.to_string()))
        }
    }
}

fn plan<'a>(scenario: Scenario, cfg: &'a Config, meta: &'a Meta) -> Result<Plan<'a>, RunError> {
    let allow = cfg.allow_large;
    let shots = &cfg.sweep.shots;
    let eta = cfg.optimizer.learning_rate;
    match scenario {
        Scenario::Ed => {
            let sc = cfg.system_config();
            let system = build(&sc, allow)?;
            let levels = cfg.spectrum.levels;
            let sector = (tag(&sc.symmetry), system.sector.clone());
            let job: PointJob = Box::new(move || {
                let (energies, _, complete) = singlet_spectrum(system.ansatz.hamiltonian(), levels)?;
                let e0 = energies[0];
                let rows = energies
                    .iter()
                    .enumerate()
                    .map(|(k, e)| {
                        meta.row()
                            .with("geometry", tag(&system.config.geometry))
                            .with("lattice", system.spec.label())
                            .with("j2", system.config.j2)
                            .with("level", k)
                            .with("energy", *e)
                            .with("excitation", e - e0)
                            .with("complete", complete)
                    })
                    .collect();
                Ok(Out { rows, log: vec![] })
            });
            Ok(Plan {
                jobs: vec![job],
                post: Box::new(move |rows: &[Row]| {
                    let e0 = rows.first().map(|r| r.f64("energy")).unwrap_or(f64::NAN);
                    let gap = rows.iter().map(|r| r.f64("excitation")).find(|x| *x > 1e-8).unwrap_or(f64::NAN);
                    Ok(vec![
                        fit_row("singlet", "ground_energy", e0, f64::NAN, ""),
                        fit_row("singlet", "gap", gap, f64::NAN, ""),
                        fit_row(
                            format!("sector {}", sector.0),
                            "gap",
                            sector.1.gap.unwrap_or(f64::NAN),
                            f64::NAN,
                            format!("degeneracy {}", sector.1.degeneracy),
                        ),
                    ])
                }),
            })
        }
        Scenario::Fig1a => {
            require(shots, "sweep.shots")?;
            let mut jobs: Vec<PointJob> = Vec::new();
            for j2 in j2_values(cfg) {
                let system = build(&SystemConfig { j2, ..cfg.system_config() }, allow)?;
                for &ns in shots {
                    jobs.push(shot_job(meta, cfg, system.clone(), Row::default().with("j2", j2), ns, eta));
                }
            }
            Ok(Plan {
                jobs,
                post: Box::new(move |rows: &[Row]| {
                    let mut out = Vec::new();
                    for j2 in j2_values(cfg) {
                        let pts = sweep_points(rows.iter().filter(|r| r.f64("j2") == j2), "shots");
                        transition_rows(&format!("j2={j2}"), &pts, "shots", &mut out);
                    }
                    Ok(out)
                }),
            })
        }
        Scenario::Fig1c => {
            require(&cfg.sweep.betas, "sweep.betas")?;
            let mut jobs: Vec<PointJob> = Vec::new();
            let base = cfg.thermal_config();
            let init = (cfg.optimizer.init_range[0], cfg.optimizer.init_range[1]);
            for j2 in j2_values(cfg) {
                let system = build(&SystemConfig { j2, ..cfg.system_config() }, allow)?;
                for &beta in &cfg.sweep.betas {
                    let (system, base) = (system.clone(), base.clone());
                    jobs.push(Box::new(move || {
                        let p = beta_sweep(&system, &base, &[beta], cfg.thermal.chains, init)?.remove(0);
                        let row = meta
                            .row()
                            .with("j2", j2)
                            .with("beta", p.beta)
                            .with("fidelity", p.fidelity)
                            .with("fidelity_sem", p.fidelity_sem)
                            .with("energy", p.energy)
                            .with("energy_sem", p.energy_sem)
                            .with("var_e", p.var_e)
                            .with("specific_heat", p.specific_heat)
                            .with("acceptance", p.acceptance)
                            .with("samples", p.samples)
                            .with("chains", p.chains)
                            .with("warnings", p.warnings.join("; "));
                        Ok(Out { rows: vec![row], log: vec![] })
                    }));
                }
            }
            Ok(Plan {
                jobs,
                post: Box::new(move |rows: &[Row]| {
                    let mut out = Vec::new();
                    for j2 in j2_values(cfg) {
                        let sel: Vec<&Row> = rows.iter().filter(|r| r.f64("j2") == j2).collect();
                        let pts = sweep_points(sel.iter().copied(), "beta");
                        transition_rows(&format!("j2={j2}"), &pts, "beta", &mut out);
                        let n = cfg.system_config().spec()?.site_count();
                        let floor = 2.0 / vqephase::experiments::singlet_dimension(n) as f64;
                        let bc = sel.iter().find(|r| r.f64("fidelity") > floor).map(|r| r.f64("beta"));
                        out.push(fit_row(
                            format!("j2={j2}"),
                            "beta_c_floor_exit",
                            bc.unwrap_or(f64::NAN),
                            f64::NAN,
                            format!("first beta with F > {floor:.4}"),
                        ));
                    }
                    Ok(out)
                }),
            })
        }
        Scenario::Fig1d => {
            require(shots, "sweep.shots")?;
            require(&cfg.sweep.learning_rates, "sweep.learning_rates")?;
            let system = build(&cfg.system_config(), allow)?;
            let mut jobs: Vec<PointJob> = Vec::new();
            for &lr in &cfg.sweep.learning_rates {
                for &ns in shots {
                    jobs.push(shot_job(meta, cfg, system.clone(), Row::default().with("eta", lr), ns, lr));
                }
            }
            Ok(Plan {
                jobs,
                post: Box::new(move |rows: &[Row]| {
                    let mut out = Vec::new();
                    let (mut xs, mut ys) = (Vec::new(), Vec::new());
                    for &lr in &cfg.sweep.learning_rates {
                        let pts = sweep_points(rows.iter().filter(|r| r.f64("eta") == lr), "shots");
                        match detect_transition(&pts) {
                            Ok(t) => {
                                xs.push(lr);
                                ys.push(t.peak);
                                out.push(fit_row(format!("eta={lr}"), "shots_c", t.peak, f64::NAN, ""));
                            }
                            Err(e) => {
                                out.push(fit_row(format!("eta={lr}"), "shots_c", f64::NAN, f64::NAN, e.to_string()))
                            }
                        }
                    }
                    if xs.len() >= 3 {
                        let f = linear_fit(&xs, &ys)?;
                        out.push(fit_row("linear", "slope", f.slope, f.slope_err, ""));
                        out.push(fit_row("linear", "intercept", f.intercept, f.intercept_err, ""));
                        out.push(fit_row("linear", "r_squared", f.r_squared, f64::NAN, format!("{} points", f.points)));
                    }
                    Ok(out)
                }),
            })
        }
        Scenario::Fig1e | Scenario::AppF => {
            require(&cfg.sweep.lengths, "sweep.lengths")?;
            require(&cfg.sweep.epsilon, "sweep.epsilon")?;
            let mut eps = cfg.sweep.epsilon.clone();
            // descending ε = ascending N_s
            eps.sort_by(|a, b| b.total_cmp(a));
            let mut jobs: Vec<PointJob> = Vec::new();
            let init = (cfg.optimizer.init_range[0], cfg.optimizer.init_range[1]);
            for &l in &cfg.sweep.lengths {
                let mut sc = cfg.system_config();
                sc.extents[0] = l;
                let system = build(&sc, allow)?;
                let var_f = initial_force_variance(&system, init, 4, cfg.seed)?;
                for &e in &eps {
                    let ns = shots_for_epsilon(system.parameter_count(), eta, var_f, e)?;
                    let prefix =
                        Row::default().with("length", l).with("epsilon_target", e).with("var_f_initial", var_f);
                    jobs.push(shot_job(meta, cfg, system.clone(), prefix, ns, eta));
                }
            }
            Ok(Plan {
                jobs,
                post: Box::new(move |rows: &[Row]| {
                    let mut out = Vec::new();
                    for &l in &cfg.sweep.lengths {
                        let sel: Vec<&Row> = rows.iter().filter(|r| r.f64("length") == l as f64).collect();
                        let group = format!("L={l}");
                        if scenario == Scenario::AppF {
                            for r in &sel {
                                out.push(fit_row(
                                    group.clone(),
                                    "n_sgd",
                                    r.f64("n_sgd"),
                                    r.f64("n_sgd_sem"),
                                    format!("epsilon {} shots {}", r.text("epsilon_target"), r.text("shots")),
                                ));
                            }
                            continue;
                        }
                        let pts = sweep_points(sel.iter().copied(), "shots");
                        match detect_transition(&pts) {
                            Ok(t) => {
                                let r = sel[t.peak_index];
                                out.push(fit_row(group.clone(), "epsilon_c", r.f64("epsilon_target"), f64::NAN, ""));
                                out.push(fit_row(group.clone(), "shots_c", t.peak, f64::NAN, ""));
                                out.push(fit_row(group.clone(), "n_sgd", r.f64("n_sgd"), r.f64("n_sgd_sem"), ""));
                                out.push(fit_row(group, "n_tot", total_cost(r.f64("n_sgd"), t.peak), f64::NAN, ""));
                            }
                            Err(e) => out.push(fit_row(group, "epsilon_c", f64::NAN, f64::NAN, e.to_string())),
                        }
                    }
                    Ok(out)
                }),
            })
        }
        Scenario::Fig2a | Scenario::AppC => {
            require(shots, "sweep.shots")?;
            require(&cfg.sweep.depths, "sweep.depths")?;
            let mut jobs: Vec<PointJob> = Vec::new();
            for &d in &cfg.sweep.depths {
                let system = build(&SystemConfig { depth: d, ..cfg.system_config() }, allow)?;
                for &ns in shots {
                    jobs.push(shot_job(meta, cfg, system.clone(), Row::default().with("depth", d), ns, eta));
                }
            }
            Ok(Plan {
                jobs,
                post: Box::new(move |rows: &[Row]| {
                    let mut out = Vec::new();
                    let modes: &[bool] = if scenario == Scenario::AppC { &[true, false] } else { &[true] };
                    for &d in &cfg.sweep.depths {
                        let sel: Vec<&Row> = rows.iter().filter(|r| r.f64("depth") == d as f64).collect();
                        let x: Vec<f64> = sel.iter().map(|r| r.f64("shots")).collect();
                        let y: Vec<f64> = sel.iter().map(|r| 1.0 - r.f64("fidelity")).collect();
                        for &free in modes {
                            let group = format!("D={d}{}", if free { "" } else { " alpha=1" });
                            match fit_infidelity(&x, &y, free) {
                                Ok(f) => {
                                    out.push(fit_row(group.clone(), "a", f.a, f.a_err(), ""));
                                    out.push(fit_row(group.clone(), "i0", f.i0, f.i0_err(), ""));
                                    out.push(fit_row(group.clone(), "alpha", f.alpha, f.alpha_err(), ""));
                                    out.push(fit_row(group, "r_squared", f.r_squared, f64::NAN, ""));
                                }
                                Err(e) => out.push(fit_row(group, "a", f64::NAN, f64::NAN, e.to_string())),
                            }
                        }
                    }
                    Ok(out)
                }),
            })
        }
        Scenario::Fig2b => {
            require(shots, "sweep.shots")?;
            require(&cfg.sweep.learning_rates, "sweep.learning_rates")?;
            let mut jobs: Vec<PointJob> = Vec::new();
            for j2 in j2_values(cfg) {
                let system = build(&SystemConfig { j2, ..cfg.system_config() }, allow)?;
                for &lr in &cfg.sweep.learning_rates {
                    for &ns in shots {
                        let prefix = Row::default().with("j2", j2).with("eta", lr);
                        jobs.push(shot_job(meta, cfg, system.clone(), prefix, ns, lr));
                    }
                }
            }
            Ok(Plan { jobs, post: Box::new(|_: &[Row]| Ok(vec![])) })
        }
        Scenario::Fig3a | Scenario::Fig3b => {
            require(shots, "sweep.shots")?;
            let cases: Vec<GapCase> = if !cfg.gap.cases.is_empty() {
                cfg.gap.cases.clone()
            } else {
                require(&cfg.gap.selections, "gap.selections")?;
                let s = &cfg.system;
                j2_values(cfg)
                    .into_iter()
                    .flat_map(|j2| {
                        cfg.gap.selections.iter().map(move |&sel| GapCase {
                            label: format!("{}-{j2}", tag(&sel)),
                            geometry: s.geometry,
                            extents: s.extents,
                            boundary: s.boundary,
                            j2,
                            symmetry: sel,
                            dimers: s.dimers,
                            target_level: s.target_level,
                        })
                    })
                    .collect()
            };
            let mut jobs: Vec<PointJob> = Vec::new();
            let mut labels = Vec::new();
            for (i, c) in cases.iter().enumerate() {
                let sc = SystemConfig {
                    geometry: c.geometry,
                    extents: c.extents,
                    boundary: c.boundary,
                    j2: c.j2,
                    depth: cfg.system.depth,
                    symmetry: c.symmetry,
                    dimers: c.dimers,
                    target_level: c.target_level,
                };
                let system = build(&sc, allow)?;
                let gap = system.sector.gap.unwrap_or(f64::NAN);
                let label = if c.label.is_empty() { format!("case{i}") } else { c.label.clone() };
                labels.push(label.clone());
                for &ns in shots {
                    let prefix = Row::default().with("case", label.clone()).with("j2", c.j2).with("gap", gap);
                    jobs.push(shot_job(meta, cfg, system.clone(), prefix, ns, eta));
                }
            }
            Ok(Plan {
                jobs,
                post: Box::new(move |rows: &[Row]| {
                    let mut out = Vec::new();
                    let (mut gaps, mut slopes) = (Vec::new(), Vec::new());
                    for label in &labels {
                        let sel: Vec<&Row> = rows.iter().filter(|r| r.text("case") == *label).collect();
                        let eps: Vec<f64> = sel.iter().map(|r| r.f64("epsilon")).collect();
                        let inf: Vec<f64> = sel.iter().map(|r| 1.0 - r.f64("fidelity")).collect();
                        let gap = sel.first().map(|r| r.f64("gap")).unwrap_or(f64::NAN);
                        out.push(fit_row(label.clone(), "gap", gap, f64::NAN, ""));
                        match linear_fit(&eps, &inf) {
                            Ok(f) => {
                                out.push(fit_row(label.clone(), "a", f.slope, f.slope_err, ""));
                                out.push(fit_row(label.clone(), "i0", f.intercept, f.intercept_err, ""));
                                if f.slope > 0.0 && gap > 0.0 {
                                    gaps.push(gap);
                                    slopes.push(f.slope);
                                }
                            }
                            Err(e) => out.push(fit_row(label.clone(), "a", f64::NAN, f64::NAN, e.to_string())),
                        }
                    }
                    if gaps.len() >= 3 {
                        let f = fit_gap_scaling(&gaps, &slopes)?;
                        out.push(fit_row("log A vs log gap", "exponent", f.exponent, f.exponent_err, ""));
                        out.push(fit_row("log A vs log gap", "r_squared", f.r_squared, f64::NAN, ""));
                    }
                    Ok(out)
                }),
            })
        }
        Scenario::AppD => {
            let trials = cfg.barren.trials;
            let range = (cfg.barren.init_range[0], cfg.barren.init_range[1]);
            let mut jobs: Vec<PointJob> = Vec::new();
            let mut systems = Vec::new();
            for &d in &cfg.sweep.depths {
                systems.push(("depth", d, SystemConfig { depth: d, ..cfg.system_config() }));
            }
            for &l in &cfg.sweep.lengths {
                let mut sc = cfg.system_config();
                sc.extents[0] = l;
                sc.boundary[0] = Boundary::Open;
                systems.push(("length", l, sc));
            }
            if systems.is_empty() {
                require::<usize>(&[], "sweep.depths")?;
            }
            for (series, value, sc) in systems {
                guard(&sc)?;
                jobs.push(Box::new(move || {
                    let system = System::build(&sc, allow)?;
                    let s = barren_scan(&system.ansatz, trials, range, cfg.seed)?;
                    let row = meta
                        .row()
                        .with("series", series)
                        .with("value", value)
                        .with("lattice", system.spec.label())
                        .with("parameter_count", s.parameter_count)
                        .with("qubits", s.qubits)
                        .with("gradient", s.mean)
                        .with("gradient_sem", s.sem)
                        .with("trials", s.trials);
                    Ok(Out { rows: vec![row], log: vec![] })
                }));
            }
            Ok(Plan {
                jobs,
                post: Box::new(|rows: &[Row]| {
                    let mut out = Vec::new();
                    let depth: Vec<&Row> = rows.iter().filter(|r| r.text("series") == "depth").collect();
                    if depth.len() >= 2 {
                        let n = depth.len();
                        let ratio = depth[n - 1].f64("gradient") / depth[n - 2].f64("gradient");
                        out.push(fit_row("depth", "last_ratio", ratio, f64::NAN, "gradient(N_p max) / previous"));
                    }
                    let len: Vec<&Row> = rows.iter().filter(|r| r.text("series") == "length").collect();
                    if len.len() >= 3 {
                        let x: Vec<f64> = len.iter().map(|r| r.f64("value")).collect();
                        let y: Vec<f64> = len.iter().map(|r| r.f64("gradient")).collect();
                        let c = compare_decay(&x, &y)?;
                        let note = if c.prefers_power_law() { "power law preferred" } else { "exponential preferred" };
                        out.push(fit_row("length", "aic_exponential", c.exponential_aic, f64::NAN, note));
                        out.push(fit_row("length", "aic_power_law", c.power_law_aic, f64::NAN, note));
                        out.push(fit_row("length", "power_exponent", c.power_law.slope, c.power_law.slope_err, ""));
                        out.push(fit_row(
                            "length",
                            "exponential_rate",
                            c.exponential.slope,
                            c.exponential.slope_err,
                            "",
                        ));
                    }
                    Ok(out)
                }),
            })
        }
        Scenario::AppE => {
            require(shots, "sweep.shots")?;
            let system = build(&cfg.system_config(), allow)?;
            let levels = cfg.overlaps.levels;
            let (energies, states, _) = singlet_spectrum(system.ansatz.hamiltonian(), levels)?;
            let eig = Arc::new((energies, states));
            let bins = cfg.overlaps.bins;
            let mut jobs: Vec<PointJob> = Vec::new();
            for &ns in shots {
                let (system, eig) = (system.clone(), eig.clone());
                jobs.push(Box::new(move || {
                    let oc = cfg.optimizer_config(ns);
                    let rec = optimize(&system.ansatz, &oc, &system.targets)?;
                    let finals: Vec<StateVector> =
                        rec.restarts.iter().map(|r| system.ansatz.prepare(&r.final_theta)).collect::<Result<_, _>>()?;
                    let stats = overlap_histogram(&finals, &eig.1, eig.1.len(), bins)?;
                    let rows = stats
                        .overlaps
                        .iter()
                        .enumerate()
                        .map(|(k, o)| {
                            meta.row()
                                .with("shots", ns)
                                .with("level", k)
                                .with("energy", eig.0[k])
                                .with("overlap", *o)
                                .with("fidelity", rec.fidelity.mean)
                        })
                        .collect();
                    Ok(Out { rows, log: meta.step_lines(&format!("shots={ns}"), &rec) })
                }));
            }
            Ok(Plan {
                jobs,
                post: Box::new(move |rows: &[Row]| {
                    let mut out = Vec::new();
                    for &ns in shots {
                        let o: Vec<f64> =
                            rows.iter().filter(|r| r.f64("shots") == ns as f64).map(|r| r.f64("overlap")).collect();
                        let m = o.iter().sum::<f64>() / o.len().max(1) as f64;
                        let sd = (o.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (o.len().max(2) - 1) as f64).sqrt();
                        out.push(fit_row(format!("shots={ns}"), "overlap_mean", m, f64::NAN, ""));
                        out.push(fit_row(
                            format!("shots={ns}"),
                            "overlap_sigma",
                            sd,
                            f64::NAN,
                            format!("{} levels", o.len()),
                        ));
                    }
                    Ok(out)
                }),
            })
        }
    }
}

/// Resolves `--out-dir`, falling back to `VQEPHASE_OUT_DIR`, then `out`.
pub fn default_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("VQEPHASE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
