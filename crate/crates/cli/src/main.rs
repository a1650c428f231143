use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vqephase_cli::config::{resolve, Overrides};
use vqephase_cli::scenario::{self, RunContext, Scenario};
use vqephase_cli::RunError;

#[derive(Parser)]
#[command(name = "vqephase", version, about = "Symmetry-projected VQE under shot noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its tables.
    Run(RunArgs),
    /// Resolve and validate a configuration, printing the normalized form.
    Validate(ConfigArgs),
    /// List the available scenarios.
    List,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario name; may also be given as `scenario` in the config file.
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Permit 16 to 26 qubit state vectors.
    #[arg(long)]
    allow_large: bool,
    /// Cluster extents, e.g. `4x4`.
    #[arg(long)]
    lattice: Option<String>,
    /// Shot grid: `a:b` doubles from a to b, or a comma list.
    #[arg(long)]
    ns: Option<String>,
    /// A single value or a comma list.
    #[arg(long)]
    j2: Option<String>,
    /// Dotted-path override, e.g. `optimizer.learning_rate=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = "VQEPHASE_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

fn load(a: &ConfigArgs) -> Result<vqephase_cli::config::Config, RunError> {
    let text = match &a.config {
        Some(p) => Some((p.display().to_string(), std::fs::read_to_string(p)?)),
        None => None,
    };
    let ov = Overrides {
        seed: a.seed,
        allow_large: a.allow_large,
        lattice: a.lattice.clone(),
        ns: a.ns.clone(),
        j2: a.j2.clone(),
        set: a.set.clone(),
    };
    Ok(resolve(a.scenario.as_deref(), text.as_ref().map(|(p, t)| (p.as_str(), t.as_str())), &ov)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            for (name, about) in Scenario::list() {
                println!("{name:<8} {about}");
            }
            Ok(())
        }
        Command::Validate(a) => load(&a).map(|c| print!("{}", c.normalized())),
        Command::Run(a) => load(&a.config).and_then(|cfg| {
            let workers =
                a.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1);
            let ctx = RunContext { out_dir: scenario::default_out_dir(a.out_dir.as_deref()), workers };
            let report = scenario::run(&cfg, &ctx)?;
            for line in &report.summary {
                println!("{line}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
