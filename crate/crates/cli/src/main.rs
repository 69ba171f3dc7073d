use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lossnet_cli::{
    execute, write_outputs, CliError, CliResult, Command, Objective, PolicyKind, RunManifest,
};

#[derive(Parser)]
#[command(
    name = "lossnet",
    version,
    about = "Reward bounds and admission-control simulation for loss networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Upper and lower reward-rate bounds over time.
    Bounds(Common),
    /// Ensemble simulation of one admission policy.
    Simulate(Common),
    /// Penalty and thinning on common random numbers.
    Compare(Common),
    /// Tuned steady-state and transient bound gaps over scales 1..1024.
    Table1(Common),
    /// Polytope tracking run with a membership report.
    Polytope(Common),
    /// List the built-in scenarios.
    Scenarios(Common),
    /// Re-execute a manifest (manifest.json or any output CSV).
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Built-in name (eq52, s1..s5) or JSON file.
    #[arg(long, default_value = "eq52")]
    scenario: String,
    /// Target polytope JSON with fields `D` and `h`.
    #[arg(long)]
    polytope: Option<String>,
    #[arg(long, value_enum, default_value = "penalty")]
    policy: PolicyKind,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Bound minimized when eps is tuned.
    #[arg(long, value_enum, default_value = "steady-limit")]
    objective: Objective,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Horizon; defaults to 10 / mu_min.
    #[arg(long, visible_alias = "horizon")]
    tmax: Option<f64>,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Comma-separated acceptance fractions to track instead of the LP solution.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also simulate thinning on the same streams.
    #[arg(long)]
    coupled: bool,
    /// Upper curve from the per-time LP instead of the closed form.
    #[arg(long)]
    exact_upper: bool,
    /// Write a JSON mirror of every CSV.
    #[arg(long)]
    json: bool,
}

impl Common {
    fn manifest(self, command: Command) -> (RunManifest, PathBuf) {
        let mut m = RunManifest::new(command);
        m.scenario = self.scenario;
        m.polytope = self.polytope;
        m.policy.kind = self.policy;
        m.policy.eps = self.eps;
        m.policy.beta = self.beta;
        m.objective = self.objective;
        m.scale = self.scale;
        m.runs = self.runs;
        m.seed = self.seed;
        m.t_max = self.tmax;
        m.grid = self.grid;
        m.targets = self.targets;
        m.out = Some(self.out.display().to_string());
        m.coupled = self.coupled;
        m.exact_upper = self.exact_upper;
        m.json = self.json;
        (m, self.out)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (manifest, dir) = match cli.command {
        Cmd::Bounds(c) => c.manifest(Command::Bounds),
        Cmd::Simulate(c) => c.manifest(Command::Simulate),
        Cmd::Compare(c) => c.manifest(Command::Compare),
        Cmd::Table1(c) => c.manifest(Command::Table1),
        Cmd::Polytope(c) => c.manifest(Command::Polytope),
        Cmd::Scenarios(c) => c.manifest(Command::Scenarios),
        Cmd::Rerun { manifest, out } => {
            let m = RunManifest::from_file(&manifest)?;
            let dir = out
                .or_else(|| m.out.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            (m, dir)
        }
    };
    let manifest = manifest.resolve()?;
    let outputs = execute(&manifest)?;
    for path in write_outputs(&dir, &outputs)? {
        println!("{}", path.display());
    }
    if manifest.command == Command::Scenarios {
        if let Some(o) = outputs.iter().find(|o| o.name == "scenarios.txt") {
            print!("{}", o.content);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &CliError) -> u8 {
    e.exit_code() as u8
}
