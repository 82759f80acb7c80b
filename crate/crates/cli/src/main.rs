use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use degreeflow::experiments::{
    is_blocking, load_config, run_pipeline, run_scenario, validate_config, Pipeline, RunConfig,
    ScenarioReport,
};

/// Markov-modulated duplication-deletion random graphs.
#[derive(Parser)]
#[command(name = "degreeflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the graph and write degree distributions.
    Simulate(Flags),
    /// Track the degree distribution with the stochastic-approximation filter.
    Track(Flags),
    /// Stationary distribution, covariance, searchability and exponents.
    Theory(Flags),
    /// Run a named scenario: example1..example4 or custom.
    Experiment {
        name: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a config and list its problems.
    Validate(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
}

impl Flags {
    fn resolve(&self, scenario: Option<&str>) -> degreeflow::Result<RunConfig> {
        let mut cfg = load_config(self.config.as_deref(), scenario)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        Ok(cfg)
    }
}

fn print_report(report: &ScenarioReport) {
    println!("{}: {} rows", report.scenario, report.rows.len());
    for (name, agg) in &report.aggregates {
        println!("  {name} = {} (stderr {})", agg.mean, agg.stderr);
    }
    for f in &report.files {
        println!("  wrote {}", f.display());
    }
}

fn run(cli: Cli) -> degreeflow::Result<ExitCode> {
    let (pipeline, name, flags, scenario) = match &cli.command {
        Command::Simulate(f) => (Pipeline::Simulate, "simulate", f, None),
        Command::Track(f) => (Pipeline::Track, "track", f, None),
        Command::Theory(f) => (Pipeline::Theory, "theory", f, None),
        Command::Experiment { name, flags } => {
            let cfg = flags.resolve(Some(name))?;
            print_report(&run_scenario(name, &cfg)?);
            return Ok(ExitCode::SUCCESS);
        }
        Command::Validate(f) => {
            let cfg = f.resolve(None)?;
            let violations = validate_config(&cfg);
            if violations.is_empty() {
                println!("ok");
            }
            for v in &violations {
                println!("{v}");
            }
            let code = if violations.iter().any(|v| is_blocking(v)) { 1 } else { 0 };
            return Ok(ExitCode::from(code));
        }
    };
    let cfg = flags.resolve(scenario)?;
    print_report(&run_pipeline(pipeline, name, &cfg)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEGREEFLOW_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

