use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use transub_core::harness::{self, Mode, RunConfig};
use transub_core::Result;

/// Transport coefficients of Langevin systems by transient subtraction.
#[derive(Parser)]
#[command(name = "transub", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write curves, tables and a manifest.
    Run(RunArgs),
    /// Short run reporting when the coupled trajectories decouple.
    Pilot(RunArgs),
    /// Finite-difference bias sweep of the perturbation maps (deterministic).
    Bias1d(RunArgs),
    /// Verify checksums of a finished run and print its tables.
    Report {
        /// Output directory of the run.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON config; a manifest.json from an earlier run also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the reference defaults of this mode when no config is given
    /// (mobility, shear, bias1d, gk1d, ttcf1d).
    #[arg(long)]
    mode: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config entry, e.g. `--set K=500 --set eta=[0.01,0.1]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn config(&self, fallback: Mode) -> Result<RunConfig> {
        let mut overrides = Vec::new();
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| transub_core::Error::Config(format!("expected KEY=VALUE, got `{item}`")))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(seed) = self.seed {
            overrides.push(("master_seed".into(), seed.to_string()));
        }
        if let Some(out) = &self.out {
            overrides.push(("output_dir".into(), format!("{:?}", out.to_string_lossy())));
        }
        match (&self.config, &self.mode) {
            (Some(path), mode) => {
                if let Some(m) = mode {
                    overrides.push(("mode".into(), format!("{m:?}")));
                }
                RunConfig::from_file(path, &overrides)
            }
            (None, Some(m)) => RunConfig::from_mode(Mode::parse(m)?, &overrides),
            (None, None) => RunConfig::from_mode(fallback, &overrides),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.config(Mode::Mobility)?;
            let (manifest, _) = harness::run_experiment(&config, args.threads)?;
            println!(
                "{} run complete: {} outputs in {} ({} failed realizations)",
                config.mode.name(),
                manifest.outputs.len(),
                config.output_dir.display(),
                manifest.failures.len()
            );
            println!("{}", harness::report(&config.output_dir)?);
        }
        Command::Pilot(args) => {
            let config = args.config(Mode::Mobility)?;
            let rows = harness::run_pilot(&config, args.threads)?;
            println!("eta, decoupling time");
            for r in rows {
                match r.decoupling_time {
                    Some(t) => println!("{}, {t}", r.eta),
                    None => println!("{}, none within T", r.eta),
                }
            }
        }
        Command::Bias1d(args) => {
            let config = args.config(Mode::Bias1d)?;
            if config.mode != Mode::Bias1d {
                return Err(transub_core::Error::Config("bias1d needs mode = \"bias1d\"".into()));
            }
            harness::run_experiment(&config, args.threads)?;
            print!("{}", std::fs::read_to_string(config.output_dir.join("bias1d.csv"))?);
            let summary = std::fs::read_to_string(config.output_dir.join("summary.json"))?;
            print!("{summary}");
        }
        Command::Report { dir } => print!("{}", harness::report(&dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
