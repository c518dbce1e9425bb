use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qss_cli::run::run_experiment;
use qss_cli::verify::{verify, VerifyOptions};
use qss_cli::{CliError, ExperimentConfig, Preset};

#[derive(Parser)]
#[command(name = "qss", version, about = "Prepare and analyze quasi-stationary states of a chaotic Ising chain")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its tables and manifest.
    Run(RunArgs),
    /// Run the invariant suite at small size and report each check.
    Verify(VerifyArgs),
    /// List the built-in presets, or print one as a config file.
    Presets {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
}

fn load(config: Option<&PathBuf>, preset: Option<Preset>) -> Result<ExperimentConfig, CliError> {
    match (config, preset) {
        (Some(path), _) => ExperimentConfig::load(path),
        (None, Some(p)) => Ok(p.config()),
        (None, None) => Err(CliError::Config("either --config or --preset is required".into())),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load(args.config.as_ref(), args.preset)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output = out;
    }
    let outputs = run_experiment(&cfg, args.jobs.map(|j| j as usize))?;
    outputs.write(&cfg.output)?;
    for name in &outputs.manifest.files {
        println!("wrote {}", cfg.output.join(name).display());
    }
    for inv in &outputs.manifest.invariants {
        let tag = if inv.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: value={:.6e} limit={:.6e} over {}", inv.name, inv.value, inv.limit, inv.count);
    }
    match outputs.violations() {
        0 => Ok(()),
        k => Err(CliError::Invariants(k)),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let mut opts = match &args.config {
        Some(path) => VerifyOptions::from_config(&ExperimentConfig::load(path)?)?,
        None => VerifyOptions::default(),
    };
    if let Some(seed) = args.seed {
        opts.seed = seed;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        builder = builder.num_threads(j as usize);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    let report = pool.install(|| verify(&opts))?;
    println!("{report}");
    match report.failures() {
        0 => Ok(()),
        k => Err(CliError::Invariants(k)),
    }
}

fn cmd_presets(preset: Option<Preset>) {
    match preset {
        Some(p) => println!("{}", p.config().to_json()),
        None => {
            for p in Preset::all() {
                println!("{:<6} {}", p.name(), p.summary());
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Presets { preset } => {
            cmd_presets(preset);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
