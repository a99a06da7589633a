use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weighted_gibbs_cli::compare::compare;
use weighted_gibbs_cli::config::{DEFAULT_OUT_ROOT, OUT_ROOT_ENV};
use weighted_gibbs_cli::output;
use weighted_gibbs_cli::{run_experiment, CliError, CliResult, ExperimentConfig, ExperimentKind};

/// Gibbs sampling with systematic, random and variance-weighted scan orders.
#[derive(Parser)]
#[command(name = "wgibbs", version)]
struct Cli {
    /// Override `chain.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (for `compare`, a CSV file instead of stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root for runs without an explicit output directory.
    #[arg(long, global = true, env = OUT_ROOT_ENV, default_value = DEFAULT_OUT_ROOT)]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Tabulate one metric across scheduler runs of the same experiment.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Run the randomised correctness checks.
    Validate {
        /// Monte Carlo trials per jump-distance configuration.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn apply_overrides(cli: &Cli, config: &mut ExperimentConfig) {
    if let Some(seed) = cli.seed {
        config.chain.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Run { config: path } => {
            let mut config = ExperimentConfig::load(path)?;
            apply_overrides(cli, &mut config);
            let name = path
                .file_stem()
                .map_or("run".into(), |s| s.to_string_lossy().into_owned());
            let out = config.output_dir(&cli.out_root, &name);
            for dir in run_experiment(&config, &out)? {
                println!("{}", dir.display());
            }
            Ok(())
        }
        Command::Compare { dirs } => {
            let table = compare(dirs)?.to_csv()?;
            match &cli.out {
                Some(path) => output::write_text(path, &table),
                None => {
                    print!("{table}");
                    Ok(())
                }
            }
        }
        Command::Validate { trials } => {
            let mut config = ExperimentConfig::new(ExperimentKind::Validate);
            apply_overrides(cli, &mut config);
            if let Some(t) = trials {
                let mut v = config.validate();
                v.trials = *t;
                config.validate = Some(v);
            }
            let out = config.output_dir(&cli.out_root, "validate");
            run_experiment(&config, &out).map(|_| ())
        }
    }
}

fn report(e: &CliError) -> ExitCode {
    let message = e.to_string().replace('\n', " ");
    eprintln!("error: {message}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
