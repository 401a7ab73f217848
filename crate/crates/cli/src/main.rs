use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vfosa_core::harness::{
    compare_manifest, run_checks, run_experiment, ExperimentConfig, ValidateOptions,
};
use vfosa_core::VfosaError;

/// Seeded operator-splitting experiments.
#[derive(Parser, Debug)]
#[command(name = "vfosa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every (instance, method, seed) of a config and write traces plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores).
        #[arg(long, env = "VFOSA_THREADS", default_value_t = 0)]
        threads: usize,
    },
    /// Run the built-in invariant checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace the residual-inequality constant by a wrong formula.
        #[arg(long, hide = true)]
        fault_beta_bar: bool,
    },
    /// Summarize the traces listed in a manifest.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Exit 2 for invalid input, 1 for everything else that fails.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<VfosaError>() {
        Some(VfosaError::Config(_)) => 2,
        _ => 1,
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, threads: usize) -> Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    log::info!(
        "{}: {} method(s), {} seed(s), {} instance(s)",
        cfg.name,
        cfg.methods.len(),
        cfg.seeds.len(),
        cfg.instance_count()
    );
    let out = out.or_else(|| cfg.output_dir.clone()).ok_or_else(|| {
        VfosaError::Config("output_dir: not set in the config and no --out given".into())
    })?;
    let result = run_experiment(&cfg, &out, threads)?;
    let diverged = result.manifest.runs.iter().filter(|r| r.diverged).count();
    println!(
        "{} runs written to {}",
        result.manifest.runs.len(),
        out.display()
    );
    if diverged > 0 {
        println!("{diverged} run(s) diverged");
    }
    println!("manifest: {}", result.manifest_path.display());
    Ok(())
}

fn validate(seed: u64, fault_beta_bar: bool) -> bool {
    let opts = ValidateOptions {
        seed,
        beta_bar_override: fault_beta_bar
            .then_some(|lambda: f64, l_hat: f64, _rho: f64| lambda * (4.0 - l_hat * lambda) / 2.0),
    };
    let checks = run_checks(&opts);
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    failed == 0
}

fn compare(manifest: PathBuf) -> Result<()> {
    let (_, table) =
        compare_manifest(&manifest).with_context(|| format!("comparing {}", manifest.display()))?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            threads,
        } => run(config, out, threads),
        Command::Validate {
            seed,
            fault_beta_bar,
        } => {
            return if validate(seed, fault_beta_bar) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
        Command::Compare { manifest } => compare(manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
