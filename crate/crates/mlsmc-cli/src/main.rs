use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use mlsmc_cli::config::ExperimentConfig;
use mlsmc_cli::study::{self, EffectiveSettings};

#[derive(Parser)]
#[command(
    name = "mlsmc",
    about = "Multilevel SMC benchmarks: cost-vs-MSE studies, variance rates, reference truths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for replicate-parallel stages (default: all cores).
    /// Results are byte-identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured cost-vs-MSE study and write study.csv plus a
    /// study.json sidecar with truth, fitted rates, and timing.
    RunStudy { config: PathBuf },
    /// Estimate the per-level variance rate of the potentials and write
    /// variance_rate.json.
    VarianceRate { config: PathBuf },
    /// Compute the reference value of the target ratio and print it.
    ReferenceTruth { config: PathBuf },
    /// Check the exact finite-state identities of this build.
    CheckOracle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::RunStudy { config } => {
            let loaded = ExperimentConfig::load(&config)?;
            let settings = EffectiveSettings::resolve(&loaded, cli.workers, cli.out, cli.seed);
            let artifacts = study::run_study(&loaded, &settings)?;
            let s = &artifacts.summary;
            println!(
                "study: {} problem, {} epsilons, {} replicates, {} methods",
                s.problem,
                s.epsilons.len(),
                s.replicates,
                s.methods.len()
            );
            match (s.truth.exact, s.truth.standard_error) {
                (true, _) => println!("truth: {} (exact, level {})", s.truth.value, s.truth.level),
                (false, se) => println!(
                    "truth: {} (se {:.3e}, level {}, {} replicates)",
                    s.truth.value,
                    se.unwrap_or(f64::NAN),
                    s.truth.level,
                    s.truth.replicates.unwrap_or(0)
                ),
            }
            for m in &s.methods {
                match &m.cost_rate {
                    Some(fit) => println!(
                        "{:<18} cost rate {:+.3} (r^2 {:.4})",
                        m.method, fit.slope, fit.r_squared
                    ),
                    None => println!("{:<18} cost rate unavailable", m.method),
                }
            }
            println!("degenerate rows: {} / {}", s.degenerate_rows, s.total_rows);
            println!("wrote {}", artifacts.csv_path.display());
            println!("wrote {}", artifacts.sidecar_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::VarianceRate { config } => {
            let loaded = ExperimentConfig::load(&config)?;
            let settings = EffectiveSettings::resolve(&loaded, cli.workers, cli.out, cli.seed);
            let report = study::variance_rate(&loaded, &settings)?;
            for level in &report.levels {
                println!(
                    "level {:<2} h {:<12.6e} proxy {:.6e}{}",
                    level.level,
                    level.resolution,
                    level.proxy,
                    if level.usable { "" } else { "  (excluded)" }
                );
            }
            println!(
                "beta_hat {:+.4} (r^2 {:.4}, {} replicates of {} particles)",
                report.beta_hat, report.r_squared, report.replicates, report.particles
            );
            std::fs::create_dir_all(&settings.out_dir)?;
            let path = settings.out_dir.join("variance_rate.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ReferenceTruth { config } => {
            let loaded = ExperimentConfig::load(&config)?;
            let settings = EffectiveSettings::resolve(&loaded, cli.workers, cli.out, cli.seed);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(settings.workers)
                .build()?;
            let l_max = study::study_depth(&loaded)?;
            let problem = mlsmc_cli::problem::Problem::from_config(
                &loaded,
                study::truth_depth(&loaded, l_max),
            )?;
            let truth = study::compute_truth(&problem, &loaded, &settings, &pool)?;
            println!("{}", serde_json::to_string_pretty(&truth)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckOracle => {
            let lines = study::check_oracle();
            let mut all_pass = true;
            for line in &lines {
                let tag = if line.pass { "PASS" } else { "FAIL" };
                println!("[{tag}] {}: {}", line.name, line.detail);
                all_pass &= line.pass;
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
