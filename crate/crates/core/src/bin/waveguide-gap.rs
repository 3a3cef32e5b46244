use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use waveguide_gap::experiment::Experiment;
use waveguide_gap::Error;

/// Band gaps of periodically perforated Dirichlet waveguides.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the Floquet solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Eigensolver seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-section eigenvalues, normal derivative and gap condition.
    CrossSection,
    /// Polarization coefficient of the cavern.
    Polarization,
    /// Band diagrams for every configured cavern scale.
    Bands,
    /// Measured first gap against the asymptotic length over all scales.
    GapScan,
    /// Runs the configured verification checks.
    Verify,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) => 2,
        Error::NumericalBreakdown(_) | Error::Precondition(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    let path = cli
        .config
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let exp = Experiment::from_path(&path, cli.out, cli.seed)?;
    match cli.command {
        Command::CrossSection => {
            let r = exp.run_cross_section()?;
            println!(
                "M = {:?}",
                r.extrapolated.as_ref().unwrap_or(&r.levels.last().unwrap().eigenvalues)
            );
            println!("dnV1 = {:.6}", r.normal_derivative);
            println!("gap_condition_ok = {}", r.gap_condition_ok);
            println!("period_threshold = {:.6}", r.period_threshold);
        }
        Command::Polarization => {
            let r = exp.run_polarization()?;
            println!("P_theta = {:.6}", r.p_theta);
        }
        Command::Bands => {
            let r = exp.run_bands()?;
            for e in &r.entries {
                println!("h = {}: bands {:?}, gaps {:?}", e.h, e.gaps.bands, e.gaps.gaps);
            }
        }
        Command::GapScan => {
            let r = exp.run_gap_scan()?;
            println!("{:>6} {:>14} {:>14} {:>8}", "h", "l_measured", "l_predicted", "ratio");
            for row in &r.rows {
                match (row.l_measured, row.ratio) {
                    (Some(l), Some(q)) => println!("{:>6} {l:>14.6e} {:>14.6e} {q:>8.4}", row.h, row.l_predicted),
                    _ => println!(
                        "{:>6} {:>14} {:>14.6e} {:>8}   {}",
                        row.h,
                        "-",
                        row.l_predicted,
                        "-",
                        row.error.as_deref().unwrap_or("no gap above the first band")
                    ),
                }
            }
            if let Some(f) = &r.slope {
                println!("slope = {:.4} (95% CI {:?})", f.slope, f.slope_ci95);
            }
        }
        Command::Verify => {
            let r = exp.run_verify()?;
            for o in &r.outcomes {
                let tag = match (o.passed, o.skipped) {
                    (_, true) => "SKIP",
                    (true, _) => "PASS",
                    (false, _) => "FAIL",
                };
                println!("{tag} {:?}: {}", o.check, o.detail);
            }
            return Ok(r.all_passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
