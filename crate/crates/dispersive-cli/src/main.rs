//! Single command-line entry point wiring run configurations to the
//! computational modules.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 resolution/divergence
//! errors, 4 spectral obstructions, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "dispersive", about = "Kato norms, Birman-Schwinger scans, spherical-means families, Wiener inversion, and dispersive decay fits")]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count override (0 = automatic).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Tolerance override for scan thresholds and inversion targets.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kato norm report (global, local, distal).
    Kato,
    /// Resonance scan plus weighted resolvent decay.
    Scan {
        /// Override the scan ceiling.
        #[arg(long)]
        lambda_max: Option<f64>,
        /// Depth sweep `a:b:n` of the zero-energy invertibility.
        #[arg(long)]
        depth_sweep: Option<String>,
    },
    /// Spherical-means norms and Fourier consistency.
    Tmop {
        #[arg(long)]
        rho_max: Option<f64>,
    },
    /// Wiener algebra self-tests and optional inversion of an element file.
    Wiener {
        /// JSON element to invert.
        #[arg(long)]
        element: Option<PathBuf>,
    },
    /// Spectral split and dispersive decay fit on the configured box.
    Evolve,
    /// Full acceptance suite.
    VerifyAll,
    /// Print an example configuration to stdout.
    ExampleConfig,
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required for this subcommand"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(tol) = cli.tol {
        if tol <= 0.0 {
            anyhow::bail!("--tol must be positive");
        }
        cfg.tolerances.scan_threshold = tol;
        cfg.tolerances.eps_target = tol;
    }
    if cfg.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    Ok(cfg)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<dispersive::Error>() {
        return match e {
            dispersive::Error::Resolution(_) | dispersive::Error::Divergence(_) => 3,
            dispersive::Error::SpectralObstruction { .. } => 4,
            dispersive::Error::InvalidInput(_) | dispersive::Error::MemoryGuard(_) => 2,
            _ => 1,
        };
    }
    2
}

fn parse_sweep(s: &str) -> anyhow::Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        anyhow::bail!("--depth-sweep expects a:b:n");
    }
    let a: f64 = parts[0].parse()?;
    let b: f64 = parts[1].parse()?;
    let n: usize = parts[2].parse()?;
    if n < 2 || b <= a {
        anyhow::bail!("--depth-sweep needs b > a and n >= 2");
    }
    Ok((a, b, n))
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if matches!(cli.command, Command::ExampleConfig) {
        println!("{}", serde_json::to_string_pretty(&RunConfig::example())?);
        return Ok(ExitCode::SUCCESS);
    }
    let mut cfg = load_config(cli)?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    let outcome = match &cli.command {
        Command::Kato => commands::run_kato(&cfg, &out_dir)?,
        Command::Scan { lambda_max, depth_sweep } => {
            if let Some(m) = lambda_max {
                cfg.lambda_scan.max = *m;
            }
            if let Some(sweep) = depth_sweep {
                let (a, b, n) = parse_sweep(sweep)?;
                commands::run_depth_sweep(&cfg, &out_dir, a, b, n)?
            } else {
                commands::run_scan(&cfg, &out_dir)?
            }
        }
        Command::Tmop { rho_max } => {
            if let Some(r) = rho_max {
                cfg.rho_grid.rho_max = *r;
            }
            commands::run_tmop(&cfg, &out_dir)?
        }
        Command::Wiener { element } => commands::run_wiener(&cfg, &out_dir, element.as_deref())?,
        Command::Evolve => commands::run_evolve(&cfg, &out_dir)?,
        Command::VerifyAll => {
            let (outcome, all_passed) = commands::run_verify_all(&cfg, &out_dir)?;
            commands::write_effective_config(&cfg, &out_dir)?;
            println!("{}", outcome.summary);
            return Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::ExampleConfig => unreachable!(),
    };
    commands::write_effective_config(&cfg, &out_dir)?;
    println!("{}", outcome.summary);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
