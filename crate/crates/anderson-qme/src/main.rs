use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use anderson_qme::config::Config;
use anderson_qme::runner::{self, ALGEBRA_TOL};
use anderson_qme::Error;

#[derive(Parser)]
#[command(name = "anderson-qme", version, about = "Memory kernels and time-local generators for the Anderson dot")]
struct Cli {
    /// worker threads for sweeps (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the superfermion and Liouvillian invariants
    AlgebraCheck {
        #[arg(short, long)]
        verbose: bool,
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// Evolve one configuration; writes trajectory CSV and manifest
    Propagate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Temperature sweep; writes heatmap CSV and manifest
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write sampled kernel orders
    DumpKernel {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write sampled generator orders
    DumpGenerator {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> anyhow::Result<Config> {
    Config::load(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::AlgebraCheck {
            verbose,
            inject_sign_flip,
        } => {
            let defects = runner::algebra_check(inject_sign_flip);
            let mut ok = true;
            for d in &defects {
                let pass = d.max_defect < ALGEBRA_TOL;
                ok &= pass;
                if verbose || !pass {
                    println!("{:<48} {:.3e} {}", d.name, d.max_defect, if pass { "ok" } else { "FAIL" });
                }
            }
            let worst = defects.iter().map(|d| d.max_defect).fold(0.0, f64::max);
            println!("algebra-check: {} invariants, max defect {worst:.3e}, {}", defects.len(), if ok { "ok" } else { "FAILED" });
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Propagate { config } => {
            let cfg = load(&config)?;
            let (manifest, run) = runner::propagate(&cfg)?;
            println!("wrote {} (max trace defect {:.2e})", manifest.display(), run.record.max_trace_defect());
            if let Some(fp) = run.fixed_point {
                println!("fixed point: {} iterations, residual {:.3e}", fp.iterations, fp.final_residual);
            }
            if let Some(v) = run.validity {
                if let (false, Some(t)) = (v.within_validity, v.monitor_limit_t) {
                    println!("warning: convergence monitor reaches 1 at t = {t}; time-local result is outside its validity window");
                }
            }
        }
        Command::Sweep { config } => {
            let cfg = load(&config)?;
            let (manifest, rows) = runner::sweep(&cfg)?;
            println!("wrote {} ({} rows)", manifest.display(), rows.len());
        }
        Command::DumpKernel { config } => {
            let cfg = load(&config)?;
            println!("wrote {}", runner::dump_kernel(&cfg)?.display());
        }
        Command::DumpGenerator { config } => {
            let cfg = load(&config)?;
            println!("wrote {}", runner::dump_generator(&cfg)?.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
