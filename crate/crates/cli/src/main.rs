use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rann_dd::experiment::{self, median};
use rann_dd::RunConfig;

/// Overlapping-subdomain random-feature collocation solver with Schwarz
/// preconditioned Krylov methods.
#[derive(Parser)]
#[command(name = "rann-dd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once per seed and write summary.csv and residual histories.
    Run(Common),
    /// Dense eigenvalues of H^T H and of the preconditioned operator.
    Spectrum(Common),
    /// Repeat the run over the thresholds listed in [sweep].
    SweepTau(Common),
    /// Weak-scaling table over the levels listed in [scaling].
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Allow levels above the desk-scale cap.
        #[arg(long)]
        override_caps: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides the config and the environment).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of seeds (overrides run.seeds).
    #[arg(long, value_name = "K")]
    seeds: Option<usize>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(dir) = &self.out {
            cfg.run.output_dir = dir.clone();
        }
        if let Some(k) = self.seeds {
            cfg.run.seeds = k;
        }
        Ok(cfg.resolve()?)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let dir = cfg.run.output_dir.clone();
            let records = experiment::run(&cfg, Some(&dir))?;
            println!("{}", experiment::SUMMARY_HEADER);
            for r in &records {
                println!("{}", r.csv_row());
            }
            let col = |f: fn(&experiment::RunRecord) -> f64| median(&records.iter().map(f).collect::<Vec<_>>());
            println!(
                "median over {} seeds: DoF {} iter {} e_l2 {:.3e} e_l1n {:.3e}",
                records.len(),
                col(|r| r.dof as f64),
                col(|r| r.iterations as f64),
                col(|r| r.e_l2),
                col(|r| r.e_l1n)
            );
            println!("wrote {}", dir.display());
        }
        Command::Spectrum(common) => {
            let cfg = common.load()?;
            let dir = cfg.run.output_dir.clone();
            let c = experiment::spectrum(&cfg, Some(&dir))?;
            println!(
                "rank {} cond(HtH) {:.3e} cond(M^-1 HtH) {:.3e}",
                c.rank, c.cond_hth, c.cond_precond
            );
            println!("wrote {}", dir.display());
        }
        Command::SweepTau(common) => {
            let cfg = common.load()?;
            let dir = cfg.run.output_dir.clone();
            let rows = experiment::sweep_tau(&cfg, Some(&dir))?;
            println!("tau,DoF,cond_hth,cond_precond,iter,e_l2");
            for r in rows {
                println!(
                    "{:e},{},{:.3e},{:.3e},{},{:.3e}",
                    r.tau, r.dof, r.cond_hth, r.cond_precond, r.iterations, r.e_l2
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Scaling { common, override_caps } => {
            let cfg = common.load()?;
            let dir = cfg.run.output_dir.clone();
            let rows = experiment::scaling(&cfg, Some(&dir), override_caps)?;
            println!("n,precond,J,N,DoF,iter,max_iter,converged,e_l1n,t_precond,t_solve");
            for r in rows {
                println!(
                    "{},{},{}x{},{}x{},{},{},{},{}/{},{:.3e},{:.3},{:.3}",
                    r.level,
                    r.precond.name(),
                    r.subdomains_per_axis,
                    r.subdomains_per_axis,
                    r.points_per_axis,
                    r.points_per_axis,
                    r.dof,
                    r.iterations,
                    r.max_iter,
                    r.converged,
                    r.seeds,
                    r.e_l1n,
                    r.t_precond,
                    r.t_solve
                );
            }
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}
