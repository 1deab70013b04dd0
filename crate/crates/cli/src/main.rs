//! `qmod` — batch experiment runner for the hyperbolic quotient-space
//! toolkit. Reads a JSON experiment config, runs the named experiment
//! deterministically for the given seed, and writes a CSV table plus a
//! JSON summary.

mod config;
mod experiments;
mod report;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qmod", version, about = "Hyperbolic quotient-space experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// RNG seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Upper bound on internal parallelism. The current build runs
        /// single-threaded; results never depend on this value.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Audit a group definition file: fixed points, discontinuity counts,
    /// Lorentz-form residuals.
    AuditGroup {
        group: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample count for the audit.
        #[arg(long, default_value_t = 16)]
        samples: usize,
        /// Locality radius of the discontinuity count.
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => run_from_file(&config, out, seed, threads),
        Command::AuditGroup {
            group,
            out,
            samples,
            radius,
            seed,
        } => match peek_group_dimension(&group) {
            Err(e) => Err(e),
            Ok(n) => {
                let cfg = ExperimentConfig {
                    command: "group-audit".into(),
                    n,
                    group: Some(group),
                    field: None,
                    fields: None,
                    r0: None,
                    r0_list: None,
                    r1: None,
                    r2: None,
                    eps0: None,
                    eps_list: None,
                    delta_list: None,
                    m: None,
                    m_list: None,
                    seed,
                    budget: None,
                    samples: Some(samples),
                    directions: None,
                    grid: None,
                    tol: None,
                    t_max: None,
                    phi: None,
                    eta: None,
                    radius: Some(radius),
                    out,
                };
                execute(cfg, None, seed)
            }
        },
    };
    if let Err(e) = result {
        let code = experiments::exit_code_for(&e);
        eprintln!("qmod: error: {e:#}");
        std::process::exit(code);
    }
}

fn peek_group_dimension(path: &PathBuf) -> anyhow::Result<usize> {
    use anyhow::Context;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read group file {}", path.display()))?;
    let gf = qmod_core::mobius::GroupFile::parse(&text)?;
    Ok(gf.n)
}

fn run_from_file(
    path: &PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: usize,
) -> anyhow::Result<()> {
    use anyhow::Context;
    if threads == 0 {
        anyhow::bail!("--threads must be at least 1");
    }
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let cfg = ExperimentConfig::parse(&text)?;
    execute(cfg, out, seed)
}

fn execute(
    cfg: ExperimentConfig,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> anyhow::Result<()> {
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let out_dir = out_override
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("qmod-out"));
    let started = std::time::Instant::now();
    let (table, summary) = experiments::run_experiment(&cfg, seed)?;
    let runtime = started.elapsed().as_secs_f64();
    report::write_report(&out_dir, &cfg.command, &table, &summary, runtime)
        .map_err(|e| anyhow::anyhow!("cannot write report files: {e}"))?;
    println!(
        "{}: wrote {}.csv and {}_summary.json to {} ({}s)",
        cfg.command,
        cfg.command,
        cfg.command,
        out_dir.display(),
        report::fmt12(runtime)
    );
    if !summary.all_passed() {
        println!(
            "{}: some pass flags are false — see the summary",
            cfg.command
        );
    }
    Ok(())
}
