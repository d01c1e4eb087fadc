use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ste_harness::config::{load_json, load_value, PolicySpec, RunConfig, SweepConfig, TrainConfig};
use ste_harness::export::{export_run, export_sweep};
use ste_harness::train::run_training;
use ste_harness::{run_cell, run_sweep, HarnessError, Result};

#[derive(Parser)]
#[command(name = "ste", version, about = "Gas-source term estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one policy on seeded held-out scenarios.
    Run {
        #[arg(long)]
        policy: PolicySpec,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Base configuration; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run episodes on all cores.
        #[arg(long)]
        parallel: bool,
    },
    /// Run every cell of a policy x particles x threshold grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a Q-network with the self-reward loop.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the version.
    Version,
}

#[allow(clippy::too_many_arguments)]
fn run(
    policy: PolicySpec,
    particles: Option<usize>,
    zeta: Option<f64>,
    episodes: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    config: Option<&Path>,
    parallel: bool,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let mut value = load_value(p)?;
            if let Some(obj) = value.as_object_mut() {
                obj.entry("policy").or_insert_with(|| policy.to_string().into());
            }
            serde_json::from_value::<RunConfig>(value)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::new(policy.clone()),
    };
    cfg.policy = policy;
    if let Some(n) = particles {
        cfg.n_particles = n;
    }
    if let Some(z) = zeta {
        cfg.cessation_threshold = z;
    }
    if let Some(e) = episodes {
        cfg.n_episodes = e;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.parallel |= parallel;
    cfg.output_dir = Some(out.to_path_buf());
    cfg.validate()?;
    let cell = run_cell(&cfg)?;
    let s = &cell.summary;
    println!(
        "{} N={} zeta={}: SR {:.3} ± {:.3}, MTD {}, mean steps {:.1}",
        cfg.policy,
        cfg.n_particles,
        cfg.cessation_threshold,
        s.sr,
        s.sr_ci,
        s.mtd.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into()),
        s.mean_steps
    );
    export_run(out, cell)
}

fn sweep(config: &Path, out: &Path) -> Result<()> {
    let sweep: SweepConfig = load_json(config)?;
    let cells = sweep.cells();
    for c in &cells {
        c.validate()?;
    }
    let outcomes = run_sweep(&cells);
    for o in &outcomes {
        match &o.result {
            Ok(r) => println!("{}: SR {:.3}", o.config.cell_label(), r.summary.sr),
            Err(e) => eprintln!("{}: failed: {e}", o.config.cell_label()),
        }
    }
    export_sweep(out, &sweep, &outcomes)?;
    match outcomes.iter().find_map(|o| o.result.as_ref().err()) {
        Some(e) => Err(HarnessError::Runtime(format!(
            "at least one cell failed (see {}): {e}",
            out.join("failures.jsonl").display()
        ))),
        None => Ok(()),
    }
}

fn train(config: &Path, out: &Path) -> Result<()> {
    let cfg: TrainConfig = load_json(config)?;
    let outcome = run_training(&cfg, out)?;
    println!("checkpoint written to {}", outcome.checkpoint.display());
    if let Some(s) = outcome.evaluation {
        println!("greedy evaluation: SR {:.3} ± {:.3} over {} episodes", s.sr, s.sr_ci, s.episodes);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run {
            policy,
            particles,
            zeta,
            episodes,
            seed,
            out,
            config,
            parallel,
        } => run(policy, particles, zeta, episodes, seed, &out, config.as_deref(), parallel),
        Command::Sweep { config, out } => sweep(&config, &out),
        Command::Train { config, out } => train(&config, &out),
        Command::Version => {
            println!("ste {}", env!("CARGO_PKG_VERSION"));
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
