use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gelfusion::data_io::{load_checkpoint, load_dataset};
use gelfusion::fusion::Variant;
use gelfusion::harness::{self, RunConfig};
use gelfusion::simenv::{Outcome, Task};

#[derive(Parser)]
#[command(name = "gelfusion", version, about = "Visuotactile diffusion policy experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// key=value run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    task: Option<Task>,
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Number of demonstrations
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset directory, episode file (inspect) or metrics CSV (plot)
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Checkpoint file
    #[arg(long, global = true)]
    ckpt: Option<PathBuf>,
    /// Frame index for inspect
    #[arg(long, global = true)]
    frame: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate scripted expert demonstrations
    GenDemos,
    /// Train a policy on a demonstration set
    Train,
    /// Evaluate a checkpoint in closed loop
    Eval,
    /// Train and evaluate every ablation arm
    Suite,
    /// Dump frames, residuals and contact events of one episode
    Inspect,
    /// Render bar charts from a metrics CSV
    Plot,
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("missing --{flag}"))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = cli.task {
        cfg.policy.task = t;
    }
    if let Some(v) = cli.variant {
        cfg.policy.variant = v;
    }
    if let Some(n) = cli.n {
        cfg.n_demos = n;
    }
    if let Some(e) = cli.episodes {
        cfg.episodes = e;
    }
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
        cfg.demo_seed0 = s;
    }
    cfg.finalize()?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));

    match cli.cmd {
        Cmd::GenDemos => {
            let m = harness::gen_demos(cfg.task(), cfg.n_demos, cfg.demo_seed0, &cfg.env, &out)?;
            println!("wrote {} {} demos to {}", m.episodes.len(), m.task.as_str(), out.display());
        }
        Cmd::Train => {
            let data = load_dataset(&need(cli.data, "data")?)?;
            data.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
            std::fs::create_dir_all(&out)?;
            let label = harness::arm_label(cfg.policy.variant, cfg.policy.tactile_horizon);
            let ckpt = out.join(format!("{label}.gfck"));
            harness::train(&cfg, &data, &ckpt, &out.join(format!("{label}_loss.csv")))?;
            println!("wrote {}", ckpt.display());
        }
        Cmd::Eval => {
            let ckpt = load_checkpoint(&need(cli.ckpt, "ckpt")?)?;
            if cli.task.is_some_and(|t| t != ckpt.task()) {
                bail!("checkpoint was trained on {}", ckpt.task().as_str());
            }
            std::fs::create_dir_all(&out)?;
            let run_id = format!("eval-{}", cfg.eval_seed0);
            let s = harness::eval(&ckpt, cfg.policy.variant, cfg.episodes, cfg.eval_seed0, &run_id, Some(&out.join("metrics.csv")))?;
            println!("{}: success {:.3} over {} episodes", s.label, s.success_rate(), s.rows.len());
            for o in Outcome::ALL {
                println!("  {:<12}{}", o.as_str(), s.count(o));
            }
        }
        Cmd::Suite => {
            let report = harness::suite(&cfg, &need(cli.data, "data")?, &out, |m| eprintln!("{m}"))?;
            print!("{}", report.to_csv());
        }
        Cmd::Inspect => {
            let r = harness::inspect(&need(cli.data, "data")?, cli.frame.unwrap_or(0), &out)?;
            for p in r.images.iter().chain([&r.series, &r.events]) {
                println!("wrote {}", p.display());
            }
        }
        Cmd::Plot => {
            for p in harness::plot(&need(cli.data, "data")?, &out)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
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
