//! `mpbarrier` command-line experiments.
//!
//! Exit status: 0 when every verdict passes, 2 when a verdict fails, 1 on an
//! execution error.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use experiments::Kind;

#[derive(Parser)]
#[command(name = "mpbarrier", version, about = "Energy-barrier experiments on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Seed overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// p-energies and retraction growth.
    Energy(Common),
    /// Jacobian singularity cycle.
    Jacobian(Common),
    /// Ball construction trace and energy bounds.
    Balls(Common),
    /// Flat-norm oracle comparison on random 0-chains.
    Flatnorm(Common),
    /// Min-max width of a homology class.
    Width(Common),
    /// Hang-Lin path sweep and scaling fit.
    Hanglin(Common),
    /// Ginzburg-Landau string method and sandwich checks.
    Mountainpass(Common),
    /// Width-versus-barrier inequality pipeline.
    MainInequality(Common),
}

fn execute(kind: Kind, common: &Common) -> anyhow::Result<bool> {
    rayon::ThreadPoolBuilder::new().num_threads(common.threads).build_global()?;
    let cfg = config::Loaded::read(&common.config, common.seed)?;
    let mut out = output::Output::new(&common.out, &cfg.hash)?;
    let result = experiments::run(kind, &cfg, &mut out);
    out.finish(kind.name(), cfg.config.seed)?;
    result?;
    for v in &out.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.inequality);
    }
    Ok(out.all_pass())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, common) = match &cli.command {
        Command::Energy(c) => (Kind::Energy, c),
        Command::Jacobian(c) => (Kind::Jacobian, c),
        Command::Balls(c) => (Kind::Balls, c),
        Command::Flatnorm(c) => (Kind::FlatNorm, c),
        Command::Width(c) => (Kind::Width, c),
        Command::Hanglin(c) => (Kind::HangLin, c),
        Command::Mountainpass(c) => (Kind::MountainPass, c),
        Command::MainInequality(c) => (Kind::MainInequality, c),
    };
    match execute(kind, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
