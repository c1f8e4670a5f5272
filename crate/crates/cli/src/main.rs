//! `xtalk-pqc`: characterize device crosstalk, schedule entangling layers,
//! build and evaluate ansatz families, and run VQE from the command line.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::error;
use serde::{Deserialize, Serialize};
use xtalk_pqc::Error;

pub use commands::*;

#[derive(Parser, Debug)]
#[command(name = "xtalk-pqc", version, about = "Crosstalk-aware approximation of hardware-efficient ansatze")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Common {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (or file for build-ansatz and schedule).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Device JSON; the shipped 16-qubit device when omitted.
    #[arg(long, global = true)]
    pub device: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "XTALK_PQC_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Measure independent and conditional cx error rates by (simultaneous) IRB.
    Characterize(CharacterizeArgs),
    /// Schedule the first entangling block of a circuit into sub-layers.
    Schedule(ScheduleArgs),
    /// Emit an ansatz circuit in text form.
    BuildAnsatz(BuildArgs),
    /// Evaluate families over a grid of layer counts.
    Sweep(SweepArgs),
    /// Minimize a Pauli Hamiltonian with SPSA.
    Vqe(VqeArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    seed: u64,
    device: Option<PathBuf>,
    #[serde(flatten)]
    command: Command,
}

pub fn write_manifest(path: &Path, common: &Common, command: &Command) -> Result<()> {
    let m = Manifest {
        tool: "xtalk-pqc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: common.seed,
        device: common.device.clone(),
        command: command.clone(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(common: &Common, command: &Command) -> Result<()> {
    match command {
        Command::Characterize(a) => characterize(common, a),
        Command::Schedule(a) => schedule(common, a),
        Command::BuildAnsatz(a) => build_ansatz(common, a),
        Command::Sweep(a) => sweep(common, a),
        Command::Vqe(a) => vqe(common, a),
        Command::Replay(a) => {
            let text = std::fs::read_to_string(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
            let m: Manifest = serde_json::from_str(&text).map_err(Error::from)?;
            if matches!(m.command, Command::Replay(_)) {
                return Err(Error::InvalidArgument("a manifest cannot replay another replay".into()).into());
            }
            let common = Common { seed: m.seed, out: common.out.clone(), device: m.device, threads: common.threads };
            run(&common, &m.command)
        }
    }
}

/// 1 for numerical or fit failures, 2 for bad input.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::FitQuality(_) | Error::PairFit { .. } | Error::NonFinite(_)) => 1,
        Some(_) => 2,
        None if err.chain().any(|e| e.downcast_ref::<NumericalFailure>().is_some()) => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("could not size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
