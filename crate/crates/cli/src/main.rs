//! `puflab` command-line runner.

mod commands;
mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use puflab::attacks::AttackKind;
use puflab::compose::PufKind;
use puflab::delay::GateKind;
use puflab::error::PufError;

use emit::Format;

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub msg: String,
}

impl Fail {
    pub const CONFIG: u8 = 2;
    pub const MISSING: u8 = 3;
    pub const DIVERGED: u8 = 4;

    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: Self::CONFIG, msg: msg.into() }
    }

    pub fn missing(msg: impl Into<String>) -> Self {
        Self { code: Self::MISSING, msg: msg.into() }
    }
}

impl From<PufError> for Fail {
    fn from(e: PufError) -> Self {
        let code = match &e {
            PufError::Io(_) | PufError::Decode(_) => Self::MISSING,
            PufError::Divergence(_) => Self::DIVERGED,
            _ => Self::CONFIG,
        };
        Self { code, msg: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "puflab", version, about = "Simulate, pre-select, measure and attack arbiter-based PUFs")]
pub struct Cli {
    /// JSON experiment configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to the config, then 0).
    #[arg(long, global = true, env = "PUFLAB_SEED")]
    pub seed: Option<u64>,
    /// Output artifact path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads; all artifacts are identical for any value.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// Design overrides shared by the commands that build instances.
#[derive(Debug, Default, Args)]
pub struct DesignArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<PufKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_gate)]
    pub gate_kind: Option<GateKind>,
    #[arg(long)]
    pub gate_count: Option<u32>,
    #[arg(long)]
    pub gate_delay: Option<f64>,
    #[arg(long)]
    pub weight_sigma: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a PUF instance and write it as a model file.
    Instance {
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Generate a CRP dataset from a model file.
    Gen {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        repeats: Option<u32>,
        /// Keep only challenges that pass triple pre-selection.
        #[arg(long)]
        preselect: bool,
        /// Noise sigma for the stored repeats.
        #[arg(long)]
        eval_noise: Option<f64>,
        #[arg(long)]
        lcg_a: Option<u64>,
        #[arg(long)]
        lcg_g: Option<u64>,
        /// Also write the dataset as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Pre-select an unfiltered dataset; `--seed` must match the one used by `gen`.
    Select {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        repeats: Option<u32>,
        #[arg(long)]
        eval_noise: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// BER, uniqueness and randomness of a dataset or of model files.
    Metrics {
        /// Stored dataset to measure.
        #[arg(long, conflicts_with = "model")]
        input: Option<PathBuf>,
        /// Model file(s); more than one adds uniqueness across them.
        #[arg(long)]
        model: Vec<PathBuf>,
        /// Require a BER figure (fails on datasets without repeats).
        #[arg(long)]
        ber: bool,
        #[arg(long, default_value_t = 1000)]
        count: u64,
        #[arg(long, default_value_t = 10_000)]
        repeats: u32,
        #[arg(long)]
        preselect: bool,
        #[arg(long)]
        eval_noise: Option<f64>,
    },
    /// Modelling attacks: the lr/nn size harness, or es on a dataset.
    Attack {
        #[arg(value_parser = parse_attack)]
        attack: Option<AttackKind>,
        #[command(flatten)]
        design: DesignArgs,
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<u64>>,
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        test_size: Option<u64>,
        #[arg(long)]
        max_epochs: Option<u32>,
        /// Continue from the rows already in `--out` (JSON format).
        #[arg(long)]
        resume: bool,
        /// Dataset for the es attack.
        #[arg(long)]
        input: Option<PathBuf>,
        /// True model, used only to score the es attack.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Hardware cost table.
    Hwcost {
        /// The eight designs of the published comparison.
        #[arg(long)]
        paper_table: bool,
        /// Named design set (`paper`).
        #[arg(long)]
        preset: Option<String>,
        /// Designs as `kind:k:n`, e.g. `cdc:4:64`.
        #[arg(long = "design")]
        designs: Vec<String>,
        #[arg(long, default_value_t = 8.0)]
        ge_mux: f64,
        #[arg(long, default_value_t = 8.0)]
        ge_arbiter: f64,
        #[arg(long, default_value_t = 1.0)]
        ge_gate: f64,
    },
    /// Combined summary of one model: hardware, selection and reliability.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: u64,
        #[arg(long, default_value_t = 1000)]
        repeats: u32,
    },
}

fn parse_kind(s: &str) -> Result<PufKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "apuf" => Ok(PufKind::Apuf),
        "xor" => Ok(PufKind::Xor),
        "cdc" => Ok(PufKind::Cdc),
        _ => Err(format!("unknown kind {s:?} (apuf, xor, cdc)")),
    }
}

fn parse_gate(s: &str) -> Result<GateKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "not" => Ok(GateKind::Not),
        "and" => Ok(GateKind::And),
        _ => Err(format!("unknown gate kind {s:?} (not, and)")),
    }
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    match s {
        "lr" => Ok(AttackKind::Lr),
        "nn" => Ok(AttackKind::Nn),
        "es" => Ok(AttackKind::Es),
        _ => Err(format!("unknown attack {s:?} (lr, nn, es)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
