//! Command-line front end: `analyze`, `simulate` and `trace`.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{ChannelError, ScriptedLink, Trace};
use crate::coding;
use crate::sim::{self, ExperimentConfig, Protocol, ProtocolSelect, RunOptions, SimError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "ncbwt",
    version,
    about = "Block-wise transfer with and without network coding: analytics, simulation, traces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form expected additional blocks over a parameter grid (CSV).
    Analyze(GridArgs),
    /// Monte-Carlo simulation alongside the closed form (CSV).
    Simulate(SimulateArgs),
    /// Replay a scripted loss trace and print a per-round transcript.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Bwt,
    Nc,
    Both,
}

impl From<ProtocolArg> for ProtocolSelect {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Bwt => ProtocolSelect::Bwt,
            ProtocolArg::Nc => ProtocolSelect::Nc,
            ProtocolArg::Both => ProtocolSelect::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Resource size R in bytes (512 KB, counting 1 KB as 1000 bytes).
    #[arg(long, default_value_t = 512_000)]
    pub resource_bytes: usize,

    /// Block size B in bytes; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',', default_values_t = [256, 512, 1024])]
    pub block_bytes: Vec<usize>,

    /// Total round loss probability p; repeatable. Overrides --p-range.
    #[arg(long = "p", value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Vec<f64>,

    /// Loss grid as LO:HI:STEP, inclusive.
    #[arg(long, default_value = "0:0.9:0.05")]
    pub p_range: String,

    /// Forward share alpha of the loss; repeatable.
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.7, 1.0])]
    pub alpha: Vec<f64>,

    /// Protocols to report.
    #[arg(long, value_enum, default_value_t = ProtocolArg::Both)]
    pub protocol: ProtocolArg,

    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub grid: GridArgs,

    /// Transfers simulated per grid point; 0 leaves the simulation columns empty.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,

    /// Base seed; every trial derives its own seed from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Trace of D/L tokens; the bundled five-block walkthrough when omitted.
    #[arg(long)]
    pub trace_file: Option<PathBuf>,

    /// Protocols to replay on the trace.
    #[arg(long, value_enum, default_value_t = ProtocolArg::Both)]
    pub protocol: ProtocolArg,

    /// Resource size in bytes (five 1024-byte blocks by default).
    #[arg(long, default_value_t = 5120)]
    pub resource_bytes: usize,

    /// Block size in bytes.
    #[arg(long, default_value_t = 1024)]
    pub block_bytes: usize,

    /// Seed for the resource contents and random coefficients.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Result<Vec<f64>, _> = parts.iter().map(|x| x.trim().parse::<f64>()).collect();
    match nums.as_deref() {
        Ok([lo, hi, step]) => Ok(sim::p_range(*lo, *hi, *step)?),
        _ => Err(CliError::Usage(format!(
            "--p-range expects LO:HI:STEP, got {s:?}"
        ))),
    }
}

impl GridArgs {
    fn config(&self, trials: usize, seed: u64) -> Result<ExperimentConfig, CliError> {
        let p_grid = if self.p.is_empty() {
            parse_range(&self.p_range)?
        } else {
            self.p.clone()
        };
        Ok(ExperimentConfig {
            resource_bytes: self.resource_bytes,
            block_bytes: self.block_bytes.clone(),
            p_grid,
            alphas: self.alpha.clone(),
            trials,
            seed,
            protocol: self.protocol.into(),
        })
    }

    fn emit(&self, csv: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, csv)?,
            None => stdout.write_all(csv.as_bytes())?,
        }
        Ok(())
    }
}

pub fn cmd_analyze(args: &GridArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.config(0, 0)?;
    let rows = sim::sweep(&cfg)?;
    args.emit(&sim::to_csv(&rows), stdout)
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.grid.config(args.trials, args.seed)?;
    let rows = sim::sweep(&cfg)?;
    args.grid.emit(&sim::to_csv(&rows), stdout)
}

/// Transcript of one protocol replaying `trace`.
pub fn trace_transcript(
    protocol: Protocol,
    trace: &Trace,
    resource_bytes: usize,
    block_bytes: usize,
    seed: u64,
) -> Result<String, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; resource_bytes];
    rng.fill_bytes(&mut bytes);
    let resource = coding::split_resource(&bytes, block_bytes).map_err(SimError::from)?;
    let mut link = ScriptedLink::new(trace.clone());
    let mut lines = vec![format!(
        "== {protocol}: {} blocks of {block_bytes} bytes",
        resource.n_blocks()
    )];
    let mut observe = |r: &sim::RoundRecord| lines.push(r.to_string());
    let result = sim::run_transfer(
        protocol,
        &resource,
        &mut link,
        RunOptions {
            rlnc_seed: rng.next_u64(),
            observer: Some(&mut observe),
            ..RunOptions::default()
        },
    )?;
    lines.push(format!(
        "== {protocol}: {} transmissions, {} additional, {} trace tokens used, resource delivered intact",
        result.tx_total,
        result.additional,
        link.consumed()
    ));
    Ok(lines.join("\n") + "\n")
}

pub fn cmd_trace(args: &TraceArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let trace = match &args.trace_file {
        Some(path) => Trace::load(path)?,
        None => crate::WALKTHROUGH_TRACE.parse()?,
    };
    let select: ProtocolSelect = args.protocol.into();
    for &protocol in select.protocols() {
        let text = trace_transcript(
            protocol,
            &trace,
            args.resource_bytes,
            args.block_bytes,
            args.seed,
        )?;
        stdout.write_all(text.as_bytes())?;
    }
    Ok(())
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, stdout),
        Command::Simulate(s) => cmd_simulate(s, stdout),
        Command::Trace(t) => cmd_trace(t, stdout),
    }
}
