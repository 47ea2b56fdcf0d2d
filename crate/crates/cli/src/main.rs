// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! `nrdisp`: simulate measurement protocols, extract effective parameters
//! and cross-check against the Lindblad oracle.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nrdisp_core::experiments::ProtocolConfig;
use nrdisp_core::Error;

use commands::{CompareRun, ExtractRun, SimulateRun};
use config::{parse_detunings, ParamSource, RunConfig};

/// Worker-count override for the thread pool.
const WORKERS_ENV: &str = "NRDISP_WORKERS";

#[derive(Parser)]
#[command(name = "nrdisp", version, about = "Non-reciprocal dispersive qubit-cavity simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a virtual measurement protocol and write CSV plus a JSON sidecar.
    Simulate(SimulateArgs),
    /// Invert a measurement set, optionally with Monte-Carlo uncertainties.
    Extract(ExtractArgs),
    /// Compare semiclassical dynamics with the Lindblad oracle.
    CompareOracle(CompareArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Named preset (device-a, device-b, reciprocal).
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with effective parameters or a multimode network.
    #[arg(long)]
    params: Option<PathBuf>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// qubit-ramsey, cavity-ramsey, cavity-t1, photon-calibration,
    /// measurement-set, cw-sweep or fwm.
    #[arg(long)]
    protocol: Option<String>,
    /// JSON ProtocolConfig file.
    #[arg(long)]
    protocol_config: Option<PathBuf>,
    /// semiclassical or oracle.
    #[arg(long)]
    backend: Option<String>,
    /// Noise RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate both backends where supported.
    #[arg(long)]
    cross_check: bool,
    /// Initial mean photon number.
    #[arg(long)]
    n0: Option<f64>,
    /// Oracle Fock truncation.
    #[arg(long)]
    n_max: Option<usize>,
    /// CW drive amplitude (cyclic MHz).
    #[arg(long)]
    epsilon: Option<f64>,
    /// CW detunings: START:STOP:COUNT or a comma list (cyclic MHz).
    #[arg(long, allow_hyphen_values = true)]
    detunings: Option<String>,
}

#[derive(Args)]
struct ExtractArgs {
    /// MeasurementSet JSON.
    measurements: PathBuf,
    /// 0 gives the point estimate only.
    #[arg(long, default_value_t = nrdisp_core::extraction::DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 3.0)]
    n0: f64,
    #[arg(long, default_value_t = nrdisp_core::oracle::DEFAULT_N_MAX)]
    n_max: usize,
    /// End of the comparison window (µs).
    #[arg(long, default_value_t = 2.0)]
    t_end: f64,
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::InvalidNetwork(_) | Error::Io(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Resolves the parameter source; with none given anywhere, `device-a`.
fn resolve_source(args: &SourceArgs, file: &RunConfig) -> Result<config::ResolvedSource, Failure> {
    let mut flags = Vec::new();
    if let Some(p) = &args.preset {
        flags.push(ParamSource::Preset(p.clone()));
    }
    if let Some(path) = &args.params {
        flags.push(ParamSource::from_file(path)?);
    }
    let source = match flags.len() {
        0 => file.source()?.unwrap_or_else(|| ParamSource::Preset("device-a".into())),
        1 => flags.pop().expect("one source"),
        _ => {
            return Err(Error::InvalidParameter("give either --preset or --params, not both".into()).into());
        }
    };
    Ok(source.resolve()?)
}

fn load_config(args: &SourceArgs) -> Result<RunConfig, Failure> {
    match &args.config {
        Some(path) => Ok(RunConfig::from_file(path)?),
        None => Ok(RunConfig::default()),
    }
}

fn run_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let file = load_config(&a.source)?;
    let source = resolve_source(&a.source, &file)?;
    let protocol = a
        .protocol
        .or(file.protocol.clone())
        .ok_or_else(|| Error::InvalidParameter(format!(
            "--protocol is required (one of {})",
            commands::PROTOCOLS.join(", ")
        )))?;
    let mut cfg = match &a.protocol_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
        None => file.protocol_config.unwrap_or_else(|| ProtocolConfig {
            chi_a: source.chi_a.unwrap_or(ProtocolConfig::default().chi_a),
            ..ProtocolConfig::default()
        }),
    };
    if let Some(b) = a.backend.as_deref() {
        cfg.backend = commands::parse_backend(b)?;
    } else if let Some(b) = file.backend {
        cfg.backend = b;
    }
    if let Some(s) = a.seed.or(file.seed) {
        cfg.rng_seed = s;
    }
    if let Some(n0) = a.n0 {
        cfg.n0 = n0;
    }
    let mut cw = file.cw.clone().unwrap_or_default();
    let mut fwm = file.fwm.unwrap_or_default();
    if let Some(n) = a.n_max {
        cfg.n_max = n;
        cw.n_max = n;
        fwm.n_max = n;
    }
    if let Some(e) = a.epsilon {
        cw.epsilon_mhz = e;
    }
    if let Some(d) = a.detunings.as_deref() {
        cw.detunings_mhz = parse_detunings(d)?;
    }
    if protocol == "cw-sweep" && cw.detunings_mhz.is_empty() {
        return Err(Error::InvalidParameter(
            "detuning list is empty; use --detunings START:STOP:COUNT or a comma-separated list".into(),
        )
        .into());
    }
    cfg.validate()?;
    let run = SimulateRun {
        protocol,
        source,
        protocol_config: cfg,
        cross_check: a.cross_check,
        cw,
        fwm,
        out: a.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
    };
    for path in commands::simulate(&run)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run_extract(a: ExtractArgs) -> Result<(), Failure> {
    let run = ExtractRun {
        measurements: a.measurements,
        mc_samples: a.mc_samples,
        seed: a.seed,
        out: a.out,
    };
    for path in commands::extract_cmd(&run)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run_compare(a: CompareArgs) -> Result<(), Failure> {
    let file = load_config(&a.source)?;
    let source = resolve_source(&a.source, &file)?;
    let run = CompareRun {
        source,
        n0: a.n0,
        n_max: a.n_max,
        t_end: a.t_end,
        points: a.points,
        tolerance: a.tolerance,
        out: a.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
    };
    let (path, pass) = commands::compare_oracle(&run)?;
    println!("{}", path.display());
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(())
}

fn configure_workers() -> Result<(), Failure> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: 2,
            message: format!("thread pool: {e}"),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Extract(a) => run_extract(a),
        Command::CompareOracle(a) => run_compare(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nrdisp: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

