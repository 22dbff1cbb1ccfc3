//! The `tp` command line.
//!
//! Exit codes: 0 success, 1 runtime error or failed self-test, 2 usage or
//! input error, 3 inequality chain violated in `pair`, 4 reconstruction
//! failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::io::{parse_map_spec, parse_state, read_to_string, to_json_pretty, MapSpec};
use crate::reconstruct::{
    audit_preserver_with, counterexample_map, pure_state_map, reconstruct_from_p0_with, reconstruct_from_pr_with,
    reconstruct_wigner_with, AuditOptions, ReconstructOptions, StateMapOracle,
};
use crate::selftest::run_selftest;
use crate::states::{d1, NormalState};
use crate::tol::{ISO_EQ, RESIDUAL, ZERO_TEST};
use crate::transition::audit_pair;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CHAIN: i32 = 3;
pub const EXIT_RECONSTRUCT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "tp",
    version,
    about = "Transition probabilities and Jordan map reconstruction"
)]
pub struct CliConfig {
    /// Tolerance override KEY=VALUE (keys: zero_test, preserve, residual).
    #[arg(long = "tol", value_name = "KEY=VALUE", global = true)]
    pub tolerances: Vec<String>,

    /// Write the JSON result here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition probabilities and metrics of two states.
    Pair { a: PathBuf, b: PathBuf },
    /// Audit a state map for the preservation properties.
    Audit {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=256))]
        jobs: u64,
    },
    /// Reconstruct the Jordan *-isomorphism behind a state map.
    Reconstruct {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the built-in counterexample map spec and print its d1 witnesses.
    Counterexample {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..=64))]
        dim: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every invariant suite.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    P0,
    Pr,
    Wigner,
}

#[derive(Clone, Debug, PartialEq)]
struct Tolerances {
    zero_test: f64,
    preserve: f64,
    residual: f64,
}

fn parse_tolerances(items: &[String]) -> Result<Tolerances> {
    let mut t = Tolerances {
        zero_test: ZERO_TEST,
        preserve: ISO_EQ,
        residual: RESIDUAL,
    };
    for item in items {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| invalid(format!("tolerance override {item:?} is not KEY=VALUE")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| invalid(format!("tolerance value {value:?} is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(format!("tolerance {key} must be finite and nonnegative")));
        }
        match key.trim() {
            "zero_test" => t.zero_test = v,
            "preserve" => t.preserve = v,
            "residual" => t.residual = v,
            other => return Err(invalid(format!("unknown tolerance key {other:?}"))),
        }
    }
    Ok(t)
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: i32,
    error: Error,
}

fn input<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|error| Failure {
        code: EXIT_INPUT,
        error,
    })
}

fn runtime<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|error| Failure {
        code: EXIT_FAILURE,
        error,
    })
}

fn load_state(path: &Path) -> Result<NormalState> {
    parse_state(&read_to_string(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_oracle(path: &Path) -> Result<StateMapOracle> {
    match parse_map_spec(&read_to_string(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))? {
        MapSpec::Jordan(theta) => Ok(StateMapOracle::from_jordan_predual(&theta)),
        MapSpec::Counterexample { dim } => counterexample_map(dim),
    }
}

#[derive(Serialize)]
struct CounterexampleWitness {
    t: f64,
    d1_before: f64,
    d1_after: f64,
}

#[derive(Serialize)]
struct CounterexampleSummary {
    dim: usize,
    map_spec: serde_json::Value,
    witnesses: Vec<CounterexampleWitness>,
}

fn counterexample_summary(dim: usize) -> Result<CounterexampleSummary> {
    let phi = counterexample_map(dim)?;
    let a = phi.source().clone();
    let diag = |t: f64| {
        let mut m = crate::linalg::CMatrix::zeros(dim, dim);
        m[(0, 0)] = num_complex::Complex64::new(t, 0.0);
        m[(1, 1)] = num_complex::Complex64::new(1.0 - t, 0.0);
        NormalState::new(&a, vec![m])
    };
    let pure = diag(1.0)?;
    let witnesses = [0.1, 0.25, 0.5, 0.75, 0.9]
        .into_iter()
        .map(|t| {
            let mu_t = diag(t)?;
            Ok(CounterexampleWitness {
                t,
                d1_before: d1(&pure, &mu_t)?,
                d1_after: d1(&phi.forward(&pure)?, &phi.forward(&mu_t)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CounterexampleSummary {
        dim,
        map_spec: serde_json::json!({ "builtin": "counterexample", "dim": dim }),
        witnesses,
    })
}

fn execute(config: &CliConfig) -> std::result::Result<(String, i32), Failure> {
    let tol = input(parse_tolerances(&config.tolerances))?;
    match &config.command {
        Command::Pair { a, b } => {
            let mu = input(load_state(a))?;
            let nu = input(load_state(b))?;
            let report = input(audit_pair(&mu, &nu))?;
            let code = if report.chain_ok { EXIT_OK } else { EXIT_CHAIN };
            Ok((runtime(to_json_pretty(&report))?, code))
        }
        Command::Audit {
            map,
            samples,
            seed,
            jobs,
        } => {
            let phi = input(load_oracle(map))?;
            let options = AuditOptions {
                sample_size: *samples as usize,
                seed: *seed,
                jobs: *jobs as usize,
                preserve_tol: tol.preserve,
                zero_tol: tol.zero_test,
            };
            let report = runtime(audit_preserver_with(&phi, &options))?;
            Ok((runtime(to_json_pretty(&report))?, EXIT_OK))
        }
        Command::Reconstruct { map, mode, seed } => {
            let phi = input(load_oracle(map))?;
            let options = ReconstructOptions {
                seed: *seed,
                residual_tol: tol.residual,
                ..ReconstructOptions::default()
            };
            let report = match mode {
                Mode::P0 => runtime(reconstruct_from_p0_with(&phi, &options))?,
                Mode::Pr => runtime(reconstruct_from_pr_with(&phi, &options))?,
                Mode::Wigner => {
                    let n = phi.source().block_dims()[0];
                    let vector_map = input(pure_state_map(&phi))?;
                    runtime(reconstruct_wigner_with(vector_map, n, &options))?
                }
            };
            let code = if report.succeeded() { EXIT_OK } else { EXIT_RECONSTRUCT };
            Ok((runtime(to_json_pretty(&report))?, code))
        }
        Command::Counterexample { dim, out } => {
            let summary = runtime(counterexample_summary(*dim as usize))?;
            if let Some(path) = out {
                let spec = runtime(to_json_pretty(&summary.map_spec))?;
                runtime(std::fs::write(path, spec + "\n").map_err(Error::from))?;
            }
            Ok((runtime(to_json_pretty(&summary))?, EXIT_OK))
        }
        Command::Selftest { seed, samples } => {
            let summary = runtime(run_selftest(*seed, *samples as usize))?;
            let code = if summary.passed { EXIT_OK } else { EXIT_FAILURE };
            Ok((runtime(to_json_pretty(&summary))?, code))
        }
    }
}

/// Parse `args` (including the program name), run the command, write JSON
/// to `stdout` (or `--output`) and diagnostics to `stderr`. Returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match CliConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&config) {
        Ok((json, code)) => {
            let written = match &config.output {
                Some(path) => std::fs::write(path, json + "\n"),
                None => writeln!(stdout, "{json}"),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "tp: cannot write output: {e}");
                return EXIT_FAILURE;
            }
            code
        }
        Err(Failure { code, error }) => {
            let _ = writeln!(stderr, "tp: {error}");
            code
        }
    }
}
