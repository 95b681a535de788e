//! Command-line front end. Results go to standard output, diagnostics to
//! standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::capacity::{additivity_check, maximize_rci, AscentOptions, CapacityResult};
use crate::channels::{parse_channel, Channel};
use crate::decouple::simultaneous_decoupling;
use crate::entropy::EntropyReport;
use crate::error::{Error, Result};
use crate::ibit::{build_alpha, verify_ibit_tol, TwistingFile, VERIFY_TOL};
use crate::io::{matrix_to_json, read_state, JsonMatrix, State, StateFile};
use crate::protosim::{run as run_script, to_standard_picture, ProtocolScript};
use crate::qmath::{DensityMatrix, PureState};
use crate::rates::{one_sided_split, region_split, Bipartition, Setting};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "privrand", version, about = "Private randomness rates, capacities and protocol simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Alice's subsystem labels (default: the first subsystem).
    #[arg(long, value_delimiter = ',')]
    pub alice: Vec<String>,
    /// Bob's subsystem labels (default: all remaining subsystems).
    #[arg(long, value_delimiter = ',')]
    pub bob: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropies of a bipartite state.
    Entropy {
        #[arg(long)]
        state: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_enum, default_value = "json")]
        out: OutputFormat,
    },
    /// Rate region for one setting, or the one-sided rate bounds.
    Rates {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), required_unless_present = "one_sided")]
        setting: Option<u8>,
        #[arg(long, conflicts_with = "setting")]
        one_sided: bool,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_enum, default_value = "json")]
        out: OutputFormat,
    },
    /// Reverse coherent information capacity of a channel.
    Capacity {
        #[arg(long, required_unless_present = "additivity")]
        channel: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// Include the objective after every accepted step.
        #[arg(long)]
        trace: bool,
        /// Compare the optimum of `N₁ ⊗ N₂` with the sum of both optima.
        #[arg(long, num_args = 2, value_names = ["CH1", "CH2"], conflicts_with = "channel")]
        additivity: Option<Vec<PathBuf>>,
    },
    /// Monte-Carlo decoupling experiment on a pure three-party state.
    Decouple {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        key_bits: u32,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Runs a protocol script on a pure initial state.
    Simulate {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        state: PathBuf,
    },
    /// Builds or verifies ibit states.
    Ibit {
        #[command(subcommand)]
        action: IbitAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum IbitAction {
    /// Builds the twisted state from a twisting file.
    Build {
        #[arg(long)]
        twisting: PathBuf,
    },
    /// Checks whether a state is an ibit with the given key registers.
    Verify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        keys: Vec<String>,
        /// Shield labels (default: every non-key subsystem).
        #[arg(long, value_delimiter = ',')]
        shield: Vec<String>,
        #[arg(long, default_value_t = VERIFY_TOL)]
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityOutput {
    pub rci: f64,
    pub capacity: f64,
    pub iterations: usize,
    pub gap_estimate: f64,
    pub converged: bool,
    pub optimizer_input: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl CapacityOutput {
    fn new(r: &CapacityResult, with_trace: bool) -> Self {
        Self {
            rci: r.rci,
            capacity: r.capacity,
            iterations: r.iterations,
            gap_estimate: r.gap_estimate,
            converged: r.converged,
            optimizer_input: matrix_to_json(r.optimizer_input.matrix()),
            trace: with_trace.then(|| r.trace.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub extracted_bits: f64,
    pub ideal_distance: f64,
    pub standard_distance: f64,
    pub keys: Vec<String>,
    pub eve: Vec<String>,
    pub shield: Vec<String>,
    pub ccq: StateFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub ok: bool,
    pub max_deviation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twisting: Option<Vec<JsonMatrix>>,
}

/// Text to print plus the exit status.
struct Output {
    text: String,
    code: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, code: EXIT_OK }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_state(path: &Path) -> Result<State> {
    read_state(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn load_pure(path: &Path) -> Result<PureState> {
    match load_state(path)? {
        State::Pure(p) => Ok(p),
        State::Density(_) => Err(Error::InvalidState(format!("{} must hold a state vector", path.display()))),
    }
}

fn load_channel(path: &Path) -> Result<Channel> {
    parse_channel(&std::fs::read_to_string(path)?)
}

fn bipartition(rho: &DensityMatrix, split: &SplitArgs) -> Result<Bipartition> {
    let labels = rho.layout().labels();
    match (split.alice.is_empty(), split.bob.is_empty()) {
        (true, true) => Bipartition::first_vs_rest(rho),
        (false, false) => Bipartition::new(rho, &split.alice, &split.bob),
        (false, true) => {
            let bob: Vec<String> = labels.iter().filter(|l| !split.alice.contains(l)).cloned().collect();
            Bipartition::new(rho, &split.alice, &bob)
        }
        (true, false) => {
            let alice: Vec<String> = labels.iter().filter(|l| !split.bob.contains(l)).cloned().collect();
            Bipartition::new(rho, &alice, &split.bob)
        }
    }
}

fn unsupported(cmd: &str, out: OutputFormat) -> Error {
    Error::OutOfRange(format!("`{cmd}` does not support --out {out:?}").to_lowercase())
}

fn execute(command: &Command) -> Result<Output> {
    match command {
        Command::Entropy { state, split, out } => {
            let rho = load_state(state)?.density();
            let b = bipartition(&rho, split)?;
            let report = EntropyReport::new(&rho, &b.alice, &b.bob)?;
            match out {
                OutputFormat::Json => Ok(Output::ok(json(&report)?)),
                OutputFormat::Table => Ok(Output::ok(report.table())),
                OutputFormat::Csv => Err(unsupported("entropy", *out)),
            }
        }
        Command::Rates { state, setting, one_sided, split, out } => {
            let rho = load_state(state)?.density();
            let b = bipartition(&rho, split)?;
            if *one_sided {
                let report = one_sided_split(&rho, &b)?;
                return match out {
                    OutputFormat::Json => Ok(Output::ok(json(&report)?)),
                    OutputFormat::Table => {
                        let exact = report.exact.map_or_else(|| "-".to_string(), |v| format!("{v:.10}"));
                        Ok(Output::ok(format!(
                            "lower      {:>14.10}\nupper_half {:>14.10}\nupper_hash {:>14.10}\nR_G        {:>14.10}\nexact      {exact:>14}\n",
                            report.lower_bound, report.upper_half_entropy, report.upper_er_hash, report.r_g
                        )))
                    }
                    OutputFormat::Csv => Err(unsupported("rates --one-sided", *out)),
                };
            }
            let setting = Setting::from_index(setting.ok_or_else(|| Error::OutOfRange("--setting is required".into()))?)?;
            let region = region_split(&rho, &b, setting)?;
            match out {
                OutputFormat::Json => Ok(Output::ok(json(&region)?)),
                OutputFormat::Csv => Ok(Output::ok(region.to_csv())),
                OutputFormat::Table => {
                    let mut t = String::from("       R_A            R_B\n");
                    for v in &region.vertices {
                        t.push_str(&format!("{:>14.10} {:>14.10}\n", v.0, v.1));
                    }
                    Ok(Output::ok(t))
                }
            }
        }
        Command::Capacity { channel, tol, max_iter, trace, additivity } => {
            let opts = AscentOptions { tol: *tol, max_iter: *max_iter };
            if let Some(pair) = additivity {
                let (n1, n2) = (load_channel(&pair[0])?, load_channel(&pair[1])?);
                let report = additivity_check(&n1, &n2, tol.max(1e-6), opts)?;
                return Ok(Output::ok(json(&report)?));
            }
            let path = channel.as_ref().ok_or_else(|| Error::OutOfRange("--channel is required".into()))?;
            let result = maximize_rci(&load_channel(path)?, opts)?;
            let code = if result.converged { EXIT_OK } else { EXIT_NONCONVERGENCE };
            Ok(Output { text: json(&CapacityOutput::new(&result, *trace))?, code })
        }
        Command::Decouple { state, n, key_bits, trials, seed } => {
            let psi = load_pure(state)?;
            let exp = simultaneous_decoupling(&psi, *n, *key_bits, *trials, *seed)?;
            Ok(Output::ok(json(&exp.report())?))
        }
        Command::Simulate { script, state } => {
            let script = ProtocolScript::parse(&std::fs::read_to_string(script)?)?;
            let psi = load_pure(state)?;
            let outcome = run_script(&script, &psi)?;
            let out = SimulationOutput {
                extracted_bits: outcome.extracted_bits,
                ideal_distance: outcome.ideal_distance,
                standard_distance: to_standard_picture(&outcome)?,
                keys: outcome.keys.clone(),
                eve: outcome.eve.clone(),
                shield: outcome.shield.clone(),
                ccq: StateFile::from_density(&outcome.ccq),
            };
            Ok(Output::ok(json(&out)?))
        }
        Command::Ibit { action: IbitAction::Build { twisting } } => {
            let file: TwistingFile = serde_json::from_str(&std::fs::read_to_string(twisting)?)?;
            let rho = build_alpha(&file.into_alpha()?)?;
            Ok(Output::ok(json(&StateFile::from_density(&rho))?))
        }
        Command::Ibit { action: IbitAction::Verify { state, keys, shield, tol } } => {
            let rho = load_state(state)?.density();
            let shield: Vec<String> = if shield.is_empty() {
                rho.layout().labels().iter().filter(|l| !keys.contains(l)).cloned().collect()
            } else {
                shield.clone()
            };
            let v = verify_ibit_tol(&rho, keys, &shield, *tol)?;
            let out = VerifyOutput {
                ok: v.ok,
                max_deviation: v.max_deviation,
                twisting: v.twisting.map(|us| us.iter().map(|u| matrix_to_json(u.matrix())).collect()),
            };
            Ok(Output::ok(json(&out)?))
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let to_stdout = !e.use_stderr();
            let sink: &mut dyn Write = if to_stdout { stdout } else { stderr };
            let _ = write!(sink, "{}", e.render());
            return if to_stdout { EXIT_OK } else { EXIT_INPUT };
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            let _ = stdout.write_all(out.text.as_bytes());
            if out.code == EXIT_NONCONVERGENCE {
                let _ = writeln!(stderr, "warning: optimisation stopped before reaching the tolerance");
            }
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
                _ => EXIT_INPUT,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("privrand").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, out, err) = call(&["rates", "--bogus"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(out.is_empty());
        assert!(err.contains("Usage"));
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("capacity"));
    }

    #[test]
    fn missing_file_is_input_error() {
        let (code, _, err) = call(&["entropy", "--state", "/nonexistent/state.json"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("/nonexistent/state.json"));
    }

    #[test]
    fn setting_range_checked() {
        let (code, _, _) = call(&["rates", "--state", "x.json", "--setting", "5"]);
        assert_eq!(code, EXIT_INPUT);
    }
}
