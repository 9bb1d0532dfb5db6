//! Command implementations behind the `hybrid-id` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hybrid_id::io::{
    build_trajectory, load_cohort, load_model, load_trajectory, parse_events, report_from_json,
    save_model, save_report, save_trajectory, signal_from_csv, ModelMeta, SynthSpec,
    FORMAT_VERSION,
};
use hybrid_id::kde::{violin_data, ParameterName};
use hybrid_id::metrics::{report, FitReport, RmseMode};
use hybrid_id::pipeline::{identify, validate_split, IdentifyOptions, Validation, DEFAULT_SEED};
use hybrid_id::{reliance_of, simulate, CognitiveState, Channel, Error, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INSUFFICIENT: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hybrid-id", version, about = "Identify hybrid models of driver trust, risk and workload")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trajectory CSV (`k,d,q,T,R,W`) or raw event log (`t,kind,T,R,W`).
    #[arg(long)]
    pub input: PathBuf,
    /// Sample time in seconds, for raw event logs.
    #[arg(long, default_value_t = 1.0)]
    pub sample_time: f64,
    /// Window start in seconds, for raw event logs.
    #[arg(long, default_value_t = 0.0)]
    pub window_start: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a whole trajectory.
    Identify {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_report: PathBuf,
        #[arg(long, env = "HYBRID_ID_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = RmseMode::Reset)]
        rmse_mode: RmseMode,
    },
    /// Fit on the first part of a trajectory and score the rest.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "HYBRID_ID_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// RMSE mode on the held-out part.
        #[arg(long, default_value_t = RmseMode::OpenLoop)]
        rmse_mode: RmseMode,
    },
    /// Generate a synthetic trajectory from a JSON recipe.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating model.
        #[arg(long)]
        out_model: Option<PathBuf>,
        /// Overrides the recipe's seed.
        #[arg(long, env = "HYBRID_ID_SEED")]
        seed: Option<u64>,
    },
    /// Write violin-plot densities for all nine parameters of a cohort.
    Kde {
        #[arg(long)]
        models_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a saved model over a complexity signal.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// CSV with a `d` column.
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Initial state `T,R,W`; defaults to the fixed point under `d(0)`.
        #[arg(long, value_parser = parse_state)]
        initial: Option<CognitiveState>,
        /// Initial reliance 0 or 1; defaults to the model's reliance at the initial state.
        #[arg(long)]
        initial_q: Option<u8>,
    },
    /// Print a results table from saved reports, or score a model on a trajectory.
    Report {
        /// Saved report JSON files.
        reports: Vec<PathBuf>,
        #[arg(long, requires = "input")]
        model: Option<PathBuf>,
        #[arg(long, requires = "model")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = RmseMode::Reset)]
        rmse_mode: RmseMode,
        #[arg(long, requires = "model")]
        out: Option<PathBuf>,
    },
}

fn parse_state(s: &str) -> Result<CognitiveState, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [t, r, w] => CognitiveState::new(t, r, w).map_err(|e| e.to_string()),
        _ => Err("expected three comma-separated values".into()),
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Version { .. }
        | Error::NonFinite(_)
        | Error::InvalidInput(_)
        | Error::UnpairedEvent { .. }
        | Error::OverlappingInterval { .. }
        | Error::OutOfOrder { .. }
        | Error::ReportCollision { .. } => EXIT_PARSE,
        Error::InsufficientReports { .. }
        | Error::MissingInitialReport
        | Error::InsufficientFits { .. }
        | Error::DegenerateDistribution
        | Error::EmptyRecords => EXIT_INSUFFICIENT,
        Error::GridTooLarge(_) | Error::Io(_) => EXIT_OTHER,
    }
}

fn at(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError {
        code: exit_code(&e),
        message: format!("{}: {e}", path.display()),
    }
}

fn plain(e: Error) -> CliError {
    CliError {
        code: exit_code(&e),
        message: e.to_string(),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError {
        code: EXIT_OTHER,
        message: format!("{}: {e}", path.display()),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError {
        code: EXIT_OTHER,
        message: format!("{}: {e}", path.display()),
    })
}

/// Loads a trajectory CSV, or resamples a raw event log when the header
/// starts with `t,kind`.
pub fn load_input(args: &InputArgs) -> Result<Trajectory, CliError> {
    let path = &args.input;
    let text = read(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.replace(' ', "").starts_with("t,kind") {
        let records = parse_events(&text).map_err(at(path))?;
        build_trajectory(&records, args.sample_time, args.window_start).map_err(at(path))
    } else {
        load_trajectory(path).map_err(at(path))
    }
}

#[derive(Serialize)]
struct ValidationFile<'a> {
    #[serde(flatten)]
    validation: &'a Validation,
    version: u32,
}

/// What a successful command printed and whether it is fully converged.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub converged: bool,
}

impl Outcome {
    fn done(stdout: String) -> Self {
        Self {
            stdout,
            warnings: Vec::new(),
            converged: true,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.converged {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

fn table(rows: &[(String, FitReport)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$} {}\n", "", FitReport::table_header());
    for (label, r) in rows {
        out.push_str(&format!("{label:<width$} {}\n", r.table_row()));
    }
    out
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Identify {
            input,
            out_model,
            out_report,
            seed,
            rmse_mode,
        } => {
            let traj = load_input(input)?;
            let opts = IdentifyOptions {
                seed: *seed,
                rmse_mode: *rmse_mode,
            };
            let id = identify(&traj, &opts).map_err(at(&input.input))?;
            let meta = ModelMeta {
                seed: Some(*seed),
                version: FORMAT_VERSION,
            };
            save_model(out_model, &id.model, &meta).map_err(at(out_model))?;
            save_report(out_report, &id.report).map_err(at(out_report))?;
            let mut out = Outcome::done(table(&[("fit".into(), id.report.clone())]));
            for (ch, fit) in Channel::ALL.iter().zip(&id.continuous) {
                if !fit.converged {
                    out.converged = false;
                    out.warnings.push(format!("{ch}: optimizer did not converge"));
                }
                if fit.degenerate {
                    out.warnings
                        .push(format!("{ch}: constant self-reports, parameters not unique"));
                }
            }
            Ok(out)
        }
        Command::Validate {
            input,
            split,
            out,
            seed,
            rmse_mode,
        } => {
            let traj = load_input(input)?;
            let opts = IdentifyOptions {
                seed: *seed,
                rmse_mode: RmseMode::Reset,
            };
            let v = validate_split(&traj, *split, &opts, *rmse_mode).map_err(at(&input.input))?;
            if let Some(path) = out {
                let file = ValidationFile {
                    validation: &v,
                    version: FORMAT_VERSION,
                };
                let mut text = serde_json::to_string_pretty(&file).expect("validation serializes");
                text.push('\n');
                write(path, &text)?;
            }
            let mut res = Outcome::done(table(&[
                (format!("train ({})", v.training_reports), v.training.clone()),
                (format!("held-out ({})", v.held_out_reports), v.held_out.clone()),
            ]));
            res.converged = v.converged;
            if !v.converged {
                res.warnings.push("optimizer did not converge".into());
            }
            for ch in &v.low_excitation {
                res.warnings.push(format!(
                    "{ch}: low excitation in the training part (self-report range < 0.05)"
                ));
            }
            Ok(res)
        }
        Command::Synth {
            spec,
            out,
            out_model,
            seed,
        } => {
            let text = read(spec)?;
            let mut recipe: SynthSpec = serde_json::from_str(&text).map_err(|e| CliError {
                code: EXIT_PARSE,
                message: format!("{}:{}: {e}", spec.display(), e.line()),
            })?;
            if let Some(s) = seed {
                recipe.seed = *s;
            }
            let (traj, truth) = hybrid_id::io::synthesize(&recipe).map_err(at(spec))?;
            save_trajectory(out, &traj).map_err(at(out))?;
            if let Some(path) = out_model {
                let meta = ModelMeta {
                    seed: Some(recipe.seed),
                    version: FORMAT_VERSION,
                };
                save_model(path, &truth, &meta).map_err(at(path))?;
            }
            Ok(Outcome::done(format!(
                "{} samples, {} self-reports\n",
                traj.len(),
                traj.report_count()
            )))
        }
        Command::Kde { models_dir, out_dir } => {
            let cohort = load_cohort(models_dir).map_err(at(models_dir))?;
            let curves = ParameterName::all()
                .map(|p| {
                    violin_data(p, &cohort)
                        .map(|c| (p, c))
                        .map_err(|e| CliError {
                            code: exit_code(&e),
                            message: format!("{}: {p}: {e}", models_dir.display()),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            fs::create_dir_all(out_dir).map_err(|e| CliError {
                code: EXIT_OTHER,
                message: format!("{}: {e}", out_dir.display()),
            })?;
            let mut summary = String::new();
            for (p, c) in curves {
                let name = p.to_string();
                write(&out_dir.join(format!("{name}.csv")), &c.to_csv())?;
                write(&out_dir.join(format!("{name}.json")), &c.sidecar_json(Some(&name)))?;
                summary.push_str(&format!(
                    "{name:<4} n={} mean={:.4} median={:.4} sd={:.4}\n",
                    c.n_samples, c.mean, c.median, c.sample_sd
                ));
            }
            Ok(Outcome::done(summary))
        }
        Command::Simulate {
            model,
            signal,
            out,
            initial,
            initial_q,
        } => {
            let (m, _) = load_model(model).map_err(at(model))?;
            let d = signal_from_csv(&read(signal)?).map_err(at(signal))?;
            let x0 = match initial {
                Some(x) => *x,
                None => {
                    let mut x = CognitiveState::splat(0.0);
                    for ch in Channel::ALL {
                        let fp = m.params(ch).fixed_point(d[0]).ok_or_else(|| CliError {
                            code: EXIT_PARSE,
                            message: format!("{ch}: no fixed point; pass --initial"),
                        })?;
                        x.set(ch, fp);
                    }
                    x
                }
            };
            let q0 = match initial_q {
                Some(0) => false,
                Some(1) => true,
                Some(v) => {
                    return Err(CliError {
                        code: EXIT_PARSE,
                        message: format!("--initial-q must be 0 or 1, got {v}"),
                    })
                }
                None => reliance_of(&x0, &m.thresholds),
            };
            let sim = simulate(x0, q0, &d, &m).map_err(plain)?;
            let states = sim.states.iter().copied().enumerate().collect();
            let traj = Trajectory::new(1.0, d, sim.reliance, states).map_err(plain)?;
            save_trajectory(out, &traj).map_err(at(out))?;
            Ok(Outcome::done(String::new()))
        }
        Command::Report {
            reports,
            model,
            input,
            rmse_mode,
            out,
        } => {
            let mut rows = Vec::new();
            for path in reports {
                let r = report_from_json(&read(path)?).map_err(at(path))?;
                let label = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.trim_end_matches(".json").trim_end_matches(".report"))
                    .unwrap_or("?")
                    .to_string();
                rows.push((label, r));
            }
            if let (Some(model), Some(input)) = (model, input) {
                let (m, _) = load_model(model).map_err(at(model))?;
                let traj = load_trajectory(input).map_err(at(input))?;
                let anchored = traj.anchored().map_err(at(input))?;
                let r = report(&anchored, &m, *rmse_mode).map_err(at(input))?;
                if let Some(path) = out {
                    save_report(path, &r).map_err(at(path))?;
                }
                rows.push(("model".into(), r));
            }
            if rows.is_empty() {
                return Err(CliError {
                    code: EXIT_OTHER,
                    message: "nothing to report: pass report files or --model with --input".into(),
                });
            }
            Ok(Outcome::done(table(&rows)))
        }
    }
}
