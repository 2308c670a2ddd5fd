mod args;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{BisimKind, Cli, Command, Equiv, Format, Method, Output, SimArgs};
use shype::ast::validate::{validate_well_defined, ValidationReport};
use shype::ast::{Model, ModelError};
use shype::equiv::{self, EquivError, StateEquivKind, Verdict};
use shype::lts::{build_lts, lts_to_dot, lts_to_json, LtsError};
use shype::parser::{parse_expr, parse_model_named, ParseDiagnostic, ParseErrors};
use shype::sim::{self, Recording, SimError, SimulationConfig};
use shype::tdsha::{self, Tdsha, TdshaError};

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Parse(ParseErrors),
    #[error("invalid --cost expression: {0}")]
    Cost(ParseDiagnostic),
    #[error("{0}")]
    Usage(String),
    #[error("{}", report_text(.0))]
    Invalid(ValidationReport),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lts(#[from] LtsError),
    #[error(transparent)]
    Tdsha(#[from] TdshaError),
    #[error(transparent)]
    Equiv(#[from] EquivError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) | CliError::Cost(_) | CliError::Usage(_) => 2,
            CliError::Sim(SimError::ChainCapExceeded { .. } | SimError::Eval { .. }) => 3,
            _ => 1,
        }
    }
}

fn report_text(r: &ValidationReport) -> String {
    r.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n")
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses and validates a model file.
fn load(path: &Path) -> Result<Model, CliError> {
    let src = fs::read_to_string(path).map_err(io_err(path))?;
    let model = parse_model_named(&path.display().to_string(), &src).map_err(CliError::Parse)?;
    let report = validate_well_defined(&model);
    if !report.is_ok() {
        return Err(CliError::Invalid(report));
    }
    Ok(model)
}

fn emit(out: &Output, text: &str) -> Result<(), CliError> {
    match &out.out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => io::stdout().write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn sim_config(a: &SimArgs, reps: usize) -> SimulationConfig {
    SimulationConfig {
        t_end: a.t_end,
        dt: a.dt,
        master_seed: a.seed,
        replications: reps,
        chain_cap: a.chain_cap,
        record_stride: a.stride,
        stop_event: a.stop_event.clone(),
        ..SimulationConfig::default()
    }
}

fn write_csv(path: Option<&Path>, f: impl FnOnce(&mut BufWriter<Box<dyn Write + '_>>) -> io::Result<()>) -> Result<(), CliError> {
    let (sink, name): (Box<dyn Write>, &Path) = match path {
        Some(p) => (Box::new(File::create(p).map_err(io_err(p))?), p),
        None => (Box::new(io::stdout().lock()), Path::new("<stdout>")),
    };
    let mut w = BufWriter::new(sink);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(name))
}

/// `dir/name.csv` becomes `dir/name_<i>.csv`.
fn replication_path(base: &Path, i: usize) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    base.with_file_name(format!("{stem}_{i}{ext}"))
}

fn tdsha_of(model: &Model, method: Method, no_prune: bool) -> Result<Tdsha, CliError> {
    Ok(match method {
        Method::Sos => tdsha::from_model(model)?,
        Method::Compositional => {
            let m = shype::ast::expand::expand_general_durations(model)?;
            let t = tdsha::compositional_mapping(&m)?;
            if no_prune {
                t
            } else {
                tdsha::prune_unreachable(&t)
            }
        }
    })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Validate { model } => {
            load(&model)?;
            eprintln!("{}: well defined", model.display());
            Ok(0)
        }
        Command::Lts { model, format, out } => {
            let lts = build_lts(&shype::ast::expand::expand_general_durations(&load(&model)?)?)?;
            let text = match format {
                Format::Json => json(&lts_to_json(&lts)),
                Format::Dot => lts_to_dot(&lts),
            };
            emit(&out, &text)?;
            eprintln!("{} configurations, {} transitions", lts.configs.len(), lts.transitions.len());
            Ok(0)
        }
        Command::Tdsha {
            model,
            method,
            no_prune,
            format,
            out,
        } => {
            let t = tdsha_of(&load(&model)?, method, no_prune)?;
            let text = match format {
                Format::Json => json(&tdsha::tdsha_to_json(&t)),
                Format::Dot => tdsha::tdsha_to_dot(&t),
            };
            emit(&out, &text)?;
            eprintln!("{} modes", t.modes.len());
            Ok(0)
        }
        Command::Simulate {
            model,
            sim: a,
            reps,
            summary,
            grid,
            out,
        } => {
            let t = tdsha::from_model(&load(&model)?)?;
            let mut cfg = sim_config(&a, reps);
            if summary {
                cfg.grid_step = Some(grid);
                cfg.recording = Recording::Terminal;
            } else if reps > 1 && out.is_none() {
                return Err(CliError::Usage(
                    "several replications without --summary need --out".into(),
                ));
            }
            let r = sim::run_replications(&t, &cfg)?;
            if summary {
                if let Some(s) = &r.summary {
                    write_csv(out.as_deref(), |w| sim::write_summary_csv(s, w))?;
                }
            } else {
                for (i, tr) in &r.traces {
                    let path = match &out {
                        Some(p) if reps > 1 => Some(replication_path(p, *i)),
                        p => p.clone(),
                    };
                    write_csv(path.as_deref(), |w| sim::write_trace_csv(tr, w))?;
                }
            }
            eprintln!("{} of {} replications completed", r.traces.len(), reps);
            match r.failures.into_iter().next() {
                Some((i, e)) => {
                    eprintln!("replication {i} failed");
                    Err(e.into())
                }
                None => Ok(0),
            }
        }
        Command::Bisim {
            left,
            right,
            equiv: e,
            kind,
            out,
        } => {
            let (p, q) = (load(&left)?, load(&right)?);
            let report = match (kind, e) {
                (BisimKind::System, Equiv::Eq) => equiv::check_system_bisim(&p, &q)?,
                (BisimKind::System, Equiv::Doteq) => {
                    return Err(CliError::Usage("system bisimulation compares states by equality".into()))
                }
                (BisimKind::Stochastic, e) => {
                    let k = match e {
                        Equiv::Eq => StateEquivKind::Equality,
                        Equiv::Doteq => StateEquivKind::DotEq,
                    };
                    equiv::check_stochastic_system_bisim(&p, &q, k)?
                }
            };
            emit(&out, &json(&report))?;
            match &report.witness {
                None => {
                    eprintln!("bisimilar ({} blocks)", report.partition.blocks.len());
                    Ok(0)
                }
                Some(w) => {
                    eprintln!("not bisimilar after [{}]: {}", w.path.join(", "), w.reason);
                    Ok(1)
                }
            }
        }
        Command::Wellbehaved { model, out } => {
            let v = equiv::check_well_behaved(&load(&model)?)?;
            emit(&out, &json(&v))?;
            match &v {
                Verdict::WellBehaved { reason } => {
                    eprintln!("well-behaved: {reason}");
                    Ok(0)
                }
                Verdict::Unknown { cycles } => {
                    for c in cycles {
                        eprintln!("possible instantaneous cycle: {}", c.join(" -> "));
                    }
                    Ok(4)
                }
            }
        }
        Command::Sweep {
            model,
            param,
            values,
            cost,
            sim: a,
            reps,
            out,
        } => {
            let m = load(&model)?;
            let cost = parse_expr(&cost).map_err(CliError::Cost)?;
            let rows = sim::sweep_parameter(&m, &param, &values, &cost, &sim_config(&a, reps))?;
            write_csv(out.out.as_deref(), |w| sim::write_sweep_csv(&rows, w))?;
            if let Some(best) = rows.iter().min_by(|x, y| x.mean.total_cmp(&y.mean)) {
                eprintln!("minimum mean cost {} at {param} = {}", best.mean, best.value);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
