//! `seqclass`: sequence-class norms, ideal-norm searches and verification suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqclass::suite::{list_suites, run_suite, ExperimentConfig, SuiteReport};
use seqclass::{class_norm, ideal_norm, EstimatorConfig, IdealSpec, MultiOp, SeqClassSpec, Space, VecSeq};

#[derive(Parser)]
#[command(name = "seqclass", version, about = "Sequence-class norms and multilinear ideal norms")]
struct Cli {
    /// Seed for every randomized estimator
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run on a single worker thread
    #[arg(long, global = true)]
    serial: bool,
    /// Write the JSON result to this file
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Print JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Norm of a finite vector sequence
    Norm {
        /// sup, strong, weak, rad or cohen (or e.g. `weak:1`)
        #[arg(long)]
        class: String,
        /// Class parameter for strong, weak and cohen
        #[arg(long)]
        p: Option<String>,
        /// Ambient space, e.g. `l2:3`, `linf:2`, `l1.5:4`
        #[arg(long)]
        space: String,
        /// Sequence as a JSON array of vectors
        #[arg(long, conflicts_with = "seq_file", required_unless_present = "seq_file")]
        seq: Option<String>,
        /// File holding the sequence
        #[arg(long, value_name = "PATH")]
        seq_file: Option<PathBuf>,
    },
    /// Lower bound search for the summing norm of an operator
    Ideal {
        /// Operator JSON file
        #[arg(long, value_name = "PATH")]
        operator: PathBuf,
        /// `X_1,…,X_n;Y`, or a single class used in every slot
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        /// Where to save the witness sequences
        #[arg(long, value_name = "PATH")]
        witness: Option<PathBuf>,
    },
    /// Verification suites
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
}

#[derive(Subcommand)]
enum SuiteAction {
    /// Run a suite by name or from a JSON config file
    Run {
        target: String,
        /// Write ratio curves as CSV
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// List the available suites
    List,
}

/// Usage and input problems exit with 2.
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(cli.serial) {
        eprintln!("error: {}", e.0);
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.0);
            ExitCode::from(2)
        }
    }
}

fn configure_threads(serial: bool) -> Result<(), UsageError> {
    let threads = if serial {
        Some(1)
    } else {
        match std::env::var("SEQCLASS_THREADS") {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(UsageError(format!("SEQCLASS_THREADS must be a positive integer, got `{v}`"))),
            },
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, UsageError> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Norm { class, p, space, seq, seq_file } => {
            let spec = parse_class(class, p.as_deref())?;
            let space: Space = space.parse()?;
            let text = match (seq, seq_file) {
                (Some(s), _) => s.clone(),
                (None, Some(path)) => read(path)?,
                (None, None) => return Err(UsageError("give --seq or --seq-file".into())),
            };
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| UsageError(format!("sequence: {e}")))?;
            let s = VecSeq::new(space, rows)?;
            let b = class_norm(&s, spec, &EstimatorConfig::default(), seed)?;
            let json = serde_json::to_string_pretty(&b)?;
            if cli.json {
                println!("{json}");
            } else if b.exact {
                println!("{} = {}  ({}, exact)", spec, b.upper, b.method);
            } else {
                println!("{} in [{}, {}]  ({}, seed {})", spec, b.lower, b.upper, b.method, seed);
            }
            write_out(cli.out.as_deref(), &json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ideal { operator, spec, k_max, restarts, witness } => {
            let a: MultiOp =
                serde_json::from_str(&read(operator)?).map_err(|e| UsageError(format!("operator: {e}")))?;
            let spec = parse_spec(spec, a.arity())?;
            let est = ideal_norm(&a, &spec, *k_max, *restarts, seed, &EstimatorConfig::default())?;
            if let Some(path) = witness {
                fs::write(path, serde_json::to_string_pretty(&est.witness)?)?;
            }
            let json = serde_json::to_string_pretty(&est)?;
            if cli.json {
                println!("{json}");
            } else {
                println!(
                    "ideal norm in [{}, {}]  ({}, seed {})",
                    est.bracket.lower, est.bracket.upper, est.bracket.method, seed
                );
                println!("best k: {}", est.best_k);
                let curve: Vec<String> = est.ratio_by_k.iter().map(|(k, r)| format!("{k}:{r:.9}")).collect();
                println!("ratio by k: {}", curve.join(" "));
                match witness {
                    Some(path) => println!("witness: {}", path.display()),
                    None => println!("witness: not saved (use --witness PATH)"),
                }
            }
            write_out(cli.out.as_deref(), &json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite { action: SuiteAction::List } => {
            if cli.json {
                println!("{}", serde_json::to_string(list_suites())?);
            } else {
                for name in list_suites() {
                    println!("{name}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite { action: SuiteAction::Run { target, csv } } => {
            let mut config = if target.ends_with(".json") || Path::new(target).is_file() {
                ExperimentConfig::from_json(&read(Path::new(target))?)?
            } else {
                ExperimentConfig::for_suite(target)?
            };
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            if let Some(out) = &cli.out {
                config.output_path = Some(out.clone());
            }
            let report = run_suite(&config)?;
            emit_report(cli, &report, csv.as_deref())?;
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn emit_report(cli: &Cli, report: &SuiteReport, csv: Option<&Path>) -> Result<(), UsageError> {
    let json = serde_json::to_string_pretty(report)?;
    if cli.json {
        println!("{json}");
    } else {
        print!("{}", report.text_table());
    }
    write_out(report.config.output_path.as_deref(), &json)?;
    if let Some(path) = csv {
        fs::write(path, report.curves_csv())?;
    }
    Ok(())
}

fn write_out(path: Option<&Path>, json: &str) -> Result<(), UsageError> {
    if let Some(path) = path {
        fs::write(path, format!("{json}\n")).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, UsageError> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn parse_class(class: &str, p: Option<&str>) -> Result<SeqClassSpec, UsageError> {
    let text = match (class.contains(':'), p) {
        (false, Some(p)) => format!("{class}:{p}"),
        (true, Some(_)) => return Err(UsageError("give the parameter either in --class or in --p".into())),
        (_, None) => class.to_string(),
    };
    Ok(text.parse()?)
}

/// `X_1,…,X_n;Y` or a single class repeated in all `n + 1` positions.
fn parse_spec(text: &str, arity: usize) -> Result<IdealSpec, UsageError> {
    match text.split_once(';') {
        Some((inputs, output)) => {
            let inputs: Vec<SeqClassSpec> = inputs.split(',').map(|s| s.parse()).collect::<Result<_, _>>()?;
            if inputs.len() != arity {
                return Err(UsageError(format!("spec has {} inputs, operator has arity {arity}", inputs.len())));
            }
            Ok(IdealSpec::new(inputs, output.parse()?)?)
        }
        None => Ok(IdealSpec::uniform(text.parse()?, arity)?),
    }
}
