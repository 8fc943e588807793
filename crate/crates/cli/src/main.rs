//! `switchvar`: simulate and diagnose Markov-switching autoregressions.
//!
//! Exit codes: 0 ok, 1 input error, 2 regime chain not ergodic,
//! 3 diagnosis inconclusive.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use switchvar::config::{self, ConfiguredModel, ModelConfig};
use switchvar::csv::{fmt17, trajectory_to_csv};
use switchvar::lyapunov;
use switchvar::model::{self, simulate_sma};
use switchvar::moments;
use switchvar::report::{self, DiagnoseOptions, Verdict};
use switchvar::scenarios;
use switchvar::stability::{self, InitialCondition};
use switchvar::{Error, NormKind, SwitchingModel};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_ERGODIC: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "switchvar", version, about = "Stability diagnostics for Markov-switching autoregressions")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for replicate loops (default: available parallelism).
    #[arg(long, global = true, env = "REGIME_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model config and its regime chain.
    Validate { config: PathBuf },
    /// Simulate one trajectory as CSV (t, regime, x1..xp).
    Simulate {
        config: PathBuf,
        /// Initial state, comma separated (default zeros).
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full stability diagnosis as JSON.
    Diagnose {
        config: PathBuf,
        #[arg(long, default_value_t = lyapunov::DEFAULT_LENGTH)]
        n: usize,
        #[arg(long, default_value_t = lyapunov::DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = 100)]
        phi_n: usize,
        #[arg(long, default_value_t = 2000)]
        phi_trials: usize,
        /// Tail fraction used for the decay fit.
        #[arg(long, default_value_t = 0.5)]
        window: f64,
        /// Also estimate the exponent from each fixed starting regime.
        #[arg(long)]
        start_sensitivity: bool,
    },
    /// Top Lyapunov exponent (or the full spectrum) by Monte Carlo.
    Lyapunov {
        config: PathBuf,
        #[arg(long, default_value_t = lyapunov::DEFAULT_LENGTH)]
        n: usize,
        #[arg(long, default_value_t = lyapunov::DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long)]
        spectrum: bool,
    },
    /// Conditional moment products and the geometric decay fit.
    Phi {
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = NormKind::Operator2)]
        norm: NormKind,
        #[arg(long, default_value_t = 0.5)]
        window: f64,
        /// CSV of the estimates (n, phi per regime, unconditional).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired trajectories under shared regimes and noise.
    Couple {
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x0p: Option<String>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// CSV trace (n, distance, product_distance).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// KS comparison of time-n marginals from different starting regimes.
    Converge(ConvergeArgs),
    /// Emit the JSON config of a built-in scenario.
    Scenario {
        /// example2, example3, example4, example5, example6 or period2.
        name: String,
        /// Stationary regime-1 mass for example4.
        #[arg(long)]
        rho: Option<f64>,
        /// Input series CSV for example6.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConvergeArgs {
    config: PathBuf,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Initial condition "regime:x1,x2,..." with a 1-based regime; repeatable.
    /// Defaults to one start per regime with alternating +/-10 states.
    #[arg(long = "init", allow_hyphen_values = true)]
    inits: Vec<String>,
}

fn input_err(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_vector(text: &str, dim: usize, flag: &str) -> Result<Vec<f64>, Error> {
    let v = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| input_err(format!("{flag}: '{s}': {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != dim {
        return Err(input_err(format!("{flag}: expected {dim} values, found {}", v.len())));
    }
    Ok(v)
}

fn vector_or(text: Option<&str>, dim: usize, default: f64, flag: &str) -> Result<Vec<f64>, Error> {
    match text {
        Some(t) => parse_vector(t, dim, flag),
        None => Ok(vec![default; dim]),
    }
}

fn parse_init(text: &str, model: &SwitchingModel) -> Result<InitialCondition, Error> {
    let (regime, x) = text.split_once(':').ok_or_else(|| input_err(format!("--init '{text}': expected regime:x1,...")))?;
    let regime: usize = regime.trim().parse().map_err(|e| input_err(format!("--init '{text}': {e}")))?;
    if regime == 0 || regime > model.regimes() {
        return Err(input_err(format!("--init '{text}': regime outside 1..={}", model.regimes())));
    }
    Ok(InitialCondition { x0: parse_vector(x, model.dim, "--init")?, regime: regime - 1 })
}

fn load_svar(path: &Path, what: &str) -> Result<SwitchingModel, Error> {
    config::load(path)?.into_svar(what)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    let seed = cli.seed;
    match cli.command {
        Command::Validate { config } => {
            let model = config::load(&config)?;
            let diag = model.chain().diagnostics();
            let (kind, dim, regimes) = match &model {
                ConfiguredModel::Svar(m) => ("svar", m.dim, m.regimes()),
                ConfiguredModel::Sma(m) => ("sma", m.dim, m.chain.regimes()),
            };
            let mut warnings = Vec::new();
            if !diag.irreducible {
                warnings.push("NotErgodic: regime chain is reducible".to_string());
            } else if !diag.aperiodic {
                warnings.push(format!("NotErgodic: regime chain has period {}", diag.period.unwrap_or(0)));
            }
            print_json(&json!({
                "valid": true,
                "ergodic": diag.ergodic(),
                "kind": kind,
                "dim": dim,
                "regimes": regimes,
                "chain": diag,
                "warnings": warnings,
            }))?;
            Ok(if diag.ergodic() { 0 } else { EXIT_NOT_ERGODIC })
        }
        Command::Simulate { config, x0, n, out } => {
            let traj = match config::load(&config)? {
                ConfiguredModel::Svar(m) => {
                    let x0 = vector_or(x0.as_deref(), m.dim, 0.0, "--x0")?;
                    model::simulate(&m, &x0, n, seed)?
                }
                ConfiguredModel::Sma(m) => {
                    if x0.is_some() {
                        return Err(input_err("--x0 does not apply to a moving-average model"));
                    }
                    simulate_sma(&m, n, seed)?
                }
            };
            emit(&trajectory_to_csv(&traj), out.as_deref())?;
            Ok(0)
        }
        Command::Diagnose { config, n, replicates, phi_n, phi_trials, window, start_sensitivity } => {
            let model = load_svar(&config, "diagnose")?;
            let opts = DiagnoseOptions { n, replicates, seed, phi_n_max: phi_n, phi_trials, window, start_sensitivity };
            let rep = report::diagnose(&model, &opts)?;
            print_json(&rep)?;
            Ok(if !rep.chain.ergodic() {
                EXIT_NOT_ERGODIC
            } else if rep.verdict == Verdict::Inconclusive {
                EXIT_INCONCLUSIVE
            } else {
                0
            })
        }
        Command::Lyapunov { config, n, replicates, spectrum } => {
            let model = load_svar(&config, "lyapunov")?;
            let est = if spectrum {
                lyapunov::estimate_spectrum(&model, n, replicates, seed)?
            } else {
                lyapunov::estimate_top(&model, n, replicates, seed)?
            };
            print_json(&est)?;
            Ok(0)
        }
        Command::Phi { config, n_max, trials, norm, window, out } => {
            let model = load_svar(&config, "phi")?;
            let phi = moments::estimate_phi(&model, n_max, trials, seed, norm)?;
            if let Some(p) = &out {
                fs::write(p, phi.to_csv())?;
            }
            let fit = moments::fit_decay(&phi, window)?;
            let verdict = moments::check_second_order(None, &fit);
            print_json(&json!({ "norm": norm, "trials": trials, "n_max": n_max, "fit": fit, "second_order": verdict }))?;
            Ok(0)
        }
        Command::Couple { config, x0, x0p, n, out } => {
            let model = load_svar(&config, "couple")?;
            let x0 = vector_or(x0.as_deref(), model.dim, 1.0, "--x0")?;
            let x0p = vector_or(x0p.as_deref(), model.dim, -1.0, "--x0p")?;
            let trace = stability::contraction_experiment(&model, &x0, &x0p, n, seed)?;
            let mut csv = String::from("n,distance,product_distance\n");
            for (k, (d, q)) in trace.distances.iter().zip(&trace.product_distances).enumerate() {
                csv.push_str(&format!("{k},{},{}\n", fmt17(*d), fmt17(*q)));
            }
            match &out {
                Some(p) => {
                    fs::write(p, csv)?;
                    print_json(&json!({
                        "slope": trace.slope,
                        "slope_stderr": trace.slope_stderr,
                        "max_relative_error": trace.max_relative_error,
                        "coalesced_at": trace.coalesced_at,
                        "steps": trace.distances.len().saturating_sub(1),
                    }))?;
                }
                None => emit(&csv, None)?,
            }
            Ok(0)
        }
        Command::Converge(args) => {
            let model = load_svar(&args.config, "converge")?;
            let inits = if args.inits.is_empty() {
                (0..model.regimes())
                    .map(|i| InitialCondition { x0: vec![if i % 2 == 0 { 10.0 } else { -10.0 }; model.dim], regime: i })
                    .collect()
            } else {
                args.inits.iter().map(|t| parse_init(t, &model)).collect::<Result<Vec<_>, _>>()?
            };
            if inits.len() < 2 {
                return Err(input_err("need at least two initial conditions"));
            }
            let rep = stability::distribution_convergence(&model, &inits, args.n, args.samples, seed)?;
            print_json(&rep)?;
            Ok(0)
        }
        Command::Scenario { name, rho, input, out } => {
            // absolute, so the emitted config works from any directory
            let input = input.map(|p| fs::canonicalize(&p).unwrap_or(p));
            let sc = scenarios::by_name(&name, rho, input.as_deref())?;
            let cfg = ModelConfig::from_model(&sc.model, sc.input_path.as_deref());
            let mut text = cfg.to_json_pretty();
            text.push('\n');
            emit(&text, out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::NotErgodic(_) => EXIT_NOT_ERGODIC,
                _ => EXIT_INPUT,
            })
        }
    }
}
