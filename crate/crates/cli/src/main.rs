use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cachenet::analytics::{che_characteristic_time, content_hit_prob};
use cachenet::experiment::{run_experiment, validate_config, ExperimentConfig};
use cachenet::window::{estimate_window, wlfu_window, WindowMethod};
use cachenet::workload::PopularityModel;
use cachenet::Error;
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "cachenet",
    version,
    about = "Cache-network experiments and analytic tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV files and summary.
    Run {
        config: PathBuf,
        /// Directory for the outputs, overriding the config.
        #[arg(long, env = "CACHENET_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Check an experiment config without running it.
    Validate { config: PathBuf },
    /// Characteristic time of an LRU cache for the request rates in a CSV
    /// file (one rate per line, or `rank,rate`).
    SolveChe { popularity: PathBuf, size: f64 },
    /// Observation window for an estimation error and a confidence level in
    /// percent.
    Window {
        epsilon: f64,
        conf: f64,
        #[arg(long, default_value = "newton")]
        method: WindowMethod,
        /// Zipf exponent, used by the Newton refinement.
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 5000)]
        catalog: u32,
        /// Arrival rate for converting the window to seconds.
        #[arg(long, default_value_t = 100.0)]
        lambda: f64,
        /// Also size the window LFU history for this many slots.
        #[arg(long)]
        cache: Option<u64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Domain(_) => 1,
        Error::NonConvergence { .. } => 3,
        _ => 2,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn run(config: &Path, output_dir: Option<PathBuf>) -> ExitCode {
    let mut cfg = match ExperimentConfig::from_path(config) {
        Ok(c) => c,
        Err(Error::Io(e)) => return fail(Error::Config(format!("{}: {e}", config.display()))),
        Err(e) => return fail(e),
    };
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let diagnostics = cfg.diagnostics();
    if !diagnostics.is_empty() {
        for d in diagnostics {
            eprintln!("{}: {d}", config.display());
        }
        return ExitCode::from(1);
    }
    match run_experiment(&cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            for r in outcome.summary.runs.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "run alpha={} capacity={} policy={} seed={} failed: {}",
                    r.alpha,
                    r.capacity,
                    r.policy,
                    r.seed,
                    r.error.as_deref().unwrap_or_default()
                );
            }
            for s in outcome
                .summary
                .steady_state
                .iter()
                .filter(|s| s.error.is_some())
            {
                eprintln!(
                    "steady state seed={} failed: {}",
                    s.seed,
                    s.error.as_deref().unwrap_or_default()
                );
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(Error::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(e) => fail(e),
    }
}

fn validate(config: &Path) -> ExitCode {
    match validate_config(config) {
        Ok(d) if d.is_empty() => {
            println!("{}: ok", config.display());
            ExitCode::SUCCESS
        }
        Ok(d) => {
            for m in d {
                eprintln!("{}: {m}", config.display());
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            ExitCode::from(1)
        }
    }
}

fn read_rates(path: &Path) -> Result<Vec<f64>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut rates = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let Some(field) = rec.iter().next_back() else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) => rates.push(v),
            // A header line.
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}: line {}: not a number: {field:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(rates)
}

fn solve_che(path: &Path, size: f64) -> ExitCode {
    let rates = match read_rates(path) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    match che_characteristic_time(size, &rates) {
        Ok(sol) => {
            let total: f64 = rates.iter().sum();
            let hit: f64 = rates
                .iter()
                .map(|&v| v * content_hit_prob(v, sol.characteristic_time))
                .sum::<f64>()
                / total;
            let out = json!({
                "characteristic_time": sol.characteristic_time,
                "residual": sol.residual,
                "iterations": sol.iterations,
                "method": sol.method,
                "hit_probability": hit,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn window(
    epsilon: f64,
    conf: f64,
    method: WindowMethod,
    alpha: f64,
    catalog: u32,
    lambda: f64,
    cache: Option<u64>,
) -> ExitCode {
    let estimate = PopularityModel::new(alpha, catalog)
        .and_then(|m| estimate_window(method, epsilon, conf, &m, lambda, 0.0));
    let est = match estimate {
        Ok(e) => e,
        Err(e) => return fail(e),
    };
    let mut out = serde_json::to_value(est).expect("json");
    if let Some(c) = cache {
        match wlfu_window(c, catalog as u64, epsilon) {
            Ok(w) => out["wlfu_window"] = json!(w),
            Err(e) => return fail(e),
        }
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Validate { config } => validate(&config),
        Command::SolveChe { popularity, size } => solve_che(&popularity, size),
        Command::Window {
            epsilon,
            conf,
            method,
            alpha,
            catalog,
            lambda,
            cache,
        } => window(epsilon, conf, method, alpha, catalog, lambda, cache),
    }
}
