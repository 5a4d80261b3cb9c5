//! Batch experiments: sweeps of simulations and analyses written out as
//! plot-ready CSV files plus a JSON summary.

mod config;

pub use config::{
    validate_config, AnalyticsToggles, ExperimentConfig, FigureTag, SteadyStateSettings,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{
    che_characteristic_time, content_hit_prob, qq_pairs, steady_state_solve, SteadyStateParams,
};
use crate::cache::PolicyKind;
use crate::sim::{
    direct_rates, measure_received_rates, run_on, MetricsReport, RequestSource, SimulationConfig,
};
use crate::topology::Topology;
use crate::window::{estimate_window, wlfu_window, WindowMethod};
use crate::workload::PopularityModel;
use crate::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";

/// Sort key of a simulation run: exponent, capacity, policy, seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct RunKey {
    // Exponents are positive, so their bit patterns sort numerically.
    alpha: u64,
    capacity: usize,
    policy: PolicyKind,
    seed: u64,
}

impl RunKey {
    fn new(alpha: f64, capacity: usize, policy: PolicyKind, seed: u64) -> Self {
        Self {
            alpha: alpha.to_bits(),
            capacity,
            policy,
            seed,
        }
    }

    fn config(&self, base: &SimulationConfig) -> SimulationConfig {
        SimulationConfig {
            alpha: f64::from_bits(self.alpha),
            capacity: self.capacity,
            policy: self.policy,
            seed: self.seed,
            ..base.clone()
        }
    }
}

/// One simulation run in the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub alpha: f64,
    pub capacity: usize,
    pub policy: PolicyKind,
    pub seed: u64,
    pub error: Option<String>,
    pub hit_probability: Option<f64>,
    pub network_hit_probability: Option<f64>,
    pub first_hop_hit_probability: Option<f64>,
    pub mean_delay: Option<f64>,
    pub insertions: Option<u64>,
    pub measurement_time: Option<f64>,
    pub stream_checksum: Option<String>,
}

/// Row of `fig8-hit-vs-size` and `fig9-hit-vs-alpha`: one sweep point
/// averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRow {
    pub alpha: f64,
    pub capacity: usize,
    pub policy: PolicyKind,
    /// Seeds that completed.
    pub runs: usize,
    pub hit_probability: Option<f64>,
    /// Sample standard deviation over seeds.
    pub hit_probability_sd: Option<f64>,
    pub network_hit_probability: Option<f64>,
    pub first_hop_hit_probability: Option<f64>,
    pub mean_delay: Option<f64>,
    pub insertions: Option<f64>,
    pub error: String,
}

/// Row of `fig6-qq`: rates of requests a node receives from its
/// neighbours.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqRow {
    pub seed: u64,
    pub quantile: Option<f64>,
    /// Rate from the steady-state solution.
    pub theory: Option<f64>,
    /// Rate measured in simulation.
    pub sim: Option<f64>,
    pub error: String,
}

/// Row of `fig7-windows`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRow {
    pub capacity: usize,
    pub catalog: u32,
    pub epsilon: f64,
    pub conf: f64,
    pub wlfu_window: Option<u64>,
    pub lfru_chebyshev: u64,
    pub lfru_clt: u64,
    pub lfru_newton: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateRecord {
    pub seed: u64,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub worst_ratio_deviation: Option<f64>,
    /// Share of quantile pairs whose simulated rate is at least the
    /// theoretical one.
    pub sim_at_least_theory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheRecord {
    pub alpha: f64,
    pub capacity: usize,
    /// `None` when the cache holds the whole catalog.
    pub characteristic_time: Option<f64>,
    /// Request hit probability of an isolated LRU cache under unit total
    /// rate.
    pub hit_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologySummary {
    pub nodes: usize,
    pub edges: usize,
    pub catalog_size: u32,
    pub publisher_attachments: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    /// The config as run, defaults filled in.
    pub config: ExperimentConfig,
    pub topology: TopologySummary,
    pub files: Vec<String>,
    pub failures: usize,
    pub runs: Vec<RunRecord>,
    pub steady_state: Vec<SteadyStateRecord>,
    pub che: Vec<CheRecord>,
    pub windows: Vec<WindowRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub files: Vec<PathBuf>,
    pub failures: usize,
    /// Some failure was a solver giving up.
    pub non_convergence: bool,
}

impl ExperimentOutcome {
    /// 0 when everything ran, 3 when a solver failed to converge, 2 for any
    /// other failed run.
    pub fn exit_code(&self) -> i32 {
        match (self.failures, self.non_convergence) {
            (0, _) => 0,
            (_, true) => 3,
            _ => 2,
        }
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

fn hit_row(
    alpha: f64,
    capacity: usize,
    policy: PolicyKind,
    seeds: &[u64],
    runs: &BTreeMap<RunKey, Result<MetricsReport>>,
) -> HitRow {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for &seed in seeds {
        match &runs[&RunKey::new(alpha, capacity, policy, seed)] {
            Ok(r) => ok.push(r),
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    let pick = |f: fn(&MetricsReport) -> f64| mean(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    HitRow {
        alpha,
        capacity,
        policy,
        runs: ok.len(),
        hit_probability: pick(|r| r.hit_probability),
        hit_probability_sd: sample_sd(&ok.iter().map(|r| r.hit_probability).collect::<Vec<_>>()),
        network_hit_probability: pick(|r| r.network_hit_probability),
        first_hop_hit_probability: pick(|r| r.first_hop_hit_probability),
        mean_delay: pick(|r| r.mean_delay),
        insertions: pick(|r| r.insertions as f64),
        error: errors.join("; "),
    }
}

fn qq_for_seed(
    seed: u64,
    sim_config: &SimulationConfig,
    topology: &Topology,
    settings: &SteadyStateSettings,
    report: &Result<MetricsReport>,
) -> (SteadyStateRecord, Vec<QqRow>, bool) {
    let fail = |e: &Error| {
        let record = SteadyStateRecord {
            seed,
            error: Some(e.to_string()),
            iterations: None,
            worst_ratio_deviation: None,
            sim_at_least_theory: None,
        };
        let row = QqRow {
            seed,
            quantile: None,
            theory: None,
            sim: None,
            error: e.to_string(),
        };
        (record, vec![row], matches!(e, Error::NonConvergence { .. }))
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let solved =
        PopularityModel::new(sim_config.alpha, topology.catalog_size()).and_then(|model| {
            let params = SteadyStateParams {
                capacity: sim_config.capacity,
                model: settings.model,
                occupancy: settings.occupancy,
                epsilon: settings.epsilon,
                max_iterations: settings.max_iterations,
            };
            let rates = direct_rates(sim_config, topology.node_count());
            let solution = steady_state_solve(topology, &rates, &model, &params)?;
            let pairs = qq_pairs(&solution.forwarded_in, &measure_received_rates(report))?;
            Ok((solution, pairs))
        });
    match solved {
        Err(e) => fail(&e),
        Ok((solution, pairs)) => {
            let above = pairs.iter().filter(|p| p.sim >= p.theory).count();
            let record = SteadyStateRecord {
                seed,
                error: None,
                iterations: Some(solution.iterations),
                worst_ratio_deviation: Some(solution.worst_ratio_deviation()),
                sim_at_least_theory: Some(above as f64 / pairs.len().max(1) as f64),
            };
            let rows = pairs
                .into_iter()
                .map(|p| QqRow {
                    seed,
                    quantile: Some(p.quantile),
                    theory: Some(p.theory),
                    sim: Some(p.sim),
                    error: String::new(),
                })
                .collect();
            (record, rows, false)
        }
    }
}

fn window_rows(config: &ExperimentConfig, catalog: u32) -> Result<Vec<WindowRow>> {
    let base = &config.simulation;
    let w = &base.window;
    let model = PopularityModel::new(base.alpha, catalog)?;
    let lambda = base.lambda_min;
    let est = |m: WindowMethod| {
        estimate_window(m, w.epsilon, w.conf, &model, lambda, 0.0).map(|e| e.w_requests)
    };
    let (cheb, clt, newton) = (
        est(WindowMethod::Chebyshev)?,
        est(WindowMethod::Clt)?,
        est(WindowMethod::NewtonRefined)?,
    );
    let mut sizes = config.cache_sizes.clone();
    sizes.sort_unstable();
    Ok(sizes
        .into_iter()
        .map(|capacity| WindowRow {
            capacity,
            catalog,
            epsilon: w.epsilon,
            conf: w.conf,
            wlfu_window: wlfu_window(capacity as u64, catalog as u64, w.epsilon).ok(),
            lfru_chebyshev: cheb,
            lfru_clt: clt,
            lfru_newton: newton,
        })
        .collect())
}

fn che_records(config: &ExperimentConfig, catalog: u32) -> Result<Vec<CheRecord>> {
    let mut alphas = config.alphas.clone();
    alphas.push(config.simulation.alpha);
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let mut sizes = config.cache_sizes.clone();
    sizes.sort_unstable();
    let mut out = Vec::new();
    for alpha in alphas {
        let model = PopularityModel::new(alpha, catalog)?;
        let p = model.probabilities();
        for &capacity in &sizes {
            let (t, hit) = match che_characteristic_time(capacity as f64, p) {
                Ok(sol) => {
                    let t = sol.characteristic_time;
                    (Some(t), p.iter().map(|&v| v * content_hit_prob(v, t)).sum())
                }
                Err(Error::Saturated { .. }) => (None, 1.0),
                Err(e) => return Err(e),
            };
            out.push(CheRecord {
                alpha,
                capacity,
                characteristic_time: t,
                hit_probability: hit,
            });
        }
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

fn record(key: &RunKey, result: &Result<MetricsReport>) -> RunRecord {
    let ok = result.as_ref().ok();
    RunRecord {
        alpha: f64::from_bits(key.alpha),
        capacity: key.capacity,
        policy: key.policy,
        seed: key.seed,
        error: result.as_ref().err().map(|e| e.to_string()),
        hit_probability: ok.map(|r| r.hit_probability),
        network_hit_probability: ok.map(|r| r.network_hit_probability),
        first_hop_hit_probability: ok.map(|r| r.first_hop_hit_probability),
        mean_delay: ok.map(|r| r.mean_delay),
        insertions: ok.map(|r| r.insertions),
        measurement_time: ok.map(|r| r.measurement_time),
        stream_checksum: ok.map(|r| r.stream_checksum.clone()),
    }
}

/// Runs every requested figure and writes its CSV plus the summary into
/// `config.output_dir`.
///
/// Failed runs become error rows; they are counted in the outcome rather
/// than aborting the batch. Invalid configs and I/O failures are errors.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let topology = Topology::build(&config.simulation.topology)?;
    let catalog = topology.catalog_size();
    let base = &config.simulation;
    let wants = |f: FigureTag| config.figures.contains(&f);
    let mut sizes = config.cache_sizes.clone();
    sizes.sort_unstable();
    let mut alphas = config.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let mut policies = config.policies.clone();
    policies.sort_unstable();

    let mut keys = std::collections::BTreeSet::new();
    let mut sweep = |alphas: &[f64]| {
        for &a in alphas {
            for &c in &sizes {
                for &p in &policies {
                    for &s in &seeds {
                        keys.insert(RunKey::new(a, c, p, s));
                    }
                }
            }
        }
    };
    if wants(FigureTag::Fig8HitVsSize) {
        sweep(&[base.alpha]);
    }
    if wants(FigureTag::Fig9HitVsAlpha) {
        sweep(&alphas);
    }
    if wants(FigureTag::Fig6Qq) {
        for &s in &seeds {
            keys.insert(RunKey::new(base.alpha, base.capacity, base.policy, s));
        }
    }

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.workers {
            b = b.num_threads(n);
        }
        b.build()
            .map_err(|e| Error::Config(format!("workers: {e}")))?
    };
    let keys: Vec<RunKey> = keys.into_iter().collect();
    log::info!(
        "running {} simulations on {} nodes",
        keys.len(),
        topology.node_count()
    );
    let results: Vec<Result<MetricsReport>> = pool.install(|| {
        keys.par_iter()
            .map(|k| {
                let r = run_on(&k.config(base), &topology, RequestSource::Poisson);
                if let Err(e) = &r {
                    log::warn!("run {k:?} failed: {e}");
                }
                r
            })
            .collect()
    });
    let runs: BTreeMap<RunKey, Result<MetricsReport>> = keys.into_iter().zip(results).collect();
    let mut failures = runs.values().filter(|r| r.is_err()).count();
    let mut non_convergence = runs
        .values()
        .any(|r| matches!(r, Err(Error::NonConvergence { .. })));

    let mut steady_records = Vec::new();
    let mut qq_rows = Vec::new();
    if config.analytics.steady_state {
        let per_seed: Vec<_> = pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| {
                    let key = RunKey::new(base.alpha, base.capacity, base.policy, s);
                    let sim_config = key.config(base);
                    let report = match runs.get(&key) {
                        Some(r) => r,
                        None => &run_on(&sim_config, &topology, RequestSource::Poisson),
                    };
                    qq_for_seed(s, &sim_config, &topology, &config.steady_state, report)
                })
                .collect()
        });
        for (rec, rows, nc) in per_seed {
            if rec.error.is_some() && wants(FigureTag::Fig6Qq) {
                failures += 1;
                non_convergence |= nc;
            }
            steady_records.push(rec);
            qq_rows.extend(rows);
        }
    }
    let windows = if config.analytics.windows {
        window_rows(config, catalog)?
    } else {
        Vec::new()
    };
    let che = if config.analytics.che {
        che_records(config, catalog)?
    } else {
        Vec::new()
    };

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for &fig in FigureTag::ALL.iter().filter(|&&f| wants(f)) {
        let path = dir.join(fig.file_name());
        match fig {
            FigureTag::Fig6Qq => write_csv(&path, &qq_rows)?,
            FigureTag::Fig7Windows => write_csv(&path, &windows)?,
            FigureTag::Fig8HitVsSize => {
                let rows: Vec<HitRow> = sizes
                    .iter()
                    .flat_map(|&c| policies.iter().map(move |&p| (c, p)))
                    .map(|(c, p)| hit_row(base.alpha, c, p, &seeds, &runs))
                    .collect();
                write_csv(&path, &rows)?;
            }
            FigureTag::Fig9HitVsAlpha => {
                let mut rows = Vec::new();
                for &a in &alphas {
                    for &c in &sizes {
                        for &p in &policies {
                            rows.push(hit_row(a, c, p, &seeds, &runs));
                        }
                    }
                }
                write_csv(&path, &rows)?;
            }
        }
        files.push(path);
    }
    let summary_path = dir.join(SUMMARY_FILE);
    files.push(summary_path.clone());

    let summary = ExperimentSummary {
        config: config.clone(),
        topology: TopologySummary {
            nodes: topology.node_count(),
            edges: topology.graph().edge_count(),
            catalog_size: catalog,
            publisher_attachments: topology.publishers().iter().map(|p| p.attachment).collect(),
        },
        files: files
            .iter()
            .map(|f| f.file_name().expect("file").to_string_lossy().into_owned())
            .collect(),
        failures,
        runs: runs.iter().map(|(k, r)| record(k, r)).collect(),
        steady_state: steady_records,
        che,
        windows,
    };
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(ExperimentOutcome {
        summary,
        files,
        failures,
        non_convergence,
    })
}
