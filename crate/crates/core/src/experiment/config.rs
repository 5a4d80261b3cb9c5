use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{NodeModel, Occupancy};
use crate::cache::PolicyKind;
use crate::sim::SimulationConfig;
use crate::{Error, Result};

/// One output dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FigureTag {
    /// Theoretical vs simulated forwarded-rate quantiles.
    #[serde(rename = "fig6-qq")]
    Fig6Qq,
    /// Window sizes against cache size.
    #[serde(rename = "fig7-windows")]
    Fig7Windows,
    /// Hit probability against cache size at the base exponent.
    #[serde(rename = "fig8-hit-vs-size")]
    Fig8HitVsSize,
    /// Hit probability against the Zipf exponent.
    #[serde(rename = "fig9-hit-vs-alpha")]
    Fig9HitVsAlpha,
}

impl FigureTag {
    pub const ALL: [FigureTag; 4] = [
        FigureTag::Fig6Qq,
        FigureTag::Fig7Windows,
        FigureTag::Fig8HitVsSize,
        FigureTag::Fig9HitVsAlpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureTag::Fig6Qq => "fig6-qq",
            FigureTag::Fig7Windows => "fig7-windows",
            FigureTag::Fig8HitVsSize => "fig8-hit-vs-size",
            FigureTag::Fig9HitVsAlpha => "fig9-hit-vs-alpha",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

/// Analytic computations to run next to the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsToggles {
    /// Solve the steady state of every seed's network; needed by `fig6-qq`.
    pub steady_state: bool,
    /// Che estimate of an isolated LRU cache for every size and exponent.
    pub che: bool,
    /// Window sizes for every cache size; needed by `fig7-windows`.
    pub windows: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyStateSettings {
    /// Cache model of every node in the solver.
    pub model: NodeModel,
    /// Largest accepted `|X_j(t+1) / X_j(t) - 1|`.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub occupancy: Occupancy,
}

impl Default for SteadyStateSettings {
    fn default() -> Self {
        Self {
            model: NodeModel::Lru,
            epsilon: 0.001,
            max_iterations: 500,
            occupancy: Occupancy::Fractional,
        }
    }
}

/// A batch of simulations and analyses.
///
/// `simulation` is the base run; sweeps override its capacity, exponent,
/// policy and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub simulation: SimulationConfig,
    pub cache_sizes: Vec<usize>,
    /// Exponents swept by `fig9-hit-vs-alpha`.
    pub alphas: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    pub figures: Vec<FigureTag>,
    pub analytics: AnalyticsToggles,
    pub steady_state: SteadyStateSettings,
    pub output_dir: PathBuf,
    /// Parallel runs; defaults to the number of CPUs.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            simulation: SimulationConfig::default(),
            cache_sizes: vec![50, 100, 200, 400],
            alphas: vec![0.8, 1.2],
            policies: PolicyKind::ALL.to_vec(),
            seeds: vec![1],
            figures: vec![FigureTag::Fig8HitVsSize],
            analytics: AnalyticsToggles::default(),
            steady_state: SteadyStateSettings::default(),
            output_dir: PathBuf::from("results"),
            workers: None,
        }
    }
}

fn duplicates<T: Ord + Clone>(items: &[T]) -> bool {
    items.iter().cloned().collect::<BTreeSet<_>>().len() != items.len()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Every violated constraint, as `field: problem`.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d: Vec<String> = self
            .simulation
            .diagnostics()
            .into_iter()
            .map(|m| format!("simulation.{m}"))
            .collect();
        let sweeps_runs = self
            .figures
            .iter()
            .any(|f| matches!(f, FigureTag::Fig8HitVsSize | FigureTag::Fig9HitVsAlpha));
        if self.cache_sizes.is_empty()
            && (sweeps_runs || self.figures.contains(&FigureTag::Fig7Windows))
        {
            d.push("cache_sizes: must not be empty".into());
        }
        if duplicates(&self.cache_sizes) {
            d.push("cache_sizes: contains duplicates".into());
        }
        for &c in &self.cache_sizes {
            let probe = SimulationConfig {
                capacity: c,
                ..self.simulation.clone()
            };
            for &policy in &self.policies {
                let probe = SimulationConfig {
                    policy,
                    ..probe.clone()
                };
                for m in probe.diagnostics() {
                    if m.starts_with("capacity") || m.starts_with("lfru.k_partitions") {
                        d.push(format!("cache_sizes: {c} with {policy}: {m}"));
                    }
                }
            }
        }
        if self.figures.contains(&FigureTag::Fig9HitVsAlpha) && self.alphas.is_empty() {
            d.push("alphas: must not be empty".into());
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a.is_finite()) {
                d.push(format!("alphas: must be > 0, got {a}"));
            }
        }
        if duplicates(&self.alphas.iter().map(|a| a.to_bits()).collect::<Vec<_>>()) {
            d.push("alphas: contains duplicates".into());
        }
        if sweeps_runs && self.policies.is_empty() {
            d.push("policies: must not be empty".into());
        }
        if duplicates(&self.policies) {
            d.push("policies: contains duplicates".into());
        }
        if self.seeds.is_empty() {
            d.push("seeds: must not be empty".into());
        }
        if duplicates(&self.seeds) {
            d.push("seeds: contains duplicates".into());
        }
        if self.figures.is_empty() {
            d.push("figures: must not be empty".into());
        }
        if duplicates(&self.figures) {
            d.push("figures: contains duplicates".into());
        }
        if self.figures.contains(&FigureTag::Fig6Qq) && !self.analytics.steady_state {
            d.push("analytics.steady_state: fig6-qq needs the steady-state solver".into());
        }
        if self.figures.contains(&FigureTag::Fig7Windows) && !self.analytics.windows {
            d.push("analytics.windows: fig7-windows needs window sizing".into());
        }
        let s = &self.steady_state;
        if !(s.epsilon > 0.0 && s.epsilon < 1.0) {
            d.push(format!(
                "steady_state.epsilon: must lie in (0, 1), got {}",
                s.epsilon
            ));
        }
        if s.max_iterations == 0 {
            d.push("steady_state.max_iterations: must be >= 1".into());
        }
        if self.workers == Some(0) {
            d.push("workers: must be >= 1".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            d.push("output_dir: must not be empty".into());
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("\n")))
        }
    }
}

/// Diagnostics of the config at `path`; empty when it is valid. Parse
/// errors are reported with their line and column.
pub fn validate_config(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(match ExperimentConfig::from_json(&text) {
        Ok(c) => c.diagnostics(),
        Err(e) => vec![e.to_string()],
    })
}
