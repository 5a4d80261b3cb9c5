use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::{LfruParams, PolicyKind};
use crate::topology::TopologyParams;
use crate::window::WindowMethod;
use crate::{Error, Result};

/// How LFRU nodes size their observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub method: WindowMethod,
    /// Window estimation error.
    pub epsilon: f64,
    /// Confidence level in percent.
    pub conf: f64,
    /// Recompute the observation time from measured rates and miss delays
    /// at every rollover.
    pub adaptive: bool,
    /// Fixed observation time in seconds, overriding the estimate.
    pub w_time: Option<f64>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            method: WindowMethod::NewtonRefined,
            epsilon: 0.1,
            conf: 95.0,
            adaptive: true,
            w_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub topology: TopologyParams,
    pub policy: PolicyKind,
    /// Slots per cache node.
    pub capacity: usize,
    /// The `window` field here is ignored: LFRU nodes take their window
    /// from `window` below and their own arrival rate.
    pub lfru: LfruParams,
    pub window: WindowConfig,
    /// Zipf exponent.
    pub alpha: f64,
    /// Range of per-node consumer arrival rates, requests per second.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Consumer requests issued over the whole network.
    pub requests: u64,
    /// Leading share of requests excluded from statistics.
    pub warmup_fraction: f64,
    pub seed: u64,
    /// Collect per-content counters for this many top ranks.
    pub content_stats: u32,
    /// Record every cache action.
    pub trace: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            topology: TopologyParams::default(),
            policy: PolicyKind::Lfru,
            capacity: 100,
            lfru: LfruParams::default(),
            window: WindowConfig::default(),
            alpha: 0.8,
            lambda_min: 70.0,
            lambda_max: 100.0,
            requests: 200_000,
            warmup_fraction: 0.2,
            seed: 1,
            content_stats: 0,
            trace: false,
        }
    }
}

impl SimulationConfig {
    /// Every violated constraint, as `field: problem`.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        let t = &self.topology;
        if t.attach < 1 {
            d.push(format!("topology.attach: must be >= 1, got {}", t.attach));
        }
        if t.nodes == 0 {
            d.push("topology.nodes: must be >= 1".into());
        }
        if t.publishers == 0 || t.publishers > t.nodes {
            d.push(format!(
                "topology.publishers: must lie in 1..={}, got {}",
                t.nodes, t.publishers
            ));
        }
        if t.items_per_publisher == 0 {
            d.push("topology.items_per_publisher: must be >= 1".into());
        }
        if (t.items_per_publisher as u64) * (t.publishers as u64) > u32::MAX as u64 {
            d.push("topology.items_per_publisher: catalog exceeds 2^32 contents".into());
        }
        if !(t.hop_delay >= 0.0 && t.hop_delay.is_finite()) {
            d.push(format!(
                "topology.hop_delay: must be >= 0, got {}",
                t.hop_delay
            ));
        }
        for (i, e) in t.edge_delays.iter().enumerate() {
            if !(e.delay >= 0.0 && e.delay.is_finite()) {
                d.push(format!(
                    "topology.edge_delays[{i}].delay: must be >= 0, got {}",
                    e.delay
                ));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            d.push(format!("alpha: must be > 0, got {}", self.alpha));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite()) {
            d.push(format!("lambda_min: must be > 0, got {}", self.lambda_min));
        }
        if !(self.lambda_max.is_finite()) || self.lambda_min > self.lambda_max {
            d.push(format!(
                "lambda_max: must be >= lambda_min ({}), got {}",
                self.lambda_min, self.lambda_max
            ));
        }
        if self.requests == 0 {
            d.push("requests: must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            d.push(format!(
                "warmup_fraction: must lie in [0, 1), got {}",
                self.warmup_fraction
            ));
        }
        let f = self.lfru.unprivileged_fraction;
        if !(0.0..=1.0).contains(&f) {
            d.push(format!(
                "lfru.unprivileged_fraction: must lie in [0, 1], got {f}"
            ));
        } else if self.policy == PolicyKind::Lfru {
            if let Err(Error::Config(msg)) = self.lfru.geometry(self.capacity) {
                d.push(format!("lfru.k_partitions: {msg}"));
            }
        }
        let w = &self.window;
        if !(w.epsilon > 0.0 && w.epsilon < 1.0) {
            d.push(format!(
                "window.epsilon: must lie in (0, 1), got {}",
                w.epsilon
            ));
        }
        if !(w.conf > 0.0 && w.conf < 100.0) {
            d.push(format!("window.conf: must lie in (0, 100), got {}", w.conf));
        }
        if let Some(t) = w.w_time {
            if !(t > 0.0 && t.is_finite()) {
                d.push(format!("window.w_time: must be > 0, got {t}"));
            }
        }
        if self.policy == PolicyKind::Wlfu && self.capacity < 2 {
            d.push(format!(
                "capacity: window LFU needs at least 2 slots, got {}",
                self.capacity
            ));
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d.join("; ")))
        }
    }

    pub fn catalog_size(&self) -> u32 {
        self.topology.catalog_size()
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
