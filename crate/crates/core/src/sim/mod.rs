//! Discrete-event simulation of a cache network.
//!
//! Consumers at every node issue Poisson requests. A request that misses is
//! forwarded hop by hop towards the publisher of the content, and a miss for
//! content already pending upstream is coalesced with the pending one. Data
//! travels back along the reverse path, and every node on it decides whether
//! to keep a copy.

mod config;
mod engine;
mod metrics;

pub use config::{SimulationConfig, WindowConfig};
pub use engine::{direct_rates, run, run_on, RequestSource};
pub use metrics::{
    measure_forwarded_rates, measure_received_rates, ContentMetrics, MetricsReport, NodeMetrics,
    TraceRecord,
};

use rayon::prelude::*;

use crate::cache::PolicyKind;
use crate::topology::Topology;
use crate::Result;

/// Runs every combination of `sizes × alphas × policies` on one topology.
///
/// Results come back in nested loop order, sizes outermost.
pub fn run_sweep(
    base: &SimulationConfig,
    sizes: &[usize],
    alphas: &[f64],
    policies: &[PolicyKind],
) -> Result<Vec<MetricsReport>> {
    base.validate()?;
    let topology = Topology::build(&base.topology)?;
    let mut configs = Vec::new();
    for &capacity in sizes {
        for &alpha in alphas {
            for &policy in policies {
                configs.push(SimulationConfig {
                    capacity,
                    alpha,
                    policy,
                    ..base.clone()
                });
            }
        }
    }
    configs
        .par_iter()
        .map(|c| run_on(c, &topology, RequestSource::Poisson))
        .collect()
}
