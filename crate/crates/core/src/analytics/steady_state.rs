//! Fixed point of per-content request rates over a routed cache network.
//!
//! Every node `j` sees, for every content `n`, its direct consumer rate
//! `λ_j^d p(n)` plus the misses its downstream neighbours forward to it.
//! Hit probabilities follow from the local rates through a per-node cache
//! model, and the misses feed the next round. The iteration stops when the
//! mean popularity of stored content, `X_j = (1/|n_j|) Σ_n occ_j(n) v_j(n)`,
//! changes by at most a factor `1 ± ε` at every node between rounds.

use serde::{Deserialize, Serialize};

use super::che::{che_characteristic_time, content_hit_prob};
use crate::error::domain;
use crate::topology::Topology;
use crate::workload::PopularityModel;
use crate::{ContentId, Error, NodeId, Result};

/// Per-node cache model used to turn local rates into hit probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NodeModel {
    /// Che approximation over all contents.
    Lru,
    /// The most requested contents, always.
    Lfu,
    /// The `floor(f |n_j|)` most requested contents hit with probability
    /// `1 - ε`; the rest of the capacity is an LRU over the other contents.
    Lfru {
        unprivileged_fraction: f64,
        epsilon: f64,
    },
}

/// How a cache's content set is represented between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Occupancy {
    /// Each content is stored with its hit probability.
    #[default]
    Fractional,
    /// The `|n_j|` contents with the highest hit probability are stored.
    HardTopRanks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyStateParams {
    pub capacity: usize,
    pub model: NodeModel,
    pub occupancy: Occupancy,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for SteadyStateParams {
    fn default() -> Self {
        Self {
            capacity: 100,
            model: NodeModel::Lfru {
                unprivileged_fraction: 0.2,
                epsilon: 0.1,
            },
            occupancy: Occupancy::Fractional,
            epsilon: 0.001,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateResult {
    /// Rate of requests each node sends upstream, publisher links included.
    pub forwarded_out: Vec<f64>,
    /// Rate of requests each node receives from neighbouring caches.
    pub forwarded_in: Vec<f64>,
    pub total_arrival: Vec<f64>,
    /// Request-weighted hit probability of every node.
    pub hit_probability: Vec<f64>,
    /// The `|n_j|` contents most likely to be stored, by descending
    /// occupancy.
    pub cached_ranks: Vec<Vec<ContentId>>,
    pub iterations: usize,
    /// `X_j(t+1) / X_j(t)` of the final round.
    pub ratios: Vec<f64>,
    /// Largest `|ratio - 1|` of every round.
    pub worst_history: Vec<f64>,
}

impl SteadyStateResult {
    pub fn worst_ratio_deviation(&self) -> f64 {
        self.worst_history.last().copied().unwrap_or(0.0)
    }
}

/// Indices of `rates` sorted by descending rate, lowest index first on ties.
fn by_rate(rates: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rates.len()).collect();
    idx.sort_by(|&a, &b| rates[b].total_cmp(&rates[a]).then(a.cmp(&b)));
    idx
}

fn lru_hits(rates: &[f64], size: f64, out: &mut [f64], members: &[usize]) -> Result<()> {
    if size <= 0.0 {
        return Ok(());
    }
    let local: Vec<f64> = members.iter().map(|&i| rates[i]).collect();
    match che_characteristic_time(size, &local) {
        Ok(sol) => {
            for &i in members {
                out[i] = content_hit_prob(rates[i], sol.characteristic_time);
            }
        }
        Err(Error::Saturated { .. }) => {
            for &i in members {
                out[i] = if rates[i] > 0.0 { 1.0 } else { 0.0 };
            }
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Hit probability of every content at one node.
fn node_hits(rates: &[f64], params: &SteadyStateParams) -> Result<Vec<f64>> {
    let n = params.capacity;
    let mut hits = vec![0.0; rates.len()];
    let order = by_rate(rates);
    match (params.occupancy, params.model) {
        (Occupancy::HardTopRanks, _) | (_, NodeModel::Lfu) => {
            for &i in order.iter().take(n) {
                hits[i] = if rates[i] > 0.0 { 1.0 } else { 0.0 };
            }
        }
        (Occupancy::Fractional, NodeModel::Lru) => {
            lru_hits(rates, n as f64, &mut hits, &order)?;
        }
        (
            Occupancy::Fractional,
            NodeModel::Lfru {
                unprivileged_fraction,
                epsilon,
            },
        ) => {
            let u = (((unprivileged_fraction * n as f64) + 1e-9).floor() as usize).min(rates.len());
            for &i in order.iter().take(u) {
                hits[i] = if rates[i] > 0.0 { 1.0 - epsilon } else { 0.0 };
            }
            lru_hits(rates, (n - u.min(n)) as f64, &mut hits, &order[u..])?;
        }
    }
    Ok(hits)
}

fn mean_popularity(rates: &[f64], hits: &[f64], capacity: usize) -> f64 {
    if capacity == 0 {
        return 0.0;
    }
    rates.iter().zip(hits).map(|(r, h)| r * h).sum::<f64>() / capacity as f64
}

fn ratio(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        if new == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        new / old
    }
}

/// Iterates request rates and cache states to a steady state.
///
/// `direct_rates[j]` is the consumer arrival rate at node `j`.
pub fn steady_state_solve(
    topology: &Topology,
    direct_rates: &[f64],
    popularity: &PopularityModel,
    params: &SteadyStateParams,
) -> Result<SteadyStateResult> {
    let nodes = topology.node_count();
    if direct_rates.len() != nodes {
        return Err(domain(format!(
            "{} direct rates for {nodes} nodes",
            direct_rates.len()
        )));
    }
    if let Some(r) = direct_rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(domain(format!("invalid direct rate {r}")));
    }
    if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        return Err(domain(format!(
            "steady-state ε must lie in (0, 1), got {}",
            params.epsilon
        )));
    }
    if let NodeModel::Lfru {
        unprivileged_fraction,
        epsilon,
    } = params.model
    {
        if !(0.0..=1.0).contains(&unprivileged_fraction) || !(0.0..1.0).contains(&epsilon) {
            return Err(domain(
                "LFRU model needs a fraction in [0, 1] and ε in [0, 1)",
            ));
        }
    }
    let catalog = popularity.catalog_size();
    if catalog != topology.catalog_size() {
        return Err(domain(format!(
            "popularity covers {catalog} contents, topology {}",
            topology.catalog_size()
        )));
    }
    let pmf = popularity.probabilities();
    // next[j][i]: where node j sends misses for rank i + 1.
    let next: Vec<Vec<Option<NodeId>>> = (0..nodes)
        .map(|j| {
            (1..=catalog)
                .map(|r| topology.next_hop(j, r))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let direct: Vec<Vec<f64>> = direct_rates
        .iter()
        .map(|&l| pmf.iter().map(|p| l * p).collect())
        .collect();

    let solve_hits = |rates: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        rates.iter().map(|r| node_hits(r, params)).collect()
    };
    let mut rates = direct.clone();
    let mut hits = solve_hits(&rates)?;
    let mut x_prev: Vec<f64> = (0..nodes)
        .map(|j| mean_popularity(&rates[j], &hits[j], params.capacity))
        .collect();
    let mut worst_history = Vec::new();
    let mut ratios = vec![1.0; nodes];

    for iteration in 1..=params.max_iterations {
        let mut next_rates = direct.clone();
        for j in 0..nodes {
            for i in 0..catalog as usize {
                if let Some(k) = next[j][i] {
                    next_rates[k][i] += rates[j][i] * (1.0 - hits[j][i]);
                }
            }
        }
        rates = next_rates;
        hits = solve_hits(&rates)?;
        let x: Vec<f64> = (0..nodes)
            .map(|j| mean_popularity(&rates[j], &hits[j], params.capacity))
            .collect();
        ratios = x.iter().zip(&x_prev).map(|(&a, &b)| ratio(a, b)).collect();
        let worst = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        log::debug!("steady state round {iteration}: worst |X ratio - 1| = {worst:e}");
        worst_history.push(worst);
        x_prev = x;
        if worst <= params.epsilon {
            return Ok(summarize(
                &direct,
                &rates,
                &hits,
                params.capacity,
                iteration,
                ratios,
                worst_history,
            ));
        }
    }
    Err(Error::NonConvergence {
        iterations: params.max_iterations,
        worst: worst_history.last().copied().unwrap_or(f64::NAN),
    })
}

fn summarize(
    direct: &[Vec<f64>],
    rates: &[Vec<f64>],
    hits: &[Vec<f64>],
    capacity: usize,
    iterations: usize,
    ratios: Vec<f64>,
    worst_history: Vec<f64>,
) -> SteadyStateResult {
    let nodes = rates.len();
    let mut out = SteadyStateResult {
        forwarded_out: Vec::with_capacity(nodes),
        forwarded_in: Vec::with_capacity(nodes),
        total_arrival: Vec::with_capacity(nodes),
        hit_probability: Vec::with_capacity(nodes),
        cached_ranks: Vec::with_capacity(nodes),
        iterations,
        ratios,
        worst_history,
    };
    for j in 0..nodes {
        let total: f64 = rates[j].iter().sum();
        let served: f64 = rates[j].iter().zip(&hits[j]).map(|(r, h)| r * h).sum();
        out.total_arrival.push(total);
        out.forwarded_out.push(total - served);
        out.forwarded_in.push(total - direct[j].iter().sum::<f64>());
        out.hit_probability
            .push(if total > 0.0 { served / total } else { 0.0 });
        let mut idx: Vec<usize> = (0..hits[j].len()).filter(|&i| hits[j][i] > 0.0).collect();
        idx.sort_by(|&a, &b| hits[j][b].total_cmp(&hits[j][a]).then(a.cmp(&b)));
        out.cached_ranks.push(
            idx.into_iter()
                .take(capacity)
                .map(|i| i as ContentId + 1)
                .collect(),
        );
    }
    out
}
