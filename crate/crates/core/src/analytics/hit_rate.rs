use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::che::{che_characteristic_time, content_hit_prob};
use crate::error::domain;
use crate::{ContentId, Error, Result};

/// How sub-partition hit rates are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HitRateForm {
    /// `h_p = (1/|partition|) Σ P_h(n)`: the mean per-content hit
    /// probability over the sub-partition's contents.
    #[default]
    AsPrinted,
    /// `h_p = Σ share(n) P_h(n)`: each content weighted by its share of
    /// all requests, so that `h_total` is a request hit probability.
    RequestWeighted,
}

/// Which contents compete for which part of an LFRU cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    /// Contents held by the unprivileged partition.
    pub unprivileged: Vec<ContentId>,
    /// `(size, contents)` of every privileged sub-partition; the contents
    /// are those competing for it, and may outnumber its slots.
    pub privileged: Vec<(usize, Vec<ContentId>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitRateEstimate {
    pub h_u: f64,
    pub h_p: Vec<f64>,
    pub h_total: f64,
    /// Characteristic time of every sub-partition; `None` when it holds
    /// all of its contents.
    pub characteristic_times: Vec<Option<f64>>,
}

/// Lower bound `(1 - ε) Σ_{i ∈ ranks} 1 / (i ln C)` on the hit rate of a
/// windowed LFU partition holding `ranks` under Zipf popularity with
/// exponent 1 over `catalog_size` contents.
pub fn alfu_hit_bound(ranks: &[ContentId], catalog_size: f64, epsilon: f64) -> Result<f64> {
    if !(catalog_size > 1.0 && catalog_size.is_finite()) {
        return Err(domain(format!(
            "catalog size must exceed 1, got {catalog_size}"
        )));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(domain(format!(
            "window error must lie in [0, 1), got {epsilon}"
        )));
    }
    if let Some(r) = ranks
        .iter()
        .find(|&&r| r == 0 || r as f64 > catalog_size.ceil())
    {
        return Err(domain(format!("rank {r} outside the catalog")));
    }
    let ln_c = catalog_size.ln();
    let sum: f64 = ranks.iter().map(|&i| 1.0 / (i as f64 * ln_c)).sum();
    Ok((1.0 - epsilon) * sum)
}

/// Unprivileged partition on the `unprivileged` most popular ranks; the
/// remaining ranks dealt round-robin to the sub-partitions.
pub fn popularity_order_assignment(
    unprivileged: usize,
    partition_sizes: &[usize],
    catalog_size: u32,
) -> PartitionAssignment {
    let u = (unprivileged as u32).min(catalog_size);
    let mut privileged: Vec<(usize, Vec<ContentId>)> =
        partition_sizes.iter().map(|&s| (s, Vec::new())).collect();
    if !privileged.is_empty() {
        let k = privileged.len();
        for (i, rank) in (u + 1..=catalog_size).enumerate() {
            privileged[i % k].1.push(rank);
        }
    }
    PartitionAssignment {
        unprivileged: (1..=u).collect(),
        privileged,
    }
}

/// Hit rate of an LFRU cache as the windowed-LFU bound plus a Che estimate
/// for every privileged sub-partition.
///
/// `rates[n - 1]` is the request rate of rank `n`; `catalog_size` enters
/// only the unprivileged bound.
pub fn lfru_hit_rate(
    assignment: &PartitionAssignment,
    rates: &[f64],
    catalog_size: f64,
    epsilon: f64,
    form: HitRateForm,
) -> Result<HitRateEstimate> {
    let mut seen = HashSet::new();
    let all = assignment
        .unprivileged
        .iter()
        .chain(assignment.privileged.iter().flat_map(|(_, c)| c));
    for &c in all {
        if c == 0 || c as usize > rates.len() {
            return Err(domain(format!("content {c} has no rate")));
        }
        if !seen.insert(c) {
            return Err(domain(format!("content {c} assigned twice")));
        }
    }
    if let Some((k, _)) = assignment
        .privileged
        .iter()
        .enumerate()
        .find(|(_, (s, _))| *s == 0)
    {
        return Err(domain(format!("sub-partition {k} has no slots")));
    }
    let h_u = alfu_hit_bound(&assignment.unprivileged, catalog_size, epsilon)?;
    let total_rate: f64 = rates.iter().sum();
    if form == HitRateForm::RequestWeighted && !(total_rate > 0.0) {
        return Err(domain(
            "request-weighted hit rate needs a positive total rate",
        ));
    }

    let mut h_p = Vec::with_capacity(assignment.privileged.len());
    let mut times = Vec::with_capacity(assignment.privileged.len());
    for (size, contents) in &assignment.privileged {
        let local: Vec<f64> = contents.iter().map(|&c| rates[c as usize - 1]).collect();
        let t = match che_characteristic_time(*size as f64, &local) {
            Ok(sol) => Some(sol.characteristic_time),
            Err(Error::Saturated { .. }) => None,
            Err(e) => return Err(e),
        };
        let p_hit = |v: f64| match t {
            Some(t) => content_hit_prob(v, t),
            None if v > 0.0 => 1.0,
            None => 0.0,
        };
        let h = match form {
            HitRateForm::AsPrinted => local.iter().map(|&v| p_hit(v)).sum::<f64>() / *size as f64,
            HitRateForm::RequestWeighted => local.iter().map(|&v| v / total_rate * p_hit(v)).sum(),
        };
        h_p.push(h);
        times.push(t);
    }
    Ok(HitRateEstimate {
        h_u,
        h_total: h_u + h_p.iter().sum::<f64>(),
        h_p,
        characteristic_times: times,
    })
}
