use serde::Serialize;

use crate::cache::PolicyKind;
use crate::{ContentId, NodeId};

/// Counters of one node over the measurement period.
///
/// Every measured request arriving at a node is either a hit or a miss, and
/// every miss is either forwarded upstream or coalesced with a pending one:
/// `arrivals = hits + misses = hits + forwarded + coalesced`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub node: NodeId,
    /// Consumer arrival rate at the node.
    pub direct_rate: f64,
    pub arrivals: u64,
    /// Of `arrivals`, those coming from neighbouring caches.
    pub from_neighbors: u64,
    pub hits: u64,
    pub misses: u64,
    pub forwarded: u64,
    pub coalesced: u64,
    /// Contents stored, warmup included.
    pub insertions: u64,
    pub evictions: u64,
    pub hit_probability: f64,
    /// Requests sent upstream per second of measurement time.
    pub forwarded_rate: f64,
    /// Requests received from neighbours per second of measurement time.
    pub received_rate: f64,
    pub window_requests: Option<u64>,
    /// Observation time at the end of the run.
    pub window_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ContentMetrics {
    pub rank: ContentId,
    /// Measured consumer requests for the content.
    pub requests: u64,
    /// Of those, the ones that hit at the consumer's own node.
    pub first_hits: u64,
    pub hit_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub time: f64,
    pub node: NodeId,
    pub content: ContentId,
    pub action: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub policy: PolicyKind,
    pub capacity: usize,
    pub alpha: f64,
    pub seed: u64,
    pub config_hash: String,
    /// SHA-256 over every issued consumer request (time, node, content).
    pub stream_checksum: String,
    pub requests_issued: u64,
    pub measured_requests: u64,
    /// Seconds between the end of warmup and the last issued request.
    pub measurement_time: f64,
    pub events_processed: u64,
    /// `Σ hits / Σ arrivals` over all nodes.
    pub hit_probability: f64,
    /// Share of measured consumer requests answered by their own node.
    pub first_hop_hit_probability: f64,
    /// Share of measured consumer requests answered by any cache.
    pub network_hit_probability: f64,
    /// Mean consumer-to-content delay of measured requests, in seconds.
    pub mean_delay: f64,
    pub insertions: u64,
    /// Window of LFRU nodes in requests, or the window LFU history length.
    pub window_requests: Option<u64>,
    pub nodes: Vec<NodeMetrics>,
    pub contents: Vec<ContentMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
}

/// Per-node rate of requests sent upstream.
pub fn measure_forwarded_rates(report: &MetricsReport) -> Vec<f64> {
    report.nodes.iter().map(|n| n.forwarded_rate).collect()
}

/// Per-node rate of requests arriving from neighbouring caches.
pub fn measure_received_rates(report: &MetricsReport) -> Vec<f64> {
    report.nodes.iter().map(|n| n.received_rate).collect()
}
