//! Cache state and eviction/admission policies.
//!
//! Every policy implements [`CachePolicy`]. A request first consults the
//! cache with [`CachePolicy::on_request`]; when the content later travels
//! back through a cache that missed, [`CachePolicy::admit`] decides whether
//! to keep a copy and what to evict.
//!
//! [`LfruCache`] splits its capacity into an unprivileged partition managed
//! by window-counted LFU and `K` privileged LRU sub-partitions. Admission is
//! conditional on the content's pending-request count, which turns plain
//! leave-copy-everywhere replication into the conditional variant. The
//! baselines ([`LruCache`], [`LfuCache`], [`WlfuCache`], [`RandomCache`])
//! use one unpartitioned store and always admit.

mod baseline;
mod lfru;
mod priority;
mod recency;

use serde::{Deserialize, Serialize};

pub use baseline::{LfuCache, LruCache, RandomCache, WlfuCache};
pub use lfru::{LfruCache, LfruParams, WindowSettings};
pub use priority::{priority, PriorityContext, PriorityFunction, PriorityStage};
pub use recency::RecencyList;

use crate::error::domain;
use crate::{ContentId, Result};

/// Outcome of looking a request up in one cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lookup {
    Hit,
    Miss,
}

/// What a cache did with content passing through it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissionDecision {
    /// Passed on without keeping a copy.
    Forward,
    /// Stored in the unprivileged partition, replacing `evicted` if full.
    StoreUnprivileged { evicted: Option<ContentId> },
    /// Stored as most recent in privileged sub-partition `partition`; its
    /// least recent content was `demoted` to the unprivileged partition,
    /// which in turn dropped `evicted`.
    Promote {
        partition: usize,
        demoted: Option<ContentId>,
        evicted: Option<ContentId>,
    },
    /// Stored by an unpartitioned baseline cache.
    Store { evicted: Option<ContentId> },
}

impl AdmissionDecision {
    pub fn stored(&self) -> bool {
        !matches!(self, AdmissionDecision::Forward)
    }

    /// The content that left the cache, if any.
    pub fn evicted(&self) -> Option<ContentId> {
        match *self {
            AdmissionDecision::Forward => None,
            AdmissionDecision::StoreUnprivileged { evicted }
            | AdmissionDecision::Promote { evicted, .. }
            | AdmissionDecision::Store { evicted } => evicted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Lfru,
    Lru,
    Lfu,
    Wlfu,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Lfru,
        PolicyKind::Lru,
        PolicyKind::Lfu,
        PolicyKind::Wlfu,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Lfru => "lfru",
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::Wlfu => "wlfu",
            PolicyKind::Random => "random",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| domain(format!("unknown policy {s:?}")))
    }
}

/// Common interface of all eviction policies.
pub trait CachePolicy: Send + std::fmt::Debug {
    fn kind(&self) -> PolicyKind;

    fn capacity(&self) -> usize;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn contains(&self, content: ContentId) -> bool;

    /// Looks up a request arriving at time `now`, updating counters.
    fn on_request(&mut self, content: ContentId, now: f64) -> Lookup;

    /// Decides whether to keep `content`, which is passing through the cache
    /// at time `now` and is not stored.
    fn admit(&mut self, content: ContentId, now: f64) -> AdmissionDecision;

    /// Rolls the observation window forward to `now`.
    fn advance_window(&mut self, _now: f64) {}

    /// Reports how long a miss took to be answered.
    fn observe_miss_delay(&mut self, _delay: f64) {}

    /// Current observation time, for windowed policies.
    fn window_time(&self) -> Option<f64> {
        None
    }

    /// Window length in requests, for windowed policies.
    fn window_requests(&self) -> Option<u64> {
        None
    }

    /// Stored contents in ascending id order.
    fn contents(&self) -> Vec<ContentId>;

    /// Full structural check; returns a description of the first violation.
    fn check_invariants(&self) -> std::result::Result<(), String>;

    /// JSON rendering of partitions and counters with a stable key order.
    fn debug_dump(&self) -> String;
}

/// Everything needed to build one node's cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSpec {
    pub policy: PolicyKind,
    pub capacity: usize,
    #[serde(default)]
    pub lfru: LfruParams,
    /// History length of the window LFU baseline, in requests.
    #[serde(default = "unbounded_window")]
    pub wlfu_window: u64,
    /// Seed of the random-eviction baseline.
    #[serde(default)]
    pub seed: u64,
}

fn unbounded_window() -> u64 {
    u64::MAX
}

impl CacheSpec {
    pub fn new(policy: PolicyKind, capacity: usize) -> Self {
        Self {
            policy,
            capacity,
            lfru: LfruParams::default(),
            wlfu_window: u64::MAX,
            seed: 0,
        }
    }
}

pub fn build_cache(spec: &CacheSpec) -> Result<Box<dyn CachePolicy>> {
    Ok(match spec.policy {
        PolicyKind::Lfru => Box::new(LfruCache::new(spec.capacity, spec.lfru.clone())?),
        PolicyKind::Lru => Box::new(LruCache::new(spec.capacity)),
        PolicyKind::Lfu => Box::new(LfuCache::new(spec.capacity)),
        PolicyKind::Wlfu => Box::new(WlfuCache::new(spec.capacity, spec.wlfu_window)?),
        PolicyKind::Random => Box::new(RandomCache::new(spec.capacity, spec.seed)),
    })
}

/// Admission by a baseline policy for `content`, which must not be stored.
pub fn baseline_admit(
    cache: &mut dyn CachePolicy,
    content: ContentId,
    now: f64,
) -> Result<AdmissionDecision> {
    if cache.kind() == PolicyKind::Lfru {
        return Err(domain("LFRU is not a baseline policy"));
    }
    if cache.contains(content) {
        return Err(domain(format!("content {content} is already stored")));
    }
    Ok(cache.admit(content, now))
}
