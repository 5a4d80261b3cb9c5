//! Least Frequent Recently Used cache.
//!
//! ```text
//!   capacity |n_j|
//!   ┌───────────────────────┬────────────────────────────────────────┐
//!   │ unprivileged (ALFU)   │ privileged: K LRU sub-partitions       │
//!   │ per-item counters     │ ┌──────────┐┌──────────┐  ┌──────────┐ │
//!   │ N_ALFU                │ │ k=0 N_LRU││ k=1 N_LRU│..│ K-1      │ │
//!   │ floor(f * |n_j|)      │ └──────────┘└──────────┘  └──────────┘ │
//!   └───────────────────────┴────────────────────────────────────────┘
//!   N_UR: pending-request counts for contents not stored
//! ```
//!
//! All counters are per observation window and reset together when the
//! window rolls over. Admission compares the arriving content's pending
//! count `tau` with the unprivileged counters:
//!
//! - `tau < min(N_ALFU)` (or lower priority than the weakest item): forward;
//! - `min <= tau <= max`: replace the weakest unprivileged item;
//! - `tau > max`: insert into the sub-partition whose hit counter is closest
//!   to `tau`, demoting its least recent item into the unprivileged
//!   partition in place of the weakest item.
//!
//! Until the cache is full every content is stored: unprivileged first, then
//! the sub-partitions round-robin.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::priority::{PriorityContext, PriorityFunction};
use super::recency::RecencyList;
use super::{AdmissionDecision, CachePolicy, Lookup, PolicyKind};
use crate::error::config;
use crate::window::window_time;
use crate::{ContentId, Result};

/// Observation-window configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSettings {
    /// Window length in request arrivals. When set, the observation time is
    /// recomputed at every rollover from the observed arrival rate and the
    /// average miss delay of the window that just ended.
    pub w_requests: Option<u64>,
    /// Initial observation time in seconds; `None` never rolls over.
    pub w_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LfruParams {
    /// Share of capacity given to the unprivileged partition.
    pub unprivileged_fraction: f64,
    /// Number of privileged sub-partitions.
    pub k_partitions: usize,
    pub priority: PriorityFunction,
    pub window: WindowSettings,
}

impl Default for LfruParams {
    fn default() -> Self {
        Self {
            unprivileged_fraction: 0.2,
            k_partitions: 4,
            priority: PriorityFunction::neutral(),
            window: WindowSettings::default(),
        }
    }
}

impl LfruParams {
    /// Unprivileged slots and per-sub-partition slots for `capacity`.
    pub fn geometry(&self, capacity: usize) -> Result<(usize, Vec<usize>)> {
        let f = self.unprivileged_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(config(format!(
                "unprivileged_fraction must lie in [0, 1], got {f}"
            )));
        }
        let unprivileged = ((f * capacity as f64) + 1e-9).floor() as usize;
        let privileged = capacity - unprivileged.min(capacity);
        let k = self.k_partitions;
        if privileged == 0 {
            if k != 0 {
                return Err(config(format!(
                    "{k} privileged sub-partitions requested but no privileged slots"
                )));
            }
            return Ok((unprivileged, Vec::new()));
        }
        if k == 0 || k > privileged {
            return Err(config(format!(
                "k_partitions must lie in 1..={privileged} for {privileged} privileged slots, got {k}"
            )));
        }
        let base = privileged / k;
        let extra = privileged % k;
        let caps = (0..k).map(|i| base + usize::from(i < extra)).collect();
        Ok((unprivileged, caps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Unprivileged,
    Privileged(usize),
}

#[derive(Debug, Clone, Copy)]
struct Counter {
    count: u64,
    last_used: u64,
}

/// Window-counted LFU partition ordered by (count, recency, id).
#[derive(Debug, Clone, Default)]
struct Unprivileged {
    entries: HashMap<ContentId, Counter>,
    order: BTreeSet<(u64, u64, ContentId)>,
    total: u64,
}

impl Unprivileged {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn insert(&mut self, id: ContentId, count: u64, tick: u64) {
        let c = Counter {
            count,
            last_used: tick,
        };
        if let Some(old) = self.entries.insert(id, c) {
            self.order.remove(&(old.count, old.last_used, id));
            self.total -= old.count;
        }
        self.order.insert((count, tick, id));
        self.total += count;
    }

    fn remove(&mut self, id: ContentId) -> Option<u64> {
        let c = self.entries.remove(&id)?;
        self.order.remove(&(c.count, c.last_used, id));
        self.total -= c.count;
        Some(c.count)
    }

    fn bump(&mut self, id: ContentId, tick: u64) {
        if let Some(c) = self.entries.get(&id).copied() {
            self.insert(id, c.count + 1, tick);
        }
    }

    /// The weakest item: lowest count, then least recent, then lowest id.
    fn weakest(&self) -> Option<(ContentId, u64)> {
        self.order.first().map(|&(count, _, id)| (id, count))
    }

    fn max_count(&self) -> Option<u64> {
        self.order.last().map(|&(count, _, _)| count)
    }

    fn reset(&mut self) {
        self.order = self
            .entries
            .iter_mut()
            .map(|(&id, c)| {
                c.count = 0;
                (0, c.last_used, id)
            })
            .collect();
        self.total = 0;
    }
}

#[derive(Debug, Clone)]
struct SubPartition {
    capacity: usize,
    lru: RecencyList,
    hits: u64,
    last_used: u64,
}

#[derive(Debug, Clone)]
struct WindowClock {
    start: f64,
    length: Option<f64>,
    w_requests: Option<u64>,
    arrivals: u64,
    delay_sum: f64,
    delay_count: u64,
}

#[derive(Debug, Clone)]
pub struct LfruCache {
    capacity: usize,
    unprivileged_capacity: usize,
    unprivileged: Unprivileged,
    privileged: Vec<SubPartition>,
    location: HashMap<ContentId, Slot>,
    unresponded: HashMap<ContentId, u64>,
    priority: PriorityFunction,
    window: WindowClock,
    tick: u64,
    fill_cursor: usize,
}

impl LfruCache {
    pub fn new(capacity: usize, params: LfruParams) -> Result<Self> {
        let (unprivileged_capacity, caps) = params.geometry(capacity)?;
        if let Some(t) = params.window.w_time {
            if !(t > 0.0) {
                return Err(config(format!("window time must be > 0, got {t}")));
            }
        }
        Ok(Self {
            capacity,
            unprivileged_capacity,
            unprivileged: Unprivileged::default(),
            privileged: caps
                .into_iter()
                .map(|capacity| SubPartition {
                    capacity,
                    lru: RecencyList::new(),
                    hits: 0,
                    last_used: 0,
                })
                .collect(),
            location: HashMap::new(),
            unresponded: HashMap::new(),
            priority: params.priority,
            window: WindowClock {
                start: 0.0,
                length: params.window.w_time,
                w_requests: params.window.w_requests,
                arrivals: 0,
                delay_sum: 0.0,
                delay_count: 0,
            },
            tick: 0,
            fill_cursor: 0,
        })
    }

    pub fn unprivileged_capacity(&self) -> usize {
        self.unprivileged_capacity
    }

    pub fn partition_capacities(&self) -> Vec<usize> {
        self.privileged.iter().map(|p| p.capacity).collect()
    }

    /// `(content, counter)` for the unprivileged partition, by content id.
    pub fn unprivileged_counters(&self) -> Vec<(ContentId, u64)> {
        let mut v: Vec<_> = self
            .unprivileged
            .entries
            .iter()
            .map(|(&id, c)| (id, c.count))
            .collect();
        v.sort_unstable();
        v
    }

    /// Hit counter of every sub-partition.
    pub fn partition_hits(&self) -> Vec<u64> {
        self.privileged.iter().map(|p| p.hits).collect()
    }

    /// Contents of sub-partition `k`, most recent first.
    pub fn partition_contents(&self, k: usize) -> Vec<ContentId> {
        self.privileged[k].lru.iter_mru().collect()
    }

    pub fn unprivileged_contents(&self) -> Vec<ContentId> {
        self.unprivileged_counters()
            .into_iter()
            .map(|(id, _)| id)
            .collect()
    }

    /// Pending-request count of a content that is not stored.
    pub fn unresponded(&self, content: ContentId) -> u64 {
        self.unresponded.get(&content).copied().unwrap_or(0)
    }

    /// Partition holding `content`: `None` if absent, `Some(None)` for the
    /// unprivileged partition, `Some(Some(k))` for sub-partition `k`.
    pub fn partition_of(&self, content: ContentId) -> Option<Option<usize>> {
        self.location.get(&content).map(|s| match s {
            Slot::Unprivileged => None,
            Slot::Privileged(k) => Some(*k),
        })
    }

    pub fn window_start(&self) -> f64 {
        self.window.start
    }

    fn priority_allows(&self, tau: u64, victim_count: u64) -> bool {
        if self.priority.is_neutral() {
            return true;
        }
        // Rates are per-window counts; the arrival itself is one request.
        let ctx = |rate: u64| PriorityContext {
            content_size: self.priority.content_size,
            capacity: self.capacity as f64,
            unprivileged_total: self.unprivileged.total.max(1) as f64,
            tau_hat: rate.max(1) as f64,
        };
        match (
            self.priority.evaluate(&ctx(tau)),
            self.priority.evaluate(&ctx(victim_count)),
        ) {
            (Ok(new), Ok(victim)) => new >= victim,
            _ => false,
        }
    }

    fn cold_fill(&mut self, content: ContentId, tau: u64) -> AdmissionDecision {
        if self.unprivileged.len() < self.unprivileged_capacity {
            self.unprivileged.insert(content, tau, self.tick);
            self.location.insert(content, Slot::Unprivileged);
            return AdmissionDecision::StoreUnprivileged { evicted: None };
        }
        let k_count = self.privileged.len();
        let k = (0..k_count)
            .map(|i| (self.fill_cursor + i) % k_count)
            .find(|&k| self.privileged[k].lru.len() < self.privileged[k].capacity)
            .expect("cache not full implies a sub-partition has room");
        self.fill_cursor = (k + 1) % k_count;
        let p = &mut self.privileged[k];
        p.lru.touch(content);
        p.last_used = self.tick;
        self.location.insert(content, Slot::Privileged(k));
        AdmissionDecision::Promote {
            partition: k,
            demoted: None,
            evicted: None,
        }
    }

    fn replace_weakest(&mut self, content: ContentId, tau: u64) -> AdmissionDecision {
        match self.unprivileged.weakest() {
            Some((victim, _)) => {
                self.unprivileged.remove(victim);
                self.location.remove(&victim);
                self.unprivileged.insert(content, tau, self.tick);
                self.location.insert(content, Slot::Unprivileged);
                AdmissionDecision::StoreUnprivileged {
                    evicted: Some(victim),
                }
            }
            None => AdmissionDecision::Forward,
        }
    }

    /// Sub-partition whose hit counter is closest to `tau`; ties go to the
    /// least recently used sub-partition, then the lowest index.
    fn select_partition(&self, tau: u64) -> usize {
        self.privileged
            .iter()
            .enumerate()
            .min_by_key(|(k, p)| (p.hits.abs_diff(tau), p.last_used, *k))
            .map(|(k, _)| k)
            .expect("at least one sub-partition")
    }

    /// Admission of a content that is not stored, given its request-count
    /// estimate `tau_hat`. Clears the content's pending count.
    pub fn lfru_admit(&mut self, content: ContentId, tau_hat: u64) -> AdmissionDecision {
        self.unresponded.remove(&content);
        if self.capacity == 0 || self.location.contains_key(&content) {
            return AdmissionDecision::Forward;
        }
        self.tick += 1;
        let tau = tau_hat;
        let decision = if self.location.len() < self.capacity {
            self.cold_fill(content, tau)
        } else {
            let weakest = self.unprivileged.weakest();
            let min = weakest.map_or(0, |(_, c)| c);
            let max = self.unprivileged.max_count().unwrap_or(0);
            let outranked = weakest.is_some_and(|(_, c)| !self.priority_allows(tau, c));
            if tau < min || outranked {
                AdmissionDecision::Forward
            } else if tau <= max || self.privileged.is_empty() {
                self.replace_weakest(content, tau)
            } else {
                let k = self.select_partition(tau);
                let demoted = self.privileged[k]
                    .lru
                    .pop_least()
                    .expect("full cache has full sub-partitions");
                let (demoted, evicted) = match weakest {
                    Some((victim, count)) => {
                        self.unprivileged.remove(victim);
                        self.location.remove(&victim);
                        self.unprivileged.insert(demoted, count + 1, self.tick);
                        self.location.insert(demoted, Slot::Unprivileged);
                        (Some(demoted), Some(victim))
                    }
                    None => {
                        self.location.remove(&demoted);
                        (None, Some(demoted))
                    }
                };
                let p = &mut self.privileged[k];
                p.lru.touch(content);
                p.last_used = self.tick;
                self.location.insert(content, Slot::Privileged(k));
                AdmissionDecision::Promote {
                    partition: k,
                    demoted,
                    evicted,
                }
            }
        };
        debug_assert!(self.location.len() <= self.capacity);
        decision
    }

    fn reset_counters(&mut self) {
        self.unprivileged.reset();
        for p in &mut self.privileged {
            p.hits = 0;
        }
        self.unresponded.clear();
    }
}

#[derive(Serialize)]
struct UnprivilegedEntry {
    content: ContentId,
    counter: u64,
}

#[derive(Serialize)]
struct PartitionDump {
    capacity: usize,
    hits: u64,
    contents_mru_first: Vec<ContentId>,
}

#[derive(Serialize)]
struct LfruDump {
    policy: &'static str,
    capacity: usize,
    unprivileged_capacity: usize,
    window_start: f64,
    window_length: Option<f64>,
    unprivileged: Vec<UnprivilegedEntry>,
    privileged: Vec<PartitionDump>,
    unresponded: BTreeMap<ContentId, u64>,
}

impl CachePolicy for LfruCache {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Lfru
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.location.len()
    }

    fn contains(&self, content: ContentId) -> bool {
        self.location.contains_key(&content)
    }

    fn on_request(&mut self, content: ContentId, now: f64) -> Lookup {
        self.advance_window(now);
        self.tick += 1;
        self.window.arrivals += 1;
        match self.location.get(&content).copied() {
            Some(Slot::Unprivileged) => {
                self.unprivileged.bump(content, self.tick);
                Lookup::Hit
            }
            Some(Slot::Privileged(k)) => {
                let p = &mut self.privileged[k];
                p.lru.touch(content);
                p.hits += 1;
                p.last_used = self.tick;
                Lookup::Hit
            }
            None => {
                *self.unresponded.entry(content).or_insert(0) += 1;
                Lookup::Miss
            }
        }
    }

    fn admit(&mut self, content: ContentId, now: f64) -> AdmissionDecision {
        self.advance_window(now);
        let tau = self.unresponded(content);
        self.lfru_admit(content, tau)
    }

    fn advance_window(&mut self, now: f64) {
        let Some(length) = self.window.length else {
            return;
        };
        if now < self.window.start + length {
            return;
        }
        let spans = ((now - self.window.start) / length).floor().max(1.0);
        self.window.start += spans * length;
        while self.window.start + length <= now {
            self.window.start += length;
        }
        self.reset_counters();

        if let Some(w) = self.window.w_requests {
            let rate = self.window.arrivals as f64 / (spans * length);
            let avg_delay = if self.window.delay_count > 0 {
                self.window.delay_sum / self.window.delay_count as f64
            } else {
                0.0
            };
            if let Ok(t) = window_time(w, rate, avg_delay) {
                self.window.length = Some(t);
            }
        }
        self.window.arrivals = 0;
        self.window.delay_sum = 0.0;
        self.window.delay_count = 0;
    }

    fn observe_miss_delay(&mut self, delay: f64) {
        self.window.delay_sum += delay;
        self.window.delay_count += 1;
    }

    fn window_time(&self) -> Option<f64> {
        self.window.length
    }

    fn window_requests(&self) -> Option<u64> {
        self.window.w_requests
    }

    fn contents(&self) -> Vec<ContentId> {
        let mut v: Vec<_> = self.location.keys().copied().collect();
        v.sort_unstable();
        v
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.unprivileged.len() > self.unprivileged_capacity {
            return Err(format!(
                "unprivileged holds {} > {}",
                self.unprivileged.len(),
                self.unprivileged_capacity
            ));
        }
        let mut stored = self.unprivileged.len();
        for (k, p) in self.privileged.iter().enumerate() {
            if p.lru.len() > p.capacity {
                return Err(format!(
                    "sub-partition {k} holds {} > {}",
                    p.lru.len(),
                    p.capacity
                ));
            }
            stored += p.lru.len();
        }
        if stored > self.capacity || stored != self.location.len() {
            return Err(format!(
                "stored {stored}, index {}, capacity {}",
                self.location.len(),
                self.capacity
            ));
        }
        for (&id, slot) in &self.location {
            let ok = match slot {
                Slot::Unprivileged => self.unprivileged.entries.contains_key(&id),
                Slot::Privileged(k) => self.privileged[*k].lru.contains(id),
            };
            let elsewhere = match slot {
                Slot::Unprivileged => self.privileged.iter().any(|p| p.lru.contains(id)),
                Slot::Privileged(k) => {
                    self.unprivileged.entries.contains_key(&id)
                        || self
                            .privileged
                            .iter()
                            .enumerate()
                            .any(|(j, p)| j != *k && p.lru.contains(id))
                }
            };
            if !ok || elsewhere {
                return Err(format!("content {id} misplaced"));
            }
        }
        if self.unprivileged.order.len() != self.unprivileged.entries.len() {
            return Err("unprivileged order out of sync".into());
        }
        let total: u64 = self.unprivileged.entries.values().map(|c| c.count).sum();
        if total != self.unprivileged.total {
            return Err("unprivileged counter total out of sync".into());
        }
        if let Some(id) = self
            .unresponded
            .keys()
            .find(|id| self.location.contains_key(id))
        {
            return Err(format!("pending count kept for stored content {id}"));
        }
        Ok(())
    }

    fn debug_dump(&self) -> String {
        let dump = LfruDump {
            policy: "lfru",
            capacity: self.capacity,
            unprivileged_capacity: self.unprivileged_capacity,
            window_start: self.window.start,
            window_length: self.window.length,
            unprivileged: self
                .unprivileged_counters()
                .into_iter()
                .map(|(content, counter)| UnprivilegedEntry { content, counter })
                .collect(),
            privileged: self
                .privileged
                .iter()
                .map(|p| PartitionDump {
                    capacity: p.capacity,
                    hits: p.hits,
                    contents_mru_first: p.lru.iter_mru().collect(),
                })
                .collect(),
            unresponded: self.unresponded.iter().map(|(&k, &v)| (k, v)).collect(),
        };
        serde_json::to_string_pretty(&dump).expect("dump serializes")
    }
}
