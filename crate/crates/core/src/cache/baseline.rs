//! Unpartitioned comparison policies. All of them admit every content.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::recency::RecencyList;
use super::{AdmissionDecision, CachePolicy, Lookup, PolicyKind};
use crate::error::config;
use crate::{ContentId, Result};

#[derive(Serialize)]
struct BaselineDump {
    policy: &'static str,
    capacity: usize,
    /// Stored contents in eviction order, next victim first (ascending id
    /// for the random policy).
    contents: Vec<ContentId>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    counts: Vec<u64>,
}

fn dump(policy: PolicyKind, capacity: usize, contents: Vec<ContentId>, counts: Vec<u64>) -> String {
    serde_json::to_string_pretty(&BaselineDump {
        policy: policy.name(),
        capacity,
        contents,
        counts,
    })
    .expect("dump serializes")
}

#[derive(Debug, Clone)]
pub struct LruCache {
    capacity: usize,
    list: RecencyList,
}

impl LruCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            list: RecencyList::new(),
        }
    }
}

impl CachePolicy for LruCache {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Lru
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.list.len()
    }

    fn contains(&self, content: ContentId) -> bool {
        self.list.contains(content)
    }

    fn on_request(&mut self, content: ContentId, _now: f64) -> Lookup {
        if self.list.contains(content) {
            self.list.touch(content);
            Lookup::Hit
        } else {
            Lookup::Miss
        }
    }

    fn admit(&mut self, content: ContentId, _now: f64) -> AdmissionDecision {
        if self.capacity == 0 || self.list.contains(content) {
            return AdmissionDecision::Forward;
        }
        let evicted = if self.list.len() >= self.capacity {
            self.list.pop_least()
        } else {
            None
        };
        self.list.touch(content);
        AdmissionDecision::Store { evicted }
    }

    fn contents(&self) -> Vec<ContentId> {
        let mut v: Vec<_> = self.list.iter_mru().collect();
        v.sort_unstable();
        v
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.list.len() > self.capacity {
            return Err(format!("holds {} > {}", self.list.len(), self.capacity));
        }
        Ok(())
    }

    fn debug_dump(&self) -> String {
        let mut order: Vec<_> = self.list.iter_mru().collect();
        order.reverse();
        dump(self.kind(), self.capacity, order, Vec::new())
    }
}

/// Stored contents ordered by (count, last use, id).
#[derive(Debug, Clone, Default)]
struct CountedStore {
    entries: HashMap<ContentId, (u64, u64)>,
    order: BTreeSet<(u64, u64, ContentId)>,
}

impl CountedStore {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn contains(&self, id: ContentId) -> bool {
        self.entries.contains_key(&id)
    }

    fn set(&mut self, id: ContentId, count: u64, tick: u64) {
        if let Some((c, t)) = self.entries.insert(id, (count, tick)) {
            self.order.remove(&(c, t, id));
        }
        self.order.insert((count, tick, id));
    }

    /// Changes the count of a stored content, keeping its last use.
    fn recount(&mut self, id: ContentId, count: u64) {
        if let Some(&(_, t)) = self.entries.get(&id) {
            self.set(id, count, t);
        }
    }

    fn pop_min(&mut self) -> Option<ContentId> {
        let (_, _, id) = self.order.pop_first()?;
        self.entries.remove(&id);
        Some(id)
    }

    fn consistent(&self) -> bool {
        self.order.len() == self.entries.len()
            && self
                .order
                .iter()
                .all(|&(c, t, id)| self.entries.get(&id) == Some(&(c, t)))
    }

    fn dump(&self) -> (Vec<ContentId>, Vec<u64>) {
        self.order.iter().map(|&(c, _, id)| (id, c)).unzip()
    }
}

/// In-cache LFU over the full request history seen by the node.
#[derive(Debug, Clone)]
pub struct LfuCache {
    capacity: usize,
    frequency: HashMap<ContentId, u64>,
    store: CountedStore,
    tick: u64,
}

impl LfuCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            frequency: HashMap::new(),
            store: CountedStore::default(),
            tick: 0,
        }
    }

    pub fn frequency(&self, content: ContentId) -> u64 {
        self.frequency.get(&content).copied().unwrap_or(0)
    }
}

impl CachePolicy for LfuCache {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Lfu
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.store.len()
    }

    fn contains(&self, content: ContentId) -> bool {
        self.store.contains(content)
    }

    fn on_request(&mut self, content: ContentId, _now: f64) -> Lookup {
        self.tick += 1;
        let f = self.frequency.entry(content).or_insert(0);
        *f += 1;
        if self.store.contains(content) {
            self.store.set(content, *f, self.tick);
            Lookup::Hit
        } else {
            Lookup::Miss
        }
    }

    fn admit(&mut self, content: ContentId, _now: f64) -> AdmissionDecision {
        if self.capacity == 0 || self.store.contains(content) {
            return AdmissionDecision::Forward;
        }
        self.tick += 1;
        let evicted = if self.store.len() >= self.capacity {
            self.store.pop_min()
        } else {
            None
        };
        self.store.set(content, self.frequency(content), self.tick);
        AdmissionDecision::Store { evicted }
    }

    fn contents(&self) -> Vec<ContentId> {
        let mut v: Vec<_> = self.store.entries.keys().copied().collect();
        v.sort_unstable();
        v
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.store.len() > self.capacity {
            return Err(format!("holds {} > {}", self.store.len(), self.capacity));
        }
        if !self.store.consistent() {
            return Err("order out of sync".into());
        }
        Ok(())
    }

    fn debug_dump(&self) -> String {
        let (contents, counts) = self.store.dump();
        dump(self.kind(), self.capacity, contents, counts)
    }
}

/// LFU over the last `window` requests seen by the node.
#[derive(Debug, Clone)]
pub struct WlfuCache {
    capacity: usize,
    window: u64,
    history: VecDeque<ContentId>,
    counts: HashMap<ContentId, u64>,
    store: CountedStore,
    tick: u64,
}

impl WlfuCache {
    pub fn new(capacity: usize, window: u64) -> Result<Self> {
        if window == 0 {
            return Err(config("window LFU needs a window of at least one request"));
        }
        Ok(Self {
            capacity,
            window,
            history: VecDeque::new(),
            counts: HashMap::new(),
            store: CountedStore::default(),
            tick: 0,
        })
    }

    pub fn window_count(&self, content: ContentId) -> u64 {
        self.counts.get(&content).copied().unwrap_or(0)
    }
}

impl CachePolicy for WlfuCache {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Wlfu
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.store.len()
    }

    fn contains(&self, content: ContentId) -> bool {
        self.store.contains(content)
    }

    fn on_request(&mut self, content: ContentId, _now: f64) -> Lookup {
        self.tick += 1;
        self.history.push_back(content);
        *self.counts.entry(content).or_insert(0) += 1;
        if self.history.len() as u64 > self.window {
            let old = self.history.pop_front().expect("history is non-empty");
            let c = self.counts.get_mut(&old).expect("counted");
            *c -= 1;
            let left = *c;
            if left == 0 {
                self.counts.remove(&old);
            }
            if old != content {
                self.store.recount(old, left);
            }
        }
        if self.store.contains(content) {
            self.store
                .set(content, self.window_count(content), self.tick);
            Lookup::Hit
        } else {
            Lookup::Miss
        }
    }

    fn admit(&mut self, content: ContentId, _now: f64) -> AdmissionDecision {
        if self.capacity == 0 || self.store.contains(content) {
            return AdmissionDecision::Forward;
        }
        self.tick += 1;
        let evicted = if self.store.len() >= self.capacity {
            self.store.pop_min()
        } else {
            None
        };
        self.store
            .set(content, self.window_count(content), self.tick);
        AdmissionDecision::Store { evicted }
    }

    fn window_requests(&self) -> Option<u64> {
        Some(self.window)
    }

    fn contents(&self) -> Vec<ContentId> {
        let mut v: Vec<_> = self.store.entries.keys().copied().collect();
        v.sort_unstable();
        v
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.store.len() > self.capacity {
            return Err(format!("holds {} > {}", self.store.len(), self.capacity));
        }
        if !self.store.consistent() {
            return Err("order out of sync".into());
        }
        if self.history.len() as u64 > self.window {
            return Err("history longer than window".into());
        }
        for (&id, &(c, _)) in &self.store.entries {
            if c != self.window_count(id) {
                return Err(format!(
                    "content {id} counted {c}, window has {}",
                    self.window_count(id)
                ));
            }
        }
        Ok(())
    }

    fn debug_dump(&self) -> String {
        let (contents, counts) = self.store.dump();
        dump(self.kind(), self.capacity, contents, counts)
    }
}

/// Evicts a uniformly chosen stored content.
#[derive(Debug, Clone)]
pub struct RandomCache {
    capacity: usize,
    items: Vec<ContentId>,
    index: HashMap<ContentId, usize>,
    rng: ChaCha8Rng,
}

impl RandomCache {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self {
            capacity,
            items: Vec::new(),
            index: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl CachePolicy for RandomCache {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn contains(&self, content: ContentId) -> bool {
        self.index.contains_key(&content)
    }

    fn on_request(&mut self, content: ContentId, _now: f64) -> Lookup {
        if self.contains(content) {
            Lookup::Hit
        } else {
            Lookup::Miss
        }
    }

    fn admit(&mut self, content: ContentId, _now: f64) -> AdmissionDecision {
        if self.capacity == 0 || self.contains(content) {
            return AdmissionDecision::Forward;
        }
        let evicted = if self.items.len() >= self.capacity {
            let i = self.rng.random_range(0..self.items.len());
            let victim = self.items.swap_remove(i);
            self.index.remove(&victim);
            if let Some(&moved) = self.items.get(i) {
                self.index.insert(moved, i);
            }
            Some(victim)
        } else {
            None
        };
        self.index.insert(content, self.items.len());
        self.items.push(content);
        AdmissionDecision::Store { evicted }
    }

    fn contents(&self) -> Vec<ContentId> {
        let mut v = self.items.clone();
        v.sort_unstable();
        v
    }

    fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.items.len() > self.capacity {
            return Err(format!("holds {} > {}", self.items.len(), self.capacity));
        }
        if self.index.len() != self.items.len()
            || self
                .items
                .iter()
                .enumerate()
                .any(|(i, id)| self.index.get(id) != Some(&i))
        {
            return Err("index out of sync".into());
        }
        Ok(())
    }

    fn debug_dump(&self) -> String {
        dump(self.kind(), self.capacity, self.contents(), Vec::new())
    }
}
