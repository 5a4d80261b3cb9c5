use std::collections::{BTreeMap, HashMap};

use crate::ContentId;

/// Contents ordered from most to least recently used.
#[derive(Debug, Clone, Default)]
pub struct RecencyList {
    order: BTreeMap<u64, ContentId>,
    stamp: HashMap<ContentId, u64>,
    clock: u64,
}

impl RecencyList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.stamp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamp.is_empty()
    }

    pub fn contains(&self, id: ContentId) -> bool {
        self.stamp.contains_key(&id)
    }

    /// Moves `id` to the most recently used position, inserting it if absent.
    pub fn touch(&mut self, id: ContentId) {
        self.clock += 1;
        if let Some(old) = self.stamp.insert(id, self.clock) {
            self.order.remove(&old);
        }
        self.order.insert(self.clock, id);
    }

    pub fn remove(&mut self, id: ContentId) -> bool {
        match self.stamp.remove(&id) {
            Some(s) => {
                self.order.remove(&s);
                true
            }
            None => false,
        }
    }

    /// The least recently used content.
    pub fn least(&self) -> Option<ContentId> {
        self.order.values().next().copied()
    }

    pub fn pop_least(&mut self) -> Option<ContentId> {
        let (_, id) = self.order.pop_first()?;
        self.stamp.remove(&id);
        Some(id)
    }

    /// Contents from most to least recently used.
    pub fn iter_mru(&self) -> impl Iterator<Item = ContentId> + '_ {
        self.order.values().rev().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn touch_reorders() {
        let mut l = RecencyList::new();
        for id in [1, 2, 3] {
            l.touch(id);
        }
        assert_eq!(l.least(), Some(1));
        l.touch(1);
        assert_eq!(l.iter_mru().collect::<Vec<_>>(), vec![1, 3, 2]);
        assert_eq!(l.pop_least(), Some(2));
        assert!(l.remove(3));
        assert!(!l.remove(3));
        assert_eq!(l.len(), 1);
    }
}
