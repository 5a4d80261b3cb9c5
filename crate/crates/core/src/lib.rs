//! Simulation and analysis of in-network cache networks.
//!
//! The crate centres on the LFRU eviction policy: a cache split into a small
//! window-counted LFU partition and several LRU sub-partitions, combined with
//! conditional leave-copy-everywhere replication. Around it sit baseline
//! policies (LRU, LFU, window LFU, random), a Zipf/Poisson workload model, a
//! Barabási–Albert topology builder with static shortest-path routing, a
//! discrete-event network simulator, and analytical predictors built on the
//! Che approximation.
//!
//! ```
//! use cachenet::window::{chebyshev_window, clt_window};
//!
//! assert_eq!(chebyshev_window(0.1, 95.0).unwrap(), 500);
//! assert_eq!(clt_window(0.1, 95.0).unwrap(), 97);
//! ```

pub mod analytics;
pub mod cache;
mod error;
pub mod experiment;
pub mod numeric;
pub mod sim;
pub mod topology;
pub mod window;
pub mod workload;

pub use error::{Error, Result};

/// Content identifier. Contents are named by popularity rank, starting at 1.
pub type ContentId = u32;

/// Index of a cache node in a [`topology::Topology`].
pub type NodeId = usize;
