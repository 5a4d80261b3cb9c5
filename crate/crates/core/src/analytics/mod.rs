//! Closed-form and fixed-point predictions: path delay, the Che
//! approximation, LFRU hit rates and the network steady state.

mod che;
mod delay;
mod hit_rate;
mod qq;
mod steady_state;

pub use che::{che_characteristic_time, content_hit_prob, CheMethod, CheSolution};
pub use delay::expected_delay;
pub use hit_rate::{
    alfu_hit_bound, lfru_hit_rate, popularity_order_assignment, HitRateEstimate, HitRateForm,
    PartitionAssignment,
};
pub use qq::{qq_pairs, QqPair};
pub use steady_state::{
    steady_state_solve, NodeModel, Occupancy, SteadyStateParams, SteadyStateResult,
};
