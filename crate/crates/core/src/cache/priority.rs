//! Administrator-defined replication priority.
//!
//! A priority function is a chain of stages. Each stage scales the running
//! value, starting from 1, so a chain holding only `Neutral` evaluates to 1
//! and the chain order is the order the stages are applied.

use serde::{Deserialize, Serialize};

use crate::error::domain;
use crate::Result;

/// Inputs a priority stage may look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityContext {
    /// Size of the content in cache slots.
    pub content_size: f64,
    /// Cache capacity in slots.
    pub capacity: f64,
    /// Sum of the unprivileged partition's counters.
    pub unprivileged_total: f64,
    /// Request-rate estimate for the content.
    pub tau_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorityStage {
    /// Multiplies by 1.
    Neutral,
    /// `(size / capacity) * (sum of counters / tau_hat)`.
    SizeRate,
    /// `(size / capacity) * (tau_hat / sum of counters)`; the same terms with
    /// the rate in the numerator.
    RateSize,
    /// Multiplies by a fixed factor.
    Scale { factor: f64 },
}

impl PriorityStage {
    fn apply(&self, value: f64, ctx: &PriorityContext) -> Result<f64> {
        let share = ctx.content_size / ctx.capacity;
        Ok(match *self {
            PriorityStage::Neutral => value,
            PriorityStage::SizeRate => {
                if ctx.tau_hat <= 0.0 {
                    return Err(domain("size-rate priority needs a positive rate estimate"));
                }
                value * share * (ctx.unprivileged_total / ctx.tau_hat)
            }
            PriorityStage::RateSize => {
                if ctx.unprivileged_total <= 0.0 {
                    return Err(domain("rate-size priority needs a positive counter total"));
                }
                value * share * (ctx.tau_hat / ctx.unprivileged_total)
            }
            PriorityStage::Scale { factor } => value * factor,
        })
    }
}

/// A composed priority function `f_0 ∘ f_1 ∘ … ∘ f_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityFunction {
    pub stages: Vec<PriorityStage>,
    /// Size of every content in slots.
    #[serde(default = "unit_size")]
    pub content_size: f64,
}

fn unit_size() -> f64 {
    1.0
}

impl Default for PriorityFunction {
    fn default() -> Self {
        Self::neutral()
    }
}

impl PriorityFunction {
    pub fn neutral() -> Self {
        Self::chain(vec![PriorityStage::Neutral])
    }

    pub fn size_rate() -> Self {
        Self::chain(vec![PriorityStage::SizeRate])
    }

    pub fn chain(stages: Vec<PriorityStage>) -> Self {
        Self {
            stages,
            content_size: 1.0,
        }
    }

    pub fn is_neutral(&self) -> bool {
        self.stages
            .iter()
            .all(|s| matches!(s, PriorityStage::Neutral | PriorityStage::Scale { .. }))
    }

    pub fn evaluate(&self, ctx: &PriorityContext) -> Result<f64> {
        if !(ctx.capacity > 0.0) {
            return Err(domain("priority needs a positive cache capacity"));
        }
        self.stages
            .iter()
            .try_fold(1.0, |value, stage| stage.apply(value, ctx))
    }
}

/// Evaluates `pf` for a content of the configured size.
pub fn priority(
    pf: &PriorityFunction,
    capacity: usize,
    unprivileged_total: u64,
    tau_hat: f64,
) -> Result<f64> {
    pf.evaluate(&PriorityContext {
        content_size: pf.content_size,
        capacity: capacity as f64,
        unprivileged_total: unprivileged_total as f64,
        tau_hat,
    })
}
