use serde::Serialize;

use crate::error::domain;
use crate::numeric::{bisect, newton};
use crate::{Error, Result};

/// Target residual of the characteristic-time equation.
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheMethod {
    Newton,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheSolution {
    pub characteristic_time: f64,
    /// `|size - Σ (1 - exp(-v T))|` at the returned time.
    pub residual: f64,
    pub iterations: usize,
    pub method: CheMethod,
}

/// `Σ (1 - exp(-v T))` and its derivative `Σ v exp(-v T)`, compensated.
fn occupancy(rates: &[f64], t: f64) -> (f64, f64) {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    let mut slope = 0.0;
    for &v in rates {
        let x = -(-v * t).exp_m1();
        let s = sum + x;
        carry += if sum.abs() >= x.abs() {
            (sum - s) + x
        } else {
            (x - s) + sum
        };
        sum = s;
        slope += v * (-v * t).exp();
    }
    (sum + carry, slope)
}

/// Characteristic time `T` of an LRU cache holding `size` contents whose
/// request rates are `rates`: the root of `size = Σ (1 - exp(-v T))`.
///
/// Newton's method starts from `size / Σ v`, which lies left of the root;
/// the right-hand side is concave, so the iterates increase monotonically.
/// Bisection takes over if Newton stalls short of the residual target.
pub fn che_characteristic_time(size: f64, rates: &[f64]) -> Result<CheSolution> {
    if !(size > 0.0 && size.is_finite()) {
        return Err(domain(format!("cache size must be > 0, got {size}")));
    }
    if let Some(v) = rates.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(domain(format!(
            "request rate {v} is not a finite non-negative number"
        )));
    }
    let positive: Vec<f64> = rates.iter().copied().filter(|&v| v > 0.0).collect();
    if size >= positive.len() as f64 {
        return Err(Error::Saturated {
            size,
            contents: positive.len(),
        });
    }
    let f = |t: f64| {
        let (g, dg) = occupancy(&positive, t);
        (size - g, -dg)
    };
    let total: f64 = positive.iter().sum();
    let t0 = size / total;

    if let Ok(root) = newton(t0, 0.0, 200, |t| {
        let (fx, dfx) = f(t);
        // Report an exact zero once the residual target is met so the
        // iteration stops there.
        if fx.abs() < RESIDUAL_TOL * 1e-2 {
            (0.0, dfx)
        } else {
            (fx, dfx)
        }
    }) {
        let residual = f(root.x).0.abs();
        if root.x > 0.0 && residual < RESIDUAL_TOL {
            return Ok(CheSolution {
                characteristic_time: root.x,
                residual,
                iterations: root.iterations,
                method: CheMethod::Newton,
            });
        }
    }

    let mut hi = t0.max(f64::MIN_POSITIVE) * 2.0;
    while f(hi).0 > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonConvergence {
                iterations: 0,
                worst: f(t0).0.abs(),
            });
        }
    }
    let root = bisect(t0, hi, 0.0, 2000, |t| f(t).0).ok_or(Error::NonConvergence {
        iterations: 0,
        worst: f(t0).0.abs(),
    })?;
    let residual = f(root.x).0.abs();
    if residual >= RESIDUAL_TOL {
        return Err(Error::NonConvergence {
            iterations: root.iterations,
            worst: residual,
        });
    }
    Ok(CheSolution {
        characteristic_time: root.x,
        residual,
        iterations: root.iterations,
        method: CheMethod::Bisection,
    })
}

/// Hit probability `1 - exp(-v T)` of a content with rate `v` in a cache of
/// characteristic time `T`.
pub fn content_hit_prob(rate: f64, characteristic_time: f64) -> f64 {
    if rate <= 0.0 || characteristic_time <= 0.0 {
        return 0.0;
    }
    -(-rate * characteristic_time).exp_m1()
}
