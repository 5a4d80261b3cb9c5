//! Observation-window sizing for the windowed LFU partition.
//!
//! A window is sized in request arrivals (`W`) and converted to an
//! observation time (`W_T`) using the node's arrival rate and the average
//! delay of outstanding misses. The window LFU baseline uses its own, much
//! larger, cache-size driven window.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::domain;
use crate::numeric::{bisect, newton, NewtonFailure};
use crate::workload::{expected_window_requests, PopularityModel, RequestProcess};
use crate::{ContentId, Error, Result};

/// How the window length in requests was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMethod {
    Chebyshev,
    Clt,
    NewtonRefined,
}

impl std::str::FromStr for WindowMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" => Ok(Self::Chebyshev),
            "clt" => Ok(Self::Clt),
            "newton" | "newton-refined" => Ok(Self::NewtonRefined),
            other => Err(domain(format!("unknown window method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    /// Window length in request arrivals.
    pub w_requests: u64,
    /// Observation time in seconds.
    pub w_time: f64,
    pub epsilon: f64,
    pub conf: f64,
    pub method: WindowMethod,
}

// Ceiling that ignores representation noise just above an integer.
fn ceil_tol(x: f64) -> f64 {
    (x - x.abs() * 1e-12).ceil()
}

fn check_error_conf(epsilon: f64, conf: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(domain(format!("window error must be > 0, got {epsilon}")));
    }
    if !(conf > 0.0 && conf < 100.0) {
        return Err(domain(format!(
            "confidence must lie in (0, 100), got {conf}"
        )));
    }
    Ok(())
}

/// Two-sided standard normal quantile: `P(|Z| >= q) = (100 - conf) / 100`.
pub fn normal_quantile_two_sided(conf: f64) -> Result<f64> {
    if !(conf > 0.0 && conf < 100.0) {
        return Err(domain(format!(
            "confidence must lie in (0, 100), got {conf}"
        )));
    }
    let std_normal = Normal::standard();
    Ok(std_normal.inverse_cdf((100.0 + conf) / 200.0))
}

/// Window from Chebyshev's inequality with the Bernoulli variance bound 1/4.
pub fn chebyshev_window(epsilon: f64, conf: f64) -> Result<u64> {
    check_error_conf(epsilon, conf)?;
    let w = 100.0 / (4.0 * epsilon * epsilon * (100.0 - conf));
    Ok(ceil_tol(w).max(1.0) as u64)
}

/// Window from the normal approximation: `W = (q / (2 epsilon))^2`.
pub fn clt_window(epsilon: f64, conf: f64) -> Result<u64> {
    check_error_conf(epsilon, conf)?;
    let q = normal_quantile_two_sided(conf)?;
    let w = (0.5 * q / epsilon).powi(2);
    Ok(ceil_tol(w).max(1.0) as u64)
}

/// Newton refinement of a window on
/// `F(W) = E[count of rank in W] - empirical_avg - epsilon`.
///
/// `empirical_avg` is the observed average per-window request count for
/// `rank`. The result is the nearest integer root, at least 1.
pub fn newton_refine_window(
    w0: u64,
    model: &PopularityModel,
    process: &RequestProcess,
    rank: ContentId,
    epsilon: f64,
    empirical_avg: f64,
) -> Result<u64> {
    if w0 == 0 {
        return Err(domain("initial window must be >= 1"));
    }
    // E is linear in W, so the slope is the per-slot request probability.
    let slope = expected_window_requests(model, process, rank, 1)?;
    let f = |w: f64| slope * w - empirical_avg - epsilon;

    let root = match newton(w0 as f64, 0.5, 100, |w| (f(w), slope)) {
        Ok(r) => r.x,
        Err(NewtonFailure::ZeroDerivative { .. }) => {
            bisect(1.0, 10.0 * w0 as f64, 0.5, 200, f)
                .ok_or(Error::NonConvergence {
                    iterations: 0,
                    worst: f(w0 as f64).abs(),
                })?
                .x
        }
        Err(NewtonFailure::MaxIterations { last }) | Err(NewtonFailure::NotFinite { at: last }) => {
            return Err(Error::NonConvergence {
                iterations: 100,
                worst: f(last).abs(),
            })
        }
    };
    Ok(root.round().max(1.0) as u64)
}

/// Window used by LFRU nodes: the CLT estimate refined by Newton with the
/// empirical average replaced by its stationary expectation at the CLT
/// window, on per-request slots, for the most popular content.
pub fn lfru_window(epsilon: f64, conf: f64, model: &PopularityModel) -> Result<u64> {
    let w0 = clt_window(epsilon, conf)?;
    // The rate cancels with one arrival per slot.
    let process = RequestProcess::per_request_slot(1.0, 0)?;
    let stationary = expected_window_requests(model, &process, 1, w0)?;
    newton_refine_window(w0, model, &process, 1, epsilon, stationary)
}

/// Observation time `max(W / lambda, avg_miss_delay)`.
pub fn window_time(w_requests: u64, lambda: f64, avg_miss_delay: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(domain(format!("arrival rate must be > 0, got {lambda}")));
    }
    if !(avg_miss_delay >= 0.0) {
        return Err(domain(format!(
            "miss delay must be >= 0, got {avg_miss_delay}"
        )));
    }
    Ok((w_requests as f64 / lambda).max(avg_miss_delay))
}

/// Window LFU history length with all order constants set to 1:
/// `max(n^3 ln n ln C ln(1/eps), n ln^2 C ln(1/eps))`.
pub fn wlfu_window(cache_size: u64, catalog_size: u64, epsilon: f64) -> Result<u64> {
    if cache_size < 2 || catalog_size < 2 {
        return Err(domain(
            "window LFU sizing needs cache and catalog of at least 2",
        ));
    }
    wlfu_window_real(cache_size as f64, catalog_size as f64, epsilon)
}

pub(crate) fn wlfu_window_real(n: f64, catalog: f64, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!(
            "window LFU error must lie in (0, 1), got {epsilon}"
        )));
    }
    let ln_c = catalog.ln();
    let ln_eps = (1.0 / epsilon).ln();
    let cubic = n.powi(3) * n.ln() * ln_c * ln_eps;
    let linear = n * ln_c * ln_c * ln_eps;
    let w = ceil_tol(cubic.max(linear));
    Ok(if w >= u64::MAX as f64 {
        u64::MAX
    } else {
        w as u64
    })
}

/// Full estimate for a node with arrival rate `lambda`.
pub fn estimate_window(
    method: WindowMethod,
    epsilon: f64,
    conf: f64,
    model: &PopularityModel,
    lambda: f64,
    avg_miss_delay: f64,
) -> Result<WindowEstimate> {
    let w_requests = match method {
        WindowMethod::Chebyshev => chebyshev_window(epsilon, conf)?,
        WindowMethod::Clt => clt_window(epsilon, conf)?,
        WindowMethod::NewtonRefined => lfru_window(epsilon, conf, model)?,
    };
    Ok(WindowEstimate {
        w_requests,
        w_time: window_time(w_requests, lambda, avg_miss_delay)?,
        epsilon,
        conf,
        method,
    })
}
