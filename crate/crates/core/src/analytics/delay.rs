use crate::error::domain;
use crate::Result;

/// Expected delivery delay along a path of `k` caches.
///
/// `cumulative[n]` is the delay to reach the `n`-th cache (1-based in the
/// description below, 0-based here) and `hit_probs[n]` its hit probability.
/// A request is served by the first cache that hits; if none does, the
/// publisher behind the last cache serves it at delay `cumulative[k-1]`:
///
/// ```text
/// E[d] = Σ_n d(n) P_h(n) Π_{m<n} (1 - P_h(m))  +  d(k) Π_{m<=k} (1 - P_h(m))
/// ```
pub fn expected_delay(cumulative: &[f64], hit_probs: &[f64]) -> Result<f64> {
    if cumulative.is_empty() {
        return Err(domain("expected delay needs a non-empty path"));
    }
    if cumulative.len() != hit_probs.len() {
        return Err(domain(format!(
            "{} delays but {} hit probabilities",
            cumulative.len(),
            hit_probs.len()
        )));
    }
    if let Some(p) = hit_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(domain(format!("hit probability {p} outside [0, 1]")));
    }
    if let Some(d) = cumulative.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(domain(format!("invalid delay {d}")));
    }
    let mut miss_so_far = 1.0;
    let mut total = 0.0;
    for (&d, &p) in cumulative.iter().zip(hit_probs) {
        total += d * p * miss_so_far;
        miss_so_far *= 1.0 - p;
    }
    Ok(total + cumulative[cumulative.len() - 1] * miss_so_far)
}
