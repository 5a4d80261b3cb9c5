//! Content catalog, Zipf-like popularity and Poisson request streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain};
use crate::{ContentId, NodeId, Result};

/// `sum_{i=1}^{n} i^(-s)`, accumulated smallest term first.
pub fn truncated_zeta(s: f64, n: u32) -> f64 {
    // For s >= 0 the terms shrink with i, so walking down from n adds the
    // small ones first. For s < 0 they grow, so walk up.
    if s >= 0.0 {
        (1..=n).rev().map(|i| f64::from(i).powf(-s)).sum()
    } else {
        (1..=n).map(|i| f64::from(i).powf(-s)).sum()
    }
}

/// Zipf-like popularity over a catalog of `catalog_size` contents:
/// `pmf(i) = i^(-alpha) / zeta(alpha)`.
#[derive(Debug, Clone)]
pub struct PopularityModel {
    alpha: f64,
    catalog_size: u32,
    zeta: f64,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl PopularityModel {
    pub fn new(alpha: f64, catalog_size: u32) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(domain(format!(
                "zipf exponent must be finite and >= 0, got {alpha}"
            )));
        }
        if catalog_size == 0 {
            return Err(domain("catalog must hold at least one content"));
        }
        let zeta = truncated_zeta(alpha, catalog_size);
        let pmf: Vec<f64> = (1..=catalog_size)
            .map(|i| f64::from(i).powf(-alpha) / zeta)
            .collect();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().expect("non-empty catalog") = 1.0;
        Ok(Self {
            alpha,
            catalog_size,
            zeta,
            pmf,
            cdf,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn catalog_size(&self) -> u32 {
        self.catalog_size
    }

    /// The normalizer `zeta(alpha)` truncated at the catalog size.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Request probability of the content at `rank`.
    pub fn pmf(&self, rank: ContentId) -> Result<f64> {
        if rank == 0 || rank > self.catalog_size {
            return Err(domain(format!(
                "rank {rank} outside catalog 1..={}",
                self.catalog_size
            )));
        }
        Ok(self.pmf[rank as usize - 1])
    }

    /// All probabilities, index `i` holding rank `i + 1`.
    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }

    /// Draws a rank by inverting the cumulative distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ContentId {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        (idx.min(self.cdf.len() - 1) + 1) as ContentId
    }

    /// Mean and variance of the requested rank.
    pub fn moments(&self) -> (f64, f64) {
        let z0 = self.zeta;
        let z1 = truncated_zeta(self.alpha - 1.0, self.catalog_size);
        let z2 = truncated_zeta(self.alpha - 2.0, self.catalog_size);
        let mean = z1 / z0;
        let variance = (z2 / z0 - mean * mean).max(0.0);
        (mean, variance)
    }
}

/// Free-function form of [`PopularityModel::pmf`].
pub fn zipf_pmf(model: &PopularityModel, rank: ContentId) -> Result<f64> {
    model.pmf(rank)
}

/// Free-function form of [`PopularityModel::moments`].
pub fn zipf_moments(model: &PopularityModel) -> (f64, f64) {
    model.moments()
}

/// Poisson arrivals at one node, viewed through slots of length `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestProcess {
    /// Arrival rate in requests per second.
    pub node_rate: f64,
    /// Slot length in seconds.
    pub slot: f64,
    pub seed: u64,
}

impl RequestProcess {
    pub fn new(node_rate: f64, slot: f64, seed: u64) -> Result<Self> {
        let process = Self {
            node_rate,
            slot,
            seed,
        };
        process.validate()?;
        Ok(process)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.node_rate.is_finite() || self.node_rate < 0.0 {
            return Err(config(format!(
                "node rate must be >= 0, got {}",
                self.node_rate
            )));
        }
        if !self.slot.is_finite() || self.slot <= 0.0 {
            return Err(config(format!("slot must be > 0, got {}", self.slot)));
        }
        if self.arrival_probability() > 1.0 {
            return Err(config(format!(
                "rate * slot = {} exceeds 1; slots cannot be read as Bernoulli trials",
                self.arrival_probability()
            )));
        }
        Ok(())
    }

    /// Probability of an arrival within one slot, `rate * slot`.
    pub fn arrival_probability(&self) -> f64 {
        self.node_rate * self.slot
    }

    /// The slot that makes each slot hold one expected arrival.
    pub fn per_request_slot(node_rate: f64, seed: u64) -> Result<Self> {
        if node_rate <= 0.0 {
            return Err(config("per-request slots need a positive rate"));
        }
        Self::new(node_rate, 1.0 / node_rate, seed)
    }
}

/// Probability that one slot carries a request for `rank`.
pub fn request_probability(
    model: &PopularityModel,
    process: &RequestProcess,
    rank: ContentId,
) -> Result<f64> {
    process.validate()?;
    Ok(process.arrival_probability() * model.pmf(rank)?)
}

/// Expected number of requests for `rank` among `window_len` slots.
pub fn expected_window_requests(
    model: &PopularityModel,
    process: &RequestProcess,
    rank: ContentId,
    window_len: u64,
) -> Result<f64> {
    if window_len == 0 {
        return Err(domain("window must span at least one slot"));
    }
    Ok(window_len as f64 * request_probability(model, process, rank)?)
}

/// One consumer request entering the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestEvent {
    pub time: f64,
    pub origin_node: NodeId,
    pub content: ContentId,
}

/// Lazily generated Poisson request stream for a single node.
///
/// Every `(seed, origin)` pair selects an independent ChaCha stream, so
/// streams for different nodes never overlap and are reproducible.
#[derive(Debug, Clone)]
pub struct RequestStream {
    rng: ChaCha8Rng,
    inter_arrival: Option<Exp<f64>>,
    origin: NodeId,
    clock: f64,
}

impl RequestStream {
    pub fn new(process: &RequestProcess, origin: NodeId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(process.seed);
        rng.set_stream(origin as u64);
        let inter_arrival = if process.node_rate > 0.0 {
            Some(Exp::new(process.node_rate).expect("positive rate"))
        } else {
            None
        };
        Self {
            rng,
            inter_arrival,
            origin,
            clock: 0.0,
        }
    }

    /// Next request, or `None` for a silent (zero-rate) node.
    pub fn next_event(&mut self, model: &PopularityModel) -> Option<RequestEvent> {
        let gap = self.inter_arrival.as_ref()?.sample(&mut self.rng);
        self.clock += gap;
        let content = model.sample(&mut self.rng);
        Some(RequestEvent {
            time: self.clock,
            origin_node: self.origin,
            content,
        })
    }
}

/// All requests at `origin` arriving in `(0, duration]`.
pub fn generate_stream(
    model: &PopularityModel,
    process: &RequestProcess,
    origin: NodeId,
    duration: f64,
) -> Result<Vec<RequestEvent>> {
    if !(duration > 0.0) {
        return Err(domain(format!("duration must be > 0, got {duration}")));
    }
    process.validate()?;
    let mut stream = RequestStream::new(process, origin);
    let mut out = Vec::new();
    while let Some(ev) = stream.next_event(model) {
        if ev.time > duration {
            break;
        }
        out.push(ev);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pmf_examples() {
        let m = PopularityModel::new(1.0, 1).unwrap();
        assert_eq!(m.pmf(1).unwrap(), 1.0);

        let m = PopularityModel::new(1.0, 2).unwrap();
        assert!(close(m.zeta(), 1.5, 1e-15));
        assert!(close(m.pmf(1).unwrap(), 2.0 / 3.0, 1e-15));

        // Brute-force normaliser, summed in the opposite order from the model.
        let brute: f64 = (1..=50_000u32).map(|i| f64::from(i).powf(-0.8)).sum();
        let m = PopularityModel::new(0.8, 50_000).unwrap();
        assert!(close(m.pmf(1).unwrap(), 1.0 / brute, 1e-12));
    }

    #[test]
    fn pmf_rejects_out_of_range_rank() {
        let m = PopularityModel::new(1.0, 10).unwrap();
        assert!(matches!(m.pmf(0), Err(crate::Error::Domain(_))));
        assert!(matches!(m.pmf(11), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn moments_examples() {
        let (mean, var) = PopularityModel::new(0.7, 1).unwrap().moments();
        assert_eq!(mean, 1.0);
        assert!(var.abs() < 1e-15);

        let (mean, _) = PopularityModel::new(1.0, 2).unwrap().moments();
        assert!(close(mean, 2.0 / 1.5, 1e-15));

        // Two-pass oracle: first normalise, then take centred moments.
        let n = 5000u32;
        let weights: Vec<f64> = (1..=n).map(|i| f64::from(i).powf(-0.8)).collect();
        let total: f64 = weights.iter().sum();
        let mean_o: f64 = weights
            .iter()
            .enumerate()
            .map(|(i, w)| (i + 1) as f64 * w / total)
            .sum();
        let var_o: f64 = weights
            .iter()
            .enumerate()
            .map(|(i, w)| ((i + 1) as f64 - mean_o).powi(2) * w / total)
            .sum();
        let (mean, var) = PopularityModel::new(0.8, n).unwrap().moments();
        assert!(close(mean, mean_o, 1e-9 * mean_o));
        assert!(close(var, var_o, 1e-8 * var_o));
    }

    #[test]
    fn request_probability_examples() {
        let m = PopularityModel::new(1.0, 2).unwrap();
        let idle = RequestProcess::new(0.0, 1.0, 0).unwrap();
        assert_eq!(request_probability(&m, &idle, 1).unwrap(), 0.0);

        let half = RequestProcess::new(0.5, 1.0, 0).unwrap();
        assert!(close(
            request_probability(&m, &half, 2).unwrap(),
            0.5 / 3.0,
            1e-15
        ));

        let single = PopularityModel::new(1.0, 1).unwrap();
        let full = RequestProcess::new(2.0, 0.5, 0).unwrap();
        assert_eq!(request_probability(&single, &full, 1).unwrap(), 1.0);

        let over = RequestProcess {
            node_rate: 3.0,
            slot: 0.5,
            seed: 0,
        };
        assert!(matches!(
            request_probability(&m, &over, 1),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn expected_window_examples() {
        let m = PopularityModel::new(1.0, 2).unwrap();
        let p = RequestProcess::new(0.5, 1.0, 0).unwrap();
        assert!(expected_window_requests(&m, &p, 1, 0).is_err());
        assert!(close(
            expected_window_requests(&m, &p, 1, 100).unwrap(),
            100.0 / 3.0,
            1e-12
        ));
        // A window of 1/P slots holds one expected request.
        let single = PopularityModel::new(1.0, 1).unwrap();
        let q = RequestProcess::new(0.25, 1.0, 0).unwrap();
        assert!(close(
            expected_window_requests(&single, &q, 1, 4).unwrap(),
            1.0,
            1e-15
        ));
    }

    #[test]
    fn stream_is_deterministic_and_ordered() {
        let m = PopularityModel::new(0.8, 1000).unwrap();
        let p = RequestProcess::new(100.0, 0.001, 42).unwrap();
        let a = generate_stream(&m, &p, 3, 50.0).unwrap();
        let b = generate_stream(&m, &p, 3, 50.0).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(a.iter().all(|e| e.origin_node == 3 && e.time <= 50.0));
        let other = generate_stream(&m, &p, 4, 50.0).unwrap();
        assert_ne!(a.len(), 0);
        assert_ne!(
            a.iter().map(|e| e.content).collect::<Vec<_>>(),
            other.iter().map(|e| e.content).collect::<Vec<_>>()
        );
    }

    #[test]
    fn tiny_duration_gives_near_empty_stream() {
        let m = PopularityModel::new(0.8, 100).unwrap();
        let p = RequestProcess::new(10.0, 0.01, 1).unwrap();
        assert!(generate_stream(&m, &p, 0, 1e-9).unwrap().len() <= 1);
        assert!(generate_stream(&m, &p, 0, 0.0).is_err());
    }

    #[test]
    fn rank_one_frequency_within_three_sigma() {
        let m = PopularityModel::new(0.8, 5000).unwrap();
        let p = RequestProcess::new(1000.0, 0.001, 7).unwrap();
        let events = generate_stream(&m, &p, 0, 10.0).unwrap();
        let n = events.len() as f64;
        let z1 = m.pmf(1).unwrap();
        let hits = events.iter().filter(|e| e.content == 1).count() as f64;
        let sigma = (n * z1 * (1.0 - z1)).sqrt();
        assert!((hits - n * z1).abs() <= 3.0 * sigma, "{hits} vs {}", n * z1);
    }

    #[test]
    fn chi_square_goodness_of_fit() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let m = PopularityModel::new(0.8, 5000).unwrap();
        let p = RequestProcess::new(1000.0, 0.001, 11).unwrap();
        let events = generate_stream(&m, &p, 0, 150.0).unwrap();
        let n = events.len() as f64;
        assert!(n >= 1e5);
        let mut counts = vec![0f64; 5000];
        for e in &events {
            counts[e.content as usize - 1] += 1.0;
        }
        // Individual bins while the expectation stays >= 5, one pooled tail bin.
        let probs = m.probabilities();
        let head = probs.iter().take_while(|&&q| q * n >= 5.0).count();
        let mut stat = 0.0;
        for i in 0..head {
            let e = probs[i] * n;
            stat += (counts[i] - e).powi(2) / e;
        }
        let mut bins = head;
        if head < probs.len() {
            let tail_e: f64 = probs[head..].iter().sum::<f64>() * n;
            let tail_o: f64 = counts[head..].iter().sum();
            stat += (tail_o - tail_e).powi(2) / tail_e;
            bins += 1;
        }
        let dof = (bins - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "chi2 {stat} >= {critical} (dof {dof})");
    }

    #[test]
    fn window_expectation_matches_monte_carlo() {
        // Windows of W per-request slots; count requests for rank 1.
        let m = PopularityModel::new(0.8, 500).unwrap();
        let rate = 200.0;
        let p = RequestProcess::per_request_slot(rate, 5).unwrap();
        let w = 97u64;
        let expected = expected_window_requests(&m, &p, 1, w).unwrap();
        let window_secs = w as f64 * p.slot;
        let windows = 4000usize;
        let events = generate_stream(&m, &p, 0, windows as f64 * window_secs).unwrap();
        let mut per_window = vec![0f64; windows];
        for e in events.iter().filter(|e| e.content == 1) {
            let k = ((e.time / window_secs) as usize).min(windows - 1);
            per_window[k] += 1.0;
        }
        let mean = per_window.iter().sum::<f64>() / windows as f64;
        let var = per_window.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (windows - 1) as f64;
        let se = (var / windows as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "{mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn larger_alpha_concentrates_mass() {
        let lo = PopularityModel::new(0.6, 1000).unwrap();
        let hi = PopularityModel::new(1.2, 1000).unwrap();
        assert!(hi.pmf(1).unwrap() > lo.pmf(1).unwrap());
    }

    proptest! {
        #[test]
        fn pmf_normalised_and_monotone(alpha in 0.0f64..2.0, c in 1u32..3000) {
            let m = PopularityModel::new(alpha, c).unwrap();
            let sum: f64 = m.probabilities().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(m.probabilities().iter().all(|&q| q > 0.0));
            prop_assert!(m.probabilities().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn samples_stay_in_catalog(alpha in 0.0f64..2.0, c in 1u32..500, seed: u64) {
            let m = PopularityModel::new(alpha, c).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let r = m.sample(&mut rng);
                prop_assert!(r >= 1 && r <= c);
            }
        }
    }
}
