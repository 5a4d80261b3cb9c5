use serde::Serialize;

use crate::error::domain;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QqPair {
    /// Plotting position `(i + 0.5) / n`.
    pub quantile: f64,
    pub theory: f64,
    pub sim: f64,
}

/// Quantile pairs of two equally long samples, both sorted ascending.
pub fn qq_pairs(theory: &[f64], sim: &[f64]) -> Result<Vec<QqPair>> {
    if theory.len() != sim.len() {
        return Err(domain(format!(
            "{} theoretical values but {} simulated",
            theory.len(),
            sim.len()
        )));
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (t, s) = (sorted(theory), sorted(sim));
    let n = t.len() as f64;
    Ok(t.into_iter()
        .zip(s)
        .enumerate()
        .map(|(i, (theory, sim))| QqPair {
            quantile: (i as f64 + 0.5) / n,
            theory,
            sim,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_on_diagonal() {
        let v = [3.0, 1.0, 2.0];
        let pairs = qq_pairs(&v, &v).unwrap();
        assert!(pairs.iter().all(|p| p.theory == p.sim));
        assert_eq!(
            pairs.iter().map(|p| p.theory).collect::<Vec<_>>(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(pairs[1].quantile, 0.5);
    }

    #[test]
    fn shift_is_constant_offset() {
        let t = [5.0, 0.5, 2.0, 9.0];
        let s: Vec<f64> = t.iter().map(|x| x + 0.25).collect();
        for p in qq_pairs(&t, &s).unwrap() {
            assert_eq!(p.sim - p.theory, 0.25);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(qq_pairs(&[1.0], &[]).is_err());
        assert!(qq_pairs(&[], &[]).unwrap().is_empty());
    }
}
