//! Adaptive extension numbers.
//!
//! After a level is estimated the candidates are ranked and the party decides
//! how many to extend into the next level: `t = k* + η`, where the anchor `k*`
//! separates the clearly-frequent prefixes from the tail and the drift
//! distance `η` is the expected number of positions the anchor could slip
//! under the oracle's Gaussian noise.

use std::cmp::Ordering;
use std::f64::consts::SQRT_2;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::prefix_codec::PrefixCode;

/// Ranking order: frequency descending, prefix value ascending on ties.
pub fn rank_order(a: &(PrefixCode, f64), b: &(PrefixCode, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Candidates of one level sorted by estimated frequency, plus the standard
/// deviation of the oracle that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEstimates {
    entries: Vec<(PrefixCode, f64)>,
    sigma: f64,
}

impl RankedEstimates {
    /// Sorts `entries` into rank order.
    pub fn new(mut entries: Vec<(PrefixCode, f64)>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        entries.sort_by(rank_order);
        Ok(RankedEstimates { entries, sigma })
    }

    pub fn entries(&self) -> &[(PrefixCode, f64)] {
        &self.entries
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `t` highest-ranked prefixes.
    pub fn top(&self, t: usize) -> Vec<PrefixCode> {
        self.entries.iter().take(t).map(|(p, _)| *p).collect()
    }

    /// Frequency at 1-based rank `r`; zero past the end (sentinel padding).
    fn freq(&self, r: usize) -> f64 {
        self.entries.get(r - 1).map_or(0.0, |e| e.1)
    }
}

/// How a level's extension number is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionPolicy {
    /// `t = k* + η`.
    Adaptive,
    /// A constant `t` at every level.
    Fixed(usize),
}

impl ExtensionPolicy {
    pub fn extension_number(&self, ranked: &RankedEstimates, k: usize) -> Result<usize> {
        match *self {
            ExtensionPolicy::Adaptive => extension_number(ranked, k),
            ExtensionPolicy::Fixed(t) => Ok(t.min(ranked.len())),
        }
    }
}

/// Anchor objective at `k_star`:
/// mean(f̂_2..f̂_{k*}) − mean(f̂_{k*+1}..f̂_{k+1}).
pub fn anchor_score(ranked: &RankedEstimates, k: usize, k_star: usize) -> f64 {
    let head: f64 = (2..=k_star).map(|j| ranked.freq(j)).sum::<f64>() / (k_star - 1) as f64;
    let tail: f64 = (k_star + 1..=k + 1).map(|s| ranked.freq(s)).sum::<f64>() / (k + 1 - k_star) as f64;
    head - tail
}

/// Anchor `k* ∈ [2, k]` maximising [`anchor_score`]; the smaller `k*` wins ties.
pub fn select_anchor(ranked: &RankedEstimates, k: usize) -> Result<usize> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("query size k must be at least 2, got {k}")));
    }
    let mut best = (2, f64::NEG_INFINITY);
    for k_star in 2..=k {
        let score = anchor_score(ranked, k, k_star);
        if score > best.1 {
            best = (k_star, score);
        }
    }
    Ok(best.0)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `Pr[X_a ≤ X_b]` for independent Gaussians with means `f_a`, `f_b` and
/// common standard deviation `sigma`: the difference has variance `2σ²`.
pub fn drift_probability(f_a: f64, f_b: f64, sigma: f64) -> f64 {
    std_normal_cdf(-(f_a - f_b) / (SQRT_2 * sigma))
}

/// Expected drift `E = Σ x · Pr[X_{k*} ≤ X_{k*+x}]` over
/// `x ∈ [max(1, k*−k+1), min(k, |entries| − k*)]`.
pub fn expected_drift(ranked: &RankedEstimates, k: usize, k_star: usize) -> f64 {
    let lo = (k_star + 1).saturating_sub(k).max(1);
    let hi = k.min(ranked.len().saturating_sub(k_star));
    let anchor = ranked.freq(k_star);
    (lo..=hi).map(|x| x as f64 * drift_probability(anchor, ranked.freq(k_star + x), ranked.sigma)).sum()
}

/// `η = min(k, ⌊E⌋)`.
pub fn drift_distance(ranked: &RankedEstimates, k: usize, k_star: usize) -> usize {
    (expected_drift(ranked, k, k_star).floor() as usize).min(k)
}

/// `t = k* + η`, capped at the number of ranked candidates.
pub fn extension_number(ranked: &RankedEstimates, k: usize) -> Result<usize> {
    let k_star = select_anchor(ranked, k)?;
    let eta = drift_distance(ranked, k, k_star);
    Ok((k_star + eta).min(ranked.len()))
}
