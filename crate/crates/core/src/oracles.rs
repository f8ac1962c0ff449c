//! ε-LDP frequency oracles: k-ary randomized response (k-RR), optimized unary
//! encoding (OUE) and optimized local hashing (OLH).
//!
//! All three share the estimator `f̂ = (c/n − q*) / (p* − q*)` where `c` counts
//! reports supporting a value and `(p*, q*)` are the probabilities that a
//! report supports a value when it is, respectively is not, the user's input.
//! For k-RR and OUE these coincide with the perturbation probabilities; for
//! OLH a non-input value is supported by hash collision, so `q* = 1/d′`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::mix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleKind {
    Krr,
    Oue,
    Olh,
}

impl OracleKind {
    pub const ALL: [OracleKind; 3] = [OracleKind::Krr, OracleKind::Oue, OracleKind::Olh];

    pub fn name(&self) -> &'static str {
        match self {
            OracleKind::Krr => "krr",
            OracleKind::Oue => "oue",
            OracleKind::Olh => "olh",
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "krr" | "k-rr" | "grr" => Ok(OracleKind::Krr),
            "oue" => Ok(OracleKind::Oue),
            "olh" => Ok(OracleKind::Olh),
            other => Err(Error::InvalidParameter(format!("unknown oracle {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    kind: OracleKind,
    epsilon: f64,
    domain_size: usize,
}

impl OracleConfig {
    pub fn new(kind: OracleKind, epsilon: f64, domain_size: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if domain_size < 2 {
            return Err(Error::InvalidParameter(format!("domain size must be at least 2, got {domain_size}")));
        }
        Ok(OracleConfig { kind, epsilon, domain_size })
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// OLH hash range `d′ = ⌈e^ε + 1⌉`.
    ///
    /// `e^ε` is evaluated in floating point, so values within a relative 1e-9
    /// above an integer are snapped to it (`ε = ln 3` must give 4, not 5).
    pub fn olh_range(&self) -> u64 {
        let v = self.epsilon.exp() + 1.0;
        ((v - v * 1e-9).ceil() as u64).max(2)
    }

    /// Probabilities of the randomizer: `p` for reporting the true value (or,
    /// for OUE, keeping a one), `q` for each other value (flipping a zero).
    pub fn perturbation_probs(&self) -> (f64, f64) {
        let e = self.epsilon.exp();
        match self.kind {
            OracleKind::Krr => {
                let denom = self.domain_size as f64 - 1.0 + e;
                (e / denom, 1.0 / denom)
            }
            OracleKind::Oue => (0.5, 1.0 / (e + 1.0)),
            OracleKind::Olh => {
                let denom = self.olh_range() as f64 - 1.0 + e;
                (e / denom, 1.0 / denom)
            }
        }
    }

    /// Probabilities that a report supports a value that is / is not the
    /// reporting user's input.
    pub fn support_probs(&self) -> (f64, f64) {
        match self.kind {
            OracleKind::Olh => (self.perturbation_probs().0, 1.0 / self.olh_range() as f64),
            _ => self.perturbation_probs(),
        }
    }
}

/// Fixed-length bit vector used for OUE reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnaryBits {
    len: usize,
    words: Vec<u64>,
}

impl UnaryBits {
    pub fn zeros(len: usize) -> Self {
        UnaryBits { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + tz)
            })
        })
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleReport {
    Krr(usize),
    Oue(UnaryBits),
    Olh { hash_seed: u64, bucket: u64 },
}

impl OracleReport {
    pub fn kind(&self) -> OracleKind {
        match self {
            OracleReport::Krr(_) => OracleKind::Krr,
            OracleReport::Oue(_) => OracleKind::Oue,
            OracleReport::Olh { .. } => OracleKind::Olh,
        }
    }
}

/// The OLH hash family: `(seed, index) → [0, range)`.
///
/// The pair is folded through two rounds of the SplitMix64 finaliser and the
/// 64-bit result is reduced by multiply-shift (`(z · range) >> 64`), which is
/// already below `range`.
#[inline]
pub fn olh_hash(seed: u64, index: u64, range: u64) -> u64 {
    let z = mix64(seed ^ mix64(index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1)));
    ((z as u128 * range as u128) >> 64) as u64 % range
}

fn check_index(config: &OracleConfig, index: usize) -> Result<()> {
    if index >= config.domain_size {
        return Err(Error::DomainIndex { index, size: config.domain_size });
    }
    Ok(())
}

/// Uniform value in `[0, size)` other than `exclude`.
fn other_value<R: Rng + ?Sized>(rng: &mut R, size: u64, exclude: u64) -> u64 {
    let v = rng.random_range(0..size - 1);
    if v >= exclude {
        v + 1
    } else {
        v
    }
}

/// Randomizes one user's value.
pub fn perturb<R: Rng + ?Sized>(config: &OracleConfig, true_index: usize, rng: &mut R) -> Result<OracleReport> {
    check_index(config, true_index)?;
    let (p, q) = config.perturbation_probs();
    Ok(match config.kind {
        OracleKind::Krr => {
            if rng.random::<f64>() < p {
                OracleReport::Krr(true_index)
            } else {
                let size = config.domain_size as u64;
                OracleReport::Krr(other_value(rng, size, true_index as u64) as usize)
            }
        }
        OracleKind::Oue => {
            let len = config.domain_size;
            let mut bits = UnaryBits::zeros(len);
            if rng.random::<f64>() < p {
                bits.set(true_index);
            }
            // Each of the len-1 zero positions flips independently with q;
            // jumping by geometric gaps visits exactly the flipped ones.
            let gaps = Geometric::new(q).expect("q in (0, 1)");
            let mut pos: u64 = 0;
            loop {
                pos = pos.saturating_add(gaps.sample(rng));
                if pos >= len as u64 - 1 {
                    break;
                }
                let i = pos as usize;
                bits.set(if i >= true_index { i + 1 } else { i });
                pos += 1;
            }
            OracleReport::Oue(bits)
        }
        OracleKind::Olh => {
            let range = config.olh_range();
            let hash_seed: u64 = rng.random();
            let v = olh_hash(hash_seed, true_index as u64, range);
            let bucket = if rng.random::<f64>() < p { v } else { other_value(rng, range, v) };
            OracleReport::Olh { hash_seed, bucket }
        }
    })
}

/// Per-value support counts; an associative, mergeable fold over reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCounter {
    config: OracleConfig,
    counts: Vec<u64>,
    n: usize,
}

impl SupportCounter {
    pub fn new(config: OracleConfig) -> Self {
        SupportCounter { config, counts: vec![0; config.domain_size], n: 0 }
    }

    pub fn add(&mut self, report: &OracleReport) -> Result<()> {
        match (self.config.kind, report) {
            (OracleKind::Krr, OracleReport::Krr(y)) => {
                check_index(&self.config, *y)?;
                self.counts[*y] += 1;
            }
            (OracleKind::Oue, OracleReport::Oue(bits)) => {
                if bits.len() != self.config.domain_size {
                    return Err(Error::MixedReports);
                }
                for i in bits.ones() {
                    self.counts[i] += 1;
                }
            }
            (OracleKind::Olh, OracleReport::Olh { hash_seed, bucket }) => {
                let range = self.config.olh_range();
                for (x, c) in self.counts.iter_mut().enumerate() {
                    if olh_hash(*hash_seed, x as u64, range) == *bucket {
                        *c += 1;
                    }
                }
            }
            _ => return Err(Error::MixedReports),
        }
        self.n += 1;
        Ok(())
    }

    pub fn merge(mut self, other: SupportCounter) -> Self {
        debug_assert_eq!(self.config, other.config);
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.n += other.n;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Unbiased estimates. With no reports every estimate is zero.
    pub fn finish(self) -> FrequencyTable {
        let (p, q) = self.config.support_probs();
        let n = self.n;
        let support_counts: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let estimates = if n == 0 {
            vec![0.0; support_counts.len()]
        } else {
            support_counts.iter().map(|&c| (c / n as f64 - q) / (p - q)).collect()
        };
        FrequencyTable { estimates, support_counts, n }
    }
}

/// Estimated frequencies indexed by domain index. Estimates are not clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub estimates: Vec<f64>,
    pub support_counts: Vec<f64>,
    pub n: usize,
}

pub fn aggregate(config: &OracleConfig, reports: &[OracleReport]) -> Result<FrequencyTable> {
    if reports.is_empty() {
        return Err(Error::NoReports);
    }
    if reports.iter().any(|r| r.kind() != config.kind) {
        return Err(Error::MixedReports);
    }
    let counter = reports
        .par_iter()
        .try_fold(
            || SupportCounter::new(*config),
            |mut acc, r| {
                acc.add(r)?;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(|| SupportCounter::new(*config), |a, b| Ok(a.merge(b)))?;
    Ok(counter.finish())
}

/// Variance of a single estimate from `n` reports.
pub fn variance(config: &OracleConfig, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("variance needs at least one report".into()));
    }
    let e = config.epsilon.exp();
    let n = n as f64;
    Ok(match config.kind {
        OracleKind::Krr => (config.domain_size as f64 - 2.0 + e) / ((e - 1.0).powi(2) * n),
        OracleKind::Oue | OracleKind::Olh => 4.0 * e / ((e - 1.0).powi(2) * n),
    })
}

/// Largest `Pr[M(x) = y] / Pr[M(x′) = y]` over inputs and outputs, read off
/// the mechanism's probability tables.
pub fn ratio_bound_check(config: &OracleConfig) -> f64 {
    let (p, q) = config.perturbation_probs();
    match config.kind {
        // Output distribution depends on the input only through y == x
        // (for OLH, through y == H(x)); the ratio is max(p/q, q/p).
        OracleKind::Krr | OracleKind::Olh => (p / q).max(q / p),
        OracleKind::Oue => {
            // Inputs x ≠ x′ differ on exactly two governed bits: bit x is one
            // under x and zero under x′, and vice versa for bit x′. Every other
            // bit has the same law under both inputs and cancels.
            let bit = |input_one: bool, out: bool| match (input_one, out) {
                (true, true) => p,
                (true, false) => 1.0 - p,
                (false, true) => q,
                (false, false) => 1.0 - q,
            };
            let mut worst: f64 = 0.0;
            for out_x in [false, true] {
                for out_xp in [false, true] {
                    let under_x = bit(true, out_x) * bit(false, out_xp);
                    let under_xp = bit(false, out_x) * bit(true, out_xp);
                    worst = worst.max(under_x / under_xp);
                }
            }
            worst
        }
    }
}
