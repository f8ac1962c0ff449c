//! Scoring estimated heavy hitters against exact ground truth.

use crate::error::{Error, Result};
use crate::prefix_codec::PrefixCode;

/// Quality weight used by NCR for an item at 1-based truth rank `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NcrQuality {
    /// `k − r`: the rank-k item carries no weight.
    #[default]
    KMinusRank,
    /// `k − r + 1`.
    KMinusRankPlusOne,
}

impl NcrQuality {
    fn weight(self, k: usize, rank: usize) -> f64 {
        match self {
            NcrQuality::KMinusRank => (k - rank) as f64,
            NcrQuality::KMinusRankPlusOne => (k - rank + 1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ncr: f64,
    pub avg_local_recall: Option<f64>,
}

fn overlap(a: &[PrefixCode], b: &[PrefixCode]) -> usize {
    a.iter().filter(|x| b.contains(x)).count()
}

/// Precision and recall of `estimated` against `truth`.
pub fn precision_recall(estimated: &[PrefixCode], truth: &[PrefixCode]) -> Result<(f64, f64)> {
    if truth.is_empty() {
        return Err(Error::InvalidParameter("ground truth is empty".into()));
    }
    if estimated.is_empty() {
        return Ok((0.0, 0.0));
    }
    let hit = overlap(estimated, truth) as f64;
    Ok((hit / estimated.len() as f64, hit / truth.len() as f64))
}

pub fn f1_score(estimated: &[PrefixCode], truth: &[PrefixCode]) -> Result<f64> {
    let (p, r) = precision_recall(estimated, truth)?;
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// Normalized cumulative rank: each estimated item scores its truth-rank
/// quality; the sum is normalized by the quality of the truth itself.
pub fn ncr_score(estimated: &[PrefixCode], truth: &[PrefixCode], k: usize, quality: NcrQuality) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("NCR needs k >= 2, got {k}")));
    }
    let truth = &truth[..truth.len().min(k)];
    let q = |v: &PrefixCode| truth.iter().position(|t| t == v).map_or(0.0, |i| quality.weight(k, i + 1));
    let denom: f64 = truth.iter().map(q).sum();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("ground truth carries no NCR weight".into()));
    }
    Ok(estimated.iter().map(q).sum::<f64>() / denom)
}

/// Mean over parties of `|truth ∩ local| / k`.
pub fn avg_local_recall(local_topk: &[(u32, Vec<PrefixCode>)], truth: &[PrefixCode], k: usize) -> f64 {
    if local_topk.is_empty() || k == 0 {
        return 0.0;
    }
    let sum: f64 = local_topk.iter().map(|(_, l)| overlap(&l[..l.len().min(k)], truth) as f64 / k as f64).sum();
    sum / local_topk.len() as f64
}

pub fn evaluate(
    estimated: &[PrefixCode],
    truth: &[PrefixCode],
    local_topk: Option<&[(u32, Vec<PrefixCode>)]>,
    k: usize,
    quality: NcrQuality,
) -> Result<EvalResult> {
    let (precision, recall) = precision_recall(estimated, truth)?;
    Ok(EvalResult {
        precision,
        recall,
        f1: f1_score(estimated, truth)?,
        ncr: ncr_score(estimated, truth, k, quality)?,
        avg_local_recall: local_topk.map(|l| avg_local_recall(l, truth, k)),
    })
}
