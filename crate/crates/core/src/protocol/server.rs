use std::collections::BTreeMap;

use crate::extension::rank_order;
use crate::prefix_codec::PrefixCode;

/// Server-side sum of per-party counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServerAggregate {
    pub per_party_reports: Vec<(u32, Vec<(PrefixCode, f64)>)>,
    pub merged: BTreeMap<PrefixCode, f64>,
}

impl ServerAggregate {
    /// Sums counts per prefix. Reports are folded in party-id order so the
    /// result does not depend on arrival order.
    pub fn merge(mut reports: Vec<(u32, Vec<(PrefixCode, f64)>)>) -> Self {
        reports.sort_by_key(|(id, _)| *id);
        let mut merged = BTreeMap::new();
        for (_, entries) in &reports {
            for &(p, c) in entries {
                *merged.entry(p).or_insert(0.0) += c;
            }
        }
        ServerAggregate { per_party_reports: reports, merged }
    }

    /// Pairs received across all reports.
    pub fn pairs(&self) -> usize {
        self.per_party_reports.iter().map(|(_, e)| e.len()).sum()
    }

    /// Top `k` by merged count, prefix value ascending on ties.
    pub fn topk(&self, k: usize) -> Vec<(PrefixCode, f64)> {
        let mut all: Vec<_> = self.merged.iter().map(|(&p, &c)| (p, c)).collect();
        all.sort_by(rank_order);
        all.truncate(k);
        all
    }
}
