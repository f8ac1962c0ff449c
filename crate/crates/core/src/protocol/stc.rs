use rayon::prelude::*;

use super::tap::walk_levels;
use super::{CostTrace, GroupPlan, Party, ProtocolParams, ServerAggregate, UploadKind};
use crate::error::{Error, Result};
use crate::prefix_codec::PrefixCode;
use crate::seed::RunSeed;

/// Outcome of the shared shallow trie phase.
#[derive(Debug, Clone, PartialEq)]
pub struct StcOutcome {
    /// Globally frequent level-`g_s` prefixes, best first.
    pub global: Vec<PrefixCode>,
    /// Each party's own extended level-`g_s` set, by party id. Used only when
    /// no party reported a positive count.
    pub local: Vec<(u32, Vec<PrefixCode>)>,
    pub aggregate: ServerAggregate,
    pub trace: CostTrace,
}

impl StcOutcome {
    /// Phase II starting set for `party`.
    pub fn start_for(&self, party: u32) -> Vec<PrefixCode> {
        if !self.global.is_empty() {
            return self.global.clone();
        }
        self.local.iter().find(|(id, _)| *id == party).map(|(_, c)| c.clone()).unwrap_or_default()
    }
}

/// Shared shallow trie construction: each party estimates levels `1..=g_s`
/// with its phase-I groups and reports its extended level-`g_s` candidates
/// with positive counts; the server keeps the top k by summed count.
pub fn run_stc(parties: &[Party], params: &ProtocolParams, seed: RunSeed) -> Result<StcOutcome> {
    params.validate()?;
    if parties.is_empty() {
        return Err(Error::InvalidParameter("at least one party is required".into()));
    }
    let per_party = parties
        .par_iter()
        .map(|party| {
            let plan = GroupPlan::two_phase(party, params, seed);
            let (last, extended) =
                walk_levels(party, &plan, params, params.extension, 1..=params.g_s, Vec::new(), seed)?;
            let report: Vec<_> = last.top_counts(extended.len()).into_iter().filter(|&(_, c)| c > 0.0).collect();
            Ok((party.id, report, extended))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trace = CostTrace::default();
    let mut reports = Vec::with_capacity(per_party.len());
    let mut local = Vec::with_capacity(per_party.len());
    for (id, report, extended) in per_party {
        trace.record(id, UploadKind::SharedTrie, report.len());
        reports.push((id, report));
        local.push((id, extended));
    }
    local.sort_by_key(|(id, _)| *id);
    let aggregate = ServerAggregate::merge(reports);
    trace.server_ops += aggregate.pairs();
    let global = aggregate.topk(params.k).into_iter().map(|(p, _)| p).collect();
    Ok(StcOutcome { global, local, aggregate, trace })
}
