use std::ops::RangeInclusive;

use rayon::prelude::*;

use super::{
    estimate_level, run_stc, CostTrace, ExtensionPolicy, GroupPlan, LevelEstimate, MechanismOutput, Party,
    ProtocolParams, ServerAggregate, UploadKind,
};
use crate::error::Result;
use crate::prefix_codec::{construct_domain, CandidateDomain, PrefixCode};
use crate::seed::RunSeed;

pub(crate) fn initial_domain(params: &ProtocolParams) -> Result<CandidateDomain> {
    CandidateDomain::full(params.level_length(1))
}

/// Candidate domain of level `h` grown from the previous level's extended set.
pub(crate) fn extend_level(params: &ProtocolParams, h: u32, parents: &[PrefixCode]) -> Result<CandidateDomain> {
    if h == 1 {
        return initial_domain(params);
    }
    construct_domain(parents, params.level_length(h), params.level_length(h - 1))
}

/// Estimates `levels` in order, extending `policy`-many prefixes after each.
/// Returns the last level's estimate and its extended set.
pub(crate) fn walk_levels(
    party: &Party,
    plan: &GroupPlan,
    params: &ProtocolParams,
    policy: ExtensionPolicy,
    levels: RangeInclusive<u32>,
    mut candidates: Vec<PrefixCode>,
    seed: RunSeed,
) -> Result<(LevelEstimate, Vec<PrefixCode>)> {
    let mut last = None;
    for h in levels {
        let domain = extend_level(params, h, &candidates)?;
        let est = estimate_level(party, &domain, plan.group(h), params.oracle, params.epsilon, seed)?;
        let t = policy.extension_number(&est.ranked, params.k)?;
        candidates = est.ranked.top(t);
        last = Some(est);
    }
    Ok((last.expect("at least one level"), candidates))
}

/// Final upload of a party: its extended level-g set with counts, widened to
/// at least the local top k. The extension number only sizes the next
/// level's domain, and there is no next level after g.
pub(crate) struct PartyFinal {
    pub party: u32,
    pub report: Vec<(PrefixCode, f64)>,
    pub local_topk: Vec<PrefixCode>,
}

impl PartyFinal {
    pub(crate) fn new(party: u32, last: &LevelEstimate, extended: &[PrefixCode], k: usize) -> Self {
        PartyFinal {
            party,
            report: last.top_counts(extended.len().max(k)),
            local_topk: last.ranked.top(k),
        }
    }
}

/// Server merge of the final reports into a mechanism output.
pub(crate) fn finish(finals: Vec<PartyFinal>, k: usize, mut trace: CostTrace, pruning_levels: usize) -> MechanismOutput {
    let mut local_topk = Vec::with_capacity(finals.len());
    let mut reports = Vec::with_capacity(finals.len());
    for f in finals {
        trace.record(f.party, UploadKind::Final, f.report.len());
        local_topk.push((f.party, f.local_topk));
        reports.push((f.party, f.report));
    }
    local_topk.sort_by_key(|(id, _)| *id);
    let agg = ServerAggregate::merge(reports);
    trace.server_ops += agg.pairs();
    MechanismOutput { topk: agg.topk(k), local_topk, trace, pruning_levels }
}

/// TAP: shared shallow trie, then independent adaptive extension per party.
pub fn run_tap(parties: &[Party], params: &ProtocolParams, seed: RunSeed) -> Result<MechanismOutput> {
    params.validate()?;
    let stc = run_stc(parties, params, seed)?;
    let finals = parties
        .par_iter()
        .map(|party| {
            let plan = GroupPlan::two_phase(party, params, seed);
            let start = stc.start_for(party.id);
            let (last, extended) =
                walk_levels(party, &plan, params, params.extension, params.g_s + 1..=params.g, start, seed)?;
            Ok(PartyFinal::new(party.id, &last, &extended, params.k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(finals, params.k, stc.trace, 0))
}
