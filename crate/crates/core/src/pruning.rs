//! TAPS: sequential phase II with consensus-based pruning.
//!
//! Parties run phase II one after another, largest first. At each level of
//! the pruning window a party nominates its `2k` most and `2k` least frequent
//! prefixes; the next party spends two small validation groups re-estimating
//! those nominations and removes the ones both sides agree are useless before
//! its main estimate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::extension::{rank_order, RankedEstimates};
use crate::prefix_codec::{CandidateDomain, PrefixCode};
use crate::protocol::{
    estimate_level, extend_level, run_stc, CostTrace, GroupPlan, LevelEstimate, MechanismOutput, Party,
    ProtocolParams, UploadKind,
};
use crate::protocol::tap::{finish, PartyFinal};
use crate::seed::RunSeed;

/// Guard added to the denominator of the contrast score.
pub const CONTRAST_TAU: f64 = 1e-11;

/// Parties sorted by population, largest first; ties by id.
pub fn order_parties(parties: &[Party]) -> Vec<&Party> {
    let mut ordered: Vec<&Party> = parties.iter().collect();
    ordered.sort_by(|a, b| b.population().cmp(&a.population()).then(a.id.cmp(&b.id)));
    ordered
}

/// One level's nominations.
#[derive(Debug, Clone, PartialEq)]
pub struct PackageEntry {
    /// The `2k` least frequent prefixes, least frequent first.
    pub infrequent: Vec<(PrefixCode, f64)>,
    /// The `2k` most frequent prefixes, most frequent first.
    pub frequent: Vec<(PrefixCode, f64)>,
}

impl PackageEntry {
    pub fn pairs(&self) -> usize {
        self.infrequent.len() + self.frequent.len()
    }

    pub fn infrequent_prefixes(&self) -> Vec<PrefixCode> {
        self.infrequent.iter().map(|e| e.0).collect()
    }

    pub fn frequent_prefixes(&self) -> Vec<PrefixCode> {
        self.frequent.iter().map(|e| e.0).collect()
    }
}

/// Pruning candidates a party forwards to its successor, keyed by level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruningPackage {
    pub source_party: u32,
    pub per_level: BTreeMap<u32, PackageEntry>,
}

impl PruningPackage {
    pub fn new(source_party: u32) -> Self {
        PruningPackage { source_party, per_level: BTreeMap::new() }
    }

    pub fn pairs(&self) -> usize {
        self.per_level.values().map(PackageEntry::pairs).sum()
    }

    /// Line format: `level<TAB>kind<TAB>prefix-bits<TAB>frequency`, preceded
    /// by a `# party <id>` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# party {}\n", self.source_party);
        for (h, entry) in &self.per_level {
            for (kind, list) in [("infrequent", &entry.infrequent), ("frequent", &entry.frequent)] {
                for (p, f) in list {
                    writeln!(out, "{h}\t{kind}\t{p}\t{f:e}").unwrap();
                }
            }
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let source_party = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix("# party "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(origin, 1, "missing `# party <id>` header"))?;
        let mut pkg = PruningPackage::new(source_party);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::parse(origin, i + 1, msg);
            let fields: Vec<&str> = line.split('\t').collect();
            let [level, kind, bits, freq] = fields[..] else {
                return Err(bad("expected 4 tab-separated fields"));
            };
            let h: u32 = level.parse().map_err(|_| bad("bad level"))?;
            let code = PrefixCode::from_bit_str(bits).map_err(|e| bad(&e.to_string()))?;
            let f: f64 = freq.parse().map_err(|_| bad("bad frequency"))?;
            let entry = pkg
                .per_level
                .entry(h)
                .or_insert_with(|| PackageEntry { infrequent: Vec::new(), frequent: Vec::new() });
            match kind {
                "infrequent" => entry.infrequent.push((code, f)),
                "frequent" => entry.frequent.push((code, f)),
                _ => return Err(bad("kind must be `infrequent` or `frequent`")),
            }
        }
        Ok(pkg)
    }
}

/// Top-`2k` and bottom-`2k` of a ranked level, or `None` when the level has
/// fewer than `4k` prefixes and the two lists would overlap.
pub fn select_pruning_candidates(ranked: &RankedEstimates, k: usize) -> Option<PackageEntry> {
    let entries = ranked.entries();
    if entries.len() < 4 * k {
        return None;
    }
    let frequent = entries[..2 * k].to_vec();
    let mut infrequent = entries[entries.len() - 2 * k..].to_vec();
    infrequent.sort_by(ascending_order);
    Some(PackageEntry { infrequent, frequent })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub k_prime: usize,
    pub pruned: Vec<PrefixCode>,
    /// Objective value at `k′ = 1..=k`.
    pub objective_trace: Vec<f64>,
}

/// Population confidence of the predecessor: `(1 − |U^{i−1}| / Σ|U|)²`.
pub fn population_confidence(previous_population: usize, total_population: usize) -> f64 {
    (1.0 - previous_population as f64 / total_population as f64).powi(2)
}

/// Objective for one `k′` given the intersection size.
pub fn consensus_objective(k_prime: usize, overlap: usize, epsilon: f64, gamma: f64) -> f64 {
    let kp = k_prime as f64;
    let alpha = (kp - overlap as f64 + 1.0) / (kp + 1.0);
    overlap as f64 / (kp * (1.0 + epsilon).powi(k_prime as i32)) - gamma * alpha * alpha
}

fn head_intersection(a: &[PrefixCode], b: &[PrefixCode], n: usize) -> Vec<PrefixCode> {
    let b = &b[..n.min(b.len())];
    a.iter().take(n).filter(|p| b.contains(p)).copied().collect()
}

/// Picks `k′ ∈ [1, k]` maximising the consensus objective between the
/// predecessor's ordering and the validated ordering; ties go to the smaller
/// `k′`. The pruned set is the intersection of the two heads at `k′`.
pub fn consensus_filter(
    previous: &[PrefixCode],
    validated: &[PrefixCode],
    k: usize,
    epsilon: f64,
    gamma: f64,
) -> Result<ConsensusResult> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut best = (1, f64::NEG_INFINITY, Vec::new());
    let mut trace = Vec::with_capacity(k);
    for kp in 1..=k {
        let common = head_intersection(previous, validated, kp);
        let score = consensus_objective(kp, common.len(), epsilon, gamma);
        trace.push(score);
        if score > best.1 {
            best = (kp, score, common);
        }
    }
    Ok(ConsensusResult { k_prime: best.0, pruned: best.2, objective_trace: trace })
}

/// Contrast `φ = prev / (current + τ)` for each nominated frequent prefix,
/// highest first. Prefixes missing from `current` count as frequency 0, and
/// negative noisy estimates are clamped to 0 so near-absent prefixes score
/// high rather than flipping sign.
pub fn contrast_scores(previous_frequent: &[(PrefixCode, f64)], current: &[(PrefixCode, f64)]) -> Vec<(PrefixCode, f64)> {
    let mut scores: Vec<_> = previous_frequent
        .iter()
        .map(|&(p, f)| {
            let cur = current.iter().find(|e| e.0 == p).map_or(0.0, |e| e.1.max(0.0));
            (p, f / (cur + CONTRAST_TAU))
        })
        .collect();
    scores.sort_by(rank_order);
    scores
}

/// Frequency ascending, prefix ascending on ties.
fn ascending_order(a: &(PrefixCode, f64), b: &(PrefixCode, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0))
}

/// Validated prefixes, least frequent first.
fn ascending(est: &LevelEstimate) -> Vec<PrefixCode> {
    let mut entries = est.ranked.entries().to_vec();
    entries.sort_by(ascending_order);
    entries.into_iter().map(|e| e.0).collect()
}

/// Inputs shared by both validation tests at one level.
pub struct ValidationContext<'a> {
    pub party: &'a Party,
    pub users_infrequent: &'a [usize],
    pub users_frequent: &'a [usize],
    pub level_length: u32,
    pub gamma: f64,
    pub seed: RunSeed,
}

/// Both consensus tests for one level. Returns the union of the two pruned
/// sets, each test's result, in that order.
pub fn consensus_prune_level(
    ctx: &ValidationContext<'_>,
    incoming: &PackageEntry,
    params: &ProtocolParams,
) -> Result<(Vec<PrefixCode>, ConsensusResult, ConsensusResult)> {
    let validate = |list: Vec<PrefixCode>, users: &[usize]| -> Result<LevelEstimate> {
        let domain = CandidateDomain::from_prefixes(ctx.level_length, list, true)?;
        estimate_level(ctx.party, &domain, users, params.oracle, params.epsilon, ctx.seed)
    };

    let infrequent = incoming.infrequent_prefixes();
    let est0 = validate(infrequent.clone(), ctx.users_infrequent)?;
    let type1 = consensus_filter(&infrequent, &ascending(&est0), params.k, params.epsilon, ctx.gamma)?;

    let est1 = validate(incoming.frequent_prefixes(), ctx.users_frequent)?;
    let contrast: Vec<_> = contrast_scores(&incoming.frequent, est1.ranked.entries()).into_iter().map(|e| e.0).collect();
    let type2 = consensus_filter(&contrast, &ascending(&est1), params.k, params.epsilon, ctx.gamma)?;

    let mut pruned = type1.pruned.clone();
    pruned.extend(type2.pruned.iter().filter(|p| !type1.pruned.contains(p)));
    Ok((pruned, type1, type2))
}

/// What happened at one (party, level) pair of the pruning window.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelAudit {
    pub party: u32,
    pub level: u32,
    /// Union of both tests' pruned sets.
    pub pruned: Vec<PrefixCode>,
    /// Result of the globally-infrequent test.
    pub infrequent_test: ConsensusResult,
    /// Result of the frequency-contrast test.
    pub contrast_test: ConsensusResult,
    /// Set when the pruned domain would have been empty.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapsOutput {
    pub output: MechanismOutput,
    /// Packages in upload order (all parties but the last).
    pub packages: Vec<PruningPackage>,
    pub audit: Vec<LevelAudit>,
}

/// TAPS with its packages and per-level pruning decisions.
pub fn run_taps_audited(parties: &[Party], params: &ProtocolParams, seed: RunSeed) -> Result<TapsOutput> {
    params.validate()?;
    let stc = run_stc(parties, params, seed)?;
    let ordered = order_parties(parties);
    let total: usize = parties.iter().map(Party::population).sum();
    let mut trace: CostTrace = stc.trace.clone();
    let mut finals = Vec::with_capacity(parties.len());
    let mut packages: Vec<PruningPackage> = Vec::new();
    let mut audit = Vec::new();

    for (i, &party) in ordered.iter().enumerate() {
        let plan = GroupPlan::two_phase(party, params, seed);
        let incoming = i.checked_sub(1).map(|j| (&packages[j], ordered[j].population()));
        let emit = i + 1 < ordered.len();
        let mut package = PruningPackage::new(party.id);
        let mut candidates = stc.start_for(party.id);
        let mut last = None;

        for h in params.g_s + 1..=params.g {
            let mut domain = extend_level(params, h, &candidates)?;
            let mut users = plan.group(h);
            let window = params.is_pruning_level(h);
            let entry = incoming.and_then(|(pkg, pop)| pkg.per_level.get(&h).map(|e| (e, pop)));
            if let (true, Some((entry, prev_pop))) = (window, entry) {
                let n_val = (params.dividing_ratio * users.len() as f64).floor() as usize;
                if n_val > 0 {
                    let ctx = ValidationContext {
                        party,
                        users_infrequent: &users[..n_val],
                        users_frequent: &users[n_val..2 * n_val],
                        level_length: params.level_length(h),
                        gamma: population_confidence(prev_pop, total),
                        seed,
                    };
                    let (pruned, t1, t2) = consensus_prune_level(&ctx, entry, params)?;
                    users = &users[2 * n_val..];
                    let reduced = domain.without(&pruned);
                    let skipped = reduced.is_empty();
                    if skipped {
                        log::debug!("party {} level {h}: pruning would empty the domain; skipped", party.id);
                    } else {
                        domain = reduced;
                    }
                    audit.push(LevelAudit {
                        party: party.id,
                        level: h,
                        pruned,
                        infrequent_test: t1,
                        contrast_test: t2,
                        skipped,
                    });
                }
            }
            let est = estimate_level(party, &domain, users, params.oracle, params.epsilon, seed)?;
            if window && emit {
                match select_pruning_candidates(&est.ranked, params.k) {
                    Some(e) => {
                        package.per_level.insert(h, e);
                    }
                    None => log::debug!("party {} level {h}: fewer than 4k candidates; no package", party.id),
                }
            }
            let t = params.extension.extension_number(&est.ranked, params.k)?;
            candidates = est.ranked.top(t);
            last = Some(est);
        }

        let last = last.expect("phase II has at least one level");
        finals.push(PartyFinal::new(party.id, &last, &candidates, params.k));
        if emit {
            if !package.per_level.is_empty() {
                trace.record(party.id, UploadKind::PruningPackage, package.pairs());
            }
            packages.push(package);
        }
    }
    let output = finish(finals, params.k, trace, params.pruning_level_count());
    Ok(TapsOutput { output, packages, audit })
}

/// TAP with sequential phase II and consensus-based pruning.
pub fn run_taps(parties: &[Party], params: &ProtocolParams, seed: RunSeed) -> Result<MechanismOutput> {
    run_taps_audited(parties, params, seed).map(|t| t.output)
}
