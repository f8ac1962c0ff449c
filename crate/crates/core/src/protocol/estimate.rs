use rayon::prelude::*;

use super::Party;
use crate::error::Result;
use crate::extension::RankedEstimates;
use crate::oracles::{perturb, variance, OracleConfig, OracleKind, SupportCounter};
use crate::prefix_codec::{CandidateDomain, PrefixCode};
use crate::seed::RunSeed;

/// One group's noisy view of a candidate domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEstimate {
    /// Real prefixes only; the dummy slot is dropped.
    pub ranked: RankedEstimates,
    /// Population the frequencies are scaled by when converted to counts.
    pub population: usize,
    pub reports: usize,
    pub dummy_estimate: Option<f64>,
    /// Set when the group had no users; all estimates are then zero.
    pub empty_group: bool,
}

impl LevelEstimate {
    pub fn count(&self, frequency: f64) -> f64 {
        frequency * self.population as f64
    }

    /// The top `t` prefixes with population-scaled counts.
    pub fn top_counts(&self, t: usize) -> Vec<(PrefixCode, f64)> {
        self.ranked.entries().iter().take(t).map(|&(p, f)| (p, self.count(f))).collect()
    }
}

/// Stream for user `user` of party `party`; one report per user per run.
pub(crate) fn user_seed(seed: RunSeed, party: u32, user: usize) -> RunSeed {
    seed.derive("user", party as u64).child(user as u64)
}

/// Each user in `users` reports her prefix at the domain's level through the
/// oracle; prefixes outside the domain go to the dummy slot.
pub fn estimate_level(
    party: &Party,
    domain: &CandidateDomain,
    users: &[usize],
    oracle: OracleKind,
    epsilon: f64,
    seed: RunSeed,
) -> Result<LevelEstimate> {
    let config = OracleConfig::new(oracle, epsilon, domain.alphabet_size())?;
    let counter = users
        .par_iter()
        .try_fold(
            || SupportCounter::new(config),
            |mut acc, &u| {
                let index = domain.route(&party.users[u]).expect("full domains route every user");
                let mut rng = user_seed(seed, party.id, u).rng();
                acc.add(&perturb(&config, index, &mut rng)?)?;
                Ok::<_, crate::Error>(acc)
            },
        )
        .try_reduce(|| SupportCounter::new(config), |a, b| Ok(a.merge(b)))?;
    let reports = counter.n();
    let table = counter.finish();
    let sigma = variance(&config, reports.max(1))?.sqrt();
    let entries = domain.prefixes().iter().copied().zip(table.estimates.iter().copied()).collect();
    Ok(LevelEstimate {
        ranked: RankedEstimates::new(entries, sigma)?,
        population: party.population(),
        reports,
        dummy_estimate: domain.dummy_index().map(|i| table.estimates[i]),
        empty_group: reports == 0,
    })
}
