//! Multi-party protocol engines.
//!
//! Every mechanism follows the same shape: each party splits its users into
//! level groups, walks the trie level by level (estimate, rank, extend), and
//! uploads its final candidates with population-scaled counts; the server sums
//! counts across parties and reports the top k.

mod estimate;
mod grouping;
mod pem;
mod server;
mod stc;
pub(crate) mod tap;

pub use estimate::{estimate_level, LevelEstimate};
pub use grouping::GroupPlan;
pub use pem::{run_fedpem, run_pem_single};
pub use server::ServerAggregate;
pub use stc::{run_stc, StcOutcome};
pub use tap::run_tap;

pub(crate) use tap::extend_level;

pub use crate::extension::ExtensionPolicy;

use crate::error::{Error, Result};
use crate::oracles::OracleKind;
use crate::prefix_codec::{level_length, PrefixCode};

/// One data holder and its users' full item codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Party {
    pub id: u32,
    pub users: Vec<PrefixCode>,
}

impl Party {
    pub fn new(id: u32, users: Vec<PrefixCode>) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::EmptyParty(id));
        }
        Ok(Party { id, users })
    }

    pub fn population(&self) -> usize {
        self.users.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Code width in bits.
    pub m: u32,
    /// Granularity: number of trie levels and user groups.
    pub g: u32,
    /// Depth of the shared shallow trie.
    pub g_s: u32,
    /// Query size.
    pub k: usize,
    pub epsilon: f64,
    pub oracle: OracleKind,
    /// Share of each party's users reserved for levels `1..=g_s`.
    pub phase1_user_fraction: f64,
    pub extension: ExtensionPolicy,
    /// Share of a pruning level's users assigned to each of the two
    /// validation groups.
    pub dividing_ratio: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            m: 48,
            g: 24,
            g_s: 6,
            k: 10,
            epsilon: 4.0,
            oracle: OracleKind::Krr,
            phase1_user_fraction: 0.1,
            extension: ExtensionPolicy::Adaptive,
            dividing_ratio: 0.1,
        }
    }
}

impl ProtocolParams {
    /// Shared trie depth `⌊0.25·g⌋`, at least 1.
    pub fn default_shared_level(g: u32) -> u32 {
        (g / 4).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m == 0 || self.m > 64 {
            return bad(format!("m must be in 1..=64, got {}", self.m));
        }
        if self.g == 0 || self.g > self.m {
            return bad(format!("g must be in 1..=m, got {}", self.g));
        }
        if self.g_s < 1 || self.g_s >= self.g {
            return bad(format!("g_s must satisfy 1 <= g_s < g, got {}", self.g_s));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.phase1_user_fraction) || self.phase1_user_fraction <= 0.0 {
            return bad(format!("phase1_user_fraction must be in (0, 1), got {}", self.phase1_user_fraction));
        }
        if !(0.0..0.5).contains(&self.dividing_ratio) {
            return bad(format!("dividing_ratio must be in [0, 0.5), got {}", self.dividing_ratio));
        }
        if let ExtensionPolicy::Fixed(0) = self.extension {
            return bad("fixed extension number must be positive".into());
        }
        Ok(())
    }

    pub fn level_length(&self, h: u32) -> u32 {
        level_length(h, self.m, self.g).expect("level within 1..=g")
    }

    /// Levels where consensus pruning runs: `[g_s+1, 2g_s] ∪ [g−g_s, g]`,
    /// restricted to phase II.
    pub fn is_pruning_level(&self, h: u32) -> bool {
        h > self.g_s && h <= self.g && (h <= 2 * self.g_s || h + self.g_s >= self.g)
    }

    /// Number of pruning-active levels, `g*`.
    pub fn pruning_level_count(&self) -> usize {
        (self.g_s + 1..=self.g).filter(|&h| self.is_pruning_level(h)).count()
    }
}

/// What kind of message a party sent to the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UploadKind {
    /// Level-`g_s` candidates and counts for the shared trie.
    SharedTrie,
    /// Final local heavy hitters and counts.
    Final,
    /// A pruning package forwarded to the next party.
    PruningPackage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upload {
    pub party: u32,
    pub kind: UploadKind,
    /// Number of (prefix, value) pairs carried.
    pub pairs: usize,
}

/// Record of every party-to-server upload in one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostTrace {
    pub uploads: Vec<Upload>,
    /// Pairs the server touched while merging and ranking.
    pub server_ops: usize,
}

impl CostTrace {
    pub fn record(&mut self, party: u32, kind: UploadKind, pairs: usize) {
        self.uploads.push(Upload { party, kind, pairs });
    }

    pub fn extend(&mut self, other: CostTrace) {
        self.uploads.extend(other.uploads);
        self.server_ops += other.server_ops;
    }

    pub fn total_pairs(&self) -> usize {
        self.uploads.iter().map(|u| u.pairs).sum()
    }

    pub fn pairs_of(&self, kind: UploadKind) -> usize {
        self.uploads.iter().filter(|u| u.kind == kind).map(|u| u.pairs).sum()
    }
}

/// Result of one mechanism run.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismOutput {
    /// Federated heavy hitters with merged counts, best first. At most k.
    pub topk: Vec<(PrefixCode, f64)>,
    /// Each party's local top-k, by party id.
    pub local_topk: Vec<(u32, Vec<PrefixCode>)>,
    pub trace: CostTrace,
    /// Pruning-active levels (zero for mechanisms without pruning).
    pub pruning_levels: usize,
}

impl MechanismOutput {
    pub fn items(&self) -> Vec<PrefixCode> {
        self.topk.iter().map(|(p, _)| *p).collect()
    }
}
