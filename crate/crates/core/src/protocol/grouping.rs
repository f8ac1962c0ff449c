use rand::seq::SliceRandom;

use super::{Party, ProtocolParams};
use crate::seed::RunSeed;

/// Random partition of a party's users into level groups.
///
/// Groups hold indices into `Party::users`; every user belongs to exactly one
/// group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPlan {
    groups: Vec<Vec<usize>>,
}

/// Splits `users` into `parts` contiguous runs whose sizes differ by at most 1.
fn split_even(users: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let base = users.len() / parts;
    let extra = users.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        out.push(users[start..start + len].to_vec());
        start += len;
    }
    out
}

fn shuffled_users(party: &Party, seed: RunSeed) -> Vec<usize> {
    let mut order: Vec<usize> = (0..party.users.len()).collect();
    order.shuffle(&mut seed.derive("groups", party.id as u64).rng());
    order
}

impl GroupPlan {
    /// Two-phase plan: `phase1_user_fraction` of the users split evenly over
    /// levels `1..=g_s`, the rest evenly over `g_s+1..=g`.
    pub fn two_phase(party: &Party, params: &ProtocolParams, seed: RunSeed) -> Self {
        let order = shuffled_users(party, seed);
        let phase1 = ((party.users.len() as f64) * params.phase1_user_fraction).round() as usize;
        let mut groups = split_even(&order[..phase1], params.g_s as usize);
        groups.extend(split_even(&order[phase1..], (params.g - params.g_s) as usize));
        GroupPlan { groups }
    }

    /// Single-phase plan: all users split evenly over `g` levels.
    pub fn uniform(party: &Party, g: u32, seed: RunSeed) -> Self {
        let order = shuffled_users(party, seed);
        GroupPlan { groups: split_even(&order, g as usize) }
    }

    /// Users of level `h` (1-based).
    pub fn group(&self, h: u32) -> &[usize] {
        &self.groups[h as usize - 1]
    }

    pub fn levels(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}
