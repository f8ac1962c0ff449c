use rayon::prelude::*;

use super::tap::{finish, walk_levels, PartyFinal};
use super::{CostTrace, ExtensionPolicy, GroupPlan, MechanismOutput, Party, ProtocolParams};
use crate::error::{Error, Result};
use crate::seed::RunSeed;

/// Single-party prefix extending method: users split evenly over `g`
/// levels, the top `t = k` prefixes extended at every level. Returns the
/// party's final-level top k with counts.
pub fn run_pem_single(party: &Party, params: &ProtocolParams, seed: RunSeed) -> Result<MechanismOutput> {
    params.validate()?;
    let fin = pem_party(party, params, seed)?;
    Ok(finish(vec![fin], params.k, CostTrace::default(), 0))
}

fn pem_party(party: &Party, params: &ProtocolParams, seed: RunSeed) -> Result<PartyFinal> {
    let plan = GroupPlan::uniform(party, params.g, seed);
    let policy = ExtensionPolicy::Fixed(params.k);
    let (last, _) = walk_levels(party, &plan, params, policy, 1..=params.g, Vec::new(), seed)?;
    let local = last.ranked.top(params.k);
    Ok(PartyFinal { party: party.id, report: last.top_counts(params.k), local_topk: local })
}

/// FedPEM: every party runs PEM and uploads its local top-k with counts;
/// the server keeps the top k by summed count.
pub fn run_fedpem(parties: &[Party], params: &ProtocolParams, seed: RunSeed) -> Result<MechanismOutput> {
    params.validate()?;
    if parties.is_empty() {
        return Err(Error::InvalidParameter("at least one party is required".into()));
    }
    let finals = parties.par_iter().map(|p| pem_party(p, params, seed)).collect::<Result<Vec<_>>>()?;
    Ok(finish(finals, params.k, CostTrace::default(), 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::exact_topk;
    use crate::metrics::f1_score;
    use crate::prefix_codec::encode_item;
    use crate::protocol::UploadKind;

    fn zipf_party(id: u32, n: usize, domain: u64, alpha: f64, offset: u64) -> Party {
        let weights: Vec<f64> = (1..=domain).map(|r| 1.0 / (r as f64).powf(alpha)).collect();
        let total: f64 = weights.iter().sum();
        let mut users = Vec::with_capacity(n);
        for (r, w) in weights.iter().enumerate() {
            let c = (w / total * n as f64).round() as usize;
            let item = (r as u64 * 389 + offset) % domain;
            users.extend(std::iter::repeat_n(encode_item(item, 10).unwrap(), c));
        }
        Party::new(id, users).unwrap()
    }

    fn params() -> ProtocolParams {
        ProtocolParams { m: 10, g: 5, g_s: 1, k: 10, epsilon: 20.0, ..Default::default() }
    }

    #[test]
    fn noiseless_pem_recovers_topk() {
        let party = zipf_party(0, 100_000, 1024, 1.5, 7);
        let truth = exact_topk(std::slice::from_ref(&party), 10).unwrap();
        let out = run_pem_single(&party, &params(), RunSeed(4)).unwrap();
        assert!(f1_score(&out.items(), &truth.items()).unwrap() >= 0.9);
    }

    #[test]
    fn small_domain_extends_everything() {
        let users = (0..4000u64).map(|i| encode_item(i % 3, 10).unwrap()).collect();
        let party = Party::new(0, users).unwrap();
        let out = run_pem_single(&party, &params(), RunSeed(5)).unwrap();
        for i in 0..3 {
            assert!(out.items().contains(&encode_item(i, 10).unwrap()));
        }
    }

    #[test]
    fn pem_is_deterministic() {
        let party = zipf_party(0, 20_000, 1024, 1.2, 1);
        let p = ProtocolParams { epsilon: 2.0, ..params() };
        assert_eq!(run_pem_single(&party, &p, RunSeed(6)).unwrap(), run_pem_single(&party, &p, RunSeed(6)).unwrap());
    }

    #[test]
    fn fedpem_identical_parties_match_truth() {
        let parties = vec![zipf_party(0, 60_000, 1024, 1.5, 3), zipf_party(1, 60_000, 1024, 1.5, 3)];
        let truth = exact_topk(&parties, 10).unwrap();
        let out = run_fedpem(&parties, &params(), RunSeed(7)).unwrap();
        assert!(f1_score(&out.items(), &truth.items()).unwrap() >= 0.9);
        assert_eq!(out.trace.pairs_of(UploadKind::Final), 20);
    }

    #[test]
    fn fedpem_single_party_equals_pem() {
        let party = zipf_party(3, 30_000, 1024, 1.3, 11);
        let p = ProtocolParams { epsilon: 4.0, ..params() };
        let fed = run_fedpem(std::slice::from_ref(&party), &p, RunSeed(8)).unwrap();
        let single = run_pem_single(&party, &p, RunSeed(8)).unwrap();
        assert_eq!(fed.items(), single.items());
    }

    #[test]
    fn dominant_party_biases_result() {
        // Disjoint vocabularies; the larger party's items fill the top-k.
        let big = zipf_party(0, 90_000, 512, 1.1, 0);
        let small_users = (0..10_000u64).map(|i| encode_item(512 + i % 20, 10).unwrap()).collect();
        let small = Party::new(1, small_users).unwrap();
        let out = run_fedpem(&[big, small], &params(), RunSeed(9)).unwrap();
        let from_big = out.items().iter().filter(|c| c.bits() < 512).count();
        assert!(from_big >= 5, "{from_big}");
    }
}
