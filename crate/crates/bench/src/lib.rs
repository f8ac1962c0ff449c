//! Shared fixtures for the criterion benches under `benches/`.

use fedhh_core::datagen::{generate_syn, FrequencyLaw, PartySpec, SynRecipe};
use fedhh_core::{Party, ProtocolParams, RunSeed};

/// Four parties, 40k users in total, over a 32-bit item space.
pub fn small_federation() -> Vec<Party> {
    let law = |s| FrequencyLaw::Zipf(s);
    let recipe = SynRecipe {
        parties: vec![
            PartySpec { n_users: 16_000, law: law(1.1) },
            PartySpec { n_users: 12_000, law: FrequencyLaw::Poisson(6.0) },
            PartySpec { n_users: 8_000, law: law(1.3) },
            PartySpec { n_users: 4_000, law: law(1.5) },
        ],
        pool_size: 4_000,
        n_groups: 4,
        m: 32,
        ..SynRecipe::reference_mix()
    };
    generate_syn(&recipe, RunSeed(7)).expect("valid recipe").parties
}

pub fn small_params(epsilon: f64) -> ProtocolParams {
    ProtocolParams { m: 32, g: 16, g_s: 4, k: 10, epsilon, ..Default::default() }
}
