//! Multi-party datasets: synthetic generation, party-file ingestion and exact
//! ground truth.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, Zipf};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extension::rank_order;
use crate::prefix_codec::{encode_item, PrefixCode, Vocabulary};
use crate::protocol::Party;
use crate::seed::{RunSeed, StreamRng};

/// How often a party's Dirichlet draw is retried when it allocates no items.
pub const ALLOCATION_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencyLaw {
    /// Item at rank `r` (1-based) has weight `r^−α`.
    Zipf(f64),
    /// Rank drawn from Poisson(λ), clipped to the domain.
    Poisson(f64),
    Uniform,
}

impl FrequencyLaw {
    fn validate(self) -> Result<()> {
        match self {
            FrequencyLaw::Zipf(a) if !(a > 1.0 && a.is_finite()) => {
                Err(Error::InvalidParameter(format!("Zipf exponent must exceed 1, got {a}")))
            }
            FrequencyLaw::Poisson(l) if !(l > 0.0 && l.is_finite()) => {
                Err(Error::InvalidParameter(format!("Poisson rate must be positive, got {l}")))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for FrequencyLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrequencyLaw::Zipf(a) => write!(f, "zipf:{a}"),
            FrequencyLaw::Poisson(l) => write!(f, "poisson:{l}"),
            FrequencyLaw::Uniform => f.write_str("uniform"),
        }
    }
}

impl std::str::FromStr for FrequencyLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown frequency law {s:?}"));
        let law = match s.split_once(':') {
            None if s.eq_ignore_ascii_case("uniform") => FrequencyLaw::Uniform,
            Some((name, v)) => {
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                match name.trim().to_ascii_lowercase().as_str() {
                    "zipf" => FrequencyLaw::Zipf(v),
                    "poisson" => FrequencyLaw::Poisson(v),
                    _ => return Err(bad()),
                }
            }
            None => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartySpec {
    pub n_users: usize,
    pub law: FrequencyLaw,
}

/// Where pool item ids live in `[0, 2^m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolLayout {
    /// Distinct ids drawn uniformly from the whole code space.
    #[default]
    Sparse,
    /// Ids `0..pool_size`.
    Dense,
}

impl std::str::FromStr for PoolLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(PoolLayout::Sparse),
            "dense" => Ok(PoolLayout::Dense),
            _ => Err(Error::InvalidParameter(format!("pool_layout must be sparse or dense, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynRecipe {
    pub parties: Vec<PartySpec>,
    /// Total items in the global pool.
    pub pool_size: usize,
    /// Number of item groups the Dirichlet allocates over.
    pub n_groups: usize,
    pub dirichlet_beta: f64,
    pub m: u32,
    pub layout: PoolLayout,
}

impl SynRecipe {
    /// Eight parties, 780k users, Dir(0.5) over 6 groups.
    pub fn reference_mix() -> Self {
        use FrequencyLaw::*;
        let rows = [
            (220_000, Poisson(10.0)),
            (170_000, Poisson(8.0)),
            (120_000, Zipf(1.1)),
            (80_000, Zipf(1.3)),
            (70_000, Poisson(6.0)),
            (60_000, Poisson(4.0)),
            (30_000, Zipf(1.5)),
            (30_000, Zipf(1.7)),
        ];
        SynRecipe {
            parties: rows.iter().map(|&(n_users, law)| PartySpec { n_users, law }).collect(),
            pool_size: 33_000,
            n_groups: 6,
            dirichlet_beta: 0.5,
            m: 48,
            layout: PoolLayout::Sparse,
        }
    }

    pub fn total_users(&self) -> usize {
        self.parties.iter().map(|p| p.n_users).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.parties.is_empty() {
            return bad("a dataset needs at least one party".into());
        }
        if self.n_groups == 0 || self.pool_size < self.n_groups {
            return bad(format!("pool of {} items cannot fill {} groups", self.pool_size, self.n_groups));
        }
        if !(self.dirichlet_beta > 0.0) {
            return bad(format!("dirichlet_beta must be positive, got {}", self.dirichlet_beta));
        }
        if self.m == 0 || self.m > 64 || (self.m < 64 && (self.pool_size as u128) > (1u128 << self.m)) {
            return bad(format!("pool of {} items does not fit in {} bits", self.pool_size, self.m));
        }
        for (i, p) in self.parties.iter().enumerate() {
            if p.n_users == 0 {
                return Err(Error::EmptyParty(i as u32));
            }
            p.law.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynDataset {
    pub parties: Vec<Party>,
    /// Item domain of each party, most popular rank first.
    pub domains: Vec<Vec<u64>>,
}

fn build_pool(recipe: &SynRecipe, rng: &mut StreamRng) -> Vec<u64> {
    match recipe.layout {
        PoolLayout::Dense => (0..recipe.pool_size as u64).collect(),
        PoolLayout::Sparse => {
            let limit = if recipe.m == 64 { u64::MAX } else { (1u64 << recipe.m) - 1 };
            let mut seen = HashSet::with_capacity(recipe.pool_size);
            let mut pool = Vec::with_capacity(recipe.pool_size);
            while pool.len() < recipe.pool_size {
                let id = rng.random_range(0..=limit);
                if seen.insert(id) {
                    pool.push(id);
                }
            }
            pool
        }
    }
}

/// Proportions over `n` groups from a symmetric Dirichlet, via normalised
/// Gamma draws.
pub fn dirichlet<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(beta, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return Ok(draws.into_iter().map(|d| d / total).collect());
        }
    }
}

fn allocate_domain(groups: &[Vec<u64>], beta: f64, party: u32, rng: &mut StreamRng) -> Result<Vec<u64>> {
    for _ in 0..ALLOCATION_ATTEMPTS {
        let q = dirichlet(groups.len(), beta, rng)?;
        let mut domain = Vec::new();
        for (group, share) in groups.iter().zip(q) {
            let take = (share * group.len() as f64).round() as usize;
            domain.extend(group.choose_multiple(rng, take).copied());
        }
        if !domain.is_empty() {
            // Random order doubles as the party's popularity ranking.
            domain.shuffle(rng);
            return Ok(domain);
        }
    }
    Err(Error::EmptyAllocation(party))
}

fn sample_ranks(law: FrequencyLaw, domain: usize, n: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    let last = domain - 1;
    let err = |e: &dyn std::fmt::Display| Error::InvalidParameter(e.to_string());
    Ok(match law {
        FrequencyLaw::Zipf(a) => {
            let z = Zipf::new(domain as f64, a).map_err(|e| err(&e))?;
            (0..n).map(|_| (z.sample(rng) as usize - 1).min(last)).collect()
        }
        FrequencyLaw::Poisson(l) => {
            let p = Poisson::new(l).map_err(|e| err(&e))?;
            (0..n).map(|_| (p.sample(rng) as usize).min(last)).collect()
        }
        FrequencyLaw::Uniform => (0..n).map(|_| rng.random_range(0..domain)).collect(),
    })
}

/// Builds the parties of `recipe`. Each party draws group proportions from
/// the Dirichlet, takes that share of every group's items as its domain, and
/// gives each user one item sampled under its frequency law.
pub fn generate_syn(recipe: &SynRecipe, seed: RunSeed) -> Result<SynDataset> {
    recipe.validate()?;
    let mut pool_rng = seed.derive("syn-pool", 0).rng();
    let mut pool = build_pool(recipe, &mut pool_rng);
    pool.shuffle(&mut pool_rng);
    let per = pool.len().div_ceil(recipe.n_groups);
    let groups: Vec<Vec<u64>> = pool.chunks(per).map(<[u64]>::to_vec).collect();

    let built = recipe
        .parties
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let id = i as u32;
            let mut rng = seed.derive("syn-party", i as u64).rng();
            let domain = allocate_domain(&groups, recipe.dirichlet_beta, id, &mut rng)?;
            let ranks = sample_ranks(spec.law, domain.len(), spec.n_users, &mut rng)?;
            let users = ranks.into_iter().map(|r| encode_item(domain[r], recipe.m)).collect::<Result<Vec<_>>>()?;
            Ok((Party::new(id, users)?, domain))
        })
        .collect::<Result<Vec<_>>>()?;
    let (parties, domains) = built.into_iter().unzip();
    Ok(SynDataset { parties, domains })
}

/// How tokens in party files map to item indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenMode {
    /// Tokens are looked up in a vocabulary file.
    Vocabulary,
    /// Tokens are decimal item indices.
    Index,
}

/// Handling of tokens missing from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    #[default]
    Strict,
    /// Unknown tokens are appended to the vocabulary.
    AutoExtend,
}

fn check_capacity(index: u64, m: u32) -> Result<()> {
    if m < 64 && index >> m != 0 {
        return Err(Error::IndexOutOfRange { index, bits: m });
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map(|s| s.trim_end_matches('\r').to_string()).map_err(|e| Error::io(path, e)))
        .collect()
}

/// One user per line; each token resolved through `vocab`.
pub fn ingest_party_file(path: &Path, id: u32, vocab: &mut Vocabulary, m: u32, mode: IngestMode) -> Result<Party> {
    let mut users = Vec::new();
    for (n, token) in read_lines(path)?.iter().enumerate() {
        if token.is_empty() {
            return Err(Error::parse(path, n + 1, "empty token"));
        }
        let index = match (vocab.get(token), mode) {
            (Some(i), _) => i,
            (None, IngestMode::AutoExtend) => vocab.get_or_insert(token),
            (None, IngestMode::Strict) => return Err(Error::parse(path, n + 1, format!("unknown token {token:?}"))),
        };
        check_capacity(index, m).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        users.push(encode_item(index, m)?);
    }
    Party::new(id, users)
}

/// One user per line; each line a decimal item index.
pub fn ingest_index_file(path: &Path, id: u32, m: u32) -> Result<Party> {
    let mut users = Vec::new();
    for (n, line) in read_lines(path)?.iter().enumerate() {
        let index: u64 = line.trim().parse().map_err(|_| Error::parse(path, n + 1, format!("bad item index {line:?}")))?;
        check_capacity(index, m).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        users.push(encode_item(index, m)?);
    }
    Party::new(id, users)
}

/// `key = value` file naming the party files of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub m: u32,
    pub tokens: TokenMode,
    pub vocabulary: Option<PathBuf>,
    pub parties: Vec<PathBuf>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut m = None;
        let mut tokens = TokenMode::Vocabulary;
        let mut vocabulary = None;
        let mut parties = Vec::new();
        for (n, line) in read_lines(path)?.iter().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::parse(path, n + 1, msg);
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`".into()))?;
            let value = value.trim();
            match key.trim() {
                "m" => m = Some(value.parse().map_err(|_| bad(format!("bad m {value:?}")))?),
                "tokens" => {
                    tokens = match value {
                        "index" => TokenMode::Index,
                        "vocabulary" => TokenMode::Vocabulary,
                        _ => return Err(bad(format!("tokens must be index or vocabulary, got {value:?}"))),
                    }
                }
                "vocabulary" => vocabulary = Some(base.join(value)),
                "party" => parties.push(base.join(value)),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let m = m.ok_or_else(|| Error::parse(path, 0, "missing `m`"))?;
        if parties.is_empty() {
            return Err(Error::parse(path, 0, "no `party` entries"));
        }
        if tokens == TokenMode::Vocabulary && vocabulary.is_none() {
            return Err(Error::parse(path, 0, "`tokens = vocabulary` needs a `vocabulary` entry"));
        }
        Ok(Manifest { m, tokens, vocabulary, parties })
    }

    /// Writes the manifest with paths relative to its own directory when
    /// possible.
    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut out = format!("m = {}\n", self.m);
        match self.tokens {
            TokenMode::Index => out.push_str("tokens = index\n"),
            TokenMode::Vocabulary => out.push_str("tokens = vocabulary\n"),
        }
        if let Some(v) = &self.vocabulary {
            writeln!(out, "vocabulary = {}", rel(v)).unwrap();
        }
        for p in &self.parties {
            writeln!(out, "party = {}", rel(p)).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Party `i` of the manifest gets id `i`.
    pub fn load_parties(&self, mode: IngestMode) -> Result<Vec<Party>> {
        match self.tokens {
            TokenMode::Index => {
                self.parties.iter().enumerate().map(|(i, p)| ingest_index_file(p, i as u32, self.m)).collect()
            }
            TokenMode::Vocabulary => {
                let vpath = self.vocabulary.as_deref().expect("checked at load");
                let mut vocab = Vocabulary::load(vpath)?;
                let parties = self
                    .parties
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ingest_party_file(p, i as u32, &mut vocab, self.m, mode))
                    .collect::<Result<Vec<_>>>()?;
                if mode == IngestMode::AutoExtend {
                    vocab.write(vpath)?;
                }
                Ok(parties)
            }
        }
    }
}

/// Writes each party as `party_<id>.txt` (decimal item indices) plus a
/// `manifest.txt` in `dir`. Returns the manifest path.
pub fn write_dataset(parties: &[Party], m: u32, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(parties.len());
    for p in parties {
        let path = dir.join(format!("party_{}.txt", p.id));
        let mut out = String::with_capacity(p.users.len() * 16);
        for u in &p.users {
            writeln!(out, "{}", u.bits()).unwrap();
        }
        std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    let manifest = Manifest { m, tokens: TokenMode::Index, vocabulary: None, parties: files };
    let path = dir.join("manifest.txt");
    manifest.write(&path)?;
    Ok(path)
}

/// Exact global top-k.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Items with global frequencies, best first.
    pub topk: Vec<(PrefixCode, f64)>,
    pub k: usize,
    pub total_users: usize,
}

impl GroundTruth {
    pub fn items(&self) -> Vec<PrefixCode> {
        self.topk.iter().map(|(p, _)| *p).collect()
    }
}

/// Exact global item counts.
pub fn exact_counts(parties: &[Party]) -> HashMap<PrefixCode, u64> {
    let mut counts = HashMap::new();
    for p in parties {
        for u in &p.users {
            *counts.entry(*u).or_insert(0) += 1;
        }
    }
    counts
}

pub fn exact_topk(parties: &[Party], k: usize) -> Result<GroundTruth> {
    if parties.is_empty() {
        return Err(Error::InvalidParameter("at least one party is required".into()));
    }
    let total: usize = parties.iter().map(Party::population).sum();
    let mut all: Vec<_> = exact_counts(parties).into_iter().map(|(p, c)| (p, c as f64 / total as f64)).collect();
    all.sort_by(rank_order);
    all.truncate(k);
    Ok(GroundTruth { topk: all, k, total_users: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn code(i: u64, m: u32) -> PrefixCode {
        encode_item(i, m).unwrap()
    }

    #[test]
    fn reference_mix_totals() {
        let r = SynRecipe::reference_mix();
        assert_eq!(r.total_users(), 780_000);
        assert_eq!(r.parties.len(), 8);
        let ds = generate_syn(&SynRecipe { layout: PoolLayout::Dense, ..r.clone() }, RunSeed(1)).unwrap();
        assert_eq!(ds.parties.iter().map(Party::population).sum::<usize>(), 780_000);
        for (p, d) in ds.parties.iter().zip(&ds.domains) {
            let dom: HashSet<u64> = d.iter().copied().collect();
            assert!(p.users.iter().all(|u| dom.contains(&u.bits())));
            assert!(p.users.iter().all(|u| u.len() == 48));
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let r = SynRecipe { pool_size: 3000, ..SynRecipe::reference_mix() };
        let small = SynRecipe { parties: r.parties.iter().map(|p| PartySpec { n_users: 2000, ..*p }).collect(), ..r };
        assert_eq!(generate_syn(&small, RunSeed(4)).unwrap(), generate_syn(&small, RunSeed(4)).unwrap());
        assert_ne!(generate_syn(&small, RunSeed(4)).unwrap(), generate_syn(&small, RunSeed(5)).unwrap());
    }

    #[test]
    fn large_concentration_gives_similar_domain_sizes() {
        let spec = PartySpec { n_users: 100, law: FrequencyLaw::Uniform };
        let r = SynRecipe {
            parties: vec![spec; 4],
            pool_size: 6000,
            n_groups: 6,
            dirichlet_beta: 1e4,
            m: 20,
            layout: PoolLayout::Dense,
        };
        let ds = generate_syn(&r, RunSeed(2)).unwrap();
        for d in &ds.domains {
            assert!((d.len() as i64 - 1000).abs() <= 30, "{}", d.len());
        }
    }

    #[test]
    fn single_uniform_party() {
        let r = SynRecipe {
            parties: vec![PartySpec { n_users: 500, law: FrequencyLaw::Uniform }],
            pool_size: 64,
            n_groups: 1,
            dirichlet_beta: 0.5,
            m: 8,
            layout: PoolLayout::Dense,
        };
        let ds = generate_syn(&r, RunSeed(3)).unwrap();
        assert_eq!(ds.parties.len(), 1);
        assert_eq!(ds.domains[0].len(), 64);
    }

    #[test]
    fn zipf_frequencies_follow_the_law() {
        // Chi-square over the 10 most popular ranks plus a tail bin.
        let r = SynRecipe {
            parties: vec![PartySpec { n_users: 200_000, law: FrequencyLaw::Zipf(1.5) }],
            pool_size: 500,
            n_groups: 1,
            dirichlet_beta: 1.0,
            m: 16,
            layout: PoolLayout::Dense,
        };
        let ds = generate_syn(&r, RunSeed(6)).unwrap();
        let domain = &ds.domains[0];
        let counts = exact_counts(&ds.parties);
        let weights: Vec<f64> = (1..=domain.len()).map(|x| (x as f64).powf(-1.5)).collect();
        let z: f64 = weights.iter().sum();
        let n = 200_000.0;
        let mut chi2 = 0.0;
        for (r, item) in domain.iter().enumerate().take(10) {
            let expected = weights[r] / z * n;
            let observed = *counts.get(&code(*item, 16)).unwrap_or(&0) as f64;
            chi2 += (observed - expected).powi(2) / expected;
        }
        let head: f64 = weights[..10].iter().sum::<f64>() / z * n;
        let tail_obs: f64 = n - domain[..10].iter().map(|i| *counts.get(&code(*i, 16)).unwrap_or(&0) as f64).sum::<f64>();
        chi2 += (tail_obs - (n - head)).powi(2) / (n - head);
        // 10 degrees of freedom; 0.999 quantile ≈ 29.6.
        assert!(chi2 < 29.6, "chi2 = {chi2}");
    }

    #[test]
    fn poisson_ranks_clip() {
        let mut rng = RunSeed(1).rng();
        let ranks = sample_ranks(FrequencyLaw::Poisson(10.0), 3, 1000, &mut rng).unwrap();
        assert!(ranks.iter().all(|&r| r < 3));
        assert!(ranks.iter().filter(|&&r| r == 2).count() > 900);
    }

    #[test]
    fn law_parsing() {
        assert_eq!("zipf:1.5".parse::<FrequencyLaw>().unwrap(), FrequencyLaw::Zipf(1.5));
        assert_eq!("poisson:4".parse::<FrequencyLaw>().unwrap(), FrequencyLaw::Poisson(4.0));
        assert!("zipf:0.9".parse::<FrequencyLaw>().is_err());
        assert!("gauss:1".parse::<FrequencyLaw>().is_err());
    }

    #[test]
    fn ingest_with_vocabulary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        std::fs::File::create(&path).unwrap().write_all(b"a\nb\na\n").unwrap();
        let mut vocab = Vocabulary::from_tokens(["a", "b"]).unwrap();
        let party = ingest_party_file(&path, 0, &mut vocab, 4, IngestMode::Strict).unwrap();
        let got: Vec<String> = party.users.iter().map(|u| u.to_string()).collect();
        assert_eq!(got, ["0000", "0001", "0000"]);

        std::fs::write(&path, "a\nzz\n").unwrap();
        let err = ingest_party_file(&path, 0, &mut vocab, 4, IngestMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let party = ingest_party_file(&path, 0, &mut vocab, 4, IngestMode::AutoExtend).unwrap();
        assert_eq!(party.users[1], code(2, 4));

        std::fs::write(&path, "").unwrap();
        assert!(matches!(ingest_party_file(&path, 7, &mut vocab, 4, IngestMode::Strict), Err(Error::EmptyParty(7))));

        let mut big = Vocabulary::from_tokens(["a", "b", "c"]).unwrap();
        std::fs::write(&path, "c\n").unwrap();
        assert!(ingest_party_file(&path, 0, &mut big, 1, IngestMode::Strict).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let parties = vec![
            Party::new(0, vec![code(5, 48), code(1 << 40, 48)]).unwrap(),
            Party::new(1, vec![code(7, 48)]).unwrap(),
        ];
        let manifest = write_dataset(&parties, 48, dir.path()).unwrap();
        let loaded = Manifest::load(&manifest).unwrap().load_parties(IngestMode::Strict).unwrap();
        assert_eq!(loaded, parties);
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        std::fs::write(&path, "m = 8\ntokens = vocabulary\nparty = a.txt\n").unwrap();
        assert!(Manifest::load(&path).is_err());
        std::fs::write(&path, "m = 8\ncolour = red\n").unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn exact_topk_cases() {
        let (x, y, z) = (code(1, 4), code(2, 4), code(3, 4));
        let a = Party::new(0, vec![x, x, y]).unwrap();
        let b = Party::new(1, vec![y, y, z]).unwrap();
        let t = exact_topk(&[a.clone(), b], 2).unwrap();
        assert_eq!(t.topk, [(y, 0.5), (x, 2.0 / 6.0)]);
        assert_eq!(exact_topk(&[a.clone(), a.clone()], 2).unwrap().items(), exact_topk(&[a.clone()], 2).unwrap().items());
        assert_eq!(exact_topk(&[a], 10).unwrap().items(), [x, y]);
        assert!(exact_topk(&[], 2).is_err());
    }
}
