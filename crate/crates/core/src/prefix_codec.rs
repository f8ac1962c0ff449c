//! Fixed-width item codes and prefix arithmetic over the binary trie.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Largest code width that fits one machine word.
pub const MAX_BITS: u32 = 64;

/// Candidate domains larger than this are rejected rather than allocated.
pub const MAX_DOMAIN: u128 = 1 << 24;

/// A big-endian bit string of `len` bits stored in the low bits of `bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrefixCode {
    bits: u64,
    len: u32,
}

#[inline]
fn mask(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl PrefixCode {
    pub fn new(bits: u64, len: u32) -> Result<Self> {
        if len == 0 || len > MAX_BITS {
            return Err(Error::InvalidLength(len));
        }
        if bits & !mask(len) != 0 {
            return Err(Error::IndexOutOfRange { index: bits, bits: len });
        }
        Ok(PrefixCode { bits, len })
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let len = s.len() as u32;
        if len == 0 || len > MAX_BITS {
            return Err(Error::InvalidLength(len));
        }
        let mut bits = 0u64;
        for c in s.chars() {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidParameter(format!("not a bit string: {s:?}"))),
                };
        }
        Ok(PrefixCode { bits, len })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The leading `l` bits of this code.
    pub fn prefix(&self, l: u32) -> Result<PrefixCode> {
        if l > self.len {
            return Err(Error::PrefixTooLong { requested: l, available: self.len });
        }
        if l == 0 {
            return Err(Error::InvalidLength(0));
        }
        Ok(self.prefix_unchecked(l))
    }

    #[inline]
    pub(crate) fn prefix_unchecked(&self, l: u32) -> PrefixCode {
        debug_assert!(l >= 1 && l <= self.len);
        PrefixCode { bits: self.bits >> (self.len - l), len: l }
    }

    /// Appends `suffix_len` bits to the right.
    fn extend(&self, suffix: u64, suffix_len: u32) -> PrefixCode {
        PrefixCode { bits: (self.bits << suffix_len) | suffix, len: self.len + suffix_len }
    }
}

impl fmt::Display for PrefixCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.len as usize)
    }
}

/// The `m`-bit big-endian code of `item_index`.
pub fn encode_item(item_index: u64, m: u32) -> Result<PrefixCode> {
    if m == 0 || m > MAX_BITS {
        return Err(Error::InvalidLength(m));
    }
    PrefixCode::new(item_index, m)
}

pub fn prefix_of(code: PrefixCode, l: u32) -> Result<PrefixCode> {
    code.prefix(l)
}

/// Bit length of level `h` (1-based) in a trie of `g` levels over `m`-bit
/// codes: `ceil(h * m / g)`.
pub fn level_length(h: u32, m: u32, g: u32) -> Result<u32> {
    if g == 0 || h == 0 || h > g {
        return Err(Error::LevelOutOfRange { level: h, granularity: g });
    }
    Ok(((h as u64 * m as u64).div_ceil(g as u64)) as u32)
}

/// Ordered perturbation alphabet for one trie level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateDomain {
    level_length: u32,
    prefixes: Vec<PrefixCode>,
    has_dummy: bool,
}

impl CandidateDomain {
    /// Builds a domain from arbitrary prefixes; sorts and de-duplicates.
    pub fn from_prefixes(level_length: u32, mut prefixes: Vec<PrefixCode>, has_dummy: bool) -> Result<Self> {
        if level_length == 0 || level_length > MAX_BITS {
            return Err(Error::InvalidLength(level_length));
        }
        if let Some(bad) = prefixes.iter().find(|p| p.len != level_length) {
            return Err(Error::MismatchedParentLength { expected: level_length, found: bad.len });
        }
        prefixes.sort_unstable();
        prefixes.dedup();
        Ok(CandidateDomain { level_length, prefixes, has_dummy })
    }

    /// Every prefix of `level_length` bits; no dummy slot is needed since all
    /// users fall inside.
    pub fn full(level_length: u32) -> Result<Self> {
        if level_length == 0 || level_length > MAX_BITS {
            return Err(Error::InvalidLength(level_length));
        }
        let size = 1u128 << level_length;
        if size > MAX_DOMAIN {
            return Err(Error::DomainTooLarge(size));
        }
        let prefixes = (0..size as u64).map(|bits| PrefixCode { bits, len: level_length }).collect();
        Ok(CandidateDomain { level_length, prefixes, has_dummy: false })
    }

    pub fn level_length(&self) -> u32 {
        self.level_length
    }

    pub fn prefixes(&self) -> &[PrefixCode] {
        &self.prefixes
    }

    pub fn has_dummy(&self) -> bool {
        self.has_dummy
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    /// Alphabet size seen by the oracle, dummy slot included.
    pub fn alphabet_size(&self) -> usize {
        self.prefixes.len() + usize::from(self.has_dummy)
    }

    /// Index of the dummy slot, if enabled.
    pub fn dummy_index(&self) -> Option<usize> {
        self.has_dummy.then_some(self.prefixes.len())
    }

    pub fn index_of(&self, prefix: &PrefixCode) -> Option<usize> {
        self.prefixes.binary_search(prefix).ok()
    }

    /// Oracle index for a user whose full code is `item`: its prefix's index,
    /// or the dummy slot when the prefix is outside the domain.
    pub fn route(&self, item: &PrefixCode) -> Option<usize> {
        if item.len < self.level_length {
            return self.dummy_index();
        }
        let prefix = item.prefix_unchecked(self.level_length);
        self.index_of(&prefix).or(self.dummy_index())
    }

    /// A copy without the given prefixes. The dummy setting is kept.
    pub fn without(&self, removed: &[PrefixCode]) -> CandidateDomain {
        let prefixes = self.prefixes.iter().filter(|p| !removed.contains(p)).copied().collect();
        CandidateDomain { level_length: self.level_length, prefixes, has_dummy: self.has_dummy }
    }
}

/// `parents × {0,1}^(l_h − l_prev)` with the dummy slot enabled.
pub fn construct_domain(parents: &[PrefixCode], l_h: u32, l_prev: u32) -> Result<CandidateDomain> {
    if parents.is_empty() {
        return Err(Error::EmptyParents);
    }
    if l_h <= l_prev {
        return Err(Error::NonIncreasingLength { current: l_h, previous: l_prev });
    }
    if l_h > MAX_BITS {
        return Err(Error::InvalidLength(l_h));
    }
    if let Some(bad) = parents.iter().find(|p| p.len != l_prev) {
        return Err(Error::MismatchedParentLength { expected: l_prev, found: bad.len });
    }
    let step = l_h - l_prev;
    let mut unique = parents.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let size = (unique.len() as u128) << step;
    if size > MAX_DOMAIN {
        return Err(Error::DomainTooLarge(size));
    }
    // Sorted parents extended in suffix order stay sorted.
    let prefixes = unique
        .iter()
        .flat_map(|p| (0..1u64 << step).map(move |s| p.extend(s, step)))
        .collect();
    Ok(CandidateDomain { level_length: l_h, prefixes, has_dummy: true })
}

/// Token → item index mapping. Line number (0-based) of the vocabulary file is
/// the item index.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u64>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for token in tokens {
            let token = token.into();
            if vocab.index.contains_key(&token) {
                return Err(Error::InvalidParameter(format!("duplicate vocabulary token {token:?}")));
            }
            vocab.insert(token);
        }
        Ok(vocab)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vocab = Vocabulary::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let token = line.trim_end_matches('\r').to_string();
            if vocab.index.contains_key(&token) {
                return Err(Error::parse(path, n + 1, format!("duplicate token {token:?}")));
            }
            vocab.insert(token);
        }
        Ok(vocab)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    fn insert(&mut self, token: String) -> u64 {
        let idx = self.tokens.len() as u64;
        self.index.insert(token.clone(), idx);
        self.tokens.push(token);
        idx
    }

    pub fn get(&self, token: &str) -> Option<u64> {
        self.index.get(token).copied()
    }

    /// Index of `token`, appending it when unseen.
    pub fn get_or_insert(&mut self, token: &str) -> u64 {
        match self.index.get(token) {
            Some(&i) => i,
            None => self.insert(token.to_string()),
        }
    }

    pub fn token(&self, index: u64) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
