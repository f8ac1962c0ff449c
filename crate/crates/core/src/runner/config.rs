use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datagen::{FrequencyLaw, PartySpec, SynRecipe};
use crate::error::{Error, Result};
use crate::extension::ExtensionPolicy;
use crate::metrics::NcrQuality;
use crate::oracles::OracleKind;
use crate::protocol::ProtocolParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    /// Single-party PEM over all users pooled together.
    Pem,
    FedPem,
    Tap,
    Taps,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Mechanism::Pem, Mechanism::FedPem, Mechanism::Tap, Mechanism::Taps];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Pem => "pem",
            Mechanism::FedPem => "fedpem",
            Mechanism::Tap => "tap",
            Mechanism::Taps => "taps",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mechanism {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Syn(SynRecipe),
    Manifest(PathBuf),
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mechanisms: Vec<Mechanism>,
    pub oracle: OracleKind,
    pub epsilons: Vec<f64>,
    pub ks: Vec<usize>,
    pub m: u32,
    pub g: u32,
    /// `None` means `⌊g/4⌋`.
    pub g_s: Option<u32>,
    pub dividing_ratio: f64,
    pub phase1_user_fraction: f64,
    pub extension: ExtensionPolicy,
    pub dataset: DatasetSource,
    pub repetitions: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub ncr_quality: NcrQuality,
    /// Whether the CSV carries measured wall times; zero otherwise.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = ProtocolParams::default();
        ExperimentConfig {
            mechanisms: vec![Mechanism::Taps],
            oracle: p.oracle,
            epsilons: vec![p.epsilon],
            ks: vec![p.k],
            m: p.m,
            g: p.g,
            g_s: None,
            dividing_ratio: p.dividing_ratio,
            phase1_user_fraction: p.phase1_user_fraction,
            extension: p.extension,
            dataset: DatasetSource::Syn(SynRecipe::reference_mix()),
            repetitions: 50,
            seed: 1,
            output: None,
            ncr_quality: NcrQuality::default(),
            record_wall_time: true,
        }
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {v:?}"))))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::InvalidParameter(format!("{key}: empty list")));
    }
    Ok(items)
}

fn one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

impl ExperimentConfig {
    /// Reads a `key = value` file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = ExperimentConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::parse(path, n + 1, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let value = match key {
                "dataset" | "output" if value != "syn" => base.join(value).display().to_string(),
                _ => value.to_string(),
            };
            cfg.set(key, &value).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    fn recipe_mut(&mut self, key: &str) -> Result<&mut SynRecipe> {
        match &mut self.dataset {
            DatasetSource::Syn(r) => Ok(r),
            DatasetSource::Manifest(_) => {
                Err(Error::InvalidParameter(format!("{key} applies only to `dataset = syn`")))
            }
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mechanism" => self.mechanisms = list(key, value)?,
            "oracle" => self.oracle = one(key, value)?,
            "epsilon" => self.epsilons = list(key, value)?,
            "k" => self.ks = list(key, value)?,
            "m" => {
                self.m = one(key, value)?;
                if let DatasetSource::Syn(r) = &mut self.dataset {
                    r.m = self.m;
                }
            }
            "g" => self.g = one(key, value)?,
            "g_s" => self.g_s = Some(one(key, value)?),
            "dividing_ratio" => self.dividing_ratio = one(key, value)?,
            "phase1_user_fraction" => self.phase1_user_fraction = one(key, value)?,
            "extension" => {
                self.extension = match value.trim() {
                    "adaptive" => ExtensionPolicy::Adaptive,
                    v => match v.strip_prefix("fixed:") {
                        Some(t) => ExtensionPolicy::Fixed(one(key, t)?),
                        None => return Err(Error::InvalidParameter(format!("extension: expected adaptive or fixed:<t>, got {v:?}"))),
                    },
                }
            }
            "dataset" => {
                self.dataset = if value == "syn" {
                    DatasetSource::Syn(SynRecipe { m: self.m, ..SynRecipe::reference_mix() })
                } else {
                    DatasetSource::Manifest(PathBuf::from(value))
                }
            }
            "repetitions" => self.repetitions = one(key, value)?,
            "seed" => self.seed = one(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "ncr_quality" => {
                self.ncr_quality = match value {
                    "k-rank" => NcrQuality::KMinusRank,
                    "k-rank+1" => NcrQuality::KMinusRankPlusOne,
                    _ => return Err(Error::InvalidParameter(format!("ncr_quality: expected k-rank or k-rank+1, got {value:?}"))),
                }
            }
            "record_wall_time" => self.record_wall_time = one(key, value)?,
            "syn_pool_size" => self.recipe_mut(key)?.pool_size = one(key, value)?,
            "syn_groups" => self.recipe_mut(key)?.n_groups = one(key, value)?,
            "dirichlet_beta" => self.recipe_mut(key)?.dirichlet_beta = one(key, value)?,
            "pool_layout" => self.recipe_mut(key)?.layout = one(key, value)?,
            "syn_users" => {
                let users: Vec<usize> = list(key, value)?;
                let r = self.recipe_mut(key)?;
                r.parties = resize_specs(&r.parties, users.len(), |i, s| PartySpec { n_users: users[i], ..s });
            }
            "syn_laws" => {
                let laws: Vec<FrequencyLaw> = list(key, value)?;
                let r = self.recipe_mut(key)?;
                r.parties = resize_specs(&r.parties, laws.len(), |i, s| PartySpec { law: laws[i], ..s });
            }
            _ => return Err(Error::InvalidParameter(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn shared_level(&self) -> u32 {
        self.g_s.unwrap_or_else(|| ProtocolParams::default_shared_level(self.g))
    }

    /// Protocol parameters for one sweep point.
    pub fn params(&self, epsilon: f64, k: usize) -> ProtocolParams {
        ProtocolParams {
            m: self.m,
            g: self.g,
            g_s: self.shared_level(),
            k,
            epsilon,
            oracle: self.oracle,
            phase1_user_fraction: self.phase1_user_fraction,
            extension: self.extension,
            dividing_ratio: self.dividing_ratio,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidParameter("mechanism: at least one is required".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be positive".into()));
        }
        for &e in &self.epsilons {
            for &k in &self.ks {
                self.params(e, k).validate()?;
            }
        }
        if let DatasetSource::Syn(r) = &self.dataset {
            if r.m != self.m {
                return Err(Error::InvalidParameter(format!("dataset m = {} differs from m = {}", r.m, self.m)));
            }
            r.validate()?;
        }
        Ok(())
    }
}

/// `specs` resized to `n`, then rewritten entry by entry.
fn resize_specs(specs: &[PartySpec], n: usize, f: impl Fn(usize, PartySpec) -> PartySpec) -> Vec<PartySpec> {
    let fill = specs.last().copied().unwrap_or(PartySpec { n_users: 1, law: FrequencyLaw::Uniform });
    (0..n).map(|i| f(i, specs.get(i).copied().unwrap_or(fill))).collect()
}
