//! Experiment orchestration: repetitions, scoring, cost accounting and CSV.

mod config;

pub use config::{DatasetSource, ExperimentConfig, Mechanism};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::{exact_topk, generate_syn, IngestMode, Manifest};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::protocol::{run_fedpem, run_pem_single, run_tap, CostTrace, MechanismOutput, Party, ProtocolParams, UploadKind};
use crate::pruning::run_taps;
use crate::seed::RunSeed;

/// Bytes per uploaded (prefix, count) pair: a 64-bit code and a 64-bit count.
pub const PAIR_BYTES: u64 = 16;
/// Per-upload framing overhead.
pub const FRAMING_BYTES: u64 = 0;

pub const CSV_HEADER: [&str; 11] = [
    "run_id",
    "mechanism",
    "oracle",
    "epsilon",
    "k",
    "f1",
    "ncr",
    "avg_local_recall",
    "uploaded_bytes",
    "wall_time_ms",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostSummary {
    pub uploaded_bytes: u64,
    pub pairs: u64,
    pub uploads: u64,
    pub package_pairs: u64,
    pub server_ops: u64,
}

pub fn account_costs(trace: &CostTrace) -> CostSummary {
    let pairs = trace.total_pairs() as u64;
    let uploads = trace.uploads.len() as u64;
    CostSummary {
        uploaded_bytes: pairs * PAIR_BYTES + uploads * FRAMING_BYTES,
        pairs,
        uploads,
        package_pairs: trace.pairs_of(UploadKind::PruningPackage) as u64,
        server_ops: trace.server_ops as u64,
    }
}

/// Upper bound on TAPS uploads: FedPEM's plus one `4k`-pair package per
/// party and pruning-active level.
pub fn taps_byte_bound(fedpem_bytes: u64, pruning_levels: usize, parties: usize, k: usize) -> u64 {
    fedpem_bytes + (pruning_levels * parties * 4 * k) as u64 * PAIR_BYTES
}

/// Dispatches one mechanism run.
pub fn run_mechanism(mechanism: Mechanism, parties: &[Party], params: &ProtocolParams, seed: RunSeed) -> Result<MechanismOutput> {
    match mechanism {
        Mechanism::Pem => {
            let pooled = Party::new(0, parties.iter().flat_map(|p| p.users.iter().copied()).collect())?;
            run_pem_single(&pooled, params, seed)
        }
        Mechanism::FedPem => run_fedpem(parties, params, seed),
        Mechanism::Tap => run_tap(parties, params, seed),
        Mechanism::Taps => run_taps(parties, params, seed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub mechanism: Mechanism,
    pub oracle: crate::OracleKind,
    pub epsilon: f64,
    pub k: usize,
    pub f1: f64,
    pub ncr: f64,
    pub avg_local_recall: f64,
    pub uploaded_bytes: u64,
    pub wall_time_ms: f64,
    pub seed: u64,
}

/// Mean of the runs at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub mechanism: Mechanism,
    pub oracle: crate::OracleKind,
    pub epsilon: f64,
    pub k: usize,
    pub runs: usize,
    pub f1: f64,
    pub ncr: f64,
    pub avg_local_recall: f64,
    pub uploaded_bytes: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub records: Vec<RunRecord>,
    pub means: Vec<MeanRow>,
}

impl ExperimentReport {
    pub fn mean(&self, mechanism: Mechanism, epsilon: f64, k: usize) -> Option<&MeanRow> {
        self.means.iter().find(|m| m.mechanism == mechanism && m.epsilon == epsilon && m.k == k)
    }

    /// Per-run rows followed by one `mean` row per sweep point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.run_id.to_string(),
                r.mechanism.to_string(),
                r.oracle.to_string(),
                r.epsilon.to_string(),
                r.k.to_string(),
                r.f1.to_string(),
                r.ncr.to_string(),
                r.avg_local_recall.to_string(),
                r.uploaded_bytes.to_string(),
                r.wall_time_ms.to_string(),
                r.seed.to_string(),
            ])?;
        }
        for m in &self.means {
            w.write_record([
                "mean".to_string(),
                m.mechanism.to_string(),
                m.oracle.to_string(),
                m.epsilon.to_string(),
                m.k.to_string(),
                m.f1.to_string(),
                m.ncr.to_string(),
                m.avg_local_recall.to_string(),
                m.uploaded_bytes.to_string(),
                m.wall_time_ms.to_string(),
                String::new(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Builds the experiment's parties once; the dataset seed is fixed by the
/// root seed so every repetition sees the same data.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Vec<Party>> {
    match &config.dataset {
        DatasetSource::Syn(recipe) => Ok(generate_syn(recipe, RunSeed(config.seed).derive("dataset", 0))?.parties),
        DatasetSource::Manifest(path) => {
            let manifest = Manifest::load(path)?;
            if manifest.m != config.m {
                return Err(Error::InvalidParameter(format!(
                    "manifest m = {} differs from config m = {}",
                    manifest.m, config.m
                )));
            }
            manifest.load_parties(IngestMode::Strict)
        }
    }
}

/// Seed of repetition `rep`.
pub fn repetition_seed(root: u64, rep: usize) -> u64 {
    RunSeed(root).derive("rep", rep as u64).0
}

/// Runs every (mechanism, ε, k) point `repetitions` times on `parties`.
pub fn run_on_parties(config: &ExperimentConfig, parties: &[Party]) -> Result<ExperimentReport> {
    config.validate()?;
    let mut points = Vec::new();
    for &mechanism in &config.mechanisms {
        for &epsilon in &config.epsilons {
            for &k in &config.ks {
                points.push((mechanism, epsilon, k));
            }
        }
    }
    let max_k = config.ks.iter().copied().max().unwrap_or(0);
    let truth = exact_topk(parties, max_k)?.items();

    let jobs: Vec<(usize, (Mechanism, f64, usize), usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(pi, &pt)| (0..config.repetitions).map(move |rep| (pi, pt, rep)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(_, (mechanism, epsilon, k), rep)| {
            let seed = repetition_seed(config.seed, rep);
            let params = config.params(epsilon, k);
            let start = Instant::now();
            let out = run_mechanism(mechanism, parties, &params, RunSeed(seed))?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let truth_k = &truth[..k.min(truth.len())];
            let eval = evaluate(&out.items(), truth_k, Some(&out.local_topk), k, config.ncr_quality)?;
            Ok(RunRecord {
                run_id: rep,
                mechanism,
                oracle: config.oracle,
                epsilon,
                k,
                f1: eval.f1,
                ncr: eval.ncr,
                avg_local_recall: eval.avg_local_recall.unwrap_or(0.0),
                uploaded_bytes: account_costs(&out.trace).uploaded_bytes,
                wall_time_ms: if config.record_wall_time { elapsed } else { 0.0 },
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let means = points
        .iter()
        .map(|&(mechanism, epsilon, k)| {
            let rows: Vec<&RunRecord> =
                records.iter().filter(|r| r.mechanism == mechanism && r.epsilon == epsilon && r.k == k).collect();
            let n = rows.len() as f64;
            let avg = |f: fn(&RunRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            MeanRow {
                mechanism,
                oracle: config.oracle,
                epsilon,
                k,
                runs: rows.len(),
                f1: avg(|r| r.f1),
                ncr: avg(|r| r.ncr),
                avg_local_recall: avg(|r| r.avg_local_recall),
                uploaded_bytes: avg(|r| r.uploaded_bytes as f64),
                wall_time_ms: avg(|r| r.wall_time_ms),
            }
        })
        .collect();
    Ok(ExperimentReport { records, means })
}

/// Loads the dataset, runs the sweep and writes the CSV if an output path
/// is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let parties = load_dataset(config)?;
    let report = run_on_parties(config, &parties)?;
    if let Some(path) = &config.output {
        report.write_csv_file(path)?;
    }
    Ok(report)
}
