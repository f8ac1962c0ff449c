use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fedhh_core::datagen::{exact_topk, write_dataset};
use fedhh_core::oracles::{aggregate, perturb, variance};
use fedhh_core::runner::{load_dataset, run_experiment, DatasetSource, ExperimentConfig};
use fedhh_core::{OracleConfig, OracleKind, RunSeed};

#[derive(Parser)]
#[command(name = "fedhh", version, about = "Federated heavy hitters under local differential privacy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (party files plus manifest).
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write its CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV destination; stdout when absent and the config names none.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the exact global top-k of the configured dataset.
    Truth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        k: Option<usize>,
    },
    /// Empirical bias and variance of a frequency oracle.
    OracleBench {
        #[arg(long, default_value = "oue")]
        oracle: OracleKind,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 16)]
        domain: usize,
        #[arg(long, default_value_t = 20_000)]
        users: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file; defaults apply when absent.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epsilon=2,4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn generate(cfg: &ExperimentConfig, out: &PathBuf) -> Result<()> {
    if !matches!(cfg.dataset, DatasetSource::Syn(_)) {
        bail!("generate needs a synthetic dataset recipe, not a manifest");
    }
    let parties = load_dataset(cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = write_dataset(&parties, cfg.m, out)?;
    let users: usize = parties.iter().map(|p| p.population()).sum();
    log::info!("{} parties, {} users", parties.len(), users);
    println!("{}", manifest.display());
    Ok(())
}

fn run(mut cfg: ExperimentConfig, output: Option<PathBuf>) -> Result<()> {
    if output.is_some() {
        cfg.output = output;
    }
    let report = run_experiment(&cfg)?;
    for row in &report.means {
        log::info!("{} eps={} k={} f1={:.4} ncr={:.4}", row.mechanism, row.epsilon, row.k, row.f1, row.ncr);
    }
    match &cfg.output {
        Some(path) => report.write_csv_file(path)?,
        None => report.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn truth(cfg: &ExperimentConfig, k: Option<usize>) -> Result<()> {
    let k = k.unwrap_or_else(|| cfg.ks.iter().copied().max().unwrap_or(10));
    let parties = load_dataset(cfg)?;
    let truth = exact_topk(&parties, k)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "rank\titem\tfrequency")?;
    for (r, (item, f)) in truth.topk.iter().enumerate() {
        writeln!(out, "{}\t{}\t{:.6}", r + 1, item.bits(), f)?;
    }
    Ok(())
}

fn oracle_bench(kind: OracleKind, epsilon: f64, domain: usize, users: usize, trials: usize, seed: u64) -> Result<()> {
    if trials < 2 || users == 0 {
        bail!("need at least two trials and one user");
    }
    let config = OracleConfig::new(kind, epsilon, domain)?;
    // Item i is held by a share of users proportional to i + 1.
    let total_weight = domain * (domain + 1) / 2;
    let holder = |u: usize| {
        let mut w = (u % total_weight) as isize;
        let mut i = 0;
        while w >= (i + 1) as isize {
            w -= (i + 1) as isize;
            i += 1;
        }
        i
    };
    let truth: Vec<f64> = {
        let mut c = vec![0.0; domain];
        for u in 0..users {
            c[holder(u)] += 1.0;
        }
        c.into_iter().map(|x| x / users as f64).collect()
    };
    let root = RunSeed(seed);
    let mut sum = vec![0.0; domain];
    let mut sum_sq = vec![0.0; domain];
    for t in 0..trials {
        let mut rng = root.derive("trial", t as u64).rng();
        let reports = (0..users).map(|u| perturb(&config, holder(u), &mut rng)).collect::<Result<Vec<_>, _>>()?;
        let table = aggregate(&config, &reports)?;
        for (i, e) in table.estimates.iter().enumerate() {
            sum[i] += e;
            sum_sq[i] += e * e;
        }
    }
    let tr = trials as f64;
    let theory = variance(&config, users)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "oracle={} epsilon={} domain={} users={} trials={}", kind.name(), epsilon, domain, users, trials)?;
    writeln!(out, "item\ttrue\tmean\tz\tvariance\ttheory")?;
    for i in 0..domain {
        let mean = sum[i] / tr;
        let var = (sum_sq[i] - tr * mean * mean) / (tr - 1.0);
        let z = (mean - truth[i]) / (theory / tr).sqrt();
        writeln!(out, "{i}\t{:.6}\t{:.6}\t{:.2}\t{:.3e}\t{:.3e}", truth[i], mean, z, var, theory)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate { config, out } => generate(&config.load()?, &out),
        Command::Run { config, output } => run(config.load()?, output),
        Command::Truth { config, k } => truth(&config.load()?, k),
        Command::OracleBench { oracle, epsilon, domain, users, trials, seed } => {
            oracle_bench(oracle, epsilon, domain, users, trials, seed)
        }
    }
}
