//! The four subcommands. Each writes plain files into an output directory and
//! returns the paths it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bcel_core::constraints::Dataset;
use bcel_core::mathfn::RngStream;
use bcel_core::samplers::{posterior_summary, replicate_study, Method, MetricsTable, PosteriorSummary, WeightedSample};

use crate::config::{DataSource, ExperimentConfig, ManifestStamp, MethodKind};
use crate::error::CliError;
use crate::model;

/// Bins per parameter in the histogram files.
pub const HIST_BINS: usize = 40;

/// Default number of replicates for `replicate`.
pub const DEFAULT_REPLICATES: usize = 100;

const DEFAULT_OUT: &str = "bcel-out";

fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// The config as it must be re-read to reproduce a run: data paths made
/// absolute and the version recorded.
fn manifest(cfg: &ExperimentConfig) -> String {
    let mut m = cfg.clone();
    if let (Some(abs), DataSource::File { path, .. }) = (cfg.data_path(), &mut m.data) {
        *path = fs::canonicalize(&abs).unwrap_or(abs);
    }
    m.manifest = Some(ManifestStamp { bcel_version: env!("CARGO_PKG_VERSION").to_string() });
    m.to_toml()
}

fn sampler_stream(cfg: &ExperimentConfig) -> RngStream {
    RngStream::new(cfg.seed, 2)
}

fn summarize(cfg: &ExperimentConfig, sample: &WeightedSample) -> Result<PosteriorSummary, CliError> {
    Ok(posterior_summary(sample, cfg.sampler.cred)?)
}

/// What `run` produced.
#[derive(Debug)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub sample: WeightedSample,
    pub summary: PosteriorSummary,
}

/// Fit the configured method: writes the dataset when simulated, the
/// weighted sample, the posterior summary with its ESS, and the manifest.
pub fn cmd_run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutput, CliError> {
    let data = model::load_data(cfg)?;
    let sample = model::run_method(cfg, cfg.method, &data, &sampler_stream(cfg))?;
    let summary = summarize(cfg, &sample)?;
    let dir = out_dir(cfg, out)?;
    let mut files = Vec::new();
    if matches!(cfg.data, DataSource::Simulate { .. }) {
        files.push(write(&dir, "data.txt", &data.to_text())?);
    }
    files.push(write(&dir, "sample.csv", &sample.to_csv())?);
    files.push(write(&dir, "summary.csv", &summary.to_csv(Some(&cfg.model.param_names())))?);
    files.push(write(&dir, "manifest.toml", &manifest(cfg))?);
    Ok(RunOutput { files, sample, summary })
}

/// Simulate the configured dataset only.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    if !matches!(cfg.data, DataSource::Simulate { .. }) {
        return Err(CliError::Config("simulate needs data.source = \"simulate\"".into()));
    }
    let data = model::load_data(cfg)?;
    write(&out_dir(cfg, out)?, "data.txt", &data.to_text())
}

/// Common bin edges per parameter spanning every particle with positive weight.
fn common_edges(samples: &[&WeightedSample], dim: usize) -> Vec<(f64, f64)> {
    (0..dim)
        .map(|j| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in samples {
                for p in s.particles.iter().filter(|p| p.weight > 0.0) {
                    lo = lo.min(p.theta[j]);
                    hi = hi.max(p.theta[j]);
                }
            }
            if hi <= lo {
                // A point mass still gets a bin of positive width.
                let pad = if lo == 0.0 { 0.5 } else { 0.5 * lo.abs() };
                (lo - pad, hi + pad)
            } else {
                (lo, hi)
            }
        })
        .collect()
}

/// Weighted histogram, `param,lo,hi,mass`; masses per parameter sum to one.
pub fn histogram_csv(sample: &WeightedSample, names: &[String], edges: &[(f64, f64)]) -> String {
    let w = sample.weights();
    let total: f64 = w.iter().sum();
    let mut s = String::from("param,lo,hi,mass\n");
    for (j, (name, &(lo, hi))) in names.iter().zip(edges).enumerate() {
        let width = (hi - lo) / HIST_BINS as f64;
        let mut mass = [0.0; HIST_BINS];
        for (p, wi) in sample.particles.iter().zip(&w) {
            let b = (((p.theta[j] - lo) / width).floor().max(0.0) as usize).min(HIST_BINS - 1);
            mass[b] += wi / total;
        }
        for (b, m) in mass.iter().enumerate() {
            let _ = writeln!(s, "{name},{},{},{m}", lo + b as f64 * width, lo + (b + 1) as f64 * width);
        }
    }
    s
}

fn labels(a: MethodKind, b: MethodKind) -> [String; 2] {
    if a == b {
        [format!("{a}-1"), format!("{b}-2")]
    } else {
        [a.to_string(), b.to_string()]
    }
}

/// Fit two configs to the same data and tabulate them side by side.
///
/// Writes `compare.csv` (`label,param,mean,sd,median,lower,upper,ess`) and one
/// `hist_<label>.csv` per method on shared bins.
pub fn cmd_compare(a: &ExperimentConfig, b: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    if a.model != b.model {
        return Err(CliError::Config(format!("cannot compare models {} and {}", a.model, b.model)));
    }
    let da = model::load_data(a)?;
    let db = model::load_data(b)?;
    if da != db {
        return Err(CliError::Config("the two configs describe different datasets".into()));
    }
    let sa = model::run_method(a, a.method, &da, &sampler_stream(a))?;
    let sb = model::run_method(b, b.method, &db, &sampler_stream(b))?;
    let names = a.model.param_names();
    let labels = labels(a.method, b.method);
    let mut table = String::from("label,param,mean,sd,median,lower,upper,ess\n");
    for (label, (cfg, sample)) in labels.iter().zip([(a, &sa), (b, &sb)]) {
        let sum = summarize(cfg, sample)?;
        for (name, c) in names.iter().zip(&sum.coords) {
            let _ = writeln!(table, "{label},{name},{},{},{},{},{},{}", c.mean, c.sd, c.median, c.lower, c.upper, sum.ess);
        }
    }
    let dir = out_dir(a, out)?;
    let edges = common_edges(&[&sa, &sb], names.len());
    let mut files = vec![write(&dir, "compare.csv", &table)?];
    for (label, sample) in labels.iter().zip([&sa, &sb]) {
        files.push(write(&dir, &format!("hist_{label}.csv"), &histogram_csv(sample, &names, &edges))?);
    }
    Ok(files)
}

/// Monte Carlo replicates at the configured truth.
///
/// Replicate datasets and method runs draw from `RngStream::new(seed, 3)`.
pub fn cmd_replicate(
    cfg: &ExperimentConfig,
    replicates: Option<usize>,
    out: Option<&Path>,
) -> Result<(MetricsTable, Vec<PathBuf>), CliError> {
    let DataSource::Simulate { truth, .. } = &cfg.data else {
        return Err(CliError::Config("replicate needs data.source = \"simulate\" with a truth".into()));
    };
    let r = replicates.or(cfg.replicate.replicates).unwrap_or(DEFAULT_REPLICATES);
    if r == 0 {
        return Err(CliError::Config("need at least one replicate".into()));
    }
    let kinds = cfg.replicate.methods.clone().unwrap_or_else(|| {
        let mut k = vec![MethodKind::Abc];
        if cfg.method != MethodKind::Abc {
            k.push(cfg.method);
        }
        k
    });
    // Surface config problems once, before any replicate runs.
    model::prior(cfg)?;
    if kinds.iter().any(|k| matches!(k, MethodKind::Bcel | MethodKind::BcelAmis)) {
        model::provider(cfg)?;
    }
    model::abc_config(cfg)?;
    let sim = model::simulator(cfg)?;
    let simulate = |s: &RngStream| sim.simulate(s, truth);
    let methods: Vec<Method> = kinds
        .iter()
        .map(|&k| {
            Method::new(k.to_string(), move |d: &Dataset, s: &RngStream| {
                model::run_method(cfg, k, d, s).map_err(|e| match e {
                    CliError::Numerical(e) => e,
                    other => bcel_core::Error::Input(other.to_string()),
                })
            })
        })
        .collect();
    let mut table = replicate_study(&RngStream::new(cfg.seed, 3), truth, r, &simulate, &methods, cfg.sampler.cred)?;
    table.params = cfg.model.param_names();
    let dir = out_dir(cfg, out)?;
    let files = vec![
        write(&dir, "metrics.csv", &table.to_csv())?,
        write(&dir, "failures.csv", &table.failures_csv())?,
        write(&dir, "metrics.txt", &table.to_pretty())?,
        write(&dir, "manifest.toml", &manifest(cfg))?,
    ];
    Ok((table, files))
}
