use std::fmt::Write as _;

use rayon::prelude::*;

use super::sample::{posterior_summary, PosteriorSummary, WeightedSample};
use crate::constraints::Dataset;
use crate::error::{input, Result};
use crate::mathfn::RngStream;

/// Forward draw of a replicate dataset at the true parameter.
pub type DataFn<'a> = dyn Fn(&RngStream) -> Result<Dataset> + Sync + 'a;

type RunFn<'a> = dyn Fn(&Dataset, &RngStream) -> Result<WeightedSample> + Sync + 'a;

/// An inference method under test.
pub struct Method<'a> {
    pub name: String,
    pub run: Box<RunFn<'a>>,
}

impl<'a> Method<'a> {
    pub fn new(name: impl Into<String>, run: impl Fn(&Dataset, &RngStream) -> Result<WeightedSample> + Sync + 'a) -> Self {
        Self { name: name.into(), run: Box::new(run) }
    }

    /// Reports a point mass at `truth` whatever the data; a zero-error reference.
    pub fn truth(truth: Vec<f64>) -> Self {
        let dim = truth.len();
        Self::new("truth", move |_: &Dataset, _: &RngStream| Ok(WeightedSample::unweighted(dim, vec![truth.clone()])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Root mean square error of the posterior mean.
    pub rmse: f64,
    /// Median over replicates of `|posterior median - truth|`.
    pub mad: f64,
    /// Fraction of replicates whose credible interval contains the truth.
    pub coverage: f64,
    /// Replicates that contributed.
    pub n_ok: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateFailure {
    pub replicate: usize,
    /// `None` when the dataset itself could not be simulated.
    pub method: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub params: Vec<String>,
    pub methods: Vec<String>,
    /// `metrics[param][method]`.
    pub metrics: Vec<Vec<Metrics>>,
    pub replicates: usize,
    pub failures: Vec<ReplicateFailure>,
}

impl MetricsTable {
    pub fn get(&self, param: usize, method: &str) -> Option<&Metrics> {
        let k = self.methods.iter().position(|m| m == method)?;
        self.metrics.get(param).map(|row| &row[k])
    }

    /// One row per parameter: `param`, then `rmse_*`, `mad_*`, `coverage_*` per method.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("param");
        for metric in ["rmse", "mad", "coverage"] {
            for m in &self.methods {
                let _ = write!(s, ",{metric}_{m}");
            }
        }
        s.push('\n');
        for (name, row) in self.params.iter().zip(&self.metrics) {
            s.push_str(name);
            for pick in [|m: &Metrics| m.rmse, |m: &Metrics| m.mad, |m: &Metrics| m.coverage] {
                for m in row {
                    let _ = write!(s, ",{}", pick(m));
                }
            }
            s.push('\n');
        }
        s
    }

    /// `replicate,method,message` for every excluded run.
    pub fn failures_csv(&self) -> String {
        let mut s = String::from("replicate,method,message\n");
        for f in &self.failures {
            let msg = f.message.replace(['"', '\n'], " ");
            let _ = writeln!(s, "{},{},\"{}\"", f.replicate, f.method.as_deref().unwrap_or("data"), msg);
        }
        s
    }

    /// Fixed-width rendering for terminals.
    pub fn to_pretty(&self) -> String {
        let mut s = format!("{:<10}", "param");
        for m in &self.methods {
            let _ = write!(s, " {:>12} {:>12} {:>12}", format!("rmse[{m}]"), format!("mad[{m}]"), format!("cov[{m}]"));
        }
        s.push('\n');
        for (name, row) in self.params.iter().zip(&self.metrics) {
            let _ = write!(s, "{name:<10}");
            for m in row {
                let _ = write!(s, " {:>12.4} {:>12.4} {:>12.2}", m.rmse, m.mad, m.coverage);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "{} replicates, {} failures", self.replicates, self.failures.len());
        s
    }
}

fn median(mut x: Vec<f64>) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Monte Carlo study of point estimates and credible intervals.
///
/// Replicate `r` simulates its data from `stream.substream(r).substream(0)` and
/// runs method `k` on `stream.substream(r).substream(k + 1)`. Any failure is
/// listed in the table and that replicate is left out of the method's metrics.
pub fn replicate_study(
    stream: &RngStream,
    truth: &[f64],
    replicates: usize,
    simulate: &DataFn,
    methods: &[Method],
    cred: f64,
) -> Result<MetricsTable> {
    if replicates == 0 {
        return input("need at least one replicate");
    }
    if methods.is_empty() {
        return input("no methods to compare");
    }
    let runs: Vec<std::result::Result<Vec<Result<PosteriorSummary>>, String>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rs = stream.substream(r as u64);
            let data = simulate(&rs.substream(0)).map_err(|e| e.to_string())?;
            Ok(methods
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let sample = (m.run)(&data, &rs.substream(k as u64 + 1))?;
                    if sample.dim != truth.len() {
                        return input(format!("method returned dimension {}, truth has {}", sample.dim, truth.len()));
                    }
                    posterior_summary(&sample, cred)
                })
                .collect())
        })
        .collect();

    let mut failures = Vec::new();
    let mut ok: Vec<Vec<PosteriorSummary>> = vec![Vec::new(); methods.len()];
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Err(message) => failures.push(ReplicateFailure { replicate: r, method: None, message }),
            Ok(per_method) => {
                for (k, res) in per_method.into_iter().enumerate() {
                    match res {
                        Ok(s) => ok[k].push(s),
                        Err(e) => failures.push(ReplicateFailure {
                            replicate: r,
                            method: Some(methods[k].name.clone()),
                            message: e.to_string(),
                        }),
                    }
                }
            }
        }
    }

    let metrics = (0..truth.len())
        .map(|j| {
            ok.iter()
                .map(|sums| {
                    let n = sums.len();
                    let t = truth[j];
                    let sq: f64 = sums.iter().map(|s| (s.coords[j].mean - t).powi(2)).sum();
                    let covered = sums.iter().filter(|s| s.coords[j].covers(t)).count();
                    Metrics {
                        rmse: (sq / n as f64).sqrt(),
                        mad: median(sums.iter().map(|s| (s.coords[j].median - t).abs()).collect()),
                        coverage: covered as f64 / n as f64,
                        n_ok: n,
                    }
                })
                .collect()
        })
        .collect();
    Ok(MetricsTable {
        params: (1..=truth.len()).map(|j| format!("theta_{j}")).collect(),
        methods: methods.iter().map(|m| m.name.clone()).collect(),
        metrics,
        replicates,
        failures,
    })
}
