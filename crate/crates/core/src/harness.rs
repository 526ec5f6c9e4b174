//! Replicated simulate, accumulate and estimate runs.
//!
//! Every replication draws one trace from the ground-truth model and feeds
//! its moments to each configured case, so cases are compared on identical
//! traces. Replication `r` is seeded with [`mix64`]`(seed, r)` and rows are
//! assembled in replication order, so the report depends only on the config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{
    estimate, model_laws, parameter_names, parameter_values, CaseConfig, EstimateError,
};
use crate::graph_dynamics::{simulate, ModelSpec, PreparedModel};
use crate::moments::{EmpiricalMoments, MomentAccumulator};
use crate::subgraph_counts::{SubgraphKind, MAX_VERTICES};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BINS: usize = 40;

/// splitmix64 finalizer applied to `seed + (r + 1) * golden`.
pub fn mix64(seed: u64, r: u64) -> u64 {
    let mut z = seed.wrapping_add(r.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("all {replications} replications failed in every case: {failures:?}")]
    AllFailed {
        replications: usize,
        failures: BTreeMap<String, usize>,
    },
}

impl HarnessError {
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Io { .. } | HarnessError::Parse { .. } | HarnessError::Validation(_)
        )
    }
}

/// A case given inline or by preset name (`case1`, `case2`, `case3`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseRef {
    Preset(String),
    Inline(CaseConfig),
}

impl CaseRef {
    pub fn resolve(&self) -> Result<CaseConfig, String> {
        match self {
            CaseRef::Inline(c) => Ok(c.clone()),
            CaseRef::Preset(name) => preset(name).ok_or_else(|| format!("unknown case preset {name:?}")),
        }
    }
}

pub fn preset(name: &str) -> Option<CaseConfig> {
    match name {
        "case1" => Some(CaseConfig::case_i()),
        "case2" => Some(CaseConfig::case_ii()),
        "case3" => Some(CaseConfig::case_iii()),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    model: Option<ModelSpec>,
    cases: Option<Vec<CaseRef>>,
    #[serde(rename = "T")]
    t: Option<usize>,
    #[serde(rename = "R")]
    r: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    histogram_bins: Option<usize>,
    trace: Option<bool>,
    out: Option<PathBuf>,
}

/// A validated experiment. The vertex count is the model's.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub cases: Vec<CaseConfig>,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
    pub workers: usize,
    pub histogram_bins: usize,
    /// Dump the count series of replication 0 to `trace.csv`.
    pub trace: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn n_vertices(&self) -> usize {
        self.model.n_vertices
    }

    /// Union of statistics needed by all cases, in first-use order.
    pub fn statistics(&self) -> Vec<SubgraphKind> {
        let mut kinds: Vec<SubgraphKind> = Vec::new();
        for c in &self.cases {
            for s in c.required_moments() {
                let k = s.kind.canonical();
                if !kinds.contains(&k) {
                    kinds.push(k);
                }
            }
        }
        kinds
    }

    pub fn max_lag(&self) -> u8 {
        self.cases
            .iter()
            .flat_map(|c| c.required_moments())
            .map(|s| s.lag)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        check(&mut errs, self.schema_version, self.t, self.r, self.workers, self.histogram_bins);
        check_model_and_cases(&mut errs, &self.model, &self.cases);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

fn check(errs: &mut Vec<String>, version: u32, t: usize, r: usize, workers: usize, bins: usize) {
    if version != SCHEMA_VERSION {
        errs.push(format!("schema_version {version} is not supported (expected {SCHEMA_VERSION})"));
    }
    if t < 3 {
        errs.push(format!("T = {t}, but at least 3 ticks are required"));
    }
    if r < 1 {
        errs.push("R must be at least 1".into());
    }
    if workers < 1 {
        errs.push("workers must be at least 1".into());
    }
    if bins < 1 {
        errs.push("histogram_bins must be at least 1".into());
    }
}

fn check_model_and_cases(errs: &mut Vec<String>, model: &ModelSpec, cases: &[CaseConfig]) {
    if let Err(e) = model.validate() {
        errs.push(format!("model: {e}"));
    }
    if model.n_vertices > MAX_VERTICES {
        errs.push(format!("model: at most {MAX_VERTICES} vertices are supported"));
    }
    if cases.is_empty() {
        errs.push("cases must list at least one case".into());
    }
    let mut names: Vec<&str> = cases.iter().map(|c| c.name.as_str()).collect();
    names.sort();
    names.dedup();
    if names.len() != cases.len() {
        errs.push("case names must be distinct".into());
    }
    for c in cases {
        if let Err(v) = c.validate() {
            errs.extend(v);
        }
        if c.max_order() > model.n_vertices {
            errs.push(format!(
                "case {}: statistics of order {} need at least that many vertices, model has {}",
                c.name,
                c.max_order(),
                model.n_vertices
            ));
        }
        if c.name.is_empty() || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
            errs.push(format!("case name {:?} must be non-empty ASCII letters, digits, '-' or '_'", c.name));
        }
    }
}

fn parse_error(path: &str, e: &serde_json::Error) -> HarnessError {
    HarnessError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates a config document; `origin` labels error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, HarnessError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| parse_error(origin, &e))?;
    let mut errs = Vec::new();
    let mut missing = |name: &str| errs.push(format!("{name} is required"));
    if raw.schema_version.is_none() {
        missing("schema_version");
    }
    if raw.model.is_none() {
        missing("model");
    }
    if raw.cases.is_none() {
        missing("cases");
    }
    if raw.t.is_none() {
        missing("T");
    }
    if raw.r.is_none() {
        missing("R");
    }
    if raw.seed.is_none() {
        missing("seed");
    }
    let mut cases = Vec::new();
    for c in raw.cases.iter().flatten() {
        match c.resolve() {
            Ok(c) => cases.push(c),
            Err(e) => errs.push(e),
        }
    }
    let workers = raw.workers.unwrap_or(1);
    let bins = raw.histogram_bins.unwrap_or(DEFAULT_BINS);
    check(
        &mut errs,
        raw.schema_version.unwrap_or(SCHEMA_VERSION),
        raw.t.unwrap_or(3),
        raw.r.unwrap_or(1),
        workers,
        bins,
    );
    if let Some(m) = &raw.model {
        check_model_and_cases(&mut errs, m, &cases);
    }
    if !errs.is_empty() {
        return Err(HarnessError::Validation(errs));
    }
    Ok(ExperimentConfig {
        schema_version: raw.schema_version.unwrap_or(SCHEMA_VERSION),
        model: raw.model.expect("checked"),
        cases,
        t: raw.t.expect("checked"),
        r: raw.r.expect("checked"),
        seed: raw.seed.expect("checked"),
        workers,
        histogram_bins: bins,
        trace: raw.trace.unwrap_or(false),
        out: raw.out,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

/// One replication's estimate for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    /// Parameter values, aligned with the case's parameter names; empty on
    /// failure.
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub parameters: Vec<String>,
    pub successes: usize,
    pub failures: BTreeMap<String, usize>,
    pub summary: Vec<ParamSummary>,
    pub rows: Vec<ReplicationRow>,
}

impl CaseReport {
    pub fn summary_of(&self, name: &str) -> Option<&ParamSummary> {
        self.summary.iter().find(|s| s.name == name)
    }

    /// Successful values of one parameter, in replication order.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.parameters.iter().position(|p| p == name) else {
            return Vec::new();
        };
        self.rows.iter().filter(|r| r.error.is_none()).map(|r| r.values[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
    pub cases: Vec<CaseReport>,
    /// Moments pooled over all replications.
    pub pooled_moments: EmpiricalMoments,
}

impl ExperimentReport {
    pub fn case(&self, name: &str) -> Option<&CaseReport> {
        self.cases.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Wall-clock time per phase, summed over replications. Kept out of the
/// report so the report stays byte-reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub simulation_s: f64,
    pub estimation_s: f64,
    pub wall_s: f64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub timings: Timings,
}

/// Population mean and standard deviation (divisor `values.len()`).
pub fn summarize(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]`, right edge inclusive in the
/// last bin. Constant data gives one degenerate bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<Bin> {
    let bins = bins.max(1);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let Some((lo, hi)) = finite.iter().fold(None, |acc: Option<(f64, f64)>, &v| {
        Some(acc.map_or((v, v), |(a, b)| (a.min(v), b.max(v))))
    }) else {
        return Vec::new();
    };
    if lo == hi {
        return vec![Bin {
            left: lo,
            right: hi,
            count: finite.len(),
        }];
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|i| Bin {
            left: lo + i as f64 * width,
            right: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for v in finite {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

fn histogram_csv(bins: &[Bin]) -> String {
    let mut s = String::from("bin_left,bin_right,count\n");
    for b in bins {
        let _ = writeln!(s, "{},{},{}", b.left, b.right, b.count);
    }
    s
}

/// Per-parameter histogram files of one case, as `(file name, contents)`.
pub fn emit_histograms(case: &CaseReport, bins: usize) -> Vec<(String, String)> {
    case.parameters
        .iter()
        .map(|p| (format!("hist_{p}.csv"), histogram_csv(&histogram(&case.column(p), bins))))
        .collect()
}

pub fn replications_csv(case: &CaseReport) -> String {
    let mut s = String::from("replication,seed,status");
    for p in &case.parameters {
        s.push(',');
        s.push_str(p);
    }
    s.push('\n');
    for row in &case.rows {
        let _ = write!(s, "{},{},{}", row.replication, row.seed, row.error_kind.as_deref().unwrap_or("ok"));
        if row.error.is_some() {
            for _ in &case.parameters {
                s.push(',');
            }
        } else {
            for v in &row.values {
                let _ = write!(s, ",{v}");
            }
        }
        s.push('\n');
    }
    s
}

struct Replication {
    moments: Result<EmpiricalMoments, String>,
    estimates: Vec<Result<Vec<f64>, EstimateError>>,
    simulation: Duration,
    estimation: Duration,
}

/// Simulates replication `r` and hands each tick's counts of
/// `cfg.statistics()` to `sink`.
pub fn replay<F: FnMut(usize, &[u64])>(cfg: &ExperimentConfig, model: &PreparedModel, r: usize, sink: F) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed, r as u64));
    simulate(model, cfg.t, &cfg.statistics(), &mut rng, sink);
}

/// Empirical moments of replication `r`.
pub fn replication_moments(cfg: &ExperimentConfig, model: &PreparedModel, r: usize) -> Result<EmpiricalMoments, String> {
    let kinds = cfg.statistics();
    let mut acc = MomentAccumulator::new(&kinds, cfg.max_lag(), cfg.t);
    replay(cfg, model, r, |_, counts| acc.push(counts));
    acc.finish().map_err(|e| e.to_string())
}

fn run_one(cfg: &ExperimentConfig, model: &PreparedModel, r: usize) -> Replication {
    let start = Instant::now();
    let moments = replication_moments(cfg, model, r);
    let simulation = start.elapsed();
    let start = Instant::now();
    let truth = model.profile();
    let estimates = cfg
        .cases
        .iter()
        .map(|case| match &moments {
            Ok(em) => estimate(case, em, cfg.n_vertices(), Some(&truth))
                .map(|res| res.params.into_iter().map(|p| p.value).collect()),
            Err(e) => Err(EstimateError::InvalidCase(e.clone())),
        })
        .collect();
    Replication {
        moments,
        estimates,
        simulation,
        estimation: start.elapsed(),
    }
}

/// Runs all replications on `workers` threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate().map_err(HarnessError::Validation)?;
    let model = cfg
        .model
        .prepare()
        .map_err(|e| HarnessError::Validation(vec![format!("model: {e}")]))?;
    let wall = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Validation(vec![format!("cannot start {} workers: {e}", cfg.workers)]))?;
    // indexed collect keeps replication order
    let reps: Vec<Replication> = pool.install(|| (0..cfg.r).into_par_iter().map(|r| run_one(cfg, &model, r)).collect());

    let truth_laws = model_laws(&cfg.model);
    let mut cases = Vec::new();
    for (ci, case) in cfg.cases.iter().enumerate() {
        let parameters = parameter_names(&case.families);
        let truth = parameter_values(&case.families, &truth_laws);
        let mut failures = BTreeMap::new();
        let rows: Vec<ReplicationRow> = reps
            .iter()
            .enumerate()
            .map(|(r, rep)| {
                let seed = mix64(cfg.seed, r as u64);
                match &rep.estimates[ci] {
                    Ok(values) => ReplicationRow {
                        replication: r,
                        seed,
                        values: values.clone(),
                        error: None,
                        error_kind: None,
                    },
                    Err(e) => {
                        *failures.entry(e.kind().to_string()).or_insert(0) += 1;
                        ReplicationRow {
                            replication: r,
                            seed,
                            values: Vec::new(),
                            error: Some(e.to_string()),
                            error_kind: Some(e.kind().to_string()),
                        }
                    }
                }
            })
            .collect();
        let mut report = CaseReport {
            name: case.name.clone(),
            parameters: parameters.clone(),
            successes: rows.iter().filter(|r| r.error.is_none()).count(),
            failures,
            summary: Vec::new(),
            rows,
        };
        report.summary = parameters
            .iter()
            .zip(&truth)
            .filter_map(|(p, &t)| {
                summarize(&report.column(p)).map(|(mean, std)| ParamSummary {
                    name: p.clone(),
                    truth: t,
                    mean,
                    std,
                })
            })
            .collect();
        cases.push(report);
    }

    if cases.iter().all(|c| c.successes == 0) {
        let mut failures = BTreeMap::new();
        for c in &cases {
            for (k, v) in &c.failures {
                *failures.entry(k.clone()).or_insert(0) += v;
            }
        }
        return Err(HarnessError::AllFailed {
            replications: cfg.r,
            failures,
        });
    }

    let ok: Vec<EmpiricalMoments> = reps.iter().filter_map(|r| r.moments.as_ref().ok().cloned()).collect();
    let pooled_moments = EmpiricalMoments::merge(&ok).unwrap_or(EmpiricalMoments {
        t: 0,
        entries: Vec::new(),
    });
    let timings = Timings {
        simulation_s: reps.iter().map(|r| r.simulation.as_secs_f64()).sum(),
        estimation_s: reps.iter().map(|r| r.estimation.as_secs_f64()).sum(),
        wall_s: wall.elapsed().as_secs_f64(),
        workers: cfg.workers,
    };
    Ok(ExperimentOutput {
        report: ExperimentReport {
            schema_version: SCHEMA_VERSION,
            n: cfg.n_vertices(),
            t: cfg.t,
            r: cfg.r,
            seed: cfg.seed,
            cases,
            pooled_moments,
        },
        timings,
    })
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(contents.as_bytes())?;
    f.flush()
}

/// Writes `report.json`, `timings.json` and, per case, a directory with
/// `replications.csv` and `hist_<param>.csv`.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path, bins: usize) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_file(&dir.join("report.json"), &out.report.to_json())?;
    let timings = serde_json::to_string_pretty(&out.timings).expect("timings serialize") + "\n";
    write_file(&dir.join("timings.json"), &timings)?;
    for case in &out.report.cases {
        let sub = dir.join(&case.name);
        std::fs::create_dir_all(&sub)?;
        write_file(&sub.join("replications.csv"), &replications_csv(case))?;
        for (name, body) in emit_histograms(case, bins) {
            write_file(&sub.join(name), &body)?;
        }
    }
    Ok(())
}

/// Writes the observed count series of replication `r` as
/// `t,<stat>,...` rows. The hidden mode is never written.
pub fn write_trace<W: Write>(cfg: &ExperimentConfig, r: usize, w: &mut W) -> Result<(), HarnessError> {
    let model = cfg
        .model
        .prepare()
        .map_err(|e| HarnessError::Validation(vec![format!("model: {e}")]))?;
    let kinds = cfg.statistics();
    let header: Vec<String> = kinds.iter().map(|k| k.to_string()).collect();
    let mut result = writeln!(w, "t,{}", header.join(","));
    let mut line = String::new();
    replay(cfg, &model, r, |t, counts| {
        if result.is_err() {
            return;
        }
        line.clear();
        let _ = write!(line, "{t}");
        for c in counts {
            let _ = write!(line, ",{c}");
        }
        result = writeln!(w, "{line}");
    });
    result.map_err(|source| HarnessError::Io {
        path: PathBuf::from("trace.csv"),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_examples() {
        assert_eq!(summarize(&[0.7]), Some((0.7, 0.0)));
        let (m, s) = summarize(&[0.2, 0.4]).unwrap();
        assert!((m - 0.3).abs() < 1e-15);
        assert!((s - 0.1).abs() < 1e-15);
        assert_eq!(summarize(&[]), None);
    }

    #[test]
    fn histogram_conserves_counts() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let h = histogram(&v, 40);
        assert_eq!(h.len(), 40);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 1000);
        assert_eq!(h[0].left, 0.0);
        assert_eq!(h[39].right, 100.0 / 7.0);
    }

    #[test]
    fn constant_values_fill_one_bin() {
        let h = histogram(&[0.5; 12], 40);
        assert_eq!(h, vec![Bin { left: 0.5, right: 0.5, count: 12 }]);
    }

    #[test]
    fn mix64_separates_replications() {
        let seeds: Vec<u64> = (0..1000).map(|r| mix64(7, r)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 1000);
        assert_ne!(mix64(7, 0), mix64(8, 0));
    }
}
