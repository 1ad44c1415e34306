//! Experiment driver behind the command-line front end.
//!
//! Every run point is one `(variant, p, R, seed)` combination. Per-run seeds
//! are derived from the master seed, so the instance for seed `k` is shared
//! across variants and adding a seed never changes existing points.

pub mod config;
pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::loss::{gen_range_instance, gen_unit_instance, LossError, LossTensor};
use crate::protocol::{run, Plan, ProtocolConfig, ProtocolError, Variant};
use crate::rng::derive_seed;
use crate::trace::{ingest_trace, TraceError};

pub use config::{ConfigError, ExperimentConfig, InstanceSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("no output directory: pass --out or set `out` in the config")]
    NoOutput,
    #[error("thread pool: {0}")]
    Pool(String),
}

impl HarnessError {
    fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> Self {
        let context = context.into();
        move |source| HarnessError::Io { context, source }
    }
}

/// One point of the cartesian product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunPoint {
    pub variant: Variant,
    pub p: f64,
    pub r: Option<f64>,
    pub seed: u64,
}

impl RunPoint {
    pub fn file_stem(&self) -> String {
        match self.r {
            Some(r) => format!("{}_p{}_R{}_seed{}", self.variant, self.p, r, self.seed),
            None => format!("{}_p{}_seed{}", self.variant, self.p, self.seed),
        }
    }
}

/// Headline numbers of a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub point: RunPoint,
    pub total_bits: u64,
    pub regret: f64,
    /// `−(1/T) Σ_t L_{i_t}(t)`.
    pub reward: f64,
    pub reports_per_round: f64,
    pub active_rounds: u64,
}

pub fn run_points(cfg: &ExperimentConfig) -> Vec<RunPoint> {
    let mut points = Vec::new();
    for &variant in &cfg.variants {
        for &p in &cfg.p_values {
            let rs: Vec<Option<f64>> = if variant.uses_regret() {
                cfg.r_values.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for r in rs {
                for &seed in &cfg.seeds {
                    points.push(RunPoint { variant, p, r, seed });
                }
            }
        }
    }
    points
}

pub fn protocol_config(cfg: &ExperimentConfig, point: &RunPoint) -> ProtocolConfig {
    let mut pc = ProtocolConfig::new(point.variant, point.p);
    pc.target_regret = point.r;
    pc.threshold_const = cfg.threshold_const;
    pc.value_bits = cfg.value_bits;
    pc.level_cap = cfg.level_cap;
    pc.increment_rule = cfg.increment_rule;
    pc.keep_transcripts = cfg.transcripts;
    pc
}

pub fn instance_seed(cfg: &ExperimentConfig, seed: u64) -> u64 {
    derive_seed(cfg.master_seed, "instance", seed)
}

pub fn protocol_seed(cfg: &ExperimentConfig, seed: u64) -> u64 {
    derive_seed(cfg.master_seed, "protocol", seed)
}

/// The loss tensor used for run seed `seed`. Traces ignore the seed.
pub fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<LossTensor, HarnessError> {
    let inst = instance_seed(cfg, seed);
    Ok(match &cfg.instance {
        InstanceSpec::Range { n, s, horizon, a, b, gap } => gen_range_instance(*n, *s, *horizon, *a, *b, *gap, inst)?,
        InstanceSpec::Unit {
            n,
            s,
            horizon,
            sparsity,
            gap,
        } => gen_unit_instance(*n, *s, *horizon, *sparsity, *gap, inst)?,
        InstanceSpec::Trace { path } => ingest_trace(path)?,
    })
}

/// Fail fast: every point must be runnable before anything starts. Returns
/// the trace tensor when the instance is a trace, so it is read only once.
pub fn validate(cfg: &ExperimentConfig) -> Result<Option<LossTensor>, HarnessError> {
    let mut errors = Vec::new();
    if cfg.variants.is_empty() {
        errors.push("no variants given".to_string());
    }
    if cfg.p_values.is_empty() {
        errors.push("no p values given".to_string());
    }
    if cfg.seeds.is_empty() {
        errors.push("no seeds given".to_string());
    }
    if cfg.variants.iter().any(|v| v.uses_regret()) && cfg.r_values.is_empty() {
        errors.push("tradeoff and full need at least one R value".to_string());
    }

    let mut trace = None;
    let shape = match &cfg.instance {
        InstanceSpec::Range { n, s, horizon, a, b, gap } => {
            if let Err(e) = crate::loss::Regime::range(*a, *b) {
                errors.push(e.to_string());
            }
            if !(0.0..1.0).contains(gap) {
                errors.push(format!("gap = {gap} must lie in [0, 1)"));
            }
            cfg.regime().map(|r| (*n, *s, *horizon, r))
        }
        InstanceSpec::Unit {
            n,
            s,
            horizon,
            sparsity,
            gap,
        } => {
            if !(*sparsity > 0.0 && *sparsity <= 1.0) {
                errors.push(format!("sparsity = {sparsity} must lie in (0, 1]"));
            }
            if !(0.0..1.0).contains(gap) {
                errors.push(format!("gap = {gap} must lie in [0, 1)"));
            }
            cfg.regime().map(|r| (*n, *s, *horizon, r))
        }
        InstanceSpec::Trace { path } => match ingest_trace(path) {
            Ok(t) => {
                let shape = (t.experts(), t.servers(), t.horizon(), t.regime());
                trace = Some(t);
                Some(shape)
            }
            Err(e) => {
                errors.push(format!("{}: {e}", path.display()));
                None
            }
        },
    };
    if let Some((n, s, horizon, regime)) = shape {
        if n == 0 || s == 0 || horizon == 0 {
            errors.push("n, s and T must be positive".to_string());
        } else {
            let mut seen = Vec::new();
            for point in run_points(cfg) {
                let key = (point.variant, point.p.to_bits(), point.r.map(f64::to_bits));
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                if let Err(e) = Plan::for_shape(&protocol_config(cfg, &point), n, s, horizon, regime) {
                    let r = point.r.map(|r| format!(", R={r}")).unwrap_or_default();
                    errors.push(format!("{} p={}{r}: {e}", point.variant, point.p));
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(trace)
    } else {
        Err(ConfigError(errors).into())
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(HarnessError::io(format!("writing {}", path.display())))
}

/// Run every point, writing per-run CSVs into `stage/runs`.
fn execute(
    cfg: &ExperimentConfig,
    trace: Option<&LossTensor>,
    stage: &Path,
    jobs: usize,
) -> Result<Vec<RunSummary>, HarnessError> {
    let runs_dir = stage.join("runs");
    fs::create_dir_all(&runs_dir).map_err(HarnessError::io("creating staging directory"))?;
    let provenance = cfg.provenance();
    let points = run_points(cfg);
    let results: Vec<Result<RunSummary, HarnessError>> = pool(jobs)?.install(|| {
        points
            .par_iter()
            .map(|point| {
                let owned;
                let tensor = match trace {
                    Some(t) => t,
                    None => {
                        owned = build_instance(cfg, point.seed)?;
                        &owned
                    }
                };
                let report = run(&protocol_config(cfg, point), tensor, protocol_seed(cfg, point.seed))?;
                let stem = point.file_stem();
                let mut csv = provenance.clone();
                if let Some(delta) = tensor.shift() {
                    let _ = writeln!(csv, "# trace_shift={delta}");
                }
                csv.push_str(&report.to_csv());
                write(&runs_dir.join(format!("{stem}.csv")), &csv)?;
                if let Some(dump) = &report.transcript {
                    write(&runs_dir.join(format!("{stem}.transcript")), &format!("{provenance}{dump}"))?;
                }
                Ok(RunSummary {
                    point: *point,
                    total_bits: report.total_bits,
                    regret: report.regret,
                    reward: -report.alg_loss / report.horizon() as f64,
                    reports_per_round: report.reports as f64 / report.horizon() as f64,
                    active_rounds: report.active_rounds,
                })
            })
            .collect()
    });
    results.into_iter().collect()
}

fn fmt_r(r: Option<f64>) -> String {
    r.map(|r| r.to_string()).unwrap_or_default()
}

/// `variant,p,R,seed,total_bits,final_regret`.
pub fn summary_csv(cfg: &ExperimentConfig, runs: &[RunSummary]) -> String {
    let mut out = cfg.provenance();
    out.push_str("variant,p,R,seed,total_bits,final_regret\n");
    for s in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.point.variant,
            s.point.p,
            fmt_r(s.point.r),
            s.point.seed,
            s.total_bits,
            s.regret
        );
    }
    out
}

/// Mean and standard error; the error is 0 for a single value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Seed-aggregated rows keyed by `(variant, p, R)` in run order.
fn groups(runs: &[RunSummary]) -> Vec<(RunPoint, Vec<&RunSummary>)> {
    let mut out: Vec<(RunPoint, Vec<&RunSummary>)> = Vec::new();
    for s in runs {
        let same = |g: &RunPoint| g.variant == s.point.variant && g.p == s.point.p && g.r == s.point.r;
        match out.iter_mut().find(|(g, _)| same(g)) {
            Some((_, members)) => members.push(s),
            None => out.push((s.point, vec![s])),
        }
    }
    out
}

fn figure(cfg: &ExperimentConfig, runs: &[RunSummary], header: &str, cols: &[fn(&RunSummary) -> f64]) -> String {
    let mut out = cfg.provenance();
    let _ = writeln!(out, "variant,p,R,{header},seeds");
    for (g, members) in groups(runs) {
        let _ = write!(out, "{},{},{}", g.variant, g.p, fmt_r(g.r));
        for col in cols {
            let values: Vec<f64> = members.iter().map(|m| col(m)).collect();
            let (mean, se) = mean_se(&values);
            let _ = write!(out, ",{mean},{se}");
        }
        let _ = writeln!(out, ",{}", members.len());
    }
    out
}

/// `comm_vs_p.csv`, `reward_vs_p.csv` and `comm_vs_regret.csv`.
pub fn figure_csvs(cfg: &ExperimentConfig, runs: &[RunSummary]) -> Vec<(&'static str, String)> {
    let mut by_r = runs.to_vec();
    by_r.sort_by(|a, b| {
        (a.point.variant, a.point.p.to_bits())
            .cmp(&(b.point.variant, b.point.p.to_bits()))
            .then(a.point.r.partial_cmp(&b.point.r).unwrap_or(std::cmp::Ordering::Equal))
    });
    vec![
        (
            "comm_vs_p.csv",
            figure(
                cfg,
                runs,
                "mean_bits,se_bits,mean_reports_per_round,se_reports_per_round",
                &[|s| s.total_bits as f64, |s| s.reports_per_round],
            ),
        ),
        (
            "reward_vs_p.csv",
            figure(
                cfg,
                runs,
                "mean_reward,se_reward,mean_regret,se_regret",
                &[|s| s.reward, |s| s.regret],
            ),
        ),
        (
            "comm_vs_regret.csv",
            figure(
                cfg,
                &by_r,
                "mean_bits,se_bits,mean_regret,se_regret",
                &[|s| s.total_bits as f64, |s| s.regret],
            ),
        ),
    ]
}

/// Move every staged file into `out`, creating directories as needed.
fn publish(stage: &Path, out: &Path) -> Result<(), HarnessError> {
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        let src_dir = stage.join(&rel);
        let dst_dir = out.join(&rel);
        fs::create_dir_all(&dst_dir).map_err(HarnessError::io(format!("creating {}", dst_dir.display())))?;
        let mut entries: Vec<_> = fs::read_dir(&src_dir)
            .map_err(HarnessError::io("reading staging directory"))?
            .collect::<Result<_, _>>()
            .map_err(HarnessError::io("reading staging directory"))?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let name = entry.file_name();
            if entry.path().is_dir() {
                stack.push(rel.join(&name));
            } else {
                let dst = dst_dir.join(&name);
                fs::rename(entry.path(), &dst).map_err(HarnessError::io(format!("moving {}", dst.display())))?;
            }
        }
    }
    Ok(())
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    let out = cfg.out.clone().ok_or(HarnessError::NoOutput)?;
    fs::create_dir_all(&out).map_err(HarnessError::io(format!("creating {}", out.display())))?;
    Ok(out)
}

fn staged(
    cfg: &ExperimentConfig,
    jobs: usize,
    extra: impl FnOnce(&[RunSummary]) -> Vec<(&'static str, String)>,
) -> Result<Vec<RunSummary>, HarnessError> {
    let trace = validate(cfg)?;
    let out = output_dir(cfg)?;
    // staging inside `out` keeps the final renames on one filesystem
    let stage = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(&out)
        .map_err(HarnessError::io("creating staging directory"))?;
    let runs = execute(cfg, trace.as_ref(), stage.path(), jobs)?;
    write(&stage.path().join("summary.csv"), &summary_csv(cfg, &runs))?;
    for (name, contents) in extra(&runs) {
        write(&stage.path().join(name), &contents)?;
    }
    publish(stage.path(), &out)?;
    Ok(runs)
}

/// One run CSV per point plus `summary.csv`. Nothing is written to the
/// output directory unless every run succeeds.
pub fn cmd_run(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<RunSummary>, HarnessError> {
    staged(cfg, jobs, |_| Vec::new())
}

/// Everything `cmd_run` writes, plus the three seed-aggregated figure CSVs.
pub fn cmd_sweep_figures(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<RunSummary>, HarnessError> {
    staged(cfg, jobs, |runs| figure_csvs(cfg, runs))
}
