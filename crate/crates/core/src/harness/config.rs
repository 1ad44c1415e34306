//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! instance = range          # range | unit | trace
//! n = 16
//! s = 4
//! T = 20000
//! a = 1                     # range only
//! b = 5                     # range only
//! gap = 0.5                 # range and unit
//! sparsity = 1              # unit only
//! trace = losses.txt        # trace only
//! variants = baseline, simple
//! p = 1, 2, 4
//! R = 0.05, 0.1             # used by tradeoff and full
//! seeds = 0..20             # or a list: 0, 1, 2
//! seed = 7                  # master seed
//! threshold_const = 100
//! value_bits = 32
//! level_cap = 40            # optional
//! increment_rule = ipw      # ipw | literal
//! transcripts = false
//! out = results
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::loss::Regime;
use crate::protocol::{IncrementRule, Variant};

#[derive(Debug, Error, PartialEq)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigError(pub Vec<String>);

#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSpec {
    Range {
        n: usize,
        s: usize,
        horizon: usize,
        a: f64,
        b: f64,
        gap: f64,
    },
    Unit {
        n: usize,
        s: usize,
        horizon: usize,
        sparsity: f64,
        gap: f64,
    },
    Trace {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub variants: Vec<Variant>,
    pub p_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub threshold_const: f64,
    pub value_bits: u32,
    pub level_cap: Option<u32>,
    pub increment_rule: IncrementRule,
    pub transcripts: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instance: InstanceSpec::Range {
                n: 16,
                s: 4,
                horizon: 1000,
                a: 1.0,
                b: 5.0,
                gap: 0.5,
            },
            variants: vec![Variant::Baseline],
            p_values: vec![2.0],
            r_values: Vec::new(),
            seeds: vec![0],
            master_seed: 0,
            threshold_const: 100.0,
            value_bits: 32,
            level_cap: None,
            increment_rule: IncrementRule::InverseProbability,
            transcripts: false,
            out: None,
        }
    }
}

const KEYS: &[&str] = &[
    "instance",
    "n",
    "s",
    "T",
    "a",
    "b",
    "gap",
    "sparsity",
    "trace",
    "variants",
    "p",
    "R",
    "seeds",
    "seed",
    "threshold_const",
    "value_bits",
    "level_cap",
    "increment_rule",
    "transcripts",
    "out",
];

impl ExperimentConfig {
    /// Parse; unknown keys, duplicates and bad values are all collected into
    /// one error.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut errors = Vec::new();
        let mut entries: Vec<(&str, &str, usize)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {line_no}: expected `key = value`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                errors.push(format!("line {line_no}: unknown key {key:?}"));
            } else if entries.iter().any(|(k, _, _)| *k == key) {
                errors.push(format!("line {line_no}: duplicate key {key:?}"));
            } else {
                entries.push((key, value, line_no));
            }
        }
        let get = |key: &str| entries.iter().find(|(k, _, _)| *k == key).map(|(_, v, l)| (*v, *l));

        let mut cfg = ExperimentConfig::default();

        macro_rules! scalar {
            ($key:literal, $target:expr) => {
                if let Some((v, line)) = get($key) {
                    match v.parse() {
                        Ok(x) => $target = x,
                        Err(_) => errors.push(format!("line {line}: {} = {v:?} is not valid", $key)),
                    }
                }
            };
        }

        let kind = get("instance").map(|(v, l)| (v.to_ascii_lowercase(), l));
        let (mut n, mut s, mut horizon) = (16usize, 4usize, 1000usize);
        let (mut a, mut b, mut gap, mut sparsity) = (1.0f64, 5.0f64, 0.5f64, 1.0f64);
        scalar!("n", n);
        scalar!("s", s);
        scalar!("T", horizon);
        scalar!("a", a);
        scalar!("b", b);
        scalar!("gap", gap);
        scalar!("sparsity", sparsity);
        let kind_name = kind.as_ref().map(|(v, _)| v.as_str()).unwrap_or("range");
        let not_for = |keys: &[&str], errors: &mut Vec<String>| {
            for key in keys {
                if let Some((_, line)) = get(key) {
                    errors.push(format!("line {line}: {key} does not apply to instance = {kind_name}"));
                }
            }
        };
        cfg.instance = match kind_name {
            "range" => {
                not_for(&["sparsity", "trace"], &mut errors);
                InstanceSpec::Range { n, s, horizon, a, b, gap }
            }
            "unit" => {
                not_for(&["a", "b", "trace"], &mut errors);
                InstanceSpec::Unit {
                    n,
                    s,
                    horizon,
                    sparsity,
                    gap,
                }
            }
            "trace" => {
                not_for(&["n", "s", "T", "a", "b", "gap", "sparsity"], &mut errors);
                match get("trace") {
                    Some((path, _)) => InstanceSpec::Trace { path: path.into() },
                    None => {
                        errors.push("instance = trace needs a `trace = PATH` entry".into());
                        InstanceSpec::Trace { path: PathBuf::new() }
                    }
                }
            }
            other => {
                let line = kind.as_ref().map(|(_, l)| *l).unwrap_or(0);
                errors.push(format!("line {line}: unknown instance kind {other:?}"));
                cfg.instance.clone()
            }
        };

        if let Some((v, line)) = get("variants") {
            cfg.variants = list(v, line, "variants", &mut errors);
        }
        if let Some((v, line)) = get("p") {
            cfg.p_values = list(v, line, "p", &mut errors);
        }
        if let Some((v, line)) = get("R") {
            cfg.r_values = list(v, line, "R", &mut errors);
        }
        if let Some((v, line)) = get("seeds") {
            cfg.seeds = parse_seeds(v).unwrap_or_else(|| {
                errors.push(format!("line {line}: seeds = {v:?} is not a list or a `lo..hi` range"));
                Vec::new()
            });
        }
        scalar!("seed", cfg.master_seed);
        scalar!("threshold_const", cfg.threshold_const);
        scalar!("value_bits", cfg.value_bits);
        if let Some((v, line)) = get("level_cap") {
            match v.parse() {
                Ok(x) => cfg.level_cap = Some(x),
                Err(_) => errors.push(format!("line {line}: level_cap = {v:?} is not valid")),
            }
        }
        if let Some((v, line)) = get("increment_rule") {
            match v.parse() {
                Ok(x) => cfg.increment_rule = x,
                Err(_) => errors.push(format!("line {line}: increment_rule = {v:?} is not ipw or literal")),
            }
        }
        scalar!("transcripts", cfg.transcripts);
        if let Some((v, _)) = get("out") {
            cfg.out = Some(v.into());
        }

        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError(errors))
        }
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = self.canonical_body();
        if let Some(dir) = &self.out {
            let _ = writeln!(out, "out = {}", dir.display());
        }
        out
    }

    // everything except the output location
    fn canonical_body(&self) -> String {
        let mut out = String::new();
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        match &self.instance {
            InstanceSpec::Range { n, s, horizon, a, b, gap } => {
                let _ = write!(out, "instance = range\nn = {n}\ns = {s}\nT = {horizon}\na = {a}\nb = {b}\ngap = {gap}\n");
            }
            InstanceSpec::Unit {
                n,
                s,
                horizon,
                sparsity,
                gap,
            } => {
                let _ = write!(out, "instance = unit\nn = {n}\ns = {s}\nT = {horizon}\ngap = {gap}\nsparsity = {sparsity}\n");
            }
            InstanceSpec::Trace { path } => {
                let _ = write!(out, "instance = trace\ntrace = {}\n", path.display());
            }
        }
        let variants: Vec<String> = self.variants.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "variants = {}", variants.join(", "));
        let _ = writeln!(out, "p = {}", join(&self.p_values));
        if !self.r_values.is_empty() {
            let _ = writeln!(out, "R = {}", join(&self.r_values));
        }
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(", "));
        let _ = writeln!(out, "seed = {}", self.master_seed);
        let _ = writeln!(out, "threshold_const = {}", self.threshold_const);
        let _ = writeln!(out, "value_bits = {}", self.value_bits);
        if let Some(cap) = self.level_cap {
            let _ = writeln!(out, "level_cap = {cap}");
        }
        let _ = writeln!(out, "increment_rule = {}", self.increment_rule);
        let _ = writeln!(out, "transcripts = {}", self.transcripts);
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical form, excluding
    /// the output directory.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_body().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Provenance comment carried as the first line of every output file.
    pub fn provenance(&self) -> String {
        format!("# seed={} config_hash={}\n", self.master_seed, self.hash())
    }

    pub fn regime(&self) -> Option<Regime> {
        match self.instance {
            InstanceSpec::Range { a, b, .. } => Regime::range(a, b).ok(),
            InstanceSpec::Unit { .. } => Some(Regime::Unit),
            InstanceSpec::Trace { .. } => None,
        }
    }
}

fn list<T: std::str::FromStr>(value: &str, line: usize, key: &str, errors: &mut Vec<String>) -> Vec<T> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        match item.parse() {
            Ok(x) => out.push(x),
            Err(_) => errors.push(format!("line {line}: {key} entry {item:?} is not valid")),
        }
    }
    out
}

fn parse_seeds(value: &str) -> Option<Vec<u64>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let (lo, hi): (u64, u64) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
        return (lo < hi).then(|| (lo..hi).collect());
    }
    value
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().ok())
        .collect()
}
