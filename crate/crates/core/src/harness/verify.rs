//! Statistical self-checks run by `verify <suite>`.
//!
//! Monte Carlo work is split into fixed-size chunks, each with its own
//! stream, and chunk sums are combined in chunk order, so results do not
//! depend on the number of threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::estimator::{geo_constant, geo_second_moment, sample_exponential};
use crate::loss::{gen_range_instance, lp_norm, LossTensor, Regime};
use crate::protocol::{run_single_round, Plan, ProtocolConfig, Variant};
use crate::rng::{derive_seed, Domain, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Constants,
    MaxStability,
    Moments,
    Middle,
    Pipeline,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Constants,
        Suite::MaxStability,
        Suite::Moments,
        Suite::Middle,
        Suite::Pipeline,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Constants => "constants",
            Suite::MaxStability => "maxstability",
            Suite::Moments => "moments",
            Suite::Middle => "middle",
            Suite::Pipeline => "pipeline",
        })
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown suite {s:?}; expected one of constants, maxstability, moments, middle, pipeline"))
    }
}

/// One verdict: the measured statistic against its acceptance bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub bound: String,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<44} statistic={:<14.8} bound={:<28} {}",
            self.name,
            self.statistic,
            self.bound,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

const CHUNK: u64 = 1 << 16;

/// Sum `width` statistics over `draws` trials. `trial` fills its slots for
/// one trial from the stream it is given.
pub fn mc_sums<F>(draws: u64, seed: u64, tag: u64, width: usize, trial: F) -> Vec<f64>
where
    F: Fn(&mut Stream, &mut [f64]) + Sync,
{
    let chunks = draws.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = Stream::new(seed, Domain::MonteCarlo, [tag, c, 0, 0]);
            let mut acc = vec![0.0; width];
            let mut slots = vec![0.0; width];
            let len = CHUNK.min(draws - c * CHUNK);
            for _ in 0..len {
                slots.iter_mut().for_each(|x| *x = 0.0);
                trial(&mut stream, &mut slots);
                acc.iter_mut().zip(&slots).for_each(|(a, s)| *a += s);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for part in partial {
        total.iter_mut().zip(&part).for_each(|(t, p)| *t += p);
    }
    total
}

/// Monte Carlo `(E[Z], E[Z²])` for `Z = ∏_b e_b^{−1/(Bp)}`.
pub fn geo_moments_mc(copies: u32, p: f64, draws: u64, seed: u64) -> (f64, f64) {
    let tag = (u64::from(copies) << 32) ^ p.to_bits().rotate_left(7);
    let sums = mc_sums(draws, seed, tag, 2, |stream, out| {
        let log_sum: f64 = (0..copies).map(|_| sample_exponential(stream).value().ln()).sum();
        let z = (-log_sum / (f64::from(copies) * p)).exp();
        out[0] = z;
        out[1] = z * z;
    });
    (sums[0] / draws as f64, sums[1] / draws as f64)
}

/// `E[Z²]` by self-normalised importance sampling. Plain Monte Carlo of
/// `Z²` has infinite variance when `Bp < 4` (tail index `Bp/2`), so each
/// `e_b` is instead drawn from Gamma(1/2) as `Exp(1)·sin²(πU/2)` and
/// reweighted by `e_b^{1/2}`; the weight normaliser is estimated from the
/// same draws. Finite variance whenever `Bp > 8/3`.
pub fn geo_second_moment_is(copies: u32, p: f64, draws: u64, seed: u64) -> f64 {
    let tag = (u64::from(copies) << 40) ^ p.to_bits().rotate_left(13) ^ 0x15;
    let exponent = 0.5 - 2.0 / (f64::from(copies) * p);
    let sums = mc_sums(draws, seed, tag, 2, |stream, out| {
        let mut log_e = 0.0;
        for _ in 0..copies {
            let arc = (std::f64::consts::FRAC_PI_2 * stream.next_open01()).sin();
            log_e += (sample_exponential(stream).value() * arc * arc).ln();
        }
        out[0] = (exponent * log_e).exp();
        out[1] = (0.5 * log_e).exp();
    });
    sums[0] / sums[1]
}

/// Kolmogorov distance between `max_j f_j / e_j^{1/p}` and the closed form
/// `exp(−‖f‖_p^p / t^p)`.
pub fn max_stability_distance(f: &[f64], p: f64, trials: u64, seed: u64) -> f64 {
    let chunks = trials.div_ceil(CHUNK);
    let mut samples: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut stream = Stream::new(seed, Domain::MonteCarlo, [0x3a5, c, 0, 0]);
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len)
                .map(|_| {
                    f.iter()
                        .map(|&fj| fj / sample_exponential(&mut stream).value().powf(1.0 / p))
                        .fold(0.0, f64::max)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let norm_p = lp_norm(f, p).powf(p);
    let k = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = (-norm_p / x.powf(p)).exp();
            (cdf - i as f64 / k).abs().max(((i + 1) as f64 / k - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// Monte Carlo `Pr[1/e ∈ (x, 2x]]`.
pub fn middle_probability(x: f64, draws: u64, seed: u64) -> f64 {
    let sums = mc_sums(draws, seed, x.to_bits(), 1, |stream, out| {
        let inv = 1.0 / sample_exponential(stream).value();
        out[0] = f64::from(u8::from(inv > x && inv <= 2.0 * x));
    });
    sums[0] / draws as f64
}

/// One pipeline target: a single-expert instance and the variant to test.
pub struct PipelineCase {
    pub config: ProtocolConfig,
    pub tensor: LossTensor,
    /// True `L(t)` at round 0.
    pub target: f64,
    pub rho: f64,
}

/// The single-expert instances used for the unbiasedness checks:
/// `Simple` and `Tradeoff` (`ϱ = 1/4`) on RANGE(1,5), `Full` (`ϱ = 1/4`)
/// on all-ones UNIT losses, all with `s = 4`, `T = 100`, `p = 2`.
pub fn pipeline_cases(seed: u64) -> Vec<PipelineCase> {
    let range = gen_range_instance(1, 4, 100, 1.0, 5.0, 0.0, seed).expect("valid generator parameters");
    let ones = LossTensor::constant(1, 4, 100, 1.0, Regime::Unit).expect("valid constant tensor");
    let configs = [
        (ProtocolConfig::new(Variant::Simple, 2.0), range.clone()),
        (ProtocolConfig::new(Variant::Tradeoff, 2.0).with_regret(0.2), range),
        (ProtocolConfig::new(Variant::Full, 2.0).with_regret(0.2), ones),
    ];
    configs
        .into_iter()
        .map(|(config, tensor)| {
            let plan = Plan::new(&config, &tensor).expect("valid pipeline configuration");
            PipelineCase {
                target: lp_norm(tensor.row(0, 0), 2.0),
                rho: plan.rho,
                config,
                tensor,
            }
        })
        .collect()
}

/// `(E[X], E[X²])` of the applied round-0 increment over `trials` protocol
/// seeds.
pub fn pipeline_moments(case: &PipelineCase, trials: u64, seed: u64) -> (f64, f64) {
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(trials - c * CHUNK);
            let mut acc = (0.0, 0.0);
            for k in 0..len {
                let trial_seed = derive_seed(seed, "pipeline", c * CHUNK + k);
                let out = run_single_round(&case.config, &case.tensor, 0, trial_seed).expect("validated case");
                let x = out.increments[0];
                acc.0 += x;
                acc.1 += x * x;
            }
            acc
        })
        .collect();
    let (s1, s2) = partial.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (s1 / trials as f64, s2 / trials as f64)
}

fn relative(name: String, got: f64, want: f64, tol: f64) -> Check {
    let rel = ((got - want) / want).abs();
    Check {
        name,
        statistic: rel,
        bound: format!("< {tol} (want {want:.6})"),
        pass: rel < tol,
    }
}

pub const GEO_CASES: [(u32, f64); 3] = [(3, 1.0), (2, 2.0), (1, 4.0)];

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Constants => GEO_CASES
            .iter()
            .map(|&(b, p)| {
                let (mean, _) = geo_moments_mc(b, p, 10_000_000, seed);
                relative(format!("E[Z] B={b} p={p}"), mean, geo_constant(b, p).expect("valid case"), 0.005)
            })
            .collect(),
        Suite::Moments => GEO_CASES
            .iter()
            .flat_map(|&(b, p)| {
                let second = geo_second_moment_is(b, p, 10_000_000, seed);
                let exact = geo_second_moment(b, p).expect("valid case");
                let ceiling = 3f64.powi(b as i32);
                [
                    relative(format!("E[Z^2] B={b} p={p}"), second, exact, 0.02),
                    Check {
                        name: format!("E[Z^2] <= 3^B B={b} p={p}"),
                        statistic: second,
                        bound: format!("<= {ceiling}"),
                        pass: second <= ceiling,
                    },
                ]
            })
            .collect(),
        Suite::MaxStability => {
            let d = max_stability_distance(&[3.0, 4.0], 2.0, 1_000_000, seed);
            vec![Check {
                name: "sup |F_n - exp(-25/t^2)| f=(3,4) p=2".into(),
                statistic: d,
                bound: "< 0.01".into(),
                pass: d < 0.01,
            }]
        }
        Suite::Middle => [4.0, 8.0, 16.0]
            .iter()
            .map(|&x| {
                let pr = middle_probability(x, 10_000_000, seed);
                let (lo, hi) = (1.0 / (4.0 * x), 1.0 / (2.0 * x));
                Check {
                    name: format!("Pr[1/e in (x,2x]] x={x}"),
                    statistic: pr,
                    bound: format!("[{lo}, {hi}]"),
                    pass: pr >= lo && pr <= hi,
                }
            })
            .collect(),
        Suite::Pipeline => pipeline_cases(seed)
            .iter()
            .flat_map(|case| {
                let (mean, second) = pipeline_moments(case, 1_000_000, seed);
                let variant = case.config.variant;
                [
                    relative(format!("{variant}: E[increment] vs L"), mean, case.target, 0.05),
                    Check {
                        name: format!("{variant}: E[increment^2] <= 1.1 rho"),
                        statistic: second,
                        bound: format!("<= {:.4}", 1.1 * case.rho),
                        pass: second <= 1.1 * case.rho,
                    },
                ]
            })
            .collect(),
    }
}
