//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
//! here and never tuned per run. Exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use distexperts::estimator::{geo_constant, geo_second_moment, sample_exponential};
use distexperts::harness::{cmd_run, ExperimentConfig};
use distexperts::loss::{gen_range_instance, gen_unit_instance, lp_aggregate, regret, LossTensor, Regime};
use distexperts::netsim::ceil_log2;
use distexperts::protocol::{
    activity_and_level, run, run_single_round, Plan, ProtocolConfig, RunReport, Variant,
};
use distexperts::rng::{Domain, Stream};

// mpmath, 25 significant digits
const GAMMA_2_3_CUBED: f64 = 2.482_958_581_215_227_736_6;
const GAMMA_3_4_SQUARED: f64 = 1.501_646_094_680_629_715_7;
const GAMMA_3_4: f64 = 1.225_416_702_465_177_645_1;
const GAMMA_1_3_CUBED: f64 = 19.225_969_452_595_693_691;
const PI: f64 = std::f64::consts::PI;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    fn all(parts: Vec<Verdict>) -> Self {
        let pass = parts.iter().all(|v| v.pass);
        let detail = parts
            .iter()
            .map(|v| format!("{}{}", if v.pass { "" } else { "FAILED " }, v.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Self { pass, detail }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn budget(elapsed: Duration, limit_s: u64) -> Verdict {
    Verdict::new(
        elapsed.as_secs_f64() <= limit_s as f64,
        format!("runtime {:.1}s <= {limit_s}s", elapsed.as_secs_f64()),
    )
}

// -------------------------------------------------------------------------
// 1. Estimator constants

fn mc_z_mean(copies: u32, p: f64, draws: u64, seed: u64) -> f64 {
    let mut stream = Stream::new(seed, Domain::MonteCarlo, [1, u64::from(copies), p.to_bits(), 0]);
    let inv = 1.0 / (f64::from(copies) * p);
    let mut sum = 0.0;
    for _ in 0..draws {
        let mut z = 1.0;
        for _ in 0..copies {
            z *= sample_exponential(&mut stream).value().powf(-inv);
        }
        sum += z;
    }
    sum / draws as f64
}

// Z² has infinite variance for Bp < 4, so plain averaging does not settle
// at 10^7 draws. Gamma(1/2) proposals, drawn as Exp(1)·sin²(πU/2), with
// self-normalised weights e^{1/2} give a finite-variance estimate without
// any closed-form input.
fn mc_z_second_moment(copies: u32, p: f64, draws: u64, seed: u64) -> f64 {
    let mut stream = Stream::new(seed, Domain::MonteCarlo, [2, u64::from(copies), p.to_bits(), 0]);
    let k = 0.5 - 2.0 / (f64::from(copies) * p);
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..draws {
        let mut prod_target = 1.0;
        let mut prod_weight = 1.0;
        for _ in 0..copies {
            let arc = (PI / 2.0 * stream.next_open01()).sin();
            let e = sample_exponential(&mut stream).value() * arc * arc;
            prod_target *= e.powf(k);
            prod_weight *= e.sqrt();
        }
        num += prod_target;
        den += prod_weight;
    }
    num / den
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let cases = [
        (3u32, 1.0, GAMMA_2_3_CUBED, GAMMA_1_3_CUBED),
        (2, 2.0, GAMMA_3_4_SQUARED, PI),
        (1, 4.0, GAMMA_3_4, PI.sqrt()),
    ];
    let mut parts = Vec::new();
    for (b, p, c_exact, m2_exact) in cases {
        let c = geo_constant(b, p).unwrap();
        let m2 = geo_second_moment(b, p).unwrap();
        parts.push(Verdict::new(
            rel(c, c_exact) < 1e-10 && rel(m2, m2_exact) < 1e-10,
            format!("B={b},p={p}: closed forms match oracle"),
        ));
        let mean = mc_z_mean(b, p, 10_000_000, 7);
        parts.push(Verdict::new(
            rel(mean, c_exact) < 0.005,
            format!("E[Z] rel err {:.5} < 0.005", rel(mean, c_exact)),
        ));
        let second = mc_z_second_moment(b, p, 10_000_000, 7);
        let ceiling = 3f64.powi(b as i32);
        parts.push(Verdict::new(
            rel(second, m2_exact) < 0.02 && second <= ceiling,
            format!("E[Z^2] rel err {:.5} < 0.02, {second:.4} <= {ceiling}", rel(second, m2_exact)),
        ));
    }
    parts.push(budget(start.elapsed(), 30));
    Verdict::all(parts)
}

// -------------------------------------------------------------------------
// 2. Max-stability

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let trials = 1_000_000usize;
    let mut stream = Stream::new(11, Domain::MonteCarlo, [3, 0, 0, 0]);
    let mut xs: Vec<f64> = (0..trials)
        .map(|_| {
            let a = 3.0 / sample_exponential(&mut stream).value().sqrt();
            let b = 4.0 / sample_exponential(&mut stream).value().sqrt();
            a.max(b)
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = trials as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = (-25.0 / (x * x)).exp();
        sup = sup.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
    }
    Verdict::all(vec![
        Verdict::new(sup < 0.01, format!("sup |F_n - exp(-25/t^2)| = {sup:.5} < 0.01")),
        budget(start.elapsed(), 10),
    ])
}

// -------------------------------------------------------------------------
// 3. Middle probability

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let draws = 10_000_000u64;
    let mut parts = Vec::new();
    for x in [4.0f64, 8.0, 16.0] {
        let mut stream = Stream::new(13, Domain::MonteCarlo, [4, x.to_bits(), 0, 0]);
        let hits = (0..draws)
            .filter(|_| {
                let inv = 1.0 / sample_exponential(&mut stream).value();
                inv > x && inv <= 2.0 * x
            })
            .count();
        let pr = hits as f64 / draws as f64;
        let (lo, hi) = (1.0 / (4.0 * x), 1.0 / (2.0 * x));
        parts.push(Verdict::new(
            pr >= lo && pr <= hi,
            format!("x={x}: {pr:.5} in [{lo}, {hi}]"),
        ));
    }
    parts.push(budget(start.elapsed(), 30));
    Verdict::all(parts)
}

// -------------------------------------------------------------------------
// 4. Pipeline unbiasedness

fn naive_lp(values: &[f64], p: f64) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        acc += v.powf(p);
    }
    acc.powf(1.0 / p)
}

fn criterion_4() -> Verdict {
    let range = gen_range_instance(1, 4, 100, 1.0, 5.0, 0.0, 21).unwrap();
    let ones = LossTensor::constant(1, 4, 100, 1.0, Regime::Unit).unwrap();
    let cases = [
        (ProtocolConfig::new(Variant::Simple, 2.0), &range),
        (ProtocolConfig::new(Variant::Tradeoff, 2.0).with_regret(0.2), &range),
        (ProtocolConfig::new(Variant::Full, 2.0).with_regret(0.2), &ones),
    ];
    let trials = 1_000_000u64;
    let mut parts = Vec::new();
    for (cfg, tensor) in cases {
        let start = Instant::now();
        let plan = Plan::new(&cfg, tensor).unwrap();
        let target = naive_lp(&(0..4).map(|j| tensor.get(0, j, 0)).collect::<Vec<_>>(), 2.0);
        let mut sum = 0.0;
        for k in 0..trials {
            let out = run_single_round(&cfg, tensor, 0, k ^ 0x9e37_79b9_7f4a_7c15).unwrap();
            sum += out.increments[0];
        }
        let mean = sum / trials as f64 / plan.increment_scale();
        parts.push(Verdict::new(
            rel(mean, target) < 0.05,
            format!(
                "{} (rho_act={}): mean {mean:.4} vs L {target:.4}, rel {:.4} < 0.05",
                cfg.variant,
                plan.activity,
                rel(mean, target)
            ),
        ));
        parts.push(budget(start.elapsed(), 120));
    }
    Verdict::all(parts)
}

// -------------------------------------------------------------------------
// 5 and 6. Regret comparability and communication ceilings

const GAP_N: usize = 16;
const GAP_S: usize = 4;
const GAP_T: usize = 20_000;
const SEEDS: u64 = 20;

fn gap_instance(seed: u64) -> LossTensor {
    gen_range_instance(GAP_N, GAP_S, GAP_T, 1.0, 5.0, 0.5, 1000 + seed).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn criteria_5_and_6() -> (Verdict, Verdict) {
    let start = Instant::now();
    let mut base_regret = Vec::new();
    let mut simple_regret = Vec::new();
    let mut base_bits_exact = true;
    let mut simple_max_bits = 0u64;
    let mut simple_report_bits = 0u64;
    for seed in 0..SEEDS {
        let tensor = gap_instance(seed);
        let base = run(&ProtocolConfig::new(Variant::Baseline, 2.0), &tensor, seed).unwrap();
        let simple = run(&ProtocolConfig::new(Variant::Simple, 2.0), &tensor, seed).unwrap();
        base_regret.push(base.regret);
        simple_regret.push(simple.regret);
        let n_bits = u64::from(ceil_log2(GAP_N as u64));
        base_bits_exact &= base.total_bits == (GAP_T as u64) * (2 * GAP_S as u64 + GAP_N as u64 * (n_bits + 32));
        simple_max_bits = simple_max_bits.max(simple.total_bits);
        simple_report_bits = n_bits + u64::from(ceil_log2(u64::from(simple.plan.estimator.copies))) + 32;
    }
    let elapsed = start.elapsed();

    let bound = 3.0 * (GAP_S as f64).sqrt() * ((GAP_N as f64).ln() / GAP_T as f64).sqrt();
    let (b, s) = (mean(&base_regret), mean(&simple_regret));
    let c5 = Verdict::all(vec![
        Verdict::new(b <= bound, format!("BASELINE mean regret {b:.5} <= {bound:.5}")),
        Verdict::new(s <= 3.0 * b, format!("SIMPLE mean regret {s:.5} <= 3 x {b:.5}")),
        budget(elapsed, 300),
    ]);

    let (n, st, t) = (GAP_N as f64, GAP_S as f64, GAP_T as f64);
    let w = simple_report_bits as f64;
    let ceiling = 4.0 * (2.0 * st * t + n * t * (n * st * t).ln().powi(3) * w);
    let c6 = Verdict::all(vec![
        Verdict::new(
            (simple_max_bits as f64) <= ceiling,
            format!("SIMPLE max bits {simple_max_bits} <= {ceiling:.3e}"),
        ),
        Verdict::new(base_bits_exact, "BASELINE bits = T(2s + n(ceil(log2 n) + 32)) on every seed"),
    ]);
    (c5, c6)
}

// -------------------------------------------------------------------------
// 7 and 8. Tradeoff scaling law, activity and level laws

fn criteria_7_and_8() -> (Verdict, Verdict) {
    let start = Instant::now();
    let rs = [0.05, 0.1, 0.2];
    let mut mean_bits = Vec::new();
    let mut activity_parts = Vec::new();
    for r in rs {
        let mut bits = Vec::new();
        let mut active = 0u64;
        let mut activity = 0.0;
        for seed in 0..SEEDS {
            let tensor = gap_instance(seed);
            let report = run(&ProtocolConfig::new(Variant::Tradeoff, 2.0).with_regret(r), &tensor, seed).unwrap();
            bits.push(report.total_bits as f64);
            active += report.active_rounds;
            activity = report.plan.activity;
        }
        mean_bits.push(mean(&bits));
        let trials = (SEEDS as usize * GAP_T) as f64;
        let expected = activity * trials;
        let sd = (trials * activity * (1.0 - activity)).sqrt();
        activity_parts.push(Verdict::new(
            (active as f64 - expected).abs() <= 3.0 * sd,
            format!("TRADEOFF R={r}: {active} active vs {expected:.0} +- 3x{sd:.1}"),
        ));
    }
    let elapsed7 = start.elapsed();
    let mut parts7 = Vec::new();
    for k in 0..2 {
        let ratio = mean_bits[k] / mean_bits[k + 1];
        parts7.push(Verdict::new(
            (4.0 / 1.3..=4.0 * 1.3).contains(&ratio),
            format!("bits(R={})/bits(R={}) = {ratio:.3} in [3.077, 5.2]", rs[k], rs[k + 1]),
        ));
    }
    parts7.push(budget(elapsed7, 600));

    let start8 = Instant::now();
    let cfg = ProtocolConfig::new(Variant::Full, 2.0).with_regret(0.002);
    let plan = Plan::for_shape(&cfg, 16, 4, 1_000_000, Regime::Unit).unwrap();
    let (mut active, mut one, mut two, mut t) = (0u64, 0u64, 0u64, 0usize);
    while active < 100_000 {
        let draw = activity_and_level(&plan, 99, t);
        if draw.active {
            active += 1;
            one += u64::from(draw.level == 1);
            two += u64::from(draw.level == 2);
        }
        t += 1;
    }
    let ratio = one as f64 / two as f64;
    activity_parts.push(Verdict::new(
        (ratio - 2.0).abs() <= 0.2,
        format!("FULL Pr[a=1]/Pr[a=2] = {ratio:.4} (2 +- 10%) over {active} active rounds"),
    ));
    activity_parts.push(budget(start8.elapsed(), 120));
    (Verdict::all(parts7), Verdict::all(activity_parts))
}

// -------------------------------------------------------------------------
// 9. Information barrier and determinism

/// `(t, i, j)` triples some copy reported, read from the transcript dump.
fn reported_cells(report: &RunReport) -> HashSet<(usize, usize, usize)> {
    let mut cells = HashSet::new();
    for line in report.transcript.as_deref().unwrap().lines() {
        let f: Vec<&str> = line.split(' ').collect();
        if f[1] == "VALUE_REPORT" {
            let j: usize = f[2].trim_start_matches('S').parse().unwrap();
            cells.insert((f[0].parse().unwrap(), f[4].parse().unwrap(), j));
        }
    }
    cells
}

fn barrier_case(cfg: &ProtocolConfig, tensor: &LossTensor, seed: u64) -> (bool, usize) {
    let mut cfg = cfg.clone();
    cfg.keep_transcripts = true;
    let before = run(&cfg, tensor, seed).unwrap();
    let reported = reported_cells(&before);
    let (lo, _) = match tensor.regime() {
        Regime::Range { a, b } => (a, b),
        Regime::Unit => (0.0, 1.0),
    };
    let mut mutated = tensor.clone();
    let mut stream = Stream::new(5, Domain::MonteCarlo, [9, 0, 0, 0]);
    let mut changed = 0;
    for t in 0..tensor.horizon() {
        for i in 0..tensor.experts() {
            for j in 0..tensor.servers() {
                if reported.contains(&(t, i, j)) {
                    continue;
                }
                // shrinking toward the regime floor keeps an entry below its
                // threshold; inactive rounds could take any value
                let old = tensor.get(i, j, t);
                let new = if before.view.active[t] {
                    lo + (old - lo) * stream.next_open01()
                } else {
                    let (a, b) = match tensor.regime() {
                        Regime::Range { a, b } => (a, b),
                        Regime::Unit => (0.0, 1.0),
                    };
                    stream.next_range(a, b)
                };
                if new != old {
                    mutated.set(i, j, t, new).unwrap();
                    changed += 1;
                }
            }
        }
    }
    let after = run(&cfg, &mutated, seed).unwrap();
    (before.view == after.view && before.transcript == after.transcript, changed)
}

fn dir_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();

    let range = gen_range_instance(6, 3, 400, 1.0, 5.0, 0.3, 77).unwrap();
    let dense = gen_unit_instance(6, 3, 400, 1.0, 0.3, 78).unwrap();
    let sparse = gen_unit_instance(6, 3, 400, 0.3, 0.3, 79).unwrap();
    let mut tight = ProtocolConfig::new(Variant::Full, 2.0).with_regret(0.1);
    tight.threshold_const = 1.0;
    let mut tight_simple = ProtocolConfig::new(Variant::Simple, 2.0);
    tight_simple.threshold_const = 0.02;
    let cases = [
        ("tradeoff", ProtocolConfig::new(Variant::Tradeoff, 2.0).with_regret(0.1), &range),
        ("simple c=0.02", tight_simple, &range),
        ("full", ProtocolConfig::new(Variant::Full, 3.0).with_regret(0.1), &sparse),
        ("full c=1", tight, &dense),
    ];
    for (name, cfg, tensor) in cases {
        let (same, changed) = barrier_case(&cfg, tensor, 3);
        parts.push(Verdict::new(
            same && changed > 0,
            format!("{name}: {changed} unreported entries mutated, outputs identical"),
        ));
    }

    let text = "n = 5\ns = 3\nT = 300\ngap = 0.4\nvariants = baseline, simple, tradeoff\np = 1.5, 2\nR = 0.2\nseeds = 0..3\nseed = 17\ntranscripts = true\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = cfg.clone();
    ca.out = Some(a.path().to_path_buf());
    let mut cb = cfg;
    cb.out = Some(b.path().to_path_buf());
    cmd_run(&ca, 1).unwrap();
    cmd_run(&cb, 3).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    parts.push(Verdict::new(
        fa == fb && fa.len() == 1 + 2 * 18,
        format!("rerun (jobs 1 vs 3): {} files byte-identical", fa.len()),
    ));
    parts.push(budget(start.elapsed(), 60));
    Verdict::all(parts)
}

// -------------------------------------------------------------------------
// 10. Brute-force equivalence

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Reference report decision in log space, or `None` on a knife edge.
fn reference_predicate(cfg: &ProtocolConfig, nst: f64, s: f64, loss: f64, e: f64, level: u32, copies: u32) -> Option<bool> {
    if loss <= 0.0 {
        return Some(false);
    }
    let p = cfg.p;
    let ln_c = match cfg.variant {
        Variant::Full => 0.0,
        _ => f64::from(copies) * statrs::function::gamma::ln_gamma(1.0 - 1.0 / (f64::from(copies) * p)),
    };
    let lhs = loss.ln() - ln_c - e.ln() / p;
    let level_term = if cfg.variant == Variant::Full {
        f64::from(level) / p * 2f64.ln()
    } else {
        0.0
    };
    let rhs = s.ln() / p - cfg.threshold_const.ln() - level_term - nst.ln().ln();
    if (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0) {
        None
    } else {
        Some(lhs > rhs)
    }
}

fn criterion_10() -> Verdict {
    let start = Instant::now();
    let mut agg_ok = true;
    let mut regret_ok = true;
    let (mut decisions, mut mismatches, mut edges, mut positives) = (0u64, 0u64, 0u64, 0u64);
    let mut shape_seed = 0u64;
    for n in 1..=4usize {
        for s in 1..=4usize {
            for horizon in 1..=4usize {
                shape_seed += 1;
                let range = gen_range_instance(n, s, horizon, 0.5, 3.0, 0.2, shape_seed).unwrap();
                let unit = gen_unit_instance(n, s, horizon, 0.6, 0.2, shape_seed).unwrap();
                for (tensor, p) in [(&range, 1.0), (&range, 2.5), (&unit, 2.0), (&unit, 4.0)] {
                    let agg = lp_aggregate(tensor, p);
                    let mut totals = vec![0.0; n];
                    for i in 0..n {
                        for t in 0..horizon {
                            let mut acc = 0.0;
                            for j in 0..s {
                                acc += tensor.get(i, j, t).powf(p);
                            }
                            let want = acc.powf(1.0 / p);
                            agg_ok &= close(agg.get(i, t), want);
                            totals[i] += want;
                        }
                    }
                    let mut stream = Stream::new(shape_seed, Domain::MonteCarlo, [10, 0, 0, 0]);
                    let choices: Vec<usize> = (0..horizon).map(|_| (stream.next_u64() % n as u64) as usize).collect();
                    let mut alg = 0.0;
                    for (t, &i) in choices.iter().enumerate() {
                        let mut acc = 0.0;
                        for j in 0..s {
                            acc += tensor.get(i, j, t).powf(p);
                        }
                        alg += acc.powf(1.0 / p);
                    }
                    let best = totals.iter().copied().fold(f64::INFINITY, f64::min);
                    regret_ok &= close(regret(&choices, &agg), (alg - best) / horizon as f64);
                }

                let nst = (n * s * horizon) as f64;
                for c in [100.0, 1.0, 0.1] {
                    let mut configs = vec![
                        (ProtocolConfig::new(Variant::Simple, 2.0), &range),
                        (ProtocolConfig::new(Variant::Tradeoff, 1.0).with_regret(1.0), &range),
                        (ProtocolConfig::new(Variant::Full, 2.0).with_regret(0.5), &unit),
                        (ProtocolConfig::new(Variant::Full, 3.0).with_regret(1.0), &unit),
                    ];
                    for (cfg, tensor) in configs.iter_mut() {
                        cfg.threshold_const = c;
                        cfg.keep_transcripts = true;
                        let seed = shape_seed * 31 + c.to_bits() % 1000;
                        let Ok(report) = run(cfg, tensor, seed) else { continue };
                        let reported = reported_copies(&report);
                        let copies = report.plan.estimator.copies;
                        for t in 0..horizon {
                            // public coin, recomputed from the raw stream
                            let mut public = Stream::new(seed, Domain::Public, [t as u64, 0, 0, 0]);
                            let active = public.next_open01() < report.plan.activity;
                            let level = if active && cfg.variant == Variant::Full {
                                let u = public.next_open01();
                                let mut a = 1u32;
                                let mut edge = 0.5;
                                while u <= edge && a < report.plan.levels {
                                    a += 1;
                                    edge /= 2.0;
                                }
                                a
                            } else {
                                0
                            };
                            if active != report.view.active[t] || level != report.view.levels[t] {
                                mismatches += 1;
                            }
                            if !active {
                                continue;
                            }
                            for i in 0..n {
                                for j in 0..s {
                                    for b in 0..copies {
                                        let mut private = Stream::new(
                                            seed,
                                            Domain::Server,
                                            [t as u64, i as u64, j as u64, u64::from(b)],
                                        );
                                        let e = -private.next_open01().ln();
                                        let want = reference_predicate(cfg, nst, s as f64, tensor.get(i, j, t), e, level, copies);
                                        let got = reported.contains(&(t, i, j, b));
                                        match want {
                                            None => edges += 1,
                                            Some(w) => {
                                                decisions += 1;
                                                positives += u64::from(w);
                                                mismatches += u64::from(w != got);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Verdict::all(vec![
        Verdict::new(agg_ok, "lp_aggregate matches double loop to 1e-12"),
        Verdict::new(regret_ok, "regret matches double loop to 1e-12"),
        Verdict::new(
            mismatches == 0 && positives > 0 && positives < decisions,
            format!("threshold predicate: {decisions} decisions ({positives} report), {mismatches} mismatches, {edges} knife-edge skipped"),
        ),
        budget(start.elapsed(), 10),
    ])
}

fn reported_copies(report: &RunReport) -> HashSet<(usize, usize, usize, u32)> {
    let mut cells = HashSet::new();
    for line in report.transcript.as_deref().unwrap().lines() {
        let f: Vec<&str> = line.split(' ').collect();
        if f[1] == "VALUE_REPORT" {
            let j: usize = f[2].trim_start_matches('S').parse().unwrap();
            cells.insert((f[0].parse().unwrap(), f[4].parse().unwrap(), j, f[5].parse().unwrap()));
        }
    }
    cells
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut report = |k: u32, name: &'static str, v: Verdict| {
        println!(
            "criterion {k:>2} [{}] {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((k, name, v));
    };
    report(1, "estimator constants", criterion_1());
    report(2, "max-stability", criterion_2());
    report(3, "middle probability", criterion_3());
    report(4, "pipeline unbiasedness", criterion_4());
    let (c5, c6) = criteria_5_and_6();
    report(5, "regret comparability", c5);
    report(6, "communication ceilings", c6);
    let (c7, c8) = criteria_7_and_8();
    report(7, "tradeoff scaling law", c7);
    report(8, "activity and level laws", c8);
    report(9, "information barrier and determinism", criterion_9());
    report(10, "brute-force equivalence", criterion_10());

    let failed: Vec<u32> = results.iter().filter(|(_, _, v)| !v.pass).map(|(k, _, _)| *k).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
