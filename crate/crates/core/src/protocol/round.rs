//! One round of play, split by role: public draws, server-side reporting
//! and coordinator-side estimation.

use crate::estimator::{geometric_mean, sample_exponential, scaled_loss, ExpSample};
use crate::loss::{lp_norm, LossTensor};
use crate::netsim::{CostModel, Network, Outgoing, Quantizer, Received};
use crate::rng::{Domain, Stream};

use super::{Plan, ProtocolError, Variant};

/// Outcome of the public coin for one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundDraw {
    pub active: bool,
    /// Reporting level `a ∈ 1..=A` for `Full`; 0 otherwise or when inactive.
    pub level: u32,
}

/// Public randomness for round `t`, shared by the coordinator and every
/// server. Activity uses the first uniform and the level the second, so
/// `Tradeoff` and `Full` with equal `ϱ` activate the same rounds.
pub fn activity_and_level(plan: &Plan, seed: u64, t: usize) -> RoundDraw {
    let mut stream = Stream::new(seed, Domain::Public, [t as u64, 0, 0, 0]);
    let active = stream.next_open01() < plan.activity;
    let level = if active && plan.variant == Variant::Full {
        // Pr[a = k] = 2^{−k}; the tail beyond A collapses onto A
        let u = stream.next_open01();
        (1 + (-u.log2()).floor() as u32).min(plan.levels)
    } else {
        0
    };
    RoundDraw { active, level }
}

/// Server `j`'s private exponential for expert `i`, copy `b` at time `t`.
pub fn server_draw(seed: u64, t: usize, expert: usize, server: usize, copy: u32) -> ExpSample {
    let mut stream = Stream::new(
        seed,
        Domain::Server,
        [t as u64, expert as u64, server as u64, u64::from(copy)],
    );
    sample_exponential(&mut stream)
}

/// `τ = s^{1/p} / (c · ln(nsT))`.
pub fn simple_threshold(plan: &Plan) -> f64 {
    plan.threshold
}

/// `τ_a = s^{1/p} / (c · 2^{a/p} · ln(nsT))`.
pub fn full_threshold(plan: &Plan, level: u32) -> f64 {
    plan.threshold * 2f64.powf(-f64::from(level) / plan.estimator.p)
}

/// The value a server sends for one `(i, j, t, b)`, or `None` if it stays
/// silent. `Simple`/`Tradeoff` divide by `C` here; `Full` sends the raw
/// scaled loss.
pub fn server_reports(plan: &Plan, loss: f64, e: ExpSample, level: u32) -> Option<f64> {
    let p = plan.estimator.p;
    let (q, tau) = match plan.variant {
        Variant::Baseline => return None,
        Variant::Simple | Variant::Tradeoff => (
            scaled_loss(loss, e.value(), p, plan.estimator.norm).ok()?,
            simple_threshold(plan),
        ),
        Variant::Full => (scaled_loss(loss, e.value(), p, 1.0).ok()?, full_threshold(plan, level)),
    };
    (q > 0.0 && q >= tau).then_some(q)
}

pub(crate) fn server_payload(
    plan: &Plan,
    tensor: &LossTensor,
    seed: u64,
    t: usize,
    server: usize,
    level: u32,
) -> Vec<Outgoing> {
    if plan.variant == Variant::Baseline {
        if server != 0 {
            return Vec::new();
        }
        return (0..plan.n)
            .map(|i| Outgoing {
                expert: i,
                copy: 0,
                value: lp_norm(tensor.row(i, t), plan.estimator.p),
            })
            .collect();
    }
    let mut out = Vec::new();
    for i in 0..plan.n {
        let loss = tensor.get(i, server, t);
        for b in 0..plan.estimator.copies {
            let e = server_draw(seed, t, i, server, b);
            if let Some(value) = server_reports(plan, loss, e, level) {
                out.push(Outgoing { expert: i, copy: b, value });
            }
        }
    }
    out
}

/// Smallest integer `k ≥ 0` with `ŝ ≥ (s / 2^k)^{1/p}`; `ŝ > 0`.
pub fn compute_a_star(s_hat: f64, s: usize, p: f64) -> u32 {
    const CAP: f64 = 4096.0;
    let holds = |k: f64| s_hat >= (s as f64 * 2f64.powf(-k)).powf(1.0 / p);
    let mut k = ((s as f64).log2() - p * s_hat.log2()).ceil().clamp(0.0, CAP);
    while k > 0.0 && holds(k - 1.0) {
        k -= 1.0;
    }
    while k < CAP && !holds(k) {
        k += 1.0;
    }
    k as u32
}

pub(crate) struct Estimates {
    pub increments: Vec<f64>,
    /// Experts for which some copy had no report.
    pub missing: usize,
}

/// Coordinator side: a function of the decoded reports and the public draw
/// only.
pub(crate) fn estimate(plan: &Plan, received: &[Received], draw: RoundDraw) -> Estimates {
    let n = plan.n;
    let mut increments = vec![0.0; n];
    if !draw.active {
        return Estimates { increments, missing: 0 };
    }
    if plan.variant == Variant::Baseline {
        for r in received {
            increments[r.expert] = r.value;
        }
        return Estimates { increments, missing: 0 };
    }

    let copies = plan.estimator.copies as usize;
    let mut maxima = vec![0.0f64; n * copies];
    for r in received {
        let slot = &mut maxima[r.expert * copies + r.copy as usize];
        *slot = slot.max(r.value);
    }
    let mut missing = 0;
    for (i, inc) in increments.iter_mut().enumerate() {
        let Some(g) = geometric_mean(&maxima[i * copies..(i + 1) * copies]) else {
            missing += 1;
            continue;
        };
        *inc = match plan.variant {
            Variant::Simple | Variant::Tradeoff => g / plan.activity,
            Variant::Full => {
                let s_hat = g / plan.estimator.norm;
                let a_star = compute_a_star(s_hat, plan.s, plan.estimator.p);
                if a_star <= draw.level && a_star <= plan.levels {
                    s_hat * plan.full_scale(a_star)
                } else {
                    0.0
                }
            }
            Variant::Baseline => unreachable!(),
        };
    }
    Estimates { increments, missing }
}

/// Single round in isolation, for Monte Carlo checks of the estimate
/// pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub draw: RoundDraw,
    pub increments: Vec<f64>,
    pub missing: usize,
    pub reports: u64,
    pub bits: u64,
}

pub(crate) fn new_network(plan: &Plan, config_bits: u32, log_range: (f64, f64), keep: bool) -> Result<Network, ProtocolError> {
    let copies = if plan.variant == Variant::Baseline {
        1
    } else {
        plan.estimator.copies
    };
    let cost = CostModel::new(plan.n, copies, config_bits);
    let quantizer = Quantizer::new(config_bits, log_range.0, log_range.1)?;
    Ok(Network::new(plan.s, cost, quantizer, keep))
}

pub(crate) fn play_round(plan: &Plan, tensor: &LossTensor, network: &mut Network, seed: u64, t: usize) -> RoundOutcome {
    let draw = activity_and_level(plan, seed, t);
    let transcript = network.run_round(t, draw.active, |j| server_payload(plan, tensor, seed, t, j, draw.level));
    let received = network.receive(&transcript);
    let est = estimate(plan, &received, draw);
    RoundOutcome {
        draw,
        increments: est.increments,
        missing: est.missing,
        reports: received.len() as u64,
        bits: transcript.bits(),
    }
}

/// Play round `t` of `config` on `tensor` with protocol seed `seed`.
pub fn run_single_round(
    config: &super::ProtocolConfig,
    tensor: &LossTensor,
    t: usize,
    seed: u64,
) -> Result<RoundOutcome, ProtocolError> {
    let plan = Plan::new(config, tensor)?;
    let mut network = new_network(&plan, config.value_bits, config.log_range, false)?;
    Ok(play_round(&plan, tensor, &mut network, seed, t))
}
