use std::fmt::Write as _;

use crate::loss::{lp_aggregate, LossTensor};
use crate::mwu::WeightState;
use crate::netsim::MessageKind;
use crate::rng::{Domain, Stream};

use super::round::{new_network, play_round};
use super::{Plan, ProtocolConfig, ProtocolError, Variant};

/// Everything the coordinator produced. It must depend only on reports and
/// public randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinatorView {
    pub choices: Vec<usize>,
    pub active: Vec<bool>,
    pub levels: Vec<u32>,
    /// Applied weight increments, `t·n + i`.
    pub increments: Vec<f64>,
    /// Bits exchanged up to and including each round.
    pub cum_bits: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub variant: Variant,
    pub p: f64,
    pub target_regret: Option<f64>,
    pub seed: u64,
    pub plan: Plan,
    pub view: CoordinatorView,
    /// `L_{i_t}(t)` for the chosen expert.
    pub true_losses: Vec<f64>,
    /// Running regret `(alg − best) / t` over the first `t` rounds.
    pub cum_regret: Vec<f64>,
    pub alg_loss: f64,
    pub best_loss: f64,
    pub best_expert: usize,
    pub regret: f64,
    pub total_bits: u64,
    pub reports: u64,
    /// `(expert, round)` pairs on active rounds without a usable estimate.
    pub missing_estimates: u64,
    pub active_rounds: u64,
    /// Message log, if transcripts were kept.
    pub transcript: Option<String>,
}

impl RunReport {
    pub fn horizon(&self) -> usize {
        self.view.choices.len()
    }

    pub fn increment(&self, t: usize, expert: usize) -> f64 {
        self.view.increments[t * self.plan.n + expert]
    }

    /// `time,choice,true_loss,estimate,cum_bits,cum_regret`; `estimate` is
    /// the increment applied to the chosen expert.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,choice,true_loss,estimate,cum_bits,cum_regret\n");
        for t in 0..self.horizon() {
            let choice = self.view.choices[t];
            let _ = writeln!(
                out,
                "{t},{choice},{},{},{},{}",
                self.true_losses[t],
                self.increment(t, choice),
                self.view.cum_bits[t],
                self.cum_regret[t]
            );
        }
        out
    }
}

/// Run the configured protocol on `tensor`. `seed` keys public, server and
/// coordinator randomness.
pub fn run(config: &ProtocolConfig, tensor: &LossTensor, seed: u64) -> Result<RunReport, ProtocolError> {
    let plan = Plan::new(config, tensor)?;
    let (n, horizon) = (plan.n, plan.horizon);
    let mut network = new_network(&plan, config.value_bits, config.log_range, config.keep_transcripts)?;
    let mut weights = WeightState::new(n, plan.eta);
    let agg = lp_aggregate(tensor, plan.estimator.p);

    let mut view = CoordinatorView {
        choices: Vec::with_capacity(horizon),
        active: Vec::with_capacity(horizon),
        levels: Vec::with_capacity(horizon),
        increments: Vec::with_capacity(n * horizon),
        cum_bits: Vec::with_capacity(horizon),
    };
    let mut true_losses = Vec::with_capacity(horizon);
    let mut cum_regret = Vec::with_capacity(horizon);
    let mut prefix = vec![0.0; n];
    let (mut alg, mut total_bits, mut reports, mut missing, mut active_rounds) = (0.0, 0u64, 0u64, 0u64, 0u64);

    for t in 0..horizon {
        // sample from the weights of rounds before t, then learn round t
        let mut coin = Stream::new(seed, Domain::Coordinator, [t as u64, 0, 0, 0]);
        let choice = weights.sample(&mut coin);
        let outcome = play_round(&plan, tensor, &mut network, seed, t);
        if outcome.draw.active {
            weights
                .update(&outcome.increments)
                .map_err(|e| ProtocolError::InvalidParameter("estimate", e.to_string()))?;
            active_rounds += 1;
        }
        total_bits += outcome.bits;
        reports += outcome.reports;
        missing += outcome.missing as u64;

        let loss = agg.get(choice, t);
        alg += loss;
        for (i, acc) in prefix.iter_mut().enumerate() {
            *acc += agg.get(i, t);
        }
        let best = prefix.iter().copied().fold(f64::INFINITY, f64::min);
        cum_regret.push((alg - best) / (t + 1) as f64);
        true_losses.push(loss);

        view.choices.push(choice);
        view.active.push(outcome.draw.active);
        view.levels.push(outcome.draw.level);
        view.increments.extend_from_slice(&outcome.increments);
        view.cum_bits.push(total_bits);
    }

    // double entry: streaming ledger vs. a recount from message counts
    let ledger = network.ledger();
    let cost = network.cost_model();
    ledger.audit(cost)?;
    let recount = active_rounds * 2 * plan.s as u64 + reports * cost.report_bits();
    let by_kind = ledger.count(MessageKind::SyncProbe) * cost.cost(MessageKind::SyncProbe)
        + ledger.count(MessageKind::SyncAck) * cost.cost(MessageKind::SyncAck)
        + ledger.count(MessageKind::ValueReport) * cost.report_bits();
    if recount != ledger.total() || by_kind != ledger.total() || total_bits != ledger.total() {
        return Err(ProtocolError::Recount {
            ledger: ledger.total(),
            recount,
        });
    }

    let (best_expert, best_loss) = agg.best_expert();
    Ok(RunReport {
        variant: plan.variant,
        p: plan.estimator.p,
        target_regret: plan.target_regret,
        seed,
        view,
        true_losses,
        cum_regret,
        alg_loss: alg,
        best_loss,
        best_expert,
        regret: (alg - best_loss) / horizon as f64,
        total_bits,
        reports,
        missing_estimates: missing,
        active_rounds,
        transcript: ledger.dump(),
        plan,
    })
}

pub fn run_baseline(tensor: &LossTensor, p: f64, seed: u64) -> Result<RunReport, ProtocolError> {
    run(&ProtocolConfig::new(Variant::Baseline, p), tensor, seed)
}

pub fn run_simple(tensor: &LossTensor, p: f64, seed: u64) -> Result<RunReport, ProtocolError> {
    run(&ProtocolConfig::new(Variant::Simple, p), tensor, seed)
}

pub fn run_tradeoff(tensor: &LossTensor, p: f64, r: f64, seed: u64) -> Result<RunReport, ProtocolError> {
    run(&ProtocolConfig::new(Variant::Tradeoff, p).with_regret(r), tensor, seed)
}

pub fn run_full(tensor: &LossTensor, p: f64, r: f64, seed: u64) -> Result<RunReport, ProtocolError> {
    run(&ProtocolConfig::new(Variant::Full, p).with_regret(r), tensor, seed)
}
