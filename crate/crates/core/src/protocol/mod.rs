//! The distributed protocols and the exact-loss baseline.
//!
//! * `Baseline`: every `L_i(t)` is shipped to the coordinator.
//! * `Simple`: every round, servers report scaled losses above a threshold
//!   and the coordinator forms a geometric-mean estimate.
//! * `Tradeoff`: like `Simple`, but each round is active only with
//!   probability `ϱ = 1/(R²T)` and estimates are rescaled by `1/ϱ`.
//! * `Full`: active rounds additionally draw a reporting level `a`; servers
//!   use a level-dependent threshold and the coordinator only applies
//!   estimates whose magnitude bucket `a*` does not exceed `a`.

mod round;
mod run;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::estimator::{EstimatorError, EstimatorParams};
use crate::loss::{LossError, LossTensor, Regime};
use crate::mwu::learning_rate;
use crate::netsim::{AuditError, QuantizerError};

pub use round::{
    activity_and_level, compute_a_star, full_threshold, run_single_round, server_draw,
    server_reports, simple_threshold, RoundDraw, RoundOutcome,
};
pub use run::{run, run_baseline, run_full, run_simple, run_tradeoff, CoordinatorView, RunReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Baseline,
    Simple,
    Tradeoff,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Simple, Variant::Tradeoff, Variant::Full];

    /// Whether the variant takes a target regret `R`.
    pub fn uses_regret(self) -> bool {
        matches!(self, Variant::Tradeoff | Variant::Full)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::Simple => "simple",
            Variant::Tradeoff => "tradeoff",
            Variant::Full => "full",
        })
    }
}

impl FromStr for Variant {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "simple" => Ok(Variant::Simple),
            "tradeoff" => Ok(Variant::Tradeoff),
            "full" => Ok(Variant::Full),
            other => Err(ProtocolError::UnknownVariant(other.to_string())),
        }
    }
}

/// How `Full` scales an accepted estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncrementRule {
    /// Divide by the exact probability that the round is active at a level
    /// `≥ a*`. Unbiased.
    InverseProbability,
    /// `2^{a*} R² T · ŝ`, as written in the pseudocode.
    Literal,
}

impl fmt::Display for IncrementRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IncrementRule::InverseProbability => "ipw",
            IncrementRule::Literal => "literal",
        })
    }
}

impl FromStr for IncrementRule {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ipw" => Ok(IncrementRule::InverseProbability),
            "literal" => Ok(IncrementRule::Literal),
            other => Err(ProtocolError::InvalidParameter("increment_rule", other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error("communication audit failed: {0}")]
    Audit(#[from] AuditError),
    #[error("audit failed: ledger has {ledger} bits, message recount gives {recount}")]
    Recount { ledger: u64, recount: u64 },
    #[error("unknown variant {0:?} (expected baseline, simple, tradeoff or full)")]
    UnknownVariant(String),
    #[error("variant {0} needs a target regret R")]
    MissingRegret(Variant),
    #[error("target regret R = {r} is below 1/sqrt(T) = {min}")]
    RegretTooSmall { r: f64, min: f64 },
    #[error("variant {variant} requires {needed} losses, but the instance is {regime}")]
    RegimeMismatch {
        variant: Variant,
        regime: Regime,
        needed: &'static str,
    },
    #[error("invalid {0}: {1}")]
    InvalidParameter(&'static str, String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub p: f64,
    /// Target regret `R`; required by `Tradeoff` and `Full`.
    pub target_regret: Option<f64>,
    pub threshold_const: f64,
    /// Overrides the default level cap `⌈10 ln(nsT)⌉` for `Full`.
    pub level_cap: Option<u32>,
    pub increment_rule: IncrementRule,
    /// Width `V` of a quantised value.
    pub value_bits: u32,
    /// Range of `ln(value)` covered by the quantiser.
    pub log_range: (f64, f64),
    /// Keep every message for the transcript dump and audit.
    pub keep_transcripts: bool,
}

impl ProtocolConfig {
    pub fn new(variant: Variant, p: f64) -> Self {
        Self {
            variant,
            p,
            target_regret: None,
            threshold_const: 100.0,
            level_cap: None,
            increment_rule: IncrementRule::InverseProbability,
            value_bits: 32,
            log_range: crate::netsim::Quantizer::DEFAULT_LOG_RANGE,
            keep_transcripts: false,
        }
    }

    pub fn with_regret(mut self, r: f64) -> Self {
        self.target_regret = Some(r);
        self
    }

    /// Checks that do not depend on the instance.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        EstimatorParams::for_exponent(self.p)?;
        if self.variant.uses_regret() {
            match self.target_regret {
                None => return Err(ProtocolError::MissingRegret(self.variant)),
                Some(r) if !(r > 0.0 && r.is_finite()) => {
                    return Err(ProtocolError::InvalidParameter("R", r.to_string()))
                }
                _ => {}
            }
        }
        if !(self.threshold_const > 0.0 && self.threshold_const.is_finite()) {
            return Err(ProtocolError::InvalidParameter(
                "threshold_const",
                self.threshold_const.to_string(),
            ));
        }
        if self.level_cap == Some(0) {
            return Err(ProtocolError::InvalidParameter("level_cap", "0".into()));
        }
        crate::netsim::Quantizer::new(self.value_bits, self.log_range.0, self.log_range.1)?;
        Ok(())
    }
}

/// Everything derived from a config and an instance's dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub variant: Variant,
    pub n: usize,
    pub s: usize,
    pub horizon: usize,
    pub estimator: EstimatorParams,
    /// Probability `ϱ` that a round is active.
    pub activity: f64,
    /// `ln(nsT)`.
    pub log_nst: f64,
    /// Report threshold; for `Full` this is the level-0 value `τ_0`.
    pub threshold: f64,
    /// Level cap `A` (1 unless `Full`).
    pub levels: u32,
    /// Largest possible `L_i(t)` under the regime.
    pub loss_bound: f64,
    /// Second-moment bound `ρ` behind the learning rate.
    pub rho: f64,
    pub eta: f64,
    pub increment_rule: IncrementRule,
    pub target_regret: Option<f64>,
}

impl Plan {
    pub fn new(config: &ProtocolConfig, tensor: &LossTensor) -> Result<Self, ProtocolError> {
        Self::for_shape(config, tensor.experts(), tensor.servers(), tensor.horizon(), tensor.regime())
    }

    /// The plan depends on the instance only through its shape and regime.
    pub fn for_shape(
        config: &ProtocolConfig,
        n: usize,
        s: usize,
        horizon: usize,
        regime: Regime,
    ) -> Result<Self, ProtocolError> {
        config.validate()?;
        let p = config.p;
        let variant = config.variant;
        match (variant, regime) {
            (Variant::Simple | Variant::Tradeoff, Regime::Unit) => {
                return Err(ProtocolError::RegimeMismatch {
                    variant,
                    regime,
                    needed: "RANGE(a, b)",
                })
            }
            (Variant::Full, Regime::Range { b, .. }) if b > 1.0 => {
                return Err(ProtocolError::RegimeMismatch {
                    variant,
                    regime,
                    needed: "UNIT (or RANGE with b <= 1)",
                })
            }
            _ => {}
        }

        let estimator = EstimatorParams::for_exponent(p)?;
        let s_root = (s as f64).powf(1.0 / p);
        let spread = (s as f64).powf(1.0 - 2.0 / p).max(1.0);
        let t = horizon as f64;

        let activity = match (variant, config.target_regret) {
            (Variant::Tradeoff | Variant::Full, Some(r)) => {
                let min = 1.0 / t.sqrt();
                if r * r * t < 1.0 - 1e-12 {
                    return Err(ProtocolError::RegretTooSmall { r, min });
                }
                let base = if variant == Variant::Full { spread } else { 1.0 };
                let rate = base / (r * r * t);
                // R = 1/√T must give exactly ϱ = 1 despite rounding
                if rate >= 1.0 - 1e-12 {
                    1.0
                } else {
                    rate
                }
            }
            _ => 1.0,
        };

        let log_nst = ((n * s * horizon) as f64).ln();
        let threshold = if log_nst > 0.0 {
            s_root / (config.threshold_const * log_nst)
        } else {
            f64::INFINITY
        };
        let levels = match variant {
            Variant::Full => config
                .level_cap
                .unwrap_or_else(|| ((10.0 * log_nst).ceil() as u32).max(1)),
            _ => 1,
        };

        let loss_bound = regime.max_loss() * s_root;
        let kappa = estimator.relative_second_moment();
        let lambda2 = loss_bound * loss_bound;
        let rho = match variant {
            // centred second moment of a loss confined to [0, Λ]
            Variant::Baseline => lambda2 / 4.0,
            Variant::Simple => lambda2 * kappa,
            Variant::Tradeoff => lambda2 * kappa / activity,
            Variant::Full => lambda2 * (kappa + 1.0) * spread / activity,
        };
        let eta = if n >= 2 {
            learning_rate(rho, horizon, n)
                .map_err(|e| ProtocolError::InvalidParameter("learning rate", e.to_string()))?
        } else {
            0.0
        };

        Ok(Self {
            variant,
            n,
            s,
            horizon,
            estimator,
            activity,
            log_nst,
            threshold,
            levels,
            loss_bound,
            rho,
            eta,
            increment_rule: config.increment_rule,
            target_regret: config.target_regret,
        })
    }

    /// `Pr[round active and level ≥ k]` under the truncated level law.
    pub fn level_tail(&self, k: u32) -> f64 {
        if k > self.levels {
            0.0
        } else {
            self.activity * 0.5f64.powi(k.max(1) as i32 - 1)
        }
    }

    /// Factor applied to an accepted `Full` estimate with bucket `a*`.
    pub fn full_scale(&self, a_star: u32) -> f64 {
        match self.increment_rule {
            IncrementRule::InverseProbability => 1.0 / self.level_tail(a_star),
            IncrementRule::Literal => {
                let r = self.target_regret.unwrap_or(1.0);
                2f64.powi(a_star as i32) * r * r * self.horizon as f64
            }
        }
    }

    /// Factor by which the expected increment exceeds `L_i(t)`: 1 for every
    /// unbiased rule.
    pub fn increment_scale(&self) -> f64 {
        match (self.variant, self.increment_rule) {
            (Variant::Full, IncrementRule::Literal) => f64::NAN,
            _ => 1.0,
        }
    }
}
