//! Ground-truth losses, ℓ_p aggregation across servers, and realised regret.

use std::fmt;

use thiserror::Error;

use crate::rng::{Domain, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("dimensions must be positive (n={n}, s={s}, T={horizon})")]
    EmptyDimension { n: usize, s: usize, horizon: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid RANGE({a}, {b}): need 0 < a < b")]
    InvalidRange { a: f64, b: f64 },
    #[error("loss {value} at (expert {expert}, server {server}, time {time}) violates {regime}")]
    RegimeViolation {
        expert: usize,
        server: usize,
        time: usize,
        value: f64,
        regime: Regime,
    },
    #[error("{0} must lie in {1}")]
    InvalidParameter(&'static str, &'static str),
}

/// Declared range of every per-server loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// Every value in `[a, b]`, `0 < a < b`.
    Range { a: f64, b: f64 },
    /// Every value in `[0, 1]`.
    Unit,
}

impl Regime {
    pub fn range(a: f64, b: f64) -> Result<Self, LossError> {
        if a > 0.0 && b > a && b.is_finite() {
            Ok(Regime::Range { a, b })
        } else {
            Err(LossError::InvalidRange { a, b })
        }
    }

    pub fn admits(&self, value: f64) -> bool {
        match *self {
            Regime::Range { a, b } => value >= a && value <= b,
            Regime::Unit => (0.0..=1.0).contains(&value),
        }
    }

    /// Largest per-server loss the regime allows.
    pub fn max_loss(&self) -> f64 {
        match *self {
            Regime::Range { b, .. } => b,
            Regime::Unit => 1.0,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Range { a, b } => write!(f, "RANGE {a} {b}"),
            Regime::Unit => write!(f, "UNIT"),
        }
    }
}

/// Dense `ℓ_i(j,t)` array. Storage order is expert-major, then time, then
/// server, matching the trace file layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTensor {
    n: usize,
    s: usize,
    horizon: usize,
    regime: Regime,
    values: Vec<f64>,
    /// Affine shift added at ingestion to make a trace nonnegative.
    shift: Option<f64>,
}

impl LossTensor {
    pub fn new(
        n: usize,
        s: usize,
        horizon: usize,
        regime: Regime,
        values: Vec<f64>,
    ) -> Result<Self, LossError> {
        if n == 0 || s == 0 || horizon == 0 {
            return Err(LossError::EmptyDimension { n, s, horizon });
        }
        if let Regime::Range { a, b } = regime {
            Regime::range(a, b)?;
        }
        let expected = n * s * horizon;
        if values.len() != expected {
            return Err(LossError::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        let tensor = Self {
            n,
            s,
            horizon,
            regime,
            values,
            shift: None,
        };
        if let Some((i, j, t)) = tensor.first_violation() {
            return Err(LossError::RegimeViolation {
                expert: i,
                server: j,
                time: t,
                value: tensor.get(i, j, t),
                regime,
            });
        }
        Ok(tensor)
    }

    /// Every entry equal to `value`.
    pub fn constant(
        n: usize,
        s: usize,
        horizon: usize,
        value: f64,
        regime: Regime,
    ) -> Result<Self, LossError> {
        Self::new(n, s, horizon, regime, vec![value; n * s * horizon])
    }

    pub fn experts(&self) -> usize {
        self.n
    }

    pub fn servers(&self) -> usize {
        self.s
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn shift(&self) -> Option<f64> {
        self.shift
    }

    pub(crate) fn set_shift(&mut self, shift: f64) {
        self.shift = Some(shift);
    }

    #[inline]
    fn index(&self, expert: usize, server: usize, time: usize) -> usize {
        (expert * self.horizon + time) * self.s + server
    }

    #[inline]
    pub fn get(&self, expert: usize, server: usize, time: usize) -> f64 {
        self.values[self.index(expert, server, time)]
    }

    /// Losses of one expert at one time across all servers.
    pub fn row(&self, expert: usize, time: usize) -> &[f64] {
        let start = self.index(expert, 0, time);
        &self.values[start..start + self.s]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Overwrite one entry, keeping the regime invariant.
    pub fn set(&mut self, expert: usize, server: usize, time: usize, value: f64) -> Result<(), LossError> {
        if !self.regime.admits(value) {
            return Err(LossError::RegimeViolation {
                expert,
                server,
                time,
                value,
                regime: self.regime,
            });
        }
        let k = self.index(expert, server, time);
        self.values[k] = value;
        Ok(())
    }

    /// Multiply every loss by `factor`, retagging the regime accordingly.
    pub fn scaled(&self, factor: f64) -> Result<Self, LossError> {
        let regime = match self.regime {
            Regime::Range { a, b } => Regime::range(a * factor, b * factor)?,
            Regime::Unit if factor <= 1.0 => Regime::Unit,
            Regime::Unit => Regime::range(f64::MIN_POSITIVE, factor)
                .map_err(|_| LossError::InvalidParameter("factor", "(0, inf)"))?,
        };
        let values = self.values.iter().map(|v| v * factor).collect();
        let mut out = Self::new(self.n, self.s, self.horizon, regime, values)?;
        out.shift = self.shift;
        Ok(out)
    }

    fn first_violation(&self) -> Option<(usize, usize, usize)> {
        let k = self.values.iter().position(|&v| !self.regime.admits(v))?;
        let j = k % self.s;
        let t = (k / self.s) % self.horizon;
        let i = k / (self.s * self.horizon);
        Some((i, j, t))
    }
}

/// `L_i(t)` for every expert and time, stored expert-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedLosses {
    n: usize,
    horizon: usize,
    p: f64,
    values: Vec<f64>,
}

impl AggregatedLosses {
    pub fn experts(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn get(&self, expert: usize, time: usize) -> f64 {
        self.values[expert * self.horizon + time]
    }

    pub fn expert_series(&self, expert: usize) -> &[f64] {
        &self.values[expert * self.horizon..(expert + 1) * self.horizon]
    }

    /// `Σ_t L_i(t)` for each expert.
    pub fn totals(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.expert_series(i).iter().sum()).collect()
    }

    /// Index and total loss of the best expert in hindsight (lowest index on
    /// ties).
    pub fn best_expert(&self) -> (usize, f64) {
        self.totals()
            .into_iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
    }
}

/// `‖row‖_p`, factoring out the row maximum before exponentiation.
pub fn lp_norm(row: &[f64], p: f64) -> f64 {
    let max = row.iter().fold(0.0f64, |m, &v| m.max(v));
    if max == 0.0 {
        return 0.0;
    }
    let sum: f64 = row.iter().map(|&v| (v / max).powf(p)).sum();
    max * sum.powf(1.0 / p)
}

pub fn lp_aggregate(tensor: &LossTensor, p: f64) -> AggregatedLosses {
    assert!(p.is_finite() && p >= 1.0, "p must be finite and >= 1, got {p}");
    let (n, horizon) = (tensor.experts(), tensor.horizon());
    let values = (0..n)
        .flat_map(|i| (0..horizon).map(move |t| (i, t)))
        .map(|(i, t)| lp_norm(tensor.row(i, t), p))
        .collect();
    AggregatedLosses {
        n,
        horizon,
        p,
        values,
    }
}

/// `(Σ_t L_{i_t}(t) − min_i Σ_t L_i(t)) / T`. Not clamped at zero.
pub fn regret(choices: &[usize], agg: &AggregatedLosses) -> f64 {
    assert_eq!(choices.len(), agg.horizon(), "one choice per time step");
    let alg: f64 = choices.iter().enumerate().map(|(t, &i)| agg.get(i, t)).sum();
    let (_, best) = agg.best_expert();
    (alg - best) / agg.horizon() as f64
}

/// Expert 0 draws uniformly from `[a, b − gap·(b − a)]`, all others from
/// `[a, b]`.
pub fn gen_range_instance(
    n: usize,
    s: usize,
    horizon: usize,
    a: f64,
    b: f64,
    gap: f64,
    seed: u64,
) -> Result<LossTensor, LossError> {
    let regime = Regime::range(a, b)?;
    if !(0.0..1.0).contains(&gap) {
        return Err(LossError::InvalidParameter("gap", "[0, 1)"));
    }
    let best_hi = b - gap * (b - a);
    let values = generate(n, s, horizon, seed, |stream, i| {
        let hi = if i == 0 { best_hi } else { b };
        stream.next_range(a, hi)
    });
    LossTensor::new(n, s, horizon, regime, values)
}

/// Values in `[0, 1]`: each entry is nonzero with probability `sparsity`, and
/// nonzero values are uniform on `(0, 1]` (expert 0: `(0, 1 − gap]`).
pub fn gen_unit_instance(
    n: usize,
    s: usize,
    horizon: usize,
    sparsity: f64,
    gap: f64,
    seed: u64,
) -> Result<LossTensor, LossError> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(LossError::InvalidParameter("sparsity", "(0, 1]"));
    }
    if !(0.0..1.0).contains(&gap) {
        return Err(LossError::InvalidParameter("gap", "[0, 1)"));
    }
    let values = generate(n, s, horizon, seed, |stream, i| {
        let hi = if i == 0 { 1.0 - gap } else { 1.0 };
        let coin = stream.next_open01();
        let mag = stream.next_open01();
        if coin < sparsity {
            hi * (1.0 - mag).max(f64::MIN_POSITIVE)
        } else {
            0.0
        }
    });
    LossTensor::new(n, s, horizon, Regime::Unit, values)
}

fn generate(
    n: usize,
    s: usize,
    horizon: usize,
    seed: u64,
    mut draw: impl FnMut(&mut Stream, usize) -> f64,
) -> Vec<f64> {
    let mut values = Vec::with_capacity(n * s * horizon);
    for i in 0..n {
        let mut stream = Stream::new(seed, Domain::Instance, [i as u64, 0, 0, 0]);
        for _ in 0..horizon * s {
            values.push(draw(&mut stream, i));
        }
    }
    values
}
