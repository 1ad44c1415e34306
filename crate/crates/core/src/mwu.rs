//! Multiplicative weights over cumulative (possibly estimated) losses.
//!
//! Weights are kept as cumulative loss sums `w_i` and only exponentiated when
//! sampling, so long horizons never underflow.

use thiserror::Error;

use crate::rng::Stream;

#[derive(Debug, Error, PartialEq)]
pub enum MwuError {
    #[error("learning rate needs rho > 0, T > 0 and n >= 2 (rho={rho}, T={horizon}, n={n})")]
    InvalidRateArguments { rho: f64, horizon: usize, n: usize },
    #[error("expected {expected} estimates, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("estimate for expert {expert} is {value}; estimates must be finite and nonnegative")]
    InvalidEstimate { expert: usize, value: f64 },
}

/// `η = √(ln n / (ρ T))`.
pub fn learning_rate(rho: f64, horizon: usize, n: usize) -> Result<f64, MwuError> {
    if !(rho > 0.0 && rho.is_finite()) || horizon == 0 || n < 2 {
        return Err(MwuError::InvalidRateArguments { rho, horizon, n });
    }
    Ok(((n as f64).ln() / (rho * horizon as f64)).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightState {
    w: Vec<f64>,
    eta: f64,
    t: usize,
}

impl WeightState {
    pub fn new(n: usize, eta: f64) -> Self {
        assert!(n > 0, "need at least one expert");
        assert!(eta >= 0.0 && eta.is_finite(), "invalid learning rate {eta}");
        Self {
            w: vec![0.0; n],
            eta,
            t: 0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn update(&mut self, estimates: &[f64]) -> Result<(), MwuError> {
        if estimates.len() != self.w.len() {
            return Err(MwuError::WrongLength {
                expected: self.w.len(),
                got: estimates.len(),
            });
        }
        if let Some((expert, &value)) = estimates
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(MwuError::InvalidEstimate { expert, value });
        }
        for (w, e) in self.w.iter_mut().zip(estimates) {
            *w += e;
        }
        self.t += 1;
        Ok(())
    }

    /// `softmax(−η (w − min w))`.
    pub fn distribution(&self) -> Vec<f64> {
        let min = self.w.iter().copied().fold(f64::INFINITY, f64::min);
        let mut probs: Vec<f64> = self.w.iter().map(|w| (-self.eta * (w - min)).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        probs
    }

    /// Draw an expert using one uniform from `stream`.
    pub fn sample(&self, stream: &mut Stream) -> usize {
        let min = self.w.iter().copied().fold(f64::INFINITY, f64::min);
        let unnorm: Vec<f64> = self.w.iter().map(|w| (-self.eta * (w - min)).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        let mut target = stream.next_open01() * total;
        for (i, &m) in unnorm.iter().enumerate() {
            if target < m {
                return i;
            }
            target -= m;
        }
        // rounding can leave a sliver past the last bucket
        unnorm.iter().rposition(|&m| m > 0.0).unwrap_or(0)
    }
}
