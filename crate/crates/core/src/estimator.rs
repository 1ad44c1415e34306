//! Exponential scalings and the geometric-mean estimator.
//!
//! For i.i.d. rate-1 exponentials `e_j`, `max_j f_j / e_j^{1/p}` has the law
//! of `‖f‖_p / e^{1/p}`. A single such draw has infinite variance, so the
//! estimator takes the geometric mean of `B` independent copies and divides
//! by `C = Γ(1 − 1/(Bp))^B`, the exact mean of that geometric mean.

use thiserror::Error;

use crate::gamma::gamma;
use crate::rng::Stream;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("exponential draw must be positive, got {0}")]
    NonPositiveDraw(f64),
    #[error("p must be finite and at least 1, got {0}")]
    InvalidExponent(f64),
    #[error("moment diverges: B*p = {bp} must exceed {needed}")]
    DivergentMoment { bp: f64, needed: f64 },
    #[error("number of copies must be positive")]
    ZeroCopies,
}

/// A draw of a rate-1 exponential random variable. Always strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ExpSample(f64);

impl ExpSample {
    pub fn new(value: f64) -> Result<Self, EstimatorError> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(EstimatorError::NonPositiveDraw(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Inverse-CDF draw `−ln U`, `U ∈ (0, 1)`.
pub fn sample_exponential(stream: &mut Stream) -> ExpSample {
    ExpSample(exponential_from_uniform(stream.next_open01()))
}

/// `−ln u`; the caller guarantees `u ∈ (0, 1)`.
pub fn exponential_from_uniform(u: f64) -> f64 {
    -u.ln()
}

/// `loss / (c · e^{1/p})`.
pub fn scaled_loss(loss: f64, e: f64, p: f64, c: f64) -> Result<f64, EstimatorError> {
    if !(e > 0.0) {
        return Err(EstimatorError::NonPositiveDraw(e));
    }
    Ok(loss / (c * e.powf(1.0 / p)))
}

/// `Γ(1 − 1/(Bp))^B`, the exact value of `(E[e^{−1/(Bp)}])^B`.
pub fn geo_constant(copies: u32, p: f64) -> Result<f64, EstimatorError> {
    gamma_moment(copies, p, 1.0)
}

/// `Γ(1 − 2/(Bp))^B`, the exact second moment of the geometric mean.
pub fn geo_second_moment(copies: u32, p: f64) -> Result<f64, EstimatorError> {
    gamma_moment(copies, p, 2.0)
}

// E[(∏ e_b^{-1/p})^{k/B}] = Γ(1 − k/(Bp))^B
fn gamma_moment(copies: u32, p: f64, order: f64) -> Result<f64, EstimatorError> {
    if copies == 0 {
        return Err(EstimatorError::ZeroCopies);
    }
    let bp = f64::from(copies) * p;
    if !(bp > order) {
        return Err(EstimatorError::DivergentMoment { bp, needed: order });
    }
    Ok(gamma(1.0 - order / bp).powi(copies as i32))
}

/// Geometric mean computed as `exp(mean(ln v))`. Returns `None` if the slice
/// is empty or any value is zero (a copy whose maximum never arrived).
pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
    Some(mean_log.exp())
}

/// All estimator constants for one value of `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorParams {
    pub p: f64,
    /// Number of independent copies `B`.
    pub copies: u32,
    /// Normalisation constant `C`.
    pub norm: f64,
    /// `E[Z²]` for the un-normalised geometric mean `Z`.
    pub second_moment: f64,
}

impl EstimatorParams {
    /// Default rule `B = ⌈3/p⌉`.
    pub fn for_exponent(p: f64) -> Result<Self, EstimatorError> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(EstimatorError::InvalidExponent(p));
        }
        Self::with_copies(p, default_copies(p))
    }

    pub fn with_copies(p: f64, copies: u32) -> Result<Self, EstimatorError> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(EstimatorError::InvalidExponent(p));
        }
        Ok(Self {
            p,
            copies,
            norm: geo_constant(copies, p)?,
            second_moment: geo_second_moment(copies, p)?,
        })
    }

    /// `E[ŝ²] / L²` for the normalised estimator `ŝ = L·Z/C`.
    pub fn relative_second_moment(&self) -> f64 {
        self.second_moment / (self.norm * self.norm)
    }
}

pub fn default_copies(p: f64) -> u32 {
    (3.0 / p).ceil() as u32
}
