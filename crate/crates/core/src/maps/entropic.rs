use serde::{Deserialize, Serialize};

use super::{expectation, support, MapError, ProspectMap};

/// `log sum_y p(y) exp(lambda v(y))`, shifted by the largest exponent.
fn log_mgf(row: &[f64], v: &[f64], lambda: f64) -> f64 {
    let shift = support(row).map(|(y, _)| lambda * v[y]).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = support(row).map(|(y, p)| p * (lambda * v[y] - shift).exp()).sum();
    shift + s.ln()
}

fn entropic_value(row: &[f64], v: &[f64], lambda: f64, name: &'static str) -> Result<f64, MapError> {
    let l = log_mgf(row, v, lambda);
    let out = l / lambda;
    if !out.is_finite() {
        return Err(MapError::NumericOverflow { map: name, value: l });
    }
    Ok(out)
}

/// Exponential-utility map `(1/lambda) log E[exp(lambda v)]`.
///
/// Concave (risk-averse) for `lambda < 0`, convex (risk-seeking) for
/// `lambda > 0`. The `lambda -> 0` limit is [`super::ExpectationMap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicMap {
    lambda: f64,
}

impl EntropicMap {
    pub fn new(lambda: f64) -> Result<Self, MapError> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(MapError::InvalidParameter(format!(
                "entropic lambda must be finite and nonzero, got {lambda}"
            )));
        }
        Ok(EntropicMap { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl ProspectMap for EntropicMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        entropic_value(row, v, self.lambda, "entropic")
    }

    fn name(&self) -> String {
        format!("entropic(lambda={})", self.lambda)
    }
}

/// Entropic map whose sign flips with the prospect: risk-seeking over
/// gains, risk-averse over losses.
///
/// Uses `+lambda` when `E[exp(lambda v)] > 1` and `-lambda` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedEntropicMap {
    lambda: f64,
}

impl MixedEntropicMap {
    pub fn new(lambda: f64) -> Result<Self, MapError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(MapError::InvalidParameter(format!(
                "mixed entropic lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(MixedEntropicMap { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl ProspectMap for MixedEntropicMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        if self.lambda == 0.0 {
            return Ok(expectation(row, v));
        }
        // E[exp(lambda v)] > 1  <=>  log E[exp(lambda v)] > 0
        let gamma = if log_mgf(row, v, self.lambda) > 0.0 { self.lambda } else { -self.lambda };
        entropic_value(row, v, gamma, "mixed_entropic")
    }

    fn name(&self) -> String {
        format!("mixed_entropic(lambda={})", self.lambda)
    }
}
