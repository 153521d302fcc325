use serde::{Deserialize, Serialize};

use super::{expectation, support, MapError, ProspectMap};

/// Conditional value at risk: the mean of the worst `tau` fraction of
/// successor values, `max_u { u - E[(u - v)_+] / tau }`.
///
/// Evaluated exactly by sorting the support ascending and averaging the
/// lower tail; the maximizing `u` is the `tau`-quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvarMap {
    tau: f64,
}

impl CvarMap {
    pub fn new(tau: f64) -> Result<Self, MapError> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(MapError::InvalidParameter(format!("cvar tail level {tau} outside (0, 1]")));
        }
        Ok(CvarMap { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl ProspectMap for CvarMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        let mut outcomes: Vec<(f64, f64)> = support(row).map(|(y, p)| (v[y], p)).collect();
        // stable: equal values keep index order
        outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut mass = 0.0;
        let mut acc = 0.0;
        let mut last = outcomes.last().map_or(0.0, |o| o.0);
        for &(value, p) in &outcomes {
            let take = p.min(self.tau - mass);
            if take <= 0.0 {
                break;
            }
            acc += take * value;
            mass += take;
            last = value;
        }
        // rows summing to 1 - 1e-9 can leave a sliver of the tail unfilled
        if mass < self.tau {
            acc += (self.tau - mass) * last;
        }
        Ok(acc / self.tau)
    }

    fn name(&self) -> String {
        format!("cvar(tau={})", self.tau)
    }
}

/// Mean plus `lambda` times a one-sided semideviation of order `r`.
///
/// For `lambda >= 0` the upper semideviation `E[(v - mu)_+^r]^(1/r)` is
/// rewarded (risk-seeking, convex). For `lambda < 0` the lower
/// semideviation `E[(mu - v)_+^r]^(1/r)` is penalized (risk-averse,
/// concave). Both sides are monotone for `|lambda| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSemideviationMap {
    lambda: f64,
    order: f64,
}

impl MeanSemideviationMap {
    /// `|lambda| > 1` is accepted; the axiom checker reports the resulting
    /// monotonicity violations.
    pub fn new(lambda: f64, order: f64) -> Result<Self, MapError> {
        if !lambda.is_finite() {
            return Err(MapError::InvalidParameter(format!("semideviation lambda {lambda}")));
        }
        if !(order >= 1.0 && order.is_finite()) {
            return Err(MapError::InvalidParameter(format!("semideviation order {order} < 1")));
        }
        Ok(MeanSemideviationMap { lambda, order })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn order(&self) -> f64 {
        self.order
    }
}

impl ProspectMap for MeanSemideviationMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        let mu = expectation(row, v);
        if self.lambda == 0.0 {
            return Ok(mu);
        }
        let upper = self.lambda > 0.0;
        let moment: f64 = support(row)
            .map(|(y, p)| {
                let d = if upper { v[y] - mu } else { mu - v[y] };
                p * d.max(0.0).powf(self.order)
            })
            .sum();
        Ok(mu + self.lambda * moment.powf(1.0 / self.order))
    }

    fn name(&self) -> String {
        format!("mean_semideviation(lambda={}, r={})", self.lambda, self.order)
    }
}
