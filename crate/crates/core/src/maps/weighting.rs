use super::{support, MapError, ProspectMap, ScalarFn};

/// Prospect-theory style map `sum_y w(p(y)) u(v(y))`.
///
/// Weights are not renormalized, so translation invariance generally fails
/// unless `w` is the identity. The solvers score immediate rewards through
/// `u` as well (see [`ProspectMap::reward_transform`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbWeightingMap {
    utility: ScalarFn,
    weighting: ScalarFn,
}

impl ProbWeightingMap {
    pub fn new(utility: ScalarFn, weighting: ScalarFn) -> Result<Self, MapError> {
        utility.validate_utility()?;
        weighting.validate_unit("probability weighting")?;
        Ok(ProbWeightingMap { utility, weighting })
    }

    pub fn utility(&self) -> &ScalarFn {
        &self.utility
    }

    pub fn weighting(&self) -> &ScalarFn {
        &self.weighting
    }
}

impl ProspectMap for ProbWeightingMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        Ok(support(row).map(|(y, p)| self.weighting.eval(p) * self.utility.eval(v[y])).sum())
    }

    fn reward_transform(&self, r: f64) -> f64 {
        self.utility.eval(r)
    }

    fn name(&self) -> String {
        "probability_weighting".into()
    }
}

/// Choquet integral with respect to the distorted capacity
/// `mu(B) = g(Q(B | x, a))`.
///
/// With successor values sorted descending, `v(1) >= ... >= v(n)`, the
/// integral is `sum_i v(i) [g(P_i) - g(P_{i-1})]` where `P_i` is the mass of
/// the top `i` states.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoquetMap {
    distortion: ScalarFn,
}

impl ChoquetMap {
    pub fn new(distortion: ScalarFn) -> Result<Self, MapError> {
        distortion.validate_unit("distortion")?;
        Ok(ChoquetMap { distortion })
    }

    pub fn distortion(&self) -> &ScalarFn {
        &self.distortion
    }
}

impl ProspectMap for ChoquetMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        let mut outcomes: Vec<(f64, f64)> = support(row).map(|(y, p)| (v[y], p)).collect();
        outcomes.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut cum = 0.0;
        let mut prev_g = 0.0;
        let mut total = 0.0;
        let last = outcomes.len().saturating_sub(1);
        for (i, &(value, p)) in outcomes.iter().enumerate() {
            cum += p;
            // pin the final capacity to g(1) = 1 regardless of row rounding
            let g = if i == last { 1.0 } else { self.distortion.eval(cum.min(1.0)) };
            total += value * (g - prev_g);
            prev_g = g;
        }
        Ok(total)
    }

    fn name(&self) -> String {
        "choquet".into()
    }
}
