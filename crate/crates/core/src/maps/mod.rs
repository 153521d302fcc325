//! One-step prospect maps `R(v | x, a)`.
//!
//! A prospect map replaces the conditional expectation inside a Bellman
//! backup. Every map here is evaluated on the transition row `Q(. | x, a)`
//! and a value vector `v`; the state-action pair is passed along for maps
//! that carry their own kernels (the robust family).
//!
//! The three defining axioms are monotonicity, translation
//! (`R(v + c) = R(v) + c`) and centralization (`R(0) = 0`). They are not
//! enforced by the type system; [`crate::axioms::check_axioms`] probes them
//! empirically, and the probability-weighting map is a known violator of
//! translation for non-identity weightings.

mod descriptor;
mod entropic;
mod expectation;
mod scalar;
mod tail;
mod weighting;

use std::fmt;

use thiserror::Error;

use crate::mdp::{Mdp, MdpError, PolicyDet, PolicyRand, ValueFn};

pub use descriptor::MapDescriptor;
pub use entropic::{EntropicMap, MixedEntropicMap};
pub use expectation::{ExpectationMap, MinimaxMap, RobustMap};
pub use scalar::ScalarFn;
pub use tail::{CvarMap, MeanSemideviationMap};
pub use weighting::{ChoquetMap, ProbWeightingMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("numeric overflow evaluating {map}: intermediate value {value}")]
    NumericOverflow { map: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// A one-step prospect operator.
pub trait ProspectMap: fmt::Debug + Send + Sync {
    /// `R(v | x, a)` where `row = Q(. | x, a)`.
    fn evaluate(&self, row: &[f64], v: &[f64], x: usize, a: usize) -> Result<f64, MapError>;

    /// Transformation applied to immediate rewards by the solvers.
    ///
    /// Identity for every map except probability weighting, which scores
    /// rewards through its utility function.
    fn reward_transform(&self, r: f64) -> f64 {
        r
    }

    /// Short identifier used in reports.
    fn name(&self) -> String;
}

impl<M: ProspectMap + ?Sized> ProspectMap for Box<M> {
    fn evaluate(&self, row: &[f64], v: &[f64], x: usize, a: usize) -> Result<f64, MapError> {
        (**self).evaluate(row, v, x, a)
    }
    fn reward_transform(&self, r: f64) -> f64 {
        (**self).reward_transform(r)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<M: ProspectMap + ?Sized> ProspectMap for &M {
    fn evaluate(&self, row: &[f64], v: &[f64], x: usize, a: usize) -> Result<f64, MapError> {
        (**self).evaluate(row, v, x, a)
    }
    fn reward_transform(&self, r: f64) -> f64 {
        (**self).reward_transform(r)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// `R(v | x, a)` on the MDP's own kernel.
pub fn prospect<M: ProspectMap + ?Sized>(
    map: &M,
    m: &Mdp,
    v: &[f64],
    x: usize,
    a: usize,
) -> Result<f64, MapError> {
    if v.len() != m.n_states() {
        return Err(MapError::Dimension(format!(
            "value vector has {} entries, MDP has {} states",
            v.len(),
            m.n_states()
        )));
    }
    map.evaluate(m.row(x, a), v, x, a)
}

/// Policy-lifted operator `R^pi(v | x) = sum_a pi(a|x) R(v | x, a)`.
pub fn prospect_policy<M: ProspectMap + ?Sized>(
    map: &M,
    m: &Mdp,
    v: &[f64],
    pi: &PolicyRand,
) -> Result<ValueFn, MapError> {
    if pi.n_states() != m.n_states() {
        return Err(MapError::Dimension("policy does not cover the state space".into()));
    }
    pi.probs()
        .iter()
        .enumerate()
        .map(|(x, weights)| {
            weights.iter().enumerate().filter(|(_, &w)| w > 0.0).try_fold(0.0, |acc, (a, &w)| {
                Ok(acc + w * prospect(map, m, v, x, a)?)
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(ValueFn)
}

/// `R^f(v | x) = R(v | x, f(x))` for a deterministic rule.
pub fn prospect_det<M: ProspectMap + ?Sized>(
    map: &M,
    m: &Mdp,
    v: &[f64],
    f: &PolicyDet,
) -> Result<ValueFn, MapError> {
    f.validate(m)?;
    (0..m.n_states())
        .map(|x| prospect(map, m, v, x, f[x]))
        .collect::<Result<Vec<_>, _>>()
        .map(ValueFn)
}

/// Iterator over `(y, p)` with `p > 0`.
#[inline]
pub(crate) fn support(row: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
    row.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
}

#[inline]
pub(crate) fn expectation(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(p, v)| p * v).sum()
}
