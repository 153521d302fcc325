//! Finite Markov decision processes, policies, value vectors and the two
//! norms used by the convergence theory.
//!
//! Transition probabilities are stored densely as a flat `N * A * N` buffer;
//! `row(x, a)` borrows the distribution `Q(. | x, a)`.

use std::ops::{Deref, DerefMut, Index};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `sum_y Q(y|x,a) = 1` and on policy rows.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("transition row ({x}, {a}) sums to {sum}, expected 1")]
    RowNotStochastic { x: usize, a: usize, sum: f64 },
    #[error("transition entry ({x}, {a}, {y}) = {p} is outside [0, 1]")]
    InvalidProbability { x: usize, a: usize, y: usize, p: f64 },
    #[error("reward ({x}, {a}) is not finite")]
    NonFiniteReward { x: usize, a: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("policy row {x} is invalid: {reason}")]
    InvalidPolicy { x: usize, reason: String },
}

/// A finite MDP `(X, A, Q, r)` with every action available in every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpJson", into = "MdpJson")]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
}

/// Nested-array wire format: `transitions[x][a][y]`, `rewards[x][a]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpJson {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<f64>>,
}

impl TryFrom<MdpJson> for Mdp {
    type Error = MdpError;

    fn try_from(j: MdpJson) -> Result<Self, MdpError> {
        Mdp::from_nested(j.transitions, j.rewards).and_then(|m| {
            if m.n_states != j.n_states || m.n_actions != j.n_actions {
                Err(MdpError::Dimension(format!(
                    "declared {}x{} but arrays are {}x{}",
                    j.n_states, j.n_actions, m.n_states, m.n_actions
                )))
            } else {
                Ok(m)
            }
        })
    }
}

impl From<Mdp> for MdpJson {
    fn from(m: Mdp) -> Self {
        MdpJson {
            n_states: m.n_states,
            n_actions: m.n_actions,
            transitions: m.transitions_nested(),
            rewards: (0..m.n_states)
                .map(|x| (0..m.n_actions).map(|a| m.reward(x, a)).collect())
                .collect(),
        }
    }
}

impl Mdp {
    /// Builds and validates an MDP from flat row-major buffers.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::Dimension("need at least one state and one action".into()));
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(MdpError::Dimension(format!(
                "transition buffer has {} entries, expected {}",
                transitions.len(),
                n_states * n_actions * n_states
            )));
        }
        if rewards.len() != n_states * n_actions {
            return Err(MdpError::Dimension(format!(
                "reward buffer has {} entries, expected {}",
                rewards.len(),
                n_states * n_actions
            )));
        }
        let m = Mdp { n_states, n_actions, transitions, rewards };
        validate_mdp(&m)?;
        Ok(m)
    }

    /// Builds an MDP from `transitions[x][a][y]` and `rewards[x][a]`.
    pub fn from_nested(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self, MdpError> {
        let n = transitions.len();
        let n_actions = transitions.first().map_or(0, Vec::len);
        if rewards.len() != n {
            return Err(MdpError::Dimension(format!(
                "{} transition states but {} reward rows",
                n,
                rewards.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * n_actions * n);
        for (x, per_action) in transitions.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(MdpError::Dimension(format!("state {x} has {} actions", per_action.len())));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n {
                    return Err(MdpError::Dimension(format!("row ({x}, {a}) has length {}", row.len())));
                }
                flat.extend_from_slice(row);
            }
        }
        let mut r = Vec::with_capacity(n * n_actions);
        for (x, row) in rewards.iter().enumerate() {
            if row.len() != n_actions {
                return Err(MdpError::Dimension(format!("reward row {x} has length {}", row.len())));
            }
            r.extend_from_slice(row);
        }
        Mdp::new(n, n_actions, flat, r)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// The distribution `Q(. | x, a)`.
    #[inline]
    pub fn row(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize, y: usize) -> f64 {
        self.row(x, a)[y]
    }

    #[inline]
    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards[x * self.n_actions + a]
    }

    pub fn transitions_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|x| (0..self.n_actions).map(|a| self.row(x, a).to_vec()).collect())
            .collect()
    }

    /// Same kernel with a different reward table.
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self, MdpError> {
        Mdp::new(self.n_states, self.n_actions, self.transitions.clone(), rewards)
    }

    /// Deterministic policy that always plays `a`.
    pub fn constant_policy(&self, a: usize) -> PolicyDet {
        PolicyDet::new(vec![a; self.n_states])
    }
}

/// Checks the row-stochasticity and finiteness invariants of an MDP.
pub fn validate_mdp(m: &Mdp) -> Result<(), MdpError> {
    for x in 0..m.n_states {
        for a in 0..m.n_actions {
            let row = m.row(x, a);
            if let Some((y, &p)) = row
                .iter()
                .enumerate()
                .find(|(_, p)| !(0.0..=1.0).contains(*p))
            {
                return Err(MdpError::InvalidProbability { x, a, y, p });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(MdpError::RowNotStochastic { x, a, sum });
            }
            if !m.reward(x, a).is_finite() {
                return Err(MdpError::NonFiniteReward { x, a });
            }
        }
    }
    Ok(())
}

/// A Markov randomized decision rule `pi[x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRand {
    probs: Vec<Vec<f64>>,
}

impl PolicyRand {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self, MdpError> {
        for (x, row) in probs.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(MdpError::InvalidPolicy { x, reason: "entry outside [0, 1]".into() });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(MdpError::InvalidPolicy { x, reason: format!("row sums to {sum}") });
            }
        }
        Ok(PolicyRand { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        PolicyRand { probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] }
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    fn check_dims(&self, m: &Mdp) -> Result<(), MdpError> {
        if self.probs.len() != m.n_states() || self.probs.iter().any(|r| r.len() != m.n_actions()) {
            return Err(MdpError::Dimension(format!(
                "policy shape does not match {}x{} MDP",
                m.n_states(),
                m.n_actions()
            )));
        }
        Ok(())
    }
}

impl PolicyRand {
    /// Point-mass embedding of a deterministic policy over `n_actions` actions.
    pub fn from_det(f: &PolicyDet, n_actions: usize) -> Self {
        let probs = f
            .actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        PolicyRand { probs }
    }
}

/// A Markov deterministic decision rule `f[x]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyDet {
    actions: Vec<usize>,
}

impl PolicyDet {
    pub fn new(actions: Vec<usize>) -> Self {
        PolicyDet { actions }
    }

    pub fn validate(&self, m: &Mdp) -> Result<(), MdpError> {
        if self.actions.len() != m.n_states() {
            return Err(MdpError::Dimension(format!(
                "policy covers {} states, MDP has {}",
                self.actions.len(),
                m.n_states()
            )));
        }
        if let Some((x, _)) = self.actions.iter().enumerate().find(|(_, &a)| a >= m.n_actions()) {
            return Err(MdpError::InvalidPolicy { x, reason: "action index out of range".into() });
        }
        Ok(())
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }
}

impl Index<usize> for PolicyDet {
    type Output = usize;
    fn index(&self, x: usize) -> &usize {
        &self.actions[x]
    }
}

/// A real-valued function on the state space, `v in R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ValueFn(pub Vec<f64>);

impl ValueFn {
    pub fn zeros(n: usize) -> Self {
        ValueFn(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        ValueFn(vec![c; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &[f64]) -> ValueFn {
        ValueFn(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    /// `self + c * 1`.
    pub fn shift(&self, c: f64) -> ValueFn {
        ValueFn(self.0.iter().map(|v| v + c).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.0)
    }

    pub fn hilbert_seminorm(&self) -> f64 {
        hilbert_seminorm(&self.0)
    }
}

impl Deref for ValueFn {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ValueFn {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ValueFn {
    fn from(v: Vec<f64>) -> Self {
        ValueFn(v)
    }
}

/// `max_x |v(x)|`.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Span seminorm `max_x v(x) - min_x v(x)`; zero on constants.
pub fn hilbert_seminorm(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// A row-stochastic `N x N` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|x| self.row(x).iter().zip(v).map(|(p, v)| p * v).sum())
            .collect()
    }
}

/// Policy-induced reward `r^pi` and kernel `P^pi`.
pub fn apply_policy(m: &Mdp, pi: &PolicyRand) -> Result<(ValueFn, StochasticMatrix), MdpError> {
    pi.check_dims(m)?;
    let n = m.n_states();
    let mut r_pi = vec![0.0; n];
    let mut p_pi = vec![0.0; n * n];
    for x in 0..n {
        for (a, &w) in pi.probs[x].iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            r_pi[x] += w * m.reward(x, a);
            for (out, q) in p_pi[x * n..(x + 1) * n].iter_mut().zip(m.row(x, a)) {
                *out += w * q;
            }
        }
    }
    Ok((ValueFn(r_pi), StochasticMatrix { n, data: p_pi }))
}

/// Draws `y ~ Q(. | x, a)` by inverse CDF over one uniform draw.
pub fn sample_transition<R: Rng + ?Sized>(m: &Mdp, x: usize, a: usize, rng: &mut R) -> usize {
    sample_index(m.row(x, a), rng)
}

pub(crate) fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_support = 0;
    for (y, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_support = y;
            if u < acc {
                return y;
            }
        }
    }
    // rounding left u above the final cumulative sum
    last_support
}
