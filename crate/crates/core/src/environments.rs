//! The two experimental MDPs (a sequential betting game and a grid world)
//! and a trajectory simulator.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{sample_index, sample_transition, Mdp, MdpError, PolicyDet, PolicyRand};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Sequential betting game: a gain-stage bet followed by a loss-stage bet,
/// repeated forever.
///
/// State layout:
///
/// | state | meaning | actions |
/// |---|---|---|
/// | 0 | gain-stage decision | bet: to 1 w.p. `win_prob`, else 2; no: to 2, pays `safe_gain` |
/// | 1 | won the bet | pays `win_amount`, to 3 |
/// | 2 | no win | to 3 |
/// | 3 | loss-stage decision | bet: to 4 w.p. `loss_prob`, else 5; no: to 5, pays `-safe_loss` |
/// | 4 | lost the bet | pays `-loss_amount`, to 0 |
/// | 5 | no loss | to 0 |
///
/// Outcome states ignore the action. The certain payoff of "no" is paid on
/// the decision itself, one step before a bet would pay out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BettingGameSpec {
    pub win_amount: f64,
    pub win_prob: f64,
    pub safe_gain: f64,
    pub loss_amount: f64,
    pub loss_prob: f64,
    pub safe_loss: f64,
    pub discount: f64,
}

impl Default for BettingGameSpec {
    fn default() -> Self {
        BettingGameSpec {
            win_amount: 100.0,
            win_prob: 0.05,
            safe_gain: 5.0,
            loss_amount: 100.0,
            loss_prob: 0.05,
            safe_loss: 5.0,
            discount: 0.99,
        }
    }
}

pub mod betting {
    pub const GAIN_DECISION: usize = 0;
    pub const LOSS_DECISION: usize = 3;
    pub const DECISION_STATES: [usize; 2] = [GAIN_DECISION, LOSS_DECISION];
    pub const BET: usize = 0;
    pub const NO: usize = 1;
    pub const N_STATES: usize = 6;

    pub fn action_label(a: usize) -> &'static str {
        if a == BET {
            "bet"
        } else {
            "no"
        }
    }
}

impl BettingGameSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        for (name, p) in [("win_prob", self.win_prob), ("loss_prob", self.loss_prob)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(EnvError::InvalidSpec(format!("{name} = {p} outside (0, 1)")));
            }
        }
        for (name, v) in [
            ("win_amount", self.win_amount),
            ("safe_gain", self.safe_gain),
            ("loss_amount", self.loss_amount),
            ("safe_loss", self.safe_loss),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnvError::InvalidSpec(format!("{name} = {v} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(EnvError::InvalidSpec(format!("discount {} outside [0, 1)", self.discount)));
        }
        Ok(())
    }
}

pub fn build_betting_game(spec: &BettingGameSpec) -> Result<Mdp, EnvError> {
    use betting::*;
    spec.validate()?;
    let n = N_STATES;
    let point = |y: usize| {
        let mut row = vec![0.0; n];
        row[y] = 1.0;
        row
    };
    let gamble = |hit: usize, miss: usize, p: f64| {
        let mut row = vec![0.0; n];
        row[hit] = p;
        row[miss] = 1.0 - p;
        row
    };
    let transitions = vec![
        vec![gamble(1, 2, spec.win_prob), point(2)],
        vec![point(3), point(3)],
        vec![point(3), point(3)],
        vec![gamble(4, 5, spec.loss_prob), point(5)],
        vec![point(0), point(0)],
        vec![point(0), point(0)],
    ];
    let rewards = vec![
        vec![0.0, spec.safe_gain],
        vec![spec.win_amount; 2],
        vec![0.0; 2],
        vec![0.0, -spec.safe_loss],
        vec![-spec.loss_amount; 2],
        vec![0.0; 2],
    ];
    Ok(Mdp::from_nested(transitions, rewards)?)
}

/// Comma-separated actions at the two decision states, e.g. `"bet,no"`.
pub fn betting_policy_string(f: &PolicyDet) -> String {
    betting::DECISION_STATES
        .iter()
        .map(|&x| betting::action_label(f[x]))
        .collect::<Vec<_>>()
        .join(",")
}

/// 4-connected grid world with a small reward in the upper-right corner, a
/// large one in the lower-left corner and sticky danger cells.
///
/// States are numbered row-major from the upper-left cell (`row * side +
/// col`, row 0 at the top). Rewards are paid on entering a cell, including
/// re-entering it by bumping into a wall or by failing to escape a danger
/// cell, and are folded into `r(x, a) = sum_y Q(y|x,a) reward(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridWorldSpec {
    pub side: usize,
    pub r_small: f64,
    pub r_large: f64,
    pub r_danger: f64,
    /// `[row, col]` pairs.
    pub danger_cells: Vec<[usize; 2]>,
    /// Probability that a move out of a danger cell succeeds.
    pub escape_prob: f64,
    pub start: [usize; 2],
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        GridWorldSpec {
            side: 11,
            r_small: 3.0,
            r_large: 15.0,
            r_danger: -5.0,
            danger_cells: default_danger_cells(11),
            escape_prob: 0.5,
            start: [0, 0],
        }
    }
}

/// Cells at Chebyshev distance 1 or 2 from the lower-left corner: a
/// two-cell-thick band that every path to the large reward must cross.
pub fn default_danger_cells(side: usize) -> Vec<[usize; 2]> {
    let corner = side - 1;
    let mut cells = Vec::new();
    for row in corner.saturating_sub(2)..side {
        for col in 0..3.min(side) {
            let d = (corner - row).max(col);
            if (1..=2).contains(&d) {
                cells.push([row, col]);
            }
        }
    }
    cells
}

pub mod grid {
    pub const LEFT: usize = 0;
    pub const RIGHT: usize = 1;
    pub const UP: usize = 2;
    pub const DOWN: usize = 3;
    pub const N_ACTIONS: usize = 4;

    pub fn arrow(a: usize) -> char {
        ['<', '>', '^', 'v'][a]
    }
}

impl GridWorldSpec {
    pub fn n_states(&self) -> usize {
        self.side * self.side
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn coords(&self, x: usize) -> [usize; 2] {
        [x / self.side, x % self.side]
    }

    pub fn start_state(&self) -> usize {
        self.state(self.start[0], self.start[1])
    }

    pub fn small_corner(&self) -> [usize; 2] {
        [0, self.side - 1]
    }

    pub fn large_corner(&self) -> [usize; 2] {
        [self.side - 1, 0]
    }

    pub fn is_danger(&self, cell: [usize; 2]) -> bool {
        self.danger_cells.contains(&cell)
    }

    pub fn cell_reward(&self, cell: [usize; 2]) -> f64 {
        if cell == self.large_corner() {
            self.r_large
        } else if cell == self.small_corner() {
            self.r_small
        } else if self.is_danger(cell) {
            self.r_danger
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.side < 2 {
            return Err(EnvError::InvalidSpec("grid side must be at least 2".into()));
        }
        if !(self.escape_prob > 0.0 && self.escape_prob <= 1.0) {
            return Err(EnvError::InvalidSpec(format!("escape_prob {} outside (0, 1]", self.escape_prob)));
        }
        for (name, r) in [("r_small", self.r_small), ("r_large", self.r_large), ("r_danger", self.r_danger)] {
            if !r.is_finite() {
                return Err(EnvError::InvalidSpec(format!("{name} is not finite")));
            }
        }
        let inside = |c: [usize; 2]| c[0] < self.side && c[1] < self.side;
        if !inside(self.start) {
            return Err(EnvError::InvalidSpec(format!("start {:?} outside the grid", self.start)));
        }
        for &c in &self.danger_cells {
            if !inside(c) {
                return Err(EnvError::InvalidSpec(format!("danger cell {c:?} outside the grid")));
            }
            if c == self.start || c == self.small_corner() || c == self.large_corner() {
                return Err(EnvError::InvalidSpec(format!(
                    "danger cell {c:?} overlaps the start or a reward corner"
                )));
            }
        }
        Ok(())
    }

    fn target(&self, cell: [usize; 2], a: usize) -> [usize; 2] {
        let [r, c] = cell;
        match a {
            grid::LEFT => [r, c.saturating_sub(1)],
            grid::RIGHT => [r, (c + 1).min(self.side - 1)],
            grid::UP => [r.saturating_sub(1), c],
            _ => [(r + 1).min(self.side - 1), c],
        }
    }

    /// One line per grid row, one arrow per cell.
    pub fn render_policy(&self, f: &PolicyDet) -> String {
        let mut out = String::new();
        for row in 0..self.side {
            let line: String = (0..self.side).map(|col| grid::arrow(f[self.state(row, col)])).collect();
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

pub fn build_grid_world(spec: &GridWorldSpec) -> Result<Mdp, EnvError> {
    spec.validate()?;
    let n = spec.n_states();
    let mut transitions = Vec::with_capacity(n * grid::N_ACTIONS * n);
    let mut rewards = Vec::with_capacity(n * grid::N_ACTIONS);
    for x in 0..n {
        let cell = spec.coords(x);
        let success = if spec.is_danger(cell) { spec.escape_prob } else { 1.0 };
        for a in 0..grid::N_ACTIONS {
            let mut row = vec![0.0; n];
            let to = spec.target(cell, a);
            row[spec.state(to[0], to[1])] += success;
            row[x] += 1.0 - success;
            let r = success * spec.cell_reward(to) + (1.0 - success) * spec.cell_reward(cell);
            transitions.extend(row);
            rewards.push(r);
        }
    }
    Ok(Mdp::new(n, grid::N_ACTIONS, transitions, rewards)?)
}

/// A simulated path of length `T` together with its summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `S_T`, the undiscounted sum of the `T` rewards.
    pub total: f64,
    /// `S_T / T`.
    pub mean: f64,
    /// `sum_t alpha^t r_t`.
    pub discounted: f64,
}

/// Rolls `T` steps of the chain from `start` under `pi`.
///
/// `states[t]` is the state in which `actions[t]` was taken and
/// `rewards[t] = r(states[t], actions[t])`.
pub fn simulate<R: Rng + ?Sized>(
    m: &Mdp,
    pi: &PolicyRand,
    start: usize,
    horizon: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Trajectory, EnvError> {
    if horizon == 0 {
        return Err(EnvError::InvalidSpec("horizon must be at least 1".into()));
    }
    if start >= m.n_states() {
        return Err(EnvError::InvalidSpec(format!("start state {start} out of range")));
    }
    if pi.n_states() != m.n_states() || pi.probs().iter().any(|r| r.len() != m.n_actions()) {
        return Err(MdpError::Dimension("policy does not match the MDP".into()).into());
    }
    let mut states = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut x = start;
    let mut discounted = 0.0;
    let mut weight = 1.0;
    for _ in 0..horizon {
        let a = sample_index(&pi.probs()[x], rng);
        let r = m.reward(x, a);
        states.push(x);
        actions.push(a);
        rewards.push(r);
        discounted += weight * r;
        weight *= alpha;
        x = sample_transition(m, x, a, rng);
    }
    let total: f64 = rewards.iter().sum();
    Ok(Trajectory { states, actions, rewards, total, mean: total / horizon as f64, discounted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn betting_game_is_valid_and_cycles_in_four() {
        let m = build_betting_game(&BettingGameSpec::default()).unwrap();
        validate_mdp(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let pi = crate::axioms::random_policy(&mut rng, 6, 2);
            let t = simulate(&m, &pi, 0, 9, 1.0, &mut rng).unwrap();
            assert_eq!(t.states[4], 0);
            assert_eq!(t.states[8], 0);
            assert!(t.states[1..4].iter().all(|&s| s != 0));
        }
    }

    #[test]
    fn betting_policy_labels() {
        let f = PolicyDet::new(vec![0, 0, 0, 1, 0, 0]);
        assert_eq!(betting_policy_string(&f), "bet,no");
    }

    #[test]
    fn betting_spec_from_json_with_defaults() {
        let s: BettingGameSpec = serde_json::from_str(r#"{"win_prob": 0.1}"#).unwrap();
        assert_eq!(s.win_prob, 0.1);
        assert_eq!(s.win_amount, 100.0);
        assert!(serde_json::from_str::<BettingGameSpec>(r#"{"win_prob": 1.5}"#).unwrap().validate().is_err());
    }

    #[test]
    fn default_danger_band() {
        let cells = default_danger_cells(11);
        assert_eq!(cells.len(), 8);
        assert!(cells.contains(&[9, 0]) && cells.contains(&[8, 2]) && cells.contains(&[10, 2]));
        assert!(!cells.contains(&[10, 0]));
        GridWorldSpec::default().validate().unwrap();
    }

    #[test]
    fn grid_world_shape_and_boundaries() {
        let spec = GridWorldSpec::default();
        let m = build_grid_world(&spec).unwrap();
        assert_eq!((m.n_states(), m.n_actions()), (121, 4));
        // upper-left corner: left and up bump the wall
        assert_eq!(m.prob(0, grid::LEFT, 0), 1.0);
        assert_eq!(m.prob(0, grid::UP, 0), 1.0);
        assert_eq!(m.prob(0, grid::RIGHT, 1), 1.0);
        assert_eq!(m.prob(0, grid::DOWN, 11), 1.0);
        // entering the large corner from above
        let above = spec.state(9, 0);
        assert_eq!(m.prob(above, grid::DOWN, spec.state(10, 0)), 0.5);
        assert_eq!(m.prob(above, grid::DOWN, above), 0.5);
        assert_eq!(m.reward(above, grid::DOWN), 0.5 * 15.0 + 0.5 * -5.0);
        // sitting in the small corner and bumping the wall keeps paying
        assert_eq!(m.reward(spec.state(0, 10), grid::UP), 3.0);
    }

    #[test]
    fn unit_escape_is_deterministic() {
        let spec = GridWorldSpec { escape_prob: 1.0, ..GridWorldSpec::default() };
        let m = build_grid_world(&spec).unwrap();
        for x in 0..m.n_states() {
            for a in 0..4 {
                assert_eq!(m.row(x, a).iter().filter(|&&p| p == 1.0).count(), 1);
            }
        }
    }

    #[test]
    fn rejects_bad_grid_specs() {
        let bad = GridWorldSpec { danger_cells: vec![[0, 0]], ..GridWorldSpec::default() };
        assert!(build_grid_world(&bad).is_err());
        let bad = GridWorldSpec { danger_cells: vec![[11, 3]], ..GridWorldSpec::default() };
        assert!(build_grid_world(&bad).is_err());
        let bad = GridWorldSpec { escape_prob: 0.0, ..GridWorldSpec::default() };
        assert!(build_grid_world(&bad).is_err());
        let s: GridWorldSpec = serde_json::from_str(r#"{"danger_cells": [[5, 5]], "escape_prob": 0.3}"#).unwrap();
        assert_eq!(s.danger_cells, vec![[5, 5]]);
        build_grid_world(&s).unwrap();
    }

    #[test]
    fn deterministic_chain_return() {
        let m = Mdp::from_nested(vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]], vec![vec![1.0], vec![2.0]])
            .unwrap();
        let pi = PolicyRand::uniform(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = simulate(&m, &pi, 0, 4, 0.5, &mut rng).unwrap();
        assert_eq!(t.states, vec![0, 1, 0, 1]);
        assert_eq!(t.total, 6.0);
        assert_eq!(t.mean, 1.5);
        assert_eq!(t.discounted, 1.0 + 1.0 + 0.25 + 0.25);
        assert!(simulate(&m, &pi, 0, 0, 0.5, &mut rng).is_err());
    }
}
