//! Tabular learning when the model is unknown.
//!
//! Two algorithms are provided:
//!
//! * [`entropic_q_learning`]: model-free Q-learning for the entropic map.
//!   With `w = exp((lambda / alpha) v)` the entropic backup becomes
//!   `w(x) = opt_a { e^{(lambda/alpha) r} E[w(Y)^alpha] }`, which is linear in
//!   the transition model, so a sampled successor gives an unbiased
//!   stochastic-approximation target. `opt` is `min` for `lambda < 0` and
//!   `max` for `lambda > 0`.
//! * [`dyna_q`]: model-based learning for arbitrary prospect maps. A general
//!   map is not linear in the transition model, so a single sampled
//!   successor gives a biased target; instead the agent maintains an
//!   empirical model and backs up the full estimated row.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cli::fmt_float;
use crate::maps::{EntropicMap, MapError, ProspectMap};
use crate::mdp::{sample_index, sample_transition, Mdp, MdpError, PolicyDet, PolicyRand, ValueFn};
use crate::solvers::{evaluate_policy_discounted, value_iteration_discounted, SolveError};

/// Smallest value a w-space entry may take.
pub const W_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("invalid learning configuration: {0}")]
    InvalidConfig(String),
    #[error("operation needs a {expected:?} table")]
    WrongSpace { expected: QSpace },
    #[error("w-space entry ({x}, {a}) = {value} is not a positive finite number")]
    Underflow { x: usize, a: usize, value: f64 },
    #[error("w-space target overflowed at ({x}, {a})")]
    Overflow { x: usize, a: usize },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSpace {
    /// Exponentially transformed entropic values; entries are positive.
    Wspace,
    /// Plain values.
    Vspace,
}

/// Direction of the greedy choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// `exp((lambda/alpha) v)` is decreasing in `v` when `lambda < 0`, so the
    /// best action minimizes `w`.
    pub fn for_lambda(lambda: f64) -> Sense {
        if lambda < 0.0 {
            Sense::Min
        } else {
            Sense::Max
        }
    }

    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Min => a < b,
            Sense::Max => a > b,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Sense::Min => -1.0,
            Sense::Max => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub space: QSpace,
    pub q: Vec<Vec<f64>>,
    /// Number of w-space values clamped up to [`W_FLOOR`].
    pub underflows: u64,
}

impl QTable {
    /// All ones: the image of `v = 0` under the w-transform.
    pub fn wspace(n_states: usize, n_actions: usize) -> Self {
        QTable { space: QSpace::Wspace, q: vec![vec![1.0; n_actions]; n_states], underflows: 0 }
    }

    pub fn vspace(n_states: usize, n_actions: usize) -> Self {
        QTable { space: QSpace::Vspace, q: vec![vec![0.0; n_actions]; n_states], underflows: 0 }
    }

    pub fn n_states(&self) -> usize {
        self.q.len()
    }

    pub fn n_actions(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }

    /// Best action and its entry; ties go to the lowest index.
    pub fn best(&self, x: usize, sense: Sense) -> (usize, f64) {
        let row = &self.q[x];
        let mut arg = 0;
        for a in 1..row.len() {
            if sense.better(row[a], row[arg]) {
                arg = a;
            }
        }
        (arg, row[arg])
    }

    pub fn greedy(&self, sense: Sense) -> PolicyDet {
        PolicyDet::new((0..self.n_states()).map(|x| self.best(x, sense).0).collect())
    }

    fn require(&self, space: QSpace) -> Result<(), LearnError> {
        if self.space != space {
            return Err(LearnError::WrongSpace { expected: space });
        }
        Ok(())
    }
}

fn check_lambda_alpha(lambda: f64, alpha: f64) -> Result<(), LearnError> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(LearnError::InvalidConfig(format!("entropic lambda must be nonzero, got {lambda}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LearnError::InvalidConfig(format!("discount {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// One stochastic-approximation step at `(x, a)` after observing reward `r`
/// and successor `y`:
///
/// `q(x,a) += beta * (e^{(lambda/alpha) r} opt_b q(y,b)^alpha - q(x,a))`
///
/// Targets or results below [`W_FLOOR`] are clamped; each clamped update
/// increments `qt.underflows`.
#[allow(clippy::too_many_arguments)]
pub fn entropic_q_update(
    qt: &mut QTable,
    x: usize,
    a: usize,
    reward: f64,
    y: usize,
    beta: f64,
    lambda: f64,
    alpha: f64,
) -> Result<(), LearnError> {
    qt.require(QSpace::Wspace)?;
    check_lambda_alpha(lambda, alpha)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(LearnError::InvalidConfig(format!("learning rate {beta} outside [0, 1]")));
    }
    let (_, next) = qt.best(y, Sense::for_lambda(lambda));
    let mut target = ((lambda / alpha) * reward).exp() * next.powf(alpha);
    if target.is_infinite() {
        return Err(LearnError::Overflow { x, a });
    }
    let mut clamped = false;
    if !(target >= W_FLOOR) {
        target = W_FLOOR;
        clamped = true;
    }
    let cell = &mut qt.q[x][a];
    let mut updated = *cell + beta * (target - *cell);
    if !(updated >= W_FLOOR) {
        updated = W_FLOOR;
        clamped = true;
    }
    *cell = updated;
    if clamped {
        qt.underflows += 1;
    }
    Ok(())
}

/// `v(x) = (alpha / lambda) log opt_a q(x, a)`.
pub fn q_to_value(qt: &QTable, lambda: f64, alpha: f64) -> Result<ValueFn, LearnError> {
    qt.require(QSpace::Wspace)?;
    check_lambda_alpha(lambda, alpha)?;
    let sense = Sense::for_lambda(lambda);
    (0..qt.n_states())
        .map(|x| {
            let (a, w) = qt.best(x, sense);
            if !(w > 0.0 && w.is_finite()) {
                return Err(LearnError::Underflow { x, a, value: w });
            }
            Ok(alpha / lambda * w.ln())
        })
        .collect::<Result<Vec<_>, _>>()
        .map(ValueFn)
}

/// Exact value iteration in w-space with the true model:
/// `q(x,a) = e^{(lambda/alpha) r(x,a)} sum_y Q(y|x,a) w(y)^alpha`,
/// `w(x) = opt_a q(x,a)`, iterated until the implied values move by less
/// than `eps`.
pub fn w_value_iteration(
    m: &Mdp,
    lambda: f64,
    alpha: f64,
    eps: f64,
    max_iter: usize,
) -> Result<QTable, LearnError> {
    check_lambda_alpha(lambda, alpha)?;
    let sense = Sense::for_lambda(lambda);
    let n = m.n_states();
    let mut qt = QTable::wspace(n, m.n_actions());
    let mut log_w = vec![0.0; n];
    for _ in 0..max_iter {
        let powered: Vec<f64> = log_w.iter().map(|l| (alpha * l).exp()).collect();
        for x in 0..n {
            for a in 0..m.n_actions() {
                let mean: f64 = m.row(x, a).iter().zip(&powered).map(|(p, w)| p * w).sum();
                let q = ((lambda / alpha) * m.reward(x, a)).exp() * mean;
                if !(q > 0.0 && q.is_finite()) {
                    return Err(LearnError::Underflow { x, a, value: q });
                }
                qt.q[x][a] = q;
            }
        }
        let mut change: f64 = 0.0;
        for (x, l) in log_w.iter_mut().enumerate() {
            let next = qt.best(x, sense).1.ln();
            change = change.max((alpha / lambda * (next - *l)).abs());
            *l = next;
        }
        if change < eps {
            return Ok(qt);
        }
    }
    Err(LearnError::Solve(SolveError::InvalidParameter(format!(
        "w-space iteration did not settle within {max_iter} iterations"
    ))))
}

/// Empirical model built from observed transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimate {
    n_states: usize,
    n_actions: usize,
    visits: Vec<u64>,
    counts: Vec<u64>,
    reward_mean: Vec<f64>,
    visited: Vec<(usize, usize)>,
}

impl ModelEstimate {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        ModelEstimate {
            n_states,
            n_actions,
            visits: vec![0; n_states * n_actions],
            counts: vec![0; n_states * n_actions * n_states],
            reward_mean: vec![0.0; n_states * n_actions],
            visited: Vec::new(),
        }
    }

    pub fn observe(&mut self, x: usize, a: usize, y: usize, r: f64) {
        let i = x * self.n_actions + a;
        if self.visits[i] == 0 {
            self.visited.push((x, a));
        }
        self.visits[i] += 1;
        self.counts[i * self.n_states + y] += 1;
        self.reward_mean[i] += (r - self.reward_mean[i]) / self.visits[i] as f64;
    }

    pub fn visits(&self, x: usize, a: usize) -> u64 {
        self.visits[x * self.n_actions + a]
    }

    /// Pairs in order of first visit.
    pub fn visited_pairs(&self) -> &[(usize, usize)] {
        &self.visited
    }

    /// Running mean of observed rewards; 0 before the first visit.
    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.reward_mean[x * self.n_actions + a]
    }

    /// `Q_hat(. | x, a)`, a self-loop before the first visit.
    pub fn row(&self, x: usize, a: usize) -> Vec<f64> {
        let i = x * self.n_actions + a;
        let n = self.visits[i];
        if n == 0 {
            let mut row = vec![0.0; self.n_states];
            row[x] = 1.0;
            return row;
        }
        self.counts[i * self.n_states..(i + 1) * self.n_states]
            .iter()
            .map(|&c| c as f64 / n as f64)
            .collect()
    }

    pub fn to_mdp(&self) -> Result<Mdp, MdpError> {
        let mut data = Vec::with_capacity(self.counts.len());
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                data.extend(self.row(x, a));
            }
        }
        Mdp::new(self.n_states, self.n_actions, data, self.reward_mean.clone())
    }
}

fn backup_estimated<M: ProspectMap + ?Sized>(
    model: &ModelEstimate,
    qt: &mut QTable,
    v: &mut [f64],
    map: &M,
    alpha: f64,
    x: usize,
    a: usize,
) -> Result<(), LearnError> {
    let row = model.row(x, a);
    let value = map.reward_transform(model.reward(x, a)) + alpha * map.evaluate(&row, v, x, a)?;
    qt.q[x][a] = value;
    v[x] = qt.best(x, Sense::Max).1;
    Ok(())
}

/// One dyna-Q step on the transition `(x, a, y, r)`:
///
/// 1. update the model counts and reward mean;
/// 2. `q(x,a) = u(r_hat(x,a)) + alpha R(V | x, a)` on the estimated row,
///    with `V(y) = max_b q(y,b)`;
/// 3. repeat the same backup at `k` pairs drawn uniformly from the pairs
///    visited so far.
#[allow(clippy::too_many_arguments)]
pub fn dyna_q_step<M, R>(
    model: &mut ModelEstimate,
    qt: &mut QTable,
    map: &M,
    transition: (usize, usize, usize, f64),
    alpha: f64,
    k: usize,
    rng: &mut R,
) -> Result<(), LearnError>
where
    M: ProspectMap + ?Sized,
    R: Rng + ?Sized,
{
    qt.require(QSpace::Vspace)?;
    let (x, a, y, r) = transition;
    model.observe(x, a, y, r);
    let mut v: Vec<f64> = (0..qt.n_states()).map(|s| qt.best(s, Sense::Max).1).collect();
    backup_estimated(model, qt, &mut v, map, alpha, x, a)?;
    for _ in 0..k {
        let &(px, pa) = model.visited_pairs().choose(rng).expect("at least one visited pair");
        backup_estimated(model, qt, &mut v, map, alpha, px, pa)?;
    }
    Ok(())
}

/// How the behavior policy picks an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionRule {
    EpsilonGreedy(f64),
    /// Boltzmann distribution over sense-adjusted entries at this temperature.
    Softmax(f64),
}

pub fn select_action<R: Rng + ?Sized>(qt: &QTable, x: usize, rule: ActionRule, sense: Sense, rng: &mut R) -> usize {
    let n_actions = qt.n_actions();
    match rule {
        ActionRule::EpsilonGreedy(eps) => {
            if eps > 0.0 && rng.gen::<f64>() < eps {
                rng.gen_range(0..n_actions)
            } else {
                qt.best(x, sense).0
            }
        }
        ActionRule::Softmax(temperature) => {
            let (_, best) = qt.best(x, sense);
            let weights: Vec<f64> = qt.q[x]
                .iter()
                .map(|q| (sense.sign() * (q - best) / temperature).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            sample_index(&probs, rng)
        }
    }
}

/// Per-pair learning rate `beta = initial / (1 + visits * decay)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRate {
    pub initial: f64,
    pub decay: f64,
}

impl LearningRate {
    /// Rate for the update that follows `visits` earlier visits.
    pub fn at(&self, visits: u64) -> f64 {
        self.initial / (1.0 + visits as f64 * self.decay)
    }
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate { initial: 1.0, decay: 1.0 }
    }
}

/// Exploration schedule; the parameter at 0-based episode `e` is
/// `initial / (1 + e * decay)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Exploration {
    EpsilonGreedy { initial: f64, decay: f64 },
    Softmax { initial: f64, decay: f64 },
}

impl Default for Exploration {
    /// `epsilon = 1 / (1 + 0.095 e)`, about 0.05 in the 200th episode.
    fn default() -> Self {
        Exploration::EpsilonGreedy { initial: 1.0, decay: 0.095 }
    }
}

impl Exploration {
    pub fn rule(&self, episode: usize) -> ActionRule {
        match *self {
            Exploration::EpsilonGreedy { initial, decay } => {
                ActionRule::EpsilonGreedy(initial / (1.0 + episode as f64 * decay))
            }
            Exploration::Softmax { initial, decay } => ActionRule::Softmax(initial / (1.0 + episode as f64 * decay)),
        }
    }

    fn parameter(&self, episode: usize) -> f64 {
        match self.rule(episode) {
            ActionRule::EpsilonGreedy(p) | ActionRule::Softmax(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub discount: f64,
    /// Entropic parameter; only read by Q-learning.
    pub lambda: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub learning_rate: LearningRate,
    pub exploration: Exploration,
    /// Dyna-Q planning backups per real step.
    pub planning_steps: usize,
    pub start_state: usize,
    pub seed: u64,
    /// Tolerance of the exact evaluation of the greedy policy after each
    /// episode.
    pub eval_tolerance: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            discount: 0.9,
            lambda: 0.01,
            episodes: 200,
            steps_per_episode: 250,
            learning_rate: LearningRate::default(),
            exploration: Exploration::default(),
            planning_steps: 0,
            start_state: 0,
            seed: 0,
            eval_tolerance: 1e-8,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self, m: &Mdp) -> Result<(), LearnError> {
        let bad = |msg: String| Err(LearnError::InvalidConfig(msg));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount {} outside (0, 1)", self.discount));
        }
        if self.start_state >= m.n_states() {
            return bad(format!("start state {} out of range", self.start_state));
        }
        let LearningRate { initial, decay } = self.learning_rate;
        if !(initial > 0.0 && initial <= 1.0 && decay >= 0.0) {
            return bad(format!("learning rate {initial}/(1 + n*{decay}) leaves (0, 1]"));
        }
        let (initial, decay) = match self.exploration {
            Exploration::EpsilonGreedy { initial, decay } => {
                if !(0.0..=1.0).contains(&initial) {
                    return bad(format!("epsilon {initial} outside [0, 1]"));
                }
                (initial, decay)
            }
            Exploration::Softmax { initial, decay } => {
                if !(initial > 0.0) {
                    return bad(format!("softmax temperature {initial} must be positive"));
                }
                (initial, decay)
            }
        };
        if !(decay >= 0.0 && initial.is_finite()) {
            return bad("exploration decay must be nonnegative".into());
        }
        if !(self.eval_tolerance > 0.0) {
            return bad("eval_tolerance must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based.
    pub episode: usize,
    /// Start-state value of the greedy policy, evaluated exactly.
    pub v1: f64,
    pub abs_error: f64,
    /// Epsilon or softmax temperature used during the episode.
    pub epsilon: f64,
    /// Cumulative environment steps.
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LearnTrace {
    pub records: Vec<TraceRecord>,
}

impl LearnTrace {
    pub const CSV_HEADER: &'static str = "episode,v1,abs_error,epsilon,steps";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.episode,
                fmt_float(r.v1),
                fmt_float(r.abs_error),
                fmt_float(r.epsilon),
                r.steps
            ));
        }
        out
    }

    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.abs_error)
    }

    /// Episode-wise mean over traces of equal length.
    pub fn mean(traces: &[LearnTrace]) -> LearnTrace {
        let Some(first) = traces.first() else {
            return LearnTrace::default();
        };
        let k = traces.len() as f64;
        let records = (0..first.records.len())
            .map(|i| {
                let avg = |f: fn(&TraceRecord) -> f64| traces.iter().map(|t| f(&t.records[i])).sum::<f64>() / k;
                TraceRecord {
                    episode: first.records[i].episode,
                    v1: avg(|r| r.v1),
                    abs_error: avg(|r| r.abs_error),
                    epsilon: avg(|r| r.epsilon),
                    steps: first.records[i].steps,
                }
            })
            .collect();
        LearnTrace { records }
    }
}

/// `v_1^*`: the optimal start-state value under `map`, by value iteration on
/// the true model.
pub fn optimal_start_value<M: ProspectMap + ?Sized>(m: &Mdp, map: &M, cfg: &LearnConfig) -> Result<f64, LearnError> {
    let vi = value_iteration_discounted(
        m,
        map,
        cfg.discount,
        &vec![0.0; m.n_states()],
        cfg.eval_tolerance * (1.0 - cfg.discount),
        crate::solvers::DEFAULT_MAX_ITER_DISCOUNTED,
    )?;
    Ok(vi.value[cfg.start_state])
}

/// Exact start-state value of greedy policies, remembering the last one
/// since late in learning the greedy policy rarely changes.
struct GreedyEvaluator<'a, M: ?Sized> {
    m: &'a Mdp,
    map: &'a M,
    cfg: &'a LearnConfig,
    last: Option<(PolicyDet, f64)>,
}

impl<'a, M: ProspectMap + ?Sized> GreedyEvaluator<'a, M> {
    fn new(m: &'a Mdp, map: &'a M, cfg: &'a LearnConfig) -> Self {
        GreedyEvaluator { m, map, cfg, last: None }
    }

    fn start_value(&mut self, f: PolicyDet) -> Result<f64, LearnError> {
        if let Some((prev, v1)) = &self.last {
            if *prev == f {
                return Ok(*v1);
            }
        }
        let pi = PolicyRand::from_det(&f, self.m.n_actions());
        let v = evaluate_policy_discounted(
            self.m,
            self.map,
            self.cfg.discount,
            &pi,
            self.cfg.eval_tolerance * (1.0 - self.cfg.discount),
            crate::solvers::DEFAULT_MAX_ITER_DISCOUNTED,
        )?;
        let v1 = v[self.cfg.start_state];
        self.last = Some((f, v1));
        Ok(v1)
    }
}

/// Episodic entropic Q-learning on the simulator `m`.
///
/// Every episode restarts from `cfg.start_state`; after each episode the
/// greedy policy is evaluated exactly on `m` and compared with `v_star`.
pub fn entropic_q_learning(m: &Mdp, cfg: &LearnConfig, v_star: f64) -> Result<(QTable, LearnTrace), LearnError> {
    cfg.validate(m)?;
    check_lambda_alpha(cfg.lambda, cfg.discount)?;
    let map = EntropicMap::new(cfg.lambda)?;
    let sense = Sense::for_lambda(cfg.lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut qt = QTable::wspace(m.n_states(), m.n_actions());
    let mut evaluator = GreedyEvaluator::new(m, &map, cfg);
    let mut visits = vec![0u64; m.n_states() * m.n_actions()];
    let mut trace = LearnTrace::default();
    let mut steps = 0;
    for episode in 0..cfg.episodes {
        let rule = cfg.exploration.rule(episode);
        let mut x = cfg.start_state;
        for _ in 0..cfg.steps_per_episode {
            let a = select_action(&qt, x, rule, sense, &mut rng);
            let y = sample_transition(m, x, a, &mut rng);
            let n = &mut visits[x * m.n_actions() + a];
            let beta = cfg.learning_rate.at(*n);
            *n += 1;
            entropic_q_update(&mut qt, x, a, m.reward(x, a), y, beta, cfg.lambda, cfg.discount)?;
            x = y;
        }
        steps += cfg.steps_per_episode;
        let v1 = evaluator.start_value(qt.greedy(sense))?;
        trace.records.push(TraceRecord {
            episode: episode + 1,
            v1,
            abs_error: (v1 - v_star).abs(),
            epsilon: cfg.exploration.parameter(episode),
            steps,
        });
    }
    Ok((qt, trace))
}

/// Episodic dyna-Q with prospect map `map` on the simulator `m`.
pub fn dyna_q<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    cfg: &LearnConfig,
    v_star: f64,
) -> Result<(QTable, LearnTrace), LearnError> {
    cfg.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut qt = QTable::vspace(m.n_states(), m.n_actions());
    let mut model = ModelEstimate::new(m.n_states(), m.n_actions());
    let mut evaluator = GreedyEvaluator::new(m, map, cfg);
    let mut trace = LearnTrace::default();
    let mut steps = 0;
    for episode in 0..cfg.episodes {
        let rule = cfg.exploration.rule(episode);
        let mut x = cfg.start_state;
        for _ in 0..cfg.steps_per_episode {
            let a = select_action(&qt, x, rule, Sense::Max, &mut rng);
            let y = sample_transition(m, x, a, &mut rng);
            dyna_q_step(&mut model, &mut qt, map, (x, a, y, m.reward(x, a)), cfg.discount, cfg.planning_steps, &mut rng)?;
            x = y;
        }
        steps += cfg.steps_per_episode;
        let v1 = evaluator.start_value(qt.greedy(Sense::Max))?;
        trace.records.push(TraceRecord {
            episode: episode + 1,
            v1,
            abs_error: (v1 - v_star).abs(),
            epsilon: cfg.exploration.parameter(episode),
            steps,
        });
    }
    Ok((qt, trace))
}

/// Runs `run` for `trials` independent seeds `cfg.seed, cfg.seed + 1, ...`
/// in parallel. Results come back in seed order.
pub fn run_trials<F, T>(cfg: &LearnConfig, trials: usize, run: F) -> Result<Vec<T>, LearnError>
where
    F: Fn(&LearnConfig) -> Result<T, LearnError> + Sync,
    T: Send,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = LearnConfig { seed: cfg.seed.wrapping_add(i), ..cfg.clone() };
            run(&cfg)
        })
        .collect()
}
