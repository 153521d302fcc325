//! Dynamic-programming solvers for the finite-stage, discounted and
//! average prospect criteria.
//!
//! All backups have the form `max_a { u(r(x,a)) + d * R(v | x, a) }` where
//! `u` is the map's reward transform (identity except for probability
//! weighting) and `d` is the discount (1 for the finite-stage and average
//! criteria). Ties in the maximum go to the lowest action index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maps::{prospect, prospect_policy, MapError, ProspectMap};
use crate::mdp::{apply_policy, hilbert_seminorm, sup_norm, Mdp, MdpError, PolicyDet, PolicyRand, ValueFn};

pub const DEFAULT_MAX_ITER_DISCOUNTED: usize = 100_000;
pub const DEFAULT_MAX_ITER_AVERAGE: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("value iteration stopped after {} iterations with residual {}", .0.iterations, .0.residuals.last().copied().unwrap_or(f64::NAN))]
    NotConverged(Box<SolveResult>),
    #[error(
        "average value iteration stopped after {} iterations with span residual {}; \
         the span contraction condition may fail for this chain (periodic?). \
         Probe it with estimate_policy_contraction or apply the aperiodicity transform",
        .0.iterations,
        .0.residuals.last().copied().unwrap_or(f64::NAN)
    )]
    AverageNotConverged(Box<AverageSolveResult>),
    #[error("policy evaluation stopped with residual {residual}")]
    EvaluationNotConverged { value: ValueFn, residual: f64 },
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Converged discounted value function and greedy policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub value: ValueFn,
    pub policy: PolicyDet,
    pub iterations: usize,
    /// `|v_{t+1} - v_t|_inf` per iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// `eps * alpha / (1 - alpha)`: distance to the optimal value implied by
    /// the final residual.
    pub optimality_bound: f64,
}

/// Gain-bias pair solving `rho + h = max_a { r + R(h) }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageSolveResult {
    pub gain: f64,
    /// Bias normalized so that `h[0] = 0`.
    pub bias: ValueFn,
    pub policy: PolicyDet,
    pub iterations: usize,
    /// Span seminorm of `v_{t+1} - v_t` per iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// `[min, max]` of the final difference vector; brackets the gain.
    pub gain_bounds: [f64; 2],
    /// `|F(h) - h - rho|_inf`.
    pub apoe_residual: f64,
}

/// Stage values and decision rules of the finite-horizon problem.
///
/// Both vectors are indexed by stage `t = 0..=T`; `stage_values[0]` is the
/// optimal `T`-stage prospect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteStageResult {
    pub stage_values: Vec<ValueFn>,
    pub stage_policies: Vec<PolicyDet>,
}

impl FiniteStageResult {
    pub fn horizon(&self) -> usize {
        self.stage_values.len() - 1
    }

    pub fn optimal_value(&self) -> &ValueFn {
        &self.stage_values[0]
    }
}

fn check_discount(alpha: f64) -> Result<(), SolveError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(SolveError::InvalidParameter(format!("discount {alpha} outside [0, 1)")));
    }
    Ok(())
}

fn check_tolerance(eps: f64) -> Result<(), SolveError> {
    if !(eps > 0.0) {
        return Err(SolveError::InvalidParameter(format!("tolerance {eps} must be positive")));
    }
    Ok(())
}

fn check_len(m: &Mdp, v: &[f64]) -> Result<(), SolveError> {
    if v.len() != m.n_states() {
        return Err(SolveError::InvalidParameter(format!(
            "initial value has {} entries, MDP has {} states",
            v.len(),
            m.n_states()
        )));
    }
    Ok(())
}

/// `max_a { u(r(x,a)) + discount * R(v|x,a) }` with its argmax.
pub(crate) fn backup<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    discount: f64,
    v: &[f64],
) -> Result<(ValueFn, PolicyDet), MapError> {
    let n = m.n_states();
    let mut out = Vec::with_capacity(n);
    let mut policy = Vec::with_capacity(n);
    for x in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for a in 0..m.n_actions() {
            let q = map.reward_transform(m.reward(x, a)) + discount * prospect(map, m, v, x, a)?;
            if q > best {
                best = q;
                arg = a;
            }
        }
        out.push(best);
        policy.push(arg);
    }
    Ok((ValueFn(out), PolicyDet::new(policy)))
}

/// Backward recursion `V_T = max_a u(r)`, `V_t = max_a { u(r) + R(V_{t+1}) }`.
pub fn finite_stage_dp<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    horizon: usize,
) -> Result<FiniteStageResult, SolveError> {
    let n = m.n_states();
    let mut values = Vec::with_capacity(horizon + 1);
    let mut policies = Vec::with_capacity(horizon + 1);

    let mut last = Vec::with_capacity(n);
    let mut last_policy = Vec::with_capacity(n);
    for x in 0..n {
        let (arg, best) = (0..m.n_actions())
            .map(|a| (a, map.reward_transform(m.reward(x, a))))
            .fold((0, f64::NEG_INFINITY), |acc, (a, r)| if r > acc.1 { (a, r) } else { acc });
        last.push(best);
        last_policy.push(arg);
    }
    values.push(ValueFn(last));
    policies.push(PolicyDet::new(last_policy));

    for _ in 0..horizon {
        let next = values.last().expect("nonempty");
        let (v, f) = backup(m, map, 1.0, next)?;
        values.push(v);
        policies.push(f);
    }
    values.reverse();
    policies.reverse();
    Ok(FiniteStageResult { stage_values: values, stage_policies: policies })
}

/// One discounted backup `F_alpha(v)` and its greedy rule.
pub fn bellman_discounted<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    alpha: f64,
    v: &[f64],
) -> Result<(ValueFn, PolicyDet), SolveError> {
    check_discount(alpha)?;
    check_len(m, v)?;
    Ok(backup(m, map, alpha, v)?)
}

/// Iterates `v_{t+1} = F_alpha(v_t)` until `|v_{t+1} - v_t|_inf < eps`.
///
/// `F_alpha` is an `alpha`-contraction in the sup norm for every prospect
/// map, so the iteration converges geometrically from any start.
pub fn value_iteration_discounted<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    alpha: f64,
    v0: &[f64],
    eps: f64,
    max_iter: usize,
) -> Result<SolveResult, SolveError> {
    check_discount(alpha)?;
    check_tolerance(eps)?;
    check_len(m, v0)?;
    let mut v = ValueFn(v0.to_vec());
    let mut residuals = Vec::new();
    let mut policy = PolicyDet::new(vec![0; m.n_states()]);
    for it in 1..=max_iter {
        let (next, greedy) = backup(m, map, alpha, &v)?;
        let res = sup_norm(&next.sub(&v));
        residuals.push(res);
        v = next;
        policy = greedy;
        if res < eps {
            return Ok(SolveResult {
                value: v,
                policy,
                iterations: it,
                residuals,
                converged: true,
                optimality_bound: eps * alpha / (1.0 - alpha),
            });
        }
    }
    let last = residuals.last().copied().unwrap_or(f64::INFINITY);
    Err(SolveError::NotConverged(Box::new(SolveResult {
        value: v,
        policy,
        iterations: max_iter,
        residuals,
        converged: false,
        optimality_bound: last * alpha / (1.0 - alpha),
    })))
}

/// Discounted total prospect `J_alpha(pi)` of a stationary policy, by
/// iterating `v <- r^pi + alpha R^pi(v)` from zero.
pub fn evaluate_policy_discounted<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    alpha: f64,
    pi: &PolicyRand,
    eps: f64,
    max_iter: usize,
) -> Result<ValueFn, SolveError> {
    check_discount(alpha)?;
    check_tolerance(eps)?;
    let transformed = m.with_rewards(
        (0..m.n_states())
            .flat_map(|x| (0..m.n_actions()).map(move |a| (x, a)))
            .map(|(x, a)| map.reward_transform(m.reward(x, a)))
            .collect(),
    )?;
    let (r_pi, _) = apply_policy(&transformed, pi)?;
    let mut v = ValueFn::zeros(m.n_states());
    let mut res = f64::INFINITY;
    for _ in 0..max_iter {
        let lifted = prospect_policy(map, m, &v, pi)?;
        let next = ValueFn(r_pi.iter().zip(lifted.iter()).map(|(r, p)| r + alpha * p).collect());
        res = sup_norm(&next.sub(&v));
        v = next;
        if res < eps {
            return Ok(v);
        }
    }
    Err(SolveError::EvaluationNotConverged { value: v, residual: res })
}

/// One undiscounted backup `F(v) = max_a { r + R(v) }`.
pub fn bellman_average<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    v: &[f64],
) -> Result<(ValueFn, PolicyDet), SolveError> {
    check_len(m, v)?;
    Ok(backup(m, map, 1.0, v)?)
}

/// Relative value iteration for the average prospect.
///
/// Iterates `v_{t+1} = F(v_t)` (renormalized so `v[0] = 0`, which the
/// translation axiom makes harmless) until the span of `v_{t+1} - v_t` drops
/// below `eps`. The gain is the midpoint of the final difference vector and
/// the bias is the final iterate.
pub fn value_iteration_average<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    v0: &[f64],
    eps: f64,
    max_iter: usize,
) -> Result<AverageSolveResult, SolveError> {
    check_tolerance(eps)?;
    check_len(m, v0)?;
    let mut v = ValueFn(v0.to_vec());
    let mut residuals = Vec::new();
    let mut bounds = [f64::NAN; 2];
    for it in 1..=max_iter {
        let (next, _) = backup(m, map, 1.0, &v)?;
        let delta = next.sub(&v);
        let res = hilbert_seminorm(&delta);
        residuals.push(res);
        bounds = [
            delta.iter().cloned().fold(f64::INFINITY, f64::min),
            delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ];
        v = next.shift(-next[0]);
        if res < eps {
            return finish_average(m, map, v, residuals, bounds, it, true).map_err(Into::into);
        }
    }
    let partial = finish_average(m, map, v, residuals, bounds, max_iter, false)?;
    Err(SolveError::AverageNotConverged(Box::new(partial)))
}

fn finish_average<M: ProspectMap + ?Sized>(
    m: &Mdp,
    map: &M,
    bias: ValueFn,
    residuals: Vec<f64>,
    bounds: [f64; 2],
    iterations: usize,
    converged: bool,
) -> Result<AverageSolveResult, MapError> {
    let gain = 0.5 * (bounds[0] + bounds[1]);
    let (fh, policy) = backup(m, map, 1.0, &bias)?;
    let apoe_residual = sup_norm(&fh.sub(&bias.shift(gain)));
    Ok(AverageSolveResult {
        gain,
        bias,
        policy,
        iterations,
        residuals,
        converged,
        gain_bounds: bounds,
        apoe_residual,
    })
}

/// Mixes every row with a self-loop: `Q' = (1 - kappa) Q + kappa e_x`.
///
/// Removes periodicity so span-seminorm value iteration can converge. For
/// the expectation map the optimal average policy is unchanged; for other
/// maps this is only a regularizing heuristic.
pub fn aperiodicity_transform(m: &Mdp, kappa: f64) -> Result<Mdp, SolveError> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(SolveError::InvalidParameter(format!("aperiodicity weight {kappa} outside [0, 1)")));
    }
    let n = m.n_states();
    let mut data = Vec::with_capacity(n * m.n_actions() * n);
    let mut rewards = Vec::with_capacity(n * m.n_actions());
    for x in 0..n {
        for a in 0..m.n_actions() {
            data.extend(
                m.row(x, a)
                    .iter()
                    .enumerate()
                    .map(|(y, p)| (1.0 - kappa) * p + if y == x { kappa } else { 0.0 }),
            );
            rewards.push(m.reward(x, a));
        }
    }
    Ok(Mdp::new(n, m.n_actions(), data, rewards)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{CvarMap, EntropicMap, ExpectationMap, MinimaxMap};

    fn single(r: f64) -> Mdp {
        Mdp::from_nested(vec![vec![vec![1.0]]], vec![vec![r]]).unwrap()
    }

    fn two_cycle() -> Mdp {
        Mdp::from_nested(vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]], vec![vec![0.0], vec![2.0]])
            .unwrap()
    }

    fn sample() -> Mdp {
        Mdp::from_nested(
            vec![
                vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.2, 0.8]],
                vec![vec![0.1, 0.6, 0.3], vec![1.0, 0.0, 0.0]],
                vec![vec![0.3, 0.3, 0.4], vec![0.0, 0.0, 1.0]],
            ],
            vec![vec![1.0, 0.0], vec![0.5, 2.0], vec![-1.0, 0.3]],
        )
        .unwrap()
    }

    #[test]
    fn horizon_zero_is_best_immediate_reward() {
        let r = finite_stage_dp(&sample(), &ExpectationMap, 0).unwrap();
        assert_eq!(r.stage_values.len(), 1);
        assert_eq!(r.optimal_value().0, vec![1.0, 2.0, 0.3]);
        assert_eq!(r.stage_policies[0].actions(), &[0, 1, 1]);
    }

    #[test]
    fn undiscounted_sum_on_single_state() {
        let r = finite_stage_dp(&single(1.0), &ExpectationMap, 3).unwrap();
        assert_eq!(r.horizon(), 3);
        assert_eq!(r.optimal_value()[0], 4.0);
        assert_eq!(r.stage_values[3][0], 1.0);
    }

    #[test]
    fn zero_value_backup_is_best_reward() {
        let (fv, f) = bellman_discounted(&sample(), &CvarMap::new(0.3).unwrap(), 0.9, &[0.0; 3]).unwrap();
        assert_eq!(fv.0, vec![1.0, 2.0, 0.3]);
        assert_eq!(f.actions(), &[0, 1, 1]);
    }

    #[test]
    fn zero_discount_ignores_value() {
        let a = bellman_discounted(&sample(), &ExpectationMap, 0.0, &[5.0, -3.0, 9.0]).unwrap();
        let b = bellman_discounted(&sample(), &ExpectationMap, 0.0, &[0.0; 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let m = Mdp::from_nested(vec![vec![vec![1.0], vec![1.0], vec![1.0]]], vec![vec![1.0, 3.0, 3.0]])
            .unwrap();
        let (_, f) = bellman_discounted(&m, &ExpectationMap, 0.5, &[0.0]).unwrap();
        assert_eq!(f[0], 1);
    }

    #[test]
    fn single_state_fixed_point_for_any_map() {
        let maps: Vec<Box<dyn ProspectMap>> = vec![
            Box::new(ExpectationMap),
            Box::new(EntropicMap::new(-3.0).unwrap()),
            Box::new(MinimaxMap),
            Box::new(CvarMap::new(0.2).unwrap()),
        ];
        for map in maps {
            let r = value_iteration_discounted(&single(1.0), &map, 0.5, &[0.0], 1e-12, 1000).unwrap();
            assert!((r.value[0] - 2.0).abs() < 1e-11, "{}", map.name());
            assert!(r.converged);
        }
    }

    #[test]
    fn residuals_shrink_by_discount() {
        let r = value_iteration_discounted(&sample(), &EntropicMap::new(0.5).unwrap(), 0.8, &[0.0; 3], 1e-10, 10_000)
            .unwrap();
        for w in r.residuals.windows(2) {
            assert!(w[1] <= 0.8 * w[0] + 1e-12);
        }
        assert_eq!(r.residuals.len(), r.iterations);
        assert!(*r.residuals.last().unwrap() < 1e-10);
    }

    #[test]
    fn not_converged_carries_partial_result() {
        match value_iteration_discounted(&sample(), &ExpectationMap, 0.99, &[0.0; 3], 1e-12, 5) {
            Err(SolveError::NotConverged(partial)) => {
                assert_eq!(partial.iterations, 5);
                assert!(!partial.converged);
                assert_eq!(partial.residuals.len(), 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parameters_validated() {
        assert!(value_iteration_discounted(&sample(), &ExpectationMap, 1.0, &[0.0; 3], 1e-6, 10).is_err());
        assert!(value_iteration_discounted(&sample(), &ExpectationMap, 0.5, &[0.0; 3], 0.0, 10).is_err());
        assert!(value_iteration_discounted(&sample(), &ExpectationMap, 0.5, &[0.0; 2], 1e-6, 10).is_err());
        assert!(aperiodicity_transform(&sample(), 1.0).is_err());
    }

    #[test]
    fn greedy_policy_evaluates_to_fixed_point() {
        let map = EntropicMap::new(-0.7).unwrap();
        let eps = 1e-10;
        let vi = value_iteration_discounted(&sample(), &map, 0.9, &[0.0; 3], eps, 100_000).unwrap();
        let pi = PolicyRand::from_det(&vi.policy, 2);
        let v = evaluate_policy_discounted(&sample(), &map, 0.9, &pi, eps, 100_000).unwrap();
        assert!(sup_norm(&v.sub(&vi.value)) < 2.0 * eps * 10.0);
    }

    #[test]
    fn zero_discount_evaluation_is_policy_reward() {
        let m = sample();
        let pi = PolicyRand::uniform(3, 2);
        let v = evaluate_policy_discounted(&m, &ExpectationMap, 0.0, &pi, 1e-12, 10).unwrap();
        let (r_pi, _) = apply_policy(&m, &pi).unwrap();
        assert_eq!(v, r_pi);
    }

    #[test]
    fn single_state_average() {
        let r = value_iteration_average(&single(3.5), &EntropicMap::new(1.0).unwrap(), &[0.0], 1e-9, 100).unwrap();
        assert_eq!(r.gain, 3.5);
        assert_eq!(r.bias.0, vec![0.0]);
        assert_eq!(r.apoe_residual, 0.0);
    }

    #[test]
    fn constant_shift_passes_through_average_backup() {
        let m = sample();
        let (f0, _) = bellman_average(&m, &ExpectationMap, &[0.0; 3]).unwrap();
        let (fc, _) = bellman_average(&m, &ExpectationMap, &[2.5; 3]).unwrap();
        assert_eq!(f0.0, vec![1.0, 2.0, 0.3]);
        for (a, b) in f0.iter().zip(fc.iter()) {
            assert!((b - a - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn periodic_chain_does_not_converge_until_mixed() {
        let m = two_cycle();
        match value_iteration_average(&m, &ExpectationMap, &[0.0; 2], 1e-9, 1000) {
            Err(SolveError::AverageNotConverged(partial)) => {
                assert_eq!(partial.iterations, 1000);
                assert!((partial.residuals.last().unwrap() - 2.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let mixed = aperiodicity_transform(&m, 0.1).unwrap();
        let r = value_iteration_average(&mixed, &ExpectationMap, &[0.0; 2], 1e-10, 100_000).unwrap();
        assert!((r.gain - 1.0).abs() < 1e-9);
        assert!(r.apoe_residual < 1e-9);
    }

    #[test]
    fn transform_edge_cases() {
        let m = sample();
        assert_eq!(aperiodicity_transform(&m, 0.0).unwrap(), m);
        let identity = Mdp::from_nested(
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            vec![vec![1.0], vec![2.0]],
        )
        .unwrap();
        let t = aperiodicity_transform(&identity, 0.3).unwrap();
        assert_eq!(t, identity);
    }
}
