//! Behavior of the betting game and the grid world under the solvers.

use prospect_mdp::environments::*;
use prospect_mdp::maps::{EntropicMap, ExpectationMap, ProspectMap};
use prospect_mdp::mdp::{validate_mdp, Mdp};
use prospect_mdp::solvers::{value_iteration_discounted, SolveResult};

fn solve<M: ProspectMap>(m: &Mdp, map: &M, alpha: f64) -> SolveResult {
    value_iteration_discounted(m, map, alpha, &vec![0.0; m.n_states()], 1e-10, 1_000_000).unwrap()
}

fn action_value<M: ProspectMap>(m: &Mdp, map: &M, alpha: f64, v: &[f64], x: usize, a: usize) -> f64 {
    m.reward(x, a) + alpha * map.evaluate(m.row(x, a), v, x, a).unwrap()
}

#[test]
fn betting_expectation_gap_is_the_payment_delay() {
    // "no" pays its 5 one step earlier than a bet settles, so the two
    // actions differ by exactly 5 (1 - alpha) at both decision states
    let spec = BettingGameSpec::default();
    let m = build_betting_game(&spec).unwrap();
    validate_mdp(&m).unwrap();
    let alpha = spec.discount;
    let sol = solve(&m, &ExpectationMap, alpha);
    let gap = |x| {
        action_value(&m, &ExpectationMap, alpha, &sol.value, x, betting::NO)
            - action_value(&m, &ExpectationMap, alpha, &sol.value, x, betting::BET)
    };
    assert!((gap(betting::GAIN_DECISION) - 5.0 * (1.0 - alpha)).abs() < 1e-7);
    assert!((gap(betting::LOSS_DECISION) + 5.0 * (1.0 - alpha)).abs() < 1e-7);
    assert_eq!(betting_policy_string(&sol.policy), "no,bet");
}

#[test]
fn betting_entropic_sign_decides_the_policy() {
    let spec = BettingGameSpec::default();
    let m = build_betting_game(&spec).unwrap();
    for (lambda, want) in [(-0.1, "no,no"), (-0.01, "no,no"), (0.01, "bet,bet"), (0.1, "bet,bet")] {
        let sol = solve(&m, &EntropicMap::new(lambda).unwrap(), spec.discount);
        assert_eq!(betting_policy_string(&sol.policy), want, "lambda {lambda}");
    }
}

#[test]
fn betting_game_rejects_bad_probabilities() {
    let spec = BettingGameSpec { win_prob: 1.5, ..Default::default() };
    assert!(build_betting_game(&spec).is_err());
}

#[test]
fn open_grid_walks_straight_to_the_large_corner() {
    let spec = GridWorldSpec { danger_cells: vec![], escape_prob: 1.0, ..Default::default() };
    let m = build_grid_world(&spec).unwrap();
    let alpha = 0.9;
    let sol = solve(&m, &ExpectationMap, alpha);
    // ten moves; the tenth enters the corner, after which every step bumps
    // the wall and pays again
    let want = spec.r_large * alpha.powi(9) / (1.0 - alpha);
    assert!((sol.value[spec.start_state()] - want).abs() < 1e-8);
    assert_eq!(sol.policy[spec.start_state()], grid::DOWN);
}

/// Cells visited by the greedy policy from the start, stopping at a corner.
fn greedy_path(spec: &GridWorldSpec, sol: &SolveResult) -> Vec<[usize; 2]> {
    let mut cell = spec.start;
    let mut path = vec![cell];
    for _ in 0..4 * spec.side {
        let [r, c] = cell;
        cell = match sol.policy[spec.state(r, c)] {
            grid::LEFT => [r, c.saturating_sub(1)],
            grid::RIGHT => [r, (c + 1).min(spec.side - 1)],
            grid::UP => [r.saturating_sub(1), c],
            _ => [(r + 1).min(spec.side - 1), c],
        };
        path.push(cell);
        if cell == spec.small_corner() || cell == spec.large_corner() {
            break;
        }
    }
    path
}

#[test]
fn risk_aversion_trades_the_large_reward_for_safety() {
    let spec = GridWorldSpec::default();
    let m = build_grid_world(&spec).unwrap();
    let neutral = solve(&m, &ExpectationMap, 0.9);
    assert_eq!(greedy_path(&spec, &neutral).last(), Some(&spec.large_corner()));
    let seeking = solve(&m, &EntropicMap::new(0.01).unwrap(), 0.9);
    assert_eq!(greedy_path(&spec, &seeking).last(), Some(&spec.large_corner()));
    let averse = solve(&m, &EntropicMap::new(-0.5).unwrap(), 0.9);
    let path = greedy_path(&spec, &averse);
    assert_eq!(path.last(), Some(&spec.small_corner()));
    assert!(path.iter().all(|&c| !spec.is_danger(c)));
}

#[test]
fn policy_render_has_one_row_per_grid_row() {
    let spec = GridWorldSpec { side: 4, danger_cells: default_danger_cells(4), ..Default::default() };
    let m = build_grid_world(&spec).unwrap();
    let sol = solve(&m, &ExpectationMap, 0.9);
    let text = spec.render_policy(&sol.policy);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.chars().count() == 4 && l.chars().all(|c| "<>^v".contains(c))));
}
