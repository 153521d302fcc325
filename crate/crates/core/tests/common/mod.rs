#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use prospect_mdp::mdp::{Mdp, PolicyDet};
use rand::Rng;

/// Random MDP with rewards in [-1, 1]. With `min_prob > 0` every entry is at
/// least that large before normalization (strictly positive kernel).
pub fn random_mdp<R: Rng>(rng: &mut R, n: usize, a: usize, min_prob: f64) -> Mdp {
    let mut trans = Vec::with_capacity(n * a * n);
    let mut rewards = Vec::with_capacity(n * a);
    for _ in 0..n * a {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                // sparse rows when min_prob == 0 so supports vary
                if min_prob == 0.0 && rng.gen_bool(0.3) {
                    0.0
                } else {
                    min_prob + rng.gen::<f64>()
                }
            })
            .collect();
        let mut raw = raw;
        if raw.iter().all(|&p| p == 0.0) {
            raw[rng.gen_range(0..n)] = 1.0;
        }
        let s: f64 = raw.iter().sum();
        trans.extend(raw.iter().map(|p| p / s));
        rewards.push(rng.gen_range(-1.0..=1.0));
    }
    Mdp::new(n, a, trans, rewards).unwrap()
}

pub fn all_policies(n: usize, a: usize) -> Vec<PolicyDet> {
    let total = a.pow(n as u32);
    (0..total)
        .map(|mut code| {
            PolicyDet::new(
                (0..n)
                    .map(|_| {
                        let act = code % a;
                        code /= a;
                        act
                    })
                    .collect(),
            )
        })
        .collect()
}

pub fn policy_matrix(m: &Mdp, f: &PolicyDet) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.n_states();
    let p = DMatrix::from_fn(n, n, |x, y| m.prob(x, f[x], y));
    let r = DVector::from_fn(n, |x, _| m.reward(x, f[x]));
    (p, r)
}

/// `(I - alpha P_f)^{-1} r_f` by LU.
pub fn linear_policy_value(m: &Mdp, f: &PolicyDet, alpha: f64) -> Vec<f64> {
    let n = m.n_states();
    let (p, r) = policy_matrix(m, f);
    let a = DMatrix::identity(n, n) - p * alpha;
    a.lu().solve(&r).expect("nonsingular").iter().copied().collect()
}

/// Optimal discounted value by exhaustive enumeration of deterministic
/// policies, each evaluated by a linear solve.
pub fn enumerated_optimum(m: &Mdp, alpha: f64) -> Vec<f64> {
    let mut best = vec![f64::NEG_INFINITY; m.n_states()];
    for f in all_policies(m.n_states(), m.n_actions()) {
        for (b, v) in best.iter_mut().zip(linear_policy_value(m, &f, alpha)) {
            *b = b.max(v);
        }
    }
    best
}

/// Stationary distribution of an irreducible stochastic matrix: solves
/// `mu (P - I) = 0` with one equation replaced by `sum mu = 1`.
pub fn stationary(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible chain")
}

/// Classical optimal gain for a unichain model: max over deterministic
/// policies of the stationary mean reward.
pub fn enumerated_gain(m: &Mdp) -> f64 {
    all_policies(m.n_states(), m.n_actions())
        .iter()
        .map(|f| {
            let (p, r) = policy_matrix(m, f);
            stationary(&p).dot(&r)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
