//! Empirical checks of the prospect-map axioms and related properties.
//!
//! Nothing here is a proof. Each probe draws random value vectors and
//! records the worst violation seen together with a witness that reproduces
//! it; a map that passes is merely not refuted on the sampled instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::maps::{prospect, prospect_det, prospect_policy, MapError, ProspectMap};
use crate::mdp::{hilbert_seminorm, sup_norm, Mdp, PolicyDet, PolicyRand};

/// Range of the random value vectors and shifts.
const SCALE: f64 = 10.0;

/// A concrete instance on which a probe failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: usize,
    pub a: Option<usize>,
    pub v: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w: Option<Vec<f64>>,
    /// Shift `c`, scale `s` or mixing weight `beta`, depending on the probe.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scalar: Option<f64>,
    /// Size of the violation (how far the inequality or identity missed).
    pub gap: f64,
    pub detail: String,
}

/// Outcome of one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub passed: bool,
    pub violations: usize,
    pub worst_gap: f64,
    pub witness: Option<Witness>,
}

impl AxiomCheck {
    fn new() -> Self {
        AxiomCheck { passed: true, violations: 0, worst_gap: 0.0, witness: None }
    }

    fn record(&mut self, gap: f64, tol: f64, witness: impl FnOnce() -> Witness) {
        let gap = if gap.is_nan() { f64::INFINITY } else { gap };
        if gap > tol {
            self.passed = false;
            self.violations += 1;
            if gap > self.worst_gap {
                self.worst_gap = gap;
                self.witness = Some(witness());
            }
        }
    }

    fn record_error(&mut self, err: &MapError, witness: impl FnOnce() -> Witness) {
        self.record(f64::INFINITY, 0.0, || {
            let mut w = witness();
            w.detail = format!("evaluation error: {err}");
            w
        });
    }
}

/// Risk attitude inferred from the concavity probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskClass {
    /// Within tolerance of linear on every draw.
    Neutral,
    /// Concave on every draw.
    Averse,
    /// Convex on every draw.
    Seeking,
    Mixed,
    /// The probe never reached this state.
    Unsampled,
}

impl RiskClass {
    fn from_gaps(lo: f64, hi: f64, tol: f64) -> Self {
        if lo > hi {
            return RiskClass::Unsampled;
        }
        match (lo >= -tol, hi <= tol) {
            (true, true) => RiskClass::Neutral,
            (true, false) => RiskClass::Averse,
            (false, true) => RiskClass::Seeking,
            (false, false) => RiskClass::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub map: String,
    pub trials: usize,
    pub tol: f64,
    pub monotonicity: AxiomCheck,
    pub translation: AxiomCheck,
    pub centralization: AxiomCheck,
    /// Positive homogeneity, the extra requirement for coherence.
    pub homogeneity: AxiomCheck,
    pub nonexpansive_sup: AxiomCheck,
    /// Span-seminorm nonexpansiveness of the policy-lifted operator.
    pub nonexpansive_hilbert: AxiomCheck,
    pub risk_class: RiskClass,
    pub state_risk: Vec<RiskClass>,
    /// Smallest and largest `R(bv + (1-b)w) - bR(v) - (1-b)R(w)` observed.
    pub concavity_gap: [f64; 2],
}

impl AxiomReport {
    /// Monotonicity, translation and centralization all hold.
    pub fn axioms_pass(&self) -> bool {
        self.monotonicity.passed && self.translation.passed && self.centralization.passed
    }

    pub fn homogeneous(&self) -> bool {
        self.homogeneity.passed
    }

    pub fn coherent(&self) -> bool {
        self.axioms_pass() && self.homogeneous()
    }
}

fn random_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// Nonnegative perturbation; about half the coordinates are left untouched
/// so that single-coordinate increases are exercised too.
fn random_bump<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..=SCALE) } else { 0.0 })
        .collect()
}

pub(crate) fn random_policy<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> PolicyRand {
    let probs = (0..n_states)
        .map(|_| {
            if rng.gen_bool(0.5) {
                let mut row = vec![0.0; n_actions];
                row[rng.gen_range(0..n_actions)] = 1.0;
                row
            } else {
                let raw: Vec<f64> = (0..n_actions).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|r| r / s).collect()
            }
        })
        .collect();
    PolicyRand::new(probs).expect("normalized rows")
}

/// Probes the axioms and the coherence, concavity and nonexpansiveness
/// properties of `map` on `trials` random draws.
///
/// States are visited round-robin so every state is probed when
/// `trials >= n_states`; actions and vectors are random.
pub fn check_axioms<M, R>(map: &M, m: &Mdp, trials: usize, rng: &mut R, tol: f64) -> AxiomReport
where
    M: ProspectMap + ?Sized,
    R: Rng + ?Sized,
{
    let n = m.n_states();
    let n_actions = m.n_actions();
    let zero = vec![0.0; n];

    let mut mono = AxiomCheck::new();
    let mut trans = AxiomCheck::new();
    let mut central = AxiomCheck::new();
    let mut homog = AxiomCheck::new();
    let mut nonexp = AxiomCheck::new();
    let mut nonexp_h = AxiomCheck::new();
    let mut gap_lo = vec![f64::INFINITY; n];
    let mut gap_hi = vec![f64::NEG_INFINITY; n];

    let eval = |v: &[f64], x, a| prospect(map, m, v, x, a);

    for trial in 0..trials.max(1) {
        let x = trial % n;
        let a = rng.gen_range(0..n_actions);
        let v = random_vec(rng, n, -SCALE, SCALE);
        let w_indep = random_vec(rng, n, -SCALE, SCALE);
        let bump = random_bump(rng, n);
        let c = rng.gen_range(-SCALE..=SCALE);
        let s = rng.gen_range(0.1..=5.0);
        let beta = rng.gen_range(0.0..=1.0);
        let wit = |v: &[f64], w: Option<&[f64]>, scalar: Option<f64>, gap: f64, detail: String| Witness {
            x,
            a: Some(a),
            v: v.to_vec(),
            w: w.map(<[f64]>::to_vec),
            scalar,
            gap,
            detail,
        };

        let rv = match eval(&v, x, a) {
            Ok(r) => r,
            Err(e) => {
                mono.record_error(&e, || wit(&v, None, None, f64::INFINITY, String::new()));
                continue;
            }
        };

        // monotonicity: v <= v + bump
        let w_up: Vec<f64> = v.iter().zip(&bump).map(|(v, d)| v + d).collect();
        match eval(&w_up, x, a) {
            Ok(rw) => mono.record(rv - rw, tol, || {
                wit(&v, Some(&w_up), None, rv - rw, format!("R(v) = {rv} > R(w) = {rw} with v <= w"))
            }),
            Err(e) => mono.record_error(&e, || wit(&v, Some(&w_up), None, f64::INFINITY, String::new())),
        }

        // translation
        let shifted: Vec<f64> = v.iter().map(|v| v + c).collect();
        match eval(&shifted, x, a) {
            Ok(rs) => {
                let gap = (rs - rv - c).abs();
                trans.record(gap, tol, || {
                    wit(&v, None, Some(c), gap, format!("R(v + c) = {rs}, R(v) + c = {}", rv + c))
                })
            }
            Err(e) => trans.record_error(&e, || wit(&v, None, Some(c), f64::INFINITY, String::new())),
        }

        // centralization
        match eval(&zero, x, a) {
            Ok(r0) => central.record(r0.abs(), tol, || wit(&zero, None, None, r0.abs(), format!("R(0) = {r0}"))),
            Err(e) => central.record_error(&e, || wit(&zero, None, None, f64::INFINITY, String::new())),
        }

        // positive homogeneity
        let scaled: Vec<f64> = v.iter().map(|v| s * v).collect();
        match eval(&scaled, x, a) {
            Ok(rs) => {
                let gap = (rs - s * rv).abs();
                homog.record(gap, tol * s, || {
                    wit(&v, None, Some(s), gap, format!("R(sv) = {rs}, sR(v) = {}", s * rv))
                })
            }
            Err(e) => homog.record_error(&e, || wit(&v, None, Some(s), f64::INFINITY, String::new())),
        }

        // concavity probe and sup-norm nonexpansiveness against an independent w
        let mix: Vec<f64> = v.iter().zip(&w_indep).map(|(v, w)| beta * v + (1.0 - beta) * w).collect();
        match (eval(&w_indep, x, a), eval(&mix, x, a)) {
            (Ok(rw), Ok(rmix)) => {
                let gap = rmix - beta * rv - (1.0 - beta) * rw;
                gap_lo[x] = gap_lo[x].min(gap);
                gap_hi[x] = gap_hi[x].max(gap);
                let dist = sup_norm(&v.iter().zip(&w_indep).map(|(a, b)| a - b).collect::<Vec<_>>());
                let excess = (rv - rw).abs() - dist;
                nonexp.record(excess, tol, || {
                    wit(&v, Some(&w_indep), None, excess, format!("|R(v) - R(w)| exceeds |v - w|_inf = {dist}"))
                });
            }
            (Err(e), _) | (_, Err(e)) => {
                nonexp.record_error(&e, || wit(&v, Some(&w_indep), Some(beta), f64::INFINITY, String::new()))
            }
        }

        // span nonexpansiveness of the lifted operator
        let pi = random_policy(rng, n, n_actions);
        match (prospect_policy(map, m, &v, &pi), prospect_policy(map, m, &w_indep, &pi)) {
            (Ok(pv), Ok(pw)) => {
                let out = hilbert_seminorm(&pv.sub(&pw));
                let inp = hilbert_seminorm(&v.iter().zip(&w_indep).map(|(a, b)| a - b).collect::<Vec<_>>());
                let excess = out - inp;
                nonexp_h.record(excess, tol, || Witness {
                    x,
                    a: None,
                    v: v.clone(),
                    w: Some(w_indep.clone()),
                    scalar: None,
                    gap: excess,
                    detail: format!("|R^pi v - R^pi w|_H = {out} > |v - w|_H = {inp}"),
                });
            }
            (Err(e), _) | (_, Err(e)) => nonexp_h.record_error(&e, || Witness {
                x,
                a: None,
                v: v.clone(),
                w: Some(w_indep.clone()),
                scalar: None,
                gap: f64::INFINITY,
                detail: String::new(),
            }),
        }
    }

    let state_risk: Vec<RiskClass> =
        gap_lo.iter().zip(&gap_hi).map(|(&lo, &hi)| RiskClass::from_gaps(lo, hi, tol)).collect();
    let lo = gap_lo.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gap_hi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    AxiomReport {
        map: map.name(),
        trials,
        tol,
        monotonicity: mono,
        translation: trans,
        centralization: central,
        homogeneity: homog,
        nonexpansive_sup: nonexp,
        nonexpansive_hilbert: nonexp_h,
        risk_class: RiskClass::from_gaps(lo, hi, tol),
        state_risk,
        concavity_gap: [lo, hi],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionWitness {
    pub policies: Vec<PolicyDet>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    /// Largest observed `|R^pi u - R^pi v|_H / |u - v|_H`.
    pub beta_hat: f64,
    pub witness: Option<ContractionWitness>,
    /// Pairs skipped because `|u - v|_H < 1e-12`.
    pub degenerate_pairs: usize,
}

/// Samples `K`-step compositions `R^{f_0}(R^{f_1}(... R^{f_{K-1}}(u)))` over
/// random deterministic policies and reports the largest span-seminorm
/// Lipschitz ratio.
///
/// A value below one is evidence, not proof, that the span contraction
/// condition needed by average value iteration holds with that modulus.
pub fn estimate_policy_contraction<M, R>(
    map: &M,
    m: &Mdp,
    k: usize,
    trials: usize,
    rng: &mut R,
) -> Result<ContractionEstimate, MapError>
where
    M: ProspectMap + ?Sized,
    R: Rng + ?Sized,
{
    if k == 0 {
        return Err(MapError::InvalidParameter("contraction horizon K must be >= 1".into()));
    }
    let n = m.n_states();
    let mut best = ContractionEstimate { beta_hat: 0.0, witness: None, degenerate_pairs: 0 };
    for _ in 0..trials {
        let u = random_vec(rng, n, -SCALE, SCALE);
        let v = random_vec(rng, n, -SCALE, SCALE);
        let denom = hilbert_seminorm(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        let policies: Vec<PolicyDet> = (0..k)
            .map(|_| PolicyDet::new((0..n).map(|_| rng.gen_range(0..m.n_actions())).collect()))
            .collect();
        if denom < 1e-12 {
            best.degenerate_pairs += 1;
            continue;
        }
        let mut ru = u.clone();
        let mut rv = v.clone();
        for f in policies.iter().rev() {
            ru = prospect_det(map, m, &ru, f)?.into_inner();
            rv = prospect_det(map, m, &rv, f)?.into_inner();
        }
        let ratio = hilbert_seminorm(&ru.iter().zip(&rv).map(|(a, b)| a - b).collect::<Vec<_>>()) / denom;
        if ratio > best.beta_hat || best.witness.is_none() {
            best.beta_hat = best.beta_hat.max(ratio);
            best.witness = Some(ContractionWitness { policies, u, v, ratio });
        }
    }
    Ok(best)
}
