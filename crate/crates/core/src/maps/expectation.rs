use serde::{Deserialize, Serialize};

use super::{expectation, support, MapError, ProspectMap};
use crate::mdp::{Mdp, MdpError};

/// The classical conditional expectation `sum_y Q(y|x,a) v(y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectationMap;

impl ProspectMap for ExpectationMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        Ok(expectation(row, v))
    }

    fn name(&self) -> String {
        "expectation".into()
    }
}

/// Worst case expectation over a finite set of alternative kernels.
///
/// The row of the nominal MDP is ignored; each kernel supplies its own
/// `Q_k(. | x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustMap {
    kernels: Vec<Mdp>,
}

impl RobustMap {
    /// Each kernel is `kernels[k][x][a][y]`.
    pub fn new(kernels: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self, MapError> {
        if kernels.is_empty() {
            return Err(MapError::InvalidParameter("robust map needs at least one kernel".into()));
        }
        let kernels = kernels
            .into_iter()
            .map(|k| {
                let rewards = k.iter().map(|per_a| vec![0.0; per_a.len()]).collect();
                Mdp::from_nested(k, rewards)
            })
            .collect::<Result<Vec<_>, MdpError>>()?;
        let (n, a) = (kernels[0].n_states(), kernels[0].n_actions());
        if kernels.iter().any(|k| k.n_states() != n || k.n_actions() != a) {
            return Err(MapError::Dimension("robust kernels have different shapes".into()));
        }
        Ok(RobustMap { kernels })
    }

    /// Epsilon-contamination set `{(1 - eps) Q + eps e_z : z in X}` around
    /// the MDP's own kernel.
    pub fn contamination(m: &Mdp, epsilon: f64) -> Result<Self, MapError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(MapError::InvalidParameter(format!(
                "contamination level {epsilon} outside [0, 1]"
            )));
        }
        let n = m.n_states();
        let base = m.transitions_nested();
        let kernels = (0..n)
            .map(|z| {
                base.iter()
                    .map(|per_a| {
                        per_a
                            .iter()
                            .map(|row| {
                                row.iter()
                                    .enumerate()
                                    .map(|(y, p)| {
                                        (1.0 - epsilon) * p + if y == z { epsilon } else { 0.0 }
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(kernels)
    }

    pub fn kernels(&self) -> &[Mdp] {
        &self.kernels
    }

    pub fn check_shape(&self, m: &Mdp) -> Result<(), MapError> {
        let k = &self.kernels[0];
        if k.n_states() != m.n_states() || k.n_actions() != m.n_actions() {
            return Err(MapError::Dimension(format!(
                "robust kernels are {}x{}, MDP is {}x{}",
                k.n_states(),
                k.n_actions(),
                m.n_states(),
                m.n_actions()
            )));
        }
        Ok(())
    }
}

impl ProspectMap for RobustMap {
    fn evaluate(&self, _row: &[f64], v: &[f64], x: usize, a: usize) -> Result<f64, MapError> {
        let k0 = &self.kernels[0];
        if x >= k0.n_states() || a >= k0.n_actions() || v.len() != k0.n_states() {
            return Err(MapError::Dimension(format!(
                "pair ({x}, {a}) or value length {} outside robust kernel shape",
                v.len()
            )));
        }
        Ok(self
            .kernels
            .iter()
            .map(|k| expectation(k.row(x, a), v))
            .fold(f64::INFINITY, f64::min))
    }

    fn name(&self) -> String {
        format!("robust[{}]", self.kernels.len())
    }
}

/// Worst reachable successor value, `min { v(y) : Q(y|x,a) > 0 }`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MinimaxMap;

impl ProspectMap for MinimaxMap {
    fn evaluate(&self, row: &[f64], v: &[f64], _x: usize, _a: usize) -> Result<f64, MapError> {
        Ok(support(row).map(|(y, _)| v[y]).fold(f64::INFINITY, f64::min))
    }

    fn name(&self) -> String {
        "minimax".into()
    }
}
