use serde::{Deserialize, Serialize};

use super::{
    ChoquetMap, CvarMap, EntropicMap, ExpectationMap, MapError, MeanSemideviationMap, MinimaxMap,
    MixedEntropicMap, ProbWeightingMap, ProspectMap, RobustMap, ScalarFn,
};
use crate::mdp::Mdp;

/// JSON description of a prospect map, e.g. `{"kind": "cvar", "tau": 0.1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapDescriptor {
    Expectation,
    /// `lambda = 0` builds the expectation map (the continuous limit).
    Entropic { lambda: f64 },
    MixedEntropic { lambda: f64 },
    Robust { kernels: Vec<Vec<Vec<Vec<f64>>>> },
    /// Epsilon-contamination of the MDP's own kernel.
    Contamination { epsilon: f64 },
    Minimax,
    Cvar { tau: f64 },
    MeanSemideviation {
        lambda: f64,
        #[serde(alias = "r", default = "default_order")]
        order: f64,
    },
    ProbabilityWeighting {
        #[serde(default = "identity")]
        utility: ScalarFn,
        #[serde(default = "identity")]
        weighting: ScalarFn,
    },
    Choquet { distortion: ScalarFn },
}

fn default_order() -> f64 {
    1.0
}

fn identity() -> ScalarFn {
    ScalarFn::Identity
}

impl MapDescriptor {
    /// Instantiates the map for use on `m`.
    pub fn build(&self, m: &Mdp) -> Result<Box<dyn ProspectMap>, MapError> {
        Ok(match self {
            MapDescriptor::Expectation => Box::new(ExpectationMap),
            MapDescriptor::Entropic { lambda } if *lambda == 0.0 => Box::new(ExpectationMap),
            MapDescriptor::Entropic { lambda } => Box::new(EntropicMap::new(*lambda)?),
            MapDescriptor::MixedEntropic { lambda } => Box::new(MixedEntropicMap::new(*lambda)?),
            MapDescriptor::Robust { kernels } => {
                let map = RobustMap::new(kernels.clone())?;
                map.check_shape(m)?;
                Box::new(map)
            }
            MapDescriptor::Contamination { epsilon } => Box::new(RobustMap::contamination(m, *epsilon)?),
            MapDescriptor::Minimax => Box::new(MinimaxMap),
            MapDescriptor::Cvar { tau } => Box::new(CvarMap::new(*tau)?),
            MapDescriptor::MeanSemideviation { lambda, order } => {
                Box::new(MeanSemideviationMap::new(*lambda, *order)?)
            }
            MapDescriptor::ProbabilityWeighting { utility, weighting } => {
                Box::new(ProbWeightingMap::new(utility.clone(), weighting.clone())?)
            }
            MapDescriptor::Choquet { distortion } => Box::new(ChoquetMap::new(distortion.clone())?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MapDescriptor::Expectation => "expectation",
            MapDescriptor::Entropic { .. } => "entropic",
            MapDescriptor::MixedEntropic { .. } => "mixed_entropic",
            MapDescriptor::Robust { .. } => "robust",
            MapDescriptor::Contamination { .. } => "contamination",
            MapDescriptor::Minimax => "minimax",
            MapDescriptor::Cvar { .. } => "cvar",
            MapDescriptor::MeanSemideviation { .. } => "mean_semideviation",
            MapDescriptor::ProbabilityWeighting { .. } => "probability_weighting",
            MapDescriptor::Choquet { .. } => "choquet",
        }
    }
}
