use serde::{Deserialize, Serialize};

use super::MapError;

/// Monotone scalar function used as a utility, a probability weighting or
/// a capacity distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Identity,
    /// `sign(x) |x|^exponent`.
    Power { exponent: f64 },
    /// Inverse-S weighting `p^g / (p^g + (1 - p)^g)^(1/g)`.
    InverseS { gamma: f64 },
    /// Piecewise-linear interpolation through `(x, y)` knots, extended
    /// linearly past the end knots.
    Tabulated { points: Vec<[f64; 2]> },
}

impl ScalarFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity => x,
            ScalarFn::Power { exponent } => x.signum() * x.abs().powf(*exponent),
            ScalarFn::InverseS { gamma } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    let a = x.powf(*gamma);
                    a / (a + (1.0 - x).powf(*gamma)).powf(1.0 / gamma)
                }
            }
            ScalarFn::Tabulated { points } => interpolate(points, x),
        }
    }

    fn check_params(&self) -> Result<(), MapError> {
        match self {
            ScalarFn::Identity => Ok(()),
            ScalarFn::Power { exponent } if *exponent > 0.0 && exponent.is_finite() => Ok(()),
            ScalarFn::InverseS { gamma } if *gamma > 0.0 && gamma.is_finite() => Ok(()),
            ScalarFn::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(MapError::InvalidParameter("tabulated function needs two knots".into()));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(MapError::InvalidParameter(
                        "tabulated knots must be strictly increasing in x".into(),
                    ));
                }
                Ok(())
            }
            other => Err(MapError::InvalidParameter(format!("bad scalar function {other:?}"))),
        }
    }

    fn check_monotone(&self, lo: f64, hi: f64, what: &str) -> Result<(), MapError> {
        const PROBES: usize = 1000;
        let mut prev = self.eval(lo);
        for i in 1..=PROBES {
            let x = lo + (hi - lo) * i as f64 / PROBES as f64;
            let y = self.eval(x);
            if !y.is_finite() || y < prev - 1e-12 {
                return Err(MapError::InvalidParameter(format!(
                    "{what} is not monotone increasing near {x}"
                )));
            }
            prev = y;
        }
        Ok(())
    }

    /// Increasing with `u(0) = 0`, probed on `[-1000, 1000]`.
    pub fn validate_utility(&self) -> Result<(), MapError> {
        self.check_params()?;
        if self.eval(0.0) != 0.0 {
            return Err(MapError::InvalidParameter("utility must satisfy u(0) = 0".into()));
        }
        self.check_monotone(-1000.0, 1000.0, "utility")
    }

    /// Increasing on `[0, 1]` with `w(0) = 0` and `w(1) = 1`.
    pub fn validate_unit(&self, what: &str) -> Result<(), MapError> {
        self.check_params()?;
        if self.eval(0.0) != 0.0 || self.eval(1.0) != 1.0 {
            return Err(MapError::InvalidParameter(format!("{what} must map 0 to 0 and 1 to 1")));
        }
        self.check_monotone(0.0, 1.0, what)
    }
}

fn interpolate(points: &[[f64; 2]], x: f64) -> f64 {
    let seg = match points.iter().position(|p| p[0] >= x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => points.len() - 2,
    };
    let [x0, y0] = points[seg];
    let [x1, y1] = points[seg + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
