//! Closed-form label formulas: the spatial rationality score and GELU.

use serde::{Deserialize, Serialize};

use crate::error::{ArtError, Result};

/// Cubic coefficient of the tanh-approximated GELU. Kept at the printed
/// value, not the usual 0.044715.
pub const GELU_CUBIC: f64 = 0.0447;

/// Constants of the spatial rationality score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialScoreSpec {
    pub a: f64,
    pub b: f64,
}

impl Default for SpatialScoreSpec {
    fn default() -> Self {
        Self { a: 10.0, b: 20.0 }
    }
}

impl SpatialScoreSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(ArtError::Domain(format!(
                "spatial score needs finite a and b > 0, got a={} b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(a - b * x / x_max) / max(r, 1/r)`.
///
/// `x` is the displacement of the foreground center from its original
/// position, `x_max` the largest displacement the canvas allows, `r` the
/// scale ratio. Lower scores mean larger deviation. Displacements beyond
/// `x_max` (off-canvas centers) follow the same formula.
pub fn spatial_score(x: f64, x_max: f64, r: f64, spec: &SpatialScoreSpec) -> Result<f64> {
    spec.validate()?;
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(ArtError::Domain(format!("x_max must be positive, got {x_max}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(ArtError::Domain(format!("scale ratio must be positive, got {r}")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(ArtError::Domain(format!("displacement must be >= 0, got {x}")));
    }
    Ok(sigmoid(spec.a - spec.b * (x / x_max)) / r.max(1.0 / r))
}

pub fn gelu(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (k * (x + GELU_CUBIC * x * x * x)).tanh())
}

/// Derivative of [`gelu`].
pub fn gelu_grad(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let t = (k * (x + GELU_CUBIC * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_CUBIC * x * x)
}
