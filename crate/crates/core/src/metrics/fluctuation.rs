use crate::error::{Error, Result};
use crate::numeric;

use super::StrengthVector;

/// Default threshold below which a node's strength is treated as zero when
/// computing disparity.
pub const DEFAULT_DISPARITY_EPSILON: f64 = 1e-12;

/// Population standard deviation of the total strengths of one layer.
/// Exactly zero iff every strength is equal.
pub fn layer_fluctuation(sv: &StrengthVector) -> Result<f64> {
    fluctuation_of(&sv.s)
}

pub fn fluctuation_of(strengths: &[f64]) -> Result<f64> {
    let (_, var) = numeric::mean_and_population_variance(strengths)
        .ok_or_else(|| Error::Argument("fluctuation of an empty layer".into()))?;
    Ok(var.sqrt())
}

/// `Σ (w / s)²` over the incident weights of a node, with `s = Σ w`.
///
/// Returns `Ok(None)` when `|s| < epsilon`: with mixed-sign weights the
/// strength can cancel to zero and the ratio is meaningless.
pub fn node_disparity(incident_weights: &[f64], epsilon: f64) -> Result<Option<f64>> {
    if incident_weights.is_empty() {
        return Err(Error::Argument("disparity of a node with no links".into()));
    }
    let s = numeric::sum(incident_weights.iter().copied());
    if s.abs() < epsilon {
        return Ok(None);
    }
    Ok(Some(numeric::sum(incident_weights.iter().map(|w| (w / s) * (w / s)))))
}
