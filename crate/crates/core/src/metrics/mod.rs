//! Grasp evaluation: Chamfer distance between hand point clouds, maximum
//! penetration depth, and contact-part agreement. Lengths are reported in
//! centimeters.

mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{ContactSummary, PALM};
use crate::geometry::{DistanceQueryIndex, Point};

pub use report::{evaluate_corpus, EvalReport, FailedRow, GraspEval, HandAggregate, CHAMFER_DEFINITION, REPORT_SCHEMA_VERSION};

pub const CM_PER_M: f64 = 100.0;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("chamfer distance of an empty point set")]
    EmptySet,
    #[error("no hand spec for hand '{0}'")]
    UnknownHand(String),
    #[error("no mesh for object '{0}'")]
    UnknownObject(String),
}

/// Symmetric mean nearest-neighbour distance (non-squared), in cm:
/// `0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|) * 100`.
pub fn chamfer_distance(a: &[Point], b: &[Point]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let ab = mean_nearest(a, b);
    let ba = mean_nearest(b, a);
    Ok(0.5 * (ab + ba) * CM_PER_M)
}

/// Mean over `from` of the distance to the nearest point of `to`. Minima
/// are computed in parallel; the sum runs in input order.
fn mean_nearest(from: &[Point], to: &[Point]) -> f64 {
    let mins: Vec<f64> = from
        .par_iter()
        .map(|p| to.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt())
        .collect();
    mins.iter().sum::<f64>() / from.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penetration {
    pub pen_cm: f64,
    /// False when the mesh is not watertight and inside tests may be wrong.
    pub sign_reliable: bool,
}

/// Deepest interior depth of any point, `max(0, -sdf)`, in cm.
pub fn max_penetration(points: &[Point], index: &DistanceQueryIndex) -> Penetration {
    let depth = index
        .signed_distance_batch(points)
        .iter()
        .map(|sd| (-sd.value).max(0.0))
        .fold(0.0, f64::max);
    Penetration { pen_cm: depth * CM_PER_M, sign_reliable: index.mesh().is_watertight() }
}

/// True iff a strict majority of contacting fingers touch `instructed_part`.
/// The palm counts only when it is the sole participant. No contact gives
/// false.
pub fn part_match(predicted: Option<&ContactSummary>, instructed_part: &str) -> bool {
    let Some(s) = predicted else { return false };
    let fingers: Vec<_> = if s.finger_count > 0 {
        s.finger_parts.iter().filter(|fp| fp.finger != PALM).collect()
    } else {
        s.finger_parts.iter().collect()
    };
    let hits = fingers.iter().filter(|fp| fp.part == instructed_part).count();
    2 * hits > fingers.len()
}
