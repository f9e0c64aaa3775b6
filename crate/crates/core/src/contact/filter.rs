use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ContactError, ContactPattern, ContactRecord};
use crate::geometry::{DistanceQueryIndex, Point};

/// Maximum allowed penetration depth in meters.
pub const DEFAULT_PENETRATION_THRESHOLD: f64 = 0.02;
pub const DEFAULT_PER_PATTERN_DEXTEROUS: usize = 1;
pub const DEFAULT_PER_PATTERN_GRIPPER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenetrationVerdict {
    pub keep: bool,
    /// Deepest penetration in meters (0 when no point is inside).
    pub max_penetration: f64,
    pub sign_reliable: bool,
}

/// Drops a grasp when any hand point sits deeper than `threshold` inside
/// the object. A depth exactly at the threshold is kept.
pub fn filter_by_penetration<'a>(
    points: impl IntoIterator<Item = &'a Point>,
    index: &DistanceQueryIndex,
    threshold: f64,
) -> Result<PenetrationVerdict, ContactError> {
    if !(threshold > 0.0) {
        return Err(ContactError::NonPositive { what: "penetration threshold", value: threshold });
    }
    let points: Vec<Point> = points.into_iter().copied().collect();
    let mut max_penetration: f64 = 0.0;
    for sd in index.signed_distance_batch(&points) {
        max_penetration = max_penetration.max(-sd.value);
    }
    Ok(PenetrationVerdict {
        keep: max_penetration <= threshold,
        max_penetration,
        sign_reliable: index.mesh().is_watertight(),
    })
}

/// Groups records by contact pattern and draws up to `per_pattern` grasp
/// ids from each group. Returns ids sorted ascending.
pub fn select_grasps_per_pattern(
    records: &[ContactRecord],
    per_pattern: usize,
    seed: u64,
) -> Result<Vec<String>, ContactError> {
    if per_pattern == 0 {
        return Err(ContactError::NonPositive { what: "per_pattern", value: 0.0 });
    }
    let mut groups: BTreeMap<ContactPattern, Vec<&str>> = BTreeMap::new();
    for r in records {
        groups.entry(r.pattern()).or_default().push(&r.grasp_id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for ids in groups.values_mut() {
        ids.sort_unstable();
        ids.dedup();
        if ids.len() <= per_pattern {
            selected.extend(ids.iter().map(|s| s.to_string()));
        } else {
            selected.extend(ids.choose_multiple(&mut rng, per_pattern).map(|s| s.to_string()));
        }
    }
    selected.sort();
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::LinkContact;
    use crate::geometry::{TriangleMesh, Vector};

    fn cube() -> DistanceQueryIndex {
        DistanceQueryIndex::build(TriangleMesh::cuboid(Point::origin(), Vector::new(0.05, 0.05, 0.05)))
    }

    #[test]
    fn outside_points_are_kept() {
        let v = filter_by_penetration(&[Point::new(0.1, 0.0, 0.0)], &cube(), 0.02).unwrap();
        assert!(v.keep);
        assert_eq!(v.max_penetration, 0.0);
    }

    #[test]
    fn three_cm_inside_is_dropped() {
        let pts = [Point::new(0.0, 0.0, 0.08), Point::new(0.0, 0.0, 0.02)];
        let v = filter_by_penetration(&pts, &cube(), 0.02).unwrap();
        assert!(!v.keep);
        assert!((v.max_penetration - 0.03).abs() < 1e-12);
    }

    #[test]
    fn exactly_at_threshold_is_kept() {
        // 0.05 - 0.025 = 0.025 exactly in binary, threshold 0.025
        let v = filter_by_penetration(&[Point::new(0.0, 0.0, 0.025)], &cube(), 0.025).unwrap();
        assert_eq!(v.max_penetration, 0.025);
        assert!(v.keep);
    }

    fn record(id: &str, pairs: &[(&str, &str)]) -> ContactRecord {
        ContactRecord {
            grasp_id: id.into(),
            epsilon: 0.005,
            links: pairs
                .iter()
                .map(|(f, p)| LinkContact {
                    link: format!("{f}_tip"),
                    finger: f.to_string(),
                    in_contact: true,
                    contact_part: Some(0),
                    contact_part_name: Some(p.to_string()),
                    min_distance: 0.0,
                })
                .collect(),
            warnings: vec![],
        }
    }

    #[test]
    fn one_pattern_collapses_to_one_grasp() {
        let recs: Vec<_> = (0..5).map(|i| record(&format!("g{i}"), &[("thumb", "body")])).collect();
        assert_eq!(select_grasps_per_pattern(&recs, 1, 0).unwrap().len(), 1);
    }

    #[test]
    fn one_grasp_per_distinct_pattern() {
        let recs = vec![
            record("a", &[("thumb", "body")]),
            record("b", &[("thumb", "lid")]),
            record("c", &[("thumb", "body"), ("index", "lid")]),
            record("d", &[("thumb", "lid")]),
        ];
        let sel = select_grasps_per_pattern(&recs, 1, 11).unwrap();
        assert_eq!(sel.len(), 3);
        assert!(sel.contains(&"a".to_string()) && sel.contains(&"c".to_string()));
        assert_eq!(sel, select_grasps_per_pattern(&recs, 1, 11).unwrap());
    }

    #[test]
    fn zero_per_pattern_is_error() {
        assert!(select_grasps_per_pattern(&[], 0, 0).is_err());
    }
}
