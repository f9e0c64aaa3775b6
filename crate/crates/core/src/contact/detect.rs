use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ContactError;
use crate::geometry::{DistanceQueryIndex, Point, TriangleMesh};
use crate::kinematics::HandPointCloud;

/// Contact threshold in meters.
pub const DEFAULT_EPSILON: f64 = 0.005;
/// Part id and name used for faces of meshes that carry no labels.
pub const UNLABELED_PART: (u32, &str) = (0, "body");

/// Contact state of one hand link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkContact {
    pub link: String,
    pub finger: String,
    pub in_contact: bool,
    pub contact_part: Option<u32>,
    pub contact_part_name: Option<String>,
    /// Minimum signed distance over the link's points; `+inf` (serialized
    /// as null) when the link has no points.
    #[serde(with = "infinite_as_null")]
    pub min_distance: f64,
}

/// Per-link contact flags for one grasp, computed with threshold `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub grasp_id: String,
    pub epsilon: f64,
    pub links: Vec<LinkContact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Sorted set of (finger, part name) pairs that identifies a grasp's
/// contact pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContactPattern(pub BTreeSet<(String, String)>);

impl ContactPattern {
    pub fn key(&self) -> String {
        self.0.iter().map(|(f, p)| format!("{f}:{p}")).collect::<Vec<_>>().join(",")
    }
}

impl ContactRecord {
    pub fn contacting_links(&self) -> impl Iterator<Item = &LinkContact> {
        self.links.iter().filter(|l| l.in_contact)
    }

    pub fn has_contact(&self) -> bool {
        self.links.iter().any(|l| l.in_contact)
    }

    /// One entry per contacting finger: the part touched by its closest
    /// contacting link. Keyed by finger name.
    pub fn finger_parts(&self) -> BTreeMap<String, (u32, String)> {
        let mut best: BTreeMap<String, (f64, u32, String)> = BTreeMap::new();
        for l in self.contacting_links() {
            let (Some(id), Some(name)) = (l.contact_part, l.contact_part_name.as_ref()) else {
                continue;
            };
            match best.get(&l.finger) {
                Some((d, _, _)) if *d <= l.min_distance => {}
                _ => {
                    best.insert(l.finger.clone(), (l.min_distance, id, name.clone()));
                }
            }
        }
        best.into_iter().map(|(f, (_, id, name))| (f, (id, name))).collect()
    }

    pub fn pattern(&self) -> ContactPattern {
        ContactPattern(
            self.finger_parts()
                .into_iter()
                .map(|(finger, (_, part))| (finger, part))
                .collect(),
        )
    }
}

pub(crate) fn face_part(mesh: &TriangleMesh, face: usize) -> (u32, String) {
    match mesh.face_label(face) {
        Some(id) => (id, mesh.part_name(id).unwrap_or("unnamed").to_string()),
        None => (UNLABELED_PART.0, UNLABELED_PART.1.to_string()),
    }
}

/// Flags each link whose closest point lies within `epsilon` of the object
/// (signed distance, so penetrating points count), and attributes the
/// contact to the part of the face nearest that point.
pub fn detect_contacts(
    grasp_id: impl Into<String>,
    hand_points: &HandPointCloud,
    index: &DistanceQueryIndex,
    epsilon: f64,
) -> Result<ContactRecord, ContactError> {
    if !(epsilon > 0.0) {
        return Err(ContactError::NonPositive { what: "epsilon", value: epsilon });
    }
    let mut warnings = Vec::new();
    let links = hand_points
        .links
        .iter()
        .map(|lp| {
            let Some((value, face)) = min_signed_distance(index, &lp.points) else {
                warnings.push(format!("link '{}' has no sample points", lp.link));
                return LinkContact {
                    link: lp.link.clone(),
                    finger: lp.finger.clone(),
                    in_contact: false,
                    contact_part: None,
                    contact_part_name: None,
                    min_distance: f64::INFINITY,
                };
            };
            let in_contact = value < epsilon;
            let (part, name) = if in_contact {
                let (id, name) = face_part(index.mesh(), face);
                (Some(id), Some(name))
            } else {
                (None, None)
            };
            LinkContact {
                link: lp.link.clone(),
                finger: lp.finger.clone(),
                in_contact,
                contact_part: part,
                contact_part_name: name,
                min_distance: value,
            }
        })
        .collect();
    Ok(ContactRecord { grasp_id: grasp_id.into(), epsilon, links, warnings })
}

/// Smallest signed distance over `points` and the nearest face of the
/// point achieving it (first such point on ties).
fn min_signed_distance(index: &DistanceQueryIndex, points: &[Point]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for sd in index.signed_distance_batch(points) {
        if best.map_or(true, |(v, _)| sd.value < v) {
            best = Some((sd.value, sd.nearest_face));
        }
    }
    best
}

/// Serializes non-finite floats as `null` and reads `null` back as `+inf`.
pub mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PartLabels, Vector};
    use crate::kinematics::LinkPoints;

    fn cube_index() -> DistanceQueryIndex {
        let cube = TriangleMesh::cuboid(Point::origin(), Vector::new(0.5, 0.5, 0.5));
        let mut labels = vec![0u32; 12];
        labels[10] = 1;
        labels[11] = 1;
        let cube = cube
            .with_labels(PartLabels {
                parts: [(0, "body".to_string()), (1, "lid".to_string())].into(),
                face_labels: labels,
            })
            .unwrap();
        DistanceQueryIndex::build(cube)
    }

    fn cloud(links: Vec<(&str, &str, Vec<Point>)>) -> HandPointCloud {
        HandPointCloud {
            hand: "toy".into(),
            links: links
                .into_iter()
                .map(|(l, f, p)| LinkPoints { link: l.into(), finger: f.into(), points: p })
                .collect(),
        }
    }

    #[test]
    fn penetrating_point_is_contact() {
        let idx = cube_index();
        let rec = detect_contacts("g", &cloud(vec![("tip", "index", vec![Point::new(0.0, 0.0, 0.499)])]), &idx, 0.005).unwrap();
        assert!(rec.links[0].in_contact);
        assert!((rec.links[0].min_distance + 0.001).abs() < 1e-12);
        assert_eq!(rec.links[0].contact_part_name.as_deref(), Some("lid"));
    }

    #[test]
    fn distant_links_are_not_in_contact() {
        let idx = cube_index();
        let rec = detect_contacts(
            "g",
            &cloud(vec![
                ("a", "index", vec![Point::new(0.0, 0.0, 0.56), Point::new(0.6, 0.0, 0.0)]),
                ("b", "thumb", vec![Point::new(-0.55, 0.0, 0.0)]),
            ]),
            &idx,
            0.005,
        )
        .unwrap();
        assert!(rec.links.iter().all(|l| !l.in_contact && l.contact_part.is_none()));
        assert!(!rec.has_contact());
    }

    #[test]
    fn empty_link_warns_and_is_infinite() {
        let idx = cube_index();
        let rec = detect_contacts("g", &cloud(vec![("palm", "palm", vec![])]), &idx, 0.005).unwrap();
        assert_eq!(rec.links[0].min_distance, f64::INFINITY);
        assert!(!rec.links[0].in_contact);
        assert_eq!(rec.warnings.len(), 1);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"min_distance\":null"));
        let back: ContactRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn non_positive_epsilon_is_error() {
        let idx = cube_index();
        assert!(detect_contacts("g", &cloud(vec![]), &idx, 0.0).is_err());
    }

    #[test]
    fn pattern_uses_closest_link_per_finger() {
        let idx = cube_index();
        let rec = detect_contacts(
            "g",
            &cloud(vec![
                ("i1", "index", vec![Point::new(0.0, 0.0, 0.503)]),
                ("i2", "index", vec![Point::new(0.0, -0.502, 0.0)]),
                ("t1", "thumb", vec![Point::new(0.0, 0.501, 0.0)]),
            ]),
            &idx,
            0.005,
        )
        .unwrap();
        let parts = rec.finger_parts();
        assert_eq!(parts["index"].1, "body");
        assert_eq!(rec.pattern().key(), "index:body,thumb:body");
    }
}
