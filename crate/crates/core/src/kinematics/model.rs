use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::KinematicsError;
use crate::geometry::{Point, Vector};

const AXIS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

/// Dexterous hands and parallel grippers are treated differently when
/// picking grasps per contact pattern.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandClass {
    #[default]
    Dexterous,
    Gripper,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OriginSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    #[serde(rename = "type")]
    pub kind: JointKind,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin: OriginSpec,
    #[serde(default)]
    pub limits: [f64; 2],
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub finger: String,
    #[serde(default)]
    pub sample_points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimicSpec {
    pub joint: String,
    pub source: String,
    pub ratio: f64,
}

/// On-disk hand description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandSpecFile {
    pub name: String,
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default)]
    pub class: HandClass,
    pub dof: usize,
    pub joints: Vec<JointSpec>,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub mimic: Vec<MimicSpec>,
}

/// How a joint's displacement is obtained from the pose vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JointDrive {
    Fixed,
    /// Index into the pose's joint-angle vector.
    Independent(usize),
    /// `ratio * theta[source]`.
    Mimic { source: usize, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    pub kind: JointKind,
    pub axis: Unit<Vector>,
    pub origin: Isometry3<f64>,
    pub limits: (f64, f64),
    pub drive: JointDrive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub finger: String,
    pub sample_points: Vec<Point>,
}

/// Validated kinematic tree.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    name: String,
    display_name: String,
    class: HandClass,
    dof: usize,
    joints: Vec<Joint>,
    links: Vec<Link>,
    root: usize,
    /// Joints ordered so every parent link is placed before its children.
    fk_order: Vec<usize>,
    /// Independent joint index for each pose dimension.
    actuated: Vec<usize>,
}

impl HandModel {
    pub fn from_spec(spec: HandSpecFile) -> Result<Self, KinematicsError> {
        let err = |joint: &str, reason: String| KinematicsError::Spec {
            hand: spec.name.clone(),
            joint: joint.to_string(),
            reason,
        };

        let mut link_ids = BTreeMap::new();
        for (i, l) in spec.links.iter().enumerate() {
            if l.finger.trim().is_empty() {
                return Err(err("-", format!("link '{}' has no finger assignment", l.name)));
            }
            if link_ids.insert(l.name.clone(), i).is_some() {
                return Err(err("-", format!("duplicate link '{}'", l.name)));
            }
        }
        let mut joint_names = BTreeMap::new();
        for (i, j) in spec.joints.iter().enumerate() {
            if joint_names.insert(j.name.clone(), i).is_some() {
                return Err(err(&j.name, "duplicate joint name".into()));
            }
        }

        let mimic: BTreeMap<&str, &MimicSpec> = spec.mimic.iter().map(|m| (m.joint.as_str(), m)).collect();
        for m in &spec.mimic {
            let Some(&ji) = joint_names.get(&m.joint) else {
                return Err(err(&m.joint, "mimic entry names an unknown joint".into()));
            };
            let Some(&si) = joint_names.get(&m.source) else {
                return Err(err(&m.joint, format!("mimic source '{}' is not a joint", m.source)));
            };
            if spec.joints[ji].kind == JointKind::Fixed || spec.joints[si].kind == JointKind::Fixed {
                return Err(err(&m.joint, "mimic joints and sources must be movable".into()));
            }
            if mimic.contains_key(m.source.as_str()) {
                return Err(err(&m.joint, format!("mimic source '{}' is itself a mimic joint", m.source)));
            }
            if !m.ratio.is_finite() {
                return Err(err(&m.joint, "mimic ratio must be finite".into()));
            }
        }

        // independent joints, in file order, define the pose's theta layout
        let mut theta_index = BTreeMap::new();
        let mut actuated = Vec::new();
        for (i, j) in spec.joints.iter().enumerate() {
            if j.kind != JointKind::Fixed && !mimic.contains_key(j.name.as_str()) {
                theta_index.insert(j.name.clone(), actuated.len());
                actuated.push(i);
            }
        }
        if actuated.len() != spec.dof {
            return Err(err(
                "-",
                format!("declared dof {} but found {} independent joints", spec.dof, actuated.len()),
            ));
        }

        let mut parent_of: Vec<Option<usize>> = vec![None; spec.links.len()];
        let mut joints = Vec::with_capacity(spec.joints.len());
        for (i, j) in spec.joints.iter().enumerate() {
            let parent = *link_ids
                .get(&j.parent)
                .ok_or_else(|| err(&j.name, format!("unknown parent link '{}'", j.parent)))?;
            let child = *link_ids
                .get(&j.child)
                .ok_or_else(|| err(&j.name, format!("unknown child link '{}'", j.child)))?;
            if parent_of[child].is_some() {
                return Err(err(&j.name, format!("link '{}' already has a parent joint", j.child)));
            }
            parent_of[child] = Some(i);

            let axis = Vector::from(j.axis);
            let (limits, axis) = if j.kind == JointKind::Fixed {
                ((0.0, 0.0), Unit::new_normalize(Vector::z()))
            } else {
                if ((axis.norm() - 1.0).abs()) > AXIS_TOLERANCE {
                    return Err(err(&j.name, format!("axis {:?} is not unit length", j.axis)));
                }
                if !(j.limits[0] < j.limits[1]) {
                    return Err(err(&j.name, format!("limits {:?} need lo < hi", j.limits)));
                }
                ((j.limits[0], j.limits[1]), Unit::new_unchecked(axis))
            };
            let drive = match (j.kind, mimic.get(j.name.as_str())) {
                (JointKind::Fixed, _) => JointDrive::Fixed,
                (_, Some(m)) => JointDrive::Mimic { source: theta_index[&m.source], ratio: m.ratio },
                _ => JointDrive::Independent(theta_index[&j.name]),
            };
            joints.push(Joint {
                name: j.name.clone(),
                parent,
                child,
                kind: j.kind,
                axis,
                origin: origin_isometry(&j.origin),
                limits,
                drive,
            });
        }

        let roots: Vec<usize> = (0..spec.links.len()).filter(|&l| parent_of[l].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(err("-", "joint graph has no root link (cycle)".into())),
            many => {
                let names: Vec<_> = many.iter().map(|&r| spec.links[r].name.as_str()).collect();
                return Err(err("-", format!("multiple root links: {}", names.join(", "))));
            }
        };

        let mut fk_order = Vec::with_capacity(joints.len());
        let mut placed = BTreeSet::from([root]);
        let mut frontier = vec![root];
        while let Some(link) = frontier.pop() {
            for (ji, j) in joints.iter().enumerate() {
                if j.parent == link && placed.insert(j.child) {
                    fk_order.push(ji);
                    frontier.push(j.child);
                }
            }
        }
        if let Some(stray) = (0..joints.len()).find(|ji| !fk_order.contains(ji)) {
            return Err(err(&joints[stray].name, "joint lies on a cycle disconnected from the root".into()));
        }
        if spec.links[root].finger != "palm" {
            return Err(err("-", format!("root link '{}' must belong to the palm", spec.links[root].name)));
        }

        let links = spec
            .links
            .into_iter()
            .map(|l| Link {
                name: l.name,
                finger: l.finger,
                sample_points: l.sample_points.into_iter().map(Point::from).collect(),
            })
            .collect();

        Ok(HandModel {
            display_name: spec.display_name.unwrap_or_else(|| spec.name.clone()),
            name: spec.name,
            class: spec.class,
            dof: spec.dof,
            joints,
            links,
            root,
            fk_order,
            actuated,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, KinematicsError> {
        let spec: HandSpecFile =
            serde_json::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
        Self::from_spec(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Human-readable name used in generated text, e.g. "Shadow Hand".
    pub fn display_name(&self) -> &str {
        &self.display_name
    }

    pub fn class(&self) -> HandClass {
        self.class
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Pose-vector length: 3 translation + 3 rotation + dof.
    pub fn pose_dim(&self) -> usize {
        6 + self.dof
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn root_link(&self) -> &Link {
        &self.links[self.root]
    }

    pub(crate) fn root_index(&self) -> usize {
        self.root
    }

    pub(crate) fn fk_order(&self) -> &[usize] {
        &self.fk_order
    }

    /// The independent joints in pose order.
    pub fn actuated_joints(&self) -> impl Iterator<Item = &Joint> {
        self.actuated.iter().map(|&j| &self.joints[j])
    }

    /// Names of the pose dimensions: tx, ty, tz, rx, ry, rz, then one per
    /// independent joint.
    pub fn dimension_names(&self) -> Vec<String> {
        ["tx", "ty", "tz", "rx", "ry", "rz"]
            .iter()
            .map(|s| s.to_string())
            .chain(self.actuated_joints().map(|j| j.name.clone()))
            .collect()
    }

    pub fn sample_point_count(&self) -> usize {
        self.links.iter().map(|l| l.sample_points.len()).sum()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }
}

pub fn load_hand_spec(path: &Path) -> Result<HandModel, KinematicsError> {
    let text = std::fs::read_to_string(path).map_err(|e| KinematicsError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    HandModel::from_json(&text)
}

fn origin_isometry(o: &OriginSpec) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(o.xyz[0], o.xyz[1], o.xyz[2]),
        UnitQuaternion::from_euler_angles(o.rpy[0], o.rpy[1], o.rpy[2]),
    )
}

const BUNDLED: &[(&str, &str)] = &[
    ("allegro", include_str!("../../assets/hands/allegro.json")),
    ("shadow", include_str!("../../assets/hands/shadow.json")),
    ("barrett", include_str!("../../assets/hands/barrett.json")),
    ("jaco", include_str!("../../assets/hands/jaco.json")),
    ("panda", include_str!("../../assets/hands/panda.json")),
];

/// Names of the hands shipped with the crate.
pub fn bundled_hand_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Raw JSON of a bundled hand spec.
pub fn bundled_hand_json(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, j)| *j)
}

pub fn bundled_hand(name: &str) -> Option<HandModel> {
    bundled_hand_json(name).map(|j| HandModel::from_json(j).expect("bundled hand spec is valid"))
}

pub fn bundled_hands() -> Vec<HandModel> {
    bundled_hand_names().filter_map(bundled_hand).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TOY: &str = r#"{
        "name": "toy", "dof": 1,
        "joints": [{"name": "j0", "parent": "base", "child": "tip", "type": "revolute",
                    "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0]}, "limits": [-3.2, 3.2]}],
        "links": [{"name": "base", "finger": "palm", "sample_points": []},
                  {"name": "tip", "finger": "index", "sample_points": [[1, 0, 0]]}]
    }"#;

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(TOY).unwrap();
        f(&mut v);
        v.to_string()
    }

    fn spec_error(text: &str) -> (String, String) {
        match HandModel::from_json(text) {
            Err(KinematicsError::Spec { joint, reason, .. }) => (joint, reason),
            other => panic!("expected spec error, got {other:?}"),
        }
    }

    #[test]
    fn toy_chain_has_one_dof() {
        let hand = HandModel::from_json(TOY).unwrap();
        assert_eq!(hand.dof(), 1);
        assert_eq!(hand.pose_dim(), 7);
        assert_eq!(hand.root_link().name, "base");
        assert_eq!(hand.dimension_names()[6], "j0");
    }

    #[test]
    fn dof_mismatch_is_rejected() {
        let (_, reason) = spec_error(&edit(|v| v["dof"] = 2.into()));
        assert!(reason.contains("declared dof 2"), "{reason}");
    }

    #[test]
    fn non_unit_axis_names_joint() {
        let (joint, reason) = spec_error(&edit(|v| v["joints"][0]["axis"] = serde_json::json!([0, 0, 2])));
        assert_eq!(joint, "j0");
        assert!(reason.contains("unit"));
    }

    #[test]
    fn inverted_limits_are_rejected() {
        let (joint, _) = spec_error(&edit(|v| v["joints"][0]["limits"] = serde_json::json!([1, -1])));
        assert_eq!(joint, "j0");
    }

    #[test]
    fn cycle_is_rejected() {
        let text = edit(|v| {
            v["dof"] = 2.into();
            v["joints"].as_array_mut().unwrap().push(serde_json::json!({
                "name": "back", "parent": "tip", "child": "base", "type": "revolute",
                "axis": [1, 0, 0], "limits": [-1, 1]
            }));
        });
        let (_, reason) = spec_error(&text);
        assert!(reason.contains("cycle"), "{reason}");
    }

    #[test]
    fn second_parent_names_joint() {
        let text = edit(|v| {
            v["dof"] = 2.into();
            v["links"].as_array_mut().unwrap().push(serde_json::json!({"name": "extra", "finger": "index"}));
            v["joints"].as_array_mut().unwrap().push(serde_json::json!({
                "name": "dup", "parent": "extra", "child": "tip", "type": "revolute",
                "axis": [1, 0, 0], "limits": [-1, 1]
            }));
        });
        let (joint, _) = spec_error(&text);
        assert_eq!(joint, "dup");
    }

    #[test]
    fn missing_finger_is_rejected() {
        let (_, reason) = spec_error(&edit(|v| v["links"][1]["finger"] = "".into()));
        assert!(reason.contains("finger"));
    }

    #[test]
    fn bundled_hands_load() {
        let dofs: BTreeMap<String, usize> = bundled_hands().iter().map(|h| (h.name().to_string(), h.dof())).collect();
        assert_eq!(dofs["allegro"], 16);
        assert_eq!(dofs["shadow"], 22);
        assert_eq!(dofs["barrett"], 4);
        assert_eq!(dofs["jaco"], 3);
        assert_eq!(dofs["panda"], 1);
        for hand in bundled_hands() {
            assert_eq!(hand.sample_point_count(), 512, "{}", hand.name());
        }
    }

    #[test]
    fn panda_mimic_joint_follows_source() {
        let panda = bundled_hand("panda").unwrap();
        let j2 = panda.joints().iter().find(|j| j.name == "finger_joint2").unwrap();
        assert_eq!(j2.drive, JointDrive::Mimic { source: 0, ratio: 1.0 });
        assert_eq!(panda.class(), HandClass::Gripper);
    }
}
