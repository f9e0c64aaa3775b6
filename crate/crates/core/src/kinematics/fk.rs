use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{HandModel, JointDrive, JointKind, KinematicsError};
use crate::geometry::{Point, Vector};

/// Wrist pose plus joint displacements. `R` is an axis-angle vector whose
/// direction is the rotation axis and whose norm is the angle in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub hand: String,
    #[serde(rename = "T")]
    pub translation: [f64; 3],
    #[serde(rename = "R")]
    pub rotation: [f64; 3],
    pub theta: Vec<f64>,
}

impl GraspPose {
    /// Concatenated `[T, R, theta]`.
    pub fn to_vector(&self) -> Vec<f64> {
        self.translation
            .iter()
            .chain(self.rotation.iter())
            .chain(self.theta.iter())
            .copied()
            .collect()
    }

    pub fn from_vector(hand: impl Into<String>, v: &[f64]) -> Result<Self, KinematicsError> {
        if v.len() < 6 {
            return Err(KinematicsError::Arity { expected: 6, found: v.len() });
        }
        Ok(GraspPose {
            hand: hand.into(),
            translation: [v[0], v[1], v[2]],
            rotation: [v[3], v[4], v[5]],
            theta: v[6..].to_vec(),
        })
    }

    pub fn wrist(&self) -> Isometry3<f64> {
        Isometry3::new(Vector::from(self.translation), Vector::from(self.rotation))
    }
}

/// World transform of every link, indexed like `HandModel::links`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTransforms {
    names: Vec<String>,
    transforms: Vec<Isometry3<f64>>,
}

impl LinkTransforms {
    pub fn get(&self, link: &str) -> Option<&Isometry3<f64>> {
        self.names.iter().position(|n| n == link).map(|i| &self.transforms[i])
    }

    pub fn by_index(&self, i: usize) -> &Isometry3<f64> {
        &self.transforms[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Isometry3<f64>)> {
        self.names.iter().map(String::as_str).zip(self.transforms.iter())
    }
}

/// One link's sample points placed in world space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPoints {
    pub link: String,
    pub finger: String,
    pub points: Vec<Point>,
}

/// Every link's world-space sample points for one pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandPointCloud {
    pub hand: String,
    pub links: Vec<LinkPoints>,
}

impl HandPointCloud {
    pub fn all_points(&self) -> impl Iterator<Item = &Point> {
        self.links.iter().flat_map(|l| l.points.iter())
    }

    pub fn point_count(&self) -> usize {
        self.links.iter().map(|l| l.points.len()).sum()
    }

    pub fn to_vec(&self) -> Vec<Point> {
        self.all_points().copied().collect()
    }
}

impl HandModel {
    /// Checks hand name, pose arity, and joint limits (widened by `slack`).
    pub fn validate_pose(&self, pose: &GraspPose, slack: f64) -> Result<(), KinematicsError> {
        if pose.hand != self.name() {
            return Err(KinematicsError::HandMismatch {
                expected: self.name().to_string(),
                found: pose.hand.clone(),
            });
        }
        if pose.theta.len() != self.dof() {
            return Err(KinematicsError::Arity { expected: self.dof(), found: pose.theta.len() });
        }
        if let Some(bad) = pose
            .translation
            .iter()
            .chain(pose.rotation.iter())
            .chain(pose.theta.iter())
            .find(|x| !x.is_finite())
        {
            return Err(KinematicsError::NonFinite(*bad));
        }
        for (joint, &value) in self.actuated_joints().zip(pose.theta.iter()) {
            let (lo, hi) = joint.limits;
            if value < lo - slack || value > hi + slack {
                return Err(KinematicsError::OutOfLimits {
                    joint: joint.name.clone(),
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Link transforms with the wrist at `wrist`, ignoring the pose's own
    /// wrist fields. Joint values are not limit-checked here.
    pub fn forward_kinematics_from(&self, wrist: Isometry3<f64>, theta: &[f64]) -> LinkTransforms {
        let mut transforms = vec![Isometry3::identity(); self.links().len()];
        transforms[self.root_index()] = wrist;
        for &ji in self.fk_order() {
            let joint = &self.joints()[ji];
            let q = match joint.drive {
                JointDrive::Fixed => 0.0,
                JointDrive::Independent(i) => theta[i],
                JointDrive::Mimic { source, ratio } => ratio * theta[source],
            };
            let motion = match joint.kind {
                JointKind::Revolute => {
                    Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&joint.axis, q))
                }
                JointKind::Prismatic => Isometry3::from_parts(
                    Translation3::from(joint.axis.into_inner() * q),
                    UnitQuaternion::identity(),
                ),
                JointKind::Fixed => Isometry3::identity(),
            };
            transforms[joint.child] = transforms[joint.parent] * joint.origin * motion;
        }
        LinkTransforms {
            names: self.links().iter().map(|l| l.name.clone()).collect(),
            transforms,
        }
    }

    pub fn forward_kinematics(&self, pose: &GraspPose) -> Result<LinkTransforms, KinematicsError> {
        self.validate_pose(pose, 0.0)?;
        Ok(self.forward_kinematics_from(pose.wrist(), &pose.theta))
    }

    pub fn link_points_world(&self, pose: &GraspPose) -> Result<HandPointCloud, KinematicsError> {
        let fk = self.forward_kinematics(pose)?;
        Ok(self.place_points(&fk))
    }

    pub fn place_points(&self, fk: &LinkTransforms) -> HandPointCloud {
        let links = self
            .links()
            .iter()
            .enumerate()
            .map(|(i, link)| {
                let t = fk.by_index(i);
                LinkPoints {
                    link: link.name.clone(),
                    finger: link.finger.clone(),
                    points: link.sample_points.iter().map(|p| t * p).collect(),
                }
            })
            .collect();
        HandPointCloud { hand: self.name().to_string(), links }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::bundled_hand;
    use std::f64::consts::FRAC_PI_2;

    const TOY: &str = r#"{
        "name": "toy", "dof": 1,
        "joints": [{"name": "j0", "parent": "base", "child": "tip", "type": "revolute",
                    "axis": [0, 0, 1], "limits": [-3.2, 3.2]}],
        "links": [{"name": "base", "finger": "palm", "sample_points": [[0.1, 0.2, 0.3]]},
                  {"name": "tip", "finger": "index", "sample_points": [[1, 0, 0]]}]
    }"#;

    fn toy_pose(theta: f64) -> GraspPose {
        GraspPose { hand: "toy".into(), translation: [0.0; 3], rotation: [0.0; 3], theta: vec![theta] }
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        let hand = HandModel::from_json(TOY).unwrap();
        let cloud = hand.link_points_world(&toy_pose(FRAC_PI_2)).unwrap();
        let p = cloud.links[1].points[0];
        assert!((p - Point::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_pose_uses_static_origins() {
        let hand = bundled_hand("allegro").unwrap();
        let pose = GraspPose {
            hand: "allegro".into(),
            translation: [0.0; 3],
            rotation: [0.0; 3],
            theta: vec![0.0; 16],
        };
        // the thumb's first joint has limits excluding zero; use slack-free FK directly
        let fk = hand.forward_kinematics_from(pose.wrist(), &pose.theta);
        for joint in hand.joints() {
            let expected = fk.by_index(joint.parent) * joint.origin;
            let got = fk.by_index(joint.child);
            assert!((expected.to_homogeneous() - got.to_homogeneous()).abs().max() < 1e-15);
        }
    }

    #[test]
    fn translation_only_shifts_points() {
        let hand = bundled_hand("panda").unwrap();
        let mut pose = GraspPose { hand: "panda".into(), translation: [0.0; 3], rotation: [0.0; 3], theta: vec![0.02] };
        let base = hand.link_points_world(&pose).unwrap();
        pose.translation = [0.0, 0.0, 0.1];
        let moved = hand.link_points_world(&pose).unwrap();
        assert_eq!(base.point_count(), moved.point_count());
        for (a, b) in base.all_points().zip(moved.all_points()) {
            assert!((b - a - Vector::new(0.0, 0.0, 0.1)).norm() < 1e-15);
        }
    }

    #[test]
    fn allegro_has_512_points() {
        let hand = bundled_hand("allegro").unwrap();
        let theta: Vec<f64> = hand.actuated_joints().map(|j| 0.5 * (j.limits.0 + j.limits.1)).collect();
        let pose = GraspPose { hand: "allegro".into(), translation: [0.0; 3], rotation: [0.0; 3], theta };
        assert_eq!(hand.link_points_world(&pose).unwrap().point_count(), 512);
    }

    #[test]
    fn out_of_limits_rejected_before_geometry() {
        let hand = HandModel::from_json(TOY).unwrap();
        match hand.link_points_world(&toy_pose(4.0)) {
            Err(KinematicsError::OutOfLimits { joint, .. }) => assert_eq!(joint, "j0"),
            other => panic!("{other:?}"),
        }
        assert!(hand.validate_pose(&toy_pose(3.3), 0.2).is_ok());
    }

    #[test]
    fn hand_mismatch_and_arity() {
        let hand = HandModel::from_json(TOY).unwrap();
        let mut pose = toy_pose(0.0);
        pose.hand = "other".into();
        assert!(matches!(hand.forward_kinematics(&pose), Err(KinematicsError::HandMismatch { .. })));
        let mut pose = toy_pose(0.0);
        pose.theta.push(0.0);
        assert!(matches!(hand.forward_kinematics(&pose), Err(KinematicsError::Arity { .. })));
    }

    #[test]
    fn pose_vector_round_trip() {
        let pose = GraspPose { hand: "toy".into(), translation: [1.0, 2.0, 3.0], rotation: [0.1, 0.2, 0.3], theta: vec![0.4] };
        let v = pose.to_vector();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 0.1, 0.2, 0.3, 0.4]);
        assert_eq!(GraspPose::from_vector("toy", &v).unwrap(), pose);
    }
}
