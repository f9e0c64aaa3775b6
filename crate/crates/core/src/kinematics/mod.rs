//! Declarative hand models and forward kinematics.

mod fk;
mod model;

use std::path::PathBuf;

pub use fk::{GraspPose, HandPointCloud, LinkPoints, LinkTransforms};
pub use model::{
    bundled_hand, bundled_hand_json, bundled_hand_names, bundled_hands, load_hand_spec, HandClass, HandModel,
    HandSpecFile, Joint, JointDrive, JointKind, JointSpec, Link, LinkSpec, MimicSpec, OriginSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum KinematicsError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("hand spec is not valid JSON: {0}")]
    Parse(String),
    #[error("hand '{hand}', joint '{joint}': {reason}")]
    Spec { hand: String, joint: String, reason: String },
    #[error("pose is for hand '{found}' but model is '{expected}'")]
    HandMismatch { expected: String, found: String },
    #[error("expected {expected} joint values, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("joint '{joint}' value {value} outside limits [{lo}, {hi}]")]
    OutOfLimits { joint: String, value: f64, lo: f64, hi: f64 },
    #[error("pose contains non-finite value {0}")]
    NonFinite(f64),
}
