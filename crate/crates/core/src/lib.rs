//! Multi-hand grasp dataset tooling: contact annotation against object
//! meshes, per-hand grasp quantization into token streams, instruction
//! conversation generation, and grasp evaluation metrics.

pub mod geometry;
pub mod kinematics;
pub mod contact;
pub mod codec;
pub mod conversation;
pub mod dataset;
pub mod metrics;
pub mod pipeline;
pub mod fixture;
