//! A small, fully deterministic dataset: two objects, two hands, five
//! grasps per (object, hand). Grasps approach the object fingers-first and
//! are stopped where the deepest hand point sits [`KEPT_DEPTH`] inside the
//! mesh, except one grasp pushed to [`PINNED_DEPTH`] so the default
//! penetration filter drops exactly it.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conversation::ObjectCaption;
use crate::dataset::{write_atomic, write_jsonl_atomic, GraspInputRecord, ObjectMeta};
use crate::geometry::{DistanceQueryIndex, PartLabels, Point, TriangleMesh, Vector};
use crate::kinematics::{bundled_hand, GraspPose, HandModel};
use crate::pipeline::{derive_seed, PipelineError};

pub const FIXTURE_SEED: u64 = 20_241_202;
pub const FIXTURE_HANDS: [&str; 2] = ["allegro", "panda"];
pub const FIXTURE_OBJECTS: [&str; 2] = ["cube", "bar"];
pub const GRASPS_PER_PAIR: usize = 5;
/// Penetration depth of ordinary fixture grasps, meters.
pub const KEPT_DEPTH: f64 = 0.002;
/// Penetration depth of the pinned grasp, meters.
pub const PINNED_DEPTH: f64 = 0.03;
pub const PINNED_GRASP: &str = "cube-allegro-03";

const STEP: f64 = 0.002;
const START_DISTANCE: f64 = 0.45;
const BISECTIONS: usize = 60;

#[derive(Debug, Clone)]
pub struct FixtureInfo {
    pub root: PathBuf,
    pub config: PathBuf,
    pub grasps: Vec<GraspInputRecord>,
}

/// Cube with part labels: the two top triangles are the lid.
pub fn cube_mesh() -> TriangleMesh {
    let mut labels = vec![0u32; 12];
    labels[10] = 1;
    labels[11] = 1;
    TriangleMesh::cuboid(Point::origin(), Vector::new(0.04, 0.04, 0.04))
        .with_labels(cube_labels(labels))
        .expect("labels match faces")
}

fn cube_labels(face_labels: Vec<u32>) -> PartLabels {
    PartLabels { parts: [(0, "body".to_string()), (1, "lid".to_string())].into(), face_labels }
}

/// Unlabeled upright bar.
pub fn bar_mesh() -> TriangleMesh {
    TriangleMesh::cuboid(Point::origin(), Vector::new(0.015, 0.015, 0.1))
}

fn object_mesh(id: &str) -> TriangleMesh {
    match id {
        "cube" => cube_mesh(),
        _ => bar_mesh(),
    }
}

fn caption(id: &str) -> ObjectCaption {
    match id {
        "cube" => ObjectCaption { class_name: "cube".into(), description: "A closed box with a flat lid on top.".into() },
        _ => ObjectCaption { class_name: "bar".into(), description: "A long upright bar with a square cross-section.".into() },
    }
}

/// Directions of travel toward the object, one per grasp slot.
fn approaches(object: &str) -> [Vector; GRASPS_PER_PAIR] {
    let top = Vector::new(0.0, 0.0, -1.0);
    match object {
        "cube" => [top, Vector::x(), -Vector::x(), Vector::y(), -Vector::y()],
        _ => [Vector::x(), -Vector::y(), top, -Vector::x(), Vector::y()],
    }
}

/// Deepest interior depth of the hand at `pose`.
pub fn pose_penetration(hand: &HandModel, pose: &GraspPose, index: &DistanceQueryIndex) -> f64 {
    let cloud = hand.link_points_world(pose).expect("fixture pose is valid");
    index
        .signed_distance_batch(&cloud.to_vec())
        .iter()
        .map(|d| (-d.value).max(0.0))
        .fold(0.0, f64::max)
}

/// Hand pose whose fingers point along `dir`, spun by `spin` about it,
/// with the wrist at `origin + s * dir`.
fn pose_at(hand: &HandModel, theta: &[f64], rotation: &UnitQuaternion<f64>, origin: &Point, dir: &Vector, s: f64) -> GraspPose {
    let t = origin + dir * s;
    GraspPose {
        hand: hand.name().to_string(),
        translation: [t.x, t.y, t.z],
        rotation: rotation.scaled_axis().into(),
        theta: theta.to_vec(),
    }
}

/// Moves the hand along `dir` until its depth first exceeds `depth`, then
/// bisects the crossing.
fn place(hand: &HandModel, theta: &[f64], rotation: &UnitQuaternion<f64>, origin: &Point, dir: &Vector, depth: f64, index: &DistanceQueryIndex) -> GraspPose {
    let pen = |s: f64| pose_penetration(hand, &pose_at(hand, theta, rotation, origin, dir, s), index);
    let mut lo = 0.0;
    let mut hi = STEP;
    while pen(hi) <= depth {
        lo = hi;
        hi += STEP;
        assert!(hi < 2.0 * START_DISTANCE, "hand never reaches depth {depth}");
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if pen(mid) <= depth {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `lo` is the last position at or above the target depth from outside.
    pose_at(hand, theta, rotation, origin, dir, lo)
}

/// The twenty fixture grasps, sorted by id.
pub fn fixture_grasps() -> Vec<GraspInputRecord> {
    let mut out = Vec::new();
    for object in FIXTURE_OBJECTS {
        let index = DistanceQueryIndex::build(object_mesh(object));
        for hand_name in FIXTURE_HANDS {
            let hand = bundled_hand(hand_name).expect("bundled hand");
            for (k, dir) in approaches(object).iter().enumerate() {
                let id = format!("{object}-{hand_name}-{k:02}");
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(FIXTURE_SEED, &id));
                let theta: Vec<f64> = hand
                    .actuated_joints()
                    .map(|j| j.limits.0 + rng.gen_range(0.0..0.4) * (j.limits.1 - j.limits.0))
                    .collect();
                let dir = Unit::new_normalize(*dir);
                let align = UnitQuaternion::rotation_between(&Vector::z(), &dir)
                    .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector::x_axis(), PI));
                let spin = UnitQuaternion::from_axis_angle(&dir, rng.gen_range(0.0..2.0 * PI));
                let rotation = spin * align;
                let lateral = {
                    let v = Vector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let v = v - dir.into_inner() * v.dot(&dir);
                    v * 0.01
                };
                let origin = Point::origin() + lateral - dir.into_inner() * START_DISTANCE;
                let depth = if id == PINNED_GRASP { PINNED_DEPTH } else { KEPT_DEPTH };
                let pose = place(&hand, &theta, &rotation, &origin, &dir, depth, &index);
                out.push(GraspInputRecord::from_pose(id, object, &pose, "fixture"));
            }
        }
    }
    out.sort_by(|a, b| a.grasp_id.cmp(&b.grasp_id));
    out
}

fn obj_text(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub const FIXTURE_CONFIG: &str = r#"seed = 7
n_bins = 384
chunk_size = 4

[paths]
meshes = "meshes"
labels = "labels"
grasps = "grasps.jsonl"
output = "out"
"#;

/// Writes meshes, labels, metadata, grasps and `config.toml` under `root`.
pub fn write_fixture(root: &Path) -> Result<FixtureInfo, PipelineError> {
    let io = |p: &Path, r: std::io::Result<()>| r.map_err(|e| PipelineError::io(p, e));
    for object in FIXTURE_OBJECTS {
        let mesh = object_mesh(object);
        let path = root.join(format!("meshes/{object}.obj"));
        io(&path, write_atomic(&path, obj_text(&mesh).as_bytes()))?;
        let meta = ObjectMeta { name: Some(object.to_string()), caption: Some(caption(object)) };
        let path = root.join(format!("meshes/{object}.meta.json"));
        io(&path, write_atomic(&path, serde_json::to_string_pretty(&meta).expect("meta serializes").as_bytes()))?;
        if let Some(labels) = mesh.face_labels() {
            let path = root.join(format!("labels/{object}.json"));
            let text = serde_json::to_string(&cube_labels(labels.to_vec())).expect("labels serialize");
            io(&path, write_atomic(&path, text.as_bytes()))?;
        }
    }
    std::fs::create_dir_all(root.join("labels")).map_err(|e| PipelineError::io(&root.join("labels"), e))?;
    let grasps = fixture_grasps();
    let path = root.join("grasps.jsonl");
    io(&path, write_jsonl_atomic(&path, &grasps))?;
    let config = root.join("config.toml");
    io(&config, write_atomic(&config, FIXTURE_CONFIG.as_bytes()))?;
    Ok(FixtureInfo { root: root.to_path_buf(), config, grasps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_depths_are_pinned() {
        let grasps = fixture_grasps();
        assert_eq!(grasps.len(), 20);
        for g in &grasps {
            let hand = bundled_hand(&g.hand).unwrap();
            let index = DistanceQueryIndex::build(object_mesh(&g.object_id));
            let depth = pose_penetration(&hand, &g.pose(), &index);
            let target = if g.grasp_id == PINNED_GRASP { PINNED_DEPTH } else { KEPT_DEPTH };
            assert!(depth <= target && depth > target - 1e-6, "{}: {depth}", g.grasp_id);
        }
    }
}
