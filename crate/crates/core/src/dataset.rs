//! Records exchanged between pipeline stages and the object catalog.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::conversation::ObjectCaption;
use crate::geometry::{load_mesh, DistanceQueryIndex, MeshError};
use crate::kinematics::GraspPose;

/// One externally generated grasp, as read from the input JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspInputRecord {
    pub grasp_id: String,
    pub object_id: String,
    pub hand: String,
    #[serde(rename = "T")]
    pub translation: [f64; 3],
    #[serde(rename = "R")]
    pub rotation: [f64; 3],
    pub theta: Vec<f64>,
    #[serde(default)]
    pub generator: String,
}

impl GraspInputRecord {
    pub fn pose(&self) -> GraspPose {
        GraspPose {
            hand: self.hand.clone(),
            translation: self.translation,
            rotation: self.rotation,
            theta: self.theta.clone(),
        }
    }

    pub fn from_pose(grasp_id: impl Into<String>, object_id: impl Into<String>, pose: &GraspPose, generator: &str) -> Self {
        GraspInputRecord {
            grasp_id: grasp_id.into(),
            object_id: object_id.into(),
            hand: pose.hand.clone(),
            translation: pose.translation,
            rotation: pose.rotation,
            theta: pose.theta.clone(),
            generator: generator.to_string(),
        }
    }
}

/// Optional per-object metadata stored next to the mesh as `<id>.meta.json`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMeta {
    /// Name used in text; defaults to the object id.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub caption: Option<ObjectCaption>,
}

/// A loaded object: distance index over its mesh plus text metadata.
#[derive(Debug, Clone)]
pub struct ObjectAsset {
    pub id: String,
    pub name: String,
    pub index: DistanceQueryIndex,
    /// Bounding-sphere diameter in meters.
    pub diameter: f64,
    pub caption: Option<ObjectCaption>,
}

impl ObjectAsset {
    pub fn new(id: impl Into<String>, index: DistanceQueryIndex, meta: ObjectMeta) -> Self {
        let id = id.into();
        ObjectAsset {
            name: meta.name.unwrap_or_else(|| id.clone()),
            diameter: index.mesh().bounding_diameter(),
            caption: meta.caption,
            index,
            id,
        }
    }
}

/// Loads every `<id>.obj` in `meshes_dir`, with labels from
/// `<labels_dir>/<id>.json` and metadata from `<id>.meta.json` when present.
pub fn load_objects(meshes_dir: &Path, labels_dir: Option<&Path>) -> Result<BTreeMap<String, ObjectAsset>, MeshError> {
    let io = |path: &Path, source| MeshError::Io { path: path.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = fs::read_dir(meshes_dir)
        .map_err(|e| io(meshes_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "obj"))
        .collect();
    paths.sort();
    let mut objects = BTreeMap::new();
    for path in paths {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let labels = labels_dir.map(|d| d.join(format!("{id}.json"))).filter(|p| p.exists());
        let (mesh, report) = load_mesh(&path, labels.as_deref())?;
        if report.warning_count() > 0 {
            log::warn!("{}: dropped {} degenerate faces", path.display(), report.dropped_faces);
        }
        if !mesh.is_watertight() {
            log::warn!("{}: mesh is not watertight; inside/outside signs may be unreliable", path.display());
        }
        let meta_path = meshes_dir.join(format!("{id}.meta.json"));
        let meta = if meta_path.exists() {
            let text = fs::read_to_string(&meta_path).map_err(|e| io(&meta_path, e))?;
            serde_json::from_str(&text).map_err(|e| MeshError::Schema(format!("{}: {e}", meta_path.display())))?
        } else {
            ObjectMeta::default()
        };
        objects.insert(id.clone(), ObjectAsset::new(id, DistanceQueryIndex::build(mesh), meta));
    }
    Ok(objects)
}

/// A JSONL line that failed to parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadLine {
    pub line: usize,
    pub error: String,
}

/// Parses JSONL text. Blank lines are skipped; bad lines are returned
/// separately with their 1-based line numbers.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> (Vec<T>, Vec<BadLine>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => ok.push(v),
            Err(e) => bad.push(BadLine { line: i + 1, error: e.to_string() }),
        }
    }
    (ok, bad)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> std::io::Result<(Vec<T>, Vec<BadLine>)> {
    Ok(parse_jsonl(&fs::read_to_string(path)?))
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".into(),
    });
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(contents)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_jsonl_atomic<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grasp_record_uses_short_keys() {
        let line = r#"{"grasp_id":"g1","object_id":"cube","hand":"panda","T":[0,0,0.1],"R":[0,0,0],"theta":[0.02],"generator":"ext"}"#;
        let r: GraspInputRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.pose().theta, vec![0.02]);
        assert_eq!(serde_json::to_string(&r).unwrap(), line.replace("[0,0,0.1]", "[0.0,0.0,0.1]").replace("[0,0,0]", "[0.0,0.0,0.0]"));
    }

    #[test]
    fn jsonl_reports_bad_lines() {
        let (ok, bad): (Vec<serde_json::Value>, _) = parse_jsonl("{\"a\":1}\n\nnot json\n{\"b\":2}\n");
        assert_eq!(ok.len(), 2);
        assert_eq!(bad, vec![BadLine { line: 3, error: bad[0].error.clone() }]);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out/x.jsonl");
        write_jsonl_atomic(&p, &[1, 2]).unwrap();
        write_jsonl_atomic(&p, &[3]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "3\n");
        assert!(!dir.path().join("out/x.jsonl.tmp").exists());
    }
}
