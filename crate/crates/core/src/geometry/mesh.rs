use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::obj::{self, RawObj};
use super::{MeshError, Point, Vector};

/// Vertices closer than this are merged at load time.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// A face is degenerate when twice its area is below this fraction of its
/// longest squared edge (catches both collapsed and collinear triangles).
const DEGENERATE_RATIO: f64 = 1e-12;

/// Part-label file contents: part id to name, plus one label per face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartLabels {
    pub parts: BTreeMap<u32, String>,
    pub face_labels: Vec<u32>,
}

impl PartLabels {
    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        serde_json::from_str(text).map_err(|e| MeshError::Schema(format!("label file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// What load-time cleanup changed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanupReport {
    pub merged_vertices: usize,
    pub dropped_faces: usize,
    pub ignored_records: usize,
}

impl CleanupReport {
    pub fn warning_count(&self) -> usize {
        self.dropped_faces
    }
}

/// Triangle mesh in meters with optional per-face part labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    face_labels: Option<Vec<u32>>,
    part_names: BTreeMap<u32, String>,
    watertight: bool,
}

impl TriangleMesh {
    /// Builds a mesh, merging near-duplicate vertices and dropping
    /// degenerate faces. `labels`, if given, index the input faces.
    pub fn build(
        vertices: Vec<Point>,
        faces: Vec<[usize; 3]>,
        labels: Option<PartLabels>,
    ) -> Result<(Self, CleanupReport), MeshError> {
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::Schema(format!(
                    "face {i} references vertex out of range (vertex count {})",
                    vertices.len()
                )));
            }
        }
        if let Some(labels) = &labels {
            if labels.face_labels.len() != faces.len() {
                return Err(MeshError::Schema(format!(
                    "label count {} does not match face count {}",
                    labels.face_labels.len(),
                    faces.len()
                )));
            }
            if let Some(missing) = labels
                .face_labels
                .iter()
                .find(|l| !labels.parts.contains_key(l))
            {
                return Err(MeshError::Schema(format!(
                    "face label {missing} has no entry in the part table"
                )));
            }
        }

        let mut report = CleanupReport::default();
        let (vertices, remap) = merge_vertices(vertices, &mut report);

        let mut kept_faces = Vec::with_capacity(faces.len());
        let mut kept_labels = labels.as_ref().map(|_| Vec::with_capacity(faces.len()));
        for (i, f) in faces.iter().enumerate() {
            let f = [remap[f[0]], remap[f[1]], remap[f[2]]];
            if is_degenerate(&vertices, f) {
                report.dropped_faces += 1;
                continue;
            }
            kept_faces.push(f);
            if let (Some(out), Some(l)) = (kept_labels.as_mut(), labels.as_ref()) {
                out.push(l.face_labels[i]);
            }
        }
        if report.dropped_faces > 0 {
            log::warn!("dropped {} degenerate face(s)", report.dropped_faces);
        }

        let watertight = is_closed(&kept_faces);
        let mesh = TriangleMesh {
            vertices,
            faces: kept_faces,
            face_labels: kept_labels,
            part_names: labels.map(|l| l.parts).unwrap_or_default(),
            watertight,
        };
        Ok((mesh, report))
    }

    /// Attaches labels to an already-clean mesh (one label per current face).
    pub fn with_labels(mut self, labels: PartLabels) -> Result<Self, MeshError> {
        if labels.face_labels.len() != self.faces.len() {
            return Err(MeshError::Schema(format!(
                "label count {} does not match face count {}",
                labels.face_labels.len(),
                self.faces.len()
            )));
        }
        if let Some(missing) = labels.face_labels.iter().find(|l| !labels.parts.contains_key(l)) {
            return Err(MeshError::Schema(format!(
                "face label {missing} has no entry in the part table"
            )));
        }
        self.face_labels = Some(labels.face_labels);
        self.part_names = labels.parts;
        Ok(self)
    }

    pub fn from_obj(text: &str, labels: Option<PartLabels>) -> Result<(Self, CleanupReport), MeshError> {
        let RawObj { vertices, faces, ignored_records } = obj::parse(text)?;
        let (mesh, mut report) = Self::build(vertices, faces, labels)?;
        report.ignored_records = ignored_records;
        Ok((mesh, report))
    }

    /// Axis-aligned box with outward-facing triangles, two per side in the
    /// order -x, +x, -y, +y, -z, +z.
    pub fn cuboid(center: Point, half: Vector) -> Self {
        let c = |sx: f64, sy: f64, sz: f64| {
            Point::new(center.x + sx * half.x, center.y + sy * half.y, center.z + sz * half.z)
        };
        let vertices = vec![
            c(-1., -1., -1.),
            c(1., -1., -1.),
            c(1., 1., -1.),
            c(-1., 1., -1.),
            c(-1., -1., 1.),
            c(1., -1., 1.),
            c(1., 1., 1.),
            c(-1., 1., 1.),
        ];
        let faces = vec![
            [0, 4, 7],
            [0, 7, 3],
            [1, 2, 6],
            [1, 6, 5],
            [0, 1, 5],
            [0, 5, 4],
            [3, 7, 6],
            [3, 6, 2],
            [0, 3, 2],
            [0, 2, 1],
            [4, 5, 6],
            [4, 6, 7],
        ];
        Self::build(vertices, faces, None).expect("cuboid is valid").0
    }

    /// Subdivided icosahedron projected onto a sphere.
    pub fn icosphere(center: Point, radius: f64, subdivisions: u32) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vector> = [
            (-1., t, 0.),
            (1., t, 0.),
            (-1., -t, 0.),
            (1., -t, 0.),
            (0., -1., t),
            (0., 1., t),
            (0., -1., -t),
            (0., 1., -t),
            (t, 0., -1.),
            (t, 0., 1.),
            (-t, 0., -1.),
            (-t, 0., 1.),
        ]
        .iter()
        .map(|&(x, y, z)| Vector::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector>| {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let vertices = verts.into_iter().map(|v| center + v * radius).collect();
        Self::build(vertices, faces, None).expect("icosphere is valid").0
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// True when every edge is shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn triangle(&self, face: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn face_label(&self, face: usize) -> Option<u32> {
        self.face_labels.as_ref().map(|l| l[face])
    }

    pub fn face_labels(&self) -> Option<&[u32]> {
        self.face_labels.as_deref()
    }

    pub fn part_names(&self) -> &BTreeMap<u32, String> {
        &self.part_names
    }

    pub fn part_name(&self, id: u32) -> Option<&str> {
        self.part_names.get(&id).map(String::as_str)
    }

    /// Diameter of the sphere centered on the bounding-box center that
    /// encloses every vertex.
    pub fn bounding_diameter(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = self.vertices[0].coords;
        let mut hi = lo;
        for v in &self.vertices {
            lo = lo.inf(&v.coords);
            hi = hi.sup(&v.coords);
        }
        let center = (lo + hi) * 0.5;
        2.0 * self
            .vertices
            .iter()
            .map(|v| (v.coords - center).norm())
            .fold(0.0, f64::max)
    }
}

/// Reads an OBJ file and an optional JSON part-label file.
pub fn load_mesh(path: &Path, labels_path: Option<&Path>) -> Result<(TriangleMesh, CleanupReport), MeshError> {
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let labels = labels_path.map(PartLabels::load).transpose()?;
    TriangleMesh::from_obj(&text, labels)
}

fn merge_vertices(vertices: Vec<Point>, report: &mut CleanupReport) -> (Vec<Point>, Vec<usize>) {
    let cell = |x: f64| (x / MERGE_TOLERANCE).floor() as i64;
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut kept: Vec<Point> = Vec::with_capacity(vertices.len());
    let mut remap = Vec::with_capacity(vertices.len());
    for v in vertices {
        let key = [cell(v.x), cell(v.y), cell(v.z)];
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let k = [key[0] + dx, key[1] + dy, key[2] + dz];
                    if let Some(ids) = grid.get(&k) {
                        if let Some(&id) = ids.iter().find(|&&id| (kept[id] - v).norm() <= MERGE_TOLERANCE) {
                            found = Some(id);
                            break 'search;
                        }
                    }
                }
            }
        }
        match found {
            Some(id) => {
                report.merged_vertices += 1;
                remap.push(id);
            }
            None => {
                grid.entry(key).or_default().push(kept.len());
                remap.push(kept.len());
                kept.push(v);
            }
        }
    }
    (kept, remap)
}

fn is_degenerate(vertices: &[Point], [a, b, c]: [usize; 3]) -> bool {
    if a == b || b == c || a == c {
        return true;
    }
    let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
    let longest = (pb - pa)
        .norm_squared()
        .max((pc - pb).norm_squared())
        .max((pa - pc).norm_squared());
    (pb - pa).cross(&(pc - pa)).norm() <= DEGENERATE_RATIO * longest
}

fn is_closed(faces: &[[usize; 3]]) -> bool {
    if faces.is_empty() {
        return false;
    }
    let mut edges: HashMap<(usize, usize), u32> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    edges.values().all(|&n| n == 2)
}
