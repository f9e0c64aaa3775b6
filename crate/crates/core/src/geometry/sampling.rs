use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MeshError, Point, TriangleMesh};

/// Points drawn uniformly (by area) over a mesh surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSampleSet {
    pub points: Vec<Point>,
    pub source_face: Vec<usize>,
    pub part_label: Vec<Option<u32>>,
    pub seed: u64,
}

impl SurfaceSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `n` area-weighted surface samples. Faces are picked by inverse CDF
/// over cumulative area; the point within a face uses the square-root
/// barycentric map, which is uniform over the triangle.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<SurfaceSampleSet, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::Empty);
    }
    if n == 0 {
        return Err(MeshError::Schema("sample count must be at least 1".into()));
    }

    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut source_face = Vec::with_capacity(n);
    let mut part_label = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen::<f64>() * total;
        let face = cumulative.partition_point(|&c| c <= r).min(mesh.face_count() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let (u, v, w) = (1.0 - s, s * (1.0 - r2), s * r2);
        let [a, b, c] = mesh.triangle(face);
        points.push(Point::from(a.coords * u + b.coords * v + c.coords * w));
        source_face.push(face);
        part_label.push(mesh.face_label(face));
    }

    Ok(SurfaceSampleSet { points, source_face, part_label, seed })
}
