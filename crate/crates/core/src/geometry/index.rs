use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Point, TriangleMesh, Vector};

const LEAF_SIZE: usize = 4;
/// Ray hits whose barycentric coordinates fall within this band of an edge
/// (or that run inside a triangle's plane) are treated as grazing.
const GRAZE_TOLERANCE: f64 = 1e-10;
const MAX_RETRIES: usize = 8;
/// Points this close to the surface are reported as outside (sign +).
pub const SURFACE_TOLERANCE: f64 = 1e-12;
const RETRY_SEED: u64 = 0x5eed_cafe;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Aabb {
    lo: Vector,
    hi: Vector,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Vector::repeat(f64::INFINITY),
            hi: Vector::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vector) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&mut self, other: &Aabb) {
        self.lo = self.lo.inf(&other.lo);
        self.hi = self.hi.sup(&other.hi);
    }

    fn distance_squared(&self, p: &Vector) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let excess = (self.lo[k] - p[k]).max(p[k] - self.hi[k]).max(0.0);
            d += excess * excess;
        }
        d
    }

    /// Slab test; true if the ray `origin + t * dir`, t >= 0, meets the box.
    fn hit_by_ray(&self, origin: &Vector, inv_dir: &Vector) -> bool {
        let mut t_min: f64 = 0.0;
        let mut t_max = f64::INFINITY;
        for k in 0..3 {
            let t1 = (self.lo[k] - origin[k]) * inv_dir[k];
            let t2 = (self.hi[k] - origin[k]) * inv_dir[k];
            let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            // NaN (0 * inf) means the ray runs within the slab boundary; keep it
            if !near.is_nan() {
                t_min = t_min.max(near);
            }
            if !far.is_nan() {
                t_max = t_max.min(far);
            }
        }
        t_min <= t_max * (1.0 + 1e-12) + 1e-12
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, count: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Signed distance from a point to a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedDistance {
    /// Negative inside the mesh, positive outside; on-surface points are
    /// non-negative.
    pub value: f64,
    pub nearest_face: usize,
    /// False when the mesh is not closed, so containment is ill-defined.
    pub sign_reliable: bool,
}

/// Bounding-volume hierarchy over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct DistanceQueryIndex {
    mesh: Arc<TriangleMesh>,
    nodes: Vec<Node>,
    order: Vec<usize>,
    retry_dirs: Vec<Vector>,
}

impl DistanceQueryIndex {
    pub fn build(mesh: impl Into<Arc<TriangleMesh>>) -> Self {
        let mesh = mesh.into();
        let n = mesh.face_count();
        let mut boxes = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        for f in 0..n {
            let tri = mesh.triangle(f);
            let mut b = Aabb::empty();
            for p in &tri {
                b.grow(&p.coords);
            }
            boxes.push(b);
            centroids.push((tri[0].coords + tri[1].coords + tri[2].coords) / 3.0);
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(&mut nodes, &mut order, 0, n, &boxes, &centroids);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(RETRY_SEED);
        let retry_dirs = (0..MAX_RETRIES)
            .map(|_| loop {
                let v = Vector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let len = v.norm();
                if len > 0.1 && len <= 1.0 {
                    break v / len;
                }
            })
            .collect();

        DistanceQueryIndex { mesh, nodes, order, retry_dirs }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn shared_mesh(&self) -> Arc<TriangleMesh> {
        Arc::clone(&self.mesh)
    }

    /// Unsigned distance to the closest triangle and that triangle's index.
    /// Equal distances resolve to the lowest face index.
    pub fn nearest(&self, p: &Point) -> (f64, usize) {
        let q = p.coords;
        let mut best_d2 = f64::INFINITY;
        let mut best_face = usize::MAX;
        if self.nodes.is_empty() {
            return (f64::INFINITY, usize::MAX);
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds().distance_squared(&q) > best_d2 {
                continue;
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for &face in &self.order[start..start + count] {
                        let d2 = point_triangle_distance_squared(p, &self.mesh.triangle(face));
                        if d2 < best_d2 || (d2 == best_d2 && face < best_face) {
                            best_d2 = d2;
                            best_face = face;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_squared(&q);
                    let dr = self.nodes[right].bounds().distance_squared(&q);
                    // push the farther child first so the nearer is visited next
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        (best_d2.sqrt(), best_face)
    }

    pub fn unsigned_distance_batch(&self, points: &[Point]) -> Vec<(f64, usize)> {
        points.par_iter().map(|p| self.nearest(p)).collect()
    }

    pub fn signed_distance(&self, p: &Point) -> SignedDistance {
        let (d, face) = self.nearest(p);
        let sign_reliable = self.mesh.is_watertight();
        let value = if d <= SURFACE_TOLERANCE {
            d
        } else if self.contains(p) {
            -d
        } else {
            d
        };
        SignedDistance { value, nearest_face: face, sign_reliable }
    }

    pub fn signed_distance_batch(&self, points: &[Point]) -> Vec<SignedDistance> {
        points.par_iter().map(|p| self.signed_distance(p)).collect()
    }

    /// Ray-parity containment. A grazing ray is retried along up to eight
    /// fixed pseudo-random directions; if every ray grazes, the generalized
    /// winding number decides.
    pub fn contains(&self, p: &Point) -> bool {
        let first = Vector::new(0.5773502691896258, 0.5773502691896257, 0.5773502691896259).normalize();
        for dir in std::iter::once(&first).chain(self.retry_dirs.iter()) {
            if let Some(hits) = self.count_crossings(p, dir) {
                return hits % 2 == 1;
            }
        }
        log::debug!("all containment rays grazed at {p:?}; using winding number");
        self.winding_number(p) > 0.5
    }

    /// Number of triangles crossed by the ray, or `None` if it grazes an
    /// edge, a vertex, or runs within a triangle's plane.
    fn count_crossings(&self, p: &Point, dir: &Vector) -> Option<usize> {
        if self.nodes.is_empty() {
            return Some(0);
        }
        let origin = p.coords;
        let inv = Vector::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut hits = 0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bounds().hit_by_ray(&origin, &inv) {
                continue;
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for &face in &self.order[start..start + count] {
                        match ray_triangle(p, dir, &self.mesh.triangle(face)) {
                            RayHit::Miss => {}
                            RayHit::Hit => hits += 1,
                            RayHit::Graze => return None,
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        Some(hits)
    }

    fn winding_number(&self, p: &Point) -> f64 {
        let mut total = 0.0;
        for f in 0..self.mesh.face_count() {
            let [a, b, c] = self.mesh.triangle(f);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Vector],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &f in &order[start..end] {
        bounds.merge(&boxes[f]);
        cbounds.grow(&centroids[f]);
    }
    let id = nodes.len();
    let count = end - start;
    if count <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, count });
        return id;
    }
    let extent = cbounds.hi - cbounds.lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = start + count / 2;
    order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf { bounds, start, count }); // placeholder
    let left = build_node(nodes, order, start, mid, boxes, centroids);
    let right = build_node(nodes, order, mid, end, boxes, centroids);
    nodes[id] = Node::Inner { bounds, left, right };
    id
}

/// Squared distance from `p` to the closest point on a triangle
/// (Voronoi-region walk).
pub(crate) fn point_triangle_distance_squared(p: &Point, [a, b, c]: &[Point; 3]) -> f64 {
    let q = closest_point_on_triangle(p, a, b, c);
    (p - q).norm_squared()
}

pub(crate) fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

enum RayHit {
    Miss,
    Hit,
    Graze,
}

/// Möller–Trumbore with explicit grazing detection.
fn ray_triangle(origin: &Point, dir: &Vector, [a, b, c]: &[Point; 3]) -> RayHit {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= GRAZE_TOLERANCE * scale {
        // parallel: only a problem if the ray lies in the triangle's plane
        let normal = e1.cross(&e2);
        let nlen = normal.norm();
        if nlen == 0.0 {
            return RayHit::Miss;
        }
        let plane_dist = (origin - a).dot(&normal) / nlen;
        return if plane_dist.abs() <= GRAZE_TOLERANCE { RayHit::Graze } else { RayHit::Miss };
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if u < -GRAZE_TOLERANCE || u > 1.0 + GRAZE_TOLERANCE {
        return RayHit::Miss;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < -GRAZE_TOLERANCE || u + v > 1.0 + GRAZE_TOLERANCE {
        return RayHit::Miss;
    }
    let t = e2.dot(&qvec) * inv;
    if t < -GRAZE_TOLERANCE {
        return RayHit::Miss;
    }
    let near_edge = u <= GRAZE_TOLERANCE || v <= GRAZE_TOLERANCE || u + v >= 1.0 - GRAZE_TOLERANCE;
    if near_edge || t <= GRAZE_TOLERANCE {
        return RayHit::Graze;
    }
    RayHit::Hit
}
