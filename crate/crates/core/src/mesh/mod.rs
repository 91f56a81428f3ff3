//! Triangle meshes, edge topology, edge-based unpooling and joint regression.

mod joints;
mod obj;
mod topology;

pub use joints::{HandTopology, JointRules, JOINT_COUNT, RULE_JOINTS, TIP_COUNT};
pub use obj::{load_obj, parse_obj, save_obj, write_obj, ObjData};
pub use topology::{compute_edges, edge_unpool, edge_unpool_with_edges, EdgeSet};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Indexed triangle mesh. Coordinates are in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

/// Result of [`TriMesh::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Faces whose area is (numerically) zero.
    pub zero_area_faces: Vec<usize>,
}

impl TriMesh {
    /// Builds a mesh, checking index bounds and that each face has three
    /// distinct corners.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex out of range ({n} vertices)"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} is degenerate: {f:?}")));
            }
        }
        if let Some(i) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!("vertex {i}")));
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Flags zero-area faces. They are legal but skipped by rasterizers.
    pub fn validate(&self) -> ValidationReport {
        let zero_area_faces = (0..self.faces.len())
            .filter(|&f| self.face_area(f) <= 1e-18)
            .collect();
        ValidationReport { zero_area_faces }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f].map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    /// Applies `p -> R p + t` to every vertex.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: Point3) -> TriMesh {
        let vertices = self
            .vertices
            .iter()
            .map(|&p| add(mat_vec(rotation, p), translation))
            .collect();
        TriMesh {
            vertices,
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, t: Point3) -> TriMesh {
        let vertices = self.vertices.iter().map(|&p| add(p, t)).collect();
        TriMesh {
            vertices,
            faces: self.faces.clone(),
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// One-ring neighbours of every vertex, sorted.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                nb[a].push(b);
                nb[b].push(a);
            }
        }
        for n in &mut nb {
            n.sort_unstable();
            n.dedup();
        }
        nb
    }
}

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: Point3) -> Point3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Rotation matrix for `angle` radians about `axis` (normalized internally).
pub fn axis_angle(axis: Point3, angle: f64) -> [[f64; 3]; 3] {
    let n = norm(axis);
    let [x, y, z] = scale(axis, 1.0 / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}
