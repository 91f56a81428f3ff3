//! Z-buffer rasterization of triangle meshes through a [`Camera`].
//!
//! Pixel `(col, row)` is sampled at its centre, which the camera maps to
//! integer coordinates `(col, row)`. Depth is the camera `Z`; smaller is
//! nearer.

use crate::mesh::{cross, norm, sub, TriMesh};
use crate::uv::NO_FACE;
use crate::warp::Camera;

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// Row-major depth in meters; `NaN` where no surface was hit.
    pub depth: Vec<f64>,
    /// Visible face per pixel, or [`NO_FACE`].
    pub face: Vec<u32>,
}

impl DepthImage {
    pub fn valid(&self, p: usize) -> bool {
        !self.depth[p].is_nan()
    }

    pub fn coverage(&self) -> usize {
        self.depth.iter().filter(|d| !d.is_nan()).count()
    }
}

/// Renders visible depth. Projection scale is evaluated at `ref_depth`
/// (only used by weak-perspective cameras).
pub fn render_depth(mesh: &TriMesh, camera: &Camera, width: usize, height: usize, ref_depth: f64) -> DepthImage {
    let mut depth = vec![f64::INFINITY; width * height];
    let mut face = vec![NO_FACE; width * height];
    let proj: Vec<[f64; 2]> = mesh.vertices.iter().map(|&p| camera.project(p, ref_depth)).collect();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let [a, b, c] = f.map(|i| proj[i]);
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if area.abs() < 1e-18 {
            continue;
        }
        let lo_x = a[0].min(b[0]).min(c[0]).ceil().max(0.0) as usize;
        let hi_x = a[0].max(b[0]).max(c[0]).floor();
        let lo_y = a[1].min(b[1]).min(c[1]).ceil().max(0.0) as usize;
        let hi_y = a[1].max(b[1]).max(c[1]).floor();
        if hi_x < 0.0 || hi_y < 0.0 {
            continue;
        }
        let hi_x = (hi_x as usize).min(width.saturating_sub(1));
        let hi_y = (hi_y as usize).min(height.saturating_sub(1));
        let z = f.map(|i| mesh.vertices[i][2]);
        for y in lo_y..=hi_y {
            for x in lo_x..=hi_x {
                let p = [x as f64, y as f64];
                let w0 = ((b[0] - p[0]) * (c[1] - p[1]) - (b[1] - p[1]) * (c[0] - p[0])) / area;
                let w1 = ((c[0] - p[0]) * (a[1] - p[1]) - (c[1] - p[1]) * (a[0] - p[0])) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < -1e-12 || w1 < -1e-12 || w2 < -1e-12 {
                    continue;
                }
                let d = w0 * z[0] + w1 * z[1] + w2 * z[2];
                let i = y * width + x;
                if d < depth[i] {
                    depth[i] = d;
                    face[i] = fi as u32;
                }
            }
        }
    }
    for d in &mut depth {
        if d.is_infinite() {
            *d = f64::NAN;
        }
    }
    DepthImage {
        width,
        height,
        depth,
        face,
    }
}

/// Three-channel picture of a mesh: silhouette, depth relative to
/// `ref_depth` (scaled by `depth_range` and offset to 0.5) and Lambertian
/// shading under a head-on light. Channel-planar.
pub fn render_shaded(
    mesh: &TriMesh,
    camera: &Camera,
    size: usize,
    ref_depth: f64,
    depth_range: f64,
) -> Vec<f64> {
    let img = render_depth(mesh, camera, size, size, ref_depth);
    let plane = size * size;
    let mut out = vec![0.0; 3 * plane];
    for p in 0..plane {
        if !img.valid(p) {
            continue;
        }
        let f = mesh.faces[img.face[p] as usize];
        let [a, b, c] = f.map(|i| mesh.vertices[i]);
        let n = cross(sub(b, a), sub(c, a));
        let len = norm(n);
        let shade = if len > 0.0 { (n[2] / len).abs() } else { 0.0 };
        out[p] = 1.0;
        out[plane + p] = (0.5 + (img.depth[p] - ref_depth) / depth_range).clamp(0.0, 1.0);
        out[2 * plane + p] = shade;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occlusion_keeps_nearest() {
        let mesh = TriMesh::new(
            vec![
                [-1.0, -1.0, 2.0],
                [5.0, -1.0, 2.0],
                [-1.0, 5.0, 2.0],
                [-1.0, -1.0, 1.0],
                [5.0, -1.0, 1.0],
                [-1.0, 5.0, 1.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let cam = Camera::orthographic(1.0, 0.0, 0.0).unwrap();
        let img = render_depth(&mesh, &cam, 3, 3, 1.0);
        assert_eq!(img.coverage(), 9);
        assert!(img.depth.iter().all(|&d| d == 1.0));
        assert!(img.face.iter().all(|&f| f == 1));
    }
}
