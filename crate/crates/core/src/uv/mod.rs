//! UV position maps: encoding a mesh into an image whose three channels hold
//! normalized XYZ, and sampling a mesh back out of such an image.
//!
//! Conventions: pixel `(col, row)` has its centre at `((col + 0.5) / W,
//! (row + 0.5) / H)` in UV space, the origin is the top-left corner, `u`
//! runs along columns and `v` along rows. Map data is stored channel-planar
//! (`[c][row][col]`), matching the network tensors.

mod raster;
mod sample;
mod template;
mod uvp;

pub use raster::{rasterize_mesh_to_uv, TemplateRaster, MIN_RESOLUTION, NO_FACE};
pub use sample::{boundary_distance_px, interior_vertices, sample_uv_to_mesh, SampleStencil};
pub use template::{load_template, make_fallback_template, UvForm, UvTemplate};
pub use uvp::{export_png, read_uvp, uvp_from_bytes, uvp_to_bytes, write_uvp, UVP_MAGIC};

use crate::error::{Error, Result};
use crate::mesh::{Point3, TriMesh};

/// Binary raster of valid chart area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height);
        Mask { width, height, bits }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask::new(width, height, vec![true; width * height])
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Axis-aligned box mapped onto `[0,1]^3`. Usually a cube centred on the root
/// joint; the bounds are kept explicitly so they survive the UVP header
/// round trip bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationCube {
    pub min: Point3,
    pub max: Point3,
}

/// Default half extent (meters) of the normalization cube.
pub const DEFAULT_HALF_EXTENT: f64 = 0.20;

impl NormalizationCube {
    pub fn new(center: Point3, half_extent: f64) -> Result<Self> {
        if !(half_extent > 0.0) || !half_extent.is_finite() {
            return Err(Error::Degenerate(format!("half_extent must be > 0, got {half_extent}")));
        }
        Ok(NormalizationCube {
            min: center.map(|c| c - half_extent),
            max: center.map(|c| c + half_extent),
        })
    }

    pub fn from_bounds(min: Point3, max: Point3) -> Result<Self> {
        if (0..3).any(|k| !(max[k] > min[k])) {
            return Err(Error::Degenerate(format!("empty bounds {min:?}..{max:?}")));
        }
        Ok(NormalizationCube { min, max })
    }

    pub fn center(&self) -> Point3 {
        [0, 1, 2].map(|k| 0.5 * (self.min[k] + self.max[k]))
    }

    /// Per-axis side length.
    pub fn extent(&self) -> Point3 {
        [0, 1, 2].map(|k| self.max[k] - self.min[k])
    }

    pub fn half_extent(&self) -> f64 {
        0.5 * self.extent()[0]
    }

    pub fn diagonal(&self) -> f64 {
        crate::mesh::norm(self.extent())
    }

    /// Normalizes one point; returns whether it had to be clamped.
    #[inline]
    pub fn normalize_point(&self, p: Point3) -> (Point3, bool) {
        let mut clamped = false;
        let q = [0, 1, 2].map(|k| {
            let t = (p[k] - self.min[k]) / (self.max[k] - self.min[k]);
            if !(0.0..=1.0).contains(&t) {
                clamped = true;
            }
            t.clamp(0.0, 1.0)
        });
        (q, clamped)
    }

    #[inline]
    pub fn denormalize_point(&self, q: Point3) -> Point3 {
        [0, 1, 2].map(|k| self.min[k] + q[k] * (self.max[k] - self.min[k]))
    }

    /// Maps points into `[0,1]^3`, clamping out-of-cube coordinates. Returns
    /// the normalized points and how many were clamped; fails when more than
    /// 1% of the points lie outside.
    pub fn normalize(&self, points: &[Point3]) -> Result<(Vec<Point3>, usize)> {
        let mut clamped = 0;
        let out = points
            .iter()
            .map(|&p| {
                let (q, c) = self.normalize_point(p);
                clamped += c as usize;
                q
            })
            .collect();
        if clamped * 100 > points.len() {
            return Err(Error::OutOfCube {
                clamped,
                total: points.len(),
            });
        }
        Ok((out, clamped))
    }

    pub fn denormalize(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|&q| self.denormalize_point(q)).collect()
    }
}

/// A `width x height` image with three channels of normalized XYZ.
#[derive(Debug, Clone, PartialEq)]
pub struct UvPositionMap {
    pub width: usize,
    pub height: usize,
    /// Channel-planar values, length `3 * width * height`.
    pub data: Vec<f64>,
    pub cube: NormalizationCube,
    pub mask: Option<Mask>,
}

impl UvPositionMap {
    pub fn zeros(width: usize, height: usize, cube: NormalizationCube, mask: Option<Mask>) -> Self {
        UvPositionMap {
            width,
            height,
            data: vec![0.0; 3 * width * height],
            cube,
            mask,
        }
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, c: usize, col: usize, row: usize) -> f64 {
        self.data[c * self.plane() + row * self.width + col]
    }

    /// Checks the masked-zero and `[0,1]` range invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let plane = self.plane();
        if self.data.len() != 3 * plane {
            return Err(Error::Shape(format!(
                "map data has {} values, expected {}",
                self.data.len(),
                3 * plane
            )));
        }
        for p in 0..plane {
            let inside = self.mask.as_ref().is_none_or(|m| m.bits[p]);
            for c in 0..3 {
                let v = self.data[c * plane + p];
                if inside && !(0.0..=1.0).contains(&v) {
                    return Err(Error::Format(format!("in-mask value {v} outside [0,1]")));
                }
                if !inside && v != 0.0 {
                    return Err(Error::Format(format!("masked-out value {v} is not zero")));
                }
            }
        }
        Ok(())
    }

    /// Zeroes every pixel outside the mask.
    pub fn apply_mask(&mut self) {
        if let Some(m) = &self.mask {
            let plane = m.width * m.height;
            for c in 0..3 {
                for p in 0..plane {
                    if !m.bits[p] {
                        self.data[c * plane + p] = 0.0;
                    }
                }
            }
        }
    }
}

/// A template bound to a resolution: rasterized face ownership plus the
/// decoding stencil, reusable across many encode/decode calls.
#[derive(Debug, Clone)]
pub struct UvCodec {
    pub template: UvTemplate,
    pub raster: TemplateRaster,
    pub stencil: SampleStencil,
}

impl UvCodec {
    pub fn new(template: &UvTemplate, width: usize, height: usize) -> Result<Self> {
        let raster = TemplateRaster::build(template, width, height)?;
        let stencil = SampleStencil::build(template, &raster);
        Ok(UvCodec {
            template: template.clone(),
            raster,
            stencil,
        })
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    pub fn mask(&self) -> Mask {
        self.raster.mask()
    }

    pub fn encode(&self, mesh: &TriMesh, cube: &NormalizationCube) -> Result<UvPositionMap> {
        self.encode_with_report(mesh, cube).map(|(m, _)| m)
    }

    /// Encodes and reports how many vertices were clamped into the cube.
    pub fn encode_with_report(&self, mesh: &TriMesh, cube: &NormalizationCube) -> Result<(UvPositionMap, usize)> {
        raster::encode(self, mesh, cube)
    }

    /// Samples every mesh vertex; faces are taken from the template.
    pub fn decode(&self, map: &UvPositionMap) -> Result<TriMesh> {
        if map.width != self.width() || map.height != self.height() {
            return Err(Error::Shape(format!(
                "map is {}x{}, codec expects {}x{}",
                map.width,
                map.height,
                self.width(),
                self.height()
            )));
        }
        let normalized = self.stencil.apply(&map.data, map.plane());
        Ok(TriMesh {
            vertices: map.cube.denormalize(&normalized),
            faces: self.template.mesh_faces(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn centre_and_corner() {
        let cube = NormalizationCube::new([0.1, -0.2, 0.5], 0.2).unwrap();
        let (q, c) = cube.normalize_point([0.1, -0.2, 0.5]);
        assert!(!c);
        assert!(q.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let (q, _) = cube.normalize_point([0.3, 0.0, 0.7]);
        assert!(q.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn round_trip_random_points() {
        let cube = NormalizationCube::new([0.02, 0.03, 0.5], 0.2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| cube.center().map(|c| c + rng.random_range(-0.2..0.2)))
            .collect();
        let (n, clamped) = cube.normalize(&pts).unwrap();
        assert_eq!(clamped, 0);
        let back = cube.denormalize(&n);
        let err = pts
            .iter()
            .zip(&back)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn too_many_clamped_is_an_error() {
        let cube = NormalizationCube::new([0.0; 3], 0.1).unwrap();
        let mut pts = vec![[0.0; 3]; 99];
        pts.push([1.0, 0.0, 0.0]);
        assert_eq!(cube.normalize(&pts).unwrap().1, 1);
        pts.push([1.0, 0.0, 0.0]);
        assert!(matches!(cube.normalize(&pts), Err(Error::OutOfCube { clamped: 2, .. })));
    }

    #[test]
    fn half_extent_must_be_positive() {
        assert!(NormalizationCube::new([0.0; 3], 0.0).is_err());
    }
}
