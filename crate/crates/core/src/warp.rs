//! Projection of predicted UV position maps into encoder feature space and
//! bilinear feature warping (the affine connection between encoder and
//! decoder).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point3;
use crate::nn::{Tensor4, Upsample2x};
use crate::uv::{Mask, NormalizationCube, UvPositionMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// `pixel = scale * (X, Y) + c`.
    Orthographic,
    /// `pixel = scale / Z_ref * (X, Y) + c`, with `Z_ref` the depth of the
    /// normalization cube centre.
    WeakPerspective,
}

/// Maps camera-space meters to image pixels; depth is the camera `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub projection: Projection,
    /// Pixels per meter (orthographic) or focal length in pixels.
    pub scale: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Camera {
    pub fn orthographic(scale: f64, cx: f64, cy: f64) -> Result<Self> {
        Camera::new(Projection::Orthographic, scale, cx, cy)
    }

    pub fn new(projection: Projection, scale: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Degenerate(format!("camera scale must be > 0, got {scale}")));
        }
        Ok(Camera {
            projection,
            scale,
            cx,
            cy,
        })
    }

    /// Pixels per meter for geometry near `ref_depth`.
    pub fn effective_scale(&self, ref_depth: f64) -> f64 {
        match self.projection {
            Projection::Orthographic => self.scale,
            Projection::WeakPerspective => self.scale / ref_depth,
        }
    }

    pub fn project(&self, p: Point3, ref_depth: f64) -> [f64; 2] {
        let s = self.effective_scale(ref_depth);
        [s * p[0] + self.cx, s * p[1] + self.cy]
    }
}

/// Per-pixel source coordinates in feature-map pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<[f64; 2]>,
    /// False for masked-out UV pixels; their sample is 0.
    pub valid: Vec<bool>,
    /// Projections that fell outside `[-1, size]` and were clamped there.
    pub clamped: Vec<bool>,
    /// `d coords / d (normalized x, normalized y)` for unclamped entries.
    pub jacobian: [f64; 2],
}

impl SampleGrid {
    pub fn clamped_count(&self) -> usize {
        self.clamped.iter().filter(|&&c| c).count()
    }
}

/// Projects the XY channels of a channel-planar UV map into feature pixels.
/// Image pixel `x` maps to feature pixel `(x + 0.5) * feat / image - 0.5`.
#[allow(clippy::too_many_arguments)]
pub fn grid_from_planar(
    data: &[f64],
    width: usize,
    height: usize,
    mask: Option<&Mask>,
    cube: &NormalizationCube,
    camera: &Camera,
    image_size: usize,
    feature_size: (usize, usize),
) -> SampleGrid {
    let plane = width * height;
    let (fw, fh) = feature_size;
    let s = camera.effective_scale(cube.center()[2]);
    let ext = cube.extent();
    let rx = fw as f64 / image_size as f64;
    let ry = fh as f64 / image_size as f64;
    let mut coords = vec![[0.0; 2]; plane];
    let mut valid = vec![false; plane];
    let mut clamped = vec![false; plane];
    for p in 0..plane {
        if mask.is_some_and(|m| !m.bits[p]) {
            continue;
        }
        valid[p] = true;
        let x = cube.min[0] + data[p] * ext[0];
        let y = cube.min[1] + data[plane + p] * ext[1];
        let gx = (s * x + camera.cx + 0.5) * rx - 0.5;
        let gy = (s * y + camera.cy + 0.5) * ry - 0.5;
        let cx = gx.clamp(-1.0, fw as f64);
        let cy = gy.clamp(-1.0, fh as f64);
        clamped[p] = cx != gx || cy != gy;
        coords[p] = [cx, cy];
    }
    SampleGrid {
        width,
        height,
        coords,
        valid,
        clamped,
        jacobian: [s * ext[0] * rx, s * ext[1] * ry],
    }
}

pub fn project_uv_to_grid(
    map: &UvPositionMap,
    camera: &Camera,
    image_size: usize,
    feature_size: usize,
) -> SampleGrid {
    grid_from_planar(
        &map.data,
        map.width,
        map.height,
        map.mask.as_ref(),
        &map.cube,
        camera,
        image_size,
        (feature_size, feature_size),
    )
}

#[inline]
fn taps(x: f64, y: f64) -> (isize, isize, f64, f64) {
    let (x0, y0) = (x.floor(), y.floor());
    (x0 as isize, y0 as isize, x - x0, y - y0)
}

/// Bilinear sampling with zero padding; one grid per batch sample.
pub fn grid_sample(features: &Tensor4, grids: &[SampleGrid]) -> Result<Tensor4> {
    let (gw, gh) = check_grids(features, grids)?;
    let (fw, fh) = (features.w as isize, features.h as isize);
    let mut out = Tensor4::zeros(features.n, features.c, gh, gw);
    let plane = gw * gh;
    for (n, g) in grids.iter().enumerate() {
        for c in 0..features.c {
            let src = &features.data[(n * features.c + c) * features.plane()..][..features.plane()];
            let dst = &mut out.data[(n * features.c + c) * plane..][..plane];
            for p in (0..plane).filter(|&p| g.valid[p]) {
                let (x0, y0, fx, fy) = taps(g.coords[p][0], g.coords[p][1]);
                let at = |x: isize, y: isize| {
                    if x >= 0 && y >= 0 && x < fw && y < fh {
                        src[(y * fw + x) as usize]
                    } else {
                        0.0
                    }
                };
                let top = (1.0 - fx) * at(x0, y0) + fx * at(x0 + 1, y0);
                let bot = (1.0 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1);
                dst[p] = (1.0 - fy) * top + fy * bot;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`grid_sample`] with respect to the features and to each
/// grid coordinate.
pub fn grid_sample_backward(
    features: &Tensor4,
    grids: &[SampleGrid],
    gy: &Tensor4,
) -> Result<(Tensor4, Vec<Vec<[f64; 2]>>)> {
    let (gw, gh) = check_grids(features, grids)?;
    let (fw, fh) = (features.w as isize, features.h as isize);
    let plane = gw * gh;
    let mut gf = features.zeros_like();
    let mut gg = Vec::with_capacity(grids.len());
    for (n, g) in grids.iter().enumerate() {
        let mut ggrid = vec![[0.0; 2]; plane];
        for c in 0..features.c {
            let off = (n * features.c + c) * features.plane();
            let src = &features.data[off..off + features.plane()];
            let gsrc = &mut gf.data[off..off + features.plane()];
            let gout = &gy.data[(n * features.c + c) * plane..][..plane];
            for p in (0..plane).filter(|&p| g.valid[p]) {
                let (x0, y0, fx, fy) = taps(g.coords[p][0], g.coords[p][1]);
                let inb = |x: isize, y: isize| x >= 0 && y >= 0 && x < fw && y < fh;
                let at = |x: isize, y: isize| if inb(x, y) { src[(y * fw + x) as usize] } else { 0.0 };
                let (v00, v10, v01, v11) = (at(x0, y0), at(x0 + 1, y0), at(x0, y0 + 1), at(x0 + 1, y0 + 1));
                let go = gout[p];
                for (x, y, w) in [
                    (x0, y0, (1.0 - fx) * (1.0 - fy)),
                    (x0 + 1, y0, fx * (1.0 - fy)),
                    (x0, y0 + 1, (1.0 - fx) * fy),
                    (x0 + 1, y0 + 1, fx * fy),
                ] {
                    if inb(x, y) {
                        gsrc[(y * fw + x) as usize] += w * go;
                    }
                }
                ggrid[p][0] += go * ((1.0 - fy) * (v10 - v00) + fy * (v11 - v01));
                ggrid[p][1] += go * ((1.0 - fx) * (v01 - v00) + fx * (v11 - v10));
            }
        }
        gg.push(ggrid);
    }
    Ok((gf, gg))
}

fn check_grids(features: &Tensor4, grids: &[SampleGrid]) -> Result<(usize, usize)> {
    if grids.len() != features.n {
        return Err(Error::CountMismatch {
            what: "sample grids vs feature batch",
            expected: features.n,
            got: grids.len(),
        });
    }
    let (w, h) = grids.first().map(|g| (g.width, g.height)).unwrap_or((0, 0));
    if grids.iter().any(|g| (g.width, g.height) != (w, h)) {
        return Err(Error::Shape("sample grids differ in size".into()));
    }
    Ok((w, h))
}

/// Per-batch inputs of the affine connection besides the tensors.
#[derive(Debug, Clone, Copy)]
pub struct WarpContext<'a> {
    pub camera: &'a Camera,
    pub image_size: usize,
    /// One cube per batch sample.
    pub cubes: &'a [NormalizationCube],
}

/// Warps encoder features into UV space with the grid projected from a UV
/// map of the same resolution, then upsamples 2x.
#[derive(Debug, Clone, Default)]
pub struct AffineConnection {
    cache: Option<(Tensor4, Vec<SampleGrid>)>,
}

impl AffineConnection {
    pub fn forward(&mut self, uv: &Tensor4, feat: &Tensor4, mask: Option<&Mask>, ctx: &WarpContext) -> Result<Tensor4> {
        if uv.c != 3 || (uv.n, uv.h, uv.w) != (feat.n, feat.h, feat.w) {
            return Err(Error::Shape(format!(
                "affine connection pairs a UV map {:?} with features {:?} of the same level",
                uv.shape(),
                feat.shape()
            )));
        }
        if ctx.cubes.len() != uv.n {
            return Err(Error::CountMismatch {
                what: "cubes vs batch",
                expected: uv.n,
                got: ctx.cubes.len(),
            });
        }
        if let Some(m) = mask {
            if (m.width, m.height) != (uv.w, uv.h) {
                return Err(Error::Shape("mask does not match the UV level".into()));
            }
        }
        let grids: Vec<SampleGrid> = (0..uv.n)
            .map(|n| {
                grid_from_planar(
                    uv.sample(n),
                    uv.w,
                    uv.h,
                    mask,
                    &ctx.cubes[n],
                    ctx.camera,
                    ctx.image_size,
                    (feat.w, feat.h),
                )
            })
            .collect();
        let warped = grid_sample(feat, &grids)?;
        self.cache = Some((feat.clone(), grids));
        Ok(Upsample2x::apply(&warped))
    }

    /// Returns gradients for the features and the UV map.
    pub fn backward(&mut self, gy: &Tensor4) -> (Tensor4, Tensor4) {
        let (feat, grids) = self.cache.as_ref().expect("affine connection backward before forward");
        let gw = Upsample2x::apply_transpose(gy);
        let (gf, gg) = grid_sample_backward(feat, grids, &gw).expect("shapes fixed by forward");
        let plane = feat.plane();
        let mut guv = Tensor4::zeros(feat.n, 3, feat.h, feat.w);
        for (n, (g, grid)) in gg.iter().zip(grids).enumerate() {
            let s = guv.sample_mut(n);
            for p in 0..plane {
                if grid.valid[p] && !grid.clamped[p] {
                    s[p] = g[p][0] * grid.jacobian[0];
                    s[plane + p] = g[p][1] * grid.jacobian[1];
                }
            }
        }
        (gf, guv)
    }
}

/// One-shot affine connection.
pub fn affine_connection(uv: &Tensor4, feat: &Tensor4, mask: Option<&Mask>, ctx: &WarpContext) -> Result<Tensor4> {
    AffineConnection::default().forward(uv, feat, mask, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_grid_is_exact() {
        let f = Tensor4::from_vec(1, 2, 3, 4, (0..24).map(|i| (i as f64).sqrt()).collect()).unwrap();
        let g = SampleGrid {
            width: 4,
            height: 3,
            coords: (0..12).map(|p| [(p % 4) as f64, (p / 4) as f64]).collect(),
            valid: vec![true; 12],
            clamped: vec![false; 12],
            jacobian: [1.0, 1.0],
        };
        assert_eq!(grid_sample(&f, &[g]).unwrap(), f);
    }

    #[test]
    fn half_pixel_on_ramp() {
        let f = Tensor4::from_vec(1, 1, 1, 4, vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        let g = SampleGrid {
            width: 3,
            height: 1,
            coords: (0..3).map(|x| [x as f64 + 0.5, 0.0]).collect(),
            valid: vec![true; 3],
            clamped: vec![false; 3],
            jacobian: [1.0, 1.0],
        };
        assert_eq!(grid_sample(&f, &[g]).unwrap().data, vec![1.0, 3.0, 5.0]);
    }
}
