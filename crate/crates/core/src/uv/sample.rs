use crate::error::{Error, Result};
use crate::mesh::{Point3, TriMesh};

use super::raster::{TemplateRaster, NO_FACE};
use super::{UvPositionMap, UvTemplate};

/// Precomputed linear map from UV position map pixels to mesh vertices.
///
/// Each template copy reads a bilinear stencil at its uv when all four taps
/// lie in its own chart. Near a chart border it instead inverts the
/// barycentric blend over the pixels of an incident face, which is exact
/// for encoded maps; failing that it renormalizes the in-chart taps, and
/// failing that it takes the nearest same-chart pixel (the vertex is then
/// flagged). Values from a neighbouring chart or the zero background never
/// leak across a seam. Mesh vertices average over their best-supported
/// copies. Weights sum to 1 but solved ones may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStencil {
    /// Per mesh vertex: `(pixel index, weight)` with weights summing to 1.
    pub taps: Vec<Vec<(u32, f64)>>,
    /// Mesh vertices that needed the nearest-pixel fallback.
    pub flagged: Vec<bool>,
}

/// How a template copy reads its vertex, best first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Support {
    /// All four bilinear taps lie in the copy's chart.
    Full,
    /// Least-squares inversion of the barycentric blend over the pixels of
    /// one incident face.
    Solved,
    /// Weighted affine fit in uv over nearby same-chart pixels, evaluated at
    /// the vertex.
    Fitted,
    /// Renormalized partial bilinear stencil.
    Partial,
    /// Nearest pixel.
    Nearest,
}

/// Largest accepted sum of squared solve weights; bounds noise gain.
const MAX_SOLVE_GAIN: f64 = 16.0;

/// Weights reproducing corner `k` of a face from pixels whose values are
/// `bary . corners`, or `None` when the pixels do not pin the corners down.
fn solve_corner(bary: &[[f64; 3]], k: usize) -> Option<Vec<f64>> {
    if bary.len() < 3 {
        return None;
    }
    let mut btb = nalgebra::Matrix3::<f64>::zeros();
    for b in bary {
        let v = nalgebra::Vector3::from(*b);
        btb += v * v.transpose();
    }
    let eig = btb.symmetric_eigenvalues();
    if eig.min() < 1e-6 * eig.max().max(1e-300) {
        return None;
    }
    let row = btb.try_inverse()?.row(k).into_owned();
    let w: Vec<f64> = bary.iter().map(|b| row[0] * b[0] + row[1] * b[1] + row[2] * b[2]).collect();
    (w.iter().map(|x| x * x).sum::<f64>() <= MAX_SOLVE_GAIN).then_some(w)
}

/// Pixel radius of the affine fit window.
const FIT_RADIUS: f64 = 2.0;

/// Weights of the value at `(x, y)` (pixel units) of the weighted
/// least-squares plane through `pixels` (pixel-centre coordinates).
fn fit_plane(pixels: &[(u32, [f64; 2])], x: f64, y: f64) -> Option<Vec<f64>> {
    if pixels.len() < 3 {
        return None;
    }
    let rows: Vec<(nalgebra::Vector3<f64>, f64)> = pixels
        .iter()
        .map(|&(_, c)| {
            let (dx, dy) = (c[0] - x, c[1] - y);
            let g = (-(dx * dx + dy * dy) / (2.0 * FIT_RADIUS * FIT_RADIUS)).exp();
            (nalgebra::Vector3::new(1.0, dx, dy), g)
        })
        .collect();
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    for (a, g) in &rows {
        ata += *g * a * a.transpose();
    }
    let eig = ata.symmetric_eigenvalues();
    if eig.min() < 1e-6 * eig.max().max(1e-300) {
        return None;
    }
    let row = ata.try_inverse()?.row(0).into_owned();
    let w: Vec<f64> = rows.iter().map(|(a, g)| g * (row * a)[0]).collect();
    (w.iter().map(|x| x * x).sum::<f64>() <= MAX_SOLVE_GAIN).then_some(w)
}

impl SampleStencil {
    pub fn build(template: &UvTemplate, raster: &TemplateRaster) -> Self {
        let (w, h) = (raster.width, raster.height);
        let chart_at = |p: usize| match raster.owner[p] {
            NO_FACE => usize::MAX,
            f => template.chart_of_face[f as usize],
        };
        let mut pixels_of: Vec<Vec<u32>> = vec![Vec::new(); template.faces.len()];
        for (p, &o) in raster.owner.iter().enumerate() {
            if o != NO_FACE {
                pixels_of[o as usize].push(p as u32);
            }
        }
        let mut faces_at: Vec<Vec<usize>> = vec![Vec::new(); template.uv.len()];
        for (f, face) in template.faces.iter().enumerate() {
            for &i in face {
                faces_at[i].push(f);
            }
        }
        let mut copies: Vec<Vec<(Support, Vec<(u32, f64)>)>> = vec![Vec::new(); template.n_mesh_verts];
        for (t, uv) in template.uv.iter().enumerate() {
            if faces_at[t].is_empty() {
                continue;
            }
            let chart = template.chart_of_uv[t];
            let x = uv[0] * w as f64 - 0.5;
            let y = uv[1] * h as f64 - 0.5;
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let mut taps = Vec::with_capacity(4);
            for (dx, dy, wt) in [
                (0, 0, (1.0 - fx) * (1.0 - fy)),
                (1, 0, fx * (1.0 - fy)),
                (0, 1, (1.0 - fx) * fy),
                (1, 1, fx * fy),
            ] {
                let (c, r) = (x0 as i64 + dx, y0 as i64 + dy);
                if c < 0 || r < 0 || c >= w as i64 || r >= h as i64 || wt <= 0.0 {
                    continue;
                }
                let p = r as usize * w + c as usize;
                if chart_at(p) == chart {
                    taps.push((p as u32, wt));
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            let v = template.vertex_of[t];
            if total > 1.0 - 1e-9 {
                copies[v].push((Support::Full, taps));
                continue;
            }
            let solved = faces_at[t]
                .iter()
                .filter_map(|&f| {
                    let k = template.faces[f].iter().position(|&i| i == t)?;
                    let px = &pixels_of[f];
                    let bary: Vec<[f64; 3]> = px.iter().map(|&p| raster.bary[p as usize]).collect();
                    let wts = solve_corner(&bary, k)?;
                    let gain: f64 = wts.iter().map(|x| x * x).sum();
                    Some((gain, px.iter().copied().zip(wts).collect::<Vec<_>>()))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((_, taps)) = solved {
                copies[v].push((Support::Solved, taps));
                continue;
            }
            let r = FIT_RADIUS.ceil() as i64 + 1;
            let mut near = Vec::new();
            for r_ in (y0 as i64 - r + 1)..=(y0 as i64 + r) {
                for c in (x0 as i64 - r + 1)..=(x0 as i64 + r) {
                    if c < 0 || r_ < 0 || c >= w as i64 || r_ >= h as i64 {
                        continue;
                    }
                    let p = r_ as usize * w + c as usize;
                    let d2 = (c as f64 - x).powi(2) + (r_ as f64 - y).powi(2);
                    if chart_at(p) == chart && d2 <= (FIT_RADIUS + 1.0).powi(2) {
                        near.push((p as u32, [c as f64, r_ as f64]));
                    }
                }
            }
            if let Some(wts) = fit_plane(&near, x, y) {
                copies[v].push((Support::Fitted, near.iter().map(|n| n.0).zip(wts).collect()));
            } else if total > 1e-9 {
                for tap in &mut taps {
                    tap.1 /= total;
                }
                copies[v].push((Support::Partial, taps));
            } else if let Some(p) = nearest_pixel(raster, uv, |p| chart_at(p) == chart)
                .or_else(|| nearest_pixel(raster, uv, |p| raster.owner[p] != NO_FACE))
            {
                copies[v].push((Support::Nearest, vec![(p as u32, 1.0)]));
            }
        }

        let mut taps = Vec::with_capacity(template.n_mesh_verts);
        let mut flagged = Vec::with_capacity(template.n_mesh_verts);
        for c in copies {
            // only the best-supported copies vote
            let best = c.iter().map(|x| x.0).min().unwrap_or(Support::Nearest);
            let chosen: Vec<_> = c.into_iter().filter(|x| x.0 == best).collect();
            let n = chosen.len() as f64;
            let mut merged: Vec<(u32, f64)> =
                chosen.into_iter().flat_map(|x| x.1).map(|(p, wt)| (p, wt / n)).collect();
            merged.sort_by_key(|t| t.0);
            merged.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            taps.push(merged);
            flagged.push(best == Support::Nearest);
        }
        SampleStencil { taps, flagged }
    }

    /// Samples normalized positions from channel-planar `data`. A vertex with
    /// no taps (empty mask) lands on the cube centre.
    pub fn apply(&self, data: &[f64], plane: usize) -> Vec<Point3> {
        self.taps
            .iter()
            .map(|taps| {
                if taps.is_empty() {
                    return [0.5; 3];
                }
                let mut q = [0.0; 3];
                for &(p, wt) in taps {
                    for (c, v) in q.iter_mut().enumerate() {
                        *v += wt * data[c * plane + p as usize];
                    }
                }
                q
            })
            .collect()
    }

    /// Adjoint of [`apply`](Self::apply): accumulates vertex gradients into a
    /// channel-planar map gradient.
    pub fn apply_transpose(&self, grad: &[Point3], plane: usize, out: &mut [f64]) {
        for (taps, g) in self.taps.iter().zip(grad) {
            for &(p, wt) in taps {
                for c in 0..3 {
                    out[c * plane + p as usize] += wt * g[c];
                }
            }
        }
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

fn nearest_pixel(raster: &TemplateRaster, uv: &[f64; 2], accept: impl Fn(usize) -> bool) -> Option<usize> {
    let (w, h) = (raster.width, raster.height);
    let mut best: Option<(f64, usize)> = None;
    for p in 0..w * h {
        if !accept(p) {
            continue;
        }
        let dx = ((p % w) as f64 + 0.5) / w as f64 - uv[0];
        let dy = ((p / w) as f64 + 0.5) / h as f64 - uv[1];
        let d = dx * dx * (w * w) as f64 + dy * dy * (h * h) as f64;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, p));
        }
    }
    best.map(|b| b.1)
}

/// Decodes a mesh from a UV position map. Returns the mesh and the ids of
/// vertices that fell back to their nearest in-chart pixel.
pub fn sample_uv_to_mesh(map: &UvPositionMap, template: &UvTemplate) -> Result<(TriMesh, Vec<usize>)> {
    let raster = TemplateRaster::build(template, map.width, map.height)?;
    if let Some(m) = &map.mask {
        if *m != raster.mask() {
            return Err(Error::Shape("map mask does not match the template mask".into()));
        }
    }
    let stencil = SampleStencil::build(template, &raster);
    let q = stencil.apply(&map.data, map.plane());
    let flagged = (0..stencil.flagged.len()).filter(|&i| stencil.flagged[i]).collect();
    Ok((
        TriMesh {
            vertices: map.cube.denormalize(&q),
            faces: template.mesh_faces(),
        },
        flagged,
    ))
}

/// Distance in pixels from each template vertex to the nearest chart
/// boundary edge (an edge used by exactly one face).
pub fn boundary_distance_px(template: &UvTemplate, width: usize, height: usize) -> Vec<f64> {
    let mut count: std::collections::HashMap<(usize, usize), u32> = Default::default();
    for f in &template.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let s = |p: [f64; 2]| [p[0] * width as f64, p[1] * height as f64];
    let segs: Vec<([f64; 2], [f64; 2])> = count
        .iter()
        .filter(|(_, &n)| n == 1)
        .map(|(&(a, b), _)| (s(template.uv[a]), s(template.uv[b])))
        .collect();
    template
        .uv
        .iter()
        .map(|&p| {
            let p = s(p);
            segs.iter()
                .map(|&(a, b)| point_segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Mesh vertices with at least one template copy `margin_px` or more from
/// any chart boundary.
pub fn interior_vertices(template: &UvTemplate, width: usize, height: usize, margin_px: f64) -> Vec<bool> {
    let d = boundary_distance_px(template, width, height);
    let mut out = vec![false; template.n_mesh_verts];
    for (t, &v) in template.vertex_of.iter().enumerate() {
        if d[t] >= margin_px {
            out[v] = true;
        }
    }
    out
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}
