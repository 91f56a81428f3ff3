use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

use super::{Mask, NormalizationCube, UvCodec, UvPositionMap, UvTemplate};

/// Owner value of pixels not covered by any face.
pub const NO_FACE: u32 = u32::MAX;

/// Smallest supported map side.
pub const MIN_RESOLUTION: usize = 4;

/// Tolerance on the (unnormalized, uv-area) edge function below which a
/// pixel centre counts as lying on an edge.
const EDGE_EPS: f64 = 1e-12;

/// Face ownership and barycentric weights of every pixel centre.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRaster {
    pub width: usize,
    pub height: usize,
    /// Owning template face per pixel, row-major; [`NO_FACE`] when empty.
    pub owner: Vec<u32>,
    /// Weights of the owning face's three corners, in face order.
    pub bary: Vec<[f64; 3]>,
}

/// Edge function of `p` against the directed edge `a -> b`, evaluated with
/// the endpoints in canonical (index) order so that two faces sharing an
/// edge see exactly opposite values.
#[inline]
fn edge_fn(ia: usize, a: [f64; 2], ib: usize, b: [f64; 2], p: [f64; 2]) -> f64 {
    let (s, a, b) = if ia < ib { (1.0, a, b) } else { (-1.0, b, a) };
    s * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
}

#[derive(Clone, Copy)]
enum Claim {
    None,
    Edge([f64; 3]),
    Strict([f64; 3]),
}

fn claim(t: &UvTemplate, f: usize, p: [f64; 2]) -> Claim {
    let [i0, i1, i2] = t.faces[f];
    let (a, b, c) = (t.uv[i0], t.uv[i1], t.uv[i2]);
    let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if area.abs() <= EDGE_EPS {
        return Claim::None;
    }
    let s = area.signum();
    // e0 is opposite corner 0, and so on
    let e = [
        s * edge_fn(i1, b, i2, c, p),
        s * edge_fn(i2, c, i0, a, p),
        s * edge_fn(i0, a, i1, b, p),
    ];
    if e.iter().any(|&v| v < -EDGE_EPS) {
        return Claim::None;
    }
    let total = e[0] + e[1] + e[2];
    let w = e.map(|v| v / total);
    if e.iter().all(|&v| v > EDGE_EPS) {
        Claim::Strict(w)
    } else {
        Claim::Edge(w)
    }
}

impl TemplateRaster {
    /// Rasterizes face IDs at pixel centres. Pixels on shared edges go to
    /// the lowest face index; any pixel strictly inside one face and also
    /// claimed by another is reported as overlap.
    pub fn build(template: &UvTemplate, width: usize, height: usize) -> Result<Self> {
        if width < MIN_RESOLUTION || height < MIN_RESOLUTION {
            return Err(Error::Shape(format!(
                "resolution {width}x{height} below minimum {MIN_RESOLUTION}"
            )));
        }
        // bin faces by the rows their bounding box touches
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); height];
        let mut cols: Vec<(usize, usize)> = Vec::with_capacity(template.faces.len());
        for (fi, f) in template.faces.iter().enumerate() {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &i in f {
                for k in 0..2 {
                    lo[k] = lo[k].min(template.uv[i][k]);
                    hi[k] = hi[k].max(template.uv[i][k]);
                }
            }
            let span = |lo: f64, hi: f64, n: usize| {
                let a = ((lo * n as f64 - 0.5).floor().max(0.0)) as usize;
                let b = ((hi * n as f64 - 0.5).ceil().max(0.0) as usize).min(n - 1);
                (a, b)
            };
            let (c0, c1) = span(lo[0], hi[0], width);
            let (r0, r1) = span(lo[1], hi[1], height);
            cols.push((c0, c1));
            for row in rows.iter_mut().take(r1 + 1).skip(r0) {
                row.push(fi as u32);
            }
        }

        let per_row: Vec<Result<(Vec<u32>, Vec<[f64; 3]>)>> = rows
            .par_iter()
            .enumerate()
            .map(|(r, faces)| {
                let mut owner = vec![NO_FACE; width];
                let mut strict = vec![false; width];
                let mut bary = vec![[0.0; 3]; width];
                let v = (r as f64 + 0.5) / height as f64;
                for &fi in faces {
                    let (c0, c1) = cols[fi as usize];
                    for c in c0..=c1 {
                        let p = [(c as f64 + 0.5) / width as f64, v];
                        let (is_strict, w) = match claim(template, fi as usize, p) {
                            Claim::None => continue,
                            Claim::Edge(w) => (false, w),
                            Claim::Strict(w) => (true, w),
                        };
                        if owner[c] != NO_FACE {
                            if is_strict || strict[c] {
                                return Err(Error::OverlappingCharts(owner[c] as usize, fi as usize));
                            }
                            // both on edges; the earlier (lower) face keeps it
                            continue;
                        }
                        owner[c] = fi;
                        strict[c] = is_strict;
                        bary[c] = w;
                    }
                }
                Ok((owner, bary))
            })
            .collect();

        let mut owner = Vec::with_capacity(width * height);
        let mut bary = Vec::with_capacity(width * height);
        for row in per_row {
            let (o, b) = row?;
            owner.extend(o);
            bary.extend(b);
        }
        Ok(TemplateRaster {
            width,
            height,
            owner,
            bary,
        })
    }

    pub fn mask(&self) -> Mask {
        Mask::new(self.width, self.height, self.owner.iter().map(|&o| o != NO_FACE).collect())
    }
}

/// Writes barycentric interpolations of normalized vertex positions into
/// every owned pixel. Returns the map and the number of clamped vertices.
pub(crate) fn encode(
    codec: &UvCodec,
    mesh: &TriMesh,
    cube: &NormalizationCube,
) -> Result<(UvPositionMap, usize)> {
    encode_raster(&codec.template, &codec.raster, mesh, cube)
}

fn encode_raster(
    template: &UvTemplate,
    raster: &TemplateRaster,
    mesh: &TriMesh,
    cube: &NormalizationCube,
) -> Result<(UvPositionMap, usize)> {
    if mesh.vertex_count() != template.n_mesh_verts {
        return Err(Error::CountMismatch {
            what: "mesh vertices vs template",
            expected: template.n_mesh_verts,
            got: mesh.vertex_count(),
        });
    }
    let (q, clamped) = cube.normalize(&mesh.vertices)?;
    let mut map = UvPositionMap::zeros(raster.width, raster.height, *cube, Some(raster.mask()));
    let plane = map.plane();
    for p in 0..plane {
        let f = raster.owner[p];
        if f == NO_FACE {
            continue;
        }
        let face = template.faces[f as usize];
        let w = raster.bary[p];
        for c in 0..3 {
            let v: f64 = (0..3).map(|k| w[k] * q[template.vertex_of[face[k]]][c]).sum();
            map.data[c * plane + p] = v.clamp(0.0, 1.0);
        }
    }
    Ok((map, clamped))
}

/// One-shot square encode; see [`UvCodec`] for repeated use.
pub fn rasterize_mesh_to_uv(
    mesh: &TriMesh,
    template: &UvTemplate,
    resolution: usize,
    cube: &NormalizationCube,
) -> Result<UvPositionMap> {
    let raster = TemplateRaster::build(template, resolution, resolution)?;
    encode_raster(template, &raster, mesh, cube).map(|(m, _)| m)
}
