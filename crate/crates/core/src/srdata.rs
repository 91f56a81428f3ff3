//! Scan registration and low/high-resolution UV training pairs for the
//! refinement network.
//!
//! A coarse mesh is rigidly (or similarly) registered to a dense point
//! cloud with point-to-point ICP, its edge-unpooled version is optionally
//! pulled onto the scan, and both meshes are encoded into UV maps that share
//! one normalization cube: the coarse mesh through the base template, the
//! dense mesh through the subdivided template.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType, ScalarType,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstar::primitives::GeomWithData;
use rstar::{PointDistance, RTree};
use serde::{Deserialize, Serialize};

use crate::align::{centroid, check_spread, fit_similarity, Similarity};
use crate::error::{Error, Result};
use crate::mesh::{compute_edges, Point3, TriMesh};
use crate::nn::train::{random_pose, synth_camera, SrDataset, SrSample, SYNTH_DEPTH};
use crate::toy::ToyHand;
use crate::uv::{NormalizationCube, UvCodec, UvForm, UvPositionMap, UvTemplate};
use crate::warp::Camera;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Point3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, normals: Option<Vec<Point3>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!("point {i}")));
        }
        if let Some(n) = &normals {
            if n.len() != points.len() {
                return Err(Error::CountMismatch {
                    what: "normals",
                    expected: points.len(),
                    got: n.len(),
                });
            }
        }
        Ok(PointCloud { points, normals })
    }

    pub fn from_mesh(mesh: &TriMesh) -> Self {
        PointCloud {
            points: mesh.vertices.clone(),
            normals: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn prop_f64(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        _ => return None,
    })
}

/// Reads the `vertex` element (`x y z`, optional `nx ny nz`) of an ASCII or
/// binary PLY stream.
pub fn read_ply(reader: &mut impl BufRead) -> Result<PointCloud> {
    let ply = Parser::<DefaultElement>::new()
        .read_ply(reader)
        .map_err(|e| Error::Format(format!("PLY: {e}")))?;
    let verts = ply
        .payload
        .get("vertex")
        .ok_or_else(|| Error::Format("PLY has no vertex element".into()))?;
    let get = |e: &DefaultElement, k: &str| e.get(k).and_then(prop_f64);
    let mut points = Vec::with_capacity(verts.len());
    let mut normals = Vec::new();
    let has_normals = verts.first().is_some_and(|e| e.contains_key("nx"));
    for (i, e) in verts.iter().enumerate() {
        let p = [get(e, "x"), get(e, "y"), get(e, "z")];
        match p {
            [Some(x), Some(y), Some(z)] => points.push([x, y, z]),
            _ => return Err(Error::Format(format!("PLY vertex {i} lacks numeric x/y/z"))),
        }
        if has_normals {
            match [get(e, "nx"), get(e, "ny"), get(e, "nz")] {
                [Some(x), Some(y), Some(z)] => normals.push([x, y, z]),
                _ => return Err(Error::Format(format!("PLY vertex {i} lacks numeric normals"))),
            }
        }
    }
    PointCloud::new(points, has_normals.then_some(normals))
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(&mut BufReader::new(f))
}

/// Writes `double` coordinates (and normals when present).
pub fn write_ply(w: &mut impl Write, cloud: &PointCloud, binary: bool) -> Result<()> {
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = if binary {
        Encoding::BinaryLittleEndian
    } else {
        Encoding::Ascii
    };
    let mut def = ElementDef::new("vertex".to_string());
    let keys: &[&str] = if cloud.normals.is_some() {
        &["x", "y", "z", "nx", "ny", "nz"]
    } else {
        &["x", "y", "z"]
    };
    for k in keys {
        def.properties
            .add(PropertyDef::new(k.to_string(), PropertyType::Scalar(ScalarType::Double)));
    }
    ply.header.elements.add(def);
    let elements = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut e = DefaultElement::new();
            let mut vals = p.to_vec();
            if let Some(n) = &cloud.normals {
                vals.extend_from_slice(&n[i]);
            }
            for (k, v) in keys.iter().zip(vals) {
                e.insert(k.to_string(), Property::Double(v));
            }
            e
        })
        .collect();
    ply.payload.insert("vertex".to_string(), elements);
    ply_rs::writer::Writer::new()
        .write_ply(w, &mut ply)
        .map_err(|e| Error::io("<ply stream>", e))?;
    Ok(())
}

pub fn save_ply(path: impl AsRef<Path>, cloud: &PointCloud, binary: bool) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_ply(&mut w, cloud, binary)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read-only nearest-neighbour index over a point set.
pub struct NearestIndex {
    tree: RTree<GeomWithData<Point3, usize>>,
    pub points: Vec<Point3>,
}

impl NearestIndex {
    pub fn new(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Degenerate("nearest-neighbour index over no points".into()));
        }
        let items = points.iter().enumerate().map(|(i, &p)| GeomWithData::new(p, i)).collect();
        Ok(NearestIndex {
            tree: RTree::bulk_load(items),
            points: points.to_vec(),
        })
    }

    /// `(index, distance)` of the closest indexed point.
    pub fn nearest(&self, q: Point3) -> (usize, f64) {
        let n = self.tree.nearest_neighbor(&q).expect("index is non-empty");
        (n.data, n.distance_2(&q).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once an iteration lowers the RMS residual by less than this
    /// (meters), or the residual itself falls below it.
    pub tolerance: f64,
    /// Correspondences farther than this multiple of the median distance
    /// are dropped for the transform estimate.
    pub reject_factor: f64,
    /// Absolute correspondence cut-off (meters).
    pub max_distance: f64,
    /// Estimate a uniform scale as well (similarity instead of rigid).
    pub estimate_scale: bool,
    /// Start from the centroid-aligning translation instead of identity.
    pub center_init: bool,
    /// Also start from the four proper rotations aligning the principal
    /// axes of source and target, keeping the run with the lowest residual.
    pub pca_init: bool,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iterations: 50,
            tolerance: 1e-12,
            reject_factor: 2.5,
            max_distance: f64::INFINITY,
            estimate_scale: false,
            center_init: true,
            pca_init: true,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.tolerance <= 0.0 || self.reject_factor <= 0.0 || self.max_distance <= 0.0 {
            return Err(Error::Config(format!("ICP parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    /// Maps source coordinates onto the target.
    pub transform: Similarity,
    pub mesh: TriMesh,
    /// RMS nearest-neighbour distance of all source points, before the first
    /// iteration and after each accepted one; non-increasing.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Matches {
    rms: f64,
    target: Vec<usize>,
    dist: Vec<f64>,
}

fn match_points(index: &NearestIndex, src: &[Point3], t: &Similarity) -> Matches {
    let (mut target, mut dist) = (Vec::with_capacity(src.len()), Vec::with_capacity(src.len()));
    let mut sq = 0.0;
    for &p in src {
        let (j, d) = index.nearest(t.apply(p));
        target.push(j);
        dist.push(d);
        sq += d * d;
    }
    Matches {
        rms: (sq / src.len() as f64).sqrt(),
        target,
        dist,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Principal axes (columns, by decreasing variance) and centroid.
fn principal_axes(points: &[Point3]) -> (Matrix3<f64>, Vector3<f64>) {
    let c = centroid(points);
    let c = Vector3::new(c[0], c[1], c[2]);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::new(p[0], p[1], p[2]) - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    (Matrix3::from_columns(&order.map(|k| eig.eigenvectors.column(k).into_owned())), c)
}

fn initial_transforms(src: &[Point3], dst: &[Point3], params: &IcpParams) -> Vec<Similarity> {
    let (cs, ct) = (centroid(src), centroid(dst));
    let mut out = vec![if params.center_init {
        Similarity::translation([ct[0] - cs[0], ct[1] - cs[1], ct[2] - cs[2]])
    } else {
        Similarity::default()
    }];
    if params.pca_init {
        let (es, ms) = principal_axes(src);
        let (et, mt) = principal_axes(dst);
        for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let mut d = Matrix3::from_diagonal(&Vector3::new(a, b, 1.0));
            let r0 = et * d * es.transpose();
            if r0.determinant() < 0.0 {
                d[(2, 2)] = -1.0;
            }
            let r = et * d * es.transpose();
            let t = mt - r * ms;
            out.push(Similarity {
                rotation: [0, 1, 2].map(|i| [0, 1, 2].map(|j| r[(i, j)])),
                translation: [t[0], t[1], t[2]],
                scale: 1.0,
            });
        }
    }
    out
}

/// Point-to-point ICP of `source`'s vertices onto `target`.
///
/// Each iteration fits the transform on the retained correspondences. If
/// that raises the residual, the fit is redone on all correspondences, which
/// cannot raise it (the current transform is a candidate of the same least
/// squares problem); the reported history is therefore non-increasing. When
/// even that fit raises the residual by more than the tolerance on three
/// consecutive iterations the run aborts with [`Error::Diverged`].
pub fn icp_register(source: &TriMesh, target: &PointCloud, params: &IcpParams) -> Result<IcpResult> {
    params.validate()?;
    check_spread(&source.vertices, "ICP source")?;
    check_spread(&target.points, "ICP target")?;
    let index = NearestIndex::new(&target.points)?;
    let mut best: Option<IcpResult> = None;
    for init in initial_transforms(&source.vertices, &target.points, params) {
        let r = icp_from(source, target, &index, init, params)?;
        if best.as_ref().is_none_or(|b| r.residuals.last() < b.residuals.last()) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

fn icp_from(
    source: &TriMesh,
    target: &PointCloud,
    index: &NearestIndex,
    mut t: Similarity,
    params: &IcpParams,
) -> Result<IcpResult> {
    let src = &source.vertices;
    let mut cur = match_points(index, src, &t);
    let mut residuals = vec![cur.rms];
    let mut rises = 0;
    let mut converged = false;
    let mut iterations = 0;

    let fit = |m: &Matches, keep: &dyn Fn(usize) -> bool| -> Option<(Matches, Similarity)> {
        let idx: Vec<usize> = (0..src.len()).filter(|&i| keep(i)).collect();
        let s: Vec<Point3> = idx.iter().map(|&i| src[i]).collect();
        let d: Vec<Point3> = idx.iter().map(|&i| target.points[m.target[i]]).collect();
        let c = fit_similarity(&s, &d, params.estimate_scale).ok()?;
        Some((match_points(index, src, &c), c))
    };

    while iterations < params.max_iterations {
        if cur.rms < params.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let cut = (params.reject_factor * median(&cur.dist)).min(params.max_distance);
        let mut next = fit(&cur, &|i| cur.dist[i] <= cut).filter(|(m, _)| m.rms <= cur.rms);
        if next.is_none() {
            next = fit(&cur, &|_| true);
        }
        let Some((m, cand)) = next else {
            return Err(Error::Degenerate("ICP correspondences are degenerate".into()));
        };
        if m.rms > cur.rms {
            if m.rms > cur.rms + params.tolerance {
                rises += 1;
                if rises >= 3 {
                    return Err(Error::Diverged { history: residuals });
                }
                continue;
            }
            // rounding-level rise: nothing left to gain
            converged = true;
            break;
        }
        rises = 0;
        let gain = cur.rms - m.rms;
        t = cand;
        cur = m;
        residuals.push(cur.rms);
        if gain < params.tolerance {
            converged = true;
            break;
        }
    }
    Ok(IcpResult {
        transform: t,
        mesh: TriMesh {
            vertices: t.apply_all(src),
            faces: source.faces.clone(),
        },
        residuals,
        iterations,
        converged,
    })
}

/// Pulls every vertex toward its nearest scan point, blended with the mean
/// of its one-ring: `p <- (1 - w) nn(p) + w mean(ring)`, `iterations` times.
pub fn refine_nonrigid(mesh: &TriMesh, target: &PointCloud, iterations: usize, smooth_weight: f64) -> Result<TriMesh> {
    if !(0.0..=1.0).contains(&smooth_weight) {
        return Err(Error::Config(format!("smoothness weight {smooth_weight} outside [0, 1]")));
    }
    let index = NearestIndex::new(&target.points)?;
    let ring = mesh.vertex_neighbors();
    let mut v = mesh.vertices.clone();
    for _ in 0..iterations {
        v = (0..v.len())
            .map(|i| {
                let (j, _) = index.nearest(v[i]);
                let q = target.points[j];
                let mean = if ring[i].is_empty() {
                    v[i]
                } else {
                    let n = ring[i].len() as f64;
                    let s = ring[i].iter().fold([0.0; 3], |a, &k| [a[0] + v[k][0], a[1] + v[k][1], a[2] + v[k][2]]);
                    s.map(|c| c / n)
                };
                [0, 1, 2].map(|k| (1.0 - smooth_weight) * q[k] + smooth_weight * mean[k])
            })
            .collect();
    }
    TriMesh::new(v, mesh.faces.clone())
}

/// Normalized 1-D Gaussian taps `g[-r..=r]`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn blur_axis(src: &[f64], w: usize, h: usize, k: &[f64], horizontal: bool) -> Vec<f64> {
    let r = (k.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &g) in k.iter().enumerate() {
                let d = t as i64 - r;
                let (xx, yy) = if horizontal { (x as i64 + d, y as i64) } else { (x as i64, y as i64 + d) };
                if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
                    acc += g * src[yy as usize * w + xx as usize];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// In-mask Gaussian blur of a UV map.
///
/// Kernel weight landing outside the mask (or the image) stays on the
/// centre pixel: `out = x (1 - G*m) + G*(m x)` on masked pixels. Constant
/// maps are fixed points, masked-out pixels are untouched and, the kernel
/// being symmetric, the in-mask sum of every channel is preserved.
pub fn gaussian_smooth_uv(map: &UvPositionMap, sigma: f64) -> Result<UvPositionMap> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("smoothing sigma {sigma} must be finite and non-negative")));
    }
    if sigma == 0.0 {
        return Ok(map.clone());
    }
    let (w, h) = (map.width, map.height);
    let plane = w * h;
    let k = gaussian_kernel(sigma);
    let m: Vec<f64> = (0..plane)
        .map(|p| if map.mask.as_ref().is_none_or(|m| m.bits[p]) { 1.0 } else { 0.0 })
        .collect();
    let sep = |x: &[f64]| blur_axis(&blur_axis(x, w, h, &k, true), w, h, &k, false);
    let gm = sep(&m);
    let mut out = map.clone();
    for c in 0..3 {
        let x = &map.data[c * plane..(c + 1) * plane];
        let mx: Vec<f64> = x.iter().zip(&m).map(|(a, b)| a * b).collect();
        let gmx = sep(&mx);
        for p in 0..plane {
            if m[p] > 0.0 {
                out.data[c * plane + p] = x[p] * (1.0 - gm[p]) + gmx[p];
            }
        }
    }
    Ok(out)
}

/// The base template and its edge-subdivided counterpart, bound to one
/// resolution.
#[derive(Debug, Clone)]
pub struct SrTemplates {
    pub base: UvCodec,
    pub dense: UvCodec,
}

impl SrTemplates {
    pub fn new(base: &UvTemplate, resolution: usize) -> Result<Self> {
        let faces = base.mesh_faces();
        let topo = TriMesh {
            vertices: vec![[0.0; 3]; base.n_mesh_verts],
            faces,
        };
        let dense = base.subdivide(&compute_edges(&topo)?)?;
        Ok(SrTemplates {
            base: UvCodec::new(base, resolution, resolution)?,
            dense: UvCodec::new(&dense, resolution, resolution)?,
        })
    }

    pub fn resolution(&self) -> usize {
        self.base.width()
    }
}

#[derive(Debug, Clone)]
pub struct SrPair {
    pub low: UvPositionMap,
    pub high: UvPositionMap,
    /// Gaussian-smoothed `low`, a second input sample for the same target.
    pub low_smoothed: Option<UvPositionMap>,
}

fn topology_matches(mesh: &TriMesh, codec: &UvCodec) -> bool {
    mesh.vertex_count() == codec.template.n_mesh_verts && mesh.faces == codec.template.mesh_faces()
}

/// Encodes the coarse mesh through the base template and the dense mesh
/// through the subdivided one, both in `cube`.
pub fn make_sr_pair(
    coarse: &TriMesh,
    dense: &TriMesh,
    templates: &SrTemplates,
    cube: &NormalizationCube,
    smooth_sigma: Option<f64>,
) -> Result<SrPair> {
    if !topology_matches(coarse, &templates.base) {
        return Err(Error::InvalidMesh("coarse mesh topology differs from the base template".into()));
    }
    if !topology_matches(dense, &templates.dense) {
        return Err(Error::InvalidMesh(
            "dense mesh topology is not the edge unpooling of the coarse topology".into(),
        ));
    }
    let low = templates.base.encode(coarse, cube)?;
    let high = templates.dense.encode(dense, cube)?;
    let low_smoothed = smooth_sigma.map(|s| gaussian_smooth_uv(&low, s)).transpose()?;
    Ok(SrPair { low, high, low_smoothed })
}

/// Cube bounds as stored in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeRecord {
    pub min: Point3,
    pub max: Point3,
}

impl From<&NormalizationCube> for CubeRecord {
    fn from(c: &NormalizationCube) -> Self {
        let (ctr, e) = (c.center(), c.half_extent());
        CubeRecord {
            min: ctr.map(|v| v - e),
            max: ctr.map(|v| v + e),
        }
    }
}

impl CubeRecord {
    pub fn cube(&self) -> Result<NormalizationCube> {
        NormalizationCube::from_bounds(self.min, self.max)
    }
}

/// One line of a pair manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub low_path: PathBuf,
    pub high_path: PathBuf,
    pub cube: CubeRecord,
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[PairRecord]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Settings of the synthetic refinement-pair generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrSynthConfig {
    pub samples: usize,
    pub resolution: usize,
    pub form: UvForm,
    pub seed: u64,
    /// Smoothing applied to the low map to form the network input; `0`
    /// feeds the low map unchanged.
    pub smooth_sigma: f64,
    /// Amplitude (meters) of the fixed rest-frame displacement pattern on
    /// the dense surface.
    pub bump_amplitude: f64,
    pub max_curl: f64,
    pub max_roll: f64,
    pub half_extent: f64,
}

impl Default for SrSynthConfig {
    fn default() -> Self {
        SrSynthConfig {
            samples: 200,
            resolution: 64,
            form: UvForm::Uv1,
            seed: 11,
            smooth_sigma: 2.0,
            bump_amplitude: 0.001,
            max_curl: 0.9,
            max_roll: 0.3,
            half_extent: crate::uv::DEFAULT_HALF_EXTENT,
        }
    }
}

/// Rest-frame displacement: crease-like ridges across the fingers and palm.
pub fn synth_bumps(amplitude: f64, cell: f64) -> impl Fn(f64, f64) -> f64 {
    move |x: f64, y: f64| {
        let t = std::f64::consts::TAU / (2.0 * cell);
        amplitude * (t * y).sin() * (0.5 + 0.5 * (0.5 * t * x).cos())
    }
}

/// A synthetic refinement dataset plus what is needed to evaluate it.
pub struct SrSynth {
    pub data: SrDataset,
    pub templates: SrTemplates,
    pub camera: Camera,
    pub faces: Vec<[usize; 3]>,
}

/// Posed toy hands: the coarse mesh is the lattice hand, the dense mesh its
/// edge unpooling refined onto the analytic surface (plus bumps), posed
/// identically. Inputs are the (smoothed) low maps, targets the high maps.
pub fn synth_sr_dataset(cfg: &SrSynthConfig) -> Result<SrSynth> {
    let hand = ToyHand::default();
    let templates = SrTemplates::new(&hand.template(cfg.form), cfg.resolution)?;
    let dense_rest = hand.refine_rest(
        &crate::mesh::edge_unpool(&hand.rest)?,
        synth_bumps(cfg.bump_amplitude, hand.cell),
    );
    let camera = synth_camera(cfg.resolution);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let mut pose = random_pose(&mut rng, cfg.max_curl, cfg.max_roll);
        pose.translation[2] = SYNTH_DEPTH + rng.random_range(-0.01..0.01);
        let coarse = hand.posed(&pose);
        let dense = TriMesh {
            vertices: hand.pose_points(&dense_rest.vertices, &pose),
            faces: dense_rest.faces.clone(),
        };
        let wrist = crate::mesh::add(hand.wrist_rest(), pose.translation);
        let cube = NormalizationCube::new(wrist, cfg.half_extent)?;
        let sigma = (cfg.smooth_sigma > 0.0).then_some(cfg.smooth_sigma);
        let pair = make_sr_pair(&coarse, &dense, &templates, &cube, sigma)?;
        let input = pair.low_smoothed.unwrap_or(pair.low);
        samples.push(SrSample {
            input: input.data,
            target: pair.high.data,
            cube,
            verts: dense.vertices,
        });
    }
    let data = SrDataset {
        resolution: cfg.resolution,
        mask: templates.dense.mask(),
        stencil: templates.dense.stencil.clone(),
        samples,
    };
    Ok(SrSynth {
        faces: templates.dense.template.mesh_faces(),
        data,
        templates,
        camera,
    })
}

/// Mean depth errors of decoded input and predicted maps against the dense
/// ground truth, rendered at `render_size` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrDepthReport {
    pub input_rmse_mm: f64,
    pub output_rmse_mm: f64,
    pub input_psnr_db: f64,
    pub output_psnr_db: f64,
}

impl SrDepthReport {
    /// Relative RMSE reduction of the output over the input.
    pub fn reduction(&self) -> f64 {
        1.0 - self.output_rmse_mm / self.input_rmse_mm
    }
}

/// Decodes a dense-template map of `data` into a mesh with `faces`.
pub fn decode_dense(data: &SrDataset, map: &[f64], cube: &NormalizationCube, faces: &[[usize; 3]]) -> TriMesh {
    let plane = data.resolution * data.resolution;
    TriMesh {
        vertices: cube.denormalize(&data.stencil.apply(map, plane)),
        faces: faces.to_vec(),
    }
}

pub fn sr_depth_report(synth: &SrSynth, predictions: &[Vec<f64>], render_size: usize) -> Result<SrDepthReport> {
    use crate::metrics::{depth_rmse_psnr, render_depth};
    let samples = &synth.data.samples;
    if predictions.len() != samples.len() || samples.is_empty() {
        return Err(Error::CountMismatch {
            what: "refinement predictions",
            expected: samples.len(),
            got: predictions.len(),
        });
    }
    let camera = crate::nn::train::synth_camera(render_size);
    let scores = samples
        .iter()
        .zip(predictions)
        .map(|(s, pred)| {
            let gt_mesh = TriMesh {
                vertices: s.verts.clone(),
                faces: synth.faces.clone(),
            };
            let gt = render_depth(&gt_mesh, &camera, render_size, render_size)?;
            let depth = |m: &[f64]| -> Result<_> {
                let mesh = decode_dense(&synth.data, m, &s.cube, &synth.faces);
                depth_rmse_psnr(&render_depth(&mesh, &camera, render_size, render_size)?, &gt)
            };
            Ok((depth(&s.input)?, depth(pred)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = scores.len() as f64;
    let mean = |f: &dyn Fn(&(crate::metrics::DepthScore, crate::metrics::DepthScore)) -> f64| {
        scores.iter().map(f).sum::<f64>() / n
    };
    Ok(SrDepthReport {
        input_rmse_mm: mean(&|s| s.0.rmse_mm),
        output_rmse_mm: mean(&|s| s.1.rmse_mm),
        input_psnr_db: mean(&|s| s.0.psnr_db),
        output_psnr_db: mean(&|s| s.1.psnr_db),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ply_round_trip_ascii_and_binary() {
        let cloud = PointCloud::new(
            vec![[0.1, 0.2, 0.3], [-1.0, 2.5, 1e-3]],
            Some(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
        )
        .unwrap();
        for binary in [false, true] {
            let mut buf = Vec::new();
            write_ply(&mut buf, &cloud, binary).unwrap();
            let back = read_ply(&mut std::io::Cursor::new(buf)).unwrap();
            assert_eq!(back, cloud);
        }
    }

    #[test]
    fn kernel_is_normalized() {
        let k = gaussian_kernel(2.0);
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn icp_on_identical_points_is_identity() {
        let m = ToyHand::default().rest;
        let r = icp_register(&m, &PointCloud::from_mesh(&m), &IcpParams::default()).unwrap();
        assert_eq!(r.residuals[0], 0.0);
        assert!(r.transform.rotation_angle_to(&Similarity::default()) < 1e-12);
    }
}
