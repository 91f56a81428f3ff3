use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{compute_edges, parse_obj, EdgeSet, ObjData, Point3, TriMesh};

use super::raster::TemplateRaster;

/// Resolution at which chart overlap is checked when a template is built.
const OVERLAP_CHECK_RES: usize = 512;

/// Which unfolding a template represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UvForm {
    Uv1,
    Uv2,
    Uv3,
    /// Produced by [`make_fallback_template`].
    Fallback,
    Custom,
}

impl UvForm {
    pub fn name(self) -> &'static str {
        match self {
            UvForm::Uv1 => "UV1",
            UvForm::Uv2 => "UV2",
            UvForm::Uv3 => "UV3",
            UvForm::Fallback => "FALLBACK",
            UvForm::Custom => "CUSTOM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "UV1" => Some(UvForm::Uv1),
            "UV2" => Some(UvForm::Uv2),
            "UV3" => Some(UvForm::Uv3),
            "FALLBACK" => Some(UvForm::Fallback),
            "CUSTOM" => Some(UvForm::Custom),
            _ => None,
        }
    }
}

/// Fixed assignment of chart coordinates to mesh vertices.
///
/// Template vertices may duplicate mesh vertices along seams, so faces are
/// stored in template-vertex indices and `vertex_of` maps each template
/// vertex back to its mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct UvTemplate {
    pub form: UvForm,
    pub uv: Vec<[f64; 2]>,
    pub faces: Vec<[usize; 3]>,
    pub vertex_of: Vec<usize>,
    pub n_mesh_verts: usize,
    pub chart_of_face: Vec<usize>,
    pub chart_of_uv: Vec<usize>,
    pub n_charts: usize,
}

impl UvTemplate {
    /// Validates ranges and indices, labels charts and checks that no two
    /// faces overlap in UV space.
    pub fn new(
        form: UvForm,
        uv: Vec<[f64; 2]>,
        faces: Vec<[usize; 3]>,
        vertex_of: Vec<usize>,
        n_mesh_verts: usize,
    ) -> Result<Self> {
        let t = Self::new_unchecked(form, uv, faces, vertex_of, n_mesh_verts)?;
        TemplateRaster::build(&t, OVERLAP_CHECK_RES, OVERLAP_CHECK_RES)?;
        Ok(t)
    }

    fn new_unchecked(
        form: UvForm,
        uv: Vec<[f64; 2]>,
        faces: Vec<[usize; 3]>,
        vertex_of: Vec<usize>,
        n_mesh_verts: usize,
    ) -> Result<Self> {
        if uv.len() != vertex_of.len() {
            return Err(Error::CountMismatch {
                what: "uv entries vs vertex map",
                expected: uv.len(),
                got: vertex_of.len(),
            });
        }
        if let Some((i, p)) = uv
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]))
        {
            return Err(Error::Format(format!("uv {i} = {p:?} outside [0,1]^2")));
        }
        if let Some(&v) = vertex_of.iter().find(|&&v| v >= n_mesh_verts) {
            return Err(Error::Format(format!("template maps to mesh vertex {v} >= {n_mesh_verts}")));
        }
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= uv.len())) {
            return Err(Error::Format(format!("template face {f:?} out of range")));
        }
        let mut covered = vec![false; n_mesh_verts];
        for f in &faces {
            for &i in f {
                covered[vertex_of[i]] = true;
            }
        }
        if let Some(v) = covered.iter().position(|&c| !c) {
            return Err(Error::Format(format!("mesh vertex {v} is not covered by any template face")));
        }

        // union-find over template vertices
        let mut parent: Vec<usize> = (0..uv.len()).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for f in &faces {
            for k in 1..3 {
                let (a, b) = (root(&mut parent, f[0]), root(&mut parent, f[k]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut label: HashMap<usize, usize> = HashMap::new();
        let mut chart_of_face = Vec::with_capacity(faces.len());
        for f in &faces {
            let r = root(&mut parent, f[0]);
            let next = label.len();
            chart_of_face.push(*label.entry(r).or_insert(next));
        }
        let chart_of_uv = (0..uv.len())
            .map(|i| {
                let r = root(&mut parent, i);
                label.get(&r).copied().unwrap_or(usize::MAX)
            })
            .collect();
        Ok(UvTemplate {
            form,
            uv,
            faces,
            vertex_of,
            n_mesh_verts,
            chart_of_face,
            chart_of_uv,
            n_charts: label.len(),
        })
    }

    /// Template faces re-expressed in mesh-vertex indices.
    pub fn mesh_faces(&self) -> Vec<[usize; 3]> {
        self.faces.iter().map(|f| f.map(|i| self.vertex_of[i])).collect()
    }

    /// Builds a template from OBJ records (`v`, `vt`, `f v/vt`).
    pub fn from_obj(data: &ObjData, form: UvForm) -> Result<Self> {
        let tc = data
            .face_texcoords
            .as_ref()
            .ok_or_else(|| Error::Format("template OBJ needs v/vt indices on every face".into()))?;
        let mut vertex_of = vec![usize::MAX; data.texcoords.len()];
        for (f, t) in data.faces.iter().zip(tc) {
            for k in 0..3 {
                let slot = &mut vertex_of[t[k]];
                if *slot == usize::MAX {
                    *slot = f[k];
                } else if *slot != f[k] {
                    return Err(Error::Format(format!(
                        "texcoord {} is shared by vertices {} and {}",
                        t[k], *slot, f[k]
                    )));
                }
            }
        }
        // OBJ texcoords use a bottom-left origin
        let uv = data.texcoords.iter().map(|t| [t[0], 1.0 - t[1]]).collect();
        // drop unreferenced texcoords by mapping them to vertex 0; they own no face
        let vertex_of = vertex_of.into_iter().map(|v| if v == usize::MAX { 0 } else { v }).collect();
        UvTemplate::new(form, uv, tc.clone(), vertex_of, data.vertices.len())
    }

    /// OBJ representation; `positions` supplies the `v` records.
    pub fn to_obj(&self, positions: &[Point3]) -> ObjData {
        ObjData {
            vertices: positions.to_vec(),
            texcoords: self.uv.iter().map(|p| [p[0], 1.0 - p[1]]).collect(),
            faces: self.mesh_faces(),
            face_texcoords: Some(self.faces.clone()),
        }
    }

    pub fn save(&self, positions: &[Point3], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = format!(
            "# uvhand-template {}\n{}",
            self.form.name(),
            crate::mesh::write_obj(&self.to_obj(positions))
        );
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// UV-space midpoint subdivision matching [`crate::mesh::edge_unpool`]:
    /// the midpoint of template edge `(a, b)` maps to mesh vertex
    /// `V + edges.index_of(vertex_of[a], vertex_of[b])`.
    pub fn subdivide(&self, mesh_edges: &EdgeSet) -> Result<UvTemplate> {
        let mut uv_edges: Vec<(usize, usize)> = Vec::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                uv_edges.push((a.min(b), a.max(b)));
            }
        }
        uv_edges.sort_unstable();
        uv_edges.dedup();
        let base = self.uv.len();
        let index: HashMap<(usize, usize), usize> =
            uv_edges.iter().enumerate().map(|(i, &e)| (e, base + i)).collect();
        let mut uv = self.uv.clone();
        let mut vertex_of = self.vertex_of.clone();
        for &(a, b) in &uv_edges {
            uv.push([0.5 * (self.uv[a][0] + self.uv[b][0]), 0.5 * (self.uv[a][1] + self.uv[b][1])]);
            let e = mesh_edges
                .index_of(self.vertex_of[a], self.vertex_of[b])
                .ok_or_else(|| Error::Format("template edge is not a mesh edge".into()))?;
            vertex_of.push(self.n_mesh_verts + e);
        }
        let mid = |a: usize, b: usize| index[&(a.min(b), a.max(b))];
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        for &[a, b, c] in &self.faces {
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            faces.push([a, ab, ca]);
            faces.push([ab, b, bc]);
            faces.push([ca, bc, c]);
            faces.push([ab, bc, ca]);
        }
        // subdivision cannot introduce overlap, so skip the raster check
        UvTemplate::new_unchecked(self.form, uv, faces, vertex_of, self.n_mesh_verts + mesh_edges.len())
    }
}

/// Reads a template OBJ. The form is taken from a `# uvhand-template <FORM>`
/// header line when present.
pub fn load_template(path: impl AsRef<Path>) -> Result<UvTemplate> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let form = text
        .lines()
        .find_map(|l| l.strip_prefix("# uvhand-template "))
        .and_then(|s| UvForm::parse(s.trim()))
        .unwrap_or(UvForm::Custom);
    UvTemplate::from_obj(&parse_obj(&text)?, form)
}

/// Planar unwrap of a disk-topology mesh by boundary-fixed barycentric
/// (Tutte) embedding with uniform weights. The boundary goes to its
/// best-fit-plane projection when that polygon is convex, otherwise to a
/// circle parameterized by arc length.
pub fn make_fallback_template(mesh: &TriMesh) -> Result<UvTemplate> {
    let edges = compute_edges(mesh)?;
    if edges.boundary_loop_count() != 1 || edges.euler_characteristic(mesh) != 1 {
        return Err(Error::Degenerate("fallback unwrap needs a disk-topology mesh".into()));
    }
    let n = mesh.vertex_count();
    let boundary = boundary_loop(mesh, &edges);
    let mut uv = vec![[0.0f64; 2]; n];
    let mut fixed = vec![false; n];

    let projected = project_to_plane(boundary.iter().map(|&v| mesh.vertices[v]).collect());
    if is_convex(&projected) {
        for (&v, p) in boundary.iter().zip(&projected) {
            uv[v] = *p;
            fixed[v] = true;
        }
    } else {
        let pts: Vec<Point3> = boundary.iter().map(|&v| mesh.vertices[v]).collect();
        let mut acc = vec![0.0];
        for k in 0..pts.len() {
            let d = crate::mesh::norm(crate::mesh::sub(pts[(k + 1) % pts.len()], pts[k]));
            acc.push(acc[k] + d);
        }
        let total = *acc.last().unwrap();
        for (k, &v) in boundary.iter().enumerate() {
            let a = std::f64::consts::TAU * acc[k] / total;
            uv[v] = [a.cos(), a.sin()];
            fixed[v] = true;
        }
    }

    let neighbors = mesh.vertex_neighbors();
    solve_harmonic(&mut uv, &fixed, &neighbors);

    // consistent orientation: faces counter-clockwise in (u, v)
    let signed: f64 = mesh
        .faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| uv[i]);
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        })
        .sum();
    if signed < 0.0 {
        for p in &mut uv {
            p[0] = -p[0];
        }
    }
    fit_unit_square(&mut uv);
    UvTemplate::new(UvForm::Fallback, uv, mesh.faces.clone(), (0..n).collect(), n)
}

/// Boundary vertices in face-orientation order.
fn boundary_loop(mesh: &TriMesh, edges: &EdgeSet) -> Vec<usize> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let e = edges.index_of(a, b).unwrap();
            if edges.edge_faces[e].len() == 1 {
                next.insert(a, b);
            }
        }
    }
    let start = *next.keys().min().unwrap();
    let mut out = vec![start];
    let mut cur = next[&start];
    while cur != start {
        out.push(cur);
        cur = next[&cur];
    }
    out
}

fn project_to_plane(points: Vec<Point3>) -> Vec<[f64; 2]> {
    let n = points.len() as f64;
    let c = points.iter().fold([0.0; 3], |a, p| crate::mesh::add(a, *p)).map(|x| x / n);
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    for p in &points {
        let d = nalgebra::Vector3::from(crate::mesh::sub(*p, c));
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let e1 = eig.eigenvectors.column(order[0]).into_owned();
    let e2 = eig.eigenvectors.column(order[1]).into_owned();
    points
        .iter()
        .map(|p| {
            let d = nalgebra::Vector3::from(crate::mesh::sub(*p, c));
            [d.dot(&e1), d.dot(&e2)]
        })
        .collect()
}

fn is_convex(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let scale = poly
        .iter()
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
        .max(1e-300);
    let tol = 1e-12 * scale * scale;
    let mut sign = 0.0f64;
    for k in 0..n {
        let (a, b, c) = (poly[k], poly[(k + 1) % n], poly[(k + 2) % n]);
        let cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cr.abs() <= tol {
            continue;
        }
        if sign == 0.0 {
            sign = cr.signum();
        } else if cr.signum() != sign {
            return false;
        }
    }
    sign != 0.0
}

/// Conjugate gradient on the uniform graph Laplacian restricted to free
/// vertices, for both coordinates.
fn solve_harmonic(uv: &mut [[f64; 2]], fixed: &[bool], neighbors: &[Vec<usize>]) {
    let free: Vec<usize> = (0..uv.len()).filter(|&i| !fixed[i]).collect();
    if free.is_empty() {
        return;
    }
    let slot: HashMap<usize, usize> = free.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        for (k, &v) in free.iter().enumerate() {
            let mut s = neighbors[v].len() as f64 * x[k];
            for &w in &neighbors[v] {
                if let Some(&j) = slot.get(&w) {
                    s -= x[j];
                }
            }
            out[k] = s;
        }
    };
    for axis in 0..2 {
        let b: Vec<f64> = free
            .iter()
            .map(|&v| neighbors[v].iter().filter(|&&w| fixed[w]).map(|&w| uv[w][axis]).sum())
            .collect();
        let mut x = vec![0.0; free.len()];
        let mut r = b.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; free.len()];
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let bnorm = rr.sqrt().max(1e-300);
        for _ in 0..10 * free.len() + 100 {
            if rr.sqrt() <= 1e-14 * bnorm {
                break;
            }
            apply(&p, &mut ap);
            let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..p.len() {
                p[k] = r[k] + beta * p[k];
            }
        }
        for (k, &v) in free.iter().enumerate() {
            uv[v][axis] = x[k];
        }
    }
}

/// Uniform scale and translation so the longer side spans `[0,1]` and the
/// shorter one is centred.
fn fit_unit_square(uv: &mut [[f64; 2]]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in uv.iter() {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let pad = [0, 1].map(|k| 0.5 * (1.0 - (hi[k] - lo[k]) / span));
    for p in uv.iter_mut() {
        for k in 0..2 {
            p[k] = ((p[k] - lo[k]) / span + pad[k]).clamp(0.0, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_fallback_keeps_its_shape() {
        let m = TriMesh::new(
            vec![[0.0, 0.0, 1.0], [0.3, 0.0, 1.0], [0.0, 0.1, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let t = make_fallback_template(&m).unwrap();
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let s = d(t.uv[0], t.uv[1]) / 0.3;
        let span = |k: usize| {
            let v = t.uv.iter().map(|p| p[k]);
            v.clone().fold(f64::NEG_INFINITY, f64::max) - v.fold(f64::INFINITY, f64::min)
        };
        assert!((span(0).max(span(1)) - 1.0).abs() < 1e-12);
        assert!((d(t.uv[0], t.uv[2]) - 0.1 * s).abs() < 1e-9);
        assert!((d(t.uv[1], t.uv[2]) - (0.1f64.hypot(0.3)) * s).abs() < 1e-9);
        assert!(t.uv.iter().all(|p| (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])));
    }

    #[test]
    fn overlap_reported_with_face_pair() {
        let uv = vec![[0.1, 0.1], [0.9, 0.1], [0.1, 0.9], [0.2, 0.2], [0.8, 0.3], [0.3, 0.8]];
        let err = UvTemplate::new(UvForm::Custom, uv, vec![[0, 1, 2], [3, 4, 5]], (0..6).collect(), 6).unwrap_err();
        assert!(matches!(err, Error::OverlappingCharts(0, 1)), "{err}");
    }

    #[test]
    fn charts_are_labelled() {
        let uv = vec![[0.1, 0.1], [0.4, 0.1], [0.1, 0.4], [0.6, 0.6], [0.9, 0.6], [0.6, 0.9]];
        let t = UvTemplate::new(UvForm::Custom, uv, vec![[0, 1, 2], [3, 4, 5]], vec![0, 1, 2, 0, 1, 2], 3).unwrap();
        assert_eq!(t.n_charts, 2);
        assert_eq!(t.chart_of_face, vec![0, 1]);
    }

    #[test]
    fn obj_round_trip() {
        let hand = crate::toy::ToyHand::default();
        let t = hand.template(UvForm::Uv2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("uv2.obj");
        t.save(&hand.rest.vertices, &p).unwrap();
        let back = load_template(&p).unwrap();
        assert_eq!(back.form, UvForm::Uv2);
        assert_eq!(back.faces, t.faces);
        assert_eq!(back.vertex_of, t.vertex_of);
        for (a, b) in back.uv.iter().zip(&t.uv) {
            assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
        }
    }
}
