use std::fmt::Write as _;
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};

/// Everything read from an ASCII OBJ file: positions, optional texture
/// coordinates and per-corner indices into both.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjData {
    pub vertices: Vec<[f64; 3]>,
    pub texcoords: Vec<[f64; 2]>,
    pub faces: Vec<[usize; 3]>,
    /// Per-face texcoord indices; present only when every face carries them.
    pub face_texcoords: Option<Vec<[usize; 3]>>,
}

impl ObjData {
    pub fn into_mesh(self) -> Result<TriMesh> {
        TriMesh::new(self.vertices, self.faces)
    }
}

fn resolve_index(raw: &str, count: usize, line: usize) -> Result<usize> {
    let i: i64 = raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad index '{raw}'"),
    })?;
    let idx = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(Error::Parse {
            line,
            msg: format!("index {i} out of range"),
        });
    }
    Ok(idx as usize)
}

fn parse_floats<const N: usize>(it: &mut std::str::SplitWhitespace<'_>, line: usize) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for o in out.iter_mut() {
        let tok = it.next().ok_or(Error::Parse {
            line,
            msg: "missing coordinate".into(),
        })?;
        *o = tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad number '{tok}'"),
        })?;
    }
    Ok(out)
}

/// Parses `v`, `vt` and `f` records; everything else is ignored.
pub fn parse_obj(text: &str) -> Result<ObjData> {
    let mut data = ObjData::default();
    let mut face_tc: Vec<Option<[usize; 3]>> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut it = content.split_whitespace();
        match it.next() {
            Some("v") => data.vertices.push(parse_floats::<3>(&mut it, line)?),
            Some("vt") => data.texcoords.push(parse_floats::<2>(&mut it, line)?),
            Some("f") => {
                let corners: Vec<&str> = it.collect();
                if corners.len() != 3 {
                    return Err(Error::NonTriangularFace { line });
                }
                let mut f = [0usize; 3];
                let mut t = [0usize; 3];
                let mut has_t = true;
                for (k, c) in corners.iter().enumerate() {
                    let mut parts = c.split('/');
                    f[k] = resolve_index(parts.next().unwrap_or(""), data.vertices.len(), line)?;
                    match parts.next() {
                        Some(s) if !s.is_empty() => {
                            t[k] = resolve_index(s, data.texcoords.len(), line)?
                        }
                        _ => has_t = false,
                    }
                }
                if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                    return Err(Error::Parse {
                        line,
                        msg: "face repeats a vertex".into(),
                    });
                }
                data.faces.push(f);
                face_tc.push(has_t.then_some(t));
            }
            _ => {}
        }
    }
    if !face_tc.is_empty() && face_tc.iter().all(Option::is_some) {
        data.face_texcoords = Some(face_tc.into_iter().flatten().collect());
    }
    Ok(data)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)?.into_mesh()
}

/// Serializes with 9 significant digits per coordinate.
pub fn write_obj(data: &ObjData) -> String {
    let mut s = String::with_capacity(data.vertices.len() * 48 + data.faces.len() * 24);
    for v in &data.vertices {
        let _ = writeln!(s, "v {:.8e} {:.8e} {:.8e}", v[0], v[1], v[2]);
    }
    for t in &data.texcoords {
        let _ = writeln!(s, "vt {:.8e} {:.8e}", t[0], t[1]);
    }
    match &data.face_texcoords {
        Some(tc) => {
            for (f, t) in data.faces.iter().zip(tc) {
                let _ = writeln!(
                    s,
                    "f {}/{} {}/{} {}/{}",
                    f[0] + 1,
                    t[0] + 1,
                    f[1] + 1,
                    t[1] + 1,
                    f[2] + 1,
                    t[2] + 1
                );
            }
        }
        None => {
            for f in &data.faces {
                let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
    }
    s
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let data = ObjData {
        vertices: mesh.vertices.clone(),
        faces: mesh.faces.clone(),
        ..Default::default()
    };
    let path = path.as_ref();
    std::fs::write(path, write_obj(&data)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn minimal_triangle() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
            .unwrap()
            .into_mesh()
            .unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn quad_is_rejected_with_line_number() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(matches!(err, Error::NonTriangularFace { line: 5 }));
        assert!(err.to_string().contains("non-triangular face"));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse_obj("v 0 0 0\nv 1 zz 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn texcoord_and_negative_indices() {
        let d = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf -3/1 -2/2 -1/3\n").unwrap();
        assert_eq!(d.faces, vec![[0, 1, 2]]);
        assert_eq!(d.face_texcoords, Some(vec![[0, 1, 2]]));
    }

    #[test]
    fn save_load_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vertices: Vec<[f64; 3]> = (0..100)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let faces: Vec<[usize; 3]> = (0..98).map(|i| [i, i + 1, i + 2]).collect();
        let mesh = TriMesh::new(vertices, faces).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        save_obj(&mesh, &p).unwrap();
        let back = load_obj(&p).unwrap();
        assert_eq!(back.faces, mesh.faces);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-7);
            }
        }
    }
}
