use std::collections::HashMap;

use super::TriMesh;
use crate::error::{Error, Result};

/// Unique undirected edges of a mesh in ascending `(min, max)` order,
/// with the faces adjacent to each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet {
    pub edges: Vec<[usize; 2]>,
    pub edge_faces: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize), usize>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Index of the edge joining `a` and `b`, in either order.
    pub fn index_of(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edge_faces[e].len() == 1)
    }

    /// Number of closed boundary loops.
    pub fn boundary_loop_count(&self) -> usize {
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for e in self.boundary_edges() {
            let [a, b] = self.edges[e];
            next.entry(a).or_default().push(b);
            next.entry(b).or_default().push(a);
        }
        // connected components of the boundary graph
        let mut seen = std::collections::HashSet::new();
        let mut loops = 0;
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        for s in starts {
            if !seen.insert(s) {
                continue;
            }
            loops += 1;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &next[&v] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        loops
    }

    /// `V - E + F` for the mesh this set was built from.
    pub fn euler_characteristic(&self, mesh: &TriMesh) -> i64 {
        mesh.vertex_count() as i64 - self.edges.len() as i64 + mesh.face_count() as i64
    }
}

/// Builds the edge set. Fails if any edge is shared by more than two faces.
pub fn compute_edges(mesh: &TriMesh) -> Result<EdgeSet> {
    let mut pairs: Vec<((usize, usize), usize)> = Vec::with_capacity(mesh.faces.len() * 3);
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            pairs.push(((a.min(b), a.max(b)), fi));
        }
    }
    pairs.sort_unstable();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut edge_faces: Vec<Vec<usize>> = Vec::new();
    for ((a, b), fi) in pairs {
        if edges.last() == Some(&[a, b]) {
            let adj = edge_faces.last_mut().unwrap();
            adj.push(fi);
            if adj.len() > 2 {
                return Err(Error::NonManifold(a, b));
            }
        } else {
            edges.push([a, b]);
            edge_faces.push(vec![fi]);
        }
    }
    let lookup = edges
        .iter()
        .enumerate()
        .map(|(i, e)| ((e[0], e[1]), i))
        .collect();
    Ok(EdgeSet {
        edges,
        edge_faces,
        lookup,
    })
}

/// Inserts a vertex at every edge midpoint and splits each face into four.
/// New vertex `V + e` sits on edge `e` of [`compute_edges`].
pub fn edge_unpool(mesh: &TriMesh) -> Result<TriMesh> {
    edge_unpool_with_edges(mesh).map(|(m, _)| m)
}

pub fn edge_unpool_with_edges(mesh: &TriMesh) -> Result<(TriMesh, EdgeSet)> {
    let edges = compute_edges(mesh)?;
    let nv = mesh.vertex_count();
    let mut vertices = Vec::with_capacity(nv + edges.len());
    vertices.extend_from_slice(&mesh.vertices);
    for &[a, b] in &edges.edges {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        vertices.push([
            0.5 * (p[0] + q[0]),
            0.5 * (p[1] + q[1]),
            0.5 * (p[2] + q[2]),
        ]);
    }
    let mid = |a: usize, b: usize| nv + edges.index_of(a, b).expect("edge present");
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    for &[a, b, c] in &mesh.faces {
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    Ok((TriMesh { vertices, faces }, edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> TriMesh {
        TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    pub(crate) fn tetrahedron() -> TriMesh {
        TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn triangle_edges_and_unpool() {
        let m = triangle();
        let e = compute_edges(&m).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.boundary_loop_count(), 1);
        let u = edge_unpool(&m).unwrap();
        assert_eq!((u.vertex_count(), u.face_count()), (6, 4));
        assert_eq!(u.vertices[3], [0.5, 0.0, 0.0]);
    }

    #[test]
    fn tetrahedron_euler_and_double_unpool() {
        let t = tetrahedron();
        let e = compute_edges(&t).unwrap();
        assert_eq!(e.len(), 6);
        assert_eq!(e.euler_characteristic(&t), 2);
        assert_eq!(e.boundary_loop_count(), 0);
        let u1 = edge_unpool(&t).unwrap();
        assert_eq!((u1.vertex_count(), u1.face_count()), (10, 16));
        let u2 = edge_unpool(&u1).unwrap();
        assert_eq!((u2.vertex_count(), u2.face_count()), (34, 64));
        let e2 = compute_edges(&u2).unwrap();
        assert_eq!(e2.euler_characteristic(&u2), 2);
    }

    #[test]
    fn non_manifold_edge_rejected() {
        let m = TriMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap();
        assert!(matches!(compute_edges(&m), Err(Error::NonManifold(0, 1))));
        assert!(edge_unpool(&m).is_err());
    }

    #[test]
    fn unpool_keeps_original_vertices_and_orientation() {
        let t = tetrahedron();
        let u = edge_unpool(&t).unwrap();
        assert_eq!(&u.vertices[..4], &t.vertices[..]);
        // every directed edge appears at most once in an oriented manifold
        let mut seen = std::collections::HashSet::new();
        for f in &u.faces {
            for k in 0..3 {
                assert!(seen.insert((f[k], f[(k + 1) % 3])));
            }
        }
    }
}
