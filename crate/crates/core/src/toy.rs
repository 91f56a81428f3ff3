//! Procedural hand-like test assets.
//!
//! The toy hand is an open, disk-topology surface: a palm with four fingers
//! and a thumb, triangulated on a regular lattice and bulged toward the
//! camera (`-z`). Fingers can be curled for synthetic pose variation. The
//! rest-pose surface is also available as an analytic function so that a
//! refined ("scanned") version of any unpooled toy mesh can be produced.

use std::collections::HashMap;

use crate::mesh::{axis_angle, mat_vec, HandTopology, JointRules, Point3, TriMesh, RULE_JOINTS};
use crate::uv::{make_fallback_template, UvForm, UvTemplate};

const PALM_COLS: i32 = 11;
const PALM_ROWS: i32 = 12;
const FINGER_COL: [i32; 4] = [0, 3, 6, 9];
const FINGER_LEN: [i32; 4] = [7, 8, 7, 5];
const THUMB_LEN: i32 = 5;
const THUMB_ROW: i32 = 2;
const PALM_THICKNESS: f64 = 0.010;

/// Which part of the hand a rest-pose point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Palm,
    Finger(usize),
    Thumb,
}

/// Per-finger joint angles (radians) for MCP, PIP and DIP; index 4 is the thumb.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HandPose {
    pub curls: [[f64; 3]; 5],
    /// Extra rigid rotation applied about the wrist.
    pub rotation: Option<[[f64; 3]; 3]>,
    pub translation: Point3,
}

/// Lattice-built toy hand. `cell` is the lattice spacing in meters.
#[derive(Debug, Clone)]
pub struct ToyHand {
    pub cell: f64,
    pub rest: TriMesh,
    lattice: Vec<(i32, i32)>,
}

impl Default for ToyHand {
    fn default() -> Self {
        ToyHand::new(0.008)
    }
}

impl ToyHand {
    pub fn new(cell: f64) -> Self {
        let mut cells = Vec::new();
        for j in 0..PALM_ROWS {
            for i in 0..PALM_COLS {
                cells.push((i, j));
            }
        }
        for (f, &c0) in FINGER_COL.iter().enumerate() {
            for j in PALM_ROWS..PALM_ROWS + FINGER_LEN[f] {
                cells.push((c0, j));
                cells.push((c0 + 1, j));
            }
        }
        for i in -THUMB_LEN..0 {
            cells.push((i, THUMB_ROW));
            cells.push((i, THUMB_ROW + 1));
        }
        cells.sort_by_key(|&(i, j)| (j, i));

        let mut index: HashMap<(i32, i32), usize> = HashMap::new();
        let mut lattice = Vec::new();
        let mut id = |p: (i32, i32), lattice: &mut Vec<(i32, i32)>| {
            *index.entry(p).or_insert_with(|| {
                lattice.push(p);
                lattice.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(cells.len() * 2);
        for &(i, j) in &cells {
            let a = id((i, j), &mut lattice);
            let b = id((i + 1, j), &mut lattice);
            let c = id((i + 1, j + 1), &mut lattice);
            let d = id((i, j + 1), &mut lattice);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
        let vertices = lattice
            .iter()
            .map(|&(i, j)| {
                let (x, y) = (i as f64 * cell, j as f64 * cell);
                [x, y, -thickness(cell, x, y)]
            })
            .collect();
        ToyHand {
            cell,
            rest: TriMesh { vertices, faces },
            lattice,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.rest.vertex_count()
    }

    /// Integer lattice coordinates of each rest vertex.
    pub fn lattice(&self) -> &[(i32, i32)] {
        &self.lattice
    }

    pub fn part_of(&self, x: f64, y: f64) -> Part {
        let h = self.cell;
        let eps = 1e-9;
        if x < -eps {
            return Part::Thumb;
        }
        if y > PALM_ROWS as f64 * h + eps {
            let f = FINGER_COL
                .iter()
                .position(|&c| x >= c as f64 * h - eps && x <= (c + 2) as f64 * h + eps)
                .unwrap_or(0);
            return Part::Finger(f);
        }
        Part::Palm
    }

    /// Analytic rest-pose surface height `z(x, y)`.
    pub fn rest_height(&self, x: f64, y: f64) -> f64 {
        -thickness(self.cell, x, y)
    }

    /// Poses arbitrary rest-frame points (e.g. vertices of an unpooled rest
    /// mesh) with the given curls and rigid motion.
    pub fn pose_points(&self, rest: &[Point3], pose: &HandPose) -> Vec<Point3> {
        let h = self.cell;
        rest.iter()
            .map(|&p| {
                let mut q = p;
                match self.part_of(p[0], p[1]) {
                    Part::Finger(f) => {
                        let base = PALM_ROWS as f64 * h;
                        let len = FINGER_LEN[f] as f64 * h;
                        let pivots = [base, base + 0.45 * len, base + 0.75 * len];
                        for k in (0..3).rev() {
                            if p[1] > pivots[k] {
                                q = rotate_about(q, [1.0, 0.0, 0.0], [0.0, pivots[k], 0.0], -pose.curls[f][k]);
                            }
                        }
                    }
                    Part::Thumb => {
                        let len = THUMB_LEN as f64 * h;
                        let pivots = [0.0, -0.4 * len, -0.7 * len];
                        for k in (0..3).rev() {
                            if p[0] < pivots[k] {
                                q = rotate_about(q, [0.0, 1.0, 0.0], [pivots[k], 0.0, 0.0], -pose.curls[4][k]);
                            }
                        }
                    }
                    Part::Palm => {}
                }
                let wrist = self.wrist_rest();
                if let Some(r) = &pose.rotation {
                    let d = crate::mesh::sub(q, wrist);
                    q = crate::mesh::add(mat_vec(r, d), wrist);
                }
                crate::mesh::add(q, pose.translation)
            })
            .collect()
    }

    pub fn posed(&self, pose: &HandPose) -> TriMesh {
        TriMesh {
            vertices: self.pose_points(&self.rest.vertices, pose),
            faces: self.rest.faces.clone(),
        }
    }

    /// Rest-pose wrist joint (centre of the bottom palm row).
    pub fn wrist_rest(&self) -> Point3 {
        let h = self.cell;
        let x = 0.5 * PALM_COLS as f64 * h;
        [x, 0.0, -thickness(h, x, 0.0) * 0.5]
    }

    /// Replaces the heights of `dense_rest` (typically an unpooled rest mesh)
    /// by the analytic surface, optionally adding a displacement field.
    pub fn refine_rest(&self, dense_rest: &TriMesh, bump: impl Fn(f64, f64) -> f64) -> TriMesh {
        let vertices = dense_rest
            .vertices
            .iter()
            .map(|p| [p[0], p[1], self.rest_height(p[0], p[1]) - bump(p[0], p[1])])
            .collect();
        TriMesh {
            vertices,
            faces: dense_rest.faces.clone(),
        }
    }

    /// Joint rules: wrist, then MCP/PIP/DIP for thumb and four fingers.
    pub fn joint_rules(&self) -> JointRules {
        let find = |i: i32, j: i32| self.lattice.iter().position(|&l| l == (i, j)).expect("lattice vertex");
        let mean_of = |pts: Vec<(i32, i32)>| {
            let w = 1.0 / pts.len() as f64;
            pts.into_iter().map(|(i, j)| (find(i, j), w)).collect::<Vec<_>>()
        };
        let mut rules = Vec::with_capacity(RULE_JOINTS);
        rules.push(mean_of((0..=PALM_COLS).map(|i| (i, 0)).collect()));
        // thumb: columns across rows THUMB_ROW..=THUMB_ROW+2
        for col in [0, -2, -4] {
            rules.push(mean_of((THUMB_ROW..=THUMB_ROW + 2).map(|j| (col, j)).collect()));
        }
        for f in 0..4 {
            let c0 = FINGER_COL[f];
            let len = FINGER_LEN[f];
            for row in [PALM_ROWS, PALM_ROWS + (len * 45 + 50) / 100, PALM_ROWS + (len * 75 + 50) / 100] {
                rules.push(mean_of((c0..=c0 + 2).map(|i| (i, row)).collect()));
            }
        }
        let mut tips = [0; 5];
        tips[0] = find(-THUMB_LEN, THUMB_ROW + 1);
        for f in 0..4 {
            tips[f + 1] = find(FINGER_COL[f] + 1, PALM_ROWS + FINGER_LEN[f]);
        }
        JointRules::new(self.vertex_count(), rules, tips).expect("toy rules are valid")
    }

    pub fn topology(&self) -> HandTopology {
        HandTopology::new(self.rest.face_count(), self.joint_rules())
    }

    /// Built-in UV unfoldings of the rest mesh.
    ///
    /// `Uv1` projects the flat lattice into one chart. `Uv2` cuts the palm,
    /// each finger and the thumb into separate charts packed side by side.
    /// `Uv3` is the boundary-fixed barycentric unwrap.
    pub fn template(&self, form: UvForm) -> UvTemplate {
        match form {
            UvForm::Uv1 => self.lattice_template(form, |_| (0, (0, 0), (0, 0))),
            UvForm::Uv2 => self.lattice_template(form, |cell| split_chart(cell)),
            _ => {
                let mut t = make_fallback_template(&self.rest).expect("toy hand is a disk");
                t.form = form;
                t
            }
        }
    }

    /// `chart(cell)` gives a chart id, the chart's lattice origin and where
    /// that origin is placed in the packed layout (lattice units).
    fn lattice_template(&self, form: UvForm, chart: impl Fn((i32, i32)) -> (usize, (i32, i32), (i32, i32))) -> UvTemplate {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut layout: Vec<(i32, i32)> = Vec::new();
        let mut vertex_of = Vec::new();
        let mut faces = Vec::with_capacity(self.rest.face_count());
        for f in &self.rest.faces {
            let cell = (
                f.iter().map(|&v| self.lattice[v].0).min().unwrap(),
                f.iter().map(|&v| self.lattice[v].1).min().unwrap(),
            );
            let (id, origin, place) = chart(cell);
            faces.push(f.map(|v| {
                *index.entry((id, v)).or_insert_with(|| {
                    let (i, j) = self.lattice[v];
                    layout.push((i - origin.0 + place.0, j - origin.1 + place.1));
                    vertex_of.push(v);
                    layout.len() - 1
                })
            }));
        }
        let (lo_i, hi_i) = (layout.iter().map(|l| l.0).min().unwrap(), layout.iter().map(|l| l.0).max().unwrap());
        let (lo_j, hi_j) = (layout.iter().map(|l| l.1).min().unwrap(), layout.iter().map(|l| l.1).max().unwrap());
        let span = (hi_i - lo_i).max(hi_j - lo_j) as f64;
        let margin = 0.02;
        let s = (1.0 - 2.0 * margin) / span;
        let pad_u = 0.5 * (1.0 - 2.0 * margin - (hi_i - lo_i) as f64 * s);
        let pad_v = 0.5 * (1.0 - 2.0 * margin - (hi_j - lo_j) as f64 * s);
        // v grows downward in the image, so the fingertips point up
        let uv = layout
            .iter()
            .map(|&(i, j)| {
                [
                    margin + pad_u + (i - lo_i) as f64 * s,
                    1.0 - margin - pad_v - (j - lo_j) as f64 * s,
                ]
            })
            .collect();
        UvTemplate::new(form, uv, faces, vertex_of, self.vertex_count()).expect("toy layout does not overlap")
    }
}

/// Palm keeps its lattice position; fingers stand in a row to its right
/// and the thumb lies above them, one cell apart.
fn split_chart((i, j): (i32, i32)) -> (usize, (i32, i32), (i32, i32)) {
    if j >= PALM_ROWS {
        let f = FINGER_COL.iter().rposition(|&c| i >= c).unwrap_or(0);
        let x = PALM_COLS + 1 + 3 * f as i32;
        (1 + f, (FINGER_COL[f], PALM_ROWS), (x, 0))
    } else if i < 0 {
        (5, (-THUMB_LEN, THUMB_ROW), (PALM_COLS + 1, FINGER_LEN.iter().max().unwrap() + 1))
    } else {
        (0, (0, 0), (0, 0))
    }
}

fn rotate_about(p: Point3, axis: Point3, pivot: Point3, angle: f64) -> Point3 {
    let r = axis_angle(axis, angle);
    crate::mesh::add(mat_vec(&r, crate::mesh::sub(p, pivot)), pivot)
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn half_disc(d: f64, r: f64) -> f64 {
    r * (1.0 - (d / r).powi(2)).max(0.0).sqrt()
}

fn palm_thickness(h: f64, x: f64, y: f64) -> f64 {
    let ax = 0.5 * PALM_COLS as f64 * h + 0.5 * h;
    let ay = 0.5 * PALM_ROWS as f64 * h + 2.0 * h;
    let dx = (x - 0.5 * PALM_COLS as f64 * h) / ax;
    let dy = (y - 0.5 * PALM_ROWS as f64 * h) / ay;
    PALM_THICKNESS * ((1.0 - dx * dx).max(0.0) * (1.0 - dy * dy).max(0.0)).sqrt()
}

fn thickness(h: f64, x: f64, y: f64) -> f64 {
    let top = PALM_ROWS as f64 * h;
    let eps = 1e-9;
    let r = h;
    if x < -eps {
        let yc = (THUMB_ROW + 1) as f64 * h;
        let s = -x;
        let len = THUMB_LEN as f64 * h;
        let mut t = half_disc(y - yc, r);
        if s > len - r {
            t *= (1.0 - ((s - (len - r)) / r).powi(2)).max(0.0).sqrt();
        }
        let w = smoothstep(s / (2.0 * h));
        return (1.0 - w) * palm_thickness(h, 0.0, y) + w * t;
    }
    if y > top + eps {
        let f = FINGER_COL
            .iter()
            .position(|&c| x >= c as f64 * h - eps && x <= (c + 2) as f64 * h + eps)
            .unwrap_or(0);
        let xc = (FINGER_COL[f] + 1) as f64 * h;
        let s = y - top;
        let len = FINGER_LEN[f] as f64 * h;
        let mut t = half_disc(x - xc, r);
        if s > len - r {
            t *= (1.0 - ((s - (len - r)) / r).powi(2)).max(0.0).sqrt();
        }
        let w = smoothstep(s / (2.0 * h));
        return (1.0 - w) * palm_thickness(h, x, top) + w * t;
    }
    palm_thickness(h, x, y)
}

/// A disk-topology surface with exactly the vertex, face and boundary counts
/// of the MANO hand (778 vertices, 1538 faces, one 16-vertex boundary loop):
/// a closed-ended tube of 48 rings of 16, a ring of 9 and an apex.
pub fn mano_count_surrogate() -> TriMesh {
    let mut rings: Vec<Vec<usize>> = Vec::new();
    let mut vertices = Vec::new();
    let ring_sizes: Vec<usize> = std::iter::repeat_n(16, 48).chain([9]).collect();
    for (r, &n) in ring_sizes.iter().enumerate() {
        let z = r as f64 * 0.004;
        let radius = if n == 16 { 0.02 } else { 0.012 };
        let phase = if r % 2 == 0 { 0.0 } else { 0.5 };
        let mut ring = Vec::with_capacity(n);
        for k in 0..n {
            let a = std::f64::consts::TAU * (k as f64 + phase) / n as f64;
            ring.push(vertices.len());
            vertices.push([radius * a.cos(), radius * a.sin(), z]);
        }
        rings.push(ring);
    }
    let apex = vertices.len();
    vertices.push([0.0, 0.0, ring_sizes.len() as f64 * 0.004]);

    let mut faces = Vec::new();
    for w in rings.windows(2) {
        stitch_rings(&vertices, &w[0], &w[1], &mut faces);
    }
    let last = rings.last().unwrap();
    for k in 0..last.len() {
        faces.push([last[k], last[(k + 1) % last.len()], apex]);
    }
    TriMesh { vertices, faces }
}

/// Triangulates the band between two closed rings by advancing along
/// whichever ring has the smaller next angle.
fn stitch_rings(vertices: &[Point3], a: &[usize], b: &[usize], faces: &mut Vec<[usize; 3]>) {
    let ang = |v: usize| {
        let p = vertices[v];
        let t = p[1].atan2(p[0]);
        if t < 0.0 {
            t + std::f64::consts::TAU
        } else {
            t
        }
    };
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let next_a = if i < na { ang(a[(i + 1) % na]) + if i + 1 >= na { std::f64::consts::TAU } else { 0.0 } } else { f64::INFINITY };
        let next_b = if j < nb { ang(b[(j + 1) % nb]) + if j + 1 >= nb { std::f64::consts::TAU } else { 0.0 } } else { f64::INFINITY };
        if next_a <= next_b {
            faces.push([a[i % na], a[(i + 1) % na], b[j % nb]]);
            i += 1;
        } else {
            faces.push([a[i % na], b[(j + 1) % nb], b[j % nb]]);
            j += 1;
        }
    }
}

/// Closed genus-0 test surface: an octahedron refined by edge unpooling and
/// projected onto an ellipsoid with the given semi-axes.
pub fn ellipsoid(levels: usize, axes: Point3) -> TriMesh {
    let mut m = TriMesh {
        vertices: vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
        faces: vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ],
    };
    for _ in 0..levels {
        m = crate::mesh::edge_unpool(&m).expect("octahedron is manifold");
    }
    for v in &mut m.vertices {
        let n = crate::mesh::norm(*v);
        *v = [v[0] / n * axes[0], v[1] / n * axes[1], v[2] / n * axes[2]];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::compute_edges;

    #[test]
    fn toy_hand_is_a_disk() {
        let hand = ToyHand::default();
        let e = compute_edges(&hand.rest).unwrap();
        assert_eq!(e.euler_characteristic(&hand.rest), 1);
        assert_eq!(e.boundary_loop_count(), 1);
        assert!(hand.rest.validate().zero_area_faces.is_empty());
    }

    #[test]
    fn toy_rules_are_valid() {
        let hand = ToyHand::default();
        let topo = hand.topology();
        let j = topo.regress_joints(&hand.rest).unwrap();
        assert_eq!(j.len(), 21);
    }

    #[test]
    fn surrogate_has_mano_counts() {
        let m = mano_count_surrogate();
        assert_eq!((m.vertex_count(), m.face_count()), (778, 1538));
        let e = compute_edges(&m).unwrap();
        assert_eq!(e.len(), 2315);
        assert_eq!(e.boundary_loop_count(), 1);
        assert_eq!(e.boundary_edges().count(), 16);
    }

    #[test]
    fn curl_moves_only_fingers() {
        let hand = ToyHand::default();
        let mut pose = HandPose::default();
        pose.curls[1] = [0.5, 0.5, 0.5];
        let posed = hand.posed(&pose);
        for (k, (a, b)) in hand.rest.vertices.iter().zip(&posed.vertices).enumerate() {
            let moved = a != b;
            let is_finger1 = matches!(hand.part_of(a[0], a[1]), Part::Finger(1));
            if moved {
                assert!(is_finger1, "vertex {k} moved");
            }
        }
    }

    #[test]
    fn ellipsoid_is_closed() {
        let m = ellipsoid(2, [1.0, 2.0, 3.0]);
        let e = compute_edges(&m).unwrap();
        assert_eq!(e.euler_characteristic(&m), 2);
        assert_eq!(e.boundary_loop_count(), 0);
    }
}
