use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uvhand::mesh::{axis_angle, compute_edges, edge_unpool, load_obj, save_obj, JointRules, Point3, TriMesh};
use uvhand::toy::{ellipsoid, mano_count_surrogate, ToyHand};

fn random_mesh(n: usize, faces: usize, seed: u64) -> TriMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<Point3> = (0..n).map(|_| [0; 3].map(|_| rng.random_range(-0.2..0.2))).collect();
    let faces = (0..faces)
        .map(|_| loop {
            let f = [0; 3].map(|_| rng.random_range(0..n));
            if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
                break f;
            }
        })
        .collect();
    TriMesh::new(vertices, faces).unwrap()
}

#[test]
fn obj_round_trip_of_random_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = random_mesh(100, 150, 1);
    let path = dir.path().join("m.obj");
    save_obj(&mesh, &path).unwrap();
    let back = load_obj(&path).unwrap();
    assert_eq!(back.faces, mesh.faces);
    for (a, b) in mesh.vertices.iter().zip(&back.vertices) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-7);
        }
    }
}

#[test]
fn surrogate_edge_count_follows_euler() {
    let m = mano_count_surrogate();
    let e = compute_edges(&m).unwrap();
    assert_eq!((m.vertex_count(), m.face_count()), (778, 1538));
    assert_eq!(e.boundary_loop_count(), 1);
    // V - E + F = 1 for a disk
    assert_eq!(e.len(), 778 + 1538 - 1);
    let dense = edge_unpool(&m).unwrap();
    assert_eq!((dense.vertex_count(), dense.face_count()), (3093, 6152));
}

#[test]
fn unpool_recurrence_on_closed_surfaces() {
    // each level: V' = V + E, F' = 4F, E' = 2E + 3F
    let mut m = ellipsoid(0, [1.0, 1.0, 1.0]);
    let (mut v, mut f) = (m.vertex_count(), m.face_count());
    let mut e = compute_edges(&m).unwrap().len();
    for _ in 0..3 {
        m = edge_unpool(&m).unwrap();
        (v, e, f) = (v + e, 2 * e + 3 * f, 4 * f);
        assert_eq!((m.vertex_count(), m.face_count()), (v, f));
        assert_eq!(compute_edges(&m).unwrap().len(), e);
    }
}

#[test]
fn joint_regression_matches_direct_summation() {
    let hand = ToyHand::default();
    let rules = hand.joint_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let verts: Vec<Point3> = (0..rules.n_verts).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect();
    let joints = rules.regress(&verts).unwrap();
    assert_eq!(joints.len(), 21);
    for (j, rule) in rules.rules.iter().enumerate() {
        let mut s = [0.0; 3];
        for &(v, w) in rule {
            for k in 0..3 {
                s[k] += w * verts[v][k];
            }
        }
        for k in 0..3 {
            assert!((s[k] - joints[j][k]).abs() < 1e-9);
        }
    }
    for (t, &v) in rules.tips.iter().enumerate() {
        assert_eq!(joints[16 + t], verts[v]);
    }
}

#[test]
fn joint_rules_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rules = ToyHand::default().joint_rules();
    let path = dir.path().join("j.txt");
    rules.save(&path).unwrap();
    let back = JointRules::load(&path).unwrap();
    assert_eq!(back.tips, rules.tips);
    assert_eq!(back.rules.len(), rules.rules.len());
    for (a, b) in back.rules.iter().zip(&rules.rules) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unpool_preserves_euler_and_boundary(seed in 0u64..1000, levels in 0usize..2) {
        let hand = ToyHand::new(0.006 + (seed % 5) as f64 * 0.001);
        let mut m = hand.rest;
        for _ in 0..levels {
            m = edge_unpool(&m).unwrap();
        }
        let e = compute_edges(&m).unwrap();
        let d = edge_unpool(&m).unwrap();
        let de = compute_edges(&d).unwrap();
        prop_assert_eq!(e.euler_characteristic(&m), de.euler_characteristic(&d));
        prop_assert_eq!(e.boundary_loop_count(), de.boundary_loop_count());
    }

    #[test]
    fn regression_is_rigidly_equivariant(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in -3.0f64..3.0,
        t in prop::array::uniform3(-0.5f64..0.5),
        seed in 0u64..1000,
    ) {
        prop_assume!(axis.iter().map(|a| a * a).sum::<f64>() > 1e-3);
        let hand = ToyHand::default();
        let rules = hand.joint_rules();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = TriMesh::new(
            hand.rest.vertices.iter().map(|p| p.map(|c| c + rng.random_range(-0.01..0.01))).collect(),
            hand.rest.faces.clone(),
        ).unwrap();
        let r = axis_angle(axis, angle);
        let moved = rules.regress(&mesh.transformed(&r, t).vertices).unwrap();
        let j = rules.regress(&mesh.vertices).unwrap();
        for (a, b) in moved.iter().zip(&j) {
            let rb = [0, 1, 2].map(|i| (0..3).map(|k| r[i][k] * b[k]).sum::<f64>() + t[i]);
            for k in 0..3 {
                prop_assert!((a[k] - rb[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn edges_ignore_face_order(seed in 0u64..1000) {
        let mesh = ToyHand::default().rest;
        let mut faces = mesh.faces.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..faces.len()).rev() {
            faces.swap(i, rng.random_range(0..=i));
        }
        let shuffled = TriMesh::new(mesh.vertices.clone(), faces).unwrap();
        prop_assert_eq!(compute_edges(&mesh).unwrap().edges, compute_edges(&shuffled).unwrap().edges);
    }
}
