use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uvhand::mesh::{Point3, TriMesh};
use uvhand::nn::train::random_pose;
use uvhand::toy::{mano_count_surrogate, ToyHand};
use uvhand::uv::{
    interior_vertices, make_fallback_template, read_uvp, rasterize_mesh_to_uv, write_uvp, Mask, NormalizationCube,
    TemplateRaster, UvCodec, UvForm, UvPositionMap, UvTemplate, NO_FACE,
};

const FORMS: [UvForm; 3] = [UvForm::Uv1, UvForm::Uv2, UvForm::Uv3];

fn posed(seed: u64) -> TriMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pose = random_pose(&mut rng, 0.9, 0.3);
    pose.translation = [rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), 0.5];
    ToyHand::default().posed(&pose)
}

fn cube() -> NormalizationCube {
    NormalizationCube::new([0.03, 0.07, 0.5], 0.2).unwrap()
}

fn dist(a: Point3, b: Point3) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

/// Barycentric weights of `p` in the uv triangle, from signed areas.
fn bary(t: &UvTemplate, f: usize, p: [f64; 2]) -> Option<[f64; 3]> {
    let [a, b, c] = t.faces[f].map(|i| t.uv[i]);
    let area = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let total = area(a, b, c);
    if total.abs() < 1e-14 {
        return None;
    }
    Some([area(p, b, c) / total, area(a, p, c) / total, area(a, b, p) / total])
}

#[test]
fn raster_matches_point_in_triangle_oracle() {
    let hand = ToyHand::default();
    for form in FORMS {
        let t = hand.template(form);
        let res = 96;
        let mesh = posed(form as u64);
        let map = rasterize_mesh_to_uv(&mesh, &t, res, &cube()).unwrap();
        let raster = TemplateRaster::build(&t, res, res).unwrap();
        let (q, _) = cube().normalize(&mesh.vertices).unwrap();
        let plane = res * res;
        let mut ambiguous = 0;
        for p in 0..plane {
            let uv = [((p % res) as f64 + 0.5) / res as f64, ((p / res) as f64 + 0.5) / res as f64];
            let hits: Vec<(usize, [f64; 3])> = (0..t.faces.len())
                .filter_map(|f| bary(&t, f, uv).map(|w| (f, w)))
                .filter(|(_, w)| w.iter().all(|&x| x >= -1e-12))
                .collect();
            let strict: Vec<_> = hits.iter().filter(|(_, w)| w.iter().all(|&x| x > 1e-9)).collect();
            let owner = raster.owner[p];
            match (strict.len(), hits.len()) {
                (_, 0) => assert_eq!(owner, NO_FACE, "pixel {p}"),
                (1, _) => {
                    let (f, w) = strict[0];
                    assert_eq!(owner as usize, *f, "pixel {p}");
                    for c in 0..3 {
                        let v: f64 = (0..3).map(|k| w[k] * q[t.vertex_of[t.faces[*f][k]]][c]).sum();
                        assert!((map.data[c * plane + p] - v).abs() < 1e-6);
                    }
                }
                _ => {
                    ambiguous += 1;
                    assert!(hits.iter().any(|(f, _)| *f == owner as usize), "pixel {p}");
                }
            }
        }
        assert!(ambiguous < plane / 50, "{ambiguous} edge pixels");
    }
}

#[test]
fn round_trip_bound_and_halving_for_every_form() {
    let hand = ToyHand::default();
    let mut per_form = Vec::new();
    for form in FORMS {
        let t = hand.template(form);
        let interior = interior_vertices(&t, 64, 64, 1.5);
        let codecs: Vec<UvCodec> = [64, 128, 256].iter().map(|&r| UvCodec::new(&t, r, r).unwrap()).collect();
        let mut worst = [0.0f64; 3];
        for seed in 0..4 {
            let mesh = posed(100 + seed);
            for (i, codec) in codecs.iter().enumerate() {
                let dec = codec.decode(&codec.encode(&mesh, &cube()).unwrap()).unwrap();
                let e = (0..mesh.vertex_count())
                    .filter(|&v| interior[v])
                    .map(|v| dist(mesh.vertices[v], dec.vertices[v]))
                    .fold(0.0, f64::max);
                worst[i] = worst[i].max(e);
            }
        }
        for (i, res) in [64.0, 128.0, 256.0].iter().enumerate() {
            assert!(worst[i] <= 2.0 * cube().diagonal() / res, "{form:?} {res}: {}", worst[i]);
        }
        assert!(worst[0] > worst[1] && worst[1] > worst[2], "{form:?} {worst:?}");
        per_form.push(worst[2]);
    }
    let (lo, hi) = per_form.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    assert!(hi <= 2.0 * lo, "forms differ more than 2x: {per_form:?}");
}

#[test]
fn encoding_is_equivariant_to_the_cube() {
    let hand = ToyHand::default();
    let t = hand.template(UvForm::Uv3);
    let mesh = posed(7);
    let (c1, c2) = (cube(), NormalizationCube::new([1.0, -2.0, 3.0], 0.35).unwrap());
    let moved = TriMesh::new(
        mesh.vertices.iter().map(|&p| c2.denormalize_point(c1.normalize_point(p).0)).collect(),
        mesh.faces.clone(),
    )
    .unwrap();
    let a = rasterize_mesh_to_uv(&mesh, &t, 64, &c1).unwrap();
    let b = rasterize_mesh_to_uv(&moved, &t, 64, &c2).unwrap();
    assert!(a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() < 1e-6));
}

#[test]
fn constant_map_decodes_to_cube_centre() {
    let codec = UvCodec::new(&ToyHand::default().template(UvForm::Uv1), 64, 64).unwrap();
    let mut map = UvPositionMap::zeros(64, 64, cube(), Some(codec.mask()));
    map.data.fill(0.5);
    for v in codec.decode(&map).unwrap().vertices {
        assert!(dist(v, cube().center()) < 1e-12);
    }
}

#[test]
fn uvp_file_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bits: Vec<bool> = (0..256 * 256).map(|_| rng.random_bool(0.6)).collect();
    // the header stores f32 bounds
    let c = NormalizationCube::from_bounds([-0.25, -0.125, 0.25], [0.25, 0.375, 0.75]).unwrap();
    let mut map = UvPositionMap::zeros(256, 256, c, Some(Mask::new(256, 256, bits)));
    for v in &mut map.data {
        *v = rng.random::<f32>() as f64;
    }
    map.apply_mask();
    let path = dir.path().join("r.uvp");
    write_uvp(&map, &path).unwrap();
    let back = read_uvp(&path).unwrap();
    assert_eq!(back.mask, map.mask);
    assert_eq!(back.cube, map.cube);
    assert!(back.data.iter().zip(&map.data).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn fallback_templates_rasterize_without_overlap() {
    let hand = ToyHand::default();
    let t = make_fallback_template(&hand.rest).unwrap();
    TemplateRaster::build(&t, 256, 256).unwrap();

    let m = mano_count_surrogate();
    let t = make_fallback_template(&m).unwrap();
    let codec = UvCodec::new(&t, 256, 256).unwrap();
    let c = NormalizationCube::new([0.0, 0.0, 0.1], 0.2).unwrap();
    let dec = codec.decode(&codec.encode(&m, &c).unwrap()).unwrap();
    assert_eq!(dec.vertex_count(), 778);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maps_are_zero_off_mask_and_bounded_on_it(seed in 0u64..10_000, form in 0usize..3) {
        let t = ToyHand::default().template(FORMS[form]);
        let map = rasterize_mesh_to_uv(&posed(seed), &t, 48, &cube()).unwrap();
        map.check_invariants().unwrap();
        let mask = map.mask.as_ref().unwrap();
        let plane = map.plane();
        for p in 0..plane {
            for c in 0..3 {
                let v = map.data[c * plane + p];
                if mask.bits[p] {
                    prop_assert!((0.0..=1.0).contains(&v));
                } else {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn every_masked_pixel_has_one_owner(form in 0usize..3, res in 8usize..80) {
        let t = ToyHand::default().template(FORMS[form]);
        let raster = TemplateRaster::build(&t, res, res).unwrap();
        let mask = raster.mask();
        for (p, &o) in raster.owner.iter().enumerate() {
            prop_assert_eq!(mask.bits[p], o != NO_FACE);
            if o != NO_FACE {
                prop_assert!((o as usize) < t.faces.len());
                let w = raster.bary[p];
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
