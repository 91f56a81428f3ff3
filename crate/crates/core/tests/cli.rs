use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uvhand::cli::{dispatch, parse_config};
use uvhand::mesh::{axis_angle, edge_unpool, load_obj, save_obj, TriMesh};
use uvhand::nn::train::random_pose;
use uvhand::srdata::{read_manifest, save_ply, PointCloud};
use uvhand::toy::ToyHand;
use uvhand::uv::{read_uvp, UvCodec, UvForm};

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("uvhand").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn posed_hand(seed: u64) -> TriMesh {
    let hand = ToyHand::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pose = random_pose(&mut rng, 0.6, 0.2);
    pose.translation = [0.01, -0.02, 0.5];
    hand.posed(&pose)
}

fn max_dist(a: &TriMesh, b: &TriMesh) -> f64 {
    a.vertices
        .iter()
        .zip(&b.vertices)
        .map(|(x, y)| (0..3).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[test]
fn encode_then_decode_recovers_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = posed_hand(1);
    let obj = dir.path().join("hand.obj");
    save_obj(&mesh, &obj).unwrap();
    let uvp = dir.path().join("hand.uvp");
    let back = dir.path().join("back.obj");
    let png = dir.path().join("hand.png");
    assert_eq!(
        run(&["encode", "--mesh", p(&obj), "--template", "toy:uv3", "--res", "128", "--out", p(&uvp), "--png", p(&png)]),
        0
    );
    assert!(png.exists());
    assert_eq!(read_uvp(&uvp).unwrap().width, 128);
    assert_eq!(run(&["decode", "--uvp", p(&uvp), "--template", "toy:uv3", "--out", p(&back)]), 0);
    let decoded = load_obj(&back).unwrap();
    assert_eq!(decoded.vertex_count(), mesh.vertex_count());
    let codec = UvCodec::new(&ToyHand::default().template(UvForm::Uv3), 128, 128).unwrap();
    let cube = read_uvp(&uvp).unwrap().cube;
    let library = codec.decode(&codec.encode(&mesh, &cube).unwrap()).unwrap();
    let d = max_dist(&decoded, &library);
    assert!(d < 1e-6, "{d}");
}

#[test]
fn unknown_template_and_missing_file_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("hand.obj");
    save_obj(&posed_hand(2), &obj).unwrap();
    let out = dir.path().join("x.uvp");
    assert_eq!(run(&["encode", "--mesh", p(&obj), "--template", "toy:uv9", "--out", p(&out)]), 1);
    assert_eq!(run(&["encode", "--mesh", "/nonexistent.obj", "--template", "toy:uv1", "--out", p(&out)]), 2);
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["encode", "--no-such-flag"]), 1);
}

#[test]
fn unpool_writes_subdivided_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = ToyHand::default().rest;
    let (obj, out) = (dir.path().join("in.obj"), dir.path().join("out.obj"));
    save_obj(&mesh, &obj).unwrap();
    assert_eq!(run(&["unpool", "--mesh", p(&obj), "--out", p(&out)]), 0);
    let dense = load_obj(&out).unwrap();
    let expected = edge_unpool(&mesh).unwrap();
    assert_eq!(dense.faces, expected.faces);
    assert!(max_dist(&dense, &expected) < 1e-9);
    assert_eq!(dense.face_count(), 4 * mesh.face_count());
}

#[test]
fn config_file_fills_unset_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("hand.obj");
    save_obj(&posed_hand(3), &obj).unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# resolution for the test\nres = 32\ntemplate = toy:uv2\n").unwrap();
    let out = dir.path().join("a.uvp");
    assert_eq!(run(&["--config", p(&cfg), "encode", "--mesh", p(&obj), "--out", p(&out)]), 0);
    assert_eq!(read_uvp(&out).unwrap().width, 32);
    assert_eq!(
        run(&["--config", p(&cfg), "encode", "--mesh", p(&obj), "--out", p(&out), "--res", "48"]),
        0
    );
    assert_eq!(read_uvp(&out).unwrap().width, 48);

    std::fs::write(&cfg, "resolution = 32\n").unwrap();
    assert_eq!(
        run(&["--config", p(&cfg), "encode", "--mesh", p(&obj), "--template", "toy:uv1", "--out", p(&out)]),
        1
    );
}

#[test]
fn config_parser_normalizes_keys() {
    let kv = parse_config("max_iter = 7 # trailing\n\n  scale=true").unwrap();
    assert_eq!(kv["max-iter"], "7");
    assert_eq!(kv["scale"], "true");
    assert!(parse_config("no equals sign").is_err());
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    assert_eq!(run(&["--threads", "0", "gradcheck"]), 1);
}

#[test]
fn register_recovers_a_rigid_offset() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = posed_hand(4);
    let r = axis_angle([0.3, 1.0, 0.2], 10f64.to_radians());
    let target = mesh.transformed(&r, [0.02, -0.01, 0.03]);
    let (obj, ply, out, report) = (
        dir.path().join("src.obj"),
        dir.path().join("scan.ply"),
        dir.path().join("fit.obj"),
        dir.path().join("icp.json"),
    );
    save_obj(&mesh, &obj).unwrap();
    save_ply(&ply, &PointCloud::from_mesh(&target), true).unwrap();
    assert_eq!(
        run(&["register", "--mesh", p(&obj), "--scan", p(&ply), "--out", p(&out), "--report", p(&report)]),
        0
    );
    assert!(max_dist(&load_obj(&out).unwrap(), &target) < 1e-6);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["iterations"].as_u64().unwrap() <= 50);
}

#[test]
fn smooth_and_sr_pair_write_maps_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let hand = ToyHand::default();
    let coarse = posed_hand(5);
    let mut dense = edge_unpool(&coarse).unwrap();
    for v in &mut dense.vertices {
        v[2] += 0.0005 * (v[0] * 400.0).sin();
    }
    let (c, d) = (dir.path().join("coarse.obj"), dir.path().join("dense.obj"));
    save_obj(&coarse, &c).unwrap();
    save_obj(&dense, &d).unwrap();
    let out = dir.path().join("pairs");
    let args = ["sr-pair", "--coarse", p(&c), "--dense", p(&d), "--template", "toy:uv3"];
    assert_eq!(
        run(&[&args[..], &["--res", "64", "--smooth", "1.5", "--out-dir", p(&out), "--name", "s0"]].concat()),
        0
    );
    assert_eq!(run(&[&args[..], &["--res", "64", "--out-dir", p(&out), "--name", "s1"]].concat()), 0);
    let manifest = read_manifest(out.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.len(), 3);
    let high = read_uvp(out.join("s0_high.uvp")).unwrap();
    assert_eq!((high.width, high.height), (64, 64));

    let smoothed = dir.path().join("smooth.uvp");
    assert_eq!(
        run(&["smooth", "--uvp", p(&out.join("s0_low.uvp")), "--sigma", "1.5", "--out", p(&smoothed)]),
        0
    );
    let (a, b) = (read_uvp(&smoothed).unwrap(), read_uvp(out.join("s0_low_smooth.uvp")).unwrap());
    assert!(a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() < 1e-6));

    // the dense mesh must be the unpooled coarse topology
    save_obj(&hand.rest, &d).unwrap();
    assert_eq!(run(&[&args[..], &["--res", "64", "--out-dir", p(&out)]].concat()), 2);
}

#[test]
fn eval_reports_zero_error_for_identical_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = posed_hand(6);
    let obj = dir.path().join("m.obj");
    save_obj(&mesh, &obj).unwrap();
    let rules = dir.path().join("joints.txt");
    std::fs::write(&rules, ToyHand::default().joint_rules().to_text()).unwrap();
    let (report, csv) = (dir.path().join("r.json"), dir.path().join("c.csv"));
    assert_eq!(
        run(&[
            "eval", "--pred", p(&obj), "--gt", p(&obj), "--joint-rules", p(&rules), "--depth-res", "64",
            "--report", p(&report), "--csv", p(&csv),
        ]),
        0
    );
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["pose_error_cm", "mesh_error_cm", "auc_pck", "auc_pcv", "f5", "f15", "depth_rmse_mm", "psnr_db"] {
        assert!(json[key].is_number(), "missing {key}");
    }
    assert_eq!(json["pose_error_cm"].as_f64().unwrap(), 0.0);
    assert_eq!(json["f5"].as_f64().unwrap(), 1.0);
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 10);

    assert_eq!(run(&["eval", "--pred", p(&obj), "--pred", p(&obj), "--gt", p(&obj)]), 1);
}

#[test]
fn render_depth_writes_a_png() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("m.obj");
    save_obj(&posed_hand(7), &obj).unwrap();
    let png = dir.path().join("d.png");
    assert_eq!(run(&["render-depth", "--mesh", p(&obj), "--res", "64", "--out", p(&png)]), 0);
    assert!(std::fs::metadata(&png).unwrap().len() > 0);
}

#[test]
fn gradcheck_only_runs_in_double_precision() {
    assert_eq!(run(&["gradcheck", "--bits", "32"]), 1);
}

#[test]
fn train_toy_srnet_then_infer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sr");
    assert_eq!(
        run(&[
            "--seed", "3", "train-toy", "srnet", "--steps", "3", "--samples", "4", "--batch", "2", "--res", "32", "--out",
            p(&out),
        ]),
        0
    );
    assert!(out.join("loss.jsonl").exists());
    assert!(out.join("summary.json").exists());

    let coarse = posed_hand(8);
    let (c, d) = (dir.path().join("c.obj"), dir.path().join("d.obj"));
    save_obj(&coarse, &c).unwrap();
    save_obj(&edge_unpool(&coarse).unwrap(), &d).unwrap();
    let pairs = dir.path().join("pairs");
    assert_eq!(
        run(&[
            "sr-pair", "--coarse", p(&c), "--dense", p(&d), "--template", "toy:uv3", "--res", "32", "--out-dir", p(&pairs),
        ]),
        0
    );
    let refined = dir.path().join("refined.uvp");
    assert_eq!(
        run(&[
            "sr-infer", "--checkpoint", p(&out.join("srnet.uvck")), "--input", p(&pairs.join("pair_low.uvp")), "--out",
            p(&refined),
        ]),
        0
    );
    assert_eq!(read_uvp(&refined).unwrap().width, 32);
}

#[test]
fn train_toy_affinenet_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aff");
    assert_eq!(
        run(&["train-toy", "affinenet", "--steps", "2", "--samples", "2", "--batch", "2", "--res", "64", "--out", p(&out)]),
        0
    );
    assert!(out.join("affinenet.uvck").exists());
}
