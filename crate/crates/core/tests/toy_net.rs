use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uvhand::nn::train::{synth_affine_dataset, train_affinenet, AffineSynthConfig, TrainConfig};
use uvhand::nn::{load_checkpoint, save_checkpoint, Adam, AffineNet, NetConfig, Param, SrNet, SrNetConfig, Tensor4};
use uvhand::warp::WarpContext;

fn shape_of<'a>(rows: &'a [(String, [usize; 3])], name: &str) -> [usize; 3] {
    rows.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no {name}")).1
}

#[test]
fn full_width_shapes() {
    let net = AffineNet::new(NetConfig::full()).unwrap();
    let rows = net.trace_shapes().unwrap();
    let r = NetConfig::full().resolution;
    assert_eq!(shape_of(&rows, "input"), [3, r, r]);
    for (k, (c, s)) in [(64, 128), (128, 64), (256, 32), (512, 16), (1024, 8)].iter().enumerate() {
        assert_eq!(shape_of(&rows, &format!("E{}", k + 1)), [*c, *s, *s]);
    }
    for (k, s) in [16, 32, 64, 128, 256].iter().enumerate() {
        assert_eq!(shape_of(&rows, &format!("I{}", 4 - k)), [3, *s, *s]);
    }
    assert_eq!(shape_of(&rows, "D'3"), [256, 32, 32]);
    assert_eq!(shape_of(&rows, "A3"), [512, 32, 32]);

    let sr = SrNet::new(SrNetConfig::full()).unwrap();
    let rows = sr.trace_shapes([3, 256, 256]).unwrap();
    assert_eq!(shape_of(&rows, "conv9x9"), [64, 256, 256]);
    assert_eq!(shape_of(&rows, "conv5x5"), [32, 256, 256]);
    assert_eq!(shape_of(&rows, "output"), [3, 256, 256]);
}

#[test]
fn toy_forward_has_five_sigmoid_heads() {
    let cfg = NetConfig::toy();
    let data = synth_affine_dataset(&AffineSynthConfig {
        samples: 2,
        ..Default::default()
    })
    .unwrap();
    let mut net = AffineNet::new(cfg.clone()).unwrap();
    let r = cfg.resolution;
    let images: Vec<&[f64]> = data.samples.iter().map(|s| s.image.as_slice()).collect();
    let image = Tensor4::stack(&images, 3, r, r).unwrap();
    let cubes: Vec<_> = data.samples.iter().map(|s| s.cube).collect();
    let ctx = WarpContext {
        camera: &data.camera,
        image_size: r,
        cubes: &cubes,
    };
    let out = net.forward(&image, Some(&data.masks), &ctx).unwrap();
    assert_eq!(out.uv.len(), 5);
    for (k, uv) in out.uv.iter().enumerate() {
        let s = r >> (4 - k);
        assert_eq!(uv.shape(), [2, 3, s, s]);
        assert!(uv.data.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn zero_last_layer_gives_zero_or_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor4::from_vec(2, 3, 16, 16, (0..2 * 3 * 256).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let base = SrNetConfig {
        resolution: 16,
        zero_last: true,
        ..SrNetConfig::toy()
    };
    let mut plain = SrNet::new(SrNetConfig {
        residual: false,
        ..base.clone()
    })
    .unwrap();
    assert!(plain.forward(&x).unwrap().data.iter().all(|&v| v == 0.0));
    let mut residual = SrNet::new(SrNetConfig { residual: true, ..base }).unwrap();
    assert_eq!(residual.forward(&x).unwrap().data, x.data);
}

#[test]
fn checkpoint_round_trip_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut net = SrNet::new(SrNetConfig {
        resolution: 16,
        zero_last: false,
        seed: 5,
        ..SrNetConfig::toy()
    })
    .unwrap();
    // f32 storage: round parameters first so the reload is exact
    for p in net.params_mut() {
        for v in &mut p.value {
            *v = *v as f32 as f64;
        }
    }
    let x = Tensor4::from_vec(1, 3, 16, 16, (0..3 * 256).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let y = net.forward(&x).unwrap();
    let path = dir.path().join("n.uvck");
    save_checkpoint(&net.to_checkpoint().unwrap(), &path).unwrap();
    let mut back = SrNet::from_checkpoint(&load_checkpoint(&path).unwrap()).unwrap();
    assert_eq!(back.forward(&x).unwrap().data, y.data);

    let mut a = AffineNet::new(NetConfig::scaled(1.0 / 32.0, 32)).unwrap();
    let ck = a.to_checkpoint().unwrap();
    save_checkpoint(&ck, &path).unwrap();
    let mut b = AffineNet::from_checkpoint(&load_checkpoint(&path).unwrap()).unwrap();
    assert_eq!(b.to_checkpoint().unwrap().blobs, ck.blobs);
}

#[test]
fn training_is_bit_reproducible() {
    let data = synth_affine_dataset(&AffineSynthConfig {
        samples: 3,
        ..Default::default()
    })
    .unwrap();
    let run = || {
        let mut net = AffineNet::new(NetConfig::scaled(1.0 / 32.0, 64)).unwrap();
        let s = train_affinenet(&mut net, &data, &TrainConfig::affinenet(4, 2), None).unwrap();
        (s.history.iter().map(|h| h.total.to_bits()).collect::<Vec<_>>(), net.to_checkpoint().unwrap().blobs)
    };
    assert_eq!(run(), run());
}

#[test]
fn adam_minimizes_a_quadratic() {
    // f(x) = sum_i a_i (x_i - c_i)^2
    let a = [1.0, 4.0, 0.25, 2.0];
    let c = [0.5, -1.0, 2.0, 0.0];
    let mut p = Param::new("x", vec![3.0, 3.0, -3.0, 1.0]);
    let mut adam = Adam::new(0.05);
    for _ in 0..2000 {
        p.zero_grad();
        for i in 0..4 {
            p.grad[i] = 2.0 * a[i] * (p.value[i] - c[i]);
        }
        adam.update(&mut [&mut p], 0.05).unwrap();
    }
    for i in 0..4 {
        assert!((p.value[i] - c[i]).abs() < 1e-3, "{:?}", p.value);
    }
}
