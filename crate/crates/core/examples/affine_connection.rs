//! Warps an image-space feature map into UV space through the projection of
//! a ground-truth UV map, then checks that the warped silhouette channel
//! lands on the hand wherever the UV mask is set.
//!
//! `cargo run --release --example affine_connection`

use rand::SeedableRng;
use uvhand::nn::train::{random_pose, synth_camera, SYNTH_DEPTH};
use uvhand::nn::Tensor4;
use uvhand::render::render_shaded;
use uvhand::toy::ToyHand;
use uvhand::uv::{NormalizationCube, UvCodec, UvForm};
use uvhand::warp::{affine_connection, WarpContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (image, uv_res) = (128, 32);
    let hand = ToyHand::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut pose = random_pose(&mut rng, 0.5, 0.2);
    pose.translation[2] = SYNTH_DEPTH;
    let mesh = hand.posed(&pose);
    let camera = synth_camera(image);
    let cube = NormalizationCube::new([0.03, 0.07, SYNTH_DEPTH], 0.2)?;

    // features at the UV resolution: the rendered picture, downsampled by the warp
    let feat_res = uv_res;
    let feat = Tensor4::from_vec(1, 3, feat_res, feat_res, render_shaded(&mesh, &synth_camera(feat_res), feat_res, SYNTH_DEPTH, 0.1))?;
    let codec = UvCodec::new(&hand.template(UvForm::Uv3), uv_res, uv_res)?;
    let map = codec.encode(&mesh, &cube)?;
    let uv = Tensor4::from_vec(1, 3, uv_res, uv_res, map.data.clone())?;
    let mask = codec.mask();
    let ctx = WarpContext {
        camera: &camera,
        image_size: image,
        cubes: std::slice::from_ref(&cube),
    };
    let warped = affine_connection(&uv, &feat, Some(&mask), &ctx)?;
    println!("warped features {:?} (2x the UV level)", warped.shape());

    let w = warped.w;
    let mut on_hand = 0;
    let mut total = 0;
    for y in 0..warped.h {
        for x in 0..w {
            if mask.get(x / 2, y / 2) {
                total += 1;
                if warped.at(0, 0, y, x) > 0.5 {
                    on_hand += 1;
                }
            }
        }
    }
    println!(
        "{on_hand} of {total} in-mask samples read the silhouette ({:.1}%)",
        100.0 * on_hand as f64 / total as f64
    );
    Ok(())
}
