//! Renders the z-buffer depth of a posed toy hand and writes it as a 16-bit
//! millimeter PNG.
//!
//! `cargo run --release --example render_depth -- [size] [out.png]`

use rand::SeedableRng;
use uvhand::metrics::render_depth;
use uvhand::nn::train::{random_pose, synth_camera, SYNTH_DEPTH};
use uvhand::toy::ToyHand;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let size: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(256);
    let out = args.next().unwrap_or_else(|| "target/depth.png".into());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let mut pose = random_pose(&mut rng, 0.9, 0.3);
    pose.translation[2] = SYNTH_DEPTH;
    let mesh = ToyHand::default().posed(&pose);

    let d = render_depth(&mesh, &synth_camera(size), size, size)?;
    let covered: Vec<f64> = d.depth.iter().zip(&d.valid).filter(|(_, &v)| v).map(|(&z, _)| z).collect();
    let (lo, hi) = covered.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    println!("{} covered pixels, depth {:.1}..{:.1} mm", d.valid_count(), lo * 1e3, hi * 1e3);
    let px: Vec<u16> = d
        .depth
        .iter()
        .zip(&d.valid)
        .map(|(&z, &v)| if v { (z * 1e3).round() as u16 } else { 0 })
        .collect();
    image::ImageBuffer::<image::Luma<u16>, _>::from_raw(size as u32, size as u32, px)
        .ok_or("buffer size")?
        .save(&out)?;
    println!("wrote {out}");
    Ok(())
}
