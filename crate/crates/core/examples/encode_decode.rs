//! Encodes a posed toy hand into UV position maps with each unfolding form
//! and reports the decode error against the resolution bound.
//!
//! `cargo run --release --example encode_decode -- [out_dir]`

use rand::SeedableRng;
use uvhand::mesh::save_obj;
use uvhand::nn::train::random_pose;
use uvhand::toy::ToyHand;
use uvhand::uv::{export_png, interior_vertices, write_uvp, NormalizationCube, UvCodec, UvForm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/encode_decode".into()));
    std::fs::create_dir_all(&out)?;
    let hand = ToyHand::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut pose = random_pose(&mut rng, 0.8, 0.3);
    pose.translation = [0.0, 0.0, 0.5];
    let mesh = hand.posed(&pose);
    let cube = NormalizationCube::new([0.03, 0.07, 0.5], 0.2)?;

    for form in [UvForm::Uv1, UvForm::Uv2, UvForm::Uv3] {
        let template = hand.template(form);
        // interior at the coarsest level stays interior at the finer ones
        let interior = interior_vertices(&template, 64, 64, 1.5);
        for res in [64, 128, 256] {
            let codec = UvCodec::new(&template, res, res)?;
            let map = codec.encode(&mesh, &cube)?;
            let decoded = codec.decode(&map)?;
            let interior_max = mesh
                .vertices
                .iter()
                .zip(&decoded.vertices)
                .zip(&interior)
                .filter(|(_, &keep)| keep)
                .map(|((a, b), _)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            println!(
                "{} {res:>3}: interior max error {:.3} mm (bound {:.3} mm), {} in-mask pixels",
                form.name(),
                interior_max * 1e3,
                2.0 * cube.diagonal() / res as f64 * 1e3,
                codec.mask().count()
            );
            if res == 256 {
                let stem = form.name().to_ascii_lowercase();
                write_uvp(&map, out.join(format!("{stem}.uvp")))?;
                export_png(&map, out.join(format!("{stem}.png")))?;
                save_obj(&decoded, out.join(format!("{stem}_decoded.obj")))?;
            }
        }
    }
    println!("maps written to {}", out.display());
    Ok(())
}
