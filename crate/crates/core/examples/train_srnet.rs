//! Trains the toy refinement network on synthetic coarse/dense hand pairs
//! and compares depth maps of the input and refined meshes on held-out
//! pairs.
//!
//! `cargo run --release --example train_srnet -- [steps] [out_dir]`

use uvhand::nn::train::{sr_predict, train_srnet, TrainConfig};
use uvhand::nn::{save_checkpoint, SrNet, SrNetConfig};
use uvhand::srdata::{sr_depth_report, synth_sr_dataset, SrSynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1000);
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "target/train_srnet".into()));
    std::fs::create_dir_all(&out)?;

    let t = std::time::Instant::now();
    let train = synth_sr_dataset(&SrSynthConfig::default())?;
    let held_out = synth_sr_dataset(&SrSynthConfig {
        samples: 20,
        seed: 999,
        ..Default::default()
    })?;
    let mut net = SrNet::new(SrNetConfig::toy())?;
    let mut log = std::io::BufWriter::new(std::fs::File::create(out.join("loss.jsonl"))?);
    let summary = train_srnet(&mut net, &train.data, &TrainConfig::srnet(steps, 8), Some(&mut log))?;
    println!("loss {:.5} -> {:.5}", summary.initial_loss(), summary.final_loss);

    let pred = sr_predict(&mut net, &held_out.data, 8)?;
    let r = sr_depth_report(&held_out, &pred, 128)?;
    println!(
        "held-out depth RMSE {:.3} mm -> {:.3} mm ({:.1}% lower), PSNR {:.2} dB -> {:.2} dB  ({:.0}s)",
        r.input_rmse_mm,
        r.output_rmse_mm,
        100.0 * r.reduction(),
        r.input_psnr_db,
        r.output_psnr_db,
        t.elapsed().as_secs_f64()
    );
    save_checkpoint(&net.to_checkpoint()?, out.join("srnet.uvck"))?;
    Ok(())
}
