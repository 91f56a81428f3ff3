//! Overfits the toy image-to-UV network on a handful of synthetic posed
//! hands and writes the JSON-lines loss log and a checkpoint.
//!
//! `cargo run --release --example train_affinenet -- [steps] [out_dir]`

use std::io::Write;

use uvhand::nn::train::{synth_affine_dataset, train_affinenet, AffineSynthConfig, TrainConfig};
use uvhand::nn::{save_checkpoint, AffineNet, NetConfig};

/// Forwards log lines to a file and echoes every hundredth to stdout.
struct Tee<W: Write>(W, usize);

impl<W: Write> Write for Tee<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        if buf.starts_with(b"{") {
            if self.1 % 100 == 0 {
                println!("{}", String::from_utf8_lossy(buf).trim_end());
            }
            self.1 += 1;
        }
        self.0.write(buf)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.0.flush()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(3000);
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "target/train_affinenet".into()));
    std::fs::create_dir_all(&out)?;

    let data = synth_affine_dataset(&AffineSynthConfig::default())?;
    let mut cfg = TrainConfig::affinenet(steps, data.samples.len());
    // a fixed rate keeps the overfit moving late in the run
    cfg.cosine = false;
    let mut net = AffineNet::new(NetConfig::toy())?;

    let t = std::time::Instant::now();
    let mut log = Tee(std::io::BufWriter::new(std::fs::File::create(out.join("loss.jsonl"))?), 0);
    let summary = train_affinenet(&mut net, &data, &cfg, Some(&mut log))?;
    log.flush()?;

    let initial = summary.initial_loss();
    println!(
        "initial {initial:.4}  final {:.4}  ratio {:.3}  ({:.0}s)",
        summary.final_loss,
        summary.final_loss / initial,
        t.elapsed().as_secs_f64()
    );
    save_checkpoint(&net.to_checkpoint()?, out.join("affinenet.uvck"))?;
    Ok(())
}
