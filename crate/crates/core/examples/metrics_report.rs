//! Full metric report for noisy predictions of posed toy hands, with and
//! without Procrustes alignment.
//!
//! `cargo run --release --example metrics_report -- [noise_mm]`

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use uvhand::metrics::{evaluate, write_curve_csv, EvalSet};
use uvhand::nn::train::random_pose;
use uvhand::toy::ToyHand;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise_mm: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(5.0);
    let hand = ToyHand::default();
    let rules = hand.joint_rules();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, noise_mm * 1e-3)?;
    let mut set = EvalSet::default();
    for _ in 0..16 {
        let mut pose = random_pose(&mut rng, 0.8, 0.3);
        pose.translation[2] = 0.5;
        let gt = hand.posed(&pose).vertices;
        let pred: Vec<_> = gt.iter().map(|p| p.map(|c| c + noise.sample(&mut rng))).collect();
        set.gt_joints.push(rules.regress(&gt)?);
        set.pred_joints.push(rules.regress(&pred)?);
        set.gt_verts.push(gt);
        set.pred_verts.push(pred);
    }
    for procrustes in [false, true] {
        let report = evaluate(&set, procrustes)?;
        println!("procrustes {procrustes}: {}", serde_json::to_string_pretty(&report)?);
        if procrustes {
            let mut csv = Vec::new();
            write_curve_csv(&mut csv, report.pck.as_ref(), report.pcv.as_ref())?;
            println!("first curve rows:\n{}", String::from_utf8(csv)?.lines().take(4).collect::<Vec<_>>().join("\n"));
        }
    }
    Ok(())
}
