//! Registers a toy hand onto a rotated, shifted and noisy copy of itself.
//!
//! `cargo run --release --example icp_register -- [noise_mm]`

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use uvhand::mesh::axis_angle;
use uvhand::srdata::{icp_register, IcpParams, PointCloud};
use uvhand::toy::ToyHand;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise_mm: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mesh = ToyHand::default().rest;
    let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let truth = mesh.transformed(&axis_angle(axis, 15f64.to_radians()), [0.03, -0.02, 0.04]);
    let noise = Normal::new(0.0, noise_mm * 1e-3)?;
    let scan: Vec<_> = truth.vertices.iter().map(|p| p.map(|c| c + noise.sample(&mut rng))).collect();

    let result = icp_register(&mesh, &PointCloud::new(scan, None)?, &IcpParams::default())?;
    let err = result
        .mesh
        .vertices
        .iter()
        .zip(&truth.vertices)
        .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    println!("iterations {} converged {}", result.iterations, result.converged);
    println!(
        "residual {:.3} mm -> {:.3} mm",
        result.residuals[0] * 1e3,
        result.residuals.last().unwrap() * 1e3
    );
    println!("max vertex error to the noise-free target {:.3} mm", err * 1e3);
    Ok(())
}
