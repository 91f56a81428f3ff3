//! Edge-based unpooling: every edge gains a midpoint vertex and every
//! triangle splits in four.
//!
//! `cargo run --release --example unpool -- [mesh.obj]`

use uvhand::mesh::{compute_edges, edge_unpool, load_obj};
use uvhand::toy::{mano_count_surrogate, ToyHand};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let meshes = match std::env::args().nth(1) {
        Some(path) => vec![(path.clone(), load_obj(&path)?)],
        None => vec![
            ("toy hand".to_string(), ToyHand::default().rest),
            ("778-vertex surrogate".to_string(), mano_count_surrogate()),
        ],
    };
    for (name, mesh) in meshes {
        let edges = compute_edges(&mesh)?;
        let dense = edge_unpool(&mesh)?;
        println!(
            "{name}: {} vertices, {} edges, {} faces -> {} vertices, {} faces",
            mesh.vertex_count(),
            edges.len(),
            mesh.face_count(),
            dense.vertex_count(),
            dense.face_count()
        );
    }
    Ok(())
}
