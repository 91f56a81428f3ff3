//! Regenerates the toy-hand data files in `assets/`: the rest mesh as three
//! UV template OBJs and its joint rules.
//!
//! `cargo run --example make_assets -- [dir]`

use uvhand::toy::ToyHand;
use uvhand::UvForm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/assets").into()),
    );
    std::fs::create_dir_all(&dir)?;
    let hand = ToyHand::default();
    for form in [UvForm::Uv1, UvForm::Uv2, UvForm::Uv3] {
        let path = dir.join(format!("toy_{}.obj", form.name().to_ascii_lowercase()));
        hand.template(form).save(&hand.rest.vertices, &path)?;
        println!("wrote {}", path.display());
    }
    let path = dir.join("toy_joints.txt");
    hand.joint_rules().save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
