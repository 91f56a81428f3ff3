use uvhand::mesh::{load_obj, JointRules};
use uvhand::toy::ToyHand;
use uvhand::uv::load_template;
use uvhand::UvForm;

fn asset(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(name)
}

#[test]
fn shipped_templates_match_the_generator() {
    let hand = ToyHand::default();
    for form in [UvForm::Uv1, UvForm::Uv2, UvForm::Uv3] {
        let path = asset(&format!("toy_{}.obj", form.name().to_ascii_lowercase()));
        let t = load_template(&path).unwrap();
        let mesh = load_obj(&path).unwrap();
        assert_eq!(t.form, form);
        let want = hand.template(form);
        assert_eq!(t.faces, want.faces, "{form:?}");
        assert_eq!(t.vertex_of, want.vertex_of);
        assert!(t.uv.iter().zip(&want.uv).all(|(a, b)| (a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8));
        assert_eq!(mesh.faces, hand.rest.faces);
        assert!(mesh.vertices.iter().zip(&hand.rest.vertices).all(|(a, b)| (0..3).all(|k| (a[k] - b[k]).abs() < 1e-8)));
    }
}

#[test]
fn shipped_joint_rules_match_the_generator() {
    let back = JointRules::load(asset("toy_joints.txt")).unwrap();
    let want = ToyHand::default().joint_rules();
    assert_eq!(back.tips, want.tips);
    assert_eq!(back.rules.len(), want.rules.len());
}
