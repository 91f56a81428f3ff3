use uvhand::gradcheck::{rel_error, run_suite, TOLERANCE};

#[test]
fn every_analytic_gradient_matches_finite_differences() {
    let reports = run_suite(4, 17);
    assert!(reports.len() > 10);
    for r in &reports {
        assert!(r.passed && r.max_rel_err < TOLERANCE, "{r:?}");
        assert!(r.instances >= 4 && r.probes > 0, "{r:?}");
    }
}

#[test]
fn relative_error_switches_to_absolute_near_zero() {
    assert_eq!(rel_error(2.0, 1.0), 0.5);
    assert_eq!(rel_error(1e-10, -1e-10), 2e-10);
}
