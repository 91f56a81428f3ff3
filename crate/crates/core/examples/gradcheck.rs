//! Finite-difference verification of every analytic gradient.
//!
//! `cargo run --release --example gradcheck -- [instances] [seed]`

fn main() {
    let mut args = std::env::args().skip(1);
    let instances = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let t = std::time::Instant::now();
    let reports = uvhand::gradcheck::run_suite(instances, seed);
    let mut ok = true;
    for r in &reports {
        ok &= r.passed;
        println!(
            "{:<44} {:>3} instances {:>5} probes  max rel err {:.2e}  {}",
            r.name,
            r.instances,
            r.probes,
            r.max_rel_err,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    println!("{:.1}s", t.elapsed().as_secs_f64());
    std::process::exit(if ok { 0 } else { 1 });
}
