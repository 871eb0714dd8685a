//! Finite-difference check of the analytic gradients on random small objects.

use liftseg::gradcheck::{run, GradcheckConfig};

fn main() -> liftseg::Result<()> {
    let cfg = GradcheckConfig::default();
    let report = run(&cfg)?;
    for c in &report.end_to_end {
        println!(
            "seed {:>2}: N={:>2} S={} L={} B={:>2} params={} max rel err {:.2e}",
            c.seed, c.points, c.super_points, c.labels, c.detections, c.parameters, c.max_rel_error
        );
    }
    println!("loss {:.2e}, network {:.2e}, passed: {}", report.loss_max_rel_error, report.weightnet_max_rel_error, report.passed);
    Ok(())
}
