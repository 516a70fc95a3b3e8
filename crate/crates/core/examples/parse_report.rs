//! Parse an HLS report and flatten it into the raw feature vector.
//!
//! `cargo run --example parse_report -- [path/to/report.rpt]`

use pyramid::manifest::{flatten, Manifest};
use pyramid::report::{parse_report, Resource, UtilComponent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/golden_a.rpt").to_string());
    let report = parse_report(&std::fs::read_to_string(&path)?)?;

    println!("device {}", report.device_id);
    println!(
        "period: target {} ns, estimated {} ns, uncertainty {} ns",
        report.target_clock_period, report.estimated_clock_period, report.clock_uncertainty
    );
    for r in Resource::ALL {
        println!(
            "{:>4}: used {:>7} of {:>7} (instances {})",
            r.name(),
            report.utilization.used.get(r),
            report.utilization.available.get(r),
            report.utilization.component(UtilComponent::Instance).get(r)
        );
    }
    println!("{} operator rows", report.op_stats.len());

    // The canonical text form parses back to the same report.
    assert_eq!(parse_report(&report.to_text())?, report);

    let manifest = Manifest::default_v1();
    let v = flatten(&report, &manifest);
    println!("\n{} raw features (manifest {}), first ten:", v.len(), manifest.id());
    for (name, x) in manifest.names().zip(&v.values).take(10) {
        println!("  {name:<32} {x}");
    }
    Ok(())
}
