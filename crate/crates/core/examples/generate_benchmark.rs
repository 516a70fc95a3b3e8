//! Generate a synthetic benchmark: report files plus a labelled dataset CSV.
//!
//! `cargo run --example generate_benchmark -- [out_dir] [designs]`

use std::collections::BTreeMap;

use pyramid::dataset::Target;
use pyramid::manifest::Manifest;
use pyramid::synth::{write_benchmark, OracleSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("pyramid_benchmark"));
    let designs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(12);

    let spec = OracleSpec::default();
    let ds = write_benchmark(&out, &spec, designs, &Manifest::default_v1(), 2024)?;
    println!("wrote {} samples ({} features) to {}", ds.len(), ds.dim(), out.display());

    let mut per_cell: BTreeMap<(String, String), usize> = BTreeMap::new();
    for s in &ds.samples {
        let cat = s.category.map(|c| c.name().to_string()).unwrap_or_default();
        *per_cell.entry((s.goal.name().to_string(), cat)).or_default() += 1;
    }
    for ((goal, cat), n) in per_cell {
        println!("  {goal:<3} {cat:<14} {n}");
    }

    let fmax = ds.target(Target::Fmax);
    let mean = fmax.mean().unwrap_or(0.0);
    println!("mean implemented fmax {mean:.1} MHz over {} devices", spec.devices.len());
    Ok(())
}
