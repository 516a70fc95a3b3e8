//! Compare base learners against the ensemble under the standard protocol.
//!
//! `cargo run --release --example compare_learners -- [designs] [seed]`

use pyramid::dataset::Goal;
use pyramid::evaluation::{compare_learners, Candidate, Protocol};
use pyramid::learners::TargetTransform;
use pyramid::manifest::Manifest;
use pyramid::synth::{gen_dataset, OracleSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let designs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(24);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let ds = gen_dataset(&OracleSpec::default(), designs, &Manifest::default_v1(), 2024)?;
    let split = Protocol::new(seed).prepare(&ds)?;
    println!(
        "train {} / validation {} / test {}, {} features",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.recipe.len()
    );

    let candidates = Candidate::benchmark_set(seed, TargetTransform::Log1p);
    let table = compare_learners(&split.train, &split.validation, &split.test, &candidates)?;
    println!("{}", table.to_table());
    for goal in Goal::ALL {
        let ranking: Vec<String> = table.ranking(goal).iter().map(|(n, v)| format!("{n} {v:.2}")).collect();
        println!("{goal} ranking: {}", ranking.join(" < "));
    }
    Ok(())
}
