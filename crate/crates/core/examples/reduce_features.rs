//! Two-stage feature reduction: correlation grouping, then coefficient pruning.

use pyramid::manifest::{FeatureCategory, Manifest};
use pyramid::reduction::{apply_dataset, build_recipe, ReductionConfig, ReductionRecipe};
use pyramid::synth::{gen_dataset, OracleSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = Manifest::default_v1();
    let ds = gen_dataset(&OracleSpec::default(), 40, &manifest, 7)?;

    let cfg = ReductionConfig::default();
    let (recipe, trace) = build_recipe(&ds, &cfg)?;
    let multi = trace.groups.groups.iter().filter(|g| g.len() > 1).count();
    println!(
        "{} raw features, {} correlation survivors ({} merged groups), {} kept after pruning",
        ds.dim(),
        trace.groups.survivors.len(),
        multi,
        recipe.len()
    );

    let cats = manifest.categories();
    for c in FeatureCategory::ALL {
        let n = recipe.kept_indices.iter().filter(|&&i| cats[i] == c).count();
        println!("  {c:?}: {n}");
    }

    // Recipes persist as JSON and carry the standardization statistics.
    let restored = ReductionRecipe::from_json(&recipe.to_json())?;
    let reduced = apply_dataset(&restored, &ds)?;
    println!("reduced dataset: {} x {} (feature space {})", reduced.len(), reduced.dim(), restored.id());

    let loose = ReductionConfig { corr_threshold: 0.99, ..cfg };
    let (r2, _) = build_recipe(&ds, &loose)?;
    println!("with a 0.99 correlation threshold: {} kept", r2.len());
    Ok(())
}
