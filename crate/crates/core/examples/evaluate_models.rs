//! Per-device and per-category error tables for a full model set.

use pyramid::dataset::{Goal, Target};
use pyramid::evaluation::{evaluate, Aggregation, Grouping, ModelSet, Protocol};
use pyramid::learners::{train_transformed, LearnerSpec, TargetTransform, TrainedModel};
use pyramid::manifest::Manifest;
use pyramid::synth::{gen_dataset, OracleSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_dataset(&OracleSpec::default(), 30, &Manifest::default_v1(), 9)?;
    let split = Protocol::new(9).prepare(&ds)?;

    let mut trained: Vec<(Goal, Target, TrainedModel)> = Vec::new();
    for goal in Goal::ALL {
        let train = split.train.filter_goal(goal);
        for target in Target::ALL {
            let m = train_transformed(&LearnerSpec::forest(9), &train, target, TargetTransform::Log1p)?;
            trained.push((goal, target, m));
        }
    }
    let mut models = ModelSet::new();
    for (goal, target, m) in &trained {
        models.insert(*goal, *target, m);
    }

    let by_device = evaluate(&models, &split.test, Grouping::Device, Aggregation::Unweighted)?;
    println!("{}", by_device.to_table());
    let by_cat = evaluate(&models, &split.test, Grouping::Category, Aggregation::Weighted)?;
    println!("{}", by_cat.to_csv());
    Ok(())
}
