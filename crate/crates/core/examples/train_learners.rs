//! Train the four base learners on one target and tune ridge by grid search.

use pyramid::dataset::{Goal, Target};
use pyramid::evaluation::{relative_rmse, Protocol};
use pyramid::learners::{grid_search, train_transformed, LearnerSpec, TargetTransform};
use pyramid::manifest::Manifest;
use pyramid::synth::{gen_dataset, OracleSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_dataset(&OracleSpec::default(), 30, &Manifest::default_v1(), 1)?.filter_goal(Goal::Tp);
    let split = Protocol::new(3).prepare(&ds)?;
    let target = Target::Lut;
    let actual = split.test.target(target);

    for spec in LearnerSpec::standard_four(3) {
        let model = train_transformed(&spec, &split.train, target, TargetTransform::Log1p)?;
        let pred = model.predict_dataset(&split.test)?;
        let err = relative_rmse(pred.as_slice().unwrap(), actual.as_slice().unwrap())?;
        println!("{:<14} LUT relative RMSE {err:6.2} %", spec.name());
    }

    let grid: Vec<LearnerSpec> = [0.01, 0.1, 1.0, 10.0, 100.0].map(LearnerSpec::ridge).to_vec();
    let y = split.train.target(target).mapv(f64::ln_1p);
    let result = grid_search(split.train.features().view(), y.view(), &grid, 4, 3)?;
    for cell in &result.cells {
        println!("  grid cell {} score {:?}", cell.index, cell.score);
    }
    println!("best: {:?}", result.best);
    Ok(())
}
