//! Residual-stacking ensemble: observer callback, persistence, and the
//! classic out-of-fold stack for contrast.

use pyramid::dataset::{Goal, Target};
use pyramid::ensemble::{train_classic_stack_on, train_pyramid_observed, Control, PyramidConfig, PyramidModel, StackConfig};
use pyramid::evaluation::{relative_rmse, Protocol};
use pyramid::manifest::Manifest;
use pyramid::synth::{gen_dataset, OracleSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = gen_dataset(&OracleSpec::default(), 30, &Manifest::default_v1(), 5)?.filter_goal(Goal::Tp);
    let split = Protocol::new(5).prepare(&ds)?;
    let target = Target::Fmax;

    let cfg = PyramidConfig::benchmark(5);
    let (tx, ty) = (split.train.features(), split.train.target(target));
    let (vx, vy) = (split.validation.features(), split.validation.target(target));
    let model = train_pyramid_observed(tx.view(), ty.view(), vx.view(), vy.view(), &cfg, &mut |e| {
        println!("iteration {:>2}: validation accuracy {:.2} %", e.iteration, e.validation_accuracy);
        // Stop early once we are within a point of the target.
        if e.validation_accuracy >= cfg.target_accuracy - 1.0 {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    println!("{} sub-models, stop reason {:?}", model.iterations(), model.stages[0].stop_reason);

    let restored = PyramidModel::from_json(&model.to_json())?;
    let test_x = split.test.features();
    let actual = split.test.target(target);
    let pred = restored.predict(test_x.view())?;
    println!("pyramid fmax relative RMSE {:.2} %", relative_rmse(pred.as_slice().unwrap(), actual.as_slice().unwrap())?);

    let stack = train_classic_stack_on(&split.train, target, &StackConfig::standard(5))?;
    let pred = stack.predict(test_x.view())?;
    println!("classic stack fmax relative RMSE {:.2} %", relative_rmse(pred.as_slice().unwrap(), actual.as_slice().unwrap())?);
    println!("meta weights {:?}", stack.meta_weights());
    Ok(())
}
