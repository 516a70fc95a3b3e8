//! Base regressors with a uniform fit/predict contract.
//!
//! Every learner standardizes its features and (except the forest and the
//! mean baseline) its target internally, so callers always work in original
//! units. An optional [`TargetTransform`] is applied to the target before
//! scaling and undone after prediction.

pub mod forest;
pub mod grid;
pub mod mlp;
pub mod ridge;
pub mod svr;

use ndarray::{Array1, ArrayView2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Target};
use crate::evaluation::relative_rmse_nonzero;
use crate::linalg::{Standardizer, TargetScaler};

pub use forest::{Forest, ForestParams, Tree};
pub use grid::{grid_search, GridCell, GridResult};
pub use mlp::{Activation, MlpParams, Network};
pub use ridge::RidgeParams;
pub use svr::{Kernel, SvrModel, SvrParams};

/// Version tag written into every persisted model.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid learner spec: {0}")]
    InvalidSpec(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular system: design matrix is rank deficient and lambda = 0")]
    SingularSystem,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergenceDetected { epoch: usize },
    #[error("SMO did not converge after {iterations} iterations (duality gap {duality_gap:.3e})")]
    NonConvergence { iterations: usize, duality_gap: f64 },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("model persistence: {0}")]
    Persistence(String),
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),
    #[error("grid search: {0}")]
    Grid(String),
}

/// Learner family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Ridge(RidgeParams),
    Mlp(MlpParams),
    Svr(SvrParams),
    RandomForest(ForestParams),
    /// Predicts the training mean. Baseline and exact-fit stub for constant
    /// residuals.
    Mean,
}

impl LearnerSpec {
    pub fn ridge(lambda: f64) -> Self {
        LearnerSpec::Ridge(RidgeParams { lambda })
    }

    pub fn mlp(hidden: Vec<usize>, seed: u64) -> Self {
        LearnerSpec::Mlp(MlpParams {
            hidden,
            seed,
            ..MlpParams::default()
        })
    }

    pub fn svr() -> Self {
        LearnerSpec::Svr(SvrParams::default())
    }

    pub fn forest(seed: u64) -> Self {
        LearnerSpec::RandomForest(ForestParams {
            seed,
            ..ForestParams::default()
        })
    }

    /// The four standalone learners with their default hyperparameters.
    pub fn standard_four(seed: u64) -> [LearnerSpec; 4] {
        [
            LearnerSpec::Ridge(RidgeParams::default()),
            LearnerSpec::Mlp(MlpParams {
                seed,
                ..MlpParams::default()
            }),
            LearnerSpec::svr(),
            LearnerSpec::forest(seed),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Ridge(_) => "ridge",
            LearnerSpec::Mlp(_) => "mlp",
            LearnerSpec::Svr(_) => "svr",
            LearnerSpec::RandomForest(_) => "random_forest",
            LearnerSpec::Mean => "mean",
        }
    }

    /// Same spec with its random seed replaced (no-op for deterministic
    /// learners).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            LearnerSpec::Mlp(p) => p.seed = seed,
            LearnerSpec::RandomForest(p) => p.seed = seed,
            _ => {}
        }
        s
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: String| Err(LearnerError::InvalidSpec(m));
        match self {
            LearnerSpec::Ridge(p) => {
                if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
                    return bad(format!("lambda = {}", p.lambda));
                }
            }
            LearnerSpec::Mlp(p) => {
                if p.hidden.contains(&0) {
                    return bad("hidden layer sizes must be at least 1".into());
                }
                if p.epochs == 0 || p.batch_size == 0 {
                    return bad("epochs and batch size must be at least 1".into());
                }
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) || !(p.l2 >= 0.0) {
                    return bad(format!("learning rate {} / l2 {}", p.learning_rate, p.l2));
                }
            }
            LearnerSpec::Svr(p) => {
                if !(p.c > 0.0) || !(p.epsilon >= 0.0) || !(p.tol > 0.0) || p.max_iter == 0 {
                    return bad(format!("C {} / epsilon {} / tol {}", p.c, p.epsilon, p.tol));
                }
                if let Kernel::Rbf { gamma: Some(g) } = p.kernel {
                    if !(g > 0.0) {
                        return bad(format!("gamma = {g}"));
                    }
                }
            }
            LearnerSpec::RandomForest(p) => {
                if p.n_trees == 0 || p.min_samples_leaf == 0 || p.max_depth == Some(0) || p.feature_subsample == Some(0) {
                    return bad("forest sizes must be at least 1".into());
                }
            }
            LearnerSpec::Mean => {}
        }
        Ok(())
    }
}

/// Monotone map applied to the target before it is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    #[default]
    Identity,
    /// `ln(1 + y)`; requires `y > -1`.
    Log1p,
}

impl TargetTransform {
    pub fn forward(self, y: f64) -> f64 {
        match self {
            TargetTransform::Identity => y,
            TargetTransform::Log1p => y.ln_1p(),
        }
    }

    pub fn inverse(self, z: f64) -> f64 {
        match self {
            TargetTransform::Identity => z,
            TargetTransform::Log1p => z.exp_m1(),
        }
    }

    /// Rejects targets outside the transform's domain.
    pub fn check(self, y: ArrayView1<f64>) -> Result<(), LearnerError> {
        if self == TargetTransform::Log1p && y.iter().any(|&v| v <= -1.0) {
            return Err(LearnerError::InvalidSpec("log1p target transform needs every target > -1".into()));
        }
        Ok(())
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetTransform::Identity => "identity",
            TargetTransform::Log1p => "log1p",
        }
    }
}

impl std::str::FromStr for TargetTransform {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(TargetTransform::Identity),
            "log1p" => Ok(TargetTransform::Log1p),
            other => Err(LearnerError::InvalidSpec(format!("unknown target transform '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub features: Standardizer,
    #[serde(default)]
    pub transform: TargetTransform,
    pub target: TargetScaler,
}

impl Normalization {
    /// Raw model output back to original target units.
    pub fn output(&self, raw: f64) -> f64 {
        self.transform.inverse(self.target.inverse(raw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameters {
    Linear { weights: Vec<f64>, bias: f64 },
    Mlp(Network),
    Svr(SvrModel),
    Forest(Forest),
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    /// Training relative RMSE in percent over non-zero targets; `None` when
    /// every target is zero.
    pub train_rmse_rel: Option<f64>,
    pub epochs_or_trees: usize,
    /// Training rows skipped by the metric because their target is zero.
    pub excluded: usize,
}

/// A fitted learner. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: LearnerSpec,
    pub feature_space_id: String,
    pub normalization: Normalization,
    pub parameters: Parameters,
    pub training_stats: TrainingStats,
}

/// Fits `spec` to rows `x` and targets `y`.
pub fn fit(spec: &LearnerSpec, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<TrainedModel, LearnerError> {
    fit_transformed(spec, x, y, TargetTransform::Identity)
}

/// [`fit`] in the space of `transform(y)`.
pub fn fit_transformed(spec: &LearnerSpec, x: ArrayView2<f64>, y: ArrayView1<f64>, transform: TargetTransform) -> Result<TrainedModel, LearnerError> {
    spec.validate()?;
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(LearnerError::EmptyTrainingSet);
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFinite);
    }
    transform.check(y)?;
    let ty: Array1<f64> = y.mapv(|v| transform.forward(v));
    let scale_target = !matches!(spec, LearnerSpec::RandomForest(_) | LearnerSpec::Mean);
    let features = match spec {
        LearnerSpec::RandomForest(_) | LearnerSpec::Mean => Standardizer::identity(x.ncols()),
        _ => Standardizer::fit(x),
    };
    let target = if scale_target {
        TargetScaler::fit(ty.view())
    } else {
        TargetScaler { mean: 0.0, std: 1.0 }
    };
    let z = features.transform(x);
    let t: Array1<f64> = ty.mapv(|v| target.forward(v));

    let (parameters, epochs_or_trees) = match spec {
        LearnerSpec::Ridge(p) => {
            let (weights, bias) = ridge::solve(z.view(), t.view(), p.lambda)?;
            (Parameters::Linear { weights, bias }, 1)
        }
        LearnerSpec::Mlp(p) => {
            let net = mlp::train(z.view(), t.view(), p)?;
            (Parameters::Mlp(net), p.epochs)
        }
        LearnerSpec::Svr(p) => (Parameters::Svr(svr::train(z.view(), t.view(), p)?), 1),
        LearnerSpec::RandomForest(p) => (Parameters::Forest(forest::train(z.view(), t.view(), p)), p.n_trees),
        LearnerSpec::Mean => (
            Parameters::Constant {
                value: t.sum() / t.len() as f64,
            },
            1,
        ),
    };

    let mut model = TrainedModel {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        feature_space_id: String::new(),
        normalization: Normalization { features, transform, target },
        parameters,
        training_stats: TrainingStats {
            train_rmse_rel: None,
            epochs_or_trees,
            excluded: 0,
        },
    };
    let pred = model.predict(x)?;
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::DivergenceDetected { epoch: epochs_or_trees });
    }
    let (rmse, excluded) = relative_rmse_nonzero(pred.as_slice().unwrap(), y.to_vec().as_slice());
    model.training_stats.train_rmse_rel = rmse;
    model.training_stats.excluded = excluded;
    Ok(model)
}

/// Fits `spec` to one target column of a dataset.
pub fn train(spec: &LearnerSpec, ds: &Dataset, target: Target) -> Result<TrainedModel, LearnerError> {
    train_transformed(spec, ds, target, TargetTransform::Identity)
}

pub fn train_transformed(spec: &LearnerSpec, ds: &Dataset, target: Target, transform: TargetTransform) -> Result<TrainedModel, LearnerError> {
    let mut m = fit_transformed(spec, ds.features().view(), ds.target(target).view(), transform)?;
    m.feature_space_id = ds.feature_space_id.clone();
    Ok(m)
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.normalization.features.dim()
    }

    /// Prediction for a single feature vector.
    pub fn predict_row(&self, v: &[f64]) -> Result<f64, LearnerError> {
        if v.len() != self.dim() {
            return Err(LearnerError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let z = self.normalization.features.transform_row(v);
        let raw = match &self.parameters {
            Parameters::Linear { weights, bias } => ridge::eval(weights, *bias, &z),
            Parameters::Mlp(net) => net.forward_row(&z),
            Parameters::Svr(m) => m.eval(&z),
            Parameters::Forest(f) => f.predict_row(&z),
            Parameters::Constant { value } => *value,
        };
        Ok(self.normalization.output(raw))
    }

    /// Predictions for every row of `x`.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, LearnerError> {
        if x.ncols() != self.dim() {
            return Err(LearnerError::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let z = self.normalization.features.transform(x);
        let raw: Array1<f64> = match &self.parameters {
            Parameters::Mlp(net) => net.forward(z.view()),
            _ => {
                let mut out = Array1::zeros(x.nrows());
                for (o, row) in out.iter_mut().zip(z.rows()) {
                    let row = row.to_vec();
                    *o = match &self.parameters {
                        Parameters::Linear { weights, bias } => ridge::eval(weights, *bias, &row),
                        Parameters::Svr(m) => m.eval(&row),
                        Parameters::Forest(f) => f.predict_row(&row),
                        Parameters::Constant { value } => *value,
                        Parameters::Mlp(_) => unreachable!(),
                    };
                }
                out
            }
        };
        Ok(raw.mapv(|r| self.normalization.output(r)))
    }

    /// Predictions for every row of a dataset.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Array1<f64>, LearnerError> {
        self.predict(ds.features().view())
    }

    /// Weights and bias in original feature and target units (ridge without
    /// a target transform only).
    pub fn linear_coefficients(&self) -> Option<(Vec<f64>, f64)> {
        let Parameters::Linear { weights, bias } = &self.parameters else {
            return None;
        };
        if self.normalization.transform != TargetTransform::Identity {
            return None;
        }
        let f = &self.normalization.features;
        let t = &self.normalization.target;
        let w: Vec<f64> = weights.iter().enumerate().map(|(j, w)| w * t.std / f.stds[j]).collect();
        let b = t.mean + t.std * bias - w.iter().zip(&f.means).map(|(w, m)| w * m).sum::<f64>();
        Some((w, b))
    }

    /// Per-tree predictions in original units (forest only). Their mean is
    /// the forest prediction when no target transform is set.
    pub fn tree_predictions(&self, v: &[f64]) -> Option<Vec<f64>> {
        let Parameters::Forest(f) = &self.parameters else {
            return None;
        };
        let z = self.normalization.features.transform_row(v);
        Some(f.trees.iter().map(|t| self.normalization.output(t.predict_row(&z))).collect())
    }

    /// Impurity-based feature importances (forest only).
    pub fn feature_importances(&self) -> Option<&[f64]> {
        match &self.parameters {
            Parameters::Forest(f) => Some(&f.importances),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        let m: TrainedModel = serde_json::from_str(s).map_err(|e| LearnerError::Persistence(e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(LearnerError::UnsupportedFormat(m.format_version));
        }
        Ok(m)
    }
}

/// Anything that maps feature rows to scalar predictions in original units.
pub trait Predictor: Send + Sync {
    fn input_dim(&self) -> usize;

    fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, LearnerError>;

    fn predict_one(&self, v: &[f64]) -> Result<f64, LearnerError> {
        let x = ArrayView2::from_shape((1, v.len()), v).expect("row shape");
        Ok(self.predict_matrix(x)?[0])
    }
}

impl Predictor for TrainedModel {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, LearnerError> {
        self.predict(x)
    }

    fn predict_one(&self, v: &[f64]) -> Result<f64, LearnerError> {
        self.predict_row(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use ndarray::{array, Array2};

    fn random_problem(n: usize, d: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut r = SeededRng::new(seed);
        let x = Array2::from_shape_fn((n, d), |_| r.normal());
        let y = x.rows().into_iter().map(|row| 5.0 + row.sum().sin() + 0.3 * row[0] * row[0]).collect();
        (x, y)
    }

    #[test]
    fn every_learner_has_finite_training_error() {
        let (x, y) = random_problem(60, 3, 1);
        let mut specs = LearnerSpec::standard_four(3).to_vec();
        specs.push(LearnerSpec::Mean);
        for s in specs {
            let s = match s {
                LearnerSpec::Mlp(p) => LearnerSpec::Mlp(MlpParams { epochs: 20, ..p }),
                other => other,
            };
            let m = fit(&s, x.view(), y.view()).unwrap();
            assert!(m.training_stats.train_rmse_rel.unwrap().is_finite(), "{}", s.name());
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = fit(&LearnerSpec::ridge(0.0), array![[1.0], [2.0]].view(), array![2.0, 4.0].view()).unwrap();
        assert_eq!(
            m.predict_row(&[1.0, 2.0]),
            Err(LearnerError::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn persisted_models_predict_bit_identically() {
        let (x, y) = random_problem(50, 4, 7);
        for s in [
            LearnerSpec::ridge(0.5),
            LearnerSpec::Mlp(MlpParams {
                hidden: vec![6, 4],
                epochs: 15,
                ..MlpParams::default()
            }),
            LearnerSpec::svr(),
            LearnerSpec::RandomForest(ForestParams {
                n_trees: 5,
                ..ForestParams::default()
            }),
        ] {
            let m = fit(&s, x.view(), y.view()).unwrap();
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            for row in x.rows() {
                let v = row.to_vec();
                assert_eq!(m.predict_row(&v).unwrap().to_bits(), back.predict_row(&v).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = random_problem(40, 3, 11);
        for s in LearnerSpec::standard_four(5) {
            let s = match s {
                LearnerSpec::Mlp(p) => LearnerSpec::Mlp(MlpParams { epochs: 5, ..p }),
                other => other,
            };
            assert_eq!(fit(&s, x.view(), y.view()).unwrap(), fit(&s, x.view(), y.view()).unwrap());
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(LearnerSpec::ridge(-1.0).validate(), Err(LearnerError::InvalidSpec(_))));
        assert!(LearnerSpec::mlp(vec![3, 0], 1).validate().is_err());
        let svr = LearnerSpec::Svr(SvrParams {
            c: 0.0,
            ..SvrParams::default()
        });
        assert!(svr.validate().is_err());
    }

    #[test]
    fn spec_json_is_tagged_by_kind() {
        let s = serde_json::to_string(&LearnerSpec::ridge(2.0)).unwrap();
        assert_eq!(s, r#"{"kind":"ridge","lambda":2.0}"#);
        let back: LearnerSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, LearnerSpec::ridge(2.0));
    }

    #[test]
    fn log1p_transform_recovers_exponential_targets() {
        let x = Array2::from_shape_fn((30, 1), |(i, _)| i as f64 / 10.0);
        let y = x.column(0).mapv(|v| (0.5 + 2.0 * v).exp() - 1.0);
        let m = fit_transformed(&LearnerSpec::ridge(0.0), x.view(), y.view(), TargetTransform::Log1p).unwrap();
        for (p, a) in m.predict(x.view()).unwrap().iter().zip(&y) {
            assert!((p - a).abs() <= 1e-9 * a.abs().max(1.0));
        }
        assert!(m.linear_coefficients().is_none());
        let back = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.normalization.transform, TargetTransform::Log1p);
        let bad = array![0.5, -1.0];
        let r = fit_transformed(&LearnerSpec::Mean, array![[0.0], [1.0]].view(), bad.view(), TargetTransform::Log1p);
        assert!(matches!(r, Err(LearnerError::InvalidSpec(_))));
        assert_eq!("log1p".parse::<TargetTransform>().unwrap(), TargetTransform::Log1p);
    }
}
