//! Ensembles over the base learners.
//!
//! [`train_pyramid`] grows a mixed model one sub-model at a time: each
//! sub-model is fit to the current residuals on a fresh bootstrap slice of
//! the training set and added with a fixed coefficient, until the held-out
//! accuracy target or the iteration cap is reached. Further stages repeat
//! the loop on whatever the completed stages left unexplained.
//!
//! [`train_classic_stack`] is two-level stacked regression: out-of-fold base
//! predictions feed a ridge meta-learner.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{bootstrap_indices, kfold, Dataset, DatasetError, Target};
use crate::evaluation::relative_rmse_nonzero;
use crate::learners::{fit, fit_transformed, LearnerError, LearnerSpec, MlpParams, Predictor, TargetTransform, TrainedModel, FORMAT_VERSION};
use crate::rng::mix_seed;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble config: {0}")]
    InvalidConfig(String),
    #[error("a stage must contain at least one sub-model")]
    EmptyStage,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("model persistence: {0}")]
    Persistence(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    /// Coefficient applied to every sub-model output.
    pub alpha: f64,
    pub submodel: LearnerSpec,
    /// Bootstrap slice size as a fraction of the training set.
    pub bootstrap_fraction: f64,
    /// Stop once validation accuracy (100 - relative RMSE) reaches this, in %.
    pub target_accuracy: f64,
    pub max_iterations: usize,
    pub max_order: usize,
    pub seed: u64,
    /// Start from the training mean instead of zero.
    pub mean_baseline: bool,
    /// Iterations without a new best validation accuracy before warning.
    pub stall_window: usize,
    /// The residual loop runs on `transform(y)`; accuracy is always measured
    /// in original units.
    #[serde(default)]
    pub target_transform: TargetTransform,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            submodel: LearnerSpec::Mlp(MlpParams {
                hidden: vec![20],
                ..MlpParams::default()
            }),
            bootstrap_fraction: 0.2,
            target_accuracy: 99.0,
            max_iterations: 50,
            max_order: 1,
            seed: 0,
            mean_baseline: false,
            stall_window: 10,
            target_transform: TargetTransform::Identity,
        }
    }
}

impl PyramidConfig {
    /// Settings used for the benchmark comparison: a regularized sub-model,
    /// larger bootstrap slices and a larger coefficient, fit in log space.
    pub fn benchmark(seed: u64) -> Self {
        Self {
            alpha: 0.2,
            submodel: LearnerSpec::Mlp(MlpParams {
                hidden: vec![20],
                l2: 0.01,
                ..MlpParams::default()
            }),
            bootstrap_fraction: 0.5,
            seed,
            target_transform: TargetTransform::Log1p,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let bad = |m: String| Err(EnsembleError::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha = {} not in (0, 1]", self.alpha));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return bad(format!("bootstrap fraction = {} not in (0, 1]", self.bootstrap_fraction));
        }
        if self.max_iterations == 0 || self.max_order == 0 {
            return bad("max_iterations and max_order must be at least 1".into());
        }
        self.submodel.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    AccuracyMet,
    MaxIterations,
    UserStop,
}

/// One weighted sub-model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedTerm {
    pub alpha: f64,
    pub submodel: TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub terms: Vec<MixedTerm>,
    pub stop_reason: StopReason,
    /// Validation accuracy (%) after each iteration.
    pub accuracy_trace: Vec<f64>,
    /// Iterations at which the stall warning fired.
    pub stall_warnings: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidModel {
    pub format_version: u32,
    pub config: PyramidConfig,
    pub feature_space_id: String,
    pub baseline: f64,
    pub stages: Vec<Stage>,
    pub achieved_accuracy: f64,
}

/// Progress report passed to an observer after every iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationEvent {
    pub stage: usize,
    pub iteration: usize,
    pub validation_accuracy: f64,
}

/// Observer verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

impl PyramidModel {
    /// Assembles a model, rejecting empty stages.
    pub fn new(config: PyramidConfig, baseline: f64, stages: Vec<Stage>) -> Result<Self, EnsembleError> {
        if stages.is_empty() || stages.iter().any(|s| s.terms.is_empty()) {
            return Err(EnsembleError::EmptyStage);
        }
        let achieved_accuracy = stages.last().and_then(|s| s.accuracy_trace.last().copied()).unwrap_or(f64::NAN);
        Ok(Self {
            format_version: FORMAT_VERSION,
            config,
            feature_space_id: String::new(),
            baseline,
            stages,
            achieved_accuracy,
        })
    }

    pub fn iterations(&self) -> usize {
        self.stages.iter().map(|s| s.terms.len()).sum()
    }

    pub fn dim(&self) -> usize {
        self.stages[0].terms[0].submodel.dim()
    }

    /// `baseline + sum over stages and terms of alpha * P(x)`, mapped back
    /// through the target transform.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, LearnerError> {
        let mut f = Array1::from_elem(x.nrows(), self.baseline);
        for s in &self.stages {
            for t in &s.terms {
                f.scaled_add(t.alpha, &t.submodel.predict(x)?);
            }
        }
        let tr = self.config.target_transform;
        Ok(f.mapv_into(|v| tr.inverse(v)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, EnsembleError> {
        let m: PyramidModel = serde_json::from_str(s).map_err(|e| EnsembleError::Persistence(e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(LearnerError::UnsupportedFormat(m.format_version).into());
        }
        if m.stages.is_empty() || m.stages.iter().any(|s| s.terms.is_empty()) {
            return Err(EnsembleError::EmptyStage);
        }
        Ok(m)
    }
}

impl Predictor for PyramidModel {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, LearnerError> {
        self.predict(x)
    }
}

fn accuracy(pred: &Array1<f64>, actual: ArrayView1<f64>, tr: TargetTransform) -> f64 {
    let pred: Vec<f64> = pred.iter().map(|&v| tr.inverse(v)).collect();
    match relative_rmse_nonzero(&pred, actual.to_vec().as_slice()).0 {
        Some(r) => 100.0 - r,
        None => f64::NAN,
    }
}

/// Trains a pyramid with validation-driven stopping.
pub fn train_pyramid(
    train_x: ArrayView2<f64>,
    train_y: ArrayView1<f64>,
    val_x: ArrayView2<f64>,
    val_y: ArrayView1<f64>,
    cfg: &PyramidConfig,
) -> Result<PyramidModel, EnsembleError> {
    train_pyramid_observed(train_x, train_y, val_x, val_y, cfg, &mut |_| Control::Continue)
}

/// [`train_pyramid`] with an observer that may stop training early.
pub fn train_pyramid_observed(
    train_x: ArrayView2<f64>,
    train_y: ArrayView1<f64>,
    val_x: ArrayView2<f64>,
    val_y: ArrayView1<f64>,
    cfg: &PyramidConfig,
    observer: &mut dyn FnMut(&IterationEvent) -> Control,
) -> Result<PyramidModel, EnsembleError> {
    cfg.validate()?;
    if val_x.nrows() == 0 {
        return Err(EnsembleError::EmptyValidation);
    }
    if train_x.nrows() == 0 || train_x.nrows() != train_y.len() {
        return Err(LearnerError::EmptyTrainingSet.into());
    }
    let tr = cfg.target_transform;
    tr.check(train_y)?;
    let train_y = train_y.mapv(|v| tr.forward(v));
    let baseline = if cfg.mean_baseline {
        train_y.sum() / train_y.len() as f64
    } else {
        0.0
    };
    let mut f_train = Array1::from_elem(train_x.nrows(), baseline);
    let mut f_val = Array1::from_elem(val_x.nrows(), baseline);
    let mut stages = Vec::new();

    'orders: for order in 0..cfg.max_order {
        let mut terms = Vec::new();
        let mut trace = Vec::new();
        let mut stall_warnings = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut stalled = 0;
        let mut stop = StopReason::MaxIterations;
        for it in 0..cfg.max_iterations {
            let global = (order * cfg.max_iterations + it) as u64;
            let idx = bootstrap_indices(train_x.nrows(), cfg.bootstrap_fraction, mix_seed(cfg.seed, 2 * global))?;
            let xb = train_x.select(Axis(0), &idx);
            let rb: Array1<f64> = idx.iter().map(|&i| train_y[i] - f_train[i]).collect();
            let spec = cfg.submodel.with_seed(mix_seed(cfg.seed, 2 * global + 1));
            let sub = fit(&spec, xb.view(), rb.view())?;
            f_train.scaled_add(cfg.alpha, &sub.predict(train_x)?);
            f_val.scaled_add(cfg.alpha, &sub.predict(val_x)?);
            terms.push(MixedTerm {
                alpha: cfg.alpha,
                submodel: sub,
            });

            let acc = accuracy(&f_val, val_y, tr);
            trace.push(acc);
            if acc > best {
                best = acc;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled == cfg.stall_window {
                    log::warn!(
                        "no improvement in validation accuracy for {stalled} iterations (stage {order}, iteration {}, best {best:.3}%)",
                        it + 1
                    );
                    stall_warnings.push(it + 1);
                    stalled = 0;
                }
            }
            if acc >= cfg.target_accuracy {
                stop = StopReason::AccuracyMet;
                break;
            }
            let event = IterationEvent {
                stage: order,
                iteration: it + 1,
                validation_accuracy: acc,
            };
            if observer(&event) == Control::Stop {
                stop = StopReason::UserStop;
                break;
            }
        }
        stages.push(Stage {
            terms,
            stop_reason: stop,
            accuracy_trace: trace,
            stall_warnings,
        });
        if stop != StopReason::MaxIterations {
            break 'orders;
        }
    }
    PyramidModel::new(cfg.clone(), baseline, stages)
}

/// Trains a pyramid on one target column of two datasets.
pub fn train_pyramid_on(train: &Dataset, val: &Dataset, target: Target, cfg: &PyramidConfig) -> Result<PyramidModel, EnsembleError> {
    let mut m = train_pyramid(
        train.features().view(),
        train.target(target).view(),
        val.features().view(),
        val.target(target).view(),
        cfg,
    )?;
    m.feature_space_id = train.feature_space_id.clone();
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub bases: Vec<LearnerSpec>,
    pub folds: usize,
    /// Ridge penalty of the meta-learner.
    pub meta_lambda: f64,
    pub seed: u64,
    /// Applied by every base learner; the meta-learner works in original
    /// units.
    #[serde(default)]
    pub target_transform: TargetTransform,
}

impl StackConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            bases: LearnerSpec::standard_four(seed).to_vec(),
            folds: 4,
            meta_lambda: 1e-3,
            seed,
            target_transform: TargetTransform::Identity,
        }
    }
}

/// Which rows a fold trained on and which it produced meta-features for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub predicted_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    pub format_version: u32,
    pub config: StackConfig,
    pub feature_space_id: String,
    /// Base learners refit on the full training set.
    pub bases: Vec<TrainedModel>,
    pub meta: TrainedModel,
    pub folds: Vec<FoldRecord>,
}

impl StackModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, LearnerError> {
        let mut meta_x = Array2::zeros((x.nrows(), self.bases.len()));
        for (j, b) in self.bases.iter().enumerate() {
            meta_x.column_mut(j).assign(&b.predict(x)?);
        }
        self.meta.predict(meta_x.view())
    }

    /// Meta-learner weights per base learner, in prediction units.
    pub fn meta_weights(&self) -> Vec<f64> {
        self.meta.linear_coefficients().map(|(w, _)| w).unwrap_or_default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, EnsembleError> {
        let m: StackModel = serde_json::from_str(s).map_err(|e| EnsembleError::Persistence(e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(LearnerError::UnsupportedFormat(m.format_version).into());
        }
        Ok(m)
    }
}

impl Predictor for StackModel {
    fn input_dim(&self) -> usize {
        self.bases[0].dim()
    }

    fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, LearnerError> {
        self.predict(x)
    }
}

/// Out-of-fold base predictions: every row is predicted by models that never
/// saw it. Returns the meta-feature matrix and the fold accounting.
pub fn out_of_fold(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &StackConfig) -> Result<(Array2<f64>, Vec<FoldRecord>), EnsembleError> {
    if cfg.folds < 2 {
        return Err(EnsembleError::InvalidConfig(format!("k = {} < 2", cfg.folds)));
    }
    if cfg.bases.is_empty() {
        return Err(EnsembleError::InvalidConfig("no base learners".into()));
    }
    let folds = kfold(x.nrows(), cfg.folds, cfg.seed)?;
    let mut meta = Array2::zeros((x.nrows(), cfg.bases.len()));
    let mut records = Vec::new();
    for (k, f) in folds.iter().enumerate() {
        let xt = x.select(Axis(0), &f.train);
        let yt = y.select(Axis(0), &f.train);
        let xv = x.select(Axis(0), &f.validation);
        for (j, spec) in cfg.bases.iter().enumerate() {
            let m = fit_transformed(spec, xt.view(), yt.view(), cfg.target_transform)?;
            let p = m.predict(xv.view())?;
            for (&row, v) in f.validation.iter().zip(p) {
                meta[[row, j]] = v;
            }
        }
        records.push(FoldRecord {
            fold: k,
            train_rows: f.train.clone(),
            predicted_rows: f.validation.clone(),
        });
    }
    Ok((meta, records))
}

/// Two-level stacked regression with a ridge meta-learner.
pub fn train_classic_stack(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &StackConfig) -> Result<StackModel, EnsembleError> {
    let (meta_x, folds) = out_of_fold(x, y, cfg)?;
    let meta = fit(&LearnerSpec::ridge(cfg.meta_lambda), meta_x.view(), y)?;
    let bases = cfg
        .bases
        .iter()
        .map(|s| fit_transformed(s, x, y, cfg.target_transform))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StackModel {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        feature_space_id: String::new(),
        bases,
        meta,
        folds,
    })
}

pub fn train_classic_stack_on(train: &Dataset, target: Target, cfg: &StackConfig) -> Result<StackModel, EnsembleError> {
    let mut m = train_classic_stack(train.features().view(), train.target(target).view(), cfg)?;
    m.feature_space_id = train.feature_space_id.clone();
    Ok(m)
}
