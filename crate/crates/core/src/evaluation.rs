//! Relative RMSE and the grouped error tables built on it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{kfold, Dataset, DatasetError, Goal, Target};
use crate::ensemble::{train_classic_stack_on, train_pyramid_on, EnsembleError, PyramidConfig, StackConfig};
use crate::learners::{train_transformed, LearnerError, LearnerSpec, Predictor, TargetTransform};
use crate::reduction::{apply_dataset, build_recipe, ReductionConfig, ReductionError, ReductionRecipe};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {predicted} predictions for {actual} actual values")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("empty series")]
    Empty,
    #[error("actual value at index {0} is zero")]
    ZeroActual(usize),
    #[error("no model for goal {goal}, target {target}")]
    MissingModel { goal: Goal, target: Target },
    #[error("need at least two candidates to compare")]
    TooFewCandidates,
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// `sqrt(mean(((p - a) / a)^2)) * 100`.
pub fn relative_rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(i) = actual.iter().position(|a| *a == 0.0) {
        return Err(EvalError::ZeroActual(i));
    }
    let s: f64 = predicted.iter().zip(actual).map(|(p, a)| ((p - a) / a).powi(2)).sum();
    Ok((s / actual.len() as f64).sqrt() * 100.0)
}

/// Relative RMSE over the pairs whose actual value is non-zero, plus the
/// number of pairs skipped. `None` if nothing is left.
pub fn relative_rmse_nonzero(predicted: &[f64], actual: &[f64]) -> (Option<f64>, usize) {
    let (p, a): (Vec<f64>, Vec<f64>) = predicted.iter().zip(actual).filter(|(_, a)| **a != 0.0).map(|(p, a)| (*p, *a)).unzip();
    let excluded = actual.len() - a.len();
    (relative_rmse(&p, &a).ok(), excluded)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Overall,
    Device,
    Category,
    DeviceCategory,
}

impl std::str::FromStr for Grouping {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "overall" => Ok(Grouping::Overall),
            "device" => Ok(Grouping::Device),
            "category" => Ok(Grouping::Category),
            "device-category" | "device_category" => Ok(Grouping::DeviceCategory),
            _ => Err(format!("unknown grouping `{s}`")),
        }
    }
}

/// How summary rows combine cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregation {
    /// Plain mean of the cell values.
    #[default]
    Unweighted,
    /// Mean weighted by each cell's sample count.
    Weighted,
}

pub const ALL: &str = "all";
pub const MEAN: &str = "mean";
pub const RESOURCE: &str = "resource";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub goal: String,
    pub device: String,
    pub category: String,
    /// A target name, or `resource` for the mean of the four resources.
    pub target: String,
    pub rmse_pct: f64,
    pub n: usize,
    /// Rows dropped from this cell because the actual value is zero.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub const EVAL_COLUMNS: &str = "goal,device,category,target,rmse_pct,n";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EVAL_COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{:.6},{}", r.goal, r.device, r.category, r.target, r.rmse_pct, r.n);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<5} {:<20} {:<14} {:<9} {:>10} {:>6} {:>9}\n",
            "goal", "device", "category", "target", "rmse_pct", "n", "excluded"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<5} {:<20} {:<14} {:<9} {:>10.3} {:>6} {:>9}",
                r.goal, r.device, r.category, r.target, r.rmse_pct, r.n, r.excluded
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn get(&self, goal: &str, device: &str, category: &str, target: &str) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.goal == goal && r.device == device && r.category == category && r.target == target)
    }
}

/// Trained models keyed by (goal, target).
#[derive(Default)]
pub struct ModelSet<'a> {
    models: BTreeMap<(Goal, Target), &'a dyn Predictor>,
}

impl<'a> ModelSet<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, goal: Goal, target: Target, model: &'a dyn Predictor) {
        self.models.insert((goal, target), model);
    }

    pub fn get(&self, goal: Goal, target: Target) -> Option<&'a dyn Predictor> {
        self.models.get(&(goal, target)).copied()
    }
}

fn mean_of(cells: &[(f64, usize)], agg: Aggregation) -> f64 {
    match agg {
        Aggregation::Unweighted => cells.iter().map(|c| c.0).sum::<f64>() / cells.len() as f64,
        Aggregation::Weighted => {
            let n: usize = cells.iter().map(|c| c.1).sum();
            cells.iter().map(|c| c.0 * c.1 as f64).sum::<f64>() / n as f64
        }
    }
}

/// Relative RMSE per (goal, group, target) cell of `test`.
///
/// Each group also gets a `resource` row (mean of the four resource cells);
/// with a non-trivial grouping, `mean` rows summarize the cells of each goal.
pub fn evaluate(models: &ModelSet<'_>, test: &Dataset, grouping: Grouping, agg: Aggregation) -> Result<EvalReport, EvalError> {
    let mut goals: Vec<Goal> = test.samples.iter().map(|s| s.goal).collect();
    goals.sort();
    goals.dedup();
    let mut report = EvalReport::default();
    for goal in goals {
        let part = test.filter_goal(goal);
        let x = part.features();
        let mut preds = BTreeMap::new();
        for t in Target::ALL {
            let m = models.get(goal, t).ok_or(EvalError::MissingModel { goal, target: t })?;
            preds.insert(t, m.predict_matrix(x.view())?);
        }
        let key = |i: usize| -> (String, String) {
            let s = &part.samples[i];
            let dev = match grouping {
                Grouping::Device | Grouping::DeviceCategory => s.device_id.clone(),
                _ => ALL.to_string(),
            };
            let cat = match grouping {
                Grouping::Category | Grouping::DeviceCategory => s.category.map_or("unknown".to_string(), |c| c.name().to_string()),
                _ => ALL.to_string(),
            };
            (dev, cat)
        };
        let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for i in 0..part.len() {
            groups.entry(key(i)).or_default().push(i);
        }
        let mut per_target: BTreeMap<String, Vec<(f64, usize)>> = BTreeMap::new();
        for ((dev, cat), rows) in &groups {
            let mut resource = Vec::new();
            for t in Target::ALL {
                let p: Vec<f64> = rows.iter().map(|&i| preds[&t][i]).collect();
                let a: Vec<f64> = rows.iter().map(|&i| part.samples[i].targets.get(t)).collect();
                let (rmse, excluded) = relative_rmse_nonzero(&p, &a);
                let Some(rmse) = rmse else { continue };
                let n = rows.len() - excluded;
                report.rows.push(EvalRow {
                    goal: goal.name().into(),
                    device: dev.clone(),
                    category: cat.clone(),
                    target: t.name().into(),
                    rmse_pct: rmse,
                    n,
                    excluded,
                });
                per_target.entry(t.name().into()).or_default().push((rmse, n));
                if t.is_resource() {
                    resource.push((rmse, n));
                }
            }
            if !resource.is_empty() {
                let v = mean_of(&resource, agg);
                report.rows.push(EvalRow {
                    goal: goal.name().into(),
                    device: dev.clone(),
                    category: cat.clone(),
                    target: RESOURCE.into(),
                    rmse_pct: v,
                    n: rows.len(),
                    excluded: 0,
                });
                per_target.entry(RESOURCE.into()).or_default().push((v, rows.len()));
            }
        }
        if grouping != Grouping::Overall {
            let order = Target::ALL.iter().map(|t| t.name()).chain([RESOURCE]);
            for name in order {
                if let Some(cells) = per_target.get(name) {
                    let dev = if matches!(grouping, Grouping::Device | Grouping::DeviceCategory) { MEAN } else { ALL };
                    let cat = if matches!(grouping, Grouping::Category | Grouping::DeviceCategory) { MEAN } else { ALL };
                    report.rows.push(EvalRow {
                        goal: goal.name().into(),
                        device: dev.into(),
                        category: cat.into(),
                        target: name.into(),
                        rmse_pct: mean_of(cells, agg),
                        n: cells.iter().map(|c| c.1).sum(),
                        excluded: 0,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// A model family to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Candidate {
    Learner {
        spec: LearnerSpec,
        #[serde(default)]
        transform: TargetTransform,
    },
    Pyramid {
        config: PyramidConfig,
    },
    Stack {
        config: StackConfig,
    },
}

impl Candidate {
    pub fn learner(spec: LearnerSpec) -> Self {
        Candidate::Learner {
            spec,
            transform: TargetTransform::Identity,
        }
    }

    /// The four standalone learners at their defaults followed by the
    /// benchmark pyramid, all fit under `transform`.
    pub fn benchmark_set(seed: u64, transform: TargetTransform) -> Vec<Candidate> {
        let mut v: Vec<Candidate> = LearnerSpec::standard_four(seed)
            .into_iter()
            .map(|spec| Candidate::Learner { spec, transform })
            .collect();
        v.push(Candidate::Pyramid {
            config: PyramidConfig {
                target_transform: transform,
                ..PyramidConfig::benchmark(seed)
            },
        });
        v
    }

    pub fn name(&self) -> String {
        match self {
            Candidate::Learner { spec, .. } => spec.name().into(),
            Candidate::Pyramid { .. } => "pyramid".into(),
            Candidate::Stack { .. } => "stack".into(),
        }
    }

    /// Fits on `train` (the pyramid also watches `val`) and returns test
    /// predictions.
    pub fn fit_predict(&self, train_ds: &Dataset, val: &Dataset, test: &Dataset, target: Target) -> Result<Vec<f64>, EvalError> {
        let x = test.features();
        let p = match self {
            Candidate::Learner { spec, transform } => train_transformed(spec, train_ds, target, *transform)?.predict(x.view())?,
            Candidate::Pyramid { config } => train_pyramid_on(train_ds, val, target, config)?.predict(x.view())?,
            Candidate::Stack { config } => train_classic_stack_on(train_ds, target, config)?.predict(x.view())?,
        };
        Ok(p.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub learner: String,
    pub goal: String,
    /// A target name, or `mean` over the five targets.
    pub target: String,
    pub rmse_pct: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("learner,goal,target,rmse_pct,n\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{:.6},{}", r.learner, r.goal, r.target, r.rmse_pct, r.n);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<14} {:<5} {:<6} {:>10} {:>6}\n", "learner", "goal", "target", "rmse_pct", "n");
        for r in &self.rows {
            let _ = writeln!(s, "{:<14} {:<5} {:<6} {:>10.3} {:>6}", r.learner, r.goal, r.target, r.rmse_pct, r.n);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn mean(&self, learner: &str, goal: Goal) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.learner == learner && r.goal == goal.name() && r.target == MEAN)
            .map(|r| r.rmse_pct)
    }

    /// Learners of one goal ordered from lowest to highest mean error.
    pub fn ranking(&self, goal: Goal) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self
            .rows
            .iter()
            .filter(|r| r.goal == goal.name() && r.target == MEAN)
            .map(|r| (r.learner.clone(), r.rmse_pct))
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    }
}

/// Trains every candidate per (goal, target) and tabulates test relative
/// RMSE, with a `mean` row per candidate and goal.
pub fn compare_learners(train_ds: &Dataset, val: &Dataset, test: &Dataset, candidates: &[Candidate]) -> Result<ComparisonTable, EvalError> {
    if candidates.len() < 2 {
        return Err(EvalError::TooFewCandidates);
    }
    let mut goals: Vec<Goal> = test.samples.iter().map(|s| s.goal).collect();
    goals.sort();
    goals.dedup();
    let mut jobs = Vec::new();
    for &g in &goals {
        for (ci, _) in candidates.iter().enumerate() {
            for t in Target::ALL {
                jobs.push((g, ci, t));
            }
        }
    }
    let parts: BTreeMap<Goal, (Dataset, Dataset, Dataset)> = goals
        .iter()
        .map(|&g| (g, (train_ds.filter_goal(g), val.filter_goal(g), test.filter_goal(g))))
        .collect();
    let results: Vec<Result<(f64, usize), EvalError>> = jobs
        .par_iter()
        .map(|&(g, ci, t)| {
            let (tr, va, te) = &parts[&g];
            let p = candidates[ci].fit_predict(tr, va, te, t)?;
            let a: Vec<f64> = te.target(t).to_vec();
            let (r, excluded) = relative_rmse_nonzero(&p, &a);
            Ok((r.unwrap_or(f64::NAN), a.len() - excluded))
        })
        .collect();
    let mut table = ComparisonTable::default();
    let mut it = jobs.iter().zip(results);
    for &g in &goals {
        for c in candidates {
            let mut sum = 0.0;
            let mut n_total = 0;
            for _ in Target::ALL {
                let (&(_, _, t), r) = it.next().unwrap();
                let (rmse, n) = r?;
                sum += rmse;
                n_total += n;
                table.rows.push(ComparisonRow {
                    learner: c.name(),
                    goal: g.name().into(),
                    target: t.name().into(),
                    rmse_pct: rmse,
                    n,
                });
            }
            table.rows.push(ComparisonRow {
                learner: c.name(),
                goal: g.name().into(),
                target: MEAN.into(),
                rmse_pct: sum / Target::ALL.len() as f64,
                n: n_total,
            });
        }
    }
    Ok(table)
}

/// The train/validation/test arrangement shared by every comparison: a
/// held-out test fraction, a reduction recipe fit on the remainder only, and
/// fold 0 of a k-fold split of the remainder as the validation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub test_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub reduction: ReductionConfig,
}

impl Protocol {
    pub fn new(seed: u64) -> Self {
        Self {
            test_fraction: 0.2,
            folds: 4,
            seed,
            reduction: ReductionConfig::default(),
        }
    }

    pub fn prepare(&self, ds: &Dataset) -> Result<ProtocolSplit, EvalError> {
        let (rest, test) = ds.split(self.test_fraction, self.seed)?;
        let (recipe, _) = build_recipe(&rest, &self.reduction)?;
        let rest = apply_dataset(&recipe, &rest)?;
        let test = apply_dataset(&recipe, &test)?;
        let folds = kfold(rest.len(), self.folds, self.seed)?;
        Ok(ProtocolSplit {
            train: rest.subset(&folds[0].train),
            validation: rest.subset(&folds[0].validation),
            test,
            recipe,
        })
    }
}

/// Reduced datasets produced by [`Protocol::prepare`].
#[derive(Debug, Clone)]
pub struct ProtocolSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub recipe: ReductionRecipe,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_values() {
        assert_eq!(relative_rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((relative_rmse(&[110.0, 90.0], &[100.0, 100.0]).unwrap() - 10.0).abs() < 1e-12);
        assert!((relative_rmse(&[3.0], &[2.0]).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn zero_actual_is_an_error() {
        assert!(matches!(relative_rmse(&[1.0, 1.0], &[1.0, 0.0]), Err(EvalError::ZeroActual(1))));
        assert!(matches!(relative_rmse(&[], &[]), Err(EvalError::Empty)));
        assert!(matches!(relative_rmse(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn nonzero_variant_counts_exclusions() {
        let (r, ex) = relative_rmse_nonzero(&[5.0, 110.0, 90.0], &[0.0, 100.0, 100.0]);
        assert_eq!(ex, 1);
        assert!((r.unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(relative_rmse_nonzero(&[1.0], &[0.0]), (None, 1));
    }

    proptest! {
        #[test]
        fn scale_invariant(
            pairs in prop::collection::vec((0.1f64..1e3, 0.1f64..1e3), 1..30),
            c in 1e-3f64..1e3,
        ) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = relative_rmse(&p, &a).unwrap();
            let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
            let as_: Vec<f64> = a.iter().map(|v| v * c).collect();
            let scaled = relative_rmse(&ps, &as_).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn zero_iff_equal(a in prop::collection::vec(0.1f64..1e3, 1..20), k in 0usize..20, d in 1e-6f64..10.0) {
            prop_assert_eq!(relative_rmse(&a, &a).unwrap(), 0.0);
            let mut p = a.clone();
            let i = k % a.len();
            p[i] += d;
            prop_assert!(relative_rmse(&p, &a).unwrap() > 0.0);
        }
    }
}
