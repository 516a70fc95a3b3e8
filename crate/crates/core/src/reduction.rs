//! Two-stage feature reduction.
//!
//! 1. Redundancy: features are grouped by the transitive closure of
//!    `|pearson| >= corr_threshold`; the lowest manifest index of each group
//!    survives.
//! 2. Relevance: a penalized linear model is fit per target on the
//!    z-scored survivors (z-scored targets too); a feature is kept when its
//!    largest absolute coefficient over the targets reaches `coef_threshold`.
//!
//! The L2 penalty shrinks but never zeroes a coefficient, hence the explicit
//! threshold. An L1 penalty (coordinate descent) is available as well.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Target};
use crate::linalg::{ridge_normal_equations, Standardizer, TargetScaler};
use crate::manifest::RawFeatureVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("series need at least two points")]
    TooShort,
    #[error("correlation threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error("linear system is singular")]
    SingularFit,
    #[error("recipe keeps no features")]
    EmptyRecipe,
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Sample Pearson correlation. `constant` is set when either series has
/// zero variance, in which case `r` is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub constant: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, ReductionError> {
    if x.len() != y.len() {
        return Err(ReductionError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(ReductionError::TooShort);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= f64::EPSILON * n * mx * mx || syy <= f64::EPSILON * n * my * my || sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation { r: 0.0, constant: true });
    }
    Ok(Correlation {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        constant: false,
    })
}

/// Correlation matrix of the columns of `x`; constant columns get zero
/// off-diagonal entries and are reported in the returned mask.
pub fn correlation_matrix(x: ArrayView2<f64>) -> (Array2<f64>, Vec<bool>) {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let mut z = &x - &mean.view().insert_axis(Axis(0));
    let mut constant = vec![false; x.ncols()];
    for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
        let ss: f64 = col.iter().map(|v| v * v).sum();
        if ss <= f64::EPSILON * n * mean[j] * mean[j] || ss == 0.0 {
            constant[j] = true;
            col.fill(0.0);
        } else {
            col /= ss.sqrt();
        }
    }
    let mut r = z.t().dot(&z);
    r.mapv_inplace(|v| v.clamp(-1.0, 1.0));
    (r, constant)
}

/// Result of the redundancy stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGroups {
    /// Each group ascending; groups ordered by their first index.
    pub groups: Vec<Vec<usize>>,
    /// First index of every group, ascending.
    pub survivors: Vec<usize>,
}

pub fn correlation_prune(x: ArrayView2<f64>, corr_threshold: f64) -> Result<CorrelationGroups, ReductionError> {
    if !(corr_threshold > 0.0 && corr_threshold <= 1.0) {
        return Err(ReductionError::InvalidThreshold(corr_threshold));
    }
    if x.nrows() < 2 {
        return Err(ReductionError::TooShort);
    }
    let d = x.ncols();
    let (r, constant) = correlation_matrix(x);
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..d {
        if constant[i] {
            continue;
        }
        for j in (i + 1)..d {
            // Tolerance keeps exact duplicates grouped despite rounding in r.
            if !constant[j] && r[[i, j]].abs() >= corr_threshold - 1e-12 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; d];
    for i in 0..d {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    let survivors = groups.iter().map(|g| g[0]).collect();
    Ok(CorrelationGroups { groups, survivors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L2,
    L1,
}

/// Result of the relevance stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPrune {
    pub survivors: Vec<usize>,
    /// `max_t |coef|` per candidate, aligned with the candidate list.
    pub max_abs_coef: Vec<f64>,
}

/// Fits one penalized model per target column of `y` on the candidate
/// columns of `x` and keeps the candidates whose largest standardized
/// coefficient reaches `coef_threshold`.
pub fn coefficient_prune(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    candidates: &[usize],
    lambda: f64,
    coef_threshold: f64,
    penalty: Penalty,
) -> Result<CoefficientPrune, ReductionError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ReductionError::InvalidPenalty(format!("lambda must be positive, got {lambda}")));
    }
    if !(coef_threshold >= 0.0) {
        return Err(ReductionError::InvalidPenalty(format!("coef_threshold {coef_threshold}")));
    }
    if x.nrows() != y.nrows() {
        return Err(ReductionError::LengthMismatch(x.nrows(), y.nrows()));
    }
    let sub = x.select(Axis(1), candidates);
    let z = Standardizer::fit(sub.view()).transform(sub.view());
    let mut max_abs = vec![0.0f64; candidates.len()];
    for col in y.axis_iter(Axis(1)) {
        let scaler = TargetScaler::fit(col);
        let yt: Array1<f64> = col.mapv(|v| scaler.forward(v));
        let w = match penalty {
            Penalty::L2 => ridge_normal_equations(z.view(), yt.view(), lambda).ok_or(ReductionError::SingularFit)?,
            Penalty::L1 => lasso_cd(z.view(), yt.view(), lambda, 500, 1e-8),
        };
        for (m, c) in max_abs.iter_mut().zip(w.iter()) {
            *m = m.max(c.abs());
        }
    }
    let survivors = candidates
        .iter()
        .zip(&max_abs)
        .filter(|(_, m)| **m >= coef_threshold)
        .map(|(i, _)| *i)
        .collect();
    Ok(CoefficientPrune {
        survivors,
        max_abs_coef: max_abs,
    })
}

/// Coordinate descent for `sum (y - Zw)^2 + lambda |w|_1` on centered data.
fn lasso_cd(z: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, max_sweeps: usize, tol: f64) -> Array1<f64> {
    let d = z.ncols();
    let mut w = Array1::<f64>::zeros(d);
    let mut resid = y.to_owned();
    let norms: Vec<f64> = z.axis_iter(Axis(1)).map(|c| c.dot(&c)).collect();
    for _ in 0..max_sweeps {
        let mut max_step = 0.0f64;
        for j in 0..d {
            if norms[j] == 0.0 {
                continue;
            }
            let col = z.column(j);
            let rho = col.dot(&resid) + norms[j] * w[j];
            let half = lambda / 2.0;
            let new = if rho > half {
                (rho - half) / norms[j]
            } else if rho < -half {
                (rho + half) / norms[j]
            } else {
                0.0
            };
            let step = new - w[j];
            if step != 0.0 {
                resid.scaled_add(-step, &col);
                w[j] = new;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < tol {
            break;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub corr_threshold: f64,
    pub lambda: f64,
    pub coef_threshold: f64,
    pub penalty: Penalty,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            corr_threshold: 0.95,
            lambda: 1.0,
            coef_threshold: 0.01,
            penalty: Penalty::L2,
        }
    }
}

/// Persisted selection of raw features with training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRecipe {
    pub manifest_id: String,
    pub raw_dim: usize,
    pub corr_threshold: f64,
    pub lambda: f64,
    pub coef_threshold: f64,
    pub kept_indices: Vec<usize>,
    /// Training mean of each kept feature.
    pub means: Vec<f64>,
    /// Training standard deviation of each kept feature.
    pub stds: Vec<f64>,
}

/// Diagnostics of a recipe build.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTrace {
    pub groups: CorrelationGroups,
    pub coefficients: CoefficientPrune,
}

impl ReductionRecipe {
    /// A recipe keeping every feature.
    pub fn identity(manifest_id: impl Into<String>, raw_dim: usize) -> Self {
        Self {
            manifest_id: manifest_id.into(),
            raw_dim,
            corr_threshold: 1.0,
            lambda: 0.0,
            coef_threshold: 0.0,
            kept_indices: (0..raw_dim).collect(),
            means: vec![0.0; raw_dim],
            stds: vec![1.0; raw_dim],
        }
    }

    pub fn validate(&self) -> Result<(), ReductionError> {
        if self.kept_indices.is_empty() {
            return Err(ReductionError::EmptyRecipe);
        }
        if self.kept_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ReductionError::ManifestMismatch("kept indices must be strictly increasing".into()));
        }
        if *self.kept_indices.last().unwrap() >= self.raw_dim {
            return Err(ReductionError::ManifestMismatch("kept index outside the raw feature range".into()));
        }
        if self.means.len() != self.kept_indices.len() || self.stds.len() != self.kept_indices.len() {
            return Err(ReductionError::ManifestMismatch("statistics do not match kept indices".into()));
        }
        Ok(())
    }

    /// Identifier of the reduced feature space.
    pub fn id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for i in &self.kept_indices {
            for b in (*i as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{}/r-{:08x}", self.manifest_id, h as u32)
    }

    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipe serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ReductionError> {
        let r: Self = serde_json::from_str(s).map_err(|e| ReductionError::ManifestMismatch(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }
}

/// Runs both stages on a raw-feature dataset; statistics come from `ds`
/// alone, so pass the training split.
pub fn build_recipe(ds: &Dataset, cfg: &ReductionConfig) -> Result<(ReductionRecipe, ReductionTrace), ReductionError> {
    if ds.is_empty() {
        return Err(ReductionError::EmptyDataset);
    }
    let x = ds.features();
    let groups = correlation_prune(x.view(), cfg.corr_threshold)?;
    let mut y = Array2::<f64>::zeros((ds.len(), Target::ALL.len()));
    for (k, t) in Target::ALL.into_iter().enumerate() {
        y.column_mut(k).assign(&ds.target(t));
    }
    let coefficients = coefficient_prune(x.view(), y.view(), &groups.survivors, cfg.lambda, cfg.coef_threshold, cfg.penalty)?;
    let kept = coefficients.survivors.clone();
    if kept.is_empty() {
        return Err(ReductionError::EmptyRecipe);
    }
    let stats = Standardizer::fit(x.select(Axis(1), &kept).view());
    let recipe = ReductionRecipe {
        manifest_id: ds.feature_space_id.clone(),
        raw_dim: ds.dim(),
        corr_threshold: cfg.corr_threshold,
        lambda: cfg.lambda,
        coef_threshold: cfg.coef_threshold,
        kept_indices: kept,
        means: stats.means,
        stds: stats.stds,
    };
    Ok((recipe, ReductionTrace { groups, coefficients }))
}

/// Reduced features in recipe order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedFeatureVector {
    pub values: Vec<f64>,
    pub selection: String,
}

pub fn apply(recipe: &ReductionRecipe, v: &RawFeatureVector) -> Result<ReducedFeatureVector, ReductionError> {
    recipe.validate()?;
    if v.manifest_id != recipe.manifest_id {
        return Err(ReductionError::ManifestMismatch(format!(
            "vector from manifest `{}`, recipe expects `{}`",
            v.manifest_id, recipe.manifest_id
        )));
    }
    Ok(ReducedFeatureVector {
        values: project(recipe, &v.values)?,
        selection: recipe.id(),
    })
}

fn project(recipe: &ReductionRecipe, values: &[f64]) -> Result<Vec<f64>, ReductionError> {
    if values.len() != recipe.raw_dim {
        return Err(ReductionError::ManifestMismatch(format!(
            "vector has {} features, recipe expects {}",
            values.len(),
            recipe.raw_dim
        )));
    }
    Ok(recipe.kept_indices.iter().map(|&i| values[i]).collect())
}

/// Projects every sample of a raw-feature dataset.
pub fn apply_dataset(recipe: &ReductionRecipe, ds: &Dataset) -> Result<Dataset, ReductionError> {
    recipe.validate()?;
    if ds.feature_space_id != recipe.manifest_id {
        return Err(ReductionError::ManifestMismatch(format!(
            "dataset in space `{}`, recipe expects `{}`",
            ds.feature_space_id, recipe.manifest_id
        )));
    }
    let mut out = ds.clone();
    for s in &mut out.samples {
        s.features = project(recipe, &s.features)?;
    }
    out.feature_space_id = recipe.id();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use ndarray::Array2;
    use proptest::prelude::*;

    /// Two-pass textbook formula, kept independent of `pearson`.
    fn oracle_r(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        cov / (sx * sy)
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 7.0];
        assert!((pearson(&x, &x).unwrap().r - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap().r + 1.0).abs() < 1e-12);
        // cov = 0.5, var_x = var_y = 1 (sample), so r = 0.5.
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r.r - 0.5).abs() < 1e-12);
        assert!(!r.constant);
    }

    #[test]
    fn pearson_constant_and_errors() {
        let c = pearson(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c, Correlation { r: 0.0, constant: true });
        assert_eq!(pearson(&[1.0], &[1.0]), Err(ReductionError::TooShort));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(ReductionError::LengthMismatch(2, 1)));
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut r = SeededRng::new(seed);
        Array2::from_shape_fn((n, d), |_| r.normal())
    }

    #[test]
    fn correlation_matrix_matches_pairwise() {
        let x = random_matrix(40, 5, 2);
        let (m, constant) = correlation_matrix(x.view());
        assert!(constant.iter().all(|c| !c));
        for i in 0..5 {
            for j in 0..5 {
                let a = x.column(i).to_vec();
                let b = x.column(j).to_vec();
                assert!((m[[i, j]] - oracle_r(&a, &b)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn duplicated_column_collapses() {
        let mut x = random_matrix(50, 4, 3);
        let c1 = x.column(1).to_owned();
        x.column_mut(3).assign(&(&c1 * 2.5 + 1.0));
        let g = correlation_prune(x.view(), 0.95).unwrap();
        assert_eq!(g.survivors, vec![0, 1, 2]);
        assert!(g.groups.contains(&vec![1, 3]));
    }

    #[test]
    fn threshold_contract() {
        let x = random_matrix(10, 2, 1);
        assert!(matches!(correlation_prune(x.view(), 1.0 + 1e-9), Err(ReductionError::InvalidThreshold(_))));
        assert!(matches!(correlation_prune(x.view(), 0.0), Err(ReductionError::InvalidThreshold(_))));
        assert!(correlation_prune(x.view(), 1.0).is_ok());
    }

    #[test]
    fn constant_columns_are_singletons() {
        let mut x = random_matrix(20, 3, 4);
        x.column_mut(0).fill(3.0);
        x.column_mut(2).fill(3.0);
        let g = correlation_prune(x.view(), 0.5).unwrap();
        assert_eq!(g.groups, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn independent_feature_is_pruned_and_target_copy_survives() {
        let n = 20_000;
        let mut r = SeededRng::new(8);
        let x = Array2::from_shape_fn((n, 3), |_| r.normal());
        let mut y = Array2::zeros((n, 1));
        for i in 0..n {
            y[[i, 0]] = x[[i, 0]] + 0.5 * x[[i, 1]] + 0.3 * r.normal();
        }
        // column 2 is independent of the target
        let p = coefficient_prune(x.view(), y.view(), &[0, 1, 2], 1.0, 0.01, Penalty::L2).unwrap();
        assert_eq!(p.survivors, vec![0, 1]);
        assert!(p.max_abs_coef[2] < 0.01);
        let p = coefficient_prune(x.view(), y.view(), &[0, 1, 2], 1.0, 0.01, Penalty::L1).unwrap();
        assert_eq!(p.survivors, vec![0, 1]);
    }

    #[test]
    fn lambda_must_be_positive() {
        let x = random_matrix(10, 2, 1);
        let y = random_matrix(10, 1, 2);
        assert!(matches!(
            coefficient_prune(x.view(), y.view(), &[0, 1], 0.0, 0.01, Penalty::L2),
            Err(ReductionError::InvalidPenalty(_))
        ));
    }

    #[test]
    fn apply_projects_and_checks() {
        let v = RawFeatureVector {
            values: vec![1.0, 2.0, 3.0, 4.0],
            manifest_id: "m".into(),
        };
        let id = ReductionRecipe::identity("m", 4);
        assert_eq!(apply(&id, &v).unwrap().values, v.values);
        let mut r = ReductionRecipe::identity("m", 4);
        r.kept_indices = vec![1, 3];
        r.means = vec![0.0; 2];
        r.stds = vec![1.0; 2];
        assert_eq!(apply(&r, &v).unwrap().values, vec![2.0, 4.0]);
        r.kept_indices.clear();
        r.means.clear();
        r.stds.clear();
        assert_eq!(apply(&r, &v), Err(ReductionError::EmptyRecipe));
        let other = RawFeatureVector {
            values: v.values.clone(),
            manifest_id: "x".into(),
        };
        assert!(matches!(apply(&id, &other), Err(ReductionError::ManifestMismatch(_))));
    }

    #[test]
    fn recipe_json_round_trip() {
        let mut r = ReductionRecipe::identity("m", 3);
        r.means = vec![0.5, 1.25, -3.0];
        let back = ReductionRecipe::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn survivors_shrink_with_threshold(seed in any::<u64>(), t1 in 0.0f64..0.3, t2 in 0.0f64..0.3) {
            let x = random_matrix(60, 6, seed);
            let mut r = SeededRng::new(seed ^ 1);
            let y = Array2::from_shape_fn((60, 2), |(i, k)| x[[i, k]] * 0.7 + 0.2 * x[[i, 4]] + r.normal());
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let cand: Vec<usize> = (0..6).collect();
            let a = coefficient_prune(x.view(), y.view(), &cand, 1.0, lo, Penalty::L2).unwrap().survivors;
            let b = coefficient_prune(x.view(), y.view(), &cand, 1.0, hi, Penalty::L2).unwrap().survivors;
            prop_assert!(b.iter().all(|i| a.contains(i)));
        }

        #[test]
        fn identity_recipe_is_idempotent(values in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
            let n = values.len();
            let v = RawFeatureVector { values: values.clone(), manifest_id: "m".into() };
            let once = apply(&ReductionRecipe::identity("m", n), &v).unwrap();
            let again = apply(&ReductionRecipe::identity("m", n), &RawFeatureVector { values: once.values.clone(), manifest_id: "m".into() }).unwrap();
            prop_assert_eq!(once.values, again.values);
        }
    }
}
