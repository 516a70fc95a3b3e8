//! K-fold cross-validated hyperparameter search.

use ndarray::{ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, LearnerError, LearnerSpec};
use crate::dataset::kfold;
use crate::evaluation::relative_rmse_nonzero;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub spec: LearnerSpec,
    /// Mean validation relative RMSE (%) over folds; `None` if the cell failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_index: usize,
    pub best: LearnerSpec,
    pub cells: Vec<GridCell>,
}

fn cv_score(spec: &LearnerSpec, x: ArrayView2<f64>, y: ArrayView1<f64>, folds: &[crate::dataset::Fold]) -> Result<f64, LearnerError> {
    let mut total = 0.0;
    let mut scored = 0;
    for f in folds {
        let m = fit(spec, x.select(Axis(0), &f.train).view(), y.select(Axis(0), &f.train).view())?;
        let pred = m.predict(x.select(Axis(0), &f.validation).view())?;
        let actual = y.select(Axis(0), &f.validation);
        if let (Some(r), _) = relative_rmse_nonzero(pred.as_slice().unwrap(), actual.as_slice().unwrap()) {
            total += r;
            scored += 1;
        }
    }
    if scored == 0 {
        return Err(LearnerError::Grid("no fold has a non-zero target".into()));
    }
    Ok(total / scored as f64)
}

/// Scores every spec by k-fold CV and returns the argmin; ties go to the
/// lowest grid index. Failing cells are recorded, not fatal.
pub fn grid_search(x: ArrayView2<f64>, y: ArrayView1<f64>, grid: &[LearnerSpec], k: usize, seed: u64) -> Result<GridResult, LearnerError> {
    if grid.is_empty() {
        return Err(LearnerError::Grid("empty grid".into()));
    }
    let folds = kfold(x.nrows(), k, seed).map_err(|e| LearnerError::Grid(e.to_string()))?;
    let cells: Vec<GridCell> = grid
        .par_iter()
        .enumerate()
        .map(|(index, spec)| match cv_score(spec, x, y, &folds) {
            Ok(s) => GridCell {
                index,
                spec: spec.clone(),
                score: Some(s),
                error: None,
            },
            Err(e) => GridCell {
                index,
                spec: spec.clone(),
                score: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for c in &cells {
        if let Some(s) = c.score {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((c.index, s));
            }
        }
    }
    let (best_index, _) = best.ok_or_else(|| LearnerError::Grid("every grid cell failed".into()))?;
    Ok(GridResult {
        best_index,
        best: grid[best_index].clone(),
        cells,
    })
}
