//! Bagged CART regression trees with variance-reduction splits.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means one third of the features.
    pub feature_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 2,
            feature_subsample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Impurity-decrease importances, non-negative, summing to 1.
    pub importances: Vec<f64>,
}

impl Forest {
    /// Arithmetic mean of the tree outputs, summed in tree order.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    p: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    rng: SeededRng,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len() as f64;
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n;
        self.nodes.push(Node::Leaf { value: mean });
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if pure || idx.len() < 2 * self.p.min_samples_leaf || self.p.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some((feature, threshold, gain)) = self.best_split(idx, sum) else {
            return id;
        };
        self.importance[feature] += gain;
        let mut split = 0;
        for k in 0..idx.len() {
            if self.x[idx[k]][feature] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, idx: &[usize], total: f64) -> Option<(usize, f64, f64)> {
        let d = self.x[0].len();
        let mut feats: Vec<usize> = (0..d).collect();
        for k in 0..self.mtry.min(d) {
            let j = k + self.rng.below(d - k);
            feats.swap(k, j);
        }
        let n = idx.len();
        let leaf = self.p.min_samples_leaf;
        let base = total * total / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &f in &feats[..self.mtry.min(d)] {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            let mut left = 0.0;
            for k in 1..n {
                left += pairs[k - 1].1;
                if k < leaf || n - k < leaf || pairs[k - 1].0 == pairs[k].0 {
                    continue;
                }
                let right = total - left;
                let score = left * left / k as f64 + right * right / (n - k) as f64;
                let gain = score - base;
                if best.is_none_or(|b| gain > b.2) {
                    let (a, b) = (pairs[k - 1].0, pairs[k].0);
                    let mid = 0.5 * (a + b);
                    let thr = if mid < b { mid } else { a };
                    best = Some((f, thr, gain));
                }
            }
        }
        best.filter(|b| b.2 > 0.0)
    }
}

fn build_tree(x: &[Vec<f64>], y: &[f64], p: &ForestParams, mtry: usize, tree_index: usize) -> (Tree, Vec<f64>) {
    let mut rng = SeededRng::derive(p.seed, tree_index as u64);
    let n = y.len();
    let mut idx: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
    let mut b = Builder {
        x,
        y,
        p,
        mtry,
        nodes: Vec::new(),
        importance: vec![0.0; x[0].len()],
        rng,
    };
    b.build(&mut idx, 0);
    (Tree { nodes: b.nodes }, b.importance)
}

/// Trains a forest; feature scaling is irrelevant to the splits.
pub fn train(x: ArrayView2<f64>, y: ArrayView1<f64>, p: &ForestParams) -> Forest {
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let y = y.to_vec();
    let d = x.ncols();
    let mtry = p.feature_subsample.unwrap_or((d / 3).max(1)).min(d).max(1);
    let built: Vec<(Tree, Vec<f64>)> = (0..p.n_trees)
        .into_par_iter()
        .map(|t| build_tree(&rows, &y, p, mtry, t))
        .collect();
    let mut importances = vec![0.0; d];
    for (_, imp) in &built {
        let s: f64 = imp.iter().sum();
        if s > 0.0 {
            for (a, v) in importances.iter_mut().zip(imp) {
                *a += v / s;
            }
        }
    }
    let s: f64 = importances.iter().sum();
    if s > 0.0 {
        importances.iter_mut().for_each(|v| *v /= s);
    } else {
        importances = vec![1.0 / d as f64; d];
    }
    Forest {
        trees: built.into_iter().map(|(t, _)| t).collect(),
        importances,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, LearnerSpec};
    use ndarray::{array, Array1, Array2};

    fn toy() -> (Array2<f64>, Array1<f64>) {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64 + 0.1 * j as f64);
        let y = x.rows().into_iter().map(|r| r[0] * 2.0 + (r[1] > 8.0) as u8 as f64 * 5.0).collect();
        (x, y)
    }

    #[test]
    fn single_deep_tree_memorizes() {
        let (x, y) = toy();
        let p = ForestParams {
            n_trees: 1,
            min_samples_leaf: 1,
            feature_subsample: Some(3),
            ..ForestParams::default()
        };
        // Without bootstrap duplicates the tree must reproduce every unique row.
        let f = train(x.view(), y.view(), &p);
        let mut seen = std::collections::HashSet::new();
        let mut rng = SeededRng::derive(0, 0);
        for _ in 0..40 {
            seen.insert(rng.below(40));
        }
        for i in seen {
            assert_eq!(f.predict_row(&x.row(i).to_vec()), y[i]);
        }
    }

    #[test]
    fn constant_target_predicts_constant() {
        let (x, _) = toy();
        let y = Array1::from_elem(40, 4.25);
        let f = train(x.view(), y.view(), &ForestParams::default());
        assert_eq!(f.predict_row(&[100.0, -3.0, 2.0]), 4.25);
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        assert!((f.importances.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forest_output_is_mean_of_trees() {
        let (x, y) = toy();
        let spec = LearnerSpec::RandomForest(ForestParams {
            n_trees: 3,
            seed: 8,
            ..ForestParams::default()
        });
        let m = fit(&spec, x.view(), y.view()).unwrap();
        for row in x.rows() {
            let v = row.to_vec();
            let trees = m.tree_predictions(&v).unwrap();
            assert_eq!(m.predict_row(&v).unwrap(), trees.iter().sum::<f64>() / 3.0);
        }
    }

    #[test]
    fn importances_are_a_distribution_favoring_signal() {
        let (x, y) = toy();
        let f = train(x.view(), y.view(), &ForestParams::default());
        assert!(f.importances.iter().all(|v| *v >= 0.0));
        assert!((f.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(f.importances[0] > f.importances[2]);
    }

    #[test]
    fn max_depth_and_leaf_size_are_respected() {
        let (x, y) = toy();
        let p = ForestParams {
            n_trees: 4,
            max_depth: Some(2),
            ..ForestParams::default()
        };
        let f = train(x.view(), y.view(), &p);
        assert!(f.trees.iter().all(|t| t.depth() <= 2));
        let x1 = array![[0.0], [1.0], [2.0]];
        let p = ForestParams {
            n_trees: 1,
            min_samples_leaf: 2,
            ..ForestParams::default()
        };
        let f = train(x1.view(), array![0.0, 1.0, 2.0].view(), &p);
        assert_eq!(f.trees[0].nodes.len(), 1);
    }
}
