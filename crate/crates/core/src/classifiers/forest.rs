//! Random forest of CART trees: bootstrap rows, per-split random feature
//! subsets, score = mean of leaf scores across trees.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeParams};
use crate::dataset::LabeledDataset;
use crate::features::seeded_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestState<T> {
    pub trees: Vec<Tree<T>>,
}

/// Forest fit controls; `features_per_split = None` means round(sqrt(d)).
#[derive(Debug, Clone)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl<T: Scalar> ForestState<T> {
    /// Fits `n_trees` trees. Tree t draws its bootstrap sample and split
    /// features from an RNG stream keyed by (seed, t), so the fit is
    /// byte-identical regardless of thread count.
    pub fn fit(data: &LabeledDataset<T>, params: &ForestParams, seed: u64) -> ForestState<T> {
        let n = data.n_rows();
        let d = data.n_cols();
        let features = params
            .features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().round().max(1.0) as usize)
            .min(d);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            features_per_split: Some(features),
        };
        let trees: Vec<Tree<T>> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                use rand::RngExt;
                let mut rng = seeded_rng(seed, t as u64);
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                Tree::fit(data, &indices, &tree_params, &mut rng)
            })
            .collect();
        ForestState { trees }
    }

    /// Arithmetic mean of the trees' leaf scores.
    pub fn score_row(&self, row: &[T]) -> T {
        let sum = self
            .trees
            .iter()
            .map(|t| t.score_row(row))
            .fold(T::zero(), |acc, v| acc + v);
        sum / T::from_count(self.trees.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RowId;

    fn blobs(n_per: usize) -> LabeledDataset<f64> {
        // Two linearly separable 2-D blobs on a deterministic lattice.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per {
            let dx = (i % 10) as f64 * 0.1;
            let dy = (i / 10) as f64 * 0.1;
            rows.push(vec![-2.0 + dx, -2.0 + dy]);
            labels.push(false);
            rows.push(vec![2.0 + dx, 2.0 + dy]);
            labels.push(true);
        }
        let ids = (0..rows.len())
            .map(|i| RowId { claim_id: format!("C{i}"), provider: "P".into() })
            .collect();
        LabeledDataset::from_rows(vec!["x".into(), "y".into()], rows, labels, ids).unwrap()
    }

    #[test]
    fn forest_score_is_mean_of_tree_scores() {
        let data = blobs(30);
        let params = ForestParams {
            n_trees: 7,
            max_depth: Some(3),
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
        };
        let forest = ForestState::fit(&data, &params, 42);
        let row = data.row(5);
        let mean = forest.trees.iter().map(|t| t.score_row(row)).sum::<f64>() / 7.0;
        assert!((forest.score_row(row) - mean).abs() < 1e-12);
    }

    #[test]
    fn separable_blobs_fit_cleanly() {
        let data = blobs(100);
        let params = ForestParams {
            n_trees: 20,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
        };
        let forest = ForestState::fit(&data, &params, 7);
        let correct = (0..data.n_rows())
            .filter(|&i| (forest.score_row(data.row(i)) >= 0.5) == data.labels()[i])
            .count();
        assert!(correct as f64 / data.n_rows() as f64 >= 0.99);
    }

    #[test]
    fn fit_is_deterministic_for_fixed_seed() {
        let data = blobs(20);
        let params = ForestParams {
            n_trees: 9,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: Some(1),
            bootstrap: true,
        };
        let a = ForestState::fit(&data, &params, 99);
        let b = ForestState::fit(&data, &params, 99);
        assert_eq!(a, b);
    }
}
