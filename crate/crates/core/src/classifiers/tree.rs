//! CART binary trees: greedy splits minimizing weighted Gini impurity,
//! numeric thresholds at midpoints between consecutive distinct sorted
//! values, leaf score = fraud fraction of the leaf's rows.
//!
//! One builder serves both the standalone decision tree (all features,
//! no bootstrap) and the forest (per-split random feature subsets), so the
//! single-tree reduction is exact by construction.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::scalar::Scalar;

/// Growth limits and split sampling for one tree.
#[derive(Debug, Clone)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// `None` (or >= feature count) considers every feature at each split,
    /// in natural column order.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node<T> {
    Leaf {
        score: T,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// A fitted CART tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

/// Gini impurity of a node with `pos` positives out of `n`.
fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}

struct BestSplit<T> {
    weighted_gini: f64,
    feature: usize,
    threshold: T,
}

impl<T: Scalar> Tree<T> {
    /// Grows a tree over `indices` (row indices into `data`, duplicates
    /// allowed for bootstrap samples). The RNG drives per-split feature
    /// sampling and is only consulted when a strict subset is requested.
    pub fn fit(
        data: &LabeledDataset<T>,
        indices: &[usize],
        params: &TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> Tree<T> {
        let mut tree = Tree { nodes: Vec::new() };
        let root_rows: Vec<usize> = indices.to_vec();
        tree.nodes.push(Node::Leaf { score: T::zero() });
        // (node slot, rows, depth) work stack; children are created depth-first.
        let mut stack = vec![(0usize, root_rows, 0usize)];
        while let Some((slot, rows, depth)) = stack.pop() {
            let n = rows.len();
            let pos = rows.iter().filter(|&&i| data.labels()[i]).count();
            let score = T::from_count(pos) / T::from_count(n);
            let pure = pos == 0 || pos == n;
            let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_capped || n < params.min_samples_split {
                tree.nodes[slot] = Node::Leaf { score };
                continue;
            }
            match Self::best_split(data, &rows, params, rng) {
                None => {
                    // No feature separates these rows; forced leaf.
                    tree.nodes[slot] = Node::Leaf { score };
                }
                Some(best) => {
                    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                        .iter()
                        .partition(|&&i| data.row(i)[best.feature] <= best.threshold);
                    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
                    let left = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { score: T::zero() });
                    let right = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { score: T::zero() });
                    tree.nodes[slot] = Node::Split {
                        feature: best.feature,
                        threshold: best.threshold,
                        left,
                        right,
                    };
                    stack.push((left, left_rows, depth + 1));
                    stack.push((right, right_rows, depth + 1));
                }
            }
        }
        tree
    }

    /// Greedy minimum-weighted-Gini split over the candidate features.
    /// Ties keep the first candidate in scan order (feature order, then
    /// ascending threshold), which makes fits deterministic.
    fn best_split(
        data: &LabeledDataset<T>,
        rows: &[usize],
        params: &TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> Option<BestSplit<T>> {
        let d = data.n_cols();
        let candidates: Vec<usize> = match params.features_per_split {
            Some(k) if k < d => {
                let mut all: Vec<usize> = (0..d).collect();
                all.shuffle(rng);
                let mut subset = all[..k.max(1)].to_vec();
                subset.sort_unstable();
                subset
            }
            _ => (0..d).collect(),
        };

        let n = rows.len() as f64;
        let total_pos = rows.iter().filter(|&&i| data.labels()[i]).count() as f64;
        let mut best: Option<BestSplit<T>> = None;
        let mut scratch: Vec<(T, bool)> = Vec::with_capacity(rows.len());

        for &feature in &candidates {
            scratch.clear();
            scratch.extend(
                rows.iter()
                    .map(|&i| (data.row(i)[feature], data.labels()[i])),
            );
            scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left_n = 0.0;
            let mut left_pos = 0.0;
            for w in 0..scratch.len() - 1 {
                left_n += 1.0;
                if scratch[w].1 {
                    left_pos += 1.0;
                }
                let (v, next) = (scratch[w].0, scratch[w + 1].0);
                if v == next {
                    continue;
                }
                let right_n = n - left_n;
                let right_pos = total_pos - left_pos;
                let weighted =
                    (left_n * gini(left_pos, left_n) + right_n * gini(right_pos, right_n)) / n;
                if best.as_ref().is_none_or(|b| weighted < b.weighted_gini) {
                    let half = T::from_f64_lossy(0.5);
                    // Midpoint of adjacent floats can round up to `next`,
                    // which would leave the right side empty; fall back to
                    // the lower value, which always separates.
                    let mid = v * half + next * half;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(BestSplit {
                        weighted_gini: weighted,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }

    /// Fraud fraction of the leaf this row lands in.
    pub fn score_row(&self, row: &[T]) -> T {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { score } => return *score,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
