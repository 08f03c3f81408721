//! Exact k-nearest-neighbor classification over the stored training
//! matrix. No index structure; queries scan all rows with a bounded heap,
//! parallelized across query rows.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Fitted KNN state: the training matrix, flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnState<T> {
    pub k: usize,
    pub n_cols: usize,
    pub values: Vec<T>,
    pub labels: Vec<bool>,
}

struct Neighbor<T> {
    d2: T,
    idx: usize,
}

impl<T: Scalar> PartialEq for Neighbor<T> {
    fn eq(&self, other: &Self) -> bool {
        self.d2 == other.d2 && self.idx == other.idx
    }
}
impl<T: Scalar> Eq for Neighbor<T> {}
impl<T: Scalar> PartialOrd for Neighbor<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Neighbor<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Distance ties break toward the lower row index.
        self.d2
            .partial_cmp(&other.d2)
            .expect("finite distances")
            .then_with(|| self.idx.cmp(&other.idx))
    }
}

impl<T: Scalar> KnnState<T> {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Fraud fraction among the k nearest training rows (Euclidean).
    pub fn score_row(&self, row: &[T]) -> T {
        let mut heap: BinaryHeap<Neighbor<T>> = BinaryHeap::with_capacity(self.k + 1);
        for idx in 0..self.n_rows() {
            let mut d2 = T::zero();
            for (a, b) in row.iter().zip(self.row(idx)) {
                let diff = *a - *b;
                d2 += diff * diff;
            }
            let candidate = Neighbor { d2, idx };
            if heap.len() < self.k {
                heap.push(candidate);
            } else if candidate < *heap.peek().expect("non-empty heap") {
                heap.pop();
                heap.push(candidate);
            }
        }
        let votes = heap.iter().filter(|n| self.labels[n.idx]).count();
        T::from_count(votes) / T::from_count(self.k)
    }
}
