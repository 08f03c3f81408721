//! Discrete AdaBoost over depth-1 stumps.
//!
//! Each round fits the stump minimizing weighted error over every
//! (feature, midpoint threshold, polarity) candidate, weights update by
//! `w <- w * exp(-alpha * y * h(x))`, and boosting halts early on a round
//! with error 0 or when no stump beats 0.5.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::scalar::{logistic, Scalar};

/// Axis-aligned threshold classifier. `polarity = +1` predicts +1 on the
/// right side of the threshold, `-1` on the left; `polarity = -1` flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump<T> {
    pub feature: usize,
    pub threshold: T,
    pub polarity: i8,
}

impl<T: Scalar> Stump<T> {
    /// Prediction in {-1, +1}.
    fn predict(&self, row: &[T]) -> f64 {
        let right = row[self.feature] > self.threshold;
        let sign = if right { 1.0 } else { -1.0 };
        sign * self.polarity as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedStump<T> {
    pub alpha: f64,
    pub stump: Stump<T>,
}

/// Fitted ensemble. A degenerate fit (no stump beats 0.5 at round 1, or a
/// single-class input) stores a constant fallback score instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostState<T> {
    pub rounds: Vec<WeightedStump<T>>,
    pub alpha_sum: f64,
    pub fallback_score: Option<f64>,
}

/// Smallest weighted error an accepted round may report; epsilon = 0 is
/// clamped here so alpha stays finite.
const EPSILON_FLOOR: f64 = 1e-12;

impl<T: Scalar> AdaBoostState<T> {
    pub fn fit(data: &LabeledDataset<T>, n_rounds: usize) -> Result<(AdaBoostState<T>, Vec<String>)> {
        if n_rounds == 0 {
            return Err(Error::Usage("adaboost requires n_rounds >= 1".into()));
        }
        let n = data.n_rows();
        if n == 0 {
            return Err(Error::Data("adaboost requires a non-empty training set".into()));
        }
        let mut warnings = Vec::new();
        let (n_neg, n_pos) = data.class_counts();
        let fraud_fraction = n_pos as f64 / n as f64;
        if n_neg == 0 || n_pos == 0 {
            warnings.push("single-class training set; adaboost degenerates to a constant".into());
            return Ok((
                AdaBoostState { rounds: Vec::new(), alpha_sum: 0.0, fallback_score: Some(fraud_fraction) },
                warnings,
            ));
        }

        // Row order per feature, sorted once; every round scans in O(d * n).
        let d = data.n_cols();
        let sorted: Vec<Vec<usize>> = (0..d)
            .map(|f| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    data.row(a)[f]
                        .partial_cmp(&data.row(b)[f])
                        .expect("finite features")
                });
                order
            })
            .collect();

        let y: Vec<f64> = data.labels().iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let mut weights = vec![1.0 / n as f64; n];
        let mut rounds: Vec<WeightedStump<T>> = Vec::new();

        for _ in 0..n_rounds {
            let Some((stump, epsilon)) = best_stump(data, &sorted, &weights, &y) else {
                // Every feature constant: no candidate thresholds exist.
                break;
            };
            if epsilon >= 0.5 {
                break;
            }
            let eps = epsilon.max(EPSILON_FLOOR);
            let alpha = 0.5 * ((1.0 - eps) / eps).ln();
            let mut total = 0.0;
            for i in 0..n {
                weights[i] *= (-alpha * y[i] * stump.predict(data.row(i))).exp();
                total += weights[i];
            }
            for w in weights.iter_mut() {
                *w /= total;
            }
            rounds.push(WeightedStump { alpha, stump });
            if epsilon == 0.0 {
                break;
            }
        }

        if rounds.is_empty() {
            warnings.push("no stump beat weighted error 0.5 at round 1; constant model".into());
            return Ok((
                AdaBoostState { rounds, alpha_sum: 0.0, fallback_score: Some(fraud_fraction) },
                warnings,
            ));
        }
        let alpha_sum = rounds.iter().map(|r| r.alpha).sum();
        Ok((AdaBoostState { rounds, alpha_sum, fallback_score: None }, warnings))
    }

    /// Ensemble margin sum(alpha_t h_t(x)).
    pub fn margin(&self, row: &[T]) -> f64 {
        self.rounds.iter().map(|r| r.alpha * r.stump.predict(row)).sum()
    }

    /// Margin mapped through the logistic at 2F/sum(alpha), so scores sit
    /// in [0, 1] and predict(x) = [score >= 0.5] = [F >= 0].
    pub fn score_row(&self, row: &[T]) -> T {
        if let Some(fallback) = self.fallback_score {
            return T::from_f64_lossy(fallback);
        }
        let scaled = 2.0 * self.margin(row) / self.alpha_sum;
        T::from_f64_lossy(to_unit(scaled))
    }
}

fn to_unit(x: f64) -> f64 {
    let s = logistic(x);
    s.clamp(0.0, 1.0)
}

/// Exhaustive weighted-error minimization over every feature, boundary
/// between distinct sorted values, and polarity. Ties keep the first
/// candidate in scan order.
fn best_stump<T: Scalar>(
    data: &LabeledDataset<T>,
    sorted: &[Vec<usize>],
    weights: &[f64],
    y: &[f64],
) -> Option<(Stump<T>, f64)> {
    let mut best: Option<(Stump<T>, f64)> = None;
    // Weighted error of the polarity=+1 stump "predict -1 left, +1 right"
    // at the leftmost boundary is: all positives to the left are wrong plus
    // all negatives to the right are wrong.
    let total_pos_weight: f64 = weights
        .iter()
        .zip(y)
        .filter(|&(_, &yy)| yy > 0.0)
        .map(|(&w, _)| w)
        .sum();
    let total_weight: f64 = weights.iter().sum();
    for (feature, order) in sorted.iter().enumerate() {
        let mut left_pos = 0.0;
        let mut left_weight = 0.0;
        for w in 0..order.len() - 1 {
            let i = order[w];
            left_weight += weights[i];
            if y[i] > 0.0 {
                left_pos += weights[i];
            }
            let v = data.row(i)[feature];
            let next = data.row(order[w + 1])[feature];
            if v == next {
                continue;
            }
            // err(+1) = P(left, y=+1) + P(right, y=-1)
            let right_neg = (total_weight - left_weight) - (total_pos_weight - left_pos);
            let err_plus = left_pos + right_neg;
            let err_minus = total_weight - err_plus;
            let half = T::from_f64_lossy(0.5);
            // Midpoint of adjacent floats can round up to `next`; fall back
            // to the lower value so the stump splits at this boundary.
            let mid = v * half + next * half;
            let threshold = if mid < next { mid } else { v };
            for (err, polarity) in [(err_plus, 1i8), (err_minus, -1i8)] {
                if best.as_ref().is_none_or(|(_, b)| err < *b) {
                    best = Some((Stump { feature, threshold, polarity }, err));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RowId;

    fn ds(rows: Vec<(Vec<f64>, bool)>) -> LabeledDataset<f64> {
        let n_cols = rows[0].0.len();
        let columns = (0..n_cols).map(|j| format!("f{j}")).collect();
        let ids = (0..rows.len())
            .map(|i| RowId { claim_id: format!("C{i}"), provider: "P".into() })
            .collect();
        let (data, labels): (Vec<Vec<f64>>, Vec<bool>) = rows.into_iter().unzip();
        LabeledDataset::from_rows(columns, data, labels, ids).unwrap()
    }

    #[test]
    fn separable_data_halts_after_one_perfect_round() {
        let data = ds(vec![
            (vec![-2.0], false),
            (vec![-1.0], false),
            (vec![1.0], true),
            (vec![2.0], true),
        ]);
        let (model, warnings) = AdaBoostState::fit(&data, 50).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(model.rounds.len(), 1);
        for i in 0..data.n_rows() {
            assert_eq!(model.score_row(data.row(i)) >= 0.5, data.labels()[i]);
        }
    }

    /// Four alternating 1-D regions: the smallest stump-representable
    /// problem needing three thresholds. (Any stump sum is antisymmetric in
    /// its extreme regions, so the extremes must carry opposite labels.)
    fn alternating_regions(n_per_region: usize) -> LabeledDataset<f64> {
        ds((0..4 * n_per_region)
            .map(|i| (vec![i as f64], (i / n_per_region) % 2 == 1))
            .collect())
    }

    #[test]
    fn interval_labels_need_three_stumps_and_loss_decreases() {
        let data = alternating_regions(10);
        let (model, _) = AdaBoostState::fit(&data, 60).unwrap();
        let mut thresholds: Vec<f64> = model.rounds.iter().map(|r| r.stump.threshold).collect();
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thresholds.dedup();
        assert!(thresholds.len() >= 3, "used thresholds: {thresholds:?}");
        // Exponential loss is non-increasing across ensemble prefixes.
        let y: Vec<f64> = data.labels().iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let mut prev = f64::INFINITY;
        for prefix in 1..=model.rounds.len() {
            let loss: f64 = (0..data.n_rows())
                .map(|i| {
                    let f: f64 = model.rounds[..prefix]
                        .iter()
                        .map(|r| r.alpha * r.stump.predict(data.row(i)))
                        .sum();
                    (-y[i] * f).exp()
                })
                .sum();
            assert!(loss <= prev + 1e-9, "loss increased: {prev} -> {loss}");
            prev = loss;
        }
        // Fits the training data exactly once boosting finishes.
        for i in 0..data.n_rows() {
            assert_eq!(model.score_row(data.row(i)) >= 0.5, data.labels()[i]);
        }
    }

    #[test]
    fn each_round_matches_exhaustive_stump_oracle() {
        // Replay boosting with an independent naive search: at every round
        // the accepted stump's weighted error must equal the oracle minimum.
        let data = alternating_regions(5);
        let (model, _) = AdaBoostState::fit(&data, 12).unwrap();
        let n = data.n_rows();
        let y: Vec<f64> = data.labels().iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let mut w = vec![1.0 / n as f64; n];
        for round in &model.rounds {
            let oracle_best = oracle_min_error(&data, &w, &y);
            let chosen: f64 = (0..n)
                .filter(|&i| round.stump.predict(data.row(i)) != y[i])
                .map(|i| w[i])
                .sum();
            assert!(
                (chosen - oracle_best).abs() < 1e-9,
                "round stump error {chosen} vs oracle {oracle_best}"
            );
            let mut total = 0.0;
            for i in 0..n {
                w[i] *= (-round.alpha * y[i] * round.stump.predict(data.row(i))).exp();
                total += w[i];
            }
            for wi in w.iter_mut() {
                *wi /= total;
            }
        }
    }

    fn oracle_min_error(data: &LabeledDataset<f64>, w: &[f64], y: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for feature in 0..data.n_cols() {
            let mut values: Vec<f64> = (0..data.n_rows()).map(|i| data.row(i)[feature]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for pair in values.windows(2) {
                let thr = (pair[0] + pair[1]) / 2.0;
                for polarity in [1i8, -1i8] {
                    let stump = Stump { feature, threshold: thr, polarity };
                    let err: f64 = (0..data.n_rows())
                        .filter(|&i| stump.predict(data.row(i)) != y[i])
                        .map(|i| w[i])
                        .sum();
                    best = best.min(err);
                }
            }
        }
        best
    }

    #[test]
    fn every_accepted_round_has_epsilon_below_half() {
        let rows: Vec<(Vec<f64>, bool)> = (0..30)
            .map(|i| (vec![(i % 7) as f64, (i % 5) as f64], i % 3 == 0))
            .collect();
        let data = ds(rows);
        let (model, _) = AdaBoostState::fit(&data, 25).unwrap();
        // alpha > 0 <=> epsilon < 0.5 for every accepted round.
        for r in &model.rounds {
            assert!(r.alpha > 0.0);
        }
    }

    #[test]
    fn constant_features_degenerate_to_constant_model() {
        let data = ds(vec![
            (vec![3.0], false),
            (vec![3.0], true),
            (vec![3.0], true),
        ]);
        let (model, warnings) = AdaBoostState::fit(&data, 10).unwrap();
        assert_eq!(warnings.len(), 1);
        let score = model.score_row(&[3.0]);
        assert!((score - 2.0 / 3.0).abs() < 1e-12);
    }
}
