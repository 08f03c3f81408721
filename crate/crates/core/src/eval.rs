//! Evaluation: confusion matrices, accuracy/precision/recall/F1, ROC
//! curves with trapezoidal AUC, and descriptive column statistics
//! (count/mean/std/quantiles/histogram).
//!
//! Conventions: fraud is the positive class; report display rounds to
//! three decimals half-to-even while JSON keeps full precision; ROC ties
//! are grouped into single steps so the trapezoid equals the
//! Mann-Whitney statistic exactly.

use serde::{Deserialize, Serialize};

use crate::classifiers::{ModelKind, TrainedModel};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Counts of one evaluation pass; fraud = positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Builds the confusion matrix from parallel label/prediction vectors.
pub fn confusion(y_true: &[bool], y_pred: &[bool]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Usage(format!(
            "label/prediction length mismatch: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix { tp: 0, tn: 0, fp: 0, fn_: 0 };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Accuracy/precision/recall/F1 with explicit zero-denominator flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when tp + fp = 0 and precision was defined to 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    /// True when tp + fn = 0 and recall was defined to 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
}

/// Derives the metric set from a confusion matrix.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Usage("metrics of an empty confusion matrix".into()));
    }
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision_undefined = cm.tp + cm.fp == 0;
    let recall_undefined = cm.tp + cm.fn_ == 0;
    let precision = if precision_undefined {
        0.0
    } else {
        cm.tp as f64 / (cm.tp + cm.fp) as f64
    };
    let recall = if recall_undefined {
        0.0
    } else {
        cm.tp as f64 / (cm.tp + cm.fn_) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricSet { accuracy, precision, recall, f1, precision_undefined, recall_undefined })
}

/// Display rounding used in report tables: three decimals, half to even.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round_ties_even() / 1000.0
}

/// ROC curve: (fpr, tpr) points from (0,0) to (1,1) plus trapezoidal AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps thresholds over distinct score values descending, tied scores
/// grouped into single steps.
pub fn roc<T: Scalar>(y_true: &[bool], scores: &[T]) -> Result<RocCurve> {
    if y_true.len() != scores.len() {
        return Err(Error::Usage(format!(
            "label/score length mismatch: {} vs {}",
            y_true.len(),
            scores.len()
        )));
    }
    let pos = y_true.iter().filter(|&&t| t).count();
    let neg = y_true.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("ROC requires at least one row of each class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then_with(|| a.cmp(&b))
    });

    let p = pos as f64;
    let n = neg as f64;
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        // One step per group of tied scores.
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if y_true[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((fp as f64 / n, tp as f64 / p));
        i = j;
    }
    debug_assert_eq!(points.last(), Some(&(1.0, 1.0)));

    let mut auc = 0.0;
    for pair in points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Ok(RocCurve { points, auc })
}

/// Descriptive statistics of one numeric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub count: u64,
    pub mean: f64,
    /// Sample standard deviation (N-1 divisor); 0 for a single value.
    pub std: f64,
    pub min: f64,
    /// (percent, value) at 1/5/25/50/75/95/99, linear interpolation
    /// between order statistics.
    pub quantiles: Vec<(f64, f64)>,
    pub max: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// bin count + 1 edges; constant columns collapse to one bin.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub const QUANTILE_PERCENTS: [f64; 7] = [1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0];
const HISTOGRAM_BINS: usize = 20;

/// Single-pass Welford accumulation for mean/std, plus sorted-order
/// quantiles and a fixed-width histogram.
pub fn describe<T: Scalar>(values: &[T]) -> Result<ColumnStats> {
    if values.is_empty() {
        return Err(Error::Usage("describe of an empty column".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("describe requires finite values".into()));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, v) in values.iter().enumerate() {
        let x = v.to_f64().expect("finite scalar");
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = values.len();
    let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };

    let mut sorted: Vec<f64> = values.iter().map(|v| v.to_f64().expect("finite")).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let min = sorted[0];
    let max = sorted[n - 1];
    let quantiles = QUANTILE_PERCENTS
        .iter()
        .map(|&pct| {
            let h = (n - 1) as f64 * pct / 100.0;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = h - lo as f64;
            (pct, sorted[lo] + frac * (sorted[hi] - sorted[lo]))
        })
        .collect();

    let histogram = if min == max {
        Histogram { edges: vec![min, max], counts: vec![n as u64] }
    } else {
        let bins = HISTOGRAM_BINS.min(n);
        let width = (max - min) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|b| min + width * b as f64).collect();
        let mut counts = vec![0u64; bins];
        for &x in &sorted {
            let mut b = ((x - min) / width) as usize;
            if b >= bins {
                b = bins - 1; // max lands in the last bin
            }
            counts[b] += 1;
        }
        Histogram { edges, counts }
    };

    Ok(ColumnStats { count: n as u64, mean, std, min, quantiles, max, histogram })
}

/// Per-split counts carried through reports for the purity assertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub negatives: usize,
    pub positives: usize,
}

impl ClassCounts {
    pub fn of<T: Scalar>(ds: &LabeledDataset<T>) -> Self {
        let (negatives, positives) = ds.class_counts();
        ClassCounts { negatives, positives }
    }

    pub fn total(&self) -> usize {
        self.negatives + self.positives
    }
}

/// Metrics + confusion matrix for one model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub metrics: MetricSet,
    pub confusion: ConfusionMatrix,
}

/// Everything reported for one model: both splits plus the validation ROC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub kind: ModelKind,
    pub train: SplitEval,
    pub validation: SplitEval,
    pub roc: RocCurve,
}

/// Scores one model on both splits. Validation metrics are computed on the
/// un-resampled rows the split produced; the caller passes those original
/// counts and this function refuses to proceed if they do not match.
pub fn evaluate_model<T: Scalar>(
    model: &TrainedModel<T>,
    train: &LabeledDataset<T>,
    validation: &LabeledDataset<T>,
    fitstate_fingerprint: &str,
    expected_validation: Option<ClassCounts>,
) -> Result<ModelEval> {
    model.check_fingerprint(fitstate_fingerprint)?;
    if let Some(expected) = expected_validation {
        let actual = ClassCounts::of(validation);
        if actual != expected {
            return Err(Error::Data(format!(
                "validation purity violated: split recorded {expected:?}, evaluating {actual:?}"
            )));
        }
    }
    let half = T::from_f64_lossy(0.5);
    let split_eval = |ds: &LabeledDataset<T>| -> Result<(SplitEval, Vec<T>)> {
        let scores = model.score_matrix(ds)?;
        let preds: Vec<bool> = scores.iter().map(|&s| s >= half).collect();
        let cm = confusion(ds.labels(), &preds)?;
        Ok((SplitEval { metrics: metrics(&cm)?, confusion: cm }, scores))
    };
    let (train_eval, _) = split_eval(train)?;
    let (val_eval, val_scores) = split_eval(validation)?;
    let roc_curve = roc(validation.labels(), &val_scores)?;
    Ok(ModelEval {
        kind: model.kind,
        train: train_eval,
        validation: val_eval,
        roc: roc_curve,
    })
}

/// Evaluates several models against the same splits.
pub fn evaluate<T: Scalar>(
    models: &[TrainedModel<T>],
    train: &LabeledDataset<T>,
    validation: &LabeledDataset<T>,
    fitstate_fingerprint: &str,
    expected_validation: Option<ClassCounts>,
) -> Result<Vec<ModelEval>> {
    models
        .iter()
        .map(|m| evaluate_model(m, train, validation, fitstate_fingerprint, expected_validation))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Validation confusion matrices of the five reference models
    /// (fraud-positive, 55,671 rows, 21,311 positives).
    pub fn reference_matrices() -> Vec<(ModelKind, ConfusionMatrix, [f64; 4])> {
        vec![
            (
                ModelKind::RandomForest,
                ConfusionMatrix { tp: 21_281, tn: 33_703, fp: 657, fn_: 30 },
                [0.988, 0.970, 0.999, 0.984],
            ),
            (
                ModelKind::DecisionTree,
                ConfusionMatrix { tp: 21_310, tn: 32_305, fp: 2_055, fn_: 1 },
                [0.963, 0.912, 1.000, 0.954],
            ),
            (
                ModelKind::Knn,
                ConfusionMatrix { tp: 18_149, tn: 25_946, fp: 8_414, fn_: 3_162 },
                [0.792, 0.683, 0.852, 0.758],
            ),
            (
                ModelKind::AdaBoost,
                ConfusionMatrix { tp: 17_661, tn: 27_515, fp: 6_845, fn_: 3_650 },
                [0.811, 0.721, 0.829, 0.771],
            ),
            (
                ModelKind::Lda,
                ConfusionMatrix { tp: 3_546, tn: 31_669, fp: 2_691, fn_: 17_765 },
                [0.633, 0.569, 0.166, 0.257],
            ),
        ]
    }

    #[test]
    fn confusion_counts_basic_cases() {
        let cm = confusion(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, tn: 1, fp: 1, fn_: 1 });

        let all_ones = confusion(&[true; 4], &[true; 4]).unwrap();
        assert_eq!(all_ones, ConfusionMatrix { tp: 4, tn: 0, fp: 0, fn_: 0 });

        let perfect = confusion(&[true, false], &[true, false]).unwrap();
        assert_eq!(perfect.fp + perfect.fn_, 0);

        assert!(confusion(&[true], &[true, false]).is_err());
    }

    #[test]
    fn reference_validation_rows_reproduce_at_three_decimals() {
        for (kind, cm, expected) in reference_matrices() {
            assert_eq!(cm.total(), 55_671, "{kind:?} cell sum");
            assert_eq!(cm.tp + cm.fn_, 21_311, "{kind:?} positives");
            let m = metrics(&cm).unwrap();
            let got = [round3(m.accuracy), round3(m.precision), round3(m.recall), round3(m.f1)];
            assert_eq!(got, expected, "{kind:?}");
        }
    }

    #[test]
    fn metric_zero_denominator_conventions() {
        // No predicted positives: precision flagged.
        let cm = ConfusionMatrix { tp: 0, tn: 3, fp: 0, fn_: 2 };
        let m = metrics(&cm).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.precision_undefined);
        assert!(!m.recall_undefined);
        // No actual positives: recall flagged.
        let cm = ConfusionMatrix { tp: 0, tn: 3, fp: 2, fn_: 0 };
        let m = metrics(&cm).unwrap();
        assert!(m.recall_undefined);
        // Empty matrix errors.
        let cm = ConfusionMatrix { tp: 0, tn: 0, fp: 0, fn_: 0 };
        assert!(metrics(&cm).is_err());
    }

    #[test]
    fn perfect_matrix_gives_all_ones() {
        let cm = ConfusionMatrix { tp: 5, tn: 7, fp: 0, fn_: 0 };
        let m = metrics(&cm).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn f1_between_precision_and_recall() {
        let cm = ConfusionMatrix { tp: 30, tn: 50, fp: 10, fn_: 20 };
        let m = metrics(&cm).unwrap();
        let lo = m.precision.min(m.recall);
        let hi = m.precision.max(m.recall);
        assert!(m.f1 >= lo && m.f1 <= hi);
        // Harmonic identity.
        assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-15);
    }

    #[test]
    fn round3_is_half_to_even() {
        assert_eq!(round3(0.9985), 0.998);
        assert_eq!(round3(0.9995), 1.000);
        assert_eq!(round3(0.1235), 0.124);
        assert_eq!(round3(0.6325), 0.632);
    }

    #[test]
    fn roc_perfect_and_tied_rankings() {
        let curve = roc(&[true, false], &[0.9, 0.1]).unwrap();
        assert_eq!(curve.auc, 1.0);
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));

        let tied = roc(&[true, false], &[0.5, 0.5]).unwrap();
        assert_eq!(tied.auc, 0.5);
        // One grouped step straight to (1, 1).
        assert_eq!(tied.points.len(), 2);
    }

    #[test]
    fn roc_rejects_single_class() {
        assert!(roc(&[true, true], &[0.5, 0.2]).is_err());
    }

    /// All-pairs Mann-Whitney oracle with half-weighted ties.
    pub fn mann_whitney(y: &[bool], scores: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            if !yi {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                if yj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn trapezoid_auc_equals_mann_whitney_on_random_instances() {
        use rand::RngExt;
        let mut rng = crate::features::seeded_rng(2024, 0);
        for case in 0..100 {
            let n = 2 + rng.random_range(0..98);
            let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            // Force both classes.
            y[0] = true;
            if y.iter().all(|&v| v) {
                y[n - 1] = false;
            }
            // Coarse grid scores produce plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 7.0).collect();
            let curve = roc(&y, &scores).unwrap();
            let oracle = mann_whitney(&y, &scores);
            assert!(
                (curve.auc - oracle).abs() < 1e-12,
                "case {case}: trapezoid {} vs oracle {}",
                curve.auc,
                oracle
            );
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform_and_reversal() {
        use rand::RngExt;
        let mut rng = crate::features::seeded_rng(7, 1);
        let n = 60;
        let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        y[0] = true;
        y[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let base = roc(&y, &scores).unwrap().auc;
        // Strictly increasing transform.
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() / 10.0).collect();
        let w = roc(&y, &warped).unwrap().auc;
        assert!((base - w).abs() < 1e-12);
        // Distinct scores almost surely; reversal flips the area.
        let reversed: Vec<f64> = scores.iter().map(|s| -s).collect();
        let r = roc(&y, &reversed).unwrap().auc;
        assert!((r - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn describe_matches_small_cases() {
        let s = describe(&[1.0f64, 2.0, 3.0]).unwrap();
        assert_eq!(s.count, 3);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 3.0);
        let median = s.quantiles.iter().find(|(p, _)| *p == 50.0).unwrap().1;
        assert_eq!(median, 2.0);

        let c = describe(&[5.0f64; 9]).unwrap();
        assert_eq!(c.std, 0.0);
        assert!(c.quantiles.iter().all(|&(_, v)| v == 5.0));
        assert_eq!(c.histogram.counts, vec![9]);

        assert!(describe::<f64>(&[]).is_err());
        assert!(describe(&[f64::NAN]).is_err());
    }

    #[test]
    fn describe_quantiles_interpolate_linearly() {
        // Order statistics of 0..=4 at 75%: h = 3.0 exactly.
        let s = describe(&[0.0f64, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let q75 = s.quantiles.iter().find(|(p, _)| *p == 75.0).unwrap().1;
        assert_eq!(q75, 3.0);
        // Two points: median interpolates halfway.
        let s = describe(&[0.0f64, 1.0]).unwrap();
        let q50 = s.quantiles.iter().find(|(p, _)| *p == 50.0).unwrap().1;
        assert_eq!(q50, 0.5);
    }

    #[test]
    fn welford_matches_two_pass_oracle() {
        use rand::RngExt;
        let mut rng = crate::features::seeded_rng(99, 0);
        let values: Vec<f64> = (0..10_000)
            .map(|_| 1e6 + rng.random::<f64>() * 3.0)
            .collect();
        let s = describe(&values).unwrap();
        // Independent two-pass oracle.
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        assert!((s.mean - mean).abs() / mean.abs() < 1e-9);
        assert!((s.std - var.sqrt()).abs() / var.sqrt() < 1e-9);
    }

    #[test]
    fn histogram_counts_cover_all_rows() {
        let values: Vec<f64> = (0..997).map(|i| (i as f64 * 0.37).sin() * 10.0).collect();
        let s = describe(&values).unwrap();
        assert_eq!(s.histogram.counts.iter().sum::<u64>(), 997);
        assert_eq!(s.histogram.edges.len(), s.histogram.counts.len() + 1);
        // Quantiles are non-decreasing.
        for w in s.quantiles.windows(2) {
            assert!(w[0].1 <= w[1].1);
        }
    }

    mod evaluate_tests {
        use super::*;
        use crate::classifiers::Hyperparams;
        use crate::dataset::RowId;

        fn lattice(n: usize, offset: f64) -> LabeledDataset<f64> {
            let rows: Vec<(Vec<f64>, bool)> = (0..n)
                .map(|i| {
                    let x = (i % 13) as f64 + offset;
                    let y = (i % 7) as f64;
                    (vec![x, y], x + y > 9.0)
                })
                .collect();
            let n_cols = rows[0].0.len();
            let columns = (0..n_cols).map(|j| format!("f{j}")).collect();
            let ids = (0..rows.len())
                .map(|i| RowId { claim_id: format!("C{i}"), provider: "P".into() })
                .collect();
            let (data, labels): (Vec<Vec<f64>>, Vec<bool>) = rows.into_iter().unzip();
            LabeledDataset::from_rows(columns, data, labels, ids).unwrap()
        }

        #[test]
        fn evaluate_checks_purity_and_reproduces_metrics_from_confusion() {
            let train = lattice(60, 0.25);
            let validation = lattice(30, 0.6);
            let (model, _) =
                TrainedModel::fit(ModelKind::DecisionTree, &train, &Hyperparams::default(), 1, "fp")
                    .unwrap();
            let counts = ClassCounts::of(&validation);
            let evals =
                evaluate(std::slice::from_ref(&model), &train, &validation, "fp", Some(counts)).unwrap();
            let e = &evals[0];
            // MetricSet is reproducible from its own ConfusionMatrix.
            for split in [&e.train, &e.validation] {
                let again = metrics(&split.confusion).unwrap();
                assert!((again.accuracy - split.metrics.accuracy).abs() < 1e-12);
                assert!((again.f1 - split.metrics.f1).abs() < 1e-12);
            }
            assert_eq!(e.validation.confusion.total() as usize, validation.n_rows());

            // Wrong expected counts trip the purity assertion.
            let bad = ClassCounts { negatives: counts.negatives + 1, positives: counts.positives };
            assert!(evaluate(std::slice::from_ref(&model), &train, &validation, "fp", Some(bad)).is_err());
            // Fingerprint mismatch refuses evaluation.
            assert!(evaluate(&[model], &train, &validation, "other", Some(counts)).is_err());
        }
    }
}
