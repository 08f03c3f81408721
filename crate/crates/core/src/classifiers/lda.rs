//! Linear discriminant analysis with a pooled within-class covariance.
//!
//! The two-class discriminant difference collapses to a linear form
//! `w . x + b` with `w = Sigma^-1 (mu1 - mu0)` and
//! `b = -(mu1 + mu0) . w / 2 + ln(pi1 / pi0)`; the score maps the margin
//! through the logistic so it lands in [0, 1].

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::scalar::{logistic, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaState<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> LdaState<T> {
    pub fn fit(data: &LabeledDataset<T>, ridge: f64) -> Result<LdaState<T>> {
        let (n_neg, n_pos) = data.class_counts();
        if n_neg == 0 || n_pos == 0 {
            return Err(Error::Data("LDA requires both classes present".into()));
        }
        let d = data.n_cols();
        let n = data.n_rows();

        let mut mean = [vec![T::zero(); d], vec![T::zero(); d]];
        for i in 0..n {
            let class = data.labels()[i] as usize;
            for (m, &x) in mean[class].iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        let counts = [T::from_count(n_neg), T::from_count(n_pos)];
        for (class_mean, &count) in mean.iter_mut().zip(&counts) {
            for m in class_mean.iter_mut() {
                *m /= count;
            }
        }

        // Pooled within-class scatter, sample convention (n - 2 divisor).
        let mut cov = vec![T::zero(); d * d];
        let mut centered = vec![T::zero(); d];
        for i in 0..n {
            let class = data.labels()[i] as usize;
            for ((c, &x), m) in centered.iter_mut().zip(data.row(i)).zip(&mean[class]) {
                *c = x - *m;
            }
            for r in 0..d {
                let cr = centered[r];
                for c in r..d {
                    cov[r * d + c] += cr * centered[c];
                }
            }
        }
        let divisor = T::from_count(n.saturating_sub(2).max(1));
        let ridge_t = T::from_f64_lossy(ridge);
        for r in 0..d {
            for c in r..d {
                let v = cov[r * d + c] / divisor;
                cov[r * d + c] = v;
                cov[c * d + r] = v;
            }
            cov[r * d + r] += ridge_t;
        }

        let mut delta = vec![T::zero(); d];
        for j in 0..d {
            delta[j] = mean[1][j] - mean[0][j];
        }
        let weights = solve_spd(&mut cov, d, &delta).ok_or_else(|| {
            Error::Data(
                "pooled covariance is singular; refit with ridge > 0 to regularize the diagonal"
                    .into(),
            )
        })?;

        let mut mean_sum_dot = T::zero();
        for j in 0..d {
            mean_sum_dot += (mean[0][j] + mean[1][j]) * weights[j];
        }
        let half = T::from_f64_lossy(0.5);
        let prior_term = (counts[1] / counts[0]).ln();
        let bias = prior_term - half * mean_sum_dot;
        Ok(LdaState { weights, bias })
    }

    /// Discriminant margin (delta_1 - delta_0).
    pub fn margin(&self, row: &[T]) -> T {
        let mut acc = self.bias;
        for (w, x) in self.weights.iter().zip(row) {
            acc += *w * *x;
        }
        acc
    }

    pub fn score_row(&self, row: &[T]) -> T {
        logistic(self.margin(row))
    }
}

/// Cholesky solve of `A x = b` for symmetric positive-definite `A`
/// (mutated in place into its factor). Returns `None` when a pivot falls
/// below the scale-relative floor, i.e. the matrix is singular at working
/// precision.
fn solve_spd<T: Scalar>(a: &mut [T], d: usize, b: &[T]) -> Option<Vec<T>> {
    let scale = (0..d)
        .map(|j| a[j * d + j])
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc });
    let floor = scale * T::epsilon() * T::from_count(d.max(1));
    // Factor: A = L L^T, stored in the lower triangle.
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if diag <= floor || !diag.is_finite() {
            return None;
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / diag;
        }
    }
    // Forward solve L y = b.
    let mut y = vec![T::zero(); d];
    for i in 0..d {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * d + k] * y[k];
        }
        y[i] = v / a[i * d + i];
    }
    // Back solve L^T x = y.
    let mut x = vec![T::zero(); d];
    for i in (0..d).rev() {
        let mut v = y[i];
        for k in i + 1..d {
            v -= a[k * d + i] * x[k];
        }
        x[i] = v / a[i * d + i];
    }
    Some(x)
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
    fn cholesky_solves_known_system() {
        // A = [[4, 2], [2, 3]], b = [8, 7] -> x = [1, 5/3 ... ] check: 4x+2y=8, 2x+3y=7 -> x=1.25, y=1.5
        let mut a: Vec<f64> = vec![4.0, 2.0, 2.0, 3.0];
        let x = solve_spd(&mut a, 2, &[8.0, 7.0]).unwrap();
        assert!((x[0] - 1.25).abs() < 1e-12);
        assert!((x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn singular_covariance_without_ridge_reports_fix() {
        // A constant column zeroes a covariance row, which is singular.
        let data = ds(vec![
            (vec![1.0, 7.0], false),
            (vec![2.0, 7.0], false),
            (vec![3.0, 7.0], true),
            (vec![4.0, 7.0], true),
        ]);
        let err = LdaState::fit(&data, 0.0).unwrap_err();
        assert!(err.to_string().contains("ridge"));
        assert!(LdaState::fit(&data, 1e-6).is_ok());
    }

    #[test]
    fn symmetric_means_give_half_score_at_origin() {
        // mu0 = -mu1, identity covariance, equal priors: score(0) = 0.5.
        let data = ds(vec![
            (vec![-1.0, -1.0], false),
            (vec![-3.0, -1.0], false),
            (vec![-1.0, -3.0], false),
            (vec![-3.0, -3.0], false),
            (vec![1.0, 1.0], true),
            (vec![3.0, 1.0], true),
            (vec![1.0, 3.0], true),
            (vec![3.0, 3.0], true),
        ]);
        let model = LdaState::fit(&data, 0.0).unwrap();
        let score = model.score_row(&[0.0, 0.0]);
        assert!((score - 0.5).abs() < 1e-9, "score at origin {score}");
        // Boundary is the hyperplane x . mu1 = 0.
        assert!(model.score_row(&[2.0, 2.0]) > 0.5);
        assert!(model.score_row(&[-2.0, -2.0]) < 0.5);
    }

    #[test]
    fn predictions_invariant_under_affine_column_rescaling() {
        // Rescale one feature column (fit and predict inputs alike) on
        // nonsingular data with ridge = 0: predictions must not move.
        use rand::RngExt;
        let mut rng = crate::features::seeded_rng(31, 0);
        for case in 0..20 {
            let n = 14 + rng.random_range(0..30);
            let rows: Vec<(Vec<f64>, bool)> = (0..n)
                .map(|_| {
                    let x: f64 = rng.random::<f64>() * 6.0 - 3.0;
                    let y: f64 = rng.random::<f64>() * 6.0 - 3.0;
                    (vec![x, y], x + 0.5 * y + 0.2 * rng.random::<f64>() > 0.0)
                })
                .collect();
            if rows.iter().all(|(_, l)| *l) || rows.iter().all(|(_, l)| !*l) {
                continue;
            }
            let scale = 1.0 + rng.random::<f64>() * 9.0;
            let shift = rng.random::<f64>() * 4.0 - 2.0;
            let warped: Vec<(Vec<f64>, bool)> = rows
                .iter()
                .map(|(r, l)| (vec![r[0] * scale + shift, r[1]], *l))
                .collect();
            let plain = LdaState::fit(&ds(rows.clone()), 0.0).unwrap();
            let bent = LdaState::fit(&ds(warped.clone()), 0.0).unwrap();
            for ((r, _), (w, _)) in rows.iter().zip(&warped) {
                assert_eq!(
                    plain.score_row(r) >= 0.5,
                    bent.score_row(w) >= 0.5,
                    "case {case}: affine rescaling moved a prediction"
                );
            }
        }
    }

    #[test]
    fn adding_shared_constant_to_discriminants_is_a_noop_on_predictions() {
        // Equivalent check of the argmax invariance: scaling both priors by
        // the same factor adds a shared constant to each discriminant and
        // cancels in the margin.
        let data = ds(vec![
            (vec![0.0, 1.0], false),
            (vec![1.0, 0.5], false),
            (vec![0.5, 0.2], false),
            (vec![3.0, 3.2], true),
            (vec![4.0, 2.8], true),
            (vec![3.5, 3.9], true),
        ]);
        let model = LdaState::fit(&data, 1e-9).unwrap();
        for i in 0..data.n_rows() {
            let margin = model.margin(data.row(i));
            let shifted = (margin + 7.5) - 7.5;
            assert_eq!(margin >= 0.0, shifted >= 0.0);
            assert_eq!(model.score_row(data.row(i)) >= 0.5, margin >= 0.0);
        }
    }
}
