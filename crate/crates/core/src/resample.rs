//! Class-balancing operators, applied to the training split only:
//! SMOTE, ENN cleaning (and their composition), random oversampling, and
//! random undersampling. All operators are pure functions of
//! (dataset, plan) and deterministic under the plan's seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, RowId};
use crate::error::{Error, Result};
use crate::features::seeded_rng;
use crate::scalar::Scalar;

/// Which balancing operator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleMethod {
    #[default]
    Smote,
    SmoteEnn,
    Ros,
    Rus,
    None,
}

impl ResampleMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smote" => Ok(ResampleMethod::Smote),
            "smote-enn" => Ok(ResampleMethod::SmoteEnn),
            "ros" => Ok(ResampleMethod::Ros),
            "rus" => Ok(ResampleMethod::Rus),
            "none" => Ok(ResampleMethod::None),
            other => Err(Error::Usage(format!(
                "unknown resample method {other:?} (expected smote|smote-enn|ros|rus|none)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResampleMethod::Smote => "smote",
            ResampleMethod::SmoteEnn => "smote-enn",
            ResampleMethod::Ros => "ros",
            ResampleMethod::Rus => "rus",
            ResampleMethod::None => "none",
        }
    }
}

/// Balancing plan: operator, neighborhood size, target minority/majority
/// ratio, and the seed that makes runs reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResamplePlan {
    pub method: ResampleMethod,
    pub k_neighbors: usize,
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan {
            method: ResampleMethod::Smote,
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 42,
        }
    }
}

impl ResamplePlan {
    fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Usage("k_neighbors must be positive".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Usage(format!(
                "target_ratio must be in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// Runs the planned operator. `None` clones the input.
pub fn apply_plan<T: Scalar>(train: &LabeledDataset<T>, plan: &ResamplePlan) -> Result<LabeledDataset<T>> {
    plan.validate()?;
    match plan.method {
        ResampleMethod::Smote => smote(train, plan),
        ResampleMethod::SmoteEnn => {
            let oversampled = smote(train, plan)?;
            enn_clean(&oversampled, plan.k_neighbors)
        }
        ResampleMethod::Ros => random_oversample(train, plan),
        ResampleMethod::Rus => random_undersample(train, plan),
        ResampleMethod::None => Ok(train.clone()),
    }
}

/// (minority_label, minority_indices, majority_indices); errors when a
/// class is empty.
fn split_minority<T: Scalar>(ds: &LabeledDataset<T>) -> Result<(bool, Vec<usize>, Vec<usize>)> {
    let (neg, pos) = ds.class_indices();
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::Data("resampling requires both classes present".into()));
    }
    if pos.len() <= neg.len() {
        Ok((true, pos, neg))
    } else {
        Ok((false, neg, pos))
    }
}

fn oversample_target(minority: usize, majority: usize, ratio: f64) -> usize {
    let target = (ratio * majority as f64).round() as usize;
    target.saturating_sub(minority)
}

/// Squared Euclidean distance.
fn d2<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, v| acc + v)
}

/// Indices (into `pool`) of the k nearest pool rows to `pool[i]`,
/// excluding itself. Exact scan; ties broken by lower dataset row index.
fn k_nearest_in_pool<T: Scalar>(
    ds: &LabeledDataset<T>,
    pool: &[usize],
    i: usize,
    k: usize,
) -> Vec<usize> {
    let me = ds.row(pool[i]);
    let mut dists: Vec<(T, usize)> = pool
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &row)| (d2(me, ds.row(row)), j))
        .collect();
    dists.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then_with(|| pool[a.1].cmp(&pool[b.1]))
    });
    dists.truncate(k);
    dists.into_iter().map(|(_, j)| j).collect()
}

/// SMOTE: appends synthetic minority rows interpolated between each base
/// row and one of its k nearest minority neighbors until the class ratio
/// reaches the plan's target. Original rows come first, verbatim.
pub fn smote<T: Scalar>(train: &LabeledDataset<T>, plan: &ResamplePlan) -> Result<LabeledDataset<T>> {
    plan.validate()?;
    let (minority_label, minority, majority) = split_minority(train)?;
    let n_syn = oversample_target(minority.len(), majority.len(), plan.target_ratio);
    if n_syn == 0 {
        return Ok(train.clone());
    }
    if plan.k_neighbors >= minority.len() {
        return Err(Error::Data(format!(
            "SMOTE needs k_neighbors < minority size; got k={} with {} minority rows",
            plan.k_neighbors,
            minority.len()
        )));
    }

    let neighbors: Vec<Vec<usize>> = (0..minority.len())
        .into_par_iter()
        .map(|i| k_nearest_in_pool(train, &minority, i, plan.k_neighbors))
        .collect();

    // Round-robin over minority rows; per-synthetic-row RNG streams keep the
    // output independent of thread count.
    let synthetic: Vec<(Vec<T>, RowId)> = (0..n_syn)
        .into_par_iter()
        .map(|j| {
            use rand::RngExt;
            let mut rng = seeded_rng(plan.seed, j as u64);
            let base_pos = j % minority.len();
            let base_row = train.row(minority[base_pos]);
            let nns = &neighbors[base_pos];
            let nn_row = train.row(minority[nns[rng.random_range(0..nns.len())]]);
            let lambda = T::from_f64_lossy(rng.random::<f64>());
            let row: Vec<T> = base_row
                .iter()
                .zip(nn_row)
                .map(|(&a, &b)| a + lambda * (b - a))
                .collect();
            let base_id = &train.ids()[minority[base_pos]];
            let id = RowId {
                claim_id: format!("smote:{}:{}", base_id.claim_id, j),
                provider: base_id.provider.clone(),
            };
            (row, id)
        })
        .collect();

    let mut out = train.clone();
    for (row, id) in synthetic {
        out.push_row(row, minority_label, id)?;
    }
    Ok(out)
}

/// Edited-nearest-neighbor cleaning: removes every row whose label
/// disagrees with the strict majority of its k nearest neighbors
/// (self excluded, both classes eligible). Ties retain the row.
pub fn enn_clean<T: Scalar>(ds: &LabeledDataset<T>, k: usize) -> Result<LabeledDataset<T>> {
    if k == 0 {
        return Err(Error::Usage("ENN requires k >= 1".into()));
    }
    if k >= ds.n_rows() {
        return Err(Error::Usage(format!(
            "ENN requires k < row count; got k={k} with {} rows",
            ds.n_rows()
        )));
    }
    let all: Vec<usize> = (0..ds.n_rows()).collect();
    let keep: Vec<usize> = all
        .par_iter()
        .filter(|&&i| {
            let nns = k_nearest_in_pool(ds, &all, i, k);
            let pos_votes = nns.iter().filter(|&&j| ds.labels()[j]).count();
            let disagree = if 2 * pos_votes > k {
                !ds.labels()[i]
            } else if 2 * pos_votes < k {
                ds.labels()[i]
            } else {
                false // tie retains the row
            };
            !disagree
        })
        .copied()
        .collect();
    Ok(ds.subset(&keep))
}

/// Random oversampling: duplicates uniformly-sampled minority rows until
/// the class ratio reaches the target.
pub fn random_oversample<T: Scalar>(
    train: &LabeledDataset<T>,
    plan: &ResamplePlan,
) -> Result<LabeledDataset<T>> {
    plan.validate()?;
    let (minority_label, minority, majority) = split_minority(train)?;
    let n_dup = oversample_target(minority.len(), majority.len(), plan.target_ratio);
    if n_dup == 0 {
        return Ok(train.clone());
    }
    use rand::RngExt;
    let mut rng = seeded_rng(plan.seed, 0);
    let mut out = train.clone();
    for _ in 0..n_dup {
        let pick = minority[rng.random_range(0..minority.len())];
        out.push_row(out.row(pick).to_vec(), minority_label, out.ids()[pick].clone())?;
    }
    Ok(out)
}

/// Random undersampling: removes uniformly-sampled majority rows until the
/// class ratio reaches the target. Surviving rows keep their input order.
pub fn random_undersample<T: Scalar>(
    train: &LabeledDataset<T>,
    plan: &ResamplePlan,
) -> Result<LabeledDataset<T>> {
    plan.validate()?;
    let (_, minority, majority) = split_minority(train)?;
    let majority_target = (minority.len() as f64 / plan.target_ratio).round() as usize;
    if majority_target == 0 {
        return Err(Error::Data(
            "undersampling target would remove every majority row".into(),
        ));
    }
    if majority_target >= majority.len() {
        return Ok(train.clone());
    }
    use rand::seq::SliceRandom;
    let mut rng = seeded_rng(plan.seed, 0);
    let mut shuffled = majority.clone();
    shuffled.shuffle(&mut rng);
    let mut keep: Vec<usize> = shuffled[..majority_target].to_vec();
    keep.extend_from_slice(&minority);
    keep.sort_unstable();
    Ok(train.subset(&keep))
}
