//! Dense labeled feature matrix with row provenance.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Provenance of one matrix row: which claim, submitted by which provider.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RowId {
    pub claim_id: String,
    pub provider: String,
}

/// Dense numeric feature matrix with named columns, binary labels
/// (`true` = fraud) and per-row provenance ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    columns: Vec<String>,
    values: Vec<T>,
    labels: Vec<bool>,
    ids: Vec<RowId>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(columns: Vec<String>) -> Self {
        LabeledDataset {
            columns,
            values: Vec::new(),
            labels: Vec::new(),
            ids: Vec::new(),
        }
    }

    pub fn from_rows(
        columns: Vec<String>,
        rows: Vec<Vec<T>>,
        labels: Vec<bool>,
        ids: Vec<RowId>,
    ) -> Result<Self> {
        let unique: std::collections::HashSet<&str> = columns.iter().map(String::as_str).collect();
        if unique.len() != columns.len() {
            return Err(Error::Usage("column names must be unique".into()));
        }
        let mut ds = LabeledDataset::new(columns);
        if rows.len() != labels.len() || rows.len() != ids.len() {
            return Err(Error::Usage(format!(
                "row/label/id length mismatch: {} rows, {} labels, {} ids",
                rows.len(),
                labels.len(),
                ids.len()
            )));
        }
        for ((row, label), id) in rows.into_iter().zip(labels).zip(ids) {
            ds.push_row(row, label, id)?;
        }
        Ok(ds)
    }

    pub fn push_row(&mut self, row: Vec<T>, label: bool, id: RowId) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Usage(format!(
                "row width {} does not match column count {}",
                row.len(),
                self.columns.len()
            )));
        }
        self.values.extend(row);
        self.labels.push(label);
        self.ids.push(id);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn ids(&self) -> &[RowId] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.columns.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    /// One column as an owned vector.
    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// (non-fraud, fraud) row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (self.labels.len() - pos, pos)
    }

    /// Row indices of the two classes, in row order: (negatives, positives).
    pub fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut neg = Vec::new();
        let mut pos = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if l {
                pos.push(i);
            } else {
                neg.push(i);
            }
        }
        (neg, pos)
    }

    /// New dataset keeping `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = LabeledDataset::new(self.columns.clone());
        for &i in indices {
            out.values.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
            out.ids.push(self.ids[i].clone());
        }
        out
    }

    /// True when every cell is finite; used as the post-transform gate.
    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First non-finite cell as (row, column name), if any.
    pub fn first_non_finite(&self) -> Option<(usize, &str)> {
        let w = self.columns.len();
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|flat| (flat / w, self.columns[flat % w].as_str()))
    }
}

impl LabeledDataset<f64> {
    /// Writes `claim_id,provider,<features...>,label`. Cells use Rust's
    /// shortest round-trip float rendering. An optional leading `#` comment
    /// carries run provenance.
    pub fn write_csv<W: Write>(&self, mut sink: W, comment: Option<&str>) -> Result<()> {
        let io_err = |e: std::io::Error| Error::io("<dataset csv>", e);
        if let Some(c) = comment {
            writeln!(sink, "# {c}").map_err(io_err)?;
        }
        let mut header = vec!["claim_id".to_string(), "provider".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("label".to_string());
        writeln!(sink, "{}", header.join(",")).map_err(io_err)?;
        for i in 0..self.n_rows() {
            let id = &self.ids[i];
            let mut cells = Vec::with_capacity(self.n_cols() + 3);
            cells.push(id.claim_id.clone());
            cells.push(id.provider.clone());
            cells.extend(self.row(i).iter().map(|v| format!("{v}")));
            cells.push(if self.labels[i] { "1" } else { "0" }.to_string());
            writeln!(sink, "{}", cells.join(",")).map_err(io_err)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(source);
        let header = reader
            .headers()
            .map_err(|e| Error::Data(format!("dataset csv header: {e}")))?
            .clone();
        let cols: Vec<String> = header.iter().map(str::to_string).collect();
        if cols.len() < 3 || cols[0] != "claim_id" || cols[1] != "provider" {
            return Err(Error::Data(
                "dataset csv must start with claim_id,provider columns".into(),
            ));
        }
        if cols.last().map(String::as_str) != Some("label") {
            return Err(Error::Data("dataset csv must end with a label column".into()));
        }
        let feature_names = cols[2..cols.len() - 1].to_vec();
        let mut ds = LabeledDataset::new(feature_names);
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Data(format!("dataset csv row {i}: {e}")))?;
            let id = RowId {
                claim_id: record[0].to_string(),
                provider: record[1].to_string(),
            };
            let mut row = Vec::with_capacity(cols.len() - 3);
            for j in 2..cols.len() - 1 {
                let cell = &record[j];
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::row("dataset", i + 1, &cols[j], format!("bad float {cell:?}")))?;
                row.push(v);
            }
            let label = match &record[cols.len() - 1] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::row(
                        "dataset",
                        i + 1,
                        "label",
                        format!("expected 0 or 1, got {other:?}"),
                    ))
                }
            };
            ds.push_row(row, label, id)?;
        }
        Ok(ds)
    }

    pub fn write_csv_path(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, comment)?;
        crate::write_atomic(path, &buf)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LabeledDataset<f64> {
        LabeledDataset::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![3.0, 0.5], vec![-1.0, 0.25]],
            vec![true, false, true],
            (0..3)
                .map(|i| RowId {
                    claim_id: format!("CLM{i}"),
                    provider: format!("PRV{i}"),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let ds = tiny();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf, Some("config_hash=abc seed=1")).unwrap();
        let back = LabeledDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn subset_keeps_order_and_ids() {
        let ds = tiny();
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.n_rows(), 2);
        assert_eq!(sub.row(0), &[-1.0, 0.25]);
        assert_eq!(sub.ids()[1].claim_id, "CLM0");
    }

    #[test]
    fn class_counts_and_indices_agree() {
        let ds = tiny();
        let (neg, pos) = ds.class_counts();
        assert_eq!((neg, pos), (1, 2));
        let (ni, pi) = ds.class_indices();
        assert_eq!(ni, vec![1]);
        assert_eq!(pi, vec![0, 2]);
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut ds: LabeledDataset<f64> = LabeledDataset::new(vec!["a".into()]);
        let err = ds
            .push_row(vec![1.0, 2.0], false, RowId { claim_id: "c".into(), provider: "p".into() })
            .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }
}
