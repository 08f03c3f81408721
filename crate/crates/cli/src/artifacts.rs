//! Output-directory layout and artifact IO. Every writer goes through
//! `write_atomic` (temp file + rename) and never mutates inputs.

use std::path::{Path, PathBuf};

use serde::Serialize;

use fraudkit_core::schema::{
    self, BeneficiaryRecord, ClaimRecord, ParseMode, ParseOutcome, ProviderLabel, Setting,
};
use fraudkit_core::{write_atomic, Error, Result};

use crate::config::{InputPaths, RunConfig};

pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(config: &RunConfig) -> Layout {
        Layout { out: config.out_dir.clone() }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    pub fn prep_dir(&self) -> PathBuf {
        self.out.join("prep")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }

    pub fn stats_dir(&self) -> PathBuf {
        self.report_dir().join("stats")
    }

    pub fn retrain_dir(&self) -> PathBuf {
        self.out.join("retrain")
    }

    pub fn fitstate(&self) -> PathBuf {
        self.prep_dir().join("fitstate.json")
    }

    pub fn split_meta(&self) -> PathBuf {
        self.prep_dir().join("split.json")
    }

    pub fn matrix(&self, split: &str) -> PathBuf {
        self.prep_dir().join(format!("{split}.csv"))
    }

    pub fn unified(&self, split: &str) -> PathBuf {
        self.prep_dir().join(format!("unified_{split}.csv"))
    }

    pub fn resampled_train(&self) -> PathBuf {
        self.models_dir().join("train_resampled.csv")
    }

    pub fn model_file(&self, short_name: &str) -> PathBuf {
        self.models_dir().join(format!("model_{short_name}.json"))
    }
}

/// Reads a pipeline artifact, reporting absence as a dependency error
/// that names the missing file.
pub fn require(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Prepends the provenance comment line and writes atomically.
pub fn write_csv_with_comment(path: &Path, comment: &str, body: Vec<u8>) -> Result<()> {
    let mut bytes = format!("# {comment}\n").into_bytes();
    bytes.extend(body);
    write_atomic(path, &bytes)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(std::io::BufReader::new(file))
}

/// The four parsed source tables plus their parse summaries.
pub struct Tables {
    pub beneficiaries: ParseOutcome<BeneficiaryRecord>,
    pub inpatient: ParseOutcome<ClaimRecord>,
    pub outpatient: ParseOutcome<ClaimRecord>,
    pub labels: ParseOutcome<ProviderLabel>,
}

pub fn read_tables(paths: &InputPaths, mode: ParseMode) -> Result<Tables> {
    Ok(Tables {
        beneficiaries: schema::parse_beneficiaries(open(&paths.beneficiaries)?, mode)?,
        inpatient: schema::parse_claims(open(&paths.inpatient)?, Setting::Inpatient, mode)?,
        outpatient: schema::parse_claims(open(&paths.outpatient)?, Setting::Outpatient, mode)?,
        labels: schema::parse_labels(open(&paths.labels)?, mode)?,
    })
}

/// Claims tables only (scoring does not need labels).
pub fn read_claim_tables(
    paths: &InputPaths,
    mode: ParseMode,
) -> Result<(ParseOutcome<BeneficiaryRecord>, ParseOutcome<ClaimRecord>, ParseOutcome<ClaimRecord>)> {
    Ok((
        schema::parse_beneficiaries(open(&paths.beneficiaries)?, mode)?,
        schema::parse_claims(open(&paths.inpatient)?, Setting::Inpatient, mode)?,
        schema::parse_claims(open(&paths.outpatient)?, Setting::Outpatient, mode)?,
    ))
}
