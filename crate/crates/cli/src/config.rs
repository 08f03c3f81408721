//! Run configuration: one JSON document that every command reads, with
//! command-line flags and `FRAUDKIT_*` environment variables as overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fraudkit_core::classifiers::{Hyperparams, ModelKind};
use fraudkit_core::features::FeatureConfig;
use fraudkit_core::resample::ResamplePlan;
use fraudkit_core::synth::SynthConfig;
use fraudkit_core::{fingerprint, Error, Result};

/// Input table paths. When absent, tables are read from `<out>/data/`,
/// which is where `synth` writes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub beneficiaries: PathBuf,
    pub inpatient: PathBuf,
    pub outpatient: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub validation_fraction: f64,
    /// Optional third subset; the default two-way split matches the
    /// reported results.
    pub test_fraction: Option<f64>,
    pub seed: u64,
    pub stratified: bool,
    /// Provider-disjoint split for leakage studies.
    pub by_provider: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            validation_fraction: 0.1,
            test_fraction: None,
            seed: 42,
            stratified: true,
            by_provider: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub strict: bool,
    pub out_dir: PathBuf,
    pub inputs: Option<InputPaths>,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub features: FeatureConfig,
    pub resample: ResamplePlan,
    /// Model short names: rf, knn, lda, dt, ada.
    pub models: Vec<String>,
    pub hyperparams: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            strict: false,
            out_dir: PathBuf::from("runs/default"),
            inputs: None,
            synth: SynthConfig::default(),
            split: SplitConfig::default(),
            features: FeatureConfig::default(),
            resample: ResamplePlan::default(),
            models: vec!["rf", "knn", "lda", "dt", "ada"]
                .into_iter()
                .map(String::from)
                .collect(),
            hyperparams: Hyperparams::default(),
        }
    }
}

/// Flag/env overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub strict: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::io(p.display().to_string(), e))?;
                serde_json::from_str(&text).map_err(|e| {
                    Error::Usage(format!("bad config {}: {e}", p.display()))
                })?
            }
            None => RunConfig::default(),
        };
        if let Some(out) = &overrides.out {
            config.out_dir = out.clone();
        }
        if let Some(seed) = overrides.seed {
            config.seed = seed;
            config.split.seed = seed;
            config.resample.seed = seed;
            config.synth.seed = seed;
        }
        if overrides.strict {
            config.strict = true;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.models {
            ModelKind::parse(m)?;
        }
        if self.models.is_empty() {
            return Err(Error::Usage("model list is empty".into()));
        }
        if !(self.split.validation_fraction > 0.0 && self.split.validation_fraction < 1.0) {
            return Err(Error::Usage(format!(
                "split.validation_fraction must be in (0, 1), got {}",
                self.split.validation_fraction
            )));
        }
        if let Some(t) = self.split.test_fraction {
            if !(t > 0.0 && t + self.split.validation_fraction < 1.0) {
                return Err(Error::Usage(format!(
                    "split.test_fraction {t} leaves no training rows"
                )));
            }
        }
        Ok(())
    }

    pub fn model_kinds(&self) -> Vec<ModelKind> {
        self.models
            .iter()
            .map(|m| ModelKind::parse(m).expect("validated"))
            .collect()
    }

    /// Hash of the pipeline parameters only. Filesystem paths are
    /// excluded so relocating a run reproduces identical output bytes.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashable<'a> {
            seed: u64,
            strict: bool,
            synth: &'a SynthConfig,
            split: &'a SplitConfig,
            features: &'a FeatureConfig,
            resample: &'a ResamplePlan,
            models: &'a [String],
            hyperparams: &'a Hyperparams,
        }
        fingerprint::of_json(&Hashable {
            seed: self.seed,
            strict: self.strict,
            synth: &self.synth,
            split: &self.split,
            features: &self.features,
            resample: &self.resample,
            models: &self.models,
            hyperparams: &self.hyperparams,
        })
    }

    /// `config_hash=.. seed=..`, the comment stamped into CSV outputs.
    pub fn provenance_comment(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash(), self.seed)
    }

    /// The provenance block embedded in JSON outputs.
    pub fn provenance(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("config_hash".to_string(), self.config_hash());
        m.insert("seed".to_string(), self.seed.to_string());
        m
    }

    pub fn input_paths(&self) -> InputPaths {
        self.inputs.clone().unwrap_or_else(|| {
            let data = self.out_dir.join("data");
            InputPaths {
                beneficiaries: data.join("beneficiaries.csv"),
                inpatient: data.join("inpatient.csv"),
                outpatient: data.join("outpatient.csv"),
                labels: data.join("labels.csv"),
            }
        })
    }
}
