//! Deterministic generator of schema-faithful synthetic claims tables with
//! planted fraud mechanisms: reimbursement upcoding, duplicate claim ids,
//! and prolonged inpatient stays, all expressed through fraud-labeled
//! providers. The emitted CSVs parse through the schema module unchanged;
//! the manifest records exactly which ids carry which planted pattern.

use chrono::NaiveDate;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::seeded_rng;
use crate::schema::{
    BeneficiaryRecord, ClaimRecord, ProviderLabel, Setting, N_CHRONIC_FLAGS, N_DIAGNOSIS_SLOTS,
    N_PROCEDURE_SLOTS,
};

/// Generator knobs. Defaults give the 20k-claim desk-scale instance the
/// end-to-end suite runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_beneficiaries: usize,
    pub n_providers: usize,
    pub n_claims: usize,
    /// Fraction of providers labeled fraudulent (claim-level rate follows
    /// their claim volume).
    pub fraud_provider_fraction: f64,
    /// Reimbursement inflation applied to fraud providers' claims.
    pub upcoding_multiplier: f64,
    /// Per-claim chance a fraud provider re-submits the same ClaimID.
    pub duplicate_claim_rate: f64,
    /// Per-claim chance a fraud inpatient stay draws from the long tail.
    pub prolonged_stay_rate: f64,
    /// Fraction of claims that are inpatient admissions.
    pub inpatient_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_beneficiaries: 3_000,
            n_providers: 300,
            n_claims: 20_000,
            fraud_provider_fraction: 0.38,
            upcoding_multiplier: 2.5,
            duplicate_claim_rate: 0.02,
            prolonged_stay_rate: 0.10,
            inpatient_fraction: 0.073,
            seed: 42,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_beneficiaries == 0 || self.n_providers == 0 || self.n_claims == 0 {
            return Err(Error::Usage("synth counts must be positive".into()));
        }
        for (name, v) in [
            ("fraud_provider_fraction", self.fraud_provider_fraction),
            ("duplicate_claim_rate", self.duplicate_claim_rate),
            ("prolonged_stay_rate", self.prolonged_stay_rate),
            ("inpatient_fraction", self.inpatient_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Usage(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.upcoding_multiplier < 1.0 {
            return Err(Error::Usage("upcoding_multiplier must be >= 1".into()));
        }
        if self.duplicate_claim_rate > 0.0 && self.n_claims < 2 {
            return Err(Error::Usage(
                "duplicate claims requested but n_claims < 2".into(),
            ));
        }
        Ok(())
    }
}

/// Ground truth for tests: which providers and claims carry each planted
/// pattern, plus realized counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub fraud_providers: Vec<String>,
    pub upcoded_providers: Vec<String>,
    pub duplicated_claim_ids: Vec<String>,
    pub prolonged_claim_ids: Vec<String>,
    pub counts: ManifestCounts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub beneficiaries: usize,
    pub providers: usize,
    pub fraud_providers: usize,
    pub claims_emitted: usize,
    pub fraud_claims: usize,
    pub inpatient_claims: usize,
    pub outpatient_claims: usize,
}

/// The four generated tables, pre-serialization.
#[derive(Debug, Clone)]
pub struct SynthTables {
    pub beneficiaries: Vec<BeneficiaryRecord>,
    pub inpatient: Vec<ClaimRecord>,
    pub outpatient: Vec<ClaimRecord>,
    pub labels: Vec<ProviderLabel>,
}

/// Zipf-like sampler over ranks 1..=k: a few heads dominate, echoing how a
/// small number of codes accounts for most admissions.
struct ZipfTable {
    cumulative: Vec<f64>,
}

impl ZipfTable {
    fn new(k: usize, exponent: f64) -> ZipfTable {
        let mut cumulative = Vec::with_capacity(k);
        let mut acc = 0.0;
        for rank in 1..=k {
            acc += (rank as f64).powf(-exponent);
            cumulative.push(acc);
        }
        ZipfTable { cumulative }
    }

    /// 0-based rank sample.
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c < u).min(self.cumulative.len() - 1)
    }
}

/// Standard normal via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Log-normal draw with the given location/shape, rounded to whole dollars.
fn lognormal_dollars(rng: &mut ChaCha8Rng, location: f64, shape: f64) -> f64 {
    (location + shape * normal(rng)).exp().round().max(0.0)
}

fn geometric(rng: &mut ChaCha8Rng, p: f64, cap: i64) -> i64 {
    let mut n = 0;
    while n < cap && !rng.random_bool(p) {
        n += 1;
    }
    n
}

fn day_in_2009(rng: &mut ChaCha8Rng, last_start: u32) -> NaiveDate {
    let day = rng.random_range(0..last_start);
    NaiveDate::from_ymd_opt(2009, 1, 1).expect("valid date") + chrono::Days::new(day as u64)
}

/// Generates the four tables plus the manifest. Deterministic under
/// (config, seed): same inputs give byte-identical CSV output.
pub fn generate(config: &SynthConfig) -> Result<(SynthTables, SynthManifest)> {
    config.validate()?;

    // Separate streams per entity family keep the draw sequences stable if
    // one family's recipe changes.
    let mut provider_rng = seeded_rng(config.seed, 1);
    let mut bene_rng = seeded_rng(config.seed, 2);
    let mut claim_rng = seeded_rng(config.seed, 3);

    // Providers and fraud labels.
    let provider_ids: Vec<String> =
        (0..config.n_providers).map(|i| format!("PRV{:05}", 10_001 + i)).collect();
    let n_fraud = (config.fraud_provider_fraction * config.n_providers as f64).round() as usize;
    let mut shuffled: Vec<usize> = (0..config.n_providers).collect();
    {
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut provider_rng);
    }
    let mut is_fraud = vec![false; config.n_providers];
    for &i in shuffled.iter().take(n_fraud) {
        is_fraud[i] = true;
    }
    let labels: Vec<ProviderLabel> = provider_ids
        .iter()
        .zip(&is_fraud)
        .map(|(p, &f)| ProviderLabel { provider: p.clone(), potential_fraud: f })
        .collect();
    // Claim volume is Zipf over a provider permutation, independent of the
    // fraud labels.
    let volume = ZipfTable::new(config.n_providers, 0.5);
    let mut volume_order: Vec<usize> = (0..config.n_providers).collect();
    {
        use rand::seq::SliceRandom;
        volume_order.shuffle(&mut provider_rng);
    }

    // Beneficiaries.
    let chronic_rates: [f64; N_CHRONIC_FLAGS] =
        [0.28, 0.33, 0.21, 0.12, 0.19, 0.26, 0.45, 0.42, 0.20, 0.18, 0.06];
    let state_zipf = ZipfTable::new(54, 0.8);
    let county_zipf = ZipfTable::new(300, 0.8);
    let beneficiaries: Vec<BeneficiaryRecord> = (0..config.n_beneficiaries)
        .map(|i| {
            let rng = &mut bene_rng;
            let dob = NaiveDate::from_ymd_opt(
                1919 + rng.random_range(0..64),
                rng.random_range(1..13),
                rng.random_range(1..29),
            )
            .expect("valid dob");
            let dod = rng
                .random_bool(0.05)
                .then(|| {
                    NaiveDate::from_ymd_opt(2009, rng.random_range(1..13), rng.random_range(1..29))
                        .expect("valid dod")
                });
            let race = *[1u32, 2, 3, 5]
                .get(ZipfTable::new(4, 1.6).sample(rng))
                .expect("race rank");
            let months = |rng: &mut ChaCha8Rng| -> u8 {
                if rng.random_bool(0.95) {
                    12
                } else {
                    rng.random_range(0..13) as u8
                }
            };
            BeneficiaryRecord {
                bene_id: format!("BENE{:06}", 100_001 + i),
                dob,
                dod,
                gender: if rng.random_bool(0.43) { 1 } else { 2 },
                race,
                renal_disease_indicator: if rng.random_bool(0.2) { "Y" } else { "0" }.to_string(),
                state: state_zipf.sample(rng) as u32 + 1,
                county: county_zipf.sample(rng) as u32,
                months_part_a: months(rng),
                months_part_b: months(rng),
                chronic_flags: chronic_rates
                    .iter()
                    .map(|&p| if rng.random_bool(p) { "1" } else { "2" }.to_string())
                    .collect(),
                ip_annual_reimb: if rng.random_bool(0.25) {
                    lognormal_dollars(rng, 8.3, 1.0)
                } else {
                    0.0
                },
                ip_annual_deductible: if rng.random_bool(0.25) { 1_068.0 } else { 0.0 },
                op_annual_reimb: lognormal_dollars(rng, 5.8, 1.1),
                op_annual_deductible: lognormal_dollars(rng, 4.5, 0.9),
            }
        })
        .collect();

    // Claims.
    let diagnosis_zipf = ZipfTable::new(300, 1.1);
    let procedure_zipf = ZipfTable::new(80, 1.1);
    let mut inpatient = Vec::new();
    let mut outpatient = Vec::new();
    let mut manifest = SynthManifest {
        fraud_providers: provider_ids
            .iter()
            .zip(&is_fraud)
            .filter(|&(_, &f)| f)
            .map(|(p, _)| p.clone())
            .collect(),
        upcoded_providers: Vec::new(),
        duplicated_claim_ids: Vec::new(),
        prolonged_claim_ids: Vec::new(),
        counts: ManifestCounts {
            beneficiaries: config.n_beneficiaries,
            providers: config.n_providers,
            fraud_providers: n_fraud,
            claims_emitted: 0,
            fraud_claims: 0,
            inpatient_claims: 0,
            outpatient_claims: 0,
        },
    };
    manifest.upcoded_providers = manifest.fraud_providers.clone();

    for j in 0..config.n_claims {
        let rng = &mut claim_rng;
        let provider_idx = volume_order[volume.sample(rng)];
        let fraud = is_fraud[provider_idx];
        let bene_idx = rng.random_range(0..config.n_beneficiaries);
        let bene = &beneficiaries[bene_idx];
        let claim_id = format!("CLM{:07}", 100_001 + j);
        let is_inpatient = rng.random_bool(config.inpatient_fraction);
        let claim_start = day_in_2009(rng, 330);

        let diag_count = 1 + geometric(rng, 0.45, (N_DIAGNOSIS_SLOTS - 1) as i64) as usize;
        let diagnosis_codes: Vec<Option<String>> = (0..N_DIAGNOSIS_SLOTS)
            .map(|s| (s < diag_count).then(|| format!("D{:04}", 1_000 + diagnosis_zipf.sample(rng))))
            .collect();
        let proc_count = if rng.random_bool(0.3) { 1 + rng.random_range(0..2) } else { 0 };
        let procedure_codes: Vec<Option<String>> = (0..N_PROCEDURE_SLOTS)
            .map(|s| (s < proc_count).then(|| format!("P{:03}", 100 + procedure_zipf.sample(rng))))
            .collect();

        let base_reimb = if is_inpatient {
            lognormal_dollars(rng, 8.7, 0.8)
        } else {
            lognormal_dollars(rng, 5.7, 1.0)
        };
        let reimbursed_amount = if fraud {
            (base_reimb * config.upcoding_multiplier).round()
        } else {
            base_reimb
        };

        let mut prolonged = false;
        let claim = if is_inpatient {
            let mut days = 1 + geometric(rng, 0.25, 30);
            if fraud && rng.random_bool(config.prolonged_stay_rate) {
                days += 15 + geometric(rng, 0.2, 20);
                prolonged = true;
            }
            let discharge = claim_start + chrono::Days::new(days as u64);
            ClaimRecord {
                claim_id: claim_id.clone(),
                bene_id: bene.bene_id.clone(),
                provider: provider_ids[provider_idx].clone(),
                claim_start,
                claim_end: discharge,
                reimbursed_amount,
                deductible_paid: Some(1_068.0),
                attending_physician: Some(format!("PHY{:04}", 1 + rng.random_range(0..500))),
                operating_physician: rng
                    .random_bool(0.4)
                    .then(|| format!("PHY{:04}", 1 + rng.random_range(0..500))),
                other_physician: rng
                    .random_bool(0.2)
                    .then(|| format!("PHY{:04}", 1 + rng.random_range(0..500))),
                diagnosis_codes,
                procedure_codes,
                admit_diagnosis_code: Some(format!("D{:04}", 1_000 + diagnosis_zipf.sample(rng))),
                admission_date: Some(claim_start),
                discharge_date: Some(discharge),
                setting: Setting::Inpatient,
            }
        } else {
            let duration = geometric(rng, 0.5, 25);
            let deductible_paid = if rng.random_bool(0.08) {
                None // exercises downstream imputation
            } else if rng.random_bool(0.5) {
                Some(0.0)
            } else {
                Some(lognormal_dollars(rng, 3.7, 0.8))
            };
            ClaimRecord {
                claim_id: claim_id.clone(),
                bene_id: bene.bene_id.clone(),
                provider: provider_ids[provider_idx].clone(),
                claim_start,
                claim_end: claim_start + chrono::Days::new(duration as u64),
                reimbursed_amount,
                deductible_paid,
                attending_physician: Some(format!("PHY{:04}", 1 + rng.random_range(0..500))),
                operating_physician: None,
                other_physician: rng
                    .random_bool(0.15)
                    .then(|| format!("PHY{:04}", 1 + rng.random_range(0..500))),
                diagnosis_codes,
                procedure_codes,
                admit_diagnosis_code: rng
                    .random_bool(0.3)
                    .then(|| format!("D{:04}", 1_000 + diagnosis_zipf.sample(rng))),
                admission_date: None,
                discharge_date: None,
                setting: Setting::Outpatient,
            }
        };

        if prolonged {
            manifest.prolonged_claim_ids.push(claim_id.clone());
        }
        let duplicate = fraud && rng.random_bool(config.duplicate_claim_rate);
        let copies = if duplicate { 2 } else { 1 };
        if duplicate {
            manifest.duplicated_claim_ids.push(claim_id.clone());
        }
        for _ in 0..copies {
            manifest.counts.claims_emitted += 1;
            if fraud {
                manifest.counts.fraud_claims += 1;
            }
            if is_inpatient {
                manifest.counts.inpatient_claims += 1;
                inpatient.push(claim.clone());
            } else {
                manifest.counts.outpatient_claims += 1;
                outpatient.push(claim.clone());
            }
        }
    }

    Ok((
        SynthTables { beneficiaries, inpatient, outpatient, labels },
        manifest,
    ))
}
