//! Record types for the three source tables plus provider labels, and the
//! CSV parsers that load them.
//!
//! Column names follow the public claims dataset. Lookups are exact-match
//! first with an ASCII-case-insensitive fallback (the public release
//! lowercases a couple of chronic-condition headers); writers always emit
//! the canonical names. Empty string means missing. Dates are strict ISO
//! `YYYY-MM-DD`. Malformed rows are rejected and counted unless the parse
//! runs in strict mode, which aborts on the first bad row.

use std::collections::HashSet;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// Whether a claim came from the inpatient or outpatient table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Inpatient,
    Outpatient,
}

impl Setting {
    pub fn table_name(self) -> &'static str {
        match self {
            Setting::Inpatient => "inpatient",
            Setting::Outpatient => "outpatient",
        }
    }
}

/// Abort on first rejected row, or reject-and-count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Permissive,
    Strict,
}

pub const N_DIAGNOSIS_SLOTS: usize = 10;
pub const N_PROCEDURE_SLOTS: usize = 6;
pub const N_CHRONIC_FLAGS: usize = 11;

/// Canonical chronic-condition column names, in schema order.
pub const CHRONIC_COLUMNS: [&str; N_CHRONIC_FLAGS] = [
    "ChronicCond_Alzheimer",
    "ChronicCond_Heartfailure",
    "ChronicCond_KidneyDisease",
    "ChronicCond_Cancer",
    "ChronicCond_ObstrPulmonary",
    "ChronicCond_Depression",
    "ChronicCond_Diabetes",
    "ChronicCond_IschemicHeart",
    "ChronicCond_Osteoporosis",
    "ChronicCond_RheumatoidArthritis",
    "ChronicCond_Stroke",
];

/// One row of the beneficiary table.
#[derive(Debug, Clone, PartialEq)]
pub struct BeneficiaryRecord {
    pub bene_id: String,
    pub dob: NaiveDate,
    pub dod: Option<NaiveDate>,
    pub gender: u32,
    pub race: u32,
    /// Raw indicator token, "Y" or "0" in the public data.
    pub renal_disease_indicator: String,
    pub state: u32,
    pub county: u32,
    pub months_part_a: u8,
    pub months_part_b: u8,
    /// Raw condition tokens in [`CHRONIC_COLUMNS`] order ("1" = yes, "2" = no).
    pub chronic_flags: Vec<String>,
    pub ip_annual_reimb: f64,
    pub ip_annual_deductible: f64,
    pub op_annual_reimb: f64,
    pub op_annual_deductible: f64,
}

/// One row of an inpatient or outpatient claims table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub bene_id: String,
    pub provider: String,
    pub claim_start: NaiveDate,
    pub claim_end: NaiveDate,
    pub reimbursed_amount: f64,
    pub deductible_paid: Option<f64>,
    pub attending_physician: Option<String>,
    pub operating_physician: Option<String>,
    pub other_physician: Option<String>,
    /// Ten diagnosis slots; empty slots are `None`.
    pub diagnosis_codes: Vec<Option<String>>,
    /// Six procedure slots; empty slots are `None`.
    pub procedure_codes: Vec<Option<String>>,
    pub admit_diagnosis_code: Option<String>,
    /// Present only in the inpatient schema; cells may still be empty per row.
    pub admission_date: Option<NaiveDate>,
    pub discharge_date: Option<NaiveDate>,
    pub setting: Setting,
}

/// Provider-level fraud label ("Yes"/"No" in the source file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderLabel {
    pub provider: String,
    pub potential_fraud: bool,
}

/// One rejected row, kept for diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RowReject {
    pub row: usize,
    pub field: String,
    pub message: String,
}

/// Bookkeeping for one table parse. `rows_in = records_out + rejected_rows`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ParseSummary {
    pub table: String,
    pub rows_in: usize,
    pub records_out: usize,
    pub rejected_rows: usize,
    /// Rows whose ClaimID repeats an earlier row. Duplicates are retained in
    /// the output; the count is a fraud signal, not a defect.
    pub duplicate_claim_ids: usize,
    pub rejects: Vec<RowReject>,
}

impl ParseSummary {
    fn new(table: &str) -> Self {
        ParseSummary {
            table: table.to_string(),
            rows_in: 0,
            records_out: 0,
            rejected_rows: 0,
            duplicate_claim_ids: 0,
            rejects: Vec::new(),
        }
    }

    fn reject(&mut self, err: &Error) {
        self.rejected_rows += 1;
        if self.rejects.len() < 1000 {
            if let Error::Row { row, field, message, .. } = err {
                self.rejects.push(RowReject {
                    row: *row,
                    field: field.clone(),
                    message: message.clone(),
                });
            }
        }
    }
}

/// Parsed records plus the parse summary.
#[derive(Debug, Clone)]
pub struct ParseOutcome<T> {
    pub records: Vec<T>,
    pub summary: ParseSummary,
}

/// Strict ISO `YYYY-MM-DD` parse; anything else is rejected.
pub fn parse_iso_date(s: &str) -> Option<NaiveDate> {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    for (i, &c) in b.iter().enumerate() {
        if i != 4 && i != 7 && !c.is_ascii_digit() {
            return None;
        }
    }
    let year: i32 = s[0..4].parse().ok()?;
    let month: u32 = s[5..7].parse().ok()?;
    let day: u32 = s[8..10].parse().ok()?;
    NaiveDate::from_ymd_opt(year, month, day)
}

/// Canonical rendering; any accepted date re-formats to its input string.
pub fn format_iso_date(d: NaiveDate) -> String {
    format!("{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
}

/// Resolves required header columns to indices, exact then case-insensitive.
struct HeaderMap {
    table: String,
    lower: Vec<(String, usize)>,
    exact: Vec<(String, usize)>,
}

impl HeaderMap {
    fn new(table: &str, header: &csv::StringRecord) -> Self {
        let exact = header
            .iter()
            .enumerate()
            .map(|(i, name)| (name.to_string(), i))
            .collect::<Vec<_>>();
        let lower = header
            .iter()
            .enumerate()
            .map(|(i, name)| (name.to_ascii_lowercase(), i))
            .collect::<Vec<_>>();
        HeaderMap {
            table: table.to_string(),
            lower,
            exact,
        }
    }

    fn require(&self, canonical: &str) -> Result<usize> {
        if let Some((_, i)) = self.exact.iter().find(|(n, _)| n == canonical) {
            return Ok(*i);
        }
        let needle = canonical.to_ascii_lowercase();
        if let Some((_, i)) = self.lower.iter().find(|(n, _)| n == &needle) {
            return Ok(*i);
        }
        Err(Error::MissingColumn {
            table: self.table.clone(),
            column: canonical.to_string(),
        })
    }
}

/// Cell accessor treating out-of-range and empty as missing.
fn cell(record: &csv::StringRecord, idx: usize) -> Option<&str> {
    match record.get(idx) {
        Some("") | None => None,
        Some(v) => Some(v),
    }
}

fn required<'r>(
    record: &'r csv::StringRecord,
    idx: usize,
    table: &str,
    row: usize,
    field: &str,
) -> Result<&'r str> {
    cell(record, idx).ok_or_else(|| Error::row(table, row, field, "required cell is empty"))
}

fn parse_date_cell(v: &str, table: &str, row: usize, field: &str) -> Result<NaiveDate> {
    parse_iso_date(v)
        .ok_or_else(|| Error::row(table, row, field, format!("unparseable date {v:?}")))
}

fn parse_f64_cell(v: &str, table: &str, row: usize, field: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::row(table, row, field, format!("unparseable number {v:?}")))
}

fn parse_u32_cell(v: &str, table: &str, row: usize, field: &str) -> Result<u32> {
    v.parse::<u32>()
        .map_err(|_| Error::row(table, row, field, format!("unparseable integer {v:?}")))
}

fn reader_for<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(source)
}

/// Applies strict/permissive handling of one row result.
fn settle<T>(
    res: Result<T>,
    records: &mut Vec<T>,
    summary: &mut ParseSummary,
    mode: ParseMode,
) -> Result<()> {
    match res {
        Ok(rec) => {
            records.push(rec);
            summary.records_out += 1;
            Ok(())
        }
        Err(err) => match mode {
            ParseMode::Strict => Err(Error::Strict(Box::new(err))),
            ParseMode::Permissive => {
                summary.reject(&err);
                Ok(())
            }
        },
    }
}

/// Parses the beneficiary table.
pub fn parse_beneficiaries<R: Read>(
    source: R,
    mode: ParseMode,
) -> Result<ParseOutcome<BeneficiaryRecord>> {
    const TABLE: &str = "beneficiary";
    let mut reader = reader_for(source);
    let header = reader
        .headers()
        .map_err(|e| Error::Data(format!("{TABLE} header: {e}")))?
        .clone();
    let map = HeaderMap::new(TABLE, &header);

    let idx_bene = map.require("BeneID")?;
    let idx_dob = map.require("DOB")?;
    let idx_dod = map.require("DOD")?;
    let idx_gender = map.require("Gender")?;
    let idx_race = map.require("Race")?;
    let idx_renal = map.require("RenalDiseaseIndicator")?;
    let idx_state = map.require("State")?;
    let idx_county = map.require("County")?;
    let idx_months_a = map.require("NoOfMonths_PartACov")?;
    let idx_months_b = map.require("NoOfMonths_PartBCov")?;
    let idx_chronic: Vec<usize> = CHRONIC_COLUMNS
        .iter()
        .map(|c| map.require(c))
        .collect::<Result<_>>()?;
    let idx_ip_reimb = map.require("IPAnnualReimbursementAmt")?;
    let idx_ip_ded = map.require("IPAnnualDeductibleAmt")?;
    let idx_op_reimb = map.require("OPAnnualReimbursementAmt")?;
    let idx_op_ded = map.require("OPAnnualDeductibleAmt")?;

    let mut summary = ParseSummary::new(TABLE);
    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        summary.rows_in += 1;
        let res = (|| -> Result<BeneficiaryRecord> {
            let record = record.map_err(|e| Error::row(TABLE, row, "<row>", e.to_string()))?;
            let bene_id = required(&record, idx_bene, TABLE, row, "BeneID")?.to_string();
            if !seen_ids.insert(bene_id.clone()) {
                return Err(Error::row(TABLE, row, "BeneID", format!("duplicate id {bene_id:?}")));
            }
            let dob = parse_date_cell(required(&record, idx_dob, TABLE, row, "DOB")?, TABLE, row, "DOB")?;
            let dod = cell(&record, idx_dod)
                .map(|v| parse_date_cell(v, TABLE, row, "DOD"))
                .transpose()?;
            if let Some(d) = dod {
                if d < dob {
                    return Err(Error::row(TABLE, row, "DOD", "date of death precedes date of birth"));
                }
            }
            let months = |idx: usize, field: &str| -> Result<u8> {
                let v = required(&record, idx, TABLE, row, field)?;
                let n = parse_u32_cell(v, TABLE, row, field)?;
                if n > 12 {
                    return Err(Error::row(TABLE, row, field, format!("months {n} outside [0, 12]")));
                }
                Ok(n as u8)
            };
            let chronic_flags = idx_chronic
                .iter()
                .zip(CHRONIC_COLUMNS.iter())
                .map(|(&idx, col)| Ok(required(&record, idx, TABLE, row, col)?.to_string()))
                .collect::<Result<Vec<_>>>()?;
            Ok(BeneficiaryRecord {
                bene_id,
                dob,
                dod,
                gender: parse_u32_cell(required(&record, idx_gender, TABLE, row, "Gender")?, TABLE, row, "Gender")?,
                race: parse_u32_cell(required(&record, idx_race, TABLE, row, "Race")?, TABLE, row, "Race")?,
                renal_disease_indicator: required(&record, idx_renal, TABLE, row, "RenalDiseaseIndicator")?.to_string(),
                state: parse_u32_cell(required(&record, idx_state, TABLE, row, "State")?, TABLE, row, "State")?,
                county: parse_u32_cell(required(&record, idx_county, TABLE, row, "County")?, TABLE, row, "County")?,
                months_part_a: months(idx_months_a, "NoOfMonths_PartACov")?,
                months_part_b: months(idx_months_b, "NoOfMonths_PartBCov")?,
                chronic_flags,
                ip_annual_reimb: parse_f64_cell(required(&record, idx_ip_reimb, TABLE, row, "IPAnnualReimbursementAmt")?, TABLE, row, "IPAnnualReimbursementAmt")?,
                ip_annual_deductible: parse_f64_cell(required(&record, idx_ip_ded, TABLE, row, "IPAnnualDeductibleAmt")?, TABLE, row, "IPAnnualDeductibleAmt")?,
                op_annual_reimb: parse_f64_cell(required(&record, idx_op_reimb, TABLE, row, "OPAnnualReimbursementAmt")?, TABLE, row, "OPAnnualReimbursementAmt")?,
                op_annual_deductible: parse_f64_cell(required(&record, idx_op_ded, TABLE, row, "OPAnnualDeductibleAmt")?, TABLE, row, "OPAnnualDeductibleAmt")?,
            })
        })();
        // Failed insert above still consumed the id; only real records count.
        settle(res, &mut records, &mut summary, mode)?;
    }
    Ok(ParseOutcome { records, summary })
}

/// Parses an inpatient or outpatient claims table.
pub fn parse_claims<R: Read>(
    source: R,
    setting: Setting,
    mode: ParseMode,
) -> Result<ParseOutcome<ClaimRecord>> {
    let table = setting.table_name();
    let mut reader = reader_for(source);
    let header = reader
        .headers()
        .map_err(|e| Error::Data(format!("{table} header: {e}")))?
        .clone();
    let map = HeaderMap::new(table, &header);

    let idx_claim = map.require("ClaimID")?;
    let idx_bene = map.require("BeneID")?;
    let idx_provider = map.require("Provider")?;
    let idx_start = map.require("ClaimStartDt")?;
    let idx_end = map.require("ClaimEndDt")?;
    let idx_reimb = map.require("InscClaimAmtReimbursed")?;
    let idx_ded = map.require("DeductibleAmtPaid")?;
    let idx_attending = map.require("AttendingPhysician")?;
    let idx_operating = map.require("OperatingPhysician")?;
    let idx_other = map.require("OtherPhysician")?;
    let idx_admit_code = map.require("ClmAdmitDiagnosisCode")?;
    let idx_diag: Vec<usize> = (1..=N_DIAGNOSIS_SLOTS)
        .map(|k| map.require(&format!("ClmDiagnosisCode_{k}")))
        .collect::<Result<_>>()?;
    let idx_proc: Vec<usize> = (1..=N_PROCEDURE_SLOTS)
        .map(|k| map.require(&format!("ClmProcedureCode_{k}")))
        .collect::<Result<_>>()?;
    // Admission/discharge columns exist only in the inpatient schema.
    let idx_admission = match setting {
        Setting::Inpatient => Some((map.require("AdmissionDt")?, map.require("DischargeDt")?)),
        Setting::Outpatient => None,
    };

    let mut summary = ParseSummary::new(table);
    let mut records = Vec::new();
    let mut seen_claims: HashSet<String> = HashSet::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        summary.rows_in += 1;
        let res = (|| -> Result<ClaimRecord> {
            let record = record.map_err(|e| Error::row(table, row, "<row>", e.to_string()))?;
            let claim_id = required(&record, idx_claim, table, row, "ClaimID")?.to_string();
            let claim_start = parse_date_cell(required(&record, idx_start, table, row, "ClaimStartDt")?, table, row, "ClaimStartDt")?;
            let claim_end = parse_date_cell(required(&record, idx_end, table, row, "ClaimEndDt")?, table, row, "ClaimEndDt")?;
            if claim_end < claim_start {
                return Err(Error::row(table, row, "ClaimEndDt", "claim end precedes claim start"));
            }
            let (admission_date, discharge_date) = match idx_admission {
                Some((ia, id)) => {
                    let adm = cell(&record, ia)
                        .map(|v| parse_date_cell(v, table, row, "AdmissionDt"))
                        .transpose()?;
                    let dis = cell(&record, id)
                        .map(|v| parse_date_cell(v, table, row, "DischargeDt"))
                        .transpose()?;
                    if let (Some(a), Some(d)) = (adm, dis) {
                        if d < a {
                            return Err(Error::row(table, row, "DischargeDt", "discharge precedes admission"));
                        }
                    }
                    (adm, dis)
                }
                None => (None, None),
            };
            let diagnosis_codes = idx_diag
                .iter()
                .map(|&idx| cell(&record, idx).map(str::to_string))
                .collect();
            let procedure_codes = idx_proc
                .iter()
                .map(|&idx| cell(&record, idx).map(str::to_string))
                .collect();
            Ok(ClaimRecord {
                claim_id,
                bene_id: required(&record, idx_bene, table, row, "BeneID")?.to_string(),
                provider: required(&record, idx_provider, table, row, "Provider")?.to_string(),
                claim_start,
                claim_end,
                reimbursed_amount: parse_f64_cell(required(&record, idx_reimb, table, row, "InscClaimAmtReimbursed")?, table, row, "InscClaimAmtReimbursed")?,
                deductible_paid: cell(&record, idx_ded)
                    .map(|v| parse_f64_cell(v, table, row, "DeductibleAmtPaid"))
                    .transpose()?,
                attending_physician: cell(&record, idx_attending).map(str::to_string),
                operating_physician: cell(&record, idx_operating).map(str::to_string),
                other_physician: cell(&record, idx_other).map(str::to_string),
                diagnosis_codes,
                procedure_codes,
                admit_diagnosis_code: cell(&record, idx_admit_code).map(str::to_string),
                admission_date,
                discharge_date,
                setting,
            })
        })();
        if let Ok(rec) = &res {
            if !seen_claims.insert(rec.claim_id.clone()) {
                summary.duplicate_claim_ids += 1;
            }
        }
        settle(res, &mut records, &mut summary, mode)?;
    }
    Ok(ParseOutcome { records, summary })
}

/// Parses the provider label table (`Provider`, `PotentialFraud`).
pub fn parse_labels<R: Read>(source: R, mode: ParseMode) -> Result<ParseOutcome<ProviderLabel>> {
    const TABLE: &str = "labels";
    let mut reader = reader_for(source);
    let header = reader
        .headers()
        .map_err(|e| Error::Data(format!("{TABLE} header: {e}")))?
        .clone();
    let map = HeaderMap::new(TABLE, &header);
    let idx_provider = map.require("Provider")?;
    let idx_fraud = map.require("PotentialFraud")?;

    let mut summary = ParseSummary::new(TABLE);
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        summary.rows_in += 1;
        let res = (|| -> Result<ProviderLabel> {
            let record = record.map_err(|e| Error::row(TABLE, row, "<row>", e.to_string()))?;
            let provider = required(&record, idx_provider, TABLE, row, "Provider")?.to_string();
            if !seen.insert(provider.clone()) {
                return Err(Error::row(TABLE, row, "Provider", format!("duplicate provider {provider:?}")));
            }
            let potential_fraud = match required(&record, idx_fraud, TABLE, row, "PotentialFraud")? {
                "Yes" => true,
                "No" => false,
                other => {
                    return Err(Error::row(
                        TABLE,
                        row,
                        "PotentialFraud",
                        format!("expected \"Yes\" or \"No\", got {other:?}"),
                    ))
                }
            };
            Ok(ProviderLabel { provider, potential_fraud })
        })();
        settle(res, &mut records, &mut summary, mode)?;
    }
    Ok(ParseOutcome { records, summary })
}

fn opt_str(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("")
}

fn opt_date(v: &Option<NaiveDate>) -> String {
    v.map(format_iso_date).unwrap_or_default()
}

/// Full beneficiary header in canonical order.
pub fn beneficiary_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "BeneID", "DOB", "DOD", "Gender", "Race", "RenalDiseaseIndicator", "State", "County",
        "NoOfMonths_PartACov", "NoOfMonths_PartBCov",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(CHRONIC_COLUMNS.iter().map(|s| s.to_string()));
    h.extend(
        ["IPAnnualReimbursementAmt", "IPAnnualDeductibleAmt", "OPAnnualReimbursementAmt", "OPAnnualDeductibleAmt"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

/// Claims header for the given setting, canonical order.
pub fn claims_header(setting: Setting) -> Vec<String> {
    let mut h: Vec<String> = [
        "BeneID", "ClaimID", "ClaimStartDt", "ClaimEndDt", "Provider", "InscClaimAmtReimbursed",
        "AttendingPhysician", "OperatingPhysician", "OtherPhysician",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if setting == Setting::Inpatient {
        h.push("AdmissionDt".to_string());
        h.push("DischargeDt".to_string());
    }
    h.push("ClmAdmitDiagnosisCode".to_string());
    h.push("DeductibleAmtPaid".to_string());
    for k in 1..=N_DIAGNOSIS_SLOTS {
        h.push(format!("ClmDiagnosisCode_{k}"));
    }
    for k in 1..=N_PROCEDURE_SLOTS {
        h.push(format!("ClmProcedureCode_{k}"));
    }
    h
}

/// Writes beneficiaries with canonical headers; inverse of [`parse_beneficiaries`].
pub fn write_beneficiaries<W: Write>(records: &[BeneficiaryRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let fail = |e: csv::Error| Error::Data(format!("write beneficiaries: {e}"));
    w.write_record(beneficiary_header()).map_err(fail)?;
    for r in records {
        let mut cells = vec![
            r.bene_id.clone(),
            format_iso_date(r.dob),
            opt_date(&r.dod),
            r.gender.to_string(),
            r.race.to_string(),
            r.renal_disease_indicator.clone(),
            r.state.to_string(),
            r.county.to_string(),
            r.months_part_a.to_string(),
            r.months_part_b.to_string(),
        ];
        cells.extend(r.chronic_flags.iter().cloned());
        cells.push(format!("{}", r.ip_annual_reimb));
        cells.push(format!("{}", r.ip_annual_deductible));
        cells.push(format!("{}", r.op_annual_reimb));
        cells.push(format!("{}", r.op_annual_deductible));
        w.write_record(&cells).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("<beneficiaries>", e))
}

/// Writes claims with canonical headers; inverse of [`parse_claims`].
pub fn write_claims<W: Write>(records: &[ClaimRecord], setting: Setting, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let fail = |e: csv::Error| Error::Data(format!("write claims: {e}"));
    w.write_record(claims_header(setting)).map_err(fail)?;
    for r in records {
        let mut cells = vec![
            r.bene_id.clone(),
            r.claim_id.clone(),
            format_iso_date(r.claim_start),
            format_iso_date(r.claim_end),
            r.provider.clone(),
            format!("{}", r.reimbursed_amount),
            opt_str(&r.attending_physician).to_string(),
            opt_str(&r.operating_physician).to_string(),
            opt_str(&r.other_physician).to_string(),
        ];
        if setting == Setting::Inpatient {
            cells.push(opt_date(&r.admission_date));
            cells.push(opt_date(&r.discharge_date));
        }
        cells.push(opt_str(&r.admit_diagnosis_code).to_string());
        cells.push(r.deductible_paid.map(|v| format!("{v}")).unwrap_or_default());
        for slot in &r.diagnosis_codes {
            cells.push(opt_str(slot).to_string());
        }
        for slot in &r.procedure_codes {
            cells.push(opt_str(slot).to_string());
        }
        w.write_record(&cells).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("<claims>", e))
}

/// Writes provider labels; inverse of [`parse_labels`].
pub fn write_labels<W: Write>(records: &[ProviderLabel], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let fail = |e: csv::Error| Error::Data(format!("write labels: {e}"));
    w.write_record(["Provider", "PotentialFraud"]).map_err(fail)?;
    for r in records {
        w.write_record([r.provider.as_str(), if r.potential_fraud { "Yes" } else { "No" }])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("<labels>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENE_CSV: &str = "\
BeneID,DOB,DOD,Gender,Race,RenalDiseaseIndicator,State,County,NoOfMonths_PartACov,NoOfMonths_PartBCov,ChronicCond_Alzheimer,ChronicCond_Heartfailure,ChronicCond_KidneyDisease,ChronicCond_Cancer,ChronicCond_ObstrPulmonary,ChronicCond_Depression,ChronicCond_Diabetes,ChronicCond_IschemicHeart,ChronicCond_Osteoporosis,ChronicCond_rheumatoidarthritis,ChronicCond_stroke,IPAnnualReimbursementAmt,IPAnnualDeductibleAmt,OPAnnualReimbursementAmt,OPAnnualDeductibleAmt
BENE11001,1936-09-01,,1,1,Y,39,230,12,12,1,1,2,2,2,1,1,1,2,2,2,36000,3204,60,70
BENE11002,1943-01-01,2009-06-30,2,3,0,39,280,12,12,2,2,2,2,2,2,2,2,2,2,2,0,0,30,50
";

    #[test]
    fn parses_beneficiaries_with_lowercase_fallback_headers() {
        let out = parse_beneficiaries(BENE_CSV.as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(out.records.len(), 2);
        let r = &out.records[0];
        assert_eq!(r.bene_id, "BENE11001");
        assert_eq!(r.dod, None);
        assert_eq!(r.months_part_a, 12);
        assert_eq!(r.chronic_flags[9], "2");
        assert_eq!(out.records[1].dod, Some(NaiveDate::from_ymd_opt(2009, 6, 30).unwrap()));
        assert_eq!(out.summary.rows_in, 2);
        assert_eq!(out.summary.records_out, 2);
    }

    #[test]
    fn missing_header_names_the_column() {
        let csv = "DOB,DOD\n1936-09-01,\n";
        let err = parse_beneficiaries(csv.as_bytes(), ParseMode::Permissive).unwrap_err();
        match err {
            Error::MissingColumn { column, .. } => assert_eq!(column, "BeneID"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    /// The public release orders the inpatient columns differently from our
    /// writer and carries an extra DiagnosisGroupCode column; resolution is
    /// by name, so both must parse.
    #[test]
    fn public_release_inpatient_column_order_parses() {
        let mut header = vec![
            "BeneID", "ClaimID", "ClaimStartDt", "ClaimEndDt", "Provider",
            "InscClaimAmtReimbursed", "AttendingPhysician", "OperatingPhysician",
            "OtherPhysician", "AdmissionDt", "ClmAdmitDiagnosisCode", "DeductibleAmtPaid",
            "DischargeDt", "DiagnosisGroupCode",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        for k in 1..=N_DIAGNOSIS_SLOTS {
            header.push(format!("ClmDiagnosisCode_{k}"));
        }
        for k in 1..=N_PROCEDURE_SLOTS {
            header.push(format!("ClmProcedureCode_{k}"));
        }
        let mut row = vec![
            "BENE11001", "CLM46614", "2009-04-12", "2009-04-18", "PRV55912", "26000",
            "PHY390922", "", "", "2009-04-12", "7866", "1068", "2009-04-18", "201",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        row.push("1970".to_string()); // ClmDiagnosisCode_1
        row.extend(std::iter::repeat_n(String::new(), N_DIAGNOSIS_SLOTS - 1));
        row.extend(std::iter::repeat_n(String::new(), N_PROCEDURE_SLOTS));
        let csv = format!("{}\n{}\n", header.join(","), row.join(","));

        let out = parse_claims(csv.as_bytes(), Setting::Inpatient, ParseMode::Strict).unwrap();
        let r = &out.records[0];
        assert_eq!(r.claim_id, "CLM46614");
        assert_eq!(r.deductible_paid, Some(1068.0));
        assert_eq!(r.admit_diagnosis_code.as_deref(), Some("7866"));
        assert_eq!(r.discharge_date, Some(NaiveDate::from_ymd_opt(2009, 4, 18).unwrap()));
        assert_eq!(r.diagnosis_codes[0].as_deref(), Some("1970"));
        assert_eq!(r.attending_physician.as_deref(), Some("PHY390922"));
    }

    #[test]
    fn bad_date_is_row_error_with_location() {
        let csv = BENE_CSV.replace("1936-09-01", "09/01/1936");
        let out = parse_beneficiaries(csv.as_bytes(), ParseMode::Permissive).unwrap();
        assert_eq!(out.summary.rejected_rows, 1);
        assert_eq!(out.summary.records_out, 1);
        assert_eq!(out.summary.rows_in, 2);
        assert_eq!(out.summary.rejects[0].field, "DOB");
        let err = parse_beneficiaries(csv.as_bytes(), ParseMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Strict(_)));
    }

    #[test]
    fn date_parse_is_strict_iso() {
        assert!(parse_iso_date("2009-01-05").is_some());
        assert!(parse_iso_date("2009-1-05").is_none());
        assert!(parse_iso_date("2009/01/05").is_none());
        assert!(parse_iso_date("2009-13-05").is_none());
        assert!(parse_iso_date(" 2009-01-05").is_none());
        let d = parse_iso_date("2009-01-05").unwrap();
        assert_eq!(format_iso_date(d), "2009-01-05");
    }

    /// Builds a claims row by header name so fixtures never miscount columns.
    fn claims_row(setting: Setting, set: &[(&str, &str)]) -> String {
        let header = claims_header(setting);
        let mut cells = vec![String::new(); header.len()];
        for (name, value) in set {
            let idx = header.iter().position(|h| h == name).expect("fixture column");
            cells[idx] = value.to_string();
        }
        cells.join(",")
    }

    fn outpatient_csv() -> String {
        let header = claims_header(Setting::Outpatient).join(",");
        let row1 = claims_row(
            Setting::Outpatient,
            &[
                ("BeneID", "BENE11001"),
                ("ClaimID", "CLM1"),
                ("ClaimStartDt", "2009-01-05"),
                ("ClaimEndDt", "2009-01-07"),
                ("Provider", "PRV51001"),
                ("InscClaimAmtReimbursed", "300"),
                ("AttendingPhysician", "PHY1"),
                ("ClmAdmitDiagnosisCode", "A100"),
                ("DeductibleAmtPaid", "20"),
                ("ClmDiagnosisCode_1", "D1"),
            ],
        );
        let row2 = claims_row(
            Setting::Outpatient,
            &[
                ("BeneID", "BENE11002"),
                ("ClaimID", "CLM2"),
                ("ClaimStartDt", "2009-02-01"),
                ("ClaimEndDt", "2009-02-01"),
                ("Provider", "PRV51002"),
                ("InscClaimAmtReimbursed", "80"),
                ("ClmDiagnosisCode_1", "D2"),
                ("ClmDiagnosisCode_2", "D3"),
                ("ClmProcedureCode_1", "P1"),
            ],
        );
        format!("{header}\n{row1}\n{row2}\n")
    }

    #[test]
    fn outpatient_rows_have_no_admission_fields() {
        let out = parse_claims(outpatient_csv().as_bytes(), Setting::Outpatient, ParseMode::Strict).unwrap();
        assert_eq!(out.records.len(), 2);
        let r = &out.records[0];
        assert_eq!(r.setting, Setting::Outpatient);
        assert_eq!(r.admission_date, None);
        assert_eq!(r.discharge_date, None);
        assert_eq!(r.deductible_paid, Some(20.0));
        assert_eq!(r.diagnosis_codes[0].as_deref(), Some("D1"));
        assert_eq!(out.records[1].procedure_codes[0].as_deref(), Some("P1"));
        assert_eq!(out.records[1].deductible_paid, None);
    }

    fn inpatient_csv() -> String {
        let header = claims_header(Setting::Inpatient).join(",");
        let row = claims_row(
            Setting::Inpatient,
            &[
                ("BeneID", "BENE11001"),
                ("ClaimID", "CLM9"),
                ("ClaimStartDt", "2009-01-05"),
                ("ClaimEndDt", "2009-01-09"),
                ("Provider", "PRV51001"),
                ("InscClaimAmtReimbursed", "5000"),
                ("AttendingPhysician", "PHY1"),
                ("OperatingPhysician", "PHY2"),
                ("AdmissionDt", "2009-01-05"),
                ("DischargeDt", "2009-01-09"),
                ("ClmAdmitDiagnosisCode", "A1"),
                ("DeductibleAmtPaid", "1068"),
                ("ClmDiagnosisCode_1", "D1"),
                ("ClmDiagnosisCode_2", "D2"),
                ("ClmProcedureCode_1", "P9"),
            ],
        );
        format!("{header}\n{row}\n")
    }

    #[test]
    fn inpatient_stay_dates_parse() {
        let out = parse_claims(inpatient_csv().as_bytes(), Setting::Inpatient, ParseMode::Strict).unwrap();
        let r = &out.records[0];
        assert_eq!(r.admission_date, Some(NaiveDate::from_ymd_opt(2009, 1, 5).unwrap()));
        assert_eq!(r.discharge_date, Some(NaiveDate::from_ymd_opt(2009, 1, 9).unwrap()));
        assert_eq!((r.discharge_date.unwrap() - r.admission_date.unwrap()).num_days(), 4);
    }

    #[test]
    fn claim_end_before_start_rejected_and_counted() {
        let csv = outpatient_csv().replace("2009-01-05,2009-01-07", "2009-01-08,2009-01-07");
        let out = parse_claims(csv.as_bytes(), Setting::Outpatient, ParseMode::Permissive).unwrap();
        assert_eq!(out.summary.rejected_rows, 1);
        assert_eq!(out.summary.rows_in, out.summary.records_out + out.summary.rejected_rows);
    }

    #[test]
    fn duplicate_claim_ids_are_retained_and_flagged() {
        let csv = outpatient_csv().replace("CLM2", "CLM1");
        let out = parse_claims(csv.as_bytes(), Setting::Outpatient, ParseMode::Strict).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.summary.duplicate_claim_ids, 1);
    }

    #[test]
    fn labels_map_yes_no_and_reject_others() {
        let csv = "Provider,PotentialFraud\nPRV51001,Yes\nPRV51002,No\n";
        let out = parse_labels(csv.as_bytes(), ParseMode::Strict).unwrap();
        assert!(out.records[0].potential_fraud);
        assert!(!out.records[1].potential_fraud);

        let bad = "Provider,PotentialFraud\nPRV51003,maybe\n";
        let out = parse_labels(bad.as_bytes(), ParseMode::Permissive).unwrap();
        assert_eq!(out.summary.rejected_rows, 1);
        assert!(parse_labels(bad.as_bytes(), ParseMode::Strict).is_err());
    }

    #[test]
    fn beneficiary_round_trip() {
        let out = parse_beneficiaries(BENE_CSV.as_bytes(), ParseMode::Strict).unwrap();
        let mut buf = Vec::new();
        write_beneficiaries(&out.records, &mut buf).unwrap();
        let again = parse_beneficiaries(buf.as_slice(), ParseMode::Strict).unwrap();
        assert_eq!(out.records, again.records);
    }

    #[test]
    fn claims_round_trip_both_settings() {
        let out = parse_claims(outpatient_csv().as_bytes(), Setting::Outpatient, ParseMode::Strict).unwrap();
        let mut buf = Vec::new();
        write_claims(&out.records, Setting::Outpatient, &mut buf).unwrap();
        let again = parse_claims(buf.as_slice(), Setting::Outpatient, ParseMode::Strict).unwrap();
        assert_eq!(out.records, again.records);

        let out = parse_claims(inpatient_csv().as_bytes(), Setting::Inpatient, ParseMode::Strict).unwrap();
        let mut buf = Vec::new();
        write_claims(&out.records, Setting::Inpatient, &mut buf).unwrap();
        let again = parse_claims(buf.as_slice(), Setting::Inpatient, ParseMode::Strict).unwrap();
        assert_eq!(out.records, again.records);
    }
}
