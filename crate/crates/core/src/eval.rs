//! Ground-truth datasets, relative-error accuracy and ambiguity statistics.
//!
//! All arithmetic is on exact rationals; values are rounded to four places
//! only when presented.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::MoneyValue;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate record for {key}")]
    Duplicate { line: usize, key: RecordKey },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no records to evaluate")]
    Empty,
    #[error("no tolerance levels configured")]
    NoLevels,
    #[error("no prediction for {0}")]
    MissingPrediction(RecordKey),
    #[error("relative percentage difference is undefined when both accuracies are zero")]
    UndefinedRpd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    #[serde(alias = "TableOnly")]
    TableOnly,
    #[default]
    #[serde(alias = "TextAndTable")]
    TextAndTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordKey {
    pub company: String,
    pub time: String,
    pub keyword: String,
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.company, self.time, self.keyword)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub company: String,
    pub time: String,
    pub keyword: String,
    #[serde(with = "decimal_string")]
    pub value_millions: Decimal,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub locus: Locus,
    /// Document file stem; defaults to the company name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

impl GroundTruthRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            company: self.company.clone(),
            time: self.time.clone(),
            keyword: self.keyword.clone(),
        }
    }

    pub fn doc_id(&self) -> &str {
        self.doc_id.as_deref().unwrap_or(&self.company)
    }
}

mod decimal_string {
    use rust_decimal::Decimal;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Decimal, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(d)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Decimal, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(serde_json::Number),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(t) => t,
            Raw::Number(n) => n.to_string(),
        };
        Decimal::from_str_exact(text.trim()).map_err(serde::de::Error::custom)
    }
}

/// Parses JSONL records, rejecting schema violations and repeated triples.
pub fn parse_dataset(text: &str) -> Result<Vec<GroundTruthRecord>, DatasetError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GroundTruthRecord = serde_json::from_str(line).map_err(|e| DatasetError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.keyword.trim().is_empty() {
            return Err(DatasetError::Schema {
                line: line_no,
                message: "keyword is empty".into(),
            });
        }
        if !seen.insert(rec.key()) {
            return Err(DatasetError::Duplicate {
                line: line_no,
                key: rec.key(),
            });
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn load_dataset(path: &Path) -> Result<Vec<GroundTruthRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_dataset(&text)
}

/// One line of a predictions file; `value` is null when nothing was extracted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub company: String,
    pub time: String,
    pub keyword: String,
    pub value: Option<String>,
}

impl PredictionRecord {
    pub fn new(key: &RecordKey, value: Option<&MoneyValue>) -> Self {
        Self {
            company: key.company.clone(),
            time: key.time.clone(),
            keyword: key.keyword.clone(),
            value: value.map(ToString::to_string),
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            company: self.company.clone(),
            time: self.time.clone(),
            keyword: self.keyword.clone(),
        }
    }
}

pub type Predictions = HashMap<RecordKey, Option<Decimal>>;

pub fn parse_predictions(text: &str) -> Result<Predictions, DatasetError> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| DatasetError::Schema { line: i + 1, message };
        let rec: PredictionRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        let value = match &rec.value {
            None => None,
            Some(v) => Some(crate::money::parse_money(v).map_err(|e| schema(e.to_string()))?),
        };
        if out.insert(rec.key(), value).is_some() {
            return Err(DatasetError::Duplicate {
                line: i + 1,
                key: rec.key(),
            });
        }
    }
    Ok(out)
}

/// A relative-error tolerance such as 0%, 0.001% or 5%.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RetaLevel {
    percent: Decimal,
}

impl RetaLevel {
    pub fn from_percent(percent: Decimal) -> Result<Self, String> {
        if percent.is_sign_negative() && !percent.is_zero() {
            return Err(format!("tolerance must be nonnegative, got {percent}%"));
        }
        Ok(Self {
            percent: percent.normalize(),
        })
    }

    pub fn tolerance(&self) -> BigRational {
        decimal_to_ratio(self.percent) / BigInt::from(100)
    }

    /// Default grid: 1%, 3%, 5%, 10%.
    pub fn standard() -> Vec<RetaLevel> {
        ["1%", "3%", "5%", "10%"].iter().map(|s| s.parse().expect("valid level")).collect()
    }

    /// Fine grid: 0%, 0.001%, 0.01%, 0.1%.
    pub fn fine() -> Vec<RetaLevel> {
        ["0%", "0.001%", "0.01%", "0.1%"].iter().map(|s| s.parse().expect("valid level")).collect()
    }
}

fn decimal_to_ratio(d: Decimal) -> BigRational {
    BigRational::new(BigInt::from(d.mantissa()), BigInt::from(10).pow(d.scale()))
}

/// Accepts `5%` or `0.05`.
impl FromStr for RetaLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num, percent) = match s.strip_suffix('%') {
            Some(n) => (n.trim(), true),
            None => (s, false),
        };
        let d = Decimal::from_str_exact(num).map_err(|_| format!("invalid tolerance {s:?}"))?;
        let pct = if percent {
            d
        } else {
            d.checked_mul(Decimal::ONE_HUNDRED).ok_or_else(|| format!("tolerance {s:?} out of range"))?
        };
        Self::from_percent(pct)
    }
}

/// Percentage label, e.g. `0.001%`.
impl fmt::Display for RetaLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.percent)
    }
}

impl Serialize for RetaLevel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RetaLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Boundary-inclusive relative-error test. A zero truth only accepts an
/// exact zero; an absent prediction is never correct.
pub fn reta_correct(truth: Decimal, pred: Option<Decimal>, tolerance: &BigRational) -> bool {
    let Some(pred) = pred else { return false };
    if truth.is_zero() {
        return pred.is_zero();
    }
    let t = decimal_to_ratio(truth);
    let diff = (decimal_to_ratio(pred) - &t).abs();
    diff <= tolerance * t.abs()
}

/// Fraction of `(truth, prediction)` pairs within tolerance.
pub fn accuracy(records: &[(Decimal, Option<Decimal>)], tolerance: &BigRational) -> Result<BigRational, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let correct = records.iter().filter(|(t, p)| reta_correct(*t, *p, tolerance)).count();
    Ok(BigRational::new(BigInt::from(correct), BigInt::from(records.len())))
}

pub fn mean(values: &[BigRational]) -> Result<BigRational, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    let sum = values.iter().fold(BigRational::zero(), |acc, v| acc + v);
    Ok(sum / BigInt::from(values.len()))
}

/// `|x - y| / ((x + y) / 2)`.
pub fn rpd(acc_x: &BigRational, acc_y: &BigRational) -> Result<BigRational, EvalError> {
    let sum = acc_x + acc_y;
    if sum.is_zero() {
        return Err(EvalError::UndefinedRpd);
    }
    Ok((acc_x - acc_y).abs() * BigInt::from(2) / sum)
}

/// Rounds half away from zero to `places` decimals and formats the result.
pub fn format_ratio(r: &BigRational, places: u32) -> String {
    let factor = BigInt::from(10).pow(places);
    let scaled = (r * &factor).round().to_integer();
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let places = places as usize;
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

pub fn ratio_from_decimal_str(s: &str) -> Result<BigRational, String> {
    Decimal::from_str_exact(s.trim())
        .map(decimal_to_ratio)
        .map_err(|e| format!("invalid decimal {s:?}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Every record weighs the same.
    #[default]
    Micro,
    /// Per-company accuracies are averaged.
    Macro,
}

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "micro" => Ok(Self::Micro),
            "macro" => Ok(Self::Macro),
            _ => Err(format!("unknown averaging {s:?} (expected micro or macro)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub key: RecordKey,
    pub truth: String,
    pub prediction: Option<String>,
    /// One entry per configured level, in order.
    pub correct: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelAccuracy {
    pub level: RetaLevel,
    pub accuracy: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub averaging: Averaging,
    pub levels: Vec<LevelAccuracy>,
    pub average: BigRational,
    pub absent_predictions: usize,
    pub verdicts: Vec<Verdict>,
}

fn level_accuracy(verdicts: &[&Verdict], level_idx: usize, averaging: Averaging) -> BigRational {
    let ratio = |vs: &[&Verdict]| {
        let correct = vs.iter().filter(|v| v.correct[level_idx]).count();
        BigRational::new(BigInt::from(correct), BigInt::from(vs.len()))
    };
    match averaging {
        Averaging::Micro => ratio(verdicts),
        Averaging::Macro => {
            let mut by_company: BTreeMap<&str, Vec<&Verdict>> = BTreeMap::new();
            for v in verdicts {
                by_company.entry(&v.key.company).or_default().push(v);
            }
            let per: Vec<BigRational> = by_company.values().map(|vs| ratio(vs)).collect();
            mean(&per).expect("at least one company")
        }
    }
}

/// Scores every dataset record at every level.
pub fn evaluate_run(
    dataset: &[GroundTruthRecord],
    predictions: &Predictions,
    levels: &[RetaLevel],
    averaging: Averaging,
) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::Empty);
    }
    if levels.is_empty() {
        return Err(EvalError::NoLevels);
    }
    let mut verdicts = Vec::with_capacity(dataset.len());
    for rec in dataset {
        let key = rec.key();
        let pred = *predictions
            .get(&key)
            .ok_or_else(|| EvalError::MissingPrediction(key.clone()))?;
        verdicts.push(Verdict {
            truth: rec.value_millions.to_string(),
            prediction: pred.map(|p| p.to_string()),
            correct: levels
                .iter()
                .map(|l| reta_correct(rec.value_millions, pred, &l.tolerance()))
                .collect(),
            key,
        });
    }
    let refs: Vec<&Verdict> = verdicts.iter().collect();
    let level_acc: Vec<LevelAccuracy> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| LevelAccuracy {
            level: l.clone(),
            accuracy: level_accuracy(&refs, i, averaging),
        })
        .collect();
    let average = mean(&level_acc.iter().map(|l| l.accuracy.clone()).collect::<Vec<_>>())?;
    Ok(EvalReport {
        averaging,
        absent_predictions: verdicts.iter().filter(|v| v.prediction.is_none()).count(),
        levels: level_acc,
        average,
        verdicts,
    })
}

impl EvalReport {
    /// Accuracy per level restricted to records whose keyword is in `keywords`.
    pub fn slice_accuracy(&self, keywords: &[&str]) -> Option<Vec<BigRational>> {
        let subset: Vec<&Verdict> = self
            .verdicts
            .iter()
            .filter(|v| keywords.contains(&v.key.keyword.as_str()))
            .collect();
        if subset.is_empty() {
            return None;
        }
        Some(
            (0..self.levels.len())
                .map(|i| level_accuracy(&subset, i, self.averaging))
                .collect(),
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        let levels: Vec<serde_json::Value> = self
            .levels
            .iter()
            .map(|l| {
                serde_json::json!({
                    "level": l.level.to_string(),
                    "accuracy": format_ratio(&l.accuracy, 4),
                    "exact": l.accuracy.to_string(),
                })
            })
            .collect();
        serde_json::json!({
            "averaging": self.averaging,
            "levels": levels,
            "average": format_ratio(&self.average, 4),
            "average_exact": self.average.to_string(),
            "records": self.verdicts.len(),
            "absent_predictions": self.absent_predictions,
            "verdicts": self.verdicts,
        })
    }

    /// Aligned table with one accuracy column per level and an average column.
    pub fn to_text(&self, row_label: &str) -> String {
        let mut header = vec!["Method".to_string()];
        header.extend(self.levels.iter().map(|l| format!("RETA {}", l.level)));
        header.push("Average".into());
        let mut row = vec![row_label.to_string()];
        row.extend(self.levels.iter().map(|l| format_ratio(&l.accuracy, 4)));
        row.push(format_ratio(&self.average, 4));
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join(" | ")
        };
        let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
        format!(
            "{}\n{rule}\n{}\nrecords: {}, absent predictions: {}\n",
            line(&header),
            line(&row),
            self.verdicts.len(),
            self.absent_predictions
        )
    }
}
