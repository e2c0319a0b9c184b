//! Exact money amounts in millions.
//!
//! Amounts are `rust_decimal::Decimal` values, so parsing, scaling and
//! rounding never touch binary floating point. Rounding is half away from
//! zero: `1.005` at two places is `1.01`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse money expression {0:?}")]
pub struct MoneyParseError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Thousand,
    Million,
    Billion,
}

impl Scale {
    fn from_word(word: &str) -> Option<Self> {
        match word.to_ascii_lowercase().trim_end_matches('s') {
            "thousand" => Some(Self::Thousand),
            "million" => Some(Self::Million),
            "billion" => Some(Self::Billion),
            _ => None,
        }
    }

    /// Multiplier that converts an amount at this scale into millions.
    pub fn to_millions(self) -> Decimal {
        match self {
            Self::Thousand => Decimal::new(1, 3),
            Self::Million => Decimal::ONE,
            Self::Billion => Decimal::from(1000),
        }
    }
}

const NUMBER: &str = r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?|\.\d+";

fn full_grammar() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(
            r"(?i)^(?P<minus>-)?\s*\$?\s*(?P<open>\()?\s*(?P<minus2>-)?\s*\$?\s*(?P<num>{NUMBER})\s*(?P<close>\))?\s*(?P<scale>thousands?|millions?|billions?)?\s*(?P<close2>\))?\.?$"
        ))
        .expect("money grammar compiles")
    })
}

fn scan_grammar() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(
            r"(?i)(?P<open>\()?(?P<dollar>\$)?\s?(?P<num>{NUMBER})(?P<close>\))?(?:\s*(?P<scale>thousand|million|billion)s?\b)?"
        ))
        .expect("money scan pattern compiles")
    })
}

fn parse_number(digits: &str) -> Option<Decimal> {
    let cleaned = digits.replace(',', "");
    let cleaned = if cleaned.starts_with('.') {
        format!("0{cleaned}")
    } else {
        cleaned
    };
    Decimal::from_str_exact(&cleaned).ok()
}

/// Parses a money expression into an exact amount in millions.
///
/// Accepts an optional `$`, comma digit groups, a fraction, accounting-style
/// parentheses (negative), a leading minus, and an optional scale word.
/// A bare number is taken to already be in millions.
pub fn parse_money(text: &str) -> Result<Decimal, MoneyParseError> {
    let err = || MoneyParseError(text.to_string());
    let caps = full_grammar().captures(text.trim()).ok_or_else(err)?;
    let open = caps.name("open").is_some();
    let close = caps.name("close").is_some() || caps.name("close2").is_some();
    if open != close || (caps.name("close").is_some() && caps.name("close2").is_some()) {
        return Err(err());
    }
    let negative = open || caps.name("minus").is_some() || caps.name("minus2").is_some();
    if open && (caps.name("minus").is_some() || caps.name("minus2").is_some()) {
        return Err(err());
    }
    let mut value = parse_number(&caps["num"]).ok_or_else(err)?;
    if let Some(scale) = caps.name("scale").and_then(|m| Scale::from_word(m.as_str())) {
        value = value.checked_mul(scale.to_millions()).ok_or_else(err)?;
    }
    if negative {
        value.set_sign_negative(true);
    }
    Ok(value.normalize())
}

pub fn round_half_away(value: Decimal, precision: u32) -> Decimal {
    let mut rounded = value.round_dp_with_strategy(precision, RoundingStrategy::MidpointAwayFromZero);
    rounded.rescale(precision);
    rounded
}

/// Fixed-point rendering with comma digit groups, e.g. `65,135.00`.
pub fn render(value: Decimal, precision: u32) -> String {
    let plain = round_half_away(value, precision).abs().to_string();
    let (int_part, frac) = match plain.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (plain.as_str(), None),
    };
    let mut grouped = String::with_capacity(plain.len() + plain.len() / 3);
    for (i, ch) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    if let Some(f) = frac {
        grouped.push('.');
        grouped.push_str(f);
    }
    if value.is_sign_negative() && !round_half_away(value, precision).is_zero() {
        format!("-{grouped}")
    } else {
        grouped
    }
}

/// A money expression found inside free text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoneyMatch {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub has_dollar: bool,
    pub has_scale: bool,
}

/// Every money-looking expression in `text`, left to right. Numbers glued to
/// letters (such as `2022Q4`) are skipped.
pub fn scan_money(text: &str) -> Vec<MoneyMatch> {
    let mut out = Vec::new();
    for caps in scan_grammar().captures_iter(text) {
        let whole = caps.get(0).expect("group 0");
        let num = caps.name("num").expect("num group");
        let lead = if caps.name("open").is_some() || caps.name("dollar").is_some() {
            whole.start()
        } else {
            num.start()
        };
        let before = text[..lead].chars().next_back();
        let after_num = text[num.end()..].chars().next();
        if before.is_some_and(|c| c.is_alphanumeric() || c == '.' || c == ',')
            || after_num.is_some_and(|c| c.is_alphanumeric())
        {
            continue;
        }
        let mut matched = text[lead..whole.end()].trim_end().to_string();
        let has_open = caps.name("open").is_some();
        let has_close = caps.name("close").is_some();
        if has_open && !has_close {
            matched = matched.trim_start_matches('(').to_string();
        }
        if has_close && !has_open {
            matched = matched.replacen(')', "", 1);
        }
        if parse_money(&matched).is_err() {
            continue;
        }
        out.push(MoneyMatch {
            start: lead,
            end: whole.end(),
            text: matched,
            has_dollar: caps.name("dollar").is_some(),
            has_scale: caps.name("scale").is_some(),
        });
    }
    out
}

/// An amount in millions held at a fixed number of decimal places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MoneyValue {
    amount_millions: Decimal,
    precision: u32,
}

impl MoneyValue {
    /// Rounds `amount_millions` half away from zero to `precision` places.
    pub fn new(amount_millions: Decimal, precision: u32) -> Self {
        Self {
            amount_millions: round_half_away(amount_millions, precision),
            precision,
        }
    }

    pub fn parse(text: &str, precision: u32) -> Result<Self, MoneyParseError> {
        parse_money(text).map(|v| Self::new(v, precision))
    }

    pub fn amount_millions(&self) -> Decimal {
        self.amount_millions
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// `65,135.00` style.
    pub fn render(&self) -> String {
        render(self.amount_millions, self.precision)
    }
}

/// Plain fixed-point form without digit groups, e.g. `65135.00`.
impl fmt::Display for MoneyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.amount_millions)
    }
}

impl Serialize for MoneyValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MoneyValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for MoneyValue {
    type Err = MoneyParseError;

    /// Keeps the precision written in the text.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value = parse_money(s)?;
        Ok(Self::new(value, fraction_digits(s)))
    }
}

fn fraction_digits(text: &str) -> u32 {
    let digits = text
        .split_once('.')
        .map(|(_, f)| f.chars().take_while(char::is_ascii_digit).count())
        .unwrap_or(0);
    digits as u32
}
