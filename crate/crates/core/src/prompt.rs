//! Prompt templates and keyword completion.
//!
//! Template bodies live as text assets under `templates/` and are compiled in;
//! a directory of same-named files can override any of them for experiments.
//! Placeholders use `{name}`; `{{` and `}}` stand for literal braces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unbound placeholder {0}")]
    Unbound(String),
    #[error("malformed template {name}: {message}")]
    Malformed { name: String, message: String },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeywordError {
    #[error("completion level {level} needs a {missing}")]
    Incomplete { level: CompletionLevel, missing: &'static str },
    #[error("keyword attribute is empty")]
    EmptyAttribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionVariant {
    Naive,
    NaiveDirect,
    NaiveShot,
    DirectShot,
    NaiveShotPrecision,
    DirectShotPrecision,
}

impl PrecisionVariant {
    pub const ALL: [PrecisionVariant; 6] = [
        Self::Naive,
        Self::NaiveDirect,
        Self::NaiveShot,
        Self::DirectShot,
        Self::NaiveShotPrecision,
        Self::DirectShotPrecision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::NaiveDirect => "naive_direct",
            Self::NaiveShot => "naive_shot",
            Self::DirectShot => "direct_shot",
            Self::NaiveShotPrecision => "naive_shot_precision",
            Self::DirectShotPrecision => "direct_shot_precision",
        }
    }

    /// Carries the explicit precision instruction.
    pub fn is_direct(self) -> bool {
        matches!(self, Self::NaiveDirect | Self::DirectShot | Self::DirectShotPrecision)
    }

    /// Carries a worked example with placeholder values.
    pub fn has_plain_shot(self) -> bool {
        matches!(self, Self::NaiveShot | Self::DirectShot)
    }

    /// Carries a worked example with concrete, correctly rounded values.
    pub fn has_precision_shot(self) -> bool {
        matches!(self, Self::NaiveShotPrecision | Self::DirectShotPrecision)
    }
}

impl FromStr for PrecisionVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', '&', ' '], "_");
        Self::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| format!("unknown precision variant {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateName {
    Question,
    Refine,
    Map,
    Reduce,
    ExtractSingle,
    ExtractBatch,
    Precision(PrecisionVariant),
}

impl TemplateName {
    pub fn all() -> Vec<TemplateName> {
        let mut names = vec![
            Self::Question,
            Self::Refine,
            Self::Map,
            Self::Reduce,
            Self::ExtractSingle,
            Self::ExtractBatch,
        ];
        names.extend(PrecisionVariant::ALL.map(Self::Precision));
        names
    }

    /// Asset file stem.
    pub fn file_stem(self) -> String {
        match self {
            Self::Question => "question".into(),
            Self::Refine => "refine".into(),
            Self::Map => "map".into(),
            Self::Reduce => "reduce".into(),
            Self::ExtractSingle => "extract_single".into(),
            Self::ExtractBatch => "extract_batch".into(),
            Self::Precision(v) => format!("precision_{}", v.name()),
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            Self::Question => include_str!("../templates/question.txt"),
            Self::Refine => include_str!("../templates/refine.txt"),
            Self::Map => include_str!("../templates/map.txt"),
            Self::Reduce => include_str!("../templates/reduce.txt"),
            Self::ExtractSingle => include_str!("../templates/extract_single.txt"),
            Self::ExtractBatch => include_str!("../templates/extract_batch.txt"),
            Self::Precision(PrecisionVariant::Naive) => include_str!("../templates/precision_naive.txt"),
            Self::Precision(PrecisionVariant::NaiveDirect) => {
                include_str!("../templates/precision_naive_direct.txt")
            }
            Self::Precision(PrecisionVariant::NaiveShot) => include_str!("../templates/precision_naive_shot.txt"),
            Self::Precision(PrecisionVariant::DirectShot) => include_str!("../templates/precision_direct_shot.txt"),
            Self::Precision(PrecisionVariant::NaiveShotPrecision) => {
                include_str!("../templates/precision_naive_shot_precision.txt")
            }
            Self::Precision(PrecisionVariant::DirectShotPrecision) => {
                include_str!("../templates/precision_direct_shot_precision.txt")
            }
        }
    }

    /// Placeholders the body must reference.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            Self::Question | Self::Map | Self::Precision(_) => &["document_segment", "keywords"],
            Self::Refine => &["document_segment", "old_summary", "keywords"],
            Self::Reduce => &["text", "keywords"],
            Self::ExtractSingle | Self::ExtractBatch => &["text", "key_words"],
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.file_stem())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Literal(String),
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    body: String,
    parts: Vec<Part>,
}

fn parse_parts(name: TemplateName, body: &str) -> Result<Vec<Part>, TemplateError> {
    let malformed = |message: String| TemplateError::Malformed {
        name: name.file_stem(),
        message,
    };
    let mut parts = Vec::new();
    let mut literal = String::new();
    let mut chars = body.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '{' if chars.peek().map(|&(_, n)| n) == Some('{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek().map(|&(_, n)| n) == Some('}') => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let rest = &body[i + 1..];
                let end = rest
                    .find('}')
                    .ok_or_else(|| malformed(format!("unclosed '{{' at byte {i}")))?;
                let key = &rest[..end];
                if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(malformed(format!("bad placeholder {key:?} at byte {i}")));
                }
                if !literal.is_empty() {
                    parts.push(Part::Literal(std::mem::take(&mut literal)));
                }
                parts.push(Part::Placeholder(key.to_string()));
                for _ in 0..key.chars().count() + 1 {
                    chars.next();
                }
            }
            '}' => return Err(malformed(format!("stray '}}' at byte {i}"))),
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        parts.push(Part::Literal(literal));
    }
    Ok(parts)
}

impl PromptTemplate {
    pub fn new(name: TemplateName, body: impl Into<String>) -> Result<Self, TemplateError> {
        let body = body.into();
        let parts = parse_parts(name, &body)?;
        let template = Self { name, body, parts };
        let present = template.placeholders();
        for required in name.required_placeholders() {
            if !present.contains(*required) {
                return Err(TemplateError::Malformed {
                    name: name.file_stem(),
                    message: format!("missing placeholder {{{required}}}"),
                });
            }
        }
        Ok(template)
    }

    pub fn builtin(name: TemplateName) -> Self {
        Self::new(name, name.builtin_body()).expect("built-in templates are well formed")
    }

    /// The raw asset text, escapes included.
    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Placeholder(k) => Some(k.as_str()),
                Part::Literal(_) => None,
            })
            .collect()
    }

    /// Substitutes every placeholder verbatim. Extra bindings are ignored.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len() + 256);
        for part in &self.parts {
            match part {
                Part::Literal(text) => out.push_str(text),
                Part::Placeholder(key) => {
                    let value = bindings
                        .iter()
                        .find(|(k, _)| k == key)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::Unbound(key.clone()))?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`render`](Self::render): recovers the bindings if `prompt`
    /// is an instance of this template.
    ///
    /// Literal runs are matched left to right, so a bound value that itself
    /// contains the following literal run is cut short.
    pub fn match_prompt(&self, prompt: &str) -> Option<BTreeMap<String, String>> {
        let mut bindings = BTreeMap::new();
        let mut rest = prompt;
        let mut pending: Option<&str> = None;
        for part in &self.parts {
            match part {
                Part::Literal(text) => match pending.take() {
                    None => rest = rest.strip_prefix(text.as_str())?,
                    Some(key) => {
                        let at = rest.find(text.as_str())?;
                        bindings.insert(key.to_string(), rest[..at].to_string());
                        rest = &rest[at + text.len()..];
                    }
                },
                Part::Placeholder(key) => {
                    if pending.is_some() {
                        return None;
                    }
                    pending = Some(key);
                }
            }
        }
        match pending {
            Some(key) => {
                bindings.insert(key.to_string(), rest.to_string());
            }
            None if !rest.is_empty() => return None,
            None => {}
        }
        Some(bindings)
    }
}

/// A verification outcome for one template asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateCheck {
    pub name: String,
    pub matches_builtin: bool,
    pub missing_anchors: Vec<String>,
    pub unexpected_anchors: Vec<String>,
    pub ok: bool,
}

const DIRECT_SENTENCE: &str = "All values must be in millions and round to three decimal places using rounding rules.";
const PLAIN_SHOT: &str = "the revenue is $x billion; the net income is $y million.";
const PRECISION_SHOT_VALUES: [&str; 2] = ["50.125", "1,234.500"];

/// Anchor strings each template must contain.
fn anchors(name: TemplateName) -> Vec<&'static str> {
    match name {
        TemplateName::Question => vec![
            "Financial report's segment: {document_segment}",
            "Keywords: {keywords}",
            DIRECT_SENTENCE,
            "$50.125 million",
            "$1,234.500 million",
        ],
        TemplateName::Refine => vec![
            "Old summary:",
            "Old summary: {old_summary}",
            "New summary:",
            DIRECT_SENTENCE,
            "$128,126.248 million",
        ],
        TemplateName::Map => vec!["Financial report's segment: {document_segment}", "Summary:", DIRECT_SENTENCE],
        TemplateName::Reduce => vec![
            "Content: {text}",
            "please output \"None\"",
            "round to two decimal places",
            "Result: 65,135.00",
            "Result: 2.13",
        ],
        TemplateName::ExtractSingle => vec![
            "Key words: {key_words}",
            "please output \"None\"",
            "round to two decimal places",
            "Result: 65,135.00",
            "Result: 2.13",
        ],
        TemplateName::ExtractBatch => vec![
            "Output results in JSON format.",
            "Keywords: {key_words}",
            "Result: {{\"Total net sales\": \"65,135.00\", \"Income\": \"None\", \"Total assets\": \"2.13\"}}",
        ],
        TemplateName::Precision(v) => {
            let mut a = vec![
                "Given a segment of a financial report and keywords.",
                "Financial report's segment: {document_segment}",
                "Keywords: {keywords}",
            ];
            if v.is_direct() {
                a.push("round to three decimal places");
            }
            if v.has_plain_shot() {
                a.push(PLAIN_SHOT);
            }
            if v.has_precision_shot() {
                a.extend(PRECISION_SHOT_VALUES);
            }
            a
        }
    }
}

/// Strings a precision variant must not contain, per the variant matrix.
fn forbidden(name: TemplateName) -> Vec<&'static str> {
    match name {
        TemplateName::Precision(v) => {
            let mut f = Vec::new();
            if !v.is_direct() {
                f.push("round to three decimal places");
            }
            if !v.has_plain_shot() {
                f.push(PLAIN_SHOT);
            }
            if !v.has_precision_shot() {
                f.extend(PRECISION_SHOT_VALUES);
            }
            f
        }
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<TemplateName, PromptTemplate>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        Self {
            templates: TemplateName::all()
                .into_iter()
                .map(|n| (n, PromptTemplate::builtin(n)))
                .collect(),
        }
    }

    /// Built-ins, with any `<stem>.txt` file in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut registry = Self::builtin();
        for name in TemplateName::all() {
            let path = dir.join(format!("{}.txt", name.file_stem()));
            if !path.exists() {
                continue;
            }
            let body = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            registry.templates.insert(name, PromptTemplate::new(name, body)?);
        }
        Ok(registry)
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        &self.templates[&name]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    pub fn verify(&self) -> Vec<TemplateCheck> {
        self.templates
            .values()
            .map(|t| {
                let missing: Vec<String> = anchors(t.name)
                    .into_iter()
                    .filter(|a| !t.body.contains(a))
                    .map(str::to_string)
                    .collect();
                let unexpected: Vec<String> = forbidden(t.name)
                    .into_iter()
                    .filter(|a| t.body.contains(a))
                    .map(str::to_string)
                    .collect();
                TemplateCheck {
                    name: t.name.file_stem(),
                    matches_builtin: t.body == t.name.builtin_body(),
                    ok: missing.is_empty() && unexpected.is_empty(),
                    missing_anchors: missing,
                    unexpected_anchors: unexpected,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CompletionLevel {
    A,
    #[serde(rename = "A_C")]
    AC,
    #[serde(rename = "A_T")]
    AT,
    #[default]
    #[serde(rename = "A_T_C")]
    ATC,
}

impl CompletionLevel {
    pub const ALL: [CompletionLevel; 4] = [Self::A, Self::AC, Self::AT, Self::ATC];

    pub fn name(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::AC => "A_C",
            Self::AT => "A_T",
            Self::ATC => "A_T_C",
        }
    }

    fn needs_company(self) -> bool {
        matches!(self, Self::AC | Self::ATC)
    }

    fn needs_time(self) -> bool {
        matches!(self, Self::AT | Self::ATC)
    }
}

impl fmt::Display for CompletionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompletionLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|l| l.name() == norm)
            .ok_or_else(|| format!("unknown completion level {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Keyword {
    pub attribute: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub company: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    pub completion_level: CompletionLevel,
}

impl Keyword {
    pub fn new(
        attribute: impl Into<String>,
        company: Option<String>,
        time: Option<String>,
        completion_level: CompletionLevel,
    ) -> Self {
        Self {
            attribute: attribute.into(),
            company,
            time,
            completion_level,
        }
    }
}

fn context_suffix(
    level: CompletionLevel,
    company: Option<&str>,
    time: Option<&str>,
) -> Result<String, KeywordError> {
    let company = company.filter(|c| !c.is_empty());
    let time = time.filter(|t| !t.is_empty());
    if level.needs_company() && company.is_none() {
        return Err(KeywordError::Incomplete { level, missing: "company" });
    }
    if level.needs_time() && time.is_none() {
        return Err(KeywordError::Incomplete { level, missing: "time" });
    }
    Ok(match level {
        CompletionLevel::A => String::new(),
        CompletionLevel::AC => format!(" of {}", company.unwrap_or_default()),
        CompletionLevel::AT => format!(" of {}", time.unwrap_or_default()),
        CompletionLevel::ATC => format!(" of {} {}", company.unwrap_or_default(), time.unwrap_or_default()),
    })
}

/// Renders a keyword at its completion level, e.g. `Net Income of Nvidia 2022Q4`.
pub fn complete_keyword(kw: &Keyword) -> Result<String, KeywordError> {
    if kw.attribute.trim().is_empty() {
        return Err(KeywordError::EmptyAttribute);
    }
    let suffix = context_suffix(kw.completion_level, kw.company.as_deref(), kw.time.as_deref())?;
    Ok(format!("{}{suffix}", kw.attribute))
}

/// Several attributes sharing one context, e.g.
/// `"Revenue", "Income" and "Total assets" of ABC 2022Q3`.
pub fn complete_keywords_batch(
    attributes: &[String],
    company: Option<&str>,
    time: Option<&str>,
    level: CompletionLevel,
) -> Result<String, KeywordError> {
    if attributes.is_empty() || attributes.iter().any(|a| a.trim().is_empty()) {
        return Err(KeywordError::EmptyAttribute);
    }
    let quoted: Vec<String> = attributes.iter().map(|a| format!("\"{a}\"")).collect();
    let list = match quoted.split_last() {
        Some((last, init)) if !init.is_empty() => format!("{} and {last}", init.join(", ")),
        _ => quoted.join(""),
    };
    Ok(format!("{list}{}", context_suffix(level, company, time)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kw(attr: &str, company: Option<&str>, time: Option<&str>, level: CompletionLevel) -> Keyword {
        Keyword::new(attr, company.map(String::from), time.map(String::from), level)
    }

    #[test]
    fn completion_levels() {
        let full = kw("Net Income", Some("Nvidia"), Some("2022Q4"), CompletionLevel::ATC);
        assert_eq!(complete_keyword(&full).unwrap(), "Net Income of Nvidia 2022Q4");
        let ac = kw("Net Income", Some("Nike"), None, CompletionLevel::AC);
        assert_eq!(complete_keyword(&ac).unwrap(), "Net Income of Nike");
        let at = kw("Net Income", None, Some("2022Q4"), CompletionLevel::AT);
        assert_eq!(complete_keyword(&at).unwrap(), "Net Income of 2022Q4");
        assert_eq!(complete_keyword(&kw("Revenue", None, None, CompletionLevel::A)).unwrap(), "Revenue");
        // extra context is ignored below the requested level
        let a = kw("Revenue", Some("ACME"), Some("2022Q4"), CompletionLevel::A);
        assert_eq!(complete_keyword(&a).unwrap(), "Revenue");
    }

    #[test]
    fn missing_context_rejected() {
        let err = complete_keyword(&kw("Revenue", None, Some("2022Q4"), CompletionLevel::ATC)).unwrap_err();
        assert_eq!(
            err,
            KeywordError::Incomplete {
                level: CompletionLevel::ATC,
                missing: "company"
            }
        );
        assert!(complete_keyword(&kw("Revenue", Some("X"), None, CompletionLevel::AT)).is_err());
        assert!(complete_keyword(&kw(" ", None, None, CompletionLevel::A)).is_err());
    }

    #[test]
    fn batch_keywords() {
        let attrs = vec!["Total net sales".to_string(), "Income".to_string(), "Total assets".to_string()];
        assert_eq!(
            complete_keywords_batch(&attrs, Some("ABC"), Some("2022Q3"), CompletionLevel::ATC).unwrap(),
            "\"Total net sales\", \"Income\" and \"Total assets\" of ABC 2022Q3"
        );
        assert_eq!(
            complete_keywords_batch(&attrs[..1], None, None, CompletionLevel::A).unwrap(),
            "\"Total net sales\""
        );
    }

    #[test]
    fn question_template_layout() {
        let t = PromptTemplate::builtin(TemplateName::Question);
        let out = t.render(&[("document_segment", "S"), ("keywords", "K")]).unwrap();
        assert!(out.contains("Financial report's segment: S\n"));
        assert!(out.contains("Keywords: K\n"));
        assert!(out.ends_with("Summary: "));
    }

    #[test]
    fn refine_binds_old_summary() {
        let t = PromptTemplate::builtin(TemplateName::Refine);
        let out = t
            .render(&[("document_segment", "S"), ("old_summary", "OLD"), ("keywords", "K")])
            .unwrap();
        assert!(out.contains("Old summary: OLD\n"));
    }

    #[test]
    fn unbound_placeholder_named() {
        let t = PromptTemplate::builtin(TemplateName::Question);
        assert_eq!(
            t.render(&[("document_segment", "S")]).unwrap_err(),
            TemplateError::Unbound("keywords".into())
        );
    }

    #[test]
    fn escaped_braces_render_single() {
        let t = PromptTemplate::builtin(TemplateName::ExtractBatch);
        let out = t.render(&[("text", "T"), ("key_words", "K")]).unwrap();
        assert!(out.contains("Result: {\"Total net sales\": \"65,135.00\""));
        assert!(!out.contains("{{"));
    }

    #[test]
    fn match_prompt_inverts_render() {
        for name in TemplateName::all() {
            let t = PromptTemplate::builtin(name);
            let values: Vec<(String, String)> = t
                .placeholders()
                .into_iter()
                .map(|k| (k.to_string(), format!("value of {k}\nline two")))
                .collect();
            let bindings: Vec<(&str, &str)> = values.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
            let prompt = t.render(&bindings).unwrap();
            let back = t.match_prompt(&prompt).unwrap();
            for (k, v) in &values {
                assert_eq!(&back[k], v, "{name}");
            }
        }
        let q = PromptTemplate::builtin(TemplateName::Question);
        assert!(q.match_prompt("something else").is_none());
    }

    #[test]
    fn malformed_templates_rejected() {
        assert!(PromptTemplate::new(TemplateName::Map, "no placeholders").is_err());
        assert!(PromptTemplate::new(TemplateName::Map, "{document_segment} {keywords").is_err());
        assert!(PromptTemplate::new(TemplateName::Map, "{document_segment} {keywords} }").is_err());
        assert!(PromptTemplate::new(TemplateName::Map, "{document_segment} {key words}").is_err());
    }

    #[test]
    fn builtins_verify() {
        for check in TemplateRegistry::builtin().verify() {
            assert!(check.ok, "{check:?}");
            assert!(check.matches_builtin);
        }
    }

    #[test]
    fn builtin_fingerprints_are_frozen() {
        // FNV-1a of each asset; any edit to a template file must update this table
        let expected: BTreeMap<&str, u64> = FINGERPRINTS.iter().copied().collect();
        for name in TemplateName::all() {
            let fp = crate::retrieval::fnv1a(name.builtin_body().as_bytes());
            assert_eq!(expected.get(name.file_stem().as_str()), Some(&fp), "{name}");
        }
    }

    const FINGERPRINTS: &[(&str, u64)] = &[
        ("extract_batch", 0x04401d2fff20f766),
        ("extract_single", 0x8f6647a0c51f01a8),
        ("map", 0xc7b7b7b225f8438e),
        ("precision_direct_shot", 0xddf0f1be193299e2),
        ("precision_direct_shot_precision", 0x9e4162d37e2589b8),
        ("precision_naive", 0xf0be92dee7b42241),
        ("precision_naive_direct", 0xcbb96ddc4da4ff16),
        ("precision_naive_shot", 0x75ea392f037dac73),
        ("precision_naive_shot_precision", 0xf13f54116fe6e945),
        ("question", 0xd86e22ca4e8930f4),
        ("reduce", 0x74c0ed4814d7a04b),
        ("refine", 0x64a2f1911242c19b),
    ];

    #[test]
    fn overrides_replace_builtins() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("map.txt"), "Seg: {document_segment}\nKw: {keywords}").unwrap();
        let reg = TemplateRegistry::with_overrides(dir.path()).unwrap();
        assert_eq!(reg.get(TemplateName::Map).body(), "Seg: {document_segment}\nKw: {keywords}");
        let map_check = reg.verify().into_iter().find(|c| c.name == "map").unwrap();
        assert!(!map_check.matches_builtin);
        assert!(!map_check.ok);
        assert_eq!(reg.get(TemplateName::Question), &PromptTemplate::builtin(TemplateName::Question));
    }
}
