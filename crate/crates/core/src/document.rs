//! Hybrid document model and JSON ingestion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed document JSON at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("document has no elements")]
    EmptyDocument,
    #[error("invalid document: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReportType {
    #[serde(rename = "10-K")]
    TenK,
    #[serde(rename = "10-Q")]
    TenQ,
    #[serde(rename = "other")]
    Other,
}

/// A table as a grid of cell strings. Rows may be ragged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(rows: Vec<Vec<String>>) -> Self {
        Self { rows }
    }

    pub fn header(&self) -> Option<&[String]> {
        self.rows.first().map(Vec::as_slice)
    }

    pub fn body(&self) -> &[Vec<String>] {
        self.rows.get(1..).unwrap_or(&[])
    }

    fn validate(&self) -> Result<(), String> {
        if self.rows.is_empty() {
            return Err("table has no rows".into());
        }
        if self.rows.iter().any(Vec::is_empty) {
            return Err("table has an empty row".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ElementKind {
    Paragraph { text: String },
    Table(Table),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub id: usize,
    pub kind: ElementKind,
}

impl Element {
    pub fn paragraph(id: usize, text: impl Into<String>) -> Self {
        Self {
            id,
            kind: ElementKind::Paragraph { text: text.into() },
        }
    }

    pub fn table(id: usize, rows: Vec<Vec<String>>) -> Self {
        Self {
            id,
            kind: ElementKind::Table(Table::new(rows)),
        }
    }

    pub fn is_table(&self) -> bool {
        matches!(self.kind, ElementKind::Table(_))
    }

    fn validate(&self) -> Result<(), String> {
        match &self.kind {
            ElementKind::Paragraph { text } if text.trim().is_empty() => {
                Err(format!("element {} is an empty paragraph", self.id))
            }
            ElementKind::Paragraph { .. } => Ok(()),
            ElementKind::Table(t) => t.validate().map_err(|e| format!("element {}: {e}", self.id)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub company: String,
    pub period: String,
    pub report_type: ReportType,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentFormat {
    JsonElements,
}

#[derive(Serialize, Deserialize)]
struct DocumentJson {
    id: String,
    company: String,
    period: String,
    report_type: ReportType,
    elements: Vec<ElementKind>,
}

impl Document {
    /// Builds a document, assigning element ids `0..n` in order.
    pub fn new(
        id: impl Into<String>,
        company: impl Into<String>,
        period: impl Into<String>,
        report_type: ReportType,
        elements: Vec<ElementKind>,
    ) -> Result<Self, DocumentError> {
        let doc = Self {
            id: id.into(),
            company: company.into(),
            period: period.into(),
            report_type,
            elements: elements
                .into_iter()
                .enumerate()
                .map(|(id, kind)| Element { id, kind })
                .collect(),
        };
        doc.validate()?;
        Ok(doc)
    }

    fn validate(&self) -> Result<(), DocumentError> {
        if self.id.is_empty() {
            return Err(DocumentError::Invalid("document id is empty".into()));
        }
        if self.period.is_empty() {
            return Err(DocumentError::Invalid("document period is empty".into()));
        }
        if self.elements.is_empty() {
            return Err(DocumentError::EmptyDocument);
        }
        for el in &self.elements {
            el.validate().map_err(DocumentError::Invalid)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = DocumentJson {
            id: self.id.clone(),
            company: self.company.clone(),
            period: self.period.clone(),
            report_type: self.report_type,
            elements: self.elements.iter().map(|e| e.kind.clone()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("document serializes")
    }
}

pub fn parse_document(input: &[u8], format: DocumentFormat) -> Result<Document, DocumentError> {
    match format {
        DocumentFormat::JsonElements => parse_json_document(input),
    }
}

fn parse_json_document(input: &[u8]) -> Result<Document, DocumentError> {
    let raw: DocumentJson = serde_json::from_slice(input).map_err(|e| DocumentError::Parse {
        offset: byte_offset(input, e.line(), e.column()),
        message: e.to_string(),
    })?;
    Document::new(raw.id, raw.company, raw.period, raw.report_type, raw.elements)
}

pub fn read_document(path: &std::path::Path) -> Result<Document, DocumentError> {
    let bytes = std::fs::read(path)
        .map_err(|e| DocumentError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_document(&bytes, DocumentFormat::JsonElements)
}

// serde_json reports 1-based line and column; column counts bytes.
fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    let mut start = 0;
    for _ in 1..line {
        match input[start..].iter().position(|b| *b == b'\n') {
            Some(p) => start += p + 1,
            None => break,
        }
    }
    (start + column.saturating_sub(1)).min(input.len())
}
