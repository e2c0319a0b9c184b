//! Split-and-merge segmentation of hybrid documents into token-budgeted segments.
//!
//! Tables are serialized first, then paragraphs and serialized tables that
//! exceed the element limit are split (tables keep their header row on every
//! piece), and finally the pieces are packed greedily into segments.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::document::{Document, ElementKind, Table};
use crate::serialize::{serialize_rows, serialize_table, SerializationFormat};
use crate::tokens::{max_prefix_within, TokenCounter};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentationError {
    #[error("invalid segmentation limits: element_limit={element_limit}, segment_limit={segment_limit}")]
    InvalidLimits {
        element_limit: usize,
        segment_limit: usize,
    },
    #[error("document has no elements")]
    EmptyDocument,
}

#[derive(Clone)]
pub struct SegmentationConfig {
    pub element_limit: usize,
    pub segment_limit: usize,
    pub format: SerializationFormat,
    pub counter: Arc<dyn TokenCounter>,
}

impl std::fmt::Debug for SegmentationConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SegmentationConfig")
            .field("element_limit", &self.element_limit)
            .field("segment_limit", &self.segment_limit)
            .field("format", &self.format)
            .finish_non_exhaustive()
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if self.element_limit == 0 || self.element_limit > self.segment_limit {
            return Err(SegmentationError::InvalidLimits {
                element_limit: self.element_limit,
                segment_limit: self.segment_limit,
            });
        }
        Ok(())
    }
}

/// A piece of one element after splitting, already in its final text form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub element_id: usize,
    pub piece_index: usize,
    pub text: String,
    pub from_table: bool,
    /// Set when the piece could not be brought under the element limit.
    pub over_limit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PieceRef {
    pub element_id: usize,
    pub piece_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub segment_index: usize,
    pub token_count: usize,
    /// Ids of the elements contributing to this segment, ascending. An element
    /// split across segments is listed in each of them.
    pub source_element_ids: Vec<usize>,
    pub text: String,
    #[serde(skip)]
    pub pieces: Vec<PieceRef>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub over_limit: bool,
}

impl Segment {
    /// A standalone segment, mostly for tests and ad-hoc corpora.
    pub fn from_text(segment_index: usize, text: impl Into<String>, counter: &dyn TokenCounter) -> Self {
        let text = text.into();
        Self {
            segment_index,
            token_count: counter.count(&text),
            source_element_ids: vec![segment_index],
            pieces: vec![PieceRef {
                element_id: segment_index,
                piece_index: 0,
            }],
            text,
            over_limit: false,
        }
    }
}

/// Largest `n` in `1..=max` with `fits(n)`, assuming `fits` is monotone
/// decreasing. Returns 0 when even `fits(1)` is false.
fn largest_fitting(max: usize, mut fits: impl FnMut(usize) -> bool) -> usize {
    if max == 0 || !fits(1) {
        return 0;
    }
    let mut lo = 1;
    let mut step = 1;
    // gallop to bracket the answer, then bisect
    let mut hi = loop {
        let probe = (lo + step).min(max);
        if probe == lo {
            return lo;
        }
        if fits(probe) {
            lo = probe;
            if lo == max {
                return lo;
            }
            step *= 2;
        } else {
            break probe;
        }
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Greedy whitespace-boundary split into pieces of at most `limit` tokens.
///
/// Text already within the limit is returned verbatim. Otherwise pieces are
/// words joined by single spaces, packed maximally left to right. A single
/// word longer than the limit is cut at character granularity.
pub fn split_paragraph(text: &str, limit: usize, counter: &dyn TokenCounter) -> Vec<String> {
    assert!(limit > 0, "split limit must be positive");
    if counter.count(text) <= limit {
        return vec![text.to_string()];
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut pieces = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let rest = &words[i..];
        let take = largest_fitting(rest.len(), |n| counter.count(&rest[..n].join(" ")) <= limit);
        if take == 0 {
            pieces.extend(split_long_word(rest[0], limit, counter));
            i += 1;
        } else {
            pieces.push(rest[..take].join(" "));
            i += take;
        }
    }
    pieces
}

fn split_long_word(word: &str, limit: usize, counter: &dyn TokenCounter) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = word;
    while !rest.is_empty() {
        let mut end = max_prefix_within(counter, rest, limit);
        if end == 0 {
            // a single char over the limit still has to go somewhere
            end = rest.chars().next().map_or(rest.len(), char::len_utf8);
        }
        out.push(rest[..end].to_string());
        rest = &rest[end..];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSplit {
    pub tables: Vec<Table>,
    /// True when at least one emitted sub-table is still over the limit.
    pub over_limit: bool,
}

/// Splits a table into sub-tables that repeat the header row and carry
/// contiguous runs of body rows, each serializing within `limit` tokens
/// where that is achievable.
pub fn split_table(
    table: &Table,
    limit: usize,
    format: SerializationFormat,
    counter: &dyn TokenCounter,
) -> TableSplit {
    assert!(limit > 0, "split limit must be positive");
    if counter.count(&serialize_table(table, format)) <= limit {
        return TableSplit {
            tables: vec![table.clone()],
            over_limit: false,
        };
    }
    let Some(header) = table.header() else {
        return TableSplit {
            tables: vec![table.clone()],
            over_limit: true,
        };
    };
    let body = table.body();
    if body.is_empty() {
        return TableSplit {
            tables: vec![table.clone()],
            over_limit: true,
        };
    }

    let with_header = |rows: &[Vec<String>]| {
        let mut all = Vec::with_capacity(rows.len() + 1);
        all.push(header.to_vec());
        all.extend_from_slice(rows);
        all
    };
    let mut tables = Vec::new();
    let mut over_limit = false;
    let mut i = 0;
    while i < body.len() {
        let rest = &body[i..];
        let take = largest_fitting(rest.len(), |n| {
            counter.count(&serialize_rows(&with_header(&rest[..n]), format)) <= limit
        });
        let take = if take == 0 {
            log::warn!("table row {} exceeds the element limit of {limit} tokens even alone", i + 1);
            over_limit = true;
            1
        } else {
            take
        };
        tables.push(Table::new(with_header(&rest[..take])));
        i += take;
    }
    TableSplit { tables, over_limit }
}

/// Greedy left-to-right packing of pieces into segments, joined by newlines.
pub fn merge_elements(pieces: &[Piece], segment_limit: usize, counter: &dyn TokenCounter) -> Vec<Segment> {
    let mut segments: Vec<Segment> = Vec::new();
    let mut current: Option<Segment> = None;

    for piece in pieces {
        let piece_ref = PieceRef {
            element_id: piece.element_id,
            piece_index: piece.piece_index,
        };
        if let Some(seg) = current.as_mut() {
            let candidate = format!("{}\n{}", seg.text, piece.text);
            let count = counter.count(&candidate);
            if count <= segment_limit {
                seg.text = candidate;
                seg.token_count = count;
                if seg.source_element_ids.last() != Some(&piece.element_id) {
                    seg.source_element_ids.push(piece.element_id);
                }
                seg.pieces.push(piece_ref);
                continue;
            }
            segments.push(current.take().expect("checked above"));
        }
        let token_count = counter.count(&piece.text);
        current = Some(Segment {
            segment_index: segments.len(),
            token_count,
            source_element_ids: vec![piece.element_id],
            text: piece.text.clone(),
            pieces: vec![piece_ref],
            over_limit: token_count > segment_limit,
        });
    }
    segments.extend(current);
    segments
}

/// Serializes tables and splits every element of `doc` into budgeted pieces.
pub fn document_pieces(doc: &Document, config: &SegmentationConfig) -> Vec<Piece> {
    let counter = config.counter.as_ref();
    let mut pieces = Vec::new();
    for el in &doc.elements {
        let (texts, from_table, over_limit) = match &el.kind {
            ElementKind::Paragraph { text } => {
                (split_paragraph(text, config.element_limit, counter), false, false)
            }
            ElementKind::Table(table) => {
                let split = split_table(table, config.element_limit, config.format, counter);
                let texts = split
                    .tables
                    .iter()
                    .map(|t| serialize_table(t, config.format))
                    .collect();
                (texts, true, split.over_limit)
            }
        };
        for (piece_index, text) in texts.into_iter().enumerate() {
            let piece_over = over_limit && counter.count(&text) > config.element_limit;
            pieces.push(Piece {
                element_id: el.id,
                piece_index,
                text,
                from_table,
                over_limit: piece_over,
            });
        }
    }
    pieces
}

pub fn segment_document(doc: &Document, config: &SegmentationConfig) -> Result<Vec<Segment>, SegmentationError> {
    config.validate()?;
    if doc.elements.is_empty() {
        return Err(SegmentationError::EmptyDocument);
    }
    let pieces = document_pieces(doc, config);
    let segments = merge_elements(&pieces, config.segment_limit, config.counter.as_ref());
    for seg in segments.iter().filter(|s| s.over_limit) {
        log::warn!(
            "segment {} of document {} holds {} tokens, over the limit of {}",
            seg.segment_index,
            doc.id,
            seg.token_count,
            config.segment_limit
        );
    }
    Ok(segments)
}
