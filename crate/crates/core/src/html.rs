//! Best-effort extraction of paragraphs and tables from filing-style HTML.
//!
//! This is a tolerant scanner, not a conforming HTML parser: it never fails,
//! recovers from unclosed tags by closing whatever is open at end of input,
//! and flattens nested tables into the text of the enclosing cell.

use crate::document::{Element, ElementKind, Table};

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul", "ol", "section", "article",
    "body", "html", "header", "footer", "blockquote", "pre", "hr", "title", "head",
];

#[derive(Default)]
struct TableBuilder {
    rows: Vec<Vec<String>>,
    row: Option<Vec<String>>,
    cell: Option<String>,
}

impl TableBuilder {
    fn close_cell(&mut self) {
        if let Some(cell) = self.cell.take() {
            self.row.get_or_insert_with(Vec::new).push(normalize_space(&cell));
        }
    }

    fn close_row(&mut self) {
        self.close_cell();
        if let Some(row) = self.row.take() {
            if !row.is_empty() {
                self.rows.push(row);
            }
        }
    }

    fn finish(mut self) -> Option<Table> {
        self.close_row();
        (!self.rows.is_empty()).then(|| Table::new(self.rows))
    }
}

struct Scanner {
    elements: Vec<ElementKind>,
    paragraph: String,
    table: Option<TableBuilder>,
    // depth of <table> nesting; only depth 1 builds structure
    depth: usize,
}

impl Scanner {
    fn flush_paragraph(&mut self) {
        let text = normalize_space(&self.paragraph);
        self.paragraph.clear();
        if !text.is_empty() {
            self.elements.push(ElementKind::Paragraph { text });
        }
    }

    fn text(&mut self, raw: &str) {
        let decoded = decode_entities(raw);
        match self.table.as_mut() {
            None => self.paragraph.push_str(&decoded),
            Some(tb) => {
                if let Some(cell) = tb.cell.as_mut() {
                    cell.push_str(&decoded);
                }
            }
        }
    }

    fn open(&mut self, name: &str) {
        if name == "table" {
            if self.depth == 0 {
                self.flush_paragraph();
                self.table = Some(TableBuilder::default());
            } else {
                self.separate_in_cell();
            }
            self.depth += 1;
            return;
        }
        match (self.depth, self.table.as_mut()) {
            (1, Some(tb)) => match name {
                "tr" => {
                    tb.close_row();
                    tb.row = Some(Vec::new());
                }
                "td" | "th" => {
                    tb.close_cell();
                    tb.cell = Some(String::new());
                }
                "br" | "p" | "div" => {
                    if let Some(cell) = tb.cell.as_mut() {
                        cell.push(' ');
                    }
                }
                _ => {}
            },
            (d, Some(_)) if d > 1 => self.separate_in_cell(),
            _ => {
                if BLOCK_TAGS.contains(&name) {
                    self.flush_paragraph();
                }
            }
        }
    }

    fn close(&mut self, name: &str) {
        if name == "table" {
            match self.depth {
                0 => {}
                1 => {
                    self.depth = 0;
                    if let Some(table) = self.table.take().and_then(TableBuilder::finish) {
                        self.elements.push(ElementKind::Table(table));
                    }
                }
                _ => {
                    self.depth -= 1;
                    self.separate_in_cell();
                }
            }
            return;
        }
        match (self.depth, self.table.as_mut()) {
            (1, Some(tb)) => match name {
                "tr" => tb.close_row(),
                "td" | "th" => tb.close_cell(),
                _ => {}
            },
            (d, Some(_)) if d > 1 => self.separate_in_cell(),
            _ => {
                if BLOCK_TAGS.contains(&name) {
                    self.flush_paragraph();
                }
            }
        }
    }

    fn separate_in_cell(&mut self) {
        if let Some(cell) = self.table.as_mut().and_then(|tb| tb.cell.as_mut()) {
            cell.push(' ');
        }
    }

    fn finish(mut self) -> Vec<ElementKind> {
        if let Some(table) = self.table.take().and_then(TableBuilder::finish) {
            self.elements.push(ElementKind::Table(table));
        }
        self.flush_paragraph();
        self.elements
    }
}

/// Splits an HTML page into paragraph and table elements in document order.
pub fn extract_tables_from_html(html: &str) -> Vec<Element> {
    let mut scanner = Scanner {
        elements: Vec::new(),
        paragraph: String::new(),
        table: None,
        depth: 0,
    };
    let mut rest = html;
    while !rest.is_empty() {
        let Some(lt) = rest.find('<') else {
            scanner.text(rest);
            break;
        };
        scanner.text(&rest[..lt]);
        rest = &rest[lt..];

        if let Some(after) = rest.strip_prefix("<!--") {
            rest = after.find("-->").map_or("", |end| &after[end + 3..]);
            continue;
        }
        let Some(gt) = rest.find('>') else {
            // unterminated tag: treat the remainder as text
            scanner.text(rest);
            break;
        };
        let tag = &rest[1..gt];
        rest = &rest[gt + 1..];

        let Some((closing, name)) = tag_name(tag) else {
            continue;
        };
        if closing {
            scanner.close(&name);
        } else if name == "script" || name == "style" {
            let end = format!("</{name}");
            rest = find_ascii_ci(rest, &end)
                .map(|i| rest[i..].find('>').map_or("", |g| &rest[i + g + 1..]))
                .unwrap_or("");
        } else {
            scanner.open(&name);
        }
    }
    scanner
        .finish()
        .into_iter()
        .enumerate()
        .map(|(id, kind)| Element { id, kind })
        .collect()
}

fn tag_name(tag: &str) -> Option<(bool, String)> {
    let (closing, body) = match tag.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, tag),
    };
    if body.starts_with('!') || body.starts_with('?') {
        return None;
    }
    let name: String = body
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    (!name.is_empty()).then_some((closing, name))
}

fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let needle = needle.to_ascii_lowercase();
    haystack
        .char_indices()
        .map(|(i, _)| i)
        .find(|&i| {
            haystack.len() - i >= needle.len()
                && haystack.is_char_boundary(i + needle.len())
                && haystack[i..i + needle.len()].eq_ignore_ascii_case(&needle)
        })
}

fn normalize_space(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let entity = &rest[1..semi];
            let ch = match entity {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ => entity.strip_prefix('#').and_then(|num| {
                    let code = match num.strip_prefix(['x', 'X']) {
                        Some(hex) => u32::from_str_radix(hex, 16).ok(),
                        None => num.parse().ok(),
                    };
                    code.and_then(char::from_u32)
                }),
            };
            ch.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
