//! Table linearization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::document::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SerializationFormat {
    #[default]
    Plain,
    Csv,
    Xml,
    Html,
}

impl SerializationFormat {
    pub const ALL: [SerializationFormat; 4] = [Self::Plain, Self::Csv, Self::Xml, Self::Html];

    pub fn name(self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::Csv => "csv",
            Self::Xml => "xml",
            Self::Html => "html",
        }
    }

    fn table_open(self) -> &'static str {
        match self {
            Self::Plain | Self::Csv => "",
            Self::Xml | Self::Html => "<table>",
        }
    }

    fn table_close(self) -> &'static str {
        match self {
            Self::Plain | Self::Csv => "",
            Self::Xml | Self::Html => "</table>",
        }
    }

    fn row_separator(self) -> &'static str {
        match self {
            Self::Plain | Self::Csv => "\n",
            Self::Xml | Self::Html => "",
        }
    }
}

impl fmt::Display for SerializationFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SerializationFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(Self::Plain),
            "csv" => Ok(Self::Csv),
            "xml" => Ok(Self::Xml),
            "html" => Ok(Self::Html),
            other => Err(format!("unknown serialization format {other:?}")),
        }
    }
}

pub fn serialize_table(table: &Table, format: SerializationFormat) -> String {
    serialize_rows(&table.rows, format)
}

pub fn serialize_rows(rows: &[Vec<String>], format: SerializationFormat) -> String {
    let body: Vec<String> = rows.iter().map(|r| serialize_row(r, format)).collect();
    format!(
        "{}{}{}",
        format.table_open(),
        body.join(format.row_separator()),
        format.table_close()
    )
}

/// One row in isolation, without the table wrapper tags.
pub fn serialize_row(row: &[String], format: SerializationFormat) -> String {
    match format {
        SerializationFormat::Plain => row
            .iter()
            .map(|c| collapse_newlines(c))
            .collect::<Vec<_>>()
            .join(" "),
        SerializationFormat::Csv => {
            if let [only] = row {
                if only.is_empty() {
                    // a bare empty line would read back as no row at all
                    return "\"\"".to_string();
                }
            }
            row.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",")
        }
        SerializationFormat::Xml => {
            let mut out = String::from("<row>");
            for c in row {
                out.push_str("<cell>");
                out.push_str(&markup_escape(c));
                out.push_str("</cell>");
            }
            out.push_str("</row>");
            out
        }
        SerializationFormat::Html => {
            let mut out = String::from("<tr>");
            for c in row {
                out.push_str("<td>");
                out.push_str(&markup_escape(c));
                out.push_str("</td>");
            }
            out.push_str("</tr>");
            out
        }
    }
}

/// The text every serialized sub-table of a table with this header starts with.
pub fn header_prefix(header: &[String], format: SerializationFormat) -> String {
    format!("{}{}", format.table_open(), serialize_row(header, format))
}

fn collapse_newlines(cell: &str) -> String {
    cell.replace("\r\n", " ").replace(['\n', '\r'], " ")
}

fn csv_cell(cell: &str) -> String {
    if cell.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

fn markup_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[&[&str]]) -> Table {
        Table::new(
            rows.iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect())
                .collect(),
        )
    }

    fn revenue() -> Table {
        table(&[&["Revenue", "2022"], &["Total", "100"]])
    }

    #[test]
    fn plain() {
        assert_eq!(serialize_table(&revenue(), SerializationFormat::Plain), "Revenue 2022\nTotal 100");
    }

    #[test]
    fn csv() {
        assert_eq!(serialize_table(&revenue(), SerializationFormat::Csv), "Revenue,2022\nTotal,100");
    }

    #[test]
    fn xml() {
        assert_eq!(
            serialize_table(&revenue(), SerializationFormat::Xml),
            "<table><row><cell>Revenue</cell><cell>2022</cell></row>\
             <row><cell>Total</cell><cell>100</cell></row></table>"
        );
    }

    #[test]
    fn html() {
        assert_eq!(
            serialize_table(&revenue(), SerializationFormat::Html),
            "<table><tr><td>Revenue</td><td>2022</td></tr><tr><td>Total</td><td>100</td></tr></table>"
        );
    }

    #[test]
    fn plain_collapses_cell_newlines() {
        let t = table(&[&["Net\nsales", "x\r\ny"]]);
        assert_eq!(serialize_table(&t, SerializationFormat::Plain), "Net sales x y");
    }

    #[test]
    fn escaping() {
        let t = table(&[&["a,b", "say \"hi\"", "<&>"]]);
        assert_eq!(
            serialize_table(&t, SerializationFormat::Csv),
            "\"a,b\",\"say \"\"hi\"\"\",<&>"
        );
        assert_eq!(
            serialize_table(&t, SerializationFormat::Xml),
            "<table><row><cell>a,b</cell><cell>say &quot;hi&quot;</cell><cell>&lt;&amp;&gt;</cell></row></table>"
        );
    }

    #[test]
    fn empty_cells() {
        let t = table(&[&["", "x"], &[""]]);
        assert_eq!(serialize_table(&t, SerializationFormat::Plain), " x\n");
        assert_eq!(serialize_table(&t, SerializationFormat::Csv), ",x\n\"\"");
    }

    #[test]
    fn header_prefix_matches_serialization() {
        for f in SerializationFormat::ALL {
            let t = revenue();
            assert!(serialize_table(&t, f).starts_with(&header_prefix(t.header().unwrap(), f)));
        }
    }

    #[test]
    fn format_names_parse() {
        for f in SerializationFormat::ALL {
            assert_eq!(f.name().parse::<SerializationFormat>().unwrap(), f);
        }
        assert!("markdown".parse::<SerializationFormat>().is_err());
    }

    fn read_csv(text: &str) -> Vec<Vec<String>> {
        csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes())
            .records()
            .map(|r| r.unwrap().iter().map(str::to_string).collect())
            .collect()
    }

    proptest! {
        #[test]
        fn csv_round_trips(rows in prop::collection::vec(
            prop::collection::vec("[a-z ,\"\n]{0,6}", 1..5), 1..6)
        ) {
            let text = serialize_rows(&rows, SerializationFormat::Csv);
            prop_assert_eq!(read_csv(&text), rows);
        }
    }
}
