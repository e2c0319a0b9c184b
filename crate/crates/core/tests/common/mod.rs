//! Seeded synthetic corpora shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use afie_core::document::{Document, ElementKind, ReportType};
use afie_core::eval::{GroundTruthRecord, Locus};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

pub const TIME: &str = "2022Q4";
pub const PRIOR: &str = "2021Q4";
pub const ATTRIBUTES: [&str; 5] = ["Revenue", "Net income", "Total assets", "Operating cash flow", "Gross profit"];

// none of these share a token with an attribute, a company or a period
const FILLER: &[&str] = &[
    "board", "reviewed", "liquidity", "strategy", "across", "segments", "market", "conditions", "remained",
    "uncertain", "management", "expects", "continued", "investment", "facilities", "headcount", "supply", "chain",
    "pressure", "eased", "customers", "demand", "pricing", "competitive", "regulatory", "matters", "pending",
    "litigation", "disclosures", "estimates", "judgments", "critical", "policies", "inventory", "warranty",
    "reserves", "pension", "obligations", "currency", "exposure", "hedging", "programs", "debt", "covenants",
    "compliance", "capital", "allocation", "dividends", "repurchases", "authorized", "quarterly", "outlook",
];

pub fn company(i: usize) -> String {
    format!("ACME{i}")
}

pub struct PlantedCorpus {
    pub docs: Vec<Document>,
    pub records: Vec<GroundTruthRecord>,
}

fn filler_sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(8..20);
    let words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect();
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s + "."
}

fn filler_paragraph(rng: &mut ChaCha8Rng) -> ElementKind {
    let n = rng.gen_range(3..9);
    let text = (0..n).map(|_| filler_sentence(rng)).collect::<Vec<_>>().join(" ");
    ElementKind::Paragraph { text }
}

fn filler_table(rng: &mut ChaCha8Rng) -> ElementKind {
    let mut rows = vec![vec!["Item".to_string(), "Q1".into(), "Q2".into(), "Q3".into()]];
    for _ in 0..rng.gen_range(5..25) {
        let label = format!("{} {}", FILLER.choose(rng).unwrap(), FILLER.choose(rng).unwrap());
        let mut row = vec![label];
        row.extend((0..3).map(|_| format!("{:.1}", rng.gen_range(1.0..999.0))));
        rows.push(row);
    }
    ElementKind::Table(afie_core::document::Table::new(rows))
}

fn grouped(mut n: u128) -> String {
    let mut parts = Vec::new();
    loop {
        if n < 1000 {
            parts.push(n.to_string());
            break;
        }
        parts.push(format!("{:03}", n % 1000));
        n /= 1000;
    }
    parts.reverse();
    parts.join(",")
}

/// Writes `cents` (hundredths of a million) in one of several surface forms.
fn money_phrase(cents: u128, negative: bool, form: usize) -> String {
    let millions = format!("{}.{:02}", grouped(cents / 100), cents % 100);
    let body = match form {
        0 => format!("{millions} million"),
        // hundredths of a million are exact at five places of billions
        1 => format!("{}.{:05} billion", grouped(cents / 100_000), cents % 100_000),
        _ => format!("{} thousand", grouped(cents * 10)),
    };
    if negative {
        format!("$({})", body.replacen(' ', ") ", 1))
    } else {
        format!("${body}")
    }
}

/// Fifty-odd page filings, each with exactly one planted fact for its
/// company and period plus distractors for the prior period and for other
/// attributes.
pub fn planted_corpus(n: usize, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut records = Vec::new();
    for i in 0..n {
        let company = company(i);
        let attribute = ATTRIBUTES[i % ATTRIBUTES.len()];
        let cents: u128 = rng.gen_range(1..1_000_000_000);
        let negative = attribute == "Net income" && rng.gen_bool(0.3);
        let form = rng.gen_range(0..3);
        let in_table = rng.gen_bool(0.25);

        let mut elements: Vec<ElementKind> = Vec::new();
        for _ in 0..rng.gen_range(25..45) {
            if rng.gen_bool(0.15) {
                elements.push(filler_table(&mut rng));
            } else {
                elements.push(filler_paragraph(&mut rng));
            }
        }
        let fact = if in_table {
            let rows = vec![
                vec!["Line item (in millions)".to_string(), "Amount".into()],
                vec![format!("{attribute} of {company} {TIME}"), money_phrase(cents, negative, 0).replace(" million", "").replace('$', "")],
            ];
            ElementKind::Table(afie_core::document::Table::new(rows))
        } else {
            ElementKind::Paragraph {
                text: format!(
                    "{} {attribute} of {company} for {TIME} was {}. {}",
                    filler_sentence(&mut rng),
                    money_phrase(cents, negative, form),
                    filler_sentence(&mut rng)
                ),
            }
        };
        let prior_cents = rng.gen_range(1..1_000_000_000u128);
        let prior = ElementKind::Paragraph {
            text: format!("{attribute} of {company} for {PRIOR} was {}.", money_phrase(prior_cents, false, 0)),
        };
        let other = ATTRIBUTES[(i + 1) % ATTRIBUTES.len()];
        let other_fact = ElementKind::Paragraph {
            text: format!(
                "{other} of {company} for {TIME} was {}.",
                money_phrase(rng.gen_range(1..1_000_000_000u128), false, 0)
            ),
        };
        for el in [fact, prior, other_fact] {
            let at = rng.gen_range(0..=elements.len());
            elements.insert(at, el);
        }
        docs.push(Document::new(format!("doc{i}"), &company, TIME, ReportType::TenQ, elements).unwrap());

        let mut value = Decimal::from_i128_with_scale(cents as i128, 2);
        if negative {
            value = -value;
        }
        records.push(GroundTruthRecord {
            company: company.clone(),
            time: TIME.into(),
            keyword: attribute.into(),
            value_millions: value,
            aliases: vec![],
            locus: if in_table { Locus::TableOnly } else { Locus::TextAndTable },
            doc_id: Some(format!("doc{i}")),
        });
    }
    PlantedCorpus { docs, records }
}

/// Writes `<dir>/docs/<id>.json` and `<dir>/dataset.jsonl`.
pub fn write_corpus(corpus: &PlantedCorpus, dir: &Path) -> (PathBuf, PathBuf) {
    let docs_dir = dir.join("docs");
    std::fs::create_dir_all(&docs_dir).unwrap();
    for d in &corpus.docs {
        std::fs::write(docs_dir.join(format!("{}.json", d.id)), d.to_json()).unwrap();
    }
    let dataset = dir.join("dataset.jsonl");
    let lines: Vec<String> = corpus.records.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    std::fs::write(&dataset, lines.join("\n") + "\n").unwrap();
    (docs_dir, dataset)
}
