//! LLM client abstraction, window budgeting, and the deterministic mock.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::money::{scan_money, MoneyMatch, MoneyValue};
use crate::prompt::{TemplateName, TemplateRegistry};
use crate::retrieval::word_tokens;
use crate::tokens::{truncate_to_tokens, TokenCounter};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("prompt of {prompt_tokens} tokens plus {max_output_tokens} output tokens exceeds the {window}-token window")]
    Budget {
        prompt_tokens: usize,
        max_output_tokens: usize,
        window: usize,
    },
    #[error("LLM transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("LLM service rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed LLM response: {0}")]
    BadResponse(String),
}

/// A text-completion backend with a fixed context window.
pub trait LlmClient: Send + Sync {
    /// Implementations reject prompts whose token count plus
    /// `max_output_tokens` exceeds [`window`](Self::window).
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError>;

    fn window(&self) -> usize;
}

impl<T: LlmClient + ?Sized> LlmClient for Arc<T> {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        (**self).complete(prompt, max_output_tokens)
    }

    fn window(&self) -> usize {
        (**self).window()
    }
}

/// Returns the prompt's token count if it fits alongside the requested output.
pub fn check_budget(
    counter: &dyn TokenCounter,
    prompt: &str,
    max_output_tokens: usize,
    window: usize,
) -> Result<usize, LlmError> {
    let prompt_tokens = counter.count(prompt);
    if prompt_tokens + max_output_tokens > window {
        return Err(LlmError::Budget {
            prompt_tokens,
            max_output_tokens,
            window,
        });
    }
    Ok(prompt_tokens)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockCall {
    pub template: Option<TemplateName>,
    pub prompt_tokens: usize,
    pub max_output_tokens: usize,
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "at", "by", "for", "in", "is", "of", "on", "the", "to", "was", "were",
];

fn content_tokens(text: &str) -> BTreeSet<String> {
    word_tokens(text).filter(|t| !STOPWORDS.contains(&t.as_str())).collect()
}

const NOTHING_FOUND: &str = "No information related to the keywords.";

/// Deterministic stand-in for a real model.
///
/// It recognises which registered template a prompt was rendered from and
/// answers like a literal-minded extractive model:
///
/// * summarization prompts (question, refine, map, reduce and the precision
///   variants) return the input lines sharing the most distinct keyword
///   tokens, merged with the old summary for refine;
/// * extraction prompts return the first money expression on the first
///   line naming every keyword token, normalized to millions at the
///   precision the prompt asks for, or `None`.
pub struct MockLlm {
    registry: TemplateRegistry,
    counter: Arc<dyn TokenCounter>,
    window: usize,
    calls: Mutex<Vec<MockCall>>,
}

impl MockLlm {
    pub fn new(registry: TemplateRegistry, counter: Arc<dyn TokenCounter>, window: usize) -> Self {
        Self {
            registry,
            counter,
            window,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().expect("call log").clone()
    }

    pub fn call_count(&self, name: TemplateName) -> usize {
        self.calls().iter().filter(|c| c.template == Some(name)).count()
    }

    fn answer(&self, prompt: &str) -> (Option<TemplateName>, String) {
        for template in self.registry.iter() {
            let Some(b) = template.match_prompt(prompt) else {
                continue;
            };
            let get = |k: &str| b.get(k).map(String::as_str).unwrap_or_default();
            let precision = if prompt.contains("three decimal places") { 3 } else { 2 };
            let out = match template.name {
                TemplateName::Question | TemplateName::Map | TemplateName::Precision(_) => {
                    best_lines(&[get("document_segment")], get("keywords"))
                }
                TemplateName::Refine => best_lines(&[get("old_summary"), get("document_segment")], get("keywords")),
                TemplateName::Reduce => best_lines(&[get("text")], get("keywords")),
                TemplateName::ExtractSingle => {
                    value_for(get("text"), get("key_words"), precision).unwrap_or_else(|| "None".into())
                }
                TemplateName::ExtractBatch => batch_answer(get("text"), get("key_words"), precision),
            };
            return (Some(template.name), out);
        }
        (None, "None".into())
    }
}

impl LlmClient for MockLlm {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        let prompt_tokens = check_budget(self.counter.as_ref(), prompt, max_output_tokens, self.window)?;
        let (template, out) = self.answer(prompt);
        self.calls.lock().expect("call log").push(MockCall {
            template,
            prompt_tokens,
            max_output_tokens,
        });
        Ok(truncate_to_tokens(self.counter.as_ref(), &out, max_output_tokens))
    }

    fn window(&self) -> usize {
        self.window
    }
}

fn scored_lines<'a>(sources: &[&'a str], keyword: &str) -> (usize, Vec<&'a str>) {
    let wanted = content_tokens(keyword);
    let mut best = 0;
    let mut lines: Vec<&str> = Vec::new();
    for line in sources.iter().flat_map(|s| s.lines()).map(str::trim) {
        if line.is_empty() || line == NOTHING_FOUND {
            continue;
        }
        let score = content_tokens(line).intersection(&wanted).count();
        if score == 0 || score < best {
            continue;
        }
        if score > best {
            best = score;
            lines.clear();
        }
        if !lines.contains(&line) {
            lines.push(line);
        }
    }
    (best, lines)
}

fn best_lines(sources: &[&str], keyword: &str) -> String {
    let (_, lines) = scored_lines(sources, keyword);
    if lines.is_empty() {
        NOTHING_FOUND.to_string()
    } else {
        lines.join("\n")
    }
}

fn pick_money(matches: &[MoneyMatch]) -> Option<&MoneyMatch> {
    matches
        .iter()
        .find(|m| m.has_dollar)
        .or_else(|| matches.iter().find(|m| m.has_scale))
        .or_else(|| matches.first())
}

/// Only lines naming every content token of the keyword are answered from.
fn value_for(text: &str, keyword: &str, precision: u32) -> Option<String> {
    let (best, lines) = scored_lines(&[text], keyword);
    if best < content_tokens(keyword).len() {
        return None;
    }
    lines.iter().find_map(|line| {
        let found = scan_money(line);
        let m = pick_money(&found)?;
        MoneyValue::parse(&m.text, precision).ok().map(|v| v.render())
    })
}

/// Splits `"A", "B" and "C" of context` into the attributes and the context.
fn split_batch_keywords(key_words: &str) -> (Vec<String>, String) {
    let mut attributes = Vec::new();
    let mut rest = key_words.trim();
    while let Some(open) = rest.find('"') {
        let Some(len) = rest[open + 1..].find('"') else { break };
        attributes.push(rest[open + 1..open + 1 + len].to_string());
        rest = &rest[open + len + 2..];
    }
    let context = rest.trim().trim_start_matches("of").trim().trim_end_matches('.').to_string();
    (attributes, context)
}

fn batch_answer(text: &str, key_words: &str, precision: u32) -> String {
    let (attributes, context) = split_batch_keywords(key_words);
    let map: serde_json::Map<String, serde_json::Value> = attributes
        .into_iter()
        .map(|attr| {
            let value = value_for(text, &format!("{attr} {context}"), precision).unwrap_or_else(|| "None".into());
            (attr, serde_json::Value::String(value))
        })
        .collect();
    serde_json::Value::Object(map).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::PromptTemplate;
    use crate::tokens::HeuristicCounter;

    fn mock(window: usize) -> MockLlm {
        MockLlm::new(TemplateRegistry::builtin(), Arc::new(HeuristicCounter), window)
    }

    fn render(name: TemplateName, bindings: &[(&str, &str)]) -> String {
        PromptTemplate::builtin(name).render(bindings).unwrap()
    }

    #[test]
    fn budget_enforced() {
        let m = mock(100);
        let err = m.complete(&"x".repeat(400), 1).unwrap_err();
        assert_eq!(
            err,
            LlmError::Budget {
                prompt_tokens: 100,
                max_output_tokens: 1,
                window: 100
            }
        );
        assert!(m.calls().is_empty());
        assert!(check_budget(&HeuristicCounter, &"x".repeat(396), 1, 100).is_ok());
    }

    #[test]
    fn question_keeps_best_lines() {
        let m = mock(4096);
        let segment = "Filler text here.\nRevenue of ACME for 2021Q4 was $4.1 million.\n\
                       Revenue of ACME for 2022Q4 was $5.000 million.";
        let prompt = render(
            TemplateName::Question,
            &[("document_segment", segment), ("keywords", "Revenue of ACME 2022Q4")],
        );
        let out = m.complete(&prompt, 500).unwrap();
        assert_eq!(out, "Revenue of ACME for 2022Q4 was $5.000 million.");
        assert_eq!(m.call_count(TemplateName::Question), 1);
    }

    #[test]
    fn refine_merges_with_old_summary() {
        let m = mock(4096);
        let prompt = render(
            TemplateName::Refine,
            &[
                ("document_segment", "Unrelated words only."),
                ("old_summary", "Revenue of ACME for 2022Q4 was $5.000 million."),
                ("keywords", "Revenue of ACME 2022Q4"),
            ],
        );
        assert_eq!(m.complete(&prompt, 500).unwrap(), "Revenue of ACME for 2022Q4 was $5.000 million.");
    }

    #[test]
    fn nothing_relevant() {
        let m = mock(4096);
        let prompt = render(
            TemplateName::Map,
            &[("document_segment", "Nothing here."), ("keywords", "Revenue of ACME 2022Q4")],
        );
        assert_eq!(m.complete(&prompt, 500).unwrap(), NOTHING_FOUND);
    }

    #[test]
    fn extraction_normalizes_to_millions() {
        let m = mock(4096);
        let text = "For the company ABC, total net sales for the three months ended June 25, 2022 were $65.135 billion.";
        let prompt = render(
            TemplateName::ExtractSingle,
            &[
                ("text", text),
                ("key_words", "Total net sales of ABC for the three months ended June 25, 2022."),
            ],
        );
        assert_eq!(m.complete(&prompt, 50).unwrap(), "65,135.00");
        let none = render(TemplateName::ExtractSingle, &[("text", text), ("key_words", "Goodwill")]);
        assert_eq!(m.complete(&none, 50).unwrap(), "None");
    }

    #[test]
    fn batch_extraction_json() {
        let m = mock(4096);
        let text = "Total net sales of ABC for 2022Q3 were $65.135 billion.\nTotal assets of ABC for 2022Q3 were $2.126 million.";
        let prompt = render(
            TemplateName::ExtractBatch,
            &[
                ("text", text),
                ("key_words", "\"Total net sales\", \"Goodwill\" and \"Total assets\" of ABC 2022Q3"),
            ],
        );
        let out: serde_json::Value = serde_json::from_str(&m.complete(&prompt, 200).unwrap()).unwrap();
        assert_eq!(out["Total net sales"], "65,135.00");
        assert_eq!(out["Total assets"], "2.13");
        assert_eq!(out["Goodwill"], "None");
    }

    #[test]
    fn unknown_prompt_answers_none() {
        let m = mock(4096);
        assert_eq!(m.complete("hello", 10).unwrap(), "None");
        assert_eq!(m.calls()[0].template, None);
    }

    #[test]
    fn output_truncated_to_budget() {
        let m = mock(4096);
        let segment = (0..50).map(|i| format!("Revenue line {i}")).collect::<Vec<_>>().join("\n");
        let prompt = render(TemplateName::Question, &[("document_segment", &segment), ("keywords", "Revenue")]);
        let out = m.complete(&prompt, 10).unwrap();
        assert!(HeuristicCounter.count(&out) <= 10);
    }
}
