//! Segmentation, retrieval, summarization and extraction wired together.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::Document;
use crate::llm::{LlmClient, LlmError};
use crate::money::MoneyValue;
use crate::parallel::parallel_map;
use crate::prompt::{
    complete_keyword, complete_keywords_batch, Keyword, KeywordError, PrecisionVariant, TemplateError, TemplateName,
    TemplateRegistry,
};
use crate::retrieval::{retrieve_top_k_parallel, EmbeddingProvider, RetrievalError, DEFAULT_TOP_K};
use crate::segment::{merge_elements, segment_document, Piece, Segment, SegmentationConfig, SegmentationError};
use crate::serialize::SerializationFormat;
use crate::tokens::{truncate_to_tokens, TokenCounter};

/// Extraction answers are requested at two decimal places.
pub const EXTRACTION_PRECISION: u32 = 2;
/// Output allowance for a single extracted value.
pub const EXTRACTION_OUTPUT_TOKENS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub window: usize,
    pub element_limit: usize,
    pub segment_limit: usize,
    pub keyword_limit: usize,
    pub summary_limit: usize,
}

impl TokenBudget {
    pub const GPT35: TokenBudget = TokenBudget {
        window: 4096,
        element_limit: 2000,
        segment_limit: 2500,
        keyword_limit: 50,
        summary_limit: 500,
    };

    pub const GPT4: TokenBudget = TokenBudget {
        window: 32768,
        element_limit: 25000,
        segment_limit: 25000,
        keyword_limit: 50,
        summary_limit: 5000,
    };

    pub fn validate(&self) -> Result<(), String> {
        if self.element_limit == 0 || self.element_limit > self.segment_limit {
            return Err(format!(
                "element_limit {} must be in 1..=segment_limit {}",
                self.element_limit, self.segment_limit
            ));
        }
        if self.segment_limit + self.summary_limit > self.window {
            return Err(format!(
                "segment_limit {} plus summary_limit {} exceeds window {}",
                self.segment_limit, self.summary_limit, self.window
            ));
        }
        if self.keyword_limit == 0 || self.summary_limit == 0 {
            return Err("keyword_limit and summary_limit must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Refine,
    MapReduce,
    /// Whole serialized document, truncated to fit, in one extraction call.
    Naive,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Refine => "refine",
            Self::MapReduce => "map_reduce",
            Self::Naive => "naive",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "refine" => Ok(Self::Refine),
            "map_reduce" | "mapreduce" => Ok(Self::MapReduce),
            "naive" => Ok(Self::Naive),
            _ => Err(format!("unknown strategy {s:?} (expected refine, map_reduce or naive)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Keyword,
    Segmentation,
    Retrieval,
    Summarization,
    Extraction,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("keyword: {0}")]
    Keyword(#[from] KeywordError),
    #[error("segmentation: {0}")]
    Segmentation(#[from] SegmentationError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("template: {0}")]
    Template(#[from] TemplateError),
    #[error("{stage:?} stage: {source}")]
    Llm {
        stage: Stage,
        #[source]
        source: LlmError,
    },
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Self::Config(_) | Self::Template(_) => None,
            Self::Keyword(_) => Some(Stage::Keyword),
            Self::Segmentation(_) => Some(Stage::Segmentation),
            Self::Retrieval(_) => Some(Stage::Retrieval),
            Self::Llm { stage, .. } => Some(*stage),
        }
    }
}

/// Everything needed to issue summarization and extraction calls.
#[derive(Clone, Copy)]
pub struct LlmContext<'a> {
    pub client: &'a dyn LlmClient,
    pub registry: &'a TemplateRegistry,
    pub counter: &'a dyn TokenCounter,
    pub budget: &'a TokenBudget,
    /// Replaces the Question and Map prompts when set.
    pub precision_variant: Option<PrecisionVariant>,
    pub jobs: usize,
}

impl LlmContext<'_> {
    fn call(
        &self,
        stage: Stage,
        name: TemplateName,
        bindings: &[(&str, &str)],
        output_limit: usize,
    ) -> Result<String, PipelineError> {
        let prompt = self.registry.get(name).render(bindings)?;
        // large windows can hold a full segment plus summary but not another
        // full summary on top, so output shrinks to whatever room is left
        let room = self.client.window().saturating_sub(self.counter.count(&prompt));
        let max_output = output_limit.min(room).max(1);
        self.client
            .complete(&prompt, max_output)
            .map_err(|source| PipelineError::Llm { stage, source })
    }

    fn summarize(&self, name: TemplateName, bindings: &[(&str, &str)]) -> Result<String, PipelineError> {
        let out = self.call(Stage::Summarization, name, bindings, self.budget.summary_limit)?;
        Ok(truncate_to_tokens(self.counter, out.trim(), self.budget.summary_limit))
    }

    fn opening_template(&self, default: TemplateName) -> TemplateName {
        self.precision_variant.map_or(default, TemplateName::Precision)
    }
}

/// Question prompt on the first segment, then one Refine prompt per
/// remaining segment carrying the summary forward.
pub fn summarize_refine(segments: &[Segment], keyword_text: &str, ctx: &LlmContext) -> Result<String, PipelineError> {
    let (first, rest) = segments
        .split_first()
        .ok_or_else(|| PipelineError::Config("no segments to summarize".into()))?;
    let mut summary = ctx.summarize(
        ctx.opening_template(TemplateName::Question),
        &[("document_segment", &first.text), ("keywords", keyword_text)],
    )?;
    for seg in rest {
        summary = ctx.summarize(
            TemplateName::Refine,
            &[
                ("document_segment", &seg.text),
                ("old_summary", &summary),
                ("keywords", keyword_text),
            ],
        )?;
    }
    Ok(summary)
}

/// Map prompt on every segment concurrently, then Reduce prompts until one
/// summary remains. Summaries too long to reduce together are grouped to fit
/// the segment limit and reduced level by level.
pub fn summarize_map_reduce(
    segments: &[Segment],
    keyword_text: &str,
    ctx: &LlmContext,
) -> Result<String, PipelineError> {
    if segments.is_empty() {
        return Err(PipelineError::Config("no segments to summarize".into()));
    }
    let map_template = ctx.opening_template(TemplateName::Map);
    let mut summaries = parallel_map(segments, ctx.jobs, |_, seg| {
        ctx.summarize(map_template, &[("document_segment", &seg.text), ("keywords", keyword_text)])
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    loop {
        let groups = group_summaries(&summaries, ctx.budget.segment_limit, ctx.counter);
        let reduced = parallel_map(&groups, ctx.jobs, |_, text| {
            ctx.summarize(TemplateName::Reduce, &[("text", text), ("keywords", keyword_text)])
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        if reduced.len() == 1 {
            return Ok(reduced.into_iter().next().expect("one summary"));
        }
        summaries = reduced;
    }
}

/// Newline-joined groups within `limit` tokens; always merges at least two
/// summaries per group so each round strictly shrinks the list.
fn group_summaries(summaries: &[String], limit: usize, counter: &dyn TokenCounter) -> Vec<String> {
    let pieces: Vec<Piece> = summaries
        .iter()
        .enumerate()
        .map(|(i, s)| Piece {
            element_id: i,
            piece_index: 0,
            text: s.clone(),
            from_table: false,
            over_limit: false,
        })
        .collect();
    let mut groups: Vec<String> = merge_elements(&pieces, limit, counter).into_iter().map(|s| s.text).collect();
    if groups.len() > 1 && groups.len() == summaries.len() {
        groups = summaries.chunks(2).map(|c| c.join("\n")).collect();
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub keyword: Keyword,
    pub keyword_text: String,
    pub value: Option<MoneyValue>,
    pub raw_model_output: String,
    pub summary: String,
    pub retrieved_segment_indices: Vec<usize>,
}

/// Reads the answer line of an extraction reply: `None` or a money amount.
pub fn parse_answer(raw: &str) -> Option<MoneyValue> {
    let line = raw.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = line.strip_prefix("Result:").unwrap_or(line).trim().trim_matches('"');
    if line.eq_ignore_ascii_case("none") {
        return None;
    }
    match MoneyValue::parse(line, EXTRACTION_PRECISION) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("unparseable extraction answer {line:?}: {e}");
            None
        }
    }
}

/// Extracts one value from `summary`. An unparseable answer yields an absent
/// value with the raw reply kept.
pub fn extract_value(
    summary: &str,
    keyword: &Keyword,
    keyword_text: &str,
    ctx: &LlmContext,
) -> Result<ExtractionResult, PipelineError> {
    let raw = ctx.call(
        Stage::Extraction,
        TemplateName::ExtractSingle,
        &[("text", summary), ("key_words", keyword_text)],
        EXTRACTION_OUTPUT_TOKENS,
    )?;
    Ok(ExtractionResult {
        keyword: keyword.clone(),
        keyword_text: keyword_text.to_string(),
        value: parse_answer(&raw),
        raw_model_output: raw,
        summary: summary.to_string(),
        retrieved_segment_indices: Vec::new(),
    })
}

/// Several attributes sharing one company and time, answered as a JSON object.
pub fn extract_batch(
    summary: &str,
    attributes: &[String],
    company: Option<&str>,
    time: Option<&str>,
    ctx: &LlmContext,
) -> Result<Vec<(String, Option<MoneyValue>)>, PipelineError> {
    let level = match (company.is_some(), time.is_some()) {
        (true, true) => crate::prompt::CompletionLevel::ATC,
        (true, false) => crate::prompt::CompletionLevel::AC,
        (false, true) => crate::prompt::CompletionLevel::AT,
        (false, false) => crate::prompt::CompletionLevel::A,
    };
    let key_words = complete_keywords_batch(attributes, company, time, level)?;
    let raw = ctx.call(
        Stage::Extraction,
        TemplateName::ExtractBatch,
        &[("text", summary), ("key_words", &key_words)],
        EXTRACTION_OUTPUT_TOKENS * attributes.len(),
    )?;
    let json_text = raw.trim().trim_start_matches("Result:").trim();
    let parsed: serde_json::Map<String, serde_json::Value> = serde_json::from_str(json_text).unwrap_or_else(|e| {
        log::warn!("unparseable batch answer {raw:?}: {e}");
        serde_json::Map::new()
    });
    Ok(attributes
        .iter()
        .map(|a| {
            let value = parsed.get(a).and_then(|v| v.as_str()).and_then(parse_answer);
            (a.clone(), value)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub budget: TokenBudget,
    pub format: SerializationFormat,
    pub top_k: usize,
    pub strategy: Strategy,
    pub precision_variant: Option<PrecisionVariant>,
    /// Cap on concurrent backend requests.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            budget: TokenBudget::GPT35,
            format: SerializationFormat::Plain,
            top_k: DEFAULT_TOP_K,
            strategy: Strategy::Refine,
            precision_variant: None,
            jobs: 4,
        }
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub registry: TemplateRegistry,
    pub client: Arc<dyn LlmClient>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub counter: Arc<dyn TokenCounter>,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        registry: TemplateRegistry,
        client: Arc<dyn LlmClient>,
        embedder: Arc<dyn EmbeddingProvider>,
        counter: Arc<dyn TokenCounter>,
    ) -> Result<Self, PipelineError> {
        config.budget.validate().map_err(PipelineError::Config)?;
        if config.top_k == 0 {
            return Err(PipelineError::Config("k must be at least 1".into()));
        }
        if client.window() < config.budget.window {
            return Err(PipelineError::Config(format!(
                "client window {} is smaller than the budget window {}",
                client.window(),
                config.budget.window
            )));
        }
        Ok(Self {
            config,
            registry,
            client,
            embedder,
            counter,
        })
    }

    pub fn context(&self) -> LlmContext<'_> {
        LlmContext {
            client: self.client.as_ref(),
            registry: &self.registry,
            counter: self.counter.as_ref(),
            budget: &self.config.budget,
            precision_variant: self.config.precision_variant,
            jobs: self.config.jobs.max(1),
        }
    }

    pub fn segmentation_config(&self) -> SegmentationConfig {
        SegmentationConfig {
            element_limit: self.config.budget.element_limit,
            segment_limit: self.config.budget.segment_limit,
            format: self.config.format,
            counter: self.counter.clone(),
        }
    }

    fn keyword_text(&self, kw: &Keyword) -> Result<String, PipelineError> {
        let text = complete_keyword(kw)?;
        let tokens = self.counter.count(&text);
        if tokens > self.config.budget.keyword_limit {
            return Err(PipelineError::Config(format!(
                "keyword {text:?} is {tokens} tokens, over the limit of {}",
                self.config.budget.keyword_limit
            )));
        }
        Ok(text)
    }

    pub fn run_extraction(&self, doc: &Document, kw: &Keyword) -> Result<ExtractionResult, PipelineError> {
        let keyword_text = self.keyword_text(kw)?;
        let ctx = self.context();
        if self.config.strategy == Strategy::Naive {
            return self.run_naive(doc, kw, &keyword_text, &ctx);
        }
        let segments = segment_document(doc, &self.segmentation_config())?;
        let retrieved = retrieve_top_k_parallel(
            &segments,
            &keyword_text,
            self.config.top_k,
            self.embedder.as_ref(),
            self.counter.as_ref(),
            ctx.jobs,
        )?;
        let summary = match self.config.strategy {
            Strategy::MapReduce => summarize_map_reduce(&retrieved, &keyword_text, &ctx)?,
            _ => summarize_refine(&retrieved, &keyword_text, &ctx)?,
        };
        let mut result = extract_value(&summary, kw, &keyword_text, &ctx)?;
        result.retrieved_segment_indices = retrieved.iter().map(|s| s.segment_index).collect();
        Ok(result)
    }

    /// Serializes every element in order, cuts the text to whatever the
    /// extraction prompt leaves free, and asks once.
    fn run_naive(
        &self,
        doc: &Document,
        kw: &Keyword,
        keyword_text: &str,
        ctx: &LlmContext,
    ) -> Result<ExtractionResult, PipelineError> {
        let full = crate::segment::document_pieces(doc, &self.segmentation_config())
            .into_iter()
            .map(|p| p.text)
            .collect::<Vec<_>>()
            .join("\n");
        let skeleton = self
            .registry
            .get(TemplateName::ExtractSingle)
            .render(&[("text", ""), ("key_words", keyword_text)])?;
        let room = self
            .client
            .window()
            .saturating_sub(self.counter.count(&skeleton) + EXTRACTION_OUTPUT_TOKENS + 1);
        let text = truncate_to_tokens(self.counter.as_ref(), &full, room);
        extract_value(&text, kw, keyword_text, ctx)
    }

    /// Runs many (document, keyword) pairs with at most `config.jobs` in flight.
    pub fn run_many(&self, jobs: &[(&Document, Keyword)]) -> Vec<Result<ExtractionResult, PipelineError>> {
        // inner stages run serially so the total in-flight cap holds
        let serial = Pipeline {
            config: PipelineConfig { jobs: 1, ..self.config.clone() },
            registry: self.registry.clone(),
            client: self.client.clone(),
            embedder: self.embedder.clone(),
            counter: self.counter.clone(),
        };
        parallel_map(jobs, self.config.jobs, |_, (doc, kw)| serial.run_extraction(doc, kw))
    }
}
