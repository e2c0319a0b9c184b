//! `afie` command line. Machine-readable JSON goes to stdout, diagnostics to
//! stderr.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 pipeline error,
//! 3 dataset error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{Backend, RunConfig};
use crate::document::{read_document, Document, ElementKind};
use crate::eval::{evaluate_run, format_ratio, load_dataset, rpd, PredictionRecord, Predictions, RetaLevel};
use crate::pipeline::Strategy;
use crate::prompt::{CompletionLevel, Keyword, PrecisionVariant, TemplateName};
use crate::segment::segment_document;
use crate::serialize::{serialize_table, SerializationFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PIPELINE: i32 = 2;
pub const EXIT_DATASET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "afie", version, about = "Keyword value extraction from long hybrid text/table documents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one keyword's value from a document
    Extract(ExtractArgs),
    /// Run a dataset through the pipeline and score it
    Eval(EvalArgs),
    /// Dump the segments of a document
    Segment(SegmentArgs),
    /// Dump a document's elements with tables serialized
    Serialize(SerializeArgs),
    /// Inspect prompt templates
    Templates {
        #[command(subcommand)]
        action: TemplatesAction,
        /// Directory of template overrides
        #[arg(long, global = true)]
        template_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TemplatesAction {
    /// List templates and their placeholders
    List,
    /// Check every template against its required anchors
    Verify,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Token budget profile, e.g. gpt35-profile or gpt4-profile
    #[arg(long)]
    pub profile: Option<String>,
    /// mock or http
    #[arg(long)]
    pub backend: Option<Backend>,
    /// refine, map_reduce or naive
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Table serialization: plain, csv, xml or html
    #[arg(long)]
    pub format: Option<SerializationFormat>,
    /// Number of segments to retrieve
    #[arg(long = "k")]
    pub top_k: Option<usize>,
    /// Opening prompt variant, e.g. direct_shot_precision
    #[arg(long)]
    pub precision_variant: Option<PrecisionVariant>,
    /// Keyword completion: A, A_T, A_C or A_T_C
    #[arg(long)]
    pub completion: Option<CompletionLevel>,
    /// Write every backend call to this JSONL file
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Maximum concurrent backend requests
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory of `<template>.txt` overrides
    #[arg(long)]
    pub template_dir: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.profile {
            cfg.profile = p.clone();
        }
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(s) = self.strategy {
            cfg.strategy = s;
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(k) = self.top_k {
            cfg.top_k = k;
        }
        if let Some(v) = self.precision_variant {
            cfg.precision_variant = Some(v);
        }
        if let Some(c) = self.completion {
            cfg.completion = c;
        }
        if let Some(t) = &self.trace {
            cfg.trace = Some(t.clone());
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(d) = &self.template_dir {
            cfg.template_dir = Some(d.clone());
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Document JSON
    #[arg(long)]
    pub doc: PathBuf,
    /// Attribute to extract, e.g. "Net income"
    #[arg(long)]
    pub attribute: String,
    /// Company name used to complete the keyword
    #[arg(long)]
    pub company: Option<String>,
    /// Reporting period used to complete the keyword, e.g. 2022Q4
    #[arg(long)]
    pub time: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth JSONL
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory holding `<doc_id>.json` documents
    #[arg(long)]
    pub docs_dir: PathBuf,
    /// Output directory for predictions.jsonl, report.json and report.txt
    #[arg(long, default_value = "afie-eval")]
    pub out: PathBuf,
    /// Comma-separated tolerances, e.g. `0,0.001%,0.01%,0.1%`
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<RetaLevel>>,
    /// Average per company instead of per record
    #[arg(long = "macro")]
    pub macro_average: bool,
    /// Keywords forming the first group of an ambiguity comparison
    #[arg(long, value_delimiter = ',', requires = "rpd_y")]
    pub rpd_x: Vec<String>,
    /// Keywords forming the second group of an ambiguity comparison
    #[arg(long, value_delimiter = ',', requires = "rpd_x")]
    pub rpd_y: Vec<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub doc: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SerializeArgs {
    #[arg(long)]
    pub doc: PathBuf,
    #[arg(long, default_value = "plain")]
    pub format: SerializationFormat,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Extract(a) => cmd_extract(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Segment(a) => cmd_segment(&a, out),
        Command::Serialize(a) => cmd_serialize(&a, out),
        Command::Templates { action, template_dir } => cmd_templates(&action, template_dir.as_deref(), out),
    };
    match outcome {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("error: {message}");
            code
        }
    }
}

type CmdResult = Result<i32, (i32, String)>;

fn usage(e: impl std::fmt::Display) -> (i32, String) {
    (EXIT_USAGE, e.to_string())
}

fn pipeline_err(e: impl std::fmt::Display) -> (i32, String) {
    (EXIT_PIPELINE, e.to_string())
}

fn emit(out: &mut dyn Write, value: &Value) -> Result<(), (i32, String)> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    match writeln!(out, "{text}") {
        // the reader went away, e.g. `afie ... | head`
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(pipeline_err),
    }
}

fn load_doc(path: &Path) -> Result<Document, (i32, String)> {
    read_document(path).map_err(|e| pipeline_err(format!("{}: {e}", path.display())))
}

fn cmd_extract(a: &ExtractArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.run.resolve().map_err(usage)?;
    let doc = load_doc(&a.doc)?;
    let pipeline = cfg.build_pipeline().map_err(usage)?;
    let kw = Keyword::new(a.attribute.clone(), a.company.clone(), a.time.clone(), cfg.completion);
    let result = pipeline.run_extraction(&doc, &kw).map_err(pipeline_err)?;
    emit(out, &serde_json::to_value(&result).expect("result serializes"))?;
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let mut cfg = a.run.resolve().map_err(usage)?;
    if let Some(levels) = &a.levels {
        cfg.levels = levels.clone();
    }
    if a.macro_average {
        cfg.averaging = crate::eval::Averaging::Macro;
    }
    cfg.validate().map_err(usage)?;
    let dataset = load_dataset(&a.dataset).map_err(|e| (EXIT_DATASET, e.to_string()))?;
    let mut docs: BTreeMap<&str, Document> = BTreeMap::new();
    for rec in &dataset {
        if !docs.contains_key(rec.doc_id()) {
            let path = a.docs_dir.join(format!("{}.json", rec.doc_id()));
            let doc = read_document(&path).map_err(|e| (EXIT_DATASET, format!("{}: {e}", path.display())))?;
            docs.insert(rec.doc_id(), doc);
        }
    }
    let pipeline = cfg.build_pipeline().map_err(usage)?;
    let jobs: Vec<(&Document, Keyword)> = dataset
        .iter()
        .map(|rec| {
            let kw = Keyword::new(
                rec.keyword.clone(),
                Some(rec.company.clone()),
                Some(rec.time.clone()),
                cfg.completion,
            );
            (&docs[rec.doc_id()], kw)
        })
        .collect();
    let results = pipeline.run_many(&jobs);

    let mut predictions = Predictions::new();
    let mut lines = String::new();
    let mut errors = Vec::new();
    for (rec, result) in dataset.iter().zip(&results) {
        let value = match result {
            Ok(r) => r.value,
            Err(e) => {
                eprintln!("error: {}: {e}", rec.key());
                errors.push(json!({ "record": rec.key(), "error": e.to_string() }));
                None
            }
        };
        predictions.insert(rec.key(), value.map(|v| v.amount_millions()));
        let line = serde_json::to_string(&PredictionRecord::new(&rec.key(), value.as_ref())).expect("serializes");
        lines.push_str(&line);
        lines.push('\n');
    }
    let report = evaluate_run(&dataset, &predictions, &cfg.levels, cfg.averaging).map_err(|e| (EXIT_DATASET, e.to_string()))?;

    let mut json = report.to_json();
    json["errors"] = Value::Array(errors.clone());
    if !a.rpd_x.is_empty() {
        json["rpd"] = rpd_section(&report, &a.rpd_x, &a.rpd_y);
    }
    let label = format!("{}/{}", cfg.strategy, cfg.format.name());
    std::fs::create_dir_all(&a.out).map_err(pipeline_err)?;
    let write = |name: &str, text: &str| std::fs::write(a.out.join(name), text).map_err(pipeline_err);
    write("predictions.jsonl", &lines)?;
    write("report.json", &(serde_json::to_string_pretty(&json).expect("serializes") + "\n"))?;
    write("report.txt", &report.to_text(&label))?;

    let mut summary = json.clone();
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("verdicts");
    }
    emit(out, &summary)?;
    Ok(if errors.is_empty() { EXIT_OK } else { EXIT_PIPELINE })
}

fn rpd_section(report: &crate::eval::EvalReport, xs: &[String], ys: &[String]) -> Value {
    let xr: Vec<&str> = xs.iter().map(String::as_str).collect();
    let yr: Vec<&str> = ys.iter().map(String::as_str).collect();
    let (Some(ax), Some(ay)) = (report.slice_accuracy(&xr), report.slice_accuracy(&yr)) else {
        return json!({ "error": "a keyword group matched no records" });
    };
    let levels: Vec<Value> = report
        .levels
        .iter()
        .zip(ax.iter().zip(&ay))
        .map(|(l, (x, y))| {
            let pct = rpd(x, y)
                .map(|r| format_ratio(&(r * num_bigint::BigInt::from(100)), 2) + "%")
                .unwrap_or_else(|e| e.to_string());
            json!({
                "level": l.level.to_string(),
                "accuracy_x": format_ratio(x, 4),
                "accuracy_y": format_ratio(y, 4),
                "rpd": pct,
            })
        })
        .collect();
    json!({ "x": xs, "y": ys, "levels": levels })
}

fn cmd_segment(a: &SegmentArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = a.run.resolve().map_err(usage)?;
    let doc = load_doc(&a.doc)?;
    let pipeline = cfg.build_pipeline().map_err(usage)?;
    let segments = segment_document(&doc, &pipeline.segmentation_config()).map_err(pipeline_err)?;
    emit(out, &serde_json::to_value(&segments).expect("segments serialize"))?;
    Ok(EXIT_OK)
}

fn cmd_serialize(a: &SerializeArgs, out: &mut dyn Write) -> CmdResult {
    let doc = load_doc(&a.doc)?;
    let elements: Vec<Value> = doc
        .elements
        .iter()
        .map(|el| match &el.kind {
            ElementKind::Paragraph { text } => json!({ "id": el.id, "type": "paragraph", "text": text }),
            ElementKind::Table(t) => json!({ "id": el.id, "type": "table", "text": serialize_table(t, a.format) }),
        })
        .collect();
    emit(out, &json!({ "document": doc.id, "format": a.format.name(), "elements": elements }))?;
    Ok(EXIT_OK)
}

fn cmd_templates(action: &TemplatesAction, dir: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let registry = match dir {
        Some(d) => crate::prompt::TemplateRegistry::with_overrides(d).map_err(usage)?,
        None => crate::prompt::TemplateRegistry::builtin(),
    };
    match action {
        TemplatesAction::List => {
            let list: Vec<Value> = TemplateName::all()
                .into_iter()
                .map(|n| {
                    let t = registry.get(n);
                    json!({ "name": n.to_string(), "placeholders": t.placeholders() })
                })
                .collect();
            emit(out, &Value::Array(list))?;
            Ok(EXIT_OK)
        }
        TemplatesAction::Verify => {
            let checks = registry.verify();
            let ok = checks.iter().all(|c| c.ok);
            emit(out, &json!({ "ok": ok, "templates": checks }))?;
            Ok(if ok { EXIT_OK } else { EXIT_PIPELINE })
        }
    }
}
