pub mod document;
pub mod segment;
pub mod serialize;
pub mod tokens;
pub mod html;
pub mod parallel;
pub mod retrieval;
pub mod money;
pub mod prompt;
pub mod llm;
pub mod http;
pub mod pipeline;
pub mod eval;
pub mod config;
pub mod cli;
