//! Cognitive-map supervision for multi-view spatial question answering.
//!
//! Loads annotated multi-image scene items, lays them out on a 10x10 grid,
//! writes grounded reasoning chains, composes training records for each task
//! configuration, parses model responses and scores them.

pub mod cli;
pub mod cogmap;
pub mod error;
pub mod goldens;
pub mod ingest;
pub mod metrics;
pub mod oracle;
pub mod parse;
pub mod reasoning;
pub mod scene;
pub mod synth;
pub mod tasks;
pub mod templates;

pub use cogmap::{generate_cogmap, CogmapSchema};
pub use error::*;
pub use ingest::{load_items, parse_setting, DatasetFile};
pub use metrics::{cogmap_metrics, grade, qa_accuracy, render_table, EvalReport, GradedResult, GraphMetrics, Tally};
pub use oracle::{answer_question, Question};
pub use parse::{parse_answer, parse_cogmap, parse_response, ParsedResponse};
pub use reasoning::{generate_reasoning, ReasoningChain};
pub use scene::*;
pub use tasks::{build_record, compose, emit_dataset, emit_sft_manifest, TaskConfig, TrainingRecord};
pub use templates::Templates;
