//! Streaming log template mining.
//!
//! Two online parsers ([`spell::SpellParser`] and [`drain::DrainParser`])
//! group raw log messages under templates. Around them sit regex masking,
//! dataset ingestion, grouping-accuracy evaluation and experiment harnesses.
//!
//! ```
//! use logstruct::{DrainParser, LogParser, TokenSequence};
//!
//! let mut parser = DrainParser::default();
//! parser.feed(&TokenSequence::tokenize("Connected to 10.0.0.1"));
//! let out = parser.feed(&TokenSequence::tokenize("Connected to 10.0.0.2"));
//! assert!(!out.created);
//! assert_eq!(parser.templates()[0].text(), "Connected to <*>");
//! ```

pub mod bench;
pub mod drain;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod preprocess;
pub mod spell;

pub use bench::{ParserKind, ParserParams, SweepGrid};
pub use drain::{DrainConfig, DrainParser};
pub use error::{Error, Result};
pub use eval::{grouping_accuracy, improvement_ratio, EvalReport, ImprovementRatio, Ratio};
pub use ingest::{DatasetManifest, GroundTruth};
pub use model::{
    is_wildcard, run_parser, Assignment, LogParser, LogRecord, ParseOutcome, Template, TemplateId,
    TokenSequence, WILDCARD,
};
pub use preprocess::{apply_masks, MaskSet};
pub use spell::{SpellConfig, SpellParser};
