//! Persian typographical error generation and error-type detection.
//!
//! The crate has two halves. The first corrupts POS-tagged corpora with a
//! taxonomy of Persian-specific typing errors and emits a parallel dataset of
//! `(word, misspelt word, typo type)` rows. The second is a word + character
//! embedding bidirectional LSTM token classifier, trained from scratch, that
//! tags every token of a sentence with its error class or `N/A`.
//!
//! Module map:
//!
//! - [`persian_text`]: keyboard layout, confusion tables and separator kinds.
//! - [`error_modules`]: one corruption operation per error tag.
//! - [`corpus`]: token/sentence model, TSV formats, statistics, splitting.
//! - [`generator`]: the corruption driver, label classes and the class registry.
//! - [`detector`]: the neural tagger (forward, backward, Adam, training, I/O).
//! - [`eval`]: multi-class and binary detection metrics, timing.
//! - [`fixture`]: a synthetic Persian corpus built from a shipped word list.

pub mod corpus;
pub mod detector;
pub mod error_modules;
pub mod eval;
pub mod fixture;
pub mod generator;
pub mod persian_text;
pub mod rng;

pub use corpus::{Corpus, LabeledCorpus, LabeledSentence, LabeledToken, Sentence, Token};
pub use error_modules::{ApplyOutcome, ErrorTag};
pub use generator::{ClassRegistry, GenerationReport, GeneratorConfig, LabelClass};
pub use persian_text::{ConfusionTables, KeyboardLayout, Resources};
pub use rng::RngStream;
