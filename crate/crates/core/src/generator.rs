//! The corruption driver and the label space.
//!
//! [`generate`] picks a seeded fraction `s` of token occurrences, corrupts
//! each picked word with up to `m` successful error modules, and then
//! post-filters empty, recurrent (cancelled) and identical-but-differently
//! tagged misspellings by relabeling them `N/A`. Rows are never dropped, so
//! every sentence keeps its full length.
//!
//! Every token draws from its own stream seeded by
//! `(seed, sentence_id, row)`, which makes the output independent of thread
//! scheduling and of `s`.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Corpus, LabeledCorpus, LabeledSentence, LabeledToken};
use crate::error_modules::ErrorTag;
use crate::persian_text::Resources;
use crate::rng::RngStream;

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("{count} tags exceed the maximum of {max} errors per word")]
    TooManyTags { count: usize, max: usize },
    #[error("class {0:?} is not in the frozen registry")]
    UnseenClass(String),
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("label map line {line}: {message}")]
    LabelMap { line: usize, message: String },
}

/// `N/A` or a sorted multiset of error tags.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelClass {
    NotApplicable,
    Errors(Vec<ErrorTag>),
}

impl LabelClass {
    /// Canonical class for a tag multiset, in any order.
    pub fn from_tags(mut tags: Vec<ErrorTag>) -> Self {
        if tags.is_empty() {
            Self::NotApplicable
        } else {
            tags.sort_unstable();
            Self::Errors(tags)
        }
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Self::NotApplicable)
    }

    pub fn tags(&self) -> &[ErrorTag] {
        match self {
            Self::NotApplicable => &[],
            Self::Errors(tags) => tags,
        }
    }

    /// Registry order: `N/A`, then by tag count, then by tag codes.
    fn registry_key(&self) -> (usize, Vec<u8>) {
        (self.tags().len(), self.tags().iter().map(|t| t.code()).collect())
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotApplicable => f.write_str("N/A"),
            Self::Errors(tags) => {
                for (i, tag) in tags.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(tag.name())?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for LabelClass {
    type Err = GeneratorError;

    /// Accepts only the canonical rendering, so that parse and display are
    /// exact inverses.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "N/A" {
            return Ok(Self::NotApplicable);
        }
        let tags = s
            .split(", ")
            .map(ErrorTag::from_str)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| GeneratorError::InvalidLabel(s.to_string()))?;
        if tags.is_empty() || tags.windows(2).any(|w| w[0] > w[1]) {
            return Err(GeneratorError::InvalidLabel(s.to_string()));
        }
        Ok(Self::Errors(tags))
    }
}

/// Canonical label for a multiset of at most `max_errors` tags.
pub fn canonical_label(tags: &[ErrorTag], max_errors: usize) -> Result<LabelClass, GeneratorError> {
    if tags.len() > max_errors {
        return Err(GeneratorError::TooManyTags {
            count: tags.len(),
            max: max_errors,
        });
    }
    Ok(LabelClass::from_tags(tags.to_vec()))
}

/// Class to index map with `N/A` at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRegistry {
    classes: Vec<LabelClass>,
    index: HashMap<LabelClass, usize>,
    frozen: bool,
}

impl Default for ClassRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl ClassRegistry {
    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert(LabelClass::NotApplicable, 0);
        Self {
            classes: vec![LabelClass::NotApplicable],
            index,
            frozen: false,
        }
    }

    /// A frozen registry of `N/A` plus the given classes in registry order.
    pub fn from_classes<I: IntoIterator<Item = LabelClass>>(classes: I) -> Self {
        let mut unique: Vec<LabelClass> = classes
            .into_iter()
            .filter(|c| !c.is_na())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        unique.sort_by_key(LabelClass::registry_key);
        let mut registry = Self::new();
        for class in unique {
            registry.insert(class).expect("fresh registry is open");
        }
        registry.freeze();
        registry
    }

    /// Add a class, returning its index. Fails once frozen unless present.
    pub fn insert(&mut self, class: LabelClass) -> Result<usize, GeneratorError> {
        if let Some(&i) = self.index.get(&class) {
            return Ok(i);
        }
        if self.frozen {
            return Err(GeneratorError::UnseenClass(class.to_string()));
        }
        let i = self.classes.len();
        self.index.insert(class.clone(), i);
        self.classes.push(class);
        Ok(i)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn index_of(&self, class: &LabelClass) -> Result<usize, GeneratorError> {
        self.index
            .get(class)
            .copied()
            .ok_or_else(|| GeneratorError::UnseenClass(class.to_string()))
    }

    pub fn class(&self, index: usize) -> Option<&LabelClass> {
        self.classes.get(index)
    }

    pub fn classes(&self) -> &[LabelClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub const NA_INDEX: usize = 0;

    /// A frozen copy that also covers `extra` classes, appended after the
    /// existing ones so that existing indices are unchanged.
    pub fn extended<'a, I: IntoIterator<Item = &'a LabelClass>>(&self, extra: I) -> Self {
        let mut out = self.clone();
        out.frozen = false;
        let mut added: Vec<LabelClass> = extra
            .into_iter()
            .filter(|c| !self.index.contains_key(*c))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        added.sort_by_key(LabelClass::registry_key);
        for class in added {
            let _ = out.insert(class);
        }
        out.freeze();
        out
    }

    /// One `<index>\t<class>` line per class.
    pub fn to_label_map(&self) -> String {
        let mut out = String::new();
        for (i, class) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{class}");
        }
        out
    }

    pub fn parse_label_map(text: &str) -> Result<Self, GeneratorError> {
        let mut registry = Self::new();
        let mut count = 0;
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| GeneratorError::LabelMap {
                line: i + 1,
                message: message.to_string(),
            };
            let (idx, name) = line.split_once('\t').ok_or_else(|| err("expected index<TAB>class"))?;
            let idx: usize = idx.parse().map_err(|_| err("index is not an integer"))?;
            if idx != count {
                return Err(err("indices must be contiguous from 0"));
            }
            let class: LabelClass = name.parse().map_err(|_| err("unknown class"))?;
            if idx == 0 {
                if !class.is_na() {
                    return Err(err("index 0 must be N/A"));
                }
            } else if class.is_na() || registry.index.contains_key(&class) {
                return Err(err("duplicate class"));
            } else {
                registry.insert(class).expect("open while parsing");
            }
            count += 1;
        }
        if count == 0 {
            return Err(GeneratorError::LabelMap {
                line: 1,
                message: "empty label map".into(),
            });
        }
        registry.freeze();
        Ok(registry)
    }

    /// SHA-256 of the label map, lowercase hex.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_label_map().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// `N/A` plus every class observed in the corpus, frozen.
pub fn build_registry(corpus: &LabeledCorpus) -> ClassRegistry {
    ClassRegistry::from_classes(corpus.tokens().map(|t| t.label.clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Fraction of token occurrences to corrupt.
    pub s: f64,
    /// Maximum number of successful errors per word.
    pub m: usize,
    pub seed: u64,
    pub enabled_tags: Vec<ErrorTag>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            s: 0.25,
            m: 2,
            seed: 0,
            enabled_tags: ErrorTag::ALL.to_vec(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(0.0..=1.0).contains(&self.s) {
            return Err(GeneratorError::InvalidConfig(format!(
                "s must lie in [0, 1], got {}",
                self.s
            )));
        }
        if self.m < 1 {
            return Err(GeneratorError::InvalidConfig("m must be at least 1".into()));
        }
        if self.enabled_tags.is_empty() {
            return Err(GeneratorError::InvalidConfig("no error module enabled".into()));
        }
        Ok(())
    }
}

/// Apply up to `max_errors` randomly drawn modules to `word`.
///
/// The number of attempts is drawn uniformly from `1..=len(word)`. Each
/// attempt draws one module and applies it to the current string; it
/// counts only when the module reports a change. Returns the final string
/// and the successful tags in application order.
pub fn corrupt_word(
    word: &str,
    max_errors: usize,
    rng: &mut RngStream,
    modules: &[ErrorTag],
    res: &Resources,
) -> (String, Vec<ErrorTag>) {
    let len = word.chars().count();
    let mut current = word.to_string();
    let mut tags = Vec::new();
    if len == 0 || modules.is_empty() || max_errors == 0 {
        return (current, tags);
    }
    let attempts = rng.below(1, len + 1);
    for _ in 0..attempts {
        let tag = *rng.choose(modules).expect("modules is non-empty");
        if let Some(next) = tag.apply(&current, rng, res).changed() {
            current = next;
            tags.push(tag);
            if tags.len() == max_errors {
                break;
            }
        }
    }
    (current, tags)
}

/// `round(s * token_count)` distinct positions, sorted.
///
/// Positions are a prefix of one seeded permutation, so for a fixed seed
/// the set for a smaller `s` is contained in the set for a larger one.
pub fn select_candidates(token_count: usize, s: f64, seed: u64) -> Vec<usize> {
    let wanted = ((s * token_count as f64).round() as usize).min(token_count);
    let mut order: Vec<usize> = (0..token_count).collect();
    RngStream::derive(seed, &[0xca4d]).shuffle(&mut order);
    let mut picked = order[..wanted].to_vec();
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FilterCounts {
    pub empty: usize,
    pub recurrent: usize,
    pub identical: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GenerationReport {
    pub total_tokens: usize,
    pub candidate_count: usize,
    pub unchanged_count: usize,
    pub changed_count: usize,
    pub one_error_count: usize,
    pub two_error_count: usize,
    /// Tokens with more than two errors; always 0 for `m <= 2`.
    pub more_error_count: usize,
    pub filtered_empty: usize,
    pub filtered_recurrent: usize,
    pub filtered_identical: usize,
}

impl GenerationReport {
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (key, value) in [
            ("total_tokens", self.total_tokens),
            ("candidate_count", self.candidate_count),
            ("unchanged_count", self.unchanged_count),
            ("changed_count", self.changed_count),
            ("one_error_count", self.one_error_count),
            ("two_error_count", self.two_error_count),
            ("more_error_count", self.more_error_count),
            ("filtered_empty", self.filtered_empty),
            ("filtered_recurrent", self.filtered_recurrent),
            ("filtered_identical", self.filtered_identical),
        ] {
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }

    pub fn changed_fraction(&self) -> f64 {
        if self.total_tokens == 0 {
            0.0
        } else {
            self.changed_count as f64 / self.total_tokens as f64
        }
    }
}

/// Relabel invalid misspellings as `N/A` (misspelling reset to the word).
///
/// In corpus order: an empty misspelling counts as `empty`; a misspelling
/// equal to its word despite tags counts as `recurrent`; a misspelling
/// already seen with a different error class counts as `identical`.
pub fn post_filter(corpus: &mut LabeledCorpus) -> FilterCounts {
    let mut counts = FilterCounts::default();
    let mut first_label: HashMap<String, LabelClass> = HashMap::new();
    for token in corpus.sentences.iter_mut().flat_map(|s| s.tokens.iter_mut()) {
        if token.label.is_na() {
            continue;
        }
        if token.misspelt.is_empty() {
            counts.empty += 1;
        } else if token.misspelt == token.base.word {
            counts.recurrent += 1;
        } else {
            match first_label.get(&token.misspelt) {
                None => {
                    first_label.insert(token.misspelt.clone(), token.label.clone());
                    continue;
                }
                Some(label) if *label == token.label => continue,
                Some(_) => counts.identical += 1,
            }
        }
        token.misspelt = token.base.word.clone();
        token.label = LabelClass::NotApplicable;
    }
    counts
}

/// Run the full corruption pipeline over a corpus.
pub fn generate(
    corpus: &Corpus,
    config: &GeneratorConfig,
    res: &Resources,
) -> Result<(LabeledCorpus, GenerationReport), GeneratorError> {
    config.validate()?;
    let total = corpus.token_count();
    let candidates = select_candidates(total, config.s, config.seed);
    let mut is_candidate = vec![false; total];
    for &i in &candidates {
        is_candidate[i] = true;
    }
    let mut offsets = Vec::with_capacity(corpus.sentences.len());
    let mut acc = 0;
    for s in &corpus.sentences {
        offsets.push(acc);
        acc += s.tokens.len();
    }

    let sentences: Vec<LabeledSentence> = corpus
        .sentences
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(sentence, &offset)| LabeledSentence {
            id: sentence.id,
            tokens: sentence
                .tokens
                .iter()
                .enumerate()
                .map(|(k, token)| {
                    if !is_candidate[offset + k] {
                        return LabeledToken::unchanged(token.clone());
                    }
                    let mut rng =
                        RngStream::derive(config.seed, &[token.sentence_id, token.row as u64]);
                    let (misspelt, tags) =
                        corrupt_word(&token.word, config.m, &mut rng, &config.enabled_tags, res);
                    LabeledToken {
                        base: token.clone(),
                        misspelt,
                        label: LabelClass::from_tags(tags),
                    }
                })
                .collect(),
        })
        .collect();

    let mut labeled = LabeledCorpus { sentences };
    let filtered = post_filter(&mut labeled);
    let mut report = GenerationReport {
        total_tokens: total,
        candidate_count: candidates.len(),
        filtered_empty: filtered.empty,
        filtered_recurrent: filtered.recurrent,
        filtered_identical: filtered.identical,
        ..GenerationReport::default()
    };
    for token in labeled.tokens() {
        match token.label.tags().len() {
            0 => report.unchanged_count += 1,
            1 => report.one_error_count += 1,
            2 => report.two_error_count += 1,
            _ => report.more_error_count += 1,
        }
    }
    report.changed_count = total - report.unchanged_count;
    Ok((labeled, report))
}
