//! POS-tagged corpora, the parallel misspelling dataset, descriptive
//! statistics and sentence-level splitting.
//!
//! Both formats are UTF-8, LF-terminated, tab-separated files with a
//! header line. Fields may contain U+0020 and U+200C but never tabs or
//! newlines; everything else is stored byte for byte.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::generator::LabelClass;
use crate::rng::RngStream;

pub const CORPUS_HEADER: &str = "row\tsentence_id\tword\tpos\tsource";
pub const PARALLEL_HEADER: &str = "row\tsentence_id\tword\tpos\tsource\tmisspelt_word\ttypo_type";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: not valid UTF-8")]
    NonUtf8 { line: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: row {row} does not follow row {previous} of sentence {sentence_id}")]
    NonMonotoneRow {
        line: usize,
        sentence_id: u64,
        row: u32,
        previous: u32,
    },
    #[error("line {line}: sentence {sentence_id} appears in two separate blocks")]
    DuplicateSentence { line: usize, sentence_id: u64 },
    #[error("field {0:?} contains a tab or newline")]
    UnwritableField(String),
    #[error("invalid split: {0}")]
    Split(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    /// 1-based position within the sentence.
    pub row: u32,
    pub sentence_id: u64,
    pub word: String,
    pub pos: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: u64,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledToken {
    pub base: Token,
    pub misspelt: String,
    pub label: LabelClass,
}

impl LabeledToken {
    /// An untouched token: label N/A, misspelling equal to the word.
    pub fn unchanged(base: Token) -> Self {
        Self {
            misspelt: base.word.clone(),
            base,
            label: LabelClass::NotApplicable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub id: u64,
    pub tokens: Vec<LabeledToken>,
}

impl LabeledSentence {
    pub fn misspelt_words(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.misspelt.clone()).collect()
    }

    pub fn labels(&self) -> Vec<LabelClass> {
        self.tokens.iter().map(|t| t.label.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub sentences: Vec<LabeledSentence>,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = read_file(path)?;
        Self::parse(&bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CorpusError> {
        let rows = parse_rows(bytes, CORPUS_HEADER, 5)?;
        let mut builder = SentenceBuilder::default();
        for (line, fields) in rows {
            let token = parse_token(line, &fields)?;
            builder.push(line, token)?;
        }
        Ok(Corpus {
            sentences: builder
                .finish()
                .into_iter()
                .map(|(id, tokens)| Sentence { id, tokens })
                .collect(),
        })
    }

    pub fn to_tsv(&self) -> Result<String, CorpusError> {
        let mut out = String::with_capacity(64 * self.token_count() + 64);
        out.push_str(CORPUS_HEADER);
        out.push('\n');
        for token in self.tokens() {
            write_token(&mut out, token)?;
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        write_file(path, self.to_tsv()?.as_bytes())
    }
}

impl LabeledCorpus {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &LabeledToken> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    /// The original corpus, without misspellings.
    pub fn base(&self) -> Corpus {
        Corpus {
            sentences: self
                .sentences
                .iter()
                .map(|s| Sentence {
                    id: s.id,
                    tokens: s.tokens.iter().map(|t| t.base.clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = read_file(path)?;
        Self::parse(&bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CorpusError> {
        let rows = parse_rows(bytes, PARALLEL_HEADER, 7)?;
        let mut builder = SentenceBuilder::default();
        let mut labeled = Vec::new();
        for (line, fields) in rows {
            let token = parse_token(line, &fields[..5])?;
            let misspelt = fields[5].to_string();
            let label: LabelClass = fields[6].parse().map_err(|e| CorpusError::Malformed {
                line,
                message: format!("{e}"),
            })?;
            if misspelt.is_empty() {
                return Err(malformed(line, "empty misspelt word"));
            }
            if label.is_na() != (misspelt == token.word) {
                return Err(malformed(
                    line,
                    "label must be N/A exactly when the misspelt word equals the word",
                ));
            }
            builder.push(line, token.clone())?;
            labeled.push(LabeledToken {
                base: token,
                misspelt,
                label,
            });
        }
        let mut tokens = labeled.into_iter();
        let sentences = builder
            .finish()
            .into_iter()
            .map(|(id, base)| LabeledSentence {
                id,
                tokens: tokens.by_ref().take(base.len()).collect(),
            })
            .collect();
        Ok(LabeledCorpus { sentences })
    }

    pub fn to_tsv(&self) -> Result<String, CorpusError> {
        let mut out = String::with_capacity(96 * self.token_count() + 96);
        out.push_str(PARALLEL_HEADER);
        out.push('\n');
        for token in self.tokens() {
            write_token(&mut out, &token.base)?;
            check_field(&token.misspelt)?;
            let _ = writeln!(out, "\t{}\t{}", token.misspelt, token.label);
        }
        Ok(out)
    }

    /// Write the parallel TSV.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        write_file(path, self.to_tsv()?.as_bytes())
    }
}

fn malformed(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        line,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CorpusError> {
    std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    std::fs::write(path, bytes).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Split into `(line number, fields)` after checking the header.
fn parse_rows<'a>(
    bytes: &'a [u8],
    header: &str,
    columns: usize,
) -> Result<Vec<(usize, Vec<&'a str>)>, CorpusError> {
    let mut rows = Vec::new();
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    for (i, raw) in body.split(|&b| b == b'\n').enumerate() {
        let line = i + 1;
        let text = std::str::from_utf8(raw).map_err(|_| CorpusError::NonUtf8 { line })?;
        if line == 1 {
            if text != header {
                return Err(malformed(line, format!("expected header {header:?}")));
            }
            continue;
        }
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != columns {
            return Err(malformed(
                line,
                format!("expected {columns} columns, found {}", fields.len()),
            ));
        }
        rows.push((line, fields));
    }
    if bytes.is_empty() {
        return Err(malformed(1, "missing header"));
    }
    Ok(rows)
}

fn parse_token(line: usize, fields: &[&str]) -> Result<Token, CorpusError> {
    let row: u32 = fields[0]
        .parse()
        .map_err(|_| malformed(line, format!("row {:?} is not a positive integer", fields[0])))?;
    if row == 0 {
        return Err(malformed(line, "rows start at 1"));
    }
    let sentence_id: u64 = fields[1]
        .parse()
        .map_err(|_| malformed(line, format!("sentence id {:?} is not an integer", fields[1])))?;
    if fields[2].is_empty() {
        return Err(malformed(line, "empty word"));
    }
    Ok(Token {
        row,
        sentence_id,
        word: fields[2].to_string(),
        pos: fields[3].to_string(),
        source: fields[4].to_string(),
    })
}

fn check_field(field: &str) -> Result<(), CorpusError> {
    if field.contains(['\t', '\n', '\r']) {
        Err(CorpusError::UnwritableField(field.to_string()))
    } else {
        Ok(())
    }
}

fn write_token(out: &mut String, t: &Token) -> Result<(), CorpusError> {
    for field in [&t.word, &t.pos, &t.source] {
        check_field(field)?;
    }
    let _ = write!(out, "{}\t{}\t{}\t{}\t{}", t.row, t.sentence_id, t.word, t.pos, t.source);
    Ok(())
}

/// Groups consecutive tokens into sentences and enforces ordering.
#[derive(Default)]
struct SentenceBuilder {
    done: Vec<(u64, Vec<Token>)>,
    seen: HashSet<u64>,
}

impl SentenceBuilder {
    fn push(&mut self, line: usize, token: Token) -> Result<(), CorpusError> {
        if let Some((id, tokens)) = self.done.last_mut() {
            if *id == token.sentence_id {
                let previous = tokens.last().map(|t| t.row).unwrap_or(0);
                if token.row <= previous {
                    return Err(CorpusError::NonMonotoneRow {
                        line,
                        sentence_id: *id,
                        row: token.row,
                        previous,
                    });
                }
                tokens.push(token);
                return Ok(());
            }
        }
        if !self.seen.insert(token.sentence_id) {
            return Err(CorpusError::DuplicateSentence {
                line,
                sentence_id: token.sentence_id,
            });
        }
        self.done.push((token.sentence_id, vec![token]));
        Ok(())
    }

    fn finish(self) -> Vec<(u64, Vec<Token>)> {
        self.done
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub word_count: usize,
    pub sentence_count: usize,
    pub unique_word_count: usize,
    pub distinct_pos_count: usize,
    /// Word length in characters to number of tokens.
    pub word_length_histogram: BTreeMap<usize, usize>,
    pub pos_histogram: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "words={}", self.word_count);
        let _ = writeln!(out, "sentences={}", self.sentence_count);
        let _ = writeln!(out, "unique_words={}", self.unique_word_count);
        let _ = writeln!(out, "distinct_pos_tags={}", self.distinct_pos_count);
        for (len, count) in &self.word_length_histogram {
            let _ = writeln!(out, "word_length.{len}={count}");
        }
        for (pos, count) in &self.pos_histogram {
            let _ = writeln!(out, "pos.{pos}={count}");
        }
        out
    }
}

pub fn corpus_statistics(corpus: &Corpus) -> CorpusStats {
    let mut unique = HashSet::new();
    let mut stats = CorpusStats {
        sentence_count: corpus.sentences.len(),
        ..CorpusStats::default()
    };
    for token in corpus.tokens() {
        stats.word_count += 1;
        unique.insert(token.word.as_str());
        *stats
            .word_length_histogram
            .entry(token.word.chars().count())
            .or_default() += 1;
        *stats.pos_histogram.entry(token.pos.clone()).or_default() += 1;
    }
    stats.unique_word_count = unique.len();
    stats.distinct_pos_count = stats.pos_histogram.len();
    stats
}

/// Part sizes for `n` items: floors of the exact shares, with the leftover
/// items going to the largest fractional remainders (ties to earlier parts).
pub fn partition_sizes(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Split whole sentences into parts with the given ratios after a seeded
/// shuffle. Each part keeps the original relative order of its sentences.
pub fn split_sentences<T: Clone>(
    sentences: &[T],
    ratios: &[f64],
    seed: u64,
) -> Result<Vec<Vec<T>>, CorpusError> {
    if ratios.is_empty() || ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(CorpusError::Split("ratios must be positive".into()));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CorpusError::Split(format!("ratios sum to {total}, not 1")));
    }
    if sentences.len() < ratios.len() {
        return Err(CorpusError::Split(format!(
            "{} sentences cannot fill {} parts",
            sentences.len(),
            ratios.len()
        )));
    }
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    RngStream::derive(seed, &[0x5b117]).shuffle(&mut order);
    let mut parts = Vec::with_capacity(ratios.len());
    let mut start = 0;
    for size in partition_sizes(sentences.len(), ratios) {
        let mut idx = order[start..start + size].to_vec();
        idx.sort_unstable();
        parts.push(idx.into_iter().map(|i| sentences[i].clone()).collect());
        start += size;
    }
    Ok(parts)
}

/// Train / validation / test split of a labeled corpus.
pub fn split_corpus(
    corpus: &LabeledCorpus,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus, LabeledCorpus), CorpusError> {
    let mut parts = split_sentences(&corpus.sentences, &ratios, seed)?.into_iter();
    let mut next = || LabeledCorpus {
        sentences: parts.next().unwrap_or_default(),
    };
    Ok((next(), next(), next()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_modules::ErrorTag;

    const FIXTURE: &str = "row\tsentence_id\tword\tpos\tsource\n\
        1\t1\tمن\tPR\ttest\n\
        2\t1\tکتاب\tN\ttest\n\
        3\t1\tمی\u{200C}خوانم\tV\ttest\n\
        1\t2\tاو\tPR\ttest\n\
        2\t2\tنامه\tN\ttest\n\
        3\t2\tرا\tPOSTP\ttest\n\
        4\t2\tمی\u{200C}نویسد\tV\ttest\n\
        5\t2\tو\tCONJ\ttest\n\
        6\t2\tکتاب\tN\ttest\n\
        7\t2\t.\tPUNC\ttest\n";

    #[test]
    fn loads_two_sentences() {
        let corpus = Corpus::parse(FIXTURE.as_bytes()).unwrap();
        assert_eq!(corpus.sentences.len(), 2);
        assert_eq!(corpus.token_count(), 10);
        assert_eq!(corpus.sentences[0].tokens[2].word, "می\u{200C}خوانم");
    }

    #[test]
    fn write_read_is_byte_exact() {
        let corpus = Corpus::parse(FIXTURE.as_bytes()).unwrap();
        assert_eq!(corpus.to_tsv().unwrap(), FIXTURE);
    }

    #[test]
    fn missing_column_names_the_line() {
        let bad = "row\tsentence_id\tword\tpos\tsource\n1\t1\tمن\ttest\n";
        match Corpus::parse(bad.as_bytes()).unwrap_err() {
            CorpusError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_monotone_rows_fail() {
        let bad = "row\tsentence_id\tword\tpos\tsource\n2\t1\tمن\tPR\tt\n1\t1\tتو\tPR\tt\n";
        assert!(matches!(
            Corpus::parse(bad.as_bytes()),
            Err(CorpusError::NonMonotoneRow { line: 3, .. })
        ));
    }

    #[test]
    fn split_sentence_blocks_fail() {
        let bad = "row\tsentence_id\tword\tpos\tsource\n1\t1\tا\tN\tt\n1\t2\tب\tN\tt\n2\t1\tپ\tN\tt\n";
        assert!(matches!(
            Corpus::parse(bad.as_bytes()),
            Err(CorpusError::DuplicateSentence { line: 4, sentence_id: 1 })
        ));
    }

    #[test]
    fn non_utf8_fails() {
        let mut bytes = CORPUS_HEADER.as_bytes().to_vec();
        bytes.extend_from_slice(b"\n1\t1\t\xff\tN\tt\n");
        assert!(matches!(Corpus::parse(&bytes), Err(CorpusError::NonUtf8 { line: 2 })));
    }

    #[test]
    fn statistics_of_fixture() {
        let corpus = Corpus::parse(FIXTURE.as_bytes()).unwrap();
        let stats = corpus_statistics(&corpus);
        assert_eq!(stats.word_count, 10);
        assert_eq!(stats.sentence_count, 2);
        assert_eq!(stats.unique_word_count, 9);
        // PR, N, V, POSTP, CONJ, PUNC
        assert_eq!(stats.distinct_pos_count, 6);
        assert_eq!(stats.word_length_histogram.values().sum::<usize>(), 10);
        assert_eq!(stats.pos_histogram["N"], 3);
    }

    #[test]
    fn three_pos_fixture() {
        let text = "row\tsentence_id\tword\tpos\tsource\n\
            1\t1\tالف\tN\tt\n2\t1\tب\tV\tt\n3\t1\tپ\tN\tt\n4\t1\tت\tADJ\tt\n5\t1\tث\tN\tt\n\
            1\t2\tج\tV\tt\n2\t2\tچ\tN\tt\n3\t2\tح\tADJ\tt\n4\t2\tخ\tN\tt\n5\t2\tد\tV\tt\n";
        let stats = corpus_statistics(&Corpus::parse(text.as_bytes()).unwrap());
        assert_eq!(stats.word_count, 10);
        assert_eq!(stats.distinct_pos_count, 3);
    }

    #[test]
    fn empty_corpus_statistics() {
        assert_eq!(corpus_statistics(&Corpus::default()), CorpusStats::default());
    }

    #[test]
    fn table_row_renders_like_the_dataset() {
        let token = LabeledToken {
            base: Token {
                row: 3,
                sentence_id: 35305,
                word: "را".into(),
                pos: "POSTP".into(),
                source: "PDTB".into(),
            },
            misspelt: "ا".into(),
            label: LabelClass::from_tags(vec![ErrorTag::Deletion]),
        };
        let corpus = LabeledCorpus {
            sentences: vec![LabeledSentence {
                id: 35305,
                tokens: vec![token],
            }],
        };
        let tsv = corpus.to_tsv().unwrap();
        assert_eq!(tsv.lines().nth(1).unwrap(), "3\t35305\tرا\tPOSTP\tPDTB\tا\tdeletion");
        let na = LabeledToken::unchanged(Token {
            row: 10,
            sentence_id: 35305,
            word: "می\u{200C}کنم".into(),
            pos: "V".into(),
            source: "PDTB".into(),
        });
        assert_eq!(na.label.to_string(), "N/A");
        assert_eq!(na.misspelt, na.base.word);
    }

    #[test]
    fn parallel_rejects_inconsistent_labels() {
        let bad = format!("{PARALLEL_HEADER}\n1\t1\tرا\tP\tt\tرا\tdeletion\n");
        assert!(LabeledCorpus::parse(bad.as_bytes()).is_err());
        let bad = format!("{PARALLEL_HEADER}\n1\t1\tرا\tP\tt\tا\tN/A\n");
        assert!(LabeledCorpus::parse(bad.as_bytes()).is_err());
    }

    #[test]
    fn exact_split_sizes() {
        let items: Vec<u32> = (0..10).collect();
        let parts = split_sentences(&items, &[0.6, 0.2, 0.2], 3).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![6, 2, 2]);
        assert_eq!(parts, split_sentences(&items, &[0.6, 0.2, 0.2], 3).unwrap());
    }

    #[test]
    fn split_rejects_bad_input() {
        let items: Vec<u32> = (0..10).collect();
        assert!(split_sentences(&items, &[0.5, 0.2, 0.2], 0).is_err());
        assert!(split_sentences(&items, &[1.2, -0.2], 0).is_err());
        assert!(split_sentences(&items[..2], &[0.6, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn partition_sizes_stay_within_one() {
        for n in 3..200 {
            let sizes = partition_sizes(n, &[0.6, 0.2, 0.2]);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            for (s, r) in sizes.iter().zip([0.6, 0.2, 0.2]) {
                assert!((*s as f64 - r * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
