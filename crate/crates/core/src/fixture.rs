//! Synthetic POS-tagged Persian sentences drawn from a shipped word list.
//!
//! The sentences are not grammatical; they only need realistic Persian
//! words (with pseudo-spaces, multi-part tokens and punctuation) in a
//! corpus-shaped container so that the whole pipeline can run without any
//! external data.

use crate::corpus::{Corpus, Sentence, Token};
use crate::rng::RngStream;

pub const WORD_LIST: &str = include_str!("../resources/wordlist.tsv");
pub const SOURCE: &str = "synthetic";

/// `(word, pos)` pairs of the shipped list.
pub fn word_list() -> Vec<(&'static str, &'static str)> {
    WORD_LIST
        .lines()
        .filter_map(|line| line.split_once('\t'))
        .collect()
}

/// `count` sentences of 12 to 28 words plus punctuation, about the
/// length of a news sentence.
pub fn synthetic_corpus(count: usize, seed: u64) -> Corpus {
    let words = word_list();
    let content: Vec<_> = words.iter().filter(|(_, pos)| *pos != "PUNC").collect();
    let enders = [".", ".", ".", ".", "؟", "!", ":"];
    let mut rng = RngStream::derive(seed, &[0xf1c7]);
    let sentences = (0..count)
        .map(|i| {
            let id = i as u64 + 1;
            let length = rng.below(12, 29);
            let mut pairs: Vec<(&str, &str)> = Vec::with_capacity(length + 2);
            for k in 0..length {
                let &&(word, pos) = rng.choose(&content).expect("word list is not empty");
                pairs.push((word, pos));
                if k + 1 < length && rng.below(0, 10) == 0 {
                    pairs.push(("،", "PUNC"));
                }
            }
            pairs.push((*rng.choose(&enders).expect("non-empty"), "PUNC"));
            Sentence {
                id,
                tokens: pairs
                    .into_iter()
                    .enumerate()
                    .map(|(r, (word, pos))| Token {
                        row: r as u32 + 1,
                        sentence_id: id,
                        word: word.to_string(),
                        pos: pos.to_string(),
                        source: SOURCE.to_string(),
                    })
                    .collect(),
            }
        })
        .collect();
    Corpus { sentences }
}

/// The 500-sentence corpus used by the end-to-end tests.
pub fn standard_corpus() -> Corpus {
    synthetic_corpus(500, 1)
}
