use std::collections::HashMap;

use super::{DetectorError, ModelConfig};

pub const PAD: usize = 0;
pub const UNK: usize = 1;

const PAD_NAME: &str = "<pad>";
const UNK_NAME: &str = "<unk>";

/// Word and character index maps. Index 0 is padding, 1 is unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    word_index: HashMap<String, usize>,
    chars: Vec<char>,
    char_index: HashMap<char, usize>,
}

/// Items by descending count, ties in code-point order.
fn ranked<K: Ord + Clone>(counts: HashMap<K, usize>, min_count: usize, cap: usize) -> Vec<K> {
    let mut items: Vec<(K, usize)> = counts.into_iter().filter(|(_, n)| *n >= min_count).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.into_iter().take(cap).map(|(k, _)| k).collect()
}

impl Vocab {
    /// Build from training sentences (lists of surface words).
    pub fn build<S: AsRef<str>>(
        sentences: &[Vec<S>],
        config: &ModelConfig,
    ) -> Result<Self, DetectorError> {
        let mut word_counts: HashMap<String, usize> = HashMap::new();
        let mut char_counts: HashMap<char, usize> = HashMap::new();
        let mut any = false;
        for sentence in sentences {
            for word in sentence {
                let word = word.as_ref();
                any = true;
                *word_counts.entry(word.to_string()).or_default() += 1;
                for c in word.chars() {
                    *char_counts.entry(c).or_default() += 1;
                }
            }
        }
        if !any {
            return Err(DetectorError::EmptyCorpus);
        }
        let words = ranked(word_counts, config.min_word_count, config.max_word_vocab.saturating_sub(2));
        let chars = ranked(char_counts, 1, config.max_char_vocab.saturating_sub(2));
        Ok(Self::from_parts(words, chars))
    }

    /// Entries beyond the two reserved ones, in index order.
    pub fn from_parts(words: Vec<String>, chars: Vec<char>) -> Self {
        let mut all_words = vec![PAD_NAME.to_string(), UNK_NAME.to_string()];
        all_words.extend(words);
        let word_index = all_words
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let mut all_chars = vec!['\0', '\u{1}'];
        all_chars.extend(chars);
        let char_index = all_chars
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, &c)| (c, i))
            .collect();
        Self {
            words: all_words,
            word_index,
            chars: all_chars,
            char_index,
        }
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn char_count(&self) -> usize {
        self.chars.len()
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.word_index.get(word).copied().unwrap_or(UNK)
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_index.get(&c).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn contains_char(&self, c: char) -> bool {
        self.char_index.contains_key(&c)
    }

    /// Non-reserved words in index order.
    pub fn words(&self) -> &[String] {
        &self.words[2..]
    }

    pub fn chars(&self) -> &[char] {
        &self.chars[2..]
    }
}
