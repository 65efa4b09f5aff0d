use ndarray::{Array2, Array3};

use super::{DetectorError, ModelConfig, Vocab, PAD};
use crate::generator::{ClassRegistry, LabelClass};

/// Label stored at padded positions.
pub const IGNORE_LABEL: usize = usize::MAX;

/// A sentence of surface words, optionally with gold classes.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSentence {
    pub words: Vec<String>,
    pub labels: Option<Vec<LabelClass>>,
}

impl TaggedSentence {
    pub fn unlabeled(words: Vec<String>) -> Self {
        Self { words, labels: None }
    }
}

/// Index form of one sentence (already cut to the window length).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EncodedSentence {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
}

impl EncodedSentence {
    pub fn encode(
        sentence: &TaggedSentence,
        vocab: &Vocab,
        registry: &ClassRegistry,
        config: &ModelConfig,
    ) -> Result<Self, DetectorError> {
        let n = sentence.words.len().min(config.max_seq_len);
        let words = &sentence.words[..n];
        let labels = match &sentence.labels {
            Some(labels) => {
                if labels.len() != sentence.words.len() {
                    return Err(DetectorError::Shape(format!(
                        "{} words but {} labels",
                        sentence.words.len(),
                        labels.len()
                    )));
                }
                labels[..n]
                    .iter()
                    .map(|c| {
                        registry
                            .index_of(c)
                            .map_err(|_| DetectorError::UnknownLabel(c.to_string()))
                    })
                    .collect::<Result<_, _>>()?
            }
            None => vec![IGNORE_LABEL; n],
        };
        Ok(Self {
            words: words.iter().map(|w| vocab.word_id(w)).collect(),
            chars: words
                .iter()
                .map(|w| {
                    w.chars()
                        .take(config.max_word_chars)
                        .map(|c| vocab.char_id(c))
                        .collect()
                })
                .collect(),
            labels,
        })
    }
}

/// Padded index tensors for `B` sentences of up to `T` tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// B×T word indices.
    pub words: Array2<usize>,
    /// B×T×C character indices.
    pub chars: Array3<usize>,
    /// B×T class indices, [`IGNORE_LABEL`] where masked or unlabeled.
    pub labels: Array2<usize>,
    /// B×T, true at real tokens. Always a prefix of each row.
    pub mask: Array2<bool>,
    pub lengths: Vec<usize>,
}

impl Batch {
    pub(crate) fn from_encoded(sentences: &[&EncodedSentence], config: &ModelConfig) -> Self {
        let b = sentences.len();
        let t = config.max_seq_len;
        let c = config.max_word_chars;
        let mut words = Array2::from_elem((b, t), PAD);
        let mut chars = Array3::from_elem((b, t, c), PAD);
        let mut labels = Array2::from_elem((b, t), IGNORE_LABEL);
        let mut mask = Array2::from_elem((b, t), false);
        let mut lengths = Vec::with_capacity(b);
        for (i, s) in sentences.iter().enumerate() {
            let n = s.words.len().min(t);
            lengths.push(n);
            for j in 0..n {
                words[[i, j]] = s.words[j];
                labels[[i, j]] = s.labels[j];
                mask[[i, j]] = true;
                for (k, &ch) in s.chars[j].iter().take(c).enumerate() {
                    chars[[i, j, k]] = ch;
                }
            }
        }
        Self {
            words,
            chars,
            labels,
            mask,
            lengths,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.words.nrows()
    }

    pub fn seq_len(&self) -> usize {
        self.words.ncols()
    }

    pub fn token_count(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Longest real row; positions at or beyond it are padding everywhere.
    pub fn active_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }
}

/// Truncate, pad and index a set of sentences.
pub fn encode_batch(
    sentences: &[TaggedSentence],
    vocab: &Vocab,
    registry: &ClassRegistry,
    config: &ModelConfig,
) -> Result<Batch, DetectorError> {
    let encoded = sentences
        .iter()
        .map(|s| EncodedSentence::encode(s, vocab, registry, config))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&EncodedSentence> = encoded.iter().collect();
    Ok(Batch::from_encoded(&refs, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::UNK;

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| if i % 2 == 0 { "کتاب" } else { "خوب" }.to_string()).collect()
    }

    fn setup() -> (Vocab, ClassRegistry, ModelConfig) {
        let config = ModelConfig {
            min_word_count: 1,
            ..ModelConfig::default()
        };
        let vocab = Vocab::build(&[words(2)], &config).unwrap();
        (vocab, ClassRegistry::from_classes([]), config)
    }

    #[test]
    fn short_sentence_mask() {
        let (v, r, c) = setup();
        let b = encode_batch(&[TaggedSentence::unlabeled(words(3))], &v, &r, &c).unwrap();
        assert_eq!(b.words.dim(), (1, 30));
        assert_eq!(b.mask.iter().filter(|m| **m).count(), 3);
    }

    #[test]
    fn long_sentence_truncated() {
        let (v, r, c) = setup();
        let b = encode_batch(&[TaggedSentence::unlabeled(words(40))], &v, &r, &c).unwrap();
        assert!(b.mask.iter().all(|m| *m));
        assert_eq!(b.lengths, vec![30]);
    }

    #[test]
    fn oov_word_keeps_its_characters() {
        let (v, r, c) = setup();
        let b = encode_batch(&[TaggedSentence::unlabeled(vec!["خب".into()])], &v, &r, &c).unwrap();
        assert_eq!(b.words[[0, 0]], UNK);
        assert_eq!(b.chars[[0, 0, 0]], v.char_id('خ'));
        assert_eq!(b.chars[[0, 0, 1]], v.char_id('ب'));
        assert_ne!(b.chars[[0, 0, 0]], UNK);
        assert_eq!(b.chars[[0, 0, 2]], PAD);
    }

    #[test]
    fn unknown_label_rejected() {
        let (v, r, c) = setup();
        let s = TaggedSentence {
            words: vec!["کتاب".into()],
            labels: Some(vec!["deletion".parse().unwrap()]),
        };
        assert!(matches!(
            encode_batch(&[s], &v, &r, &c),
            Err(DetectorError::UnknownLabel(_))
        ));
    }
}
