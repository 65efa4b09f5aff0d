use std::ops::Range;

use super::batch::EncodedSentence;
use super::network::forward_cached;
use super::{
    adam_step, loss_and_gradients, AdamState, Batch, DetectorError, DropoutMask, ModelConfig,
    ModelParams, TaggedSentence, TrainConfig, Vocab,
};
use crate::corpus::LabeledCorpus;
use crate::generator::{ClassRegistry, LabelClass};
use crate::rng::RngStream;

const SHUFFLE_STREAM: u64 = 0x5348;
const DROPOUT_STREAM: u64 = 0xd20b;
const EVAL_BATCH: usize = 256;

/// Losses and accuracies after an epoch, measured without dropout.
/// Epoch 0 is the untrained model.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// Everything needed to tag new text.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub registry: ClassRegistry,
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
}

/// Contiguous windows of at most `max` tokens covering `0..len`.
pub fn windows(len: usize, max: usize) -> Vec<Range<usize>> {
    (0..len)
        .step_by(max.max(1))
        .map(|start| start..(start + max).min(len))
        .collect()
}

fn windowed(corpus: &LabeledCorpus, max: usize) -> Vec<TaggedSentence> {
    let mut out = Vec::new();
    for sentence in &corpus.sentences {
        let words = sentence.misspelt_words();
        let labels = sentence.labels();
        for w in windows(words.len(), max) {
            out.push(TaggedSentence {
                words: words[w.clone()].to_vec(),
                labels: Some(labels[w].to_vec()),
            });
        }
    }
    out
}

fn encode_all(
    sentences: &[TaggedSentence],
    vocab: &Vocab,
    registry: &ClassRegistry,
    config: &ModelConfig,
) -> Result<Vec<EncodedSentence>, DetectorError> {
    sentences
        .iter()
        .map(|s| EncodedSentence::encode(s, vocab, registry, config))
        .collect()
}

/// Mean loss and accuracy over labeled sentences, in inference mode.
fn evaluate_encoded(
    params: &ModelParams,
    config: &ModelConfig,
    data: &[EncodedSentence],
) -> Result<(f64, f64), DetectorError> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    for chunk in data.chunks(EVAL_BATCH) {
        let refs: Vec<&EncodedSentence> = chunk.iter().collect();
        let batch = Batch::from_encoded(&refs, config);
        let cache = forward_cached(params, &batch, None)?;
        for (b, s) in chunk.iter().enumerate() {
            for (t, &y) in s.labels.iter().enumerate() {
                let probs = cache.token_probs(b, t).expect("real token");
                loss -= probs[y].ln();
                correct += usize::from(cache.argmax(b, t) == Some(y));
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(DetectorError::ZeroMask);
    }
    Ok((loss / total as f64, correct as f64 / total as f64))
}

/// Public form of the evaluation used for the training history.
pub fn evaluate_batches(
    model: &TrainedModel,
    corpus: &LabeledCorpus,
) -> Result<(f64, f64), DetectorError> {
    let data = encode_all(
        &windowed(corpus, model.config.max_seq_len),
        &model.vocab,
        &model.registry,
        &model.config,
    )?;
    evaluate_encoded(&model.params, &model.config, &data)
}

/// Fit a tagger on `train`, tracking `val` (which may be empty).
pub fn train(
    train: &LabeledCorpus,
    val: &LabeledCorpus,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    registry: &ClassRegistry,
) -> Result<TrainedModel, DetectorError> {
    if !registry.is_frozen() {
        return Err(DetectorError::InvalidConfig("class registry must be frozen".into()));
    }
    let mut config = model_config.clone();
    config.num_classes = registry.len();
    config.validate()?;
    train_config.validate()?;

    let train_sentences = windowed(train, config.max_seq_len);
    if train_sentences.is_empty() {
        return Err(DetectorError::EmptyCorpus);
    }
    let words: Vec<Vec<String>> = train_sentences.iter().map(|s| s.words.clone()).collect();
    let vocab = Vocab::build(&words, &config)?;
    let train_data = encode_all(&train_sentences, &vocab, registry, &config)?;
    let val_data = encode_all(&windowed(val, config.max_seq_len), &vocab, registry, &config)?;

    let seed = train_config.seed;
    let mut params = ModelParams::init(&config, &vocab, seed);
    let mut state = AdamState::new(&params);
    let mut history = Vec::with_capacity(train_config.epochs + 1);
    let record = |epoch: usize, params: &ModelParams| -> Result<EpochRecord, DetectorError> {
        let (train_loss, train_accuracy) = evaluate_encoded(params, &config, &train_data)?;
        let (val_loss, val_accuracy) = if val_data.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate_encoded(params, &config, &val_data)?;
            (Some(l), Some(a))
        };
        Ok(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        })
    };
    history.push(record(0, &params)?);

    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 1..=train_config.epochs {
        order.sort_unstable();
        RngStream::derive(seed, &[SHUFFLE_STREAM, epoch as u64]).shuffle(&mut order);
        for (bi, chunk) in order.chunks(train_config.batch_size).enumerate() {
            let refs: Vec<&EncodedSentence> = chunk.iter().map(|&i| &train_data[i]).collect();
            let batch = Batch::from_encoded(&refs, &config);
            let mask = (config.dropout_rate > 0.0).then(|| {
                let mut rng = RngStream::derive(seed, &[DROPOUT_STREAM, epoch as u64, bi as u64]);
                DropoutMask::sample(refs.len(), config.input_dim(), config.dropout_rate, &mut rng)
            });
            let (_, grads) = loss_and_gradients(&params, &batch, mask.as_ref())?;
            adam_step(&mut params, &grads, &mut state, train_config);
        }
        let rec = record(epoch, &params)?;
        let done = train_config
            .target_accuracy
            .is_some_and(|target| rec.train_accuracy >= target);
        history.push(rec);
        if done {
            break;
        }
    }

    Ok(TrainedModel {
        config,
        vocab,
        registry: registry.clone(),
        params,
        history,
    })
}

/// Per-token class indices for each sentence; long sentences are tagged
/// window by window.
pub(crate) fn predict_indices(
    params: &ModelParams,
    sentences: &[Vec<String>],
    vocab: &Vocab,
    registry: &ClassRegistry,
    config: &ModelConfig,
) -> Result<Vec<Vec<usize>>, DetectorError> {
    let mut pieces = Vec::new();
    let mut owner = Vec::new();
    for (i, words) in sentences.iter().enumerate() {
        for w in windows(words.len(), config.max_seq_len) {
            pieces.push(EncodedSentence::encode(
                &TaggedSentence::unlabeled(words[w].to_vec()),
                vocab,
                registry,
                config,
            )?);
            owner.push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = sentences.iter().map(|s| Vec::with_capacity(s.len())).collect();
    for (chunk, owners) in pieces.chunks(EVAL_BATCH).zip(owner.chunks(EVAL_BATCH)) {
        let refs: Vec<&EncodedSentence> = chunk.iter().collect();
        let batch = Batch::from_encoded(&refs, config);
        let cache = forward_cached(params, &batch, None)?;
        for (b, (s, &i)) in chunk.iter().zip(owners).enumerate() {
            for t in 0..s.words.len() {
                out[i].push(cache.argmax(b, t).expect("real token"));
            }
        }
    }
    Ok(out)
}

/// Most likely class for every token of one sentence.
pub fn predict(
    params: &ModelParams,
    sentence: &[String],
    vocab: &Vocab,
    registry: &ClassRegistry,
    config: &ModelConfig,
) -> Result<Vec<LabelClass>, DetectorError> {
    let indices = predict_indices(params, &[sentence.to_vec()], vocab, registry, config)?;
    Ok(indices[0]
        .iter()
        .map(|&k| registry.class(k).cloned().unwrap_or(LabelClass::NotApplicable))
        .collect())
}

impl TrainedModel {
    pub fn predict(&self, sentence: &[String]) -> Result<Vec<LabelClass>, DetectorError> {
        predict(&self.params, sentence, &self.vocab, &self.registry, &self.config)
    }

    /// Class indices into `self.registry`, one vector per sentence.
    pub fn predict_indices(&self, sentences: &[Vec<String>]) -> Result<Vec<Vec<usize>>, DetectorError> {
        predict_indices(&self.params, sentences, &self.vocab, &self.registry, &self.config)
    }

    /// History as TSV with a header row. Missing validation values are empty.
    pub fn history_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tval_loss\ttrain_acc\tval_acc\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.history {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                r.train_accuracy,
                opt(r.val_accuracy)
            ));
        }
        out
    }
}
