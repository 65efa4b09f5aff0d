//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fatypo::detector::{
    encode_batch, loss_and_gradients, Batch, ModelConfig, ModelParams, TaggedSentence, TrainConfig,
    Vocab,
};
use fatypo::persian_text::{KeyboardLayout, ZWNJ};
use fatypo::{ClassRegistry, ErrorTag, LabelClass, Resources, RngStream};

pub const SPACE: char = ' ';

/// Adjacency recomputed from the raw rows and offsets:
/// two keys touch when their rows differ by at most one and their
/// staggered columns by at most one key width.
pub fn adjacency(layout: &KeyboardLayout) -> BTreeMap<char, BTreeSet<char>> {
    let mut keys = Vec::new();
    for (r, row) in layout.rows().iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            keys.push((ch, r as f64, c as f64 + layout.offsets()[r] / 2.0));
        }
    }
    let mut out: BTreeMap<char, BTreeSet<char>> = BTreeMap::new();
    for &(a, ra, xa) in &keys {
        let entry = out.entry(a).or_default();
        for &(b, rb, xb) in &keys {
            if a != b && (ra - rb).abs() <= 1.0 && (xa - xb).abs() <= 1.0 {
                entry.insert(b);
            }
        }
    }
    out
}

fn replace_at(chars: &[char], i: usize, c: char) -> String {
    let mut v = chars.to_vec();
    v[i] = c;
    v.into_iter().collect()
}

fn insert_at(chars: &[char], i: usize, c: char) -> String {
    let mut v = chars.to_vec();
    v.insert(i, c);
    v.into_iter().collect()
}

fn remove_at(chars: &[char], i: usize) -> String {
    let mut v = chars.to_vec();
    v.remove(i);
    v.into_iter().collect()
}

fn group_of(groups: &[Vec<char>], c: char) -> Vec<char> {
    groups
        .iter()
        .filter(|g| g.contains(&c))
        .flat_map(|g| g.iter().copied().filter(|&x| x != c))
        .collect()
}

fn find_all(chars: &[char], needle: &[char]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > chars.len() {
        return Vec::new();
    }
    (0..=chars.len() - needle.len())
        .filter(|&i| chars[i..i + needle.len()] == *needle)
        .collect()
}

/// Every string a single legal application of `tag` can produce.
pub fn legal_outputs(tag: ErrorTag, word: &str, res: &Resources) -> BTreeSet<String> {
    let w: Vec<char> = word.chars().collect();
    let n = w.len();
    let adj = adjacency(&res.layout);
    let near = |c: char| adj.get(&c).cloned().unwrap_or_default();
    let mut out = BTreeSet::new();
    match tag {
        ErrorTag::Insertion => {
            for p in 0..=n {
                if n == 0 {
                    break;
                }
                let anchor = if p == 0 { w[0] } else { w[p - 1] };
                for c in near(anchor) {
                    let left_ok = p == 0 || w[p - 1] != c;
                    let right_ok = p == n || w[p] != c;
                    if left_ok && right_ok {
                        out.insert(insert_at(&w, p, c));
                    }
                }
            }
        }
        ErrorTag::Deletion => {
            for p in 0..n {
                out.insert(remove_at(&w, p));
            }
        }
        ErrorTag::Substitution => {
            for p in 0..n {
                for c in near(w[p]) {
                    out.insert(replace_at(&w, p, c));
                }
            }
        }
        ErrorTag::Transposition => {
            for p in 0..n.saturating_sub(1) {
                if w[p] != w[p + 1] {
                    let mut v = w.clone();
                    v.swap(p, p + 1);
                    out.insert(v.into_iter().collect());
                }
            }
        }
        ErrorTag::SoundSimilarity | ErrorTag::ShapeSimilarity => {
            let groups = if tag == ErrorTag::SoundSimilarity {
                &res.tables.sound_groups
            } else {
                &res.tables.shape_groups
            };
            for p in 0..n {
                for c in group_of(groups, w[p]) {
                    out.insert(replace_at(&w, p, c));
                }
            }
        }
        ErrorTag::Repetition => {
            for p in 0..n {
                for k in 1..=2 {
                    let mut v = w.clone();
                    for _ in 0..k {
                        v.insert(p, w[p]);
                    }
                    out.insert(v.into_iter().collect());
                }
            }
        }
        ErrorTag::SpacePseudoToWhite
        | ErrorTag::SpacePseudoToEmpty
        | ErrorTag::SpaceWhiteToPseudo
        | ErrorTag::SpaceWhiteToEmpty => {
            let (from, to) = match tag {
                ErrorTag::SpacePseudoToWhite => (ZWNJ, Some(SPACE)),
                ErrorTag::SpacePseudoToEmpty => (ZWNJ, None),
                ErrorTag::SpaceWhiteToPseudo => (SPACE, Some(ZWNJ)),
                _ => (SPACE, None),
            };
            for p in 0..n {
                if w[p] == from {
                    out.insert(match to {
                        Some(c) => replace_at(&w, p, c),
                        None => remove_at(&w, p),
                    });
                }
            }
        }
        ErrorTag::SpaceEmptyToPseudo | ErrorTag::SpaceEmptyToWhite => {
            let sep = if tag == ErrorTag::SpaceEmptyToPseudo { ZWNJ } else { SPACE };
            for p in 1..n {
                if w[p - 1].is_alphabetic() && w[p].is_alphabetic() {
                    out.insert(insert_at(&w, p, sep));
                }
            }
        }
        ErrorTag::FaToAr => {
            for p in 0..n {
                if let Some(&ar) = res.tables.fa_to_ar.get(&w[p]) {
                    out.insert(replace_at(&w, p, ar));
                }
            }
        }
        ErrorTag::SilentLetter => {
            for pattern in &res.tables.silent_patterns {
                let trigger: Vec<char> = pattern.trigger.chars().collect();
                for start in find_all(&w, &trigger) {
                    out.insert(remove_at(&w, start + pattern.index));
                }
            }
        }
        ErrorTag::CommonConfusion => {
            for (from, to) in &res.tables.common_confusions {
                let f: Vec<char> = from.chars().collect();
                for start in find_all(&w, &f) {
                    let mut s: String = w[..start].iter().collect();
                    s.push_str(to);
                    s.extend(&w[start + f.len()..]);
                    out.insert(s);
                }
            }
        }
    }
    out
}

/// Allowed character-count changes for one application.
pub fn allowed_deltas(tag: ErrorTag, res: &Resources) -> BTreeSet<i64> {
    match tag {
        ErrorTag::Insertion | ErrorTag::SpaceEmptyToPseudo | ErrorTag::SpaceEmptyToWhite => [1].into(),
        ErrorTag::Deletion
        | ErrorTag::SilentLetter
        | ErrorTag::SpaceWhiteToEmpty
        | ErrorTag::SpacePseudoToEmpty => [-1].into(),
        ErrorTag::Repetition => [1, 2].into(),
        ErrorTag::CommonConfusion => res
            .tables
            .common_confusions
            .iter()
            .map(|(f, t)| t.chars().count() as i64 - f.chars().count() as i64)
            .collect(),
        _ => [0].into(),
    }
}

/// Words for module checks: the shipped list plus spacing-heavy and
/// pattern-bearing extras.
pub fn module_words() -> Vec<String> {
    let mut words: BTreeSet<String> = fatypo::fixture::word_list()
        .into_iter()
        .map(|(w, _)| w.to_string())
        .collect();
    for extra in [
        "بی\u{200c}حوصله",
        "کتاب خواندن",
        "قانونگذار",
        "سلام؟",
        "خواننده",
        "اا",
        "!!",
        "ء",
        "123",
        "ب",
    ] {
        words.insert(extra.to_string());
    }
    words.into_iter().collect()
}

/// Small network used by gradient and symmetry checks.
pub fn tiny_model_config(num_classes: usize) -> ModelConfig {
    ModelConfig {
        max_seq_len: 8,
        max_word_chars: 6,
        word_emb_dim: 3,
        char_emb_dim: 4,
        lstm_hidden: 3,
        lstm_layers: 2,
        dropout_rate: 0.0,
        num_classes,
        min_word_count: 1,
        ..ModelConfig::default()
    }
}

pub fn fast_train_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        learning_rate: 1e-2,
        seed,
        ..TrainConfig::default()
    }
}

/// Two labeled sentences of different lengths, both shorter than the
/// tiny model's window, so the batch carries padding.
pub fn two_sentence_batch() -> (ModelConfig, Vocab, ClassRegistry, Batch) {
    let classes: Vec<LabelClass> = ["N/A", "deletion", "insertion", "deletion, substitution"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let registry = ClassRegistry::from_classes(classes.clone());
    let config = tiny_model_config(registry.len());
    let first = ["کتاب", "خوب", "می\u{200c}روم", "ناشناخته", "خانه", "."];
    let second = ["من", "کتب", "خانه", "!"];
    let sentences = [
        TaggedSentence {
            words: first.iter().map(|s| s.to_string()).collect(),
            labels: Some(vec![
                classes[0].clone(),
                classes[1].clone(),
                classes[0].clone(),
                classes[3].clone(),
                classes[2].clone(),
                classes[0].clone(),
            ]),
        },
        TaggedSentence {
            words: second.iter().map(|s| s.to_string()).collect(),
            labels: Some(vec![
                classes[2].clone(),
                classes[1].clone(),
                classes[0].clone(),
                classes[0].clone(),
            ]),
        },
    ];
    let vocab_source = vec![
        vec!["کتاب", "خوب", "می\u{200c}روم", "خانه", ".", "من", "!"],
        vec!["کتاب", "خانه", "من", "ز"],
    ];
    let vocab = Vocab::build(&vocab_source, &config).unwrap();
    let batch = encode_batch(&sentences, &vocab, &registry, &config).unwrap();
    (config, vocab, registry, batch)
}

/// Parameters with every tensor, biases included, drawn away from zero.
pub fn random_params(config: &ModelConfig, vocab: &Vocab, seed: u64) -> ModelParams {
    let mut params = ModelParams::init(config, vocab, seed);
    let mut rng = RngStream::new(seed ^ 0xabc);
    for (_, mut t) in params.tensors_mut() {
        t.mapv_inplace(|v| v + rng.uniform(-0.3, 0.3));
    }
    params
}

pub struct GradCheck {
    pub max_relative_error: f64,
    pub coordinates: usize,
    pub tensors: BTreeSet<String>,
}

/// Central differences against the analytic gradient on a sample of
/// coordinates from every tensor. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(params: &ModelParams, batch: &Batch, per_tensor: usize, seed: u64) -> GradCheck {
    let h = 1e-5;
    let (_, grads) = loss_and_gradients(params, batch, None).unwrap();
    let grad_tensors = grads.tensors();
    let mut rng = RngStream::new(seed);
    let mut out = GradCheck {
        max_relative_error: 0.0,
        coordinates: 0,
        tensors: BTreeSet::new(),
    };
    for (i, (name, g)) in grad_tensors.iter().enumerate() {
        let flat: Vec<f64> = g.iter().copied().collect();
        let mut pool: Vec<usize> = (0..flat.len()).filter(|&k| flat[k] != 0.0).collect();
        if pool.is_empty() {
            pool = (0..flat.len()).collect();
        }
        rng.shuffle(&mut pool);
        for &k in pool.iter().take(per_tensor) {
            let loss_at = |delta: f64| {
                let mut p = params.clone();
                let mut tensors = p.tensors_mut();
                *tensors[i].1.iter_mut().nth(k).unwrap() += delta;
                drop(tensors);
                loss_and_gradients(&p, batch, None).unwrap().0
            };
            let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let analytic = flat[k];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic - numeric).abs() / denom;
            out.max_relative_error = out.max_relative_error.max(rel);
            out.coordinates += 1;
        }
        out.tensors.insert(name.clone());
    }
    out
}

/// The batch with every sentence's tokens in reverse order.
pub fn reversed_batch(batch: &Batch) -> Batch {
    let mut out = batch.clone();
    for (b, &len) in batch.lengths.iter().enumerate() {
        for t in 0..len {
            let src = len - 1 - t;
            out.words[[b, t]] = batch.words[[b, src]];
            out.labels[[b, t]] = batch.labels[[b, src]];
            for c in 0..batch.chars.dim().2 {
                out.chars[[b, t, c]] = batch.chars[[b, src, c]];
            }
        }
    }
    out
}

/// Overwrite indices and labels at every padded position.
pub fn scramble_padding(batch: &Batch, vocab: &Vocab, classes: usize, seed: u64) -> Batch {
    let mut out = batch.clone();
    let mut rng = RngStream::new(seed);
    let (bs, t, c) = batch.chars.dim();
    for b in 0..bs {
        for i in 0..t {
            if batch.mask[[b, i]] {
                continue;
            }
            out.words[[b, i]] = rng.below(0, vocab.word_count());
            out.labels[[b, i]] = rng.below(0, classes);
            for k in 0..c {
                out.chars[[b, i, k]] = rng.below(0, vocab.char_count());
            }
        }
    }
    out
}
