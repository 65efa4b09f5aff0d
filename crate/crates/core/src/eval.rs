//! Token-level metrics for error-type tagging and for binary error
//! detection, plus timing.
//!
//! Zero-denominator conventions: per-class precision and recall are 0 when
//! their denominator is 0 (and such classes never enter the macro mean
//! unless they have gold support). Binary precision and recall are 1.0 when
//! their denominator is 0, with a flag set so that reports can mark them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::generator::ClassRegistry;

/// Smallest interval the timing report distinguishes, in seconds.
pub const CLOCK_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {gold} gold, {predicted} predicted, {mask} mask entries")]
    LengthMismatch {
        gold: usize,
        predicted: usize,
        mask: usize,
    },
    #[error("no token is selected by the mask")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Gold tokens of this class.
    pub support: usize,
    /// Tokens predicted as this class.
    pub predicted: usize,
    pub true_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MulticlassMetrics {
    pub evaluated: usize,
    pub correct: usize,
    pub token_accuracy: f64,
    pub per_class: BTreeMap<usize, ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryMetrics {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub train_seconds: f64,
    pub inference_seconds: f64,
    pub tokens: usize,
    pub per_token_seconds: f64,
    /// The inference clock read 0; `per_token_seconds` is an upper bound.
    pub below_resolution: bool,
}

fn check_lengths(gold: &[usize], predicted: &[usize], mask: &[bool]) -> Result<(), EvalError> {
    if gold.len() != predicted.len() || gold.len() != mask.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
            mask: mask.len(),
        });
    }
    Ok(())
}

fn ratio_or(num: usize, den: usize, fallback: f64) -> f64 {
    if den == 0 {
        fallback
    } else {
        num as f64 / den as f64
    }
}

pub fn multiclass_metrics(
    gold: &[usize],
    predicted: &[usize],
    mask: &[bool],
) -> Result<MulticlassMetrics, EvalError> {
    check_lengths(gold, predicted, mask)?;
    let mut per_class: BTreeMap<usize, ClassMetrics> = BTreeMap::new();
    let blank = || ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        support: 0,
        predicted: 0,
        true_positive: 0,
    };
    let mut evaluated = 0;
    let mut correct = 0;
    for ((&g, &p), &m) in gold.iter().zip(predicted).zip(mask) {
        if !m {
            continue;
        }
        evaluated += 1;
        per_class.entry(g).or_insert_with(blank).support += 1;
        per_class.entry(p).or_insert_with(blank).predicted += 1;
        if g == p {
            correct += 1;
            per_class.get_mut(&g).expect("inserted above").true_positive += 1;
        }
    }
    if evaluated == 0 {
        return Err(EvalError::Empty);
    }
    let mut macro_p = 0.0;
    let mut macro_r = 0.0;
    let mut supported = 0;
    for class in per_class.values_mut() {
        class.precision = ratio_or(class.true_positive, class.predicted, 0.0);
        class.recall = ratio_or(class.true_positive, class.support, 0.0);
        if class.support > 0 {
            macro_p += class.precision;
            macro_r += class.recall;
            supported += 1;
        }
    }
    let accuracy = correct as f64 / evaluated as f64;
    Ok(MulticlassMetrics {
        evaluated,
        correct,
        token_accuracy: accuracy,
        macro_precision: macro_p / supported as f64,
        macro_recall: macro_r / supported as f64,
        // One prediction per token: pooled TP/(TP+FP) and TP/(TP+FN) are both
        // correct/evaluated.
        micro_precision: accuracy,
        micro_recall: accuracy,
        per_class,
    })
}

/// Error (anything but `na_index`) versus no error.
pub fn binary_detection_metrics(
    gold: &[usize],
    predicted: &[usize],
    mask: &[bool],
    na_index: usize,
) -> Result<BinaryMetrics, EvalError> {
    check_lengths(gold, predicted, mask)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for ((&g, &p), &m) in gold.iter().zip(predicted).zip(mask) {
        if !m {
            continue;
        }
        match (g != na_index, p != na_index) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(BinaryMetrics {
        true_positive: tp,
        false_positive: fp,
        false_negative: fn_,
        true_negative: tn,
        accuracy: (tp + tn) as f64 / total as f64,
        precision: ratio_or(tp, tp + fp, 1.0),
        recall: ratio_or(tp, tp + fn_, 1.0),
        precision_degenerate: tp + fp == 0,
        recall_degenerate: tp + fn_ == 0,
    })
}

pub fn timing_report(train: Duration, tokens: usize, inference: Duration) -> Timings {
    let tokens_f = tokens.max(1) as f64;
    let inference_seconds = inference.as_secs_f64();
    let below_resolution = inference.is_zero();
    let per_token_seconds = if below_resolution {
        CLOCK_RESOLUTION / tokens_f
    } else {
        inference_seconds / tokens_f
    };
    Timings {
        train_seconds: train.as_secs_f64(),
        inference_seconds,
        tokens,
        per_token_seconds,
        below_resolution,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub multiclass: MulticlassMetrics,
    /// Exact-class accuracy over tokens whose gold label is an error.
    pub error_token_accuracy: Option<f64>,
    pub binary: BinaryMetrics,
    pub timings: Option<Timings>,
    pub class_names: Vec<String>,
}

impl MetricsReport {
    pub fn evaluate(
        gold: &[usize],
        predicted: &[usize],
        mask: &[bool],
        registry: &ClassRegistry,
    ) -> Result<Self, EvalError> {
        let multiclass = multiclass_metrics(gold, predicted, mask)?;
        let binary = binary_detection_metrics(gold, predicted, mask, ClassRegistry::NA_INDEX)?;
        let (mut hit, mut errors) = (0usize, 0usize);
        for ((&g, &p), &m) in gold.iter().zip(predicted).zip(mask) {
            if m && g != ClassRegistry::NA_INDEX {
                errors += 1;
                hit += usize::from(g == p);
            }
        }
        Ok(Self {
            multiclass,
            error_token_accuracy: (errors > 0).then(|| hit as f64 / errors as f64),
            binary,
            timings: None,
            class_names: registry.classes().iter().map(|c| c.to_string()).collect(),
        })
    }

    fn class_name(&self, index: usize) -> String {
        self.class_names
            .get(index)
            .cloned()
            .unwrap_or_else(|| format!("#{index}"))
    }

    fn entries(&self) -> Vec<(String, String)> {
        let m = &self.multiclass;
        let b = &self.binary;
        let flag = |v: f64, degenerate: bool| {
            if degenerate {
                format!("{v:.6} (no positives)")
            } else {
                format!("{v:.6}")
            }
        };
        let mut rows = vec![
            ("tokens".to_string(), m.evaluated.to_string()),
            ("token_accuracy".into(), format!("{:.6}", m.token_accuracy)),
            (
                "error_token_accuracy".into(),
                self.error_token_accuracy
                    .map_or("n/a".to_string(), |v| format!("{v:.6}")),
            ),
            ("macro_precision".into(), format!("{:.6}", m.macro_precision)),
            ("macro_recall".into(), format!("{:.6}", m.macro_recall)),
            ("micro_precision".into(), format!("{:.6}", m.micro_precision)),
            ("micro_recall".into(), format!("{:.6}", m.micro_recall)),
            ("binary_accuracy".into(), format!("{:.6}", b.accuracy)),
            ("binary_precision".into(), flag(b.precision, b.precision_degenerate)),
            ("binary_recall".into(), flag(b.recall, b.recall_degenerate)),
            (
                "binary_counts".into(),
                format!(
                    "tp={} fp={} fn={} tn={}",
                    b.true_positive, b.false_positive, b.false_negative, b.true_negative
                ),
            ),
        ];
        if let Some(t) = &self.timings {
            rows.push(("train_seconds".into(), format!("{:.3}", t.train_seconds)));
            rows.push(("inference_seconds".into(), format!("{:.6}", t.inference_seconds)));
            let per_token = t.per_token_seconds * 1e6;
            rows.push((
                "per_token_microseconds".into(),
                if t.below_resolution {
                    format!("< {per_token:.6}")
                } else {
                    format!("{per_token:.6}")
                },
            ));
        }
        for (&class, c) in &m.per_class {
            rows.push((
                format!("class[{}]", self.class_name(class)),
                format!(
                    "precision={:.6} recall={:.6} support={}",
                    c.precision, c.recall, c.support
                ),
            ));
        }
        rows
    }

    /// Aligned `key: value` lines.
    pub fn to_text(&self) -> String {
        let rows = self.entries();
        let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (key, value) in rows {
            let pad = width - key.chars().count();
            let _ = writeln!(out, "{key}:{} {value}", " ".repeat(pad));
        }
        out
    }

    /// `metric<TAB>class<TAB>value` rows for machine consumption.
    pub fn to_tsv(&self) -> String {
        let m = &self.multiclass;
        let b = &self.binary;
        let mut out = String::from("metric\tclass\tvalue\n");
        let mut row = |metric: &str, class: &str, value: String| {
            let _ = writeln!(out, "{metric}\t{class}\t{value}");
        };
        row("tokens", "", m.evaluated.to_string());
        row("token_accuracy", "", m.token_accuracy.to_string());
        if let Some(v) = self.error_token_accuracy {
            row("error_token_accuracy", "", v.to_string());
        }
        row("macro_precision", "", m.macro_precision.to_string());
        row("macro_recall", "", m.macro_recall.to_string());
        row("micro_precision", "", m.micro_precision.to_string());
        row("micro_recall", "", m.micro_recall.to_string());
        row("binary_accuracy", "", b.accuracy.to_string());
        row("binary_precision", "", b.precision.to_string());
        row("binary_recall", "", b.recall.to_string());
        row("binary_precision_degenerate", "", b.precision_degenerate.to_string());
        row("binary_recall_degenerate", "", b.recall_degenerate.to_string());
        if let Some(t) = &self.timings {
            row("train_seconds", "", t.train_seconds.to_string());
            row("inference_seconds", "", t.inference_seconds.to_string());
            row("per_token_seconds", "", t.per_token_seconds.to_string());
            row("below_resolution", "", t.below_resolution.to_string());
        }
        for (&class, c) in &m.per_class {
            let name = self.class_name(class);
            row("precision", &name, c.precision.to_string());
            row("recall", &name, c.recall.to_string());
            row("support", &name, c.support.to_string());
        }
        out
    }
}
