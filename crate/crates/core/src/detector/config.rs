use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::DetectorError;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Tokens per sentence window.
    pub max_seq_len: usize,
    /// Characters kept per word.
    pub max_word_chars: usize,
    pub word_emb_dim: usize,
    pub char_emb_dim: usize,
    /// Hidden units per direction.
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
    /// Word vocabulary cap, reserved entries included.
    pub max_word_vocab: usize,
    pub max_char_vocab: usize,
    /// Training words seen fewer times than this map to UNK.
    pub min_word_count: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            max_seq_len: 30,
            max_word_chars: 16,
            word_emb_dim: 64,
            char_emb_dim: 32,
            lstm_hidden: 128,
            lstm_layers: 2,
            dropout_rate: 0.3,
            num_classes: 1,
            max_word_vocab: 50_000,
            max_char_vocab: 500,
            min_word_count: 2,
        }
    }
}

fn invalid(msg: impl Into<String>) -> DetectorError {
    DetectorError::InvalidConfig(msg.into())
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, DetectorError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(format!("cannot parse {key} = {value:?}")))
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let dims = [
            ("max_seq_len", self.max_seq_len),
            ("max_word_chars", self.max_word_chars),
            ("word_emb_dim", self.word_emb_dim),
            ("char_emb_dim", self.char_emb_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("num_classes", self.num_classes),
            ("min_word_count", self.min_word_count),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.max_word_vocab < 3 || self.max_char_vocab < 3 {
            return Err(invalid("vocabulary caps must leave room beyond PAD and UNK"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Width of the concatenated token representation.
    pub fn input_dim(&self) -> usize {
        self.word_emb_dim + self.char_emb_dim
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("max_seq_len", self.max_seq_len.to_string()),
            ("max_word_chars", self.max_word_chars.to_string()),
            ("word_emb_dim", self.word_emb_dim.to_string()),
            ("char_emb_dim", self.char_emb_dim.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("lstm_layers", self.lstm_layers.to_string()),
            ("dropout_rate", self.dropout_rate.to_string()),
            ("num_classes", self.num_classes.to_string()),
            ("max_word_vocab", self.max_word_vocab.to_string()),
            ("max_char_vocab", self.max_char_vocab.to_string()),
            ("min_word_count", self.min_word_count.to_string()),
        ]
    }

    /// Set one field by name. Returns false for keys this type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, DetectorError> {
        match key {
            "max_seq_len" => self.max_seq_len = parse_field(key, value)?,
            "max_word_chars" => self.max_word_chars = parse_field(key, value)?,
            "word_emb_dim" => self.word_emb_dim = parse_field(key, value)?,
            "char_emb_dim" => self.char_emb_dim = parse_field(key, value)?,
            "lstm_hidden" => self.lstm_hidden = parse_field(key, value)?,
            "lstm_layers" => self.lstm_layers = parse_field(key, value)?,
            "dropout_rate" => self.dropout_rate = parse_field(key, value)?,
            "num_classes" => self.num_classes = parse_field(key, value)?,
            "max_word_vocab" => self.max_word_vocab = parse_field(key, value)?,
            "max_char_vocab" => self.max_char_vocab = parse_field(key, value)?,
            "min_word_count" => self.min_word_count = parse_field(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Inverse of [`ModelConfig::to_text`]; every key must be present.
    pub fn parse(text: &str) -> Result<Self, DetectorError> {
        let map = parse_key_values(text)?;
        let mut config = Self::default();
        let expected: Vec<&str> = config.entries().into_iter().map(|(k, _)| k).collect();
        for key in &expected {
            let value = map
                .get(*key)
                .ok_or_else(|| invalid(format!("missing key {key}")))?;
            config.set(key, value)?;
        }
        if let Some(extra) = map.keys().find(|k| !expected.contains(&k.as_str())) {
            return Err(invalid(format!("unknown key {extra}")));
        }
        config.validate()?;
        Ok(config)
    }
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub(crate) fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, DetectorError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("line {}: expected key=value", i + 1)))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(invalid(format!("line {}: duplicate key {}", i + 1, k.trim())));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Stop once training accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 256,
            learning_rate: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("Adam betas must lie in [0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(invalid("epsilon must be non-negative"));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, DetectorError> {
        match key {
            "epochs" => self.epochs = parse_field(key, value)?,
            "batch_size" => self.batch_size = parse_field(key, value)?,
            "learning_rate" => self.learning_rate = parse_field(key, value)?,
            "beta1" => self.beta1 = parse_field(key, value)?,
            "beta2" => self.beta2 = parse_field(key, value)?,
            "epsilon" => self.epsilon = parse_field(key, value)?,
            "seed" => self.seed = parse_field(key, value)?,
            "target_accuracy" => self.target_accuracy = Some(parse_field(key, value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Apply `key=value` text to both configurations. Unknown keys are errors.
pub fn apply_config_text(
    text: &str,
    model: &mut ModelConfig,
    train: &mut TrainConfig,
) -> Result<(), DetectorError> {
    for (k, v) in parse_key_values(text)? {
        if !model.set(&k, &v)? && !train.set(&k, &v)? {
            return Err(invalid(format!("unknown key {k}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        TrainConfig::default().validate().unwrap();
        assert_eq!(TrainConfig::default().learning_rate, 2e-5);
    }

    #[test]
    fn text_round_trip() {
        let c = ModelConfig {
            dropout_rate: 0.1 + 0.2,
            num_classes: 51,
            ..ModelConfig::default()
        };
        assert_eq!(ModelConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        let c = ModelConfig {
            dropout_rate: 1.0,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            lstm_hidden: 0,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        let t = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(t.validate().is_err());
    }

    #[test]
    fn config_text_routes_keys() {
        let mut m = ModelConfig::default();
        let mut t = TrainConfig::default();
        apply_config_text("# c\nlstm_hidden = 8\nlearning_rate=0.01\n", &mut m, &mut t).unwrap();
        assert_eq!((m.lstm_hidden, t.learning_rate), (8, 0.01));
        assert!(apply_config_text("bogus=1", &mut m, &mut t).is_err());
    }
}
