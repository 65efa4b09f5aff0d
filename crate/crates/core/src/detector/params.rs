use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};

use super::{ModelConfig, Vocab};
use crate::rng::RngStream;

const EMBEDDING_RANGE: f64 = 0.05;
const FORGET_BIAS: f64 = 1.0;
const INIT_STREAM: u64 = 0x1417;

/// One LSTM direction. Gate blocks along the columns are ordered
/// input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// in×4H.
    pub w_x: Array2<f64>,
    /// H×4H.
    pub w_h: Array2<f64>,
    /// 4H.
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub word_embedding: Array2<f64>,
    pub char_embedding: Array2<f64>,
    pub layers: Vec<LayerParams>,
    /// 2H×K; rows 0..H read the forward states.
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
}

fn uniform(rng: &mut RngStream, shape: (usize, usize), limit: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.uniform(-limit, limit))
}

fn glorot(rng: &mut RngStream, shape: (usize, usize)) -> Array2<f64> {
    let limit = (6.0 / (shape.0 + shape.1) as f64).sqrt();
    uniform(rng, shape, limit)
}

impl LstmParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((input, 4 * hidden)),
            w_h: Array2::zeros((hidden, 4 * hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    fn init(input: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(FORGET_BIAS);
        Self {
            w_x: glorot(rng, (input, 4 * hidden)),
            w_h: glorot(rng, (hidden, 4 * hidden)),
            b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.nrows()
    }
}

/// Swap the two H-row halves of a 2H-row matrix.
fn swap_halves(m: &Array2<f64>) -> Array2<f64> {
    let h = m.nrows() / 2;
    ndarray::concatenate(Axis(0), &[m.slice(s![h.., ..]), m.slice(s![..h, ..])])
        .expect("halves share a column count")
}

impl ModelParams {
    fn layer_input(config: &ModelConfig, layer: usize) -> usize {
        if layer == 0 {
            config.input_dim()
        } else {
            2 * config.lstm_hidden
        }
    }

    pub fn zeros(config: &ModelConfig, vocab: &Vocab) -> Self {
        let h = config.lstm_hidden;
        Self {
            word_embedding: Array2::zeros((vocab.word_count(), config.word_emb_dim)),
            char_embedding: Array2::zeros((vocab.char_count(), config.char_emb_dim)),
            layers: (0..config.lstm_layers)
                .map(|l| LayerParams {
                    forward: LstmParams::zeros(Self::layer_input(config, l), h),
                    backward: LstmParams::zeros(Self::layer_input(config, l), h),
                })
                .collect(),
            dense_w: Array2::zeros((2 * h, config.num_classes)),
            dense_b: Array1::zeros(config.num_classes),
        }
    }

    /// Seeded initialization.
    pub fn init(config: &ModelConfig, vocab: &Vocab, seed: u64) -> Self {
        let mut rng = RngStream::derive(seed, &[INIT_STREAM]);
        let h = config.lstm_hidden;
        let word_embedding = uniform(&mut rng, (vocab.word_count(), config.word_emb_dim), EMBEDDING_RANGE);
        let char_embedding = uniform(&mut rng, (vocab.char_count(), config.char_emb_dim), EMBEDDING_RANGE);
        let layers = (0..config.lstm_layers)
            .map(|l| {
                let input = Self::layer_input(config, l);
                let forward = LstmParams::init(input, h, &mut rng);
                let backward = LstmParams::init(input, h, &mut rng);
                LayerParams { forward, backward }
            })
            .collect();
        Self {
            word_embedding,
            char_embedding,
            layers,
            dense_w: glorot(&mut rng, (2 * h, config.num_classes)),
            dense_b: Array1::zeros(config.num_classes),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for (_, mut t) in out.tensors_mut() {
            t.fill(0.0);
        }
        out
    }

    /// Named views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("word_embedding".to_string(), self.word_embedding.view().into_dyn()),
            ("char_embedding".to_string(), self.char_embedding.view().into_dyn()),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, p) in [("forward", &layer.forward), ("backward", &layer.backward)] {
                out.push((format!("lstm.{l}.{dir}.w_x"), p.w_x.view().into_dyn()));
                out.push((format!("lstm.{l}.{dir}.w_h"), p.w_h.view().into_dyn()));
                out.push((format!("lstm.{l}.{dir}.b"), p.b.view().into_dyn()));
            }
        }
        out.push(("dense.w".to_string(), self.dense_w.view().into_dyn()));
        out.push(("dense.b".to_string(), self.dense_b.view().into_dyn()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![
            ("word_embedding".to_string(), self.word_embedding.view_mut().into_dyn()),
            ("char_embedding".to_string(), self.char_embedding.view_mut().into_dyn()),
        ];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let LayerParams { forward, backward } = layer;
            for (dir, p) in [("forward", forward), ("backward", backward)] {
                out.push((format!("lstm.{l}.{dir}.w_x"), p.w_x.view_mut().into_dyn()));
                out.push((format!("lstm.{l}.{dir}.w_h"), p.w_h.view_mut().into_dyn()));
                out.push((format!("lstm.{l}.{dir}.b"), p.b.view_mut().into_dyn()));
            }
        }
        out.push(("dense.w".to_string(), self.dense_w.view_mut().into_dyn()));
        out.push(("dense.b".to_string(), self.dense_b.view_mut().into_dyn()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// The same network with forward and backward directions exchanged.
    /// On a reversed sentence it produces the reversed outputs.
    pub fn mirrored(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let flip = |p: &LstmParams| LstmParams {
                    w_x: if l == 0 { p.w_x.clone() } else { swap_halves(&p.w_x) },
                    w_h: p.w_h.clone(),
                    b: p.b.clone(),
                };
                LayerParams {
                    forward: flip(&layer.backward),
                    backward: flip(&layer.forward),
                }
            })
            .collect();
        Self {
            word_embedding: self.word_embedding.clone(),
            char_embedding: self.char_embedding.clone(),
            layers,
            dense_w: swap_halves(&self.dense_w),
            dense_b: self.dense_b.clone(),
        }
    }

    /// Check shapes against a configuration and vocabulary.
    pub fn matches(&self, config: &ModelConfig, vocab: &Vocab) -> bool {
        let expected = Self::zeros(config, vocab);
        self.tensors()
            .iter()
            .zip(expected.tensors().iter())
            .all(|((_, a), (_, b))| a.shape() == b.shape())
            && self.layers.len() == expected.layers.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (ModelConfig, Vocab) {
        let config = ModelConfig {
            word_emb_dim: 3,
            char_emb_dim: 2,
            lstm_hidden: 4,
            lstm_layers: 2,
            num_classes: 5,
            min_word_count: 1,
            ..ModelConfig::default()
        };
        let vocab = Vocab::build(&[vec!["ab", "c"]], &config).unwrap();
        (config, vocab)
    }

    #[test]
    fn shapes_follow_config() {
        let (c, v) = small();
        let p = ModelParams::init(&c, &v, 3);
        assert_eq!(p.word_embedding.dim(), (4, 3));
        assert_eq!(p.layers[0].forward.w_x.dim(), (5, 16));
        assert_eq!(p.layers[1].backward.w_x.dim(), (8, 16));
        assert_eq!(p.dense_w.dim(), (8, 5));
        assert!(p.matches(&c, &v));
        assert_eq!(p.tensors().len(), 2 + 2 * 2 * 3 + 2);
    }

    #[test]
    fn init_ranges_and_bias() {
        let (c, v) = small();
        let p = ModelParams::init(&c, &v, 3);
        assert!(p.word_embedding.iter().all(|x| x.abs() <= EMBEDDING_RANGE));
        let limit = (6.0f64 / (5 + 16) as f64).sqrt();
        assert!(p.layers[0].forward.w_x.iter().all(|x| x.abs() <= limit));
        let b = &p.layers[0].forward.b;
        assert!(b.slice(s![4..8]).iter().all(|&x| x == 1.0));
        assert!(b.slice(s![..4]).iter().all(|&x| x == 0.0));
        assert_eq!(p, ModelParams::init(&c, &v, 3));
        assert_ne!(p, ModelParams::init(&c, &v, 4));
    }

    #[test]
    fn mirror_is_an_involution() {
        let (c, v) = small();
        let p = ModelParams::init(&c, &v, 1);
        assert_eq!(p.mirrored().mirrored(), p);
        assert_eq!(p.mirrored().layers[0].forward, p.layers[0].backward);
    }
}
