//! Forward and backward passes.
//!
//! Sequence tensors are kept as 2-D arrays with one row per (time, sample)
//! pair, row `t * B + b`, so that input projections are single matrix
//! products. Only the first `active_len` time steps of a batch are computed;
//! later positions are padding in every row.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use super::{Batch, DetectorError, LstmParams, ModelConfig, ModelParams, IGNORE_LABEL, PAD};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-(sample, channel) multipliers shared across time steps: 0 for a
/// dropped channel, `1 / (1 - rate)` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub scale: Array2<f64>,
}

impl DropoutMask {
    pub fn sample(batch_size: usize, dim: usize, rate: f64, rng: &mut RngStream) -> Self {
        let keep = 1.0 / (1.0 - rate);
        Self {
            scale: Array2::from_shape_simple_fn((batch_size, dim), || {
                if rng.unit() < rate {
                    0.0
                } else {
                    keep
                }
            }),
        }
    }
}

struct DirectionCache {
    inputs: Vec<Array2<f64>>,
    /// Post-activation gates, columns i | f | g | o.
    gates: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    h: Array2<f64>,
}

struct LayerCache {
    forward: DirectionCache,
    backward: DirectionCache,
}

/// Intermediate values of one forward pass, kept for the backward pass.
pub struct ForwardCache {
    batch_size: usize,
    steps: usize,
    lengths: Vec<usize>,
    dropout: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
    top: (Array2<f64>, Array2<f64>),
    /// Row-wise class probabilities; uniform at padded rows.
    probs: Array2<f64>,
    log_probs: Array2<f64>,
}

impl ForwardCache {
    pub fn num_classes(&self) -> usize {
        self.probs.ncols()
    }

    fn row(&self, b: usize, t: usize) -> Option<usize> {
        (t < self.lengths[b]).then_some(t * self.batch_size + b)
    }

    /// Class distribution of a real token.
    pub fn token_probs(&self, b: usize, t: usize) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.row(b, t).map(|r| self.probs.row(r))
    }

    /// Highest-probability class of a real token (lowest index on ties).
    pub fn argmax(&self, b: usize, t: usize) -> Option<usize> {
        self.token_probs(b, t).map(|p| {
            let mut best = 0;
            for (k, &v) in p.iter().enumerate() {
                if v > p[best] {
                    best = k;
                }
            }
            best
        })
    }

    /// B×T×K probabilities over the full padded length `seq_len`.
    pub fn probabilities(&self, seq_len: usize) -> Array3<f64> {
        let k = self.num_classes();
        let mut out = Array3::from_elem((self.batch_size, seq_len, k), 1.0 / k as f64);
        for b in 0..self.batch_size {
            for t in 0..self.lengths[b].min(seq_len) {
                out.slice_mut(s![b, t, ..]).assign(&self.probs.row(t * self.batch_size + b));
            }
        }
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_finite(a: &Array2<f64>, layer: impl Into<String>) -> Result<(), DetectorError> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DetectorError::NonFinite { layer: layer.into() })
    }
}

/// Time-reverse every sample within its own length; padded rows become 0.
fn reverse_rows(x: &Array2<f64>, lengths: &[usize], batch_size: usize) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    for (b, &len) in lengths.iter().enumerate() {
        for t in 0..len {
            out.row_mut(t * batch_size + b)
                .assign(&x.row((len - 1 - t) * batch_size + b));
        }
    }
    out
}

fn zero_padding(x: &mut Array2<f64>, lengths: &[usize], batch_size: usize, steps: usize) {
    for (b, &len) in lengths.iter().enumerate() {
        for t in len..steps {
            x.row_mut(t * batch_size + b).fill(0.0);
        }
    }
}

fn embed(params: &ModelParams, batch: &Batch, steps: usize) -> Array2<f64> {
    let bs = batch.batch_size();
    let dw = params.word_embedding.ncols();
    let dc = params.char_embedding.ncols();
    let mut x = Array2::zeros((steps * bs, dw + dc));
    for b in 0..bs {
        for t in 0..batch.lengths[b] {
            let mut row = x.row_mut(t * bs + b);
            row.slice_mut(s![..dw])
                .assign(&params.word_embedding.row(batch.words[[b, t]]));
            let chars: Vec<usize> = batch
                .chars
                .slice(s![b, t, ..])
                .iter()
                .copied()
                .filter(|&c| c != PAD)
                .collect();
            if chars.is_empty() {
                continue;
            }
            let mut pooled = row.slice_mut(s![dw..]);
            for &c in &chars {
                pooled += &params.char_embedding.row(c);
            }
            pooled /= chars.len() as f64;
        }
    }
    x
}

fn direction_forward(
    p: &LstmParams,
    inputs: Vec<Array2<f64>>,
    steps: usize,
    bs: usize,
) -> DirectionCache {
    let h = p.hidden();
    let rows = steps * bs;
    let mut pre: Option<Array2<f64>> = None;
    let mut offset = 0;
    for x in &inputs {
        let part = x.dot(&p.w_x.slice(s![offset..offset + x.ncols(), ..]));
        offset += x.ncols();
        pre = Some(match pre {
            None => part,
            Some(acc) => acc + part,
        });
    }
    let mut pre = pre.unwrap_or_else(|| Array2::zeros((rows, 4 * h)));
    pre += &p.b;

    let mut gates = Array2::zeros((rows, 4 * h));
    let mut c = Array2::zeros((rows, h));
    let mut tanh_c = Array2::zeros((rows, h));
    let mut hid = Array2::zeros((rows, h));
    let ps = pre.as_slice().expect("standard layout");
    let gs = gates.as_slice_mut().expect("standard layout");
    let cs = c.as_slice_mut().expect("standard layout");
    let ts = tanh_c.as_slice_mut().expect("standard layout");
    for t in 0..steps {
        let rec = (t > 0).then(|| {
            let prev = hid.slice(s![(t - 1) * bs..t * bs, ..]);
            prev.dot(&p.w_h)
        });
        let hs = hid.as_slice_mut().expect("standard layout");
        let (c_done, c_rest) = cs.split_at_mut(t * bs * h);
        for i in 0..bs {
            let r = t * bs + i;
            let z_pre = &ps[r * 4 * h..(r + 1) * 4 * h];
            let z_rec = rec.as_ref().map(|m| m.row(i));
            let z = |k: usize| match &z_rec {
                Some(m) => z_pre[k] + m[k],
                None => z_pre[k],
            };
            let g_row = &mut gs[r * 4 * h..(r + 1) * 4 * h];
            let c_row = &mut c_rest[i * h..(i + 1) * h];
            let c_prev = (t > 0).then(|| &c_done[(r - bs) * h..(r - bs + 1) * h]);
            let t_row = &mut ts[r * h..(r + 1) * h];
            let h_row = &mut hs[r * h..(r + 1) * h];
            for j in 0..h {
                let ig = sigmoid(z(j));
                let fg = sigmoid(z(h + j));
                let gg = z(2 * h + j).tanh();
                let og = sigmoid(z(3 * h + j));
                let cp = c_prev.map_or(0.0, |c| c[j]);
                let cv = fg * cp + ig * gg;
                let tc = cv.tanh();
                g_row[j] = ig;
                g_row[h + j] = fg;
                g_row[2 * h + j] = gg;
                g_row[3 * h + j] = og;
                c_row[j] = cv;
                t_row[j] = tc;
                h_row[j] = og * tc;
            }
        }
    }
    DirectionCache {
        inputs,
        gates,
        c,
        tanh_c,
        h: hid,
    }
}

/// Backpropagate through one direction, accumulating into `grads`.
/// Returns the gradient with respect to each input part.
fn direction_backward(
    p: &LstmParams,
    cache: &DirectionCache,
    d_h: &Array2<f64>,
    steps: usize,
    bs: usize,
    grads: &mut LstmParams,
) -> Vec<Array2<f64>> {
    let h = p.hidden();
    let rows = steps * bs;
    let mut dz = Array2::zeros((rows, 4 * h));
    let mut dh_next: Array2<f64> = Array2::zeros((bs, h));
    let mut dc_next: Array2<f64> = Array2::zeros((bs, h));
    let g = &cache.gates;
    let gs = g.as_slice().expect("standard layout");
    let cs = cache.c.as_slice().expect("standard layout");
    let ts = cache.tanh_c.as_slice().expect("standard layout");
    let dhs = d_h.as_slice().expect("standard layout");
    for t in (0..steps).rev() {
        let dzs = dz.as_slice_mut().expect("standard layout");
        let dh_next_s = dh_next.as_slice().expect("standard layout");
        let dc_next_s = dc_next.as_slice_mut().expect("standard layout");
        for i in 0..bs {
            let r = t * bs + i;
            let g_row = &gs[r * 4 * h..(r + 1) * 4 * h];
            let dz_row = &mut dzs[r * 4 * h..(r + 1) * 4 * h];
            let c_prev = (t > 0).then(|| &cs[(r - bs) * h..(r - bs + 1) * h]);
            for j in 0..h {
                let (ig, fg, gg, og) = (g_row[j], g_row[h + j], g_row[2 * h + j], g_row[3 * h + j]);
                let tc = ts[r * h + j];
                let dh = dhs[r * h + j] + dh_next_s[i * h + j];
                let dc = dh * og * (1.0 - tc * tc) + dc_next_s[i * h + j];
                let cp = c_prev.map_or(0.0, |c| c[j]);
                dz_row[j] = dc * gg * ig * (1.0 - ig);
                dz_row[h + j] = dc * cp * fg * (1.0 - fg);
                dz_row[2 * h + j] = dc * ig * (1.0 - gg * gg);
                dz_row[3 * h + j] = dh * tc * og * (1.0 - og);
                dc_next_s[i * h + j] = dc * fg;
            }
        }
        if t > 0 {
            dh_next = dz.slice(s![t * bs..(t + 1) * bs, ..]).dot(&p.w_h.t());
        }
    }
    if steps > 1 {
        let prev = cache.h.slice(s![..(steps - 1) * bs, ..]);
        grads.w_h += &prev.t().dot(&dz.slice(s![bs.., ..]));
    }
    grads.b += &dz.sum_axis(Axis(0));
    let mut offset = 0;
    let mut d_inputs = Vec::with_capacity(cache.inputs.len());
    for x in &cache.inputs {
        let cols = offset..offset + x.ncols();
        grads.w_x.slice_mut(s![cols.clone(), ..]).scaled_add(1.0, &x.t().dot(&dz));
        d_inputs.push(dz.dot(&p.w_x.slice(s![cols, ..]).t()));
        offset += x.ncols();
    }
    d_inputs
}

fn dense_part(x: &Array2<f64>, w: ArrayView2<'_, f64>) -> Array2<f64> {
    x.dot(&w)
}

/// Input of the first LSTM layer: word embedding joined with the mean
/// character embedding, after dropout. One row per `t * B + b` for the
/// first `active_len` steps; padded rows are zero.
pub fn token_features(
    params: &ModelParams,
    batch: &Batch,
    dropout: Option<&DropoutMask>,
) -> Result<Array2<f64>, DetectorError> {
    let bs = batch.batch_size();
    let mut x = embed(params, batch, batch.active_len());
    if let Some(mask) = dropout {
        if mask.scale.dim() != (bs, x.ncols()) {
            return Err(DetectorError::Shape(format!(
                "dropout mask {:?} for batch {bs} and width {}",
                mask.scale.dim(),
                x.ncols()
            )));
        }
        for (r, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
            row *= &mask.scale.row(r % bs);
        }
    }
    Ok(x)
}

/// Forward pass over a batch, keeping what the backward pass needs.
pub fn forward_cached(
    params: &ModelParams,
    batch: &Batch,
    dropout: Option<&DropoutMask>,
) -> Result<ForwardCache, DetectorError> {
    let bs = batch.batch_size();
    let steps = batch.active_len();
    let lengths = batch.lengths.clone();
    let x = token_features(params, batch, dropout)?;
    let dropout = dropout.map(|m| m.scale.clone());
    check_finite(&x, "embedding")?;

    let mut inputs = vec![x];
    let mut layers = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let reversed: Vec<Array2<f64>> = inputs
            .iter()
            .map(|x| reverse_rows(x, &lengths, bs))
            .collect();
        let fwd = direction_forward(&layer.forward, inputs, steps, bs);
        let bwd = direction_forward(&layer.backward, reversed, steps, bs);
        let mut hf = fwd.h.clone();
        zero_padding(&mut hf, &lengths, bs, steps);
        let hb = reverse_rows(&bwd.h, &lengths, bs);
        check_finite(&hf, format!("lstm.{l}.forward"))?;
        check_finite(&hb, format!("lstm.{l}.backward"))?;
        layers.push(LayerCache {
            forward: fwd,
            backward: bwd,
        });
        inputs = vec![hf, hb];
    }
    let hb = inputs.pop().expect("two directions");
    let hf = inputs.pop().expect("two directions");
    let hidden = hf.ncols();
    let mut logits = dense_part(&hf, params.dense_w.slice(s![..hidden, ..]));
    logits += &dense_part(&hb, params.dense_w.slice(s![hidden.., ..]));
    logits += &params.dense_b;
    check_finite(&logits, "dense")?;

    let k = logits.ncols();
    let mut probs = Array2::from_elem(logits.raw_dim(), 1.0 / k as f64);
    let mut log_probs = Array2::from_elem(logits.raw_dim(), -(k as f64).ln());
    for (b, &len) in lengths.iter().enumerate() {
        for t in 0..len {
            let r = t * bs + b;
            let z = logits.row(r);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for kk in 0..k {
                let e = (z[kk] - max).exp();
                probs[[r, kk]] = e;
                sum += e;
            }
            let log_sum = sum.ln();
            for kk in 0..k {
                probs[[r, kk]] /= sum;
                log_probs[[r, kk]] = z[kk] - max - log_sum;
            }
        }
    }
    Ok(ForwardCache {
        batch_size: bs,
        steps,
        lengths,
        dropout,
        layers,
        top: (hf, hb),
        probs,
        log_probs,
    })
}

/// Class probabilities, B×T×K. Padded positions hold the uniform
/// distribution. `Train` mode samples spatial dropout from `rng`.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &Batch,
    mode: Mode,
    rng: &mut RngStream,
) -> Result<Array3<f64>, DetectorError> {
    let mask = (mode == Mode::Train && config.dropout_rate > 0.0).then(|| {
        DropoutMask::sample(batch.batch_size(), config.input_dim(), config.dropout_rate, rng)
    });
    let cache = forward_cached(params, batch, mask.as_ref())?;
    Ok(cache.probabilities(batch.seq_len()))
}

/// Mean of `-ln p(label)` over positions where `mask` is set.
pub fn masked_cross_entropy(
    probs: &Array3<f64>,
    labels: &Array2<usize>,
    mask: &Array2<bool>,
) -> Result<f64, DetectorError> {
    let (bs, t, _) = probs.dim();
    if labels.dim() != (bs, t) || mask.dim() != (bs, t) {
        return Err(DetectorError::Shape("labels and mask must be B×T".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for b in 0..bs {
        for i in 0..t {
            if mask[[b, i]] {
                let y = labels[[b, i]];
                if y == IGNORE_LABEL || y >= probs.dim().2 {
                    return Err(DetectorError::Shape(format!("bad label at ({b}, {i})")));
                }
                total -= probs[[b, i, y]].ln();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(DetectorError::ZeroMask);
    }
    Ok(total / count as f64)
}

/// Loss of a cached forward pass and the matching gradient of the logits.
fn loss_and_logit_grad(
    cache: &ForwardCache,
    batch: &Batch,
) -> Result<(f64, Array2<f64>), DetectorError> {
    let bs = cache.batch_size;
    let k = cache.num_classes();
    let n = batch.token_count();
    if n == 0 {
        return Err(DetectorError::ZeroMask);
    }
    let mut total = 0.0;
    let mut d_logits = Array2::zeros(cache.probs.raw_dim());
    for (b, &len) in cache.lengths.iter().enumerate() {
        for t in 0..len {
            let y = batch.labels[[b, t]];
            if y >= k {
                return Err(DetectorError::Shape(format!("bad label at ({b}, {t})")));
            }
            let r = t * bs + b;
            total -= cache.log_probs[[r, y]];
            let mut row = d_logits.row_mut(r);
            row.assign(&cache.probs.row(r));
            row[y] -= 1.0;
            row /= n as f64;
        }
    }
    Ok((total / n as f64, d_logits))
}

fn check_gradients(grads: &ModelParams) -> Result<(), DetectorError> {
    for (name, t) in grads.tensors() {
        if !t.iter().all(|v| v.is_finite()) {
            return Err(DetectorError::NonFinite { layer: name });
        }
    }
    Ok(())
}

/// Loss and exact gradients for one batch with a pinned dropout mask
/// (`None` disables dropout).
pub fn loss_and_gradients(
    params: &ModelParams,
    batch: &Batch,
    dropout: Option<&DropoutMask>,
) -> Result<(f64, ModelParams), DetectorError> {
    let cache = forward_cached(params, batch, dropout)?;
    let (loss, d_logits) = loss_and_logit_grad(&cache, batch)?;
    let grads = backward(params, &cache, batch, &d_logits);
    check_gradients(&grads)?;
    Ok((loss, grads))
}

fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    batch: &Batch,
    d_logits: &Array2<f64>,
) -> ModelParams {
    let bs = cache.batch_size;
    let steps = cache.steps;
    let lengths = &cache.lengths;
    let mut grads = params.zeros_like();
    let (hf, hb) = &cache.top;
    let hidden = hf.ncols();

    grads
        .dense_w
        .slice_mut(s![..hidden, ..])
        .assign(&hf.t().dot(d_logits));
    grads
        .dense_w
        .slice_mut(s![hidden.., ..])
        .assign(&hb.t().dot(d_logits));
    grads.dense_b.assign(&d_logits.sum_axis(Axis(0)));
    let mut d_out = vec![
        d_logits.dot(&params.dense_w.slice(s![..hidden, ..]).t()),
        d_logits.dot(&params.dense_w.slice(s![hidden.., ..]).t()),
    ];

    for (l, layer) in params.layers.iter().enumerate().rev() {
        let lc = &cache.layers[l];
        let mut d_f = std::mem::take(&mut d_out[0]);
        zero_padding(&mut d_f, lengths, bs, steps);
        let d_b = reverse_rows(&d_out[1], lengths, bs);
        let g = &mut grads.layers[l];
        let from_f = direction_backward(&layer.forward, &lc.forward, &d_f, steps, bs, &mut g.forward);
        let from_b = direction_backward(&layer.backward, &lc.backward, &d_b, steps, bs, &mut g.backward);
        d_out = from_f
            .into_iter()
            .zip(from_b)
            .map(|(f, b)| f + reverse_rows(&b, lengths, bs))
            .collect();
    }

    let mut d_x = d_out.pop().expect("layer-0 input");
    if let Some(scale) = &cache.dropout {
        for (r, mut row) in d_x.axis_iter_mut(Axis(0)).enumerate() {
            row *= &scale.row(r % bs);
        }
    }
    let dw = params.word_embedding.ncols();
    for (b, &len) in lengths.iter().enumerate() {
        for t in 0..len {
            let row = d_x.row(t * bs + b);
            let mut target = grads.word_embedding.row_mut(batch.words[[b, t]]);
            target += &row.slice(s![..dw]);
            let chars: Vec<usize> = batch
                .chars
                .slice(s![b, t, ..])
                .iter()
                .copied()
                .filter(|&c| c != PAD)
                .collect();
            let n = chars.len() as f64;
            for c in chars {
                grads
                    .char_embedding
                    .row_mut(c)
                    .scaled_add(1.0 / n, &row.slice(s![dw..]));
            }
        }
    }
    grads
}
