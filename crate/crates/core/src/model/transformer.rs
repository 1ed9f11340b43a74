//! Encoder-decoder forward pass, teacher-forced loss, and exact reverse-mode
//! gradients, all in `f64`.
//!
//! Architecture, pinned here and mirrored by the independent test oracle:
//! sinusoidal positional encodings added to shared input embeddings;
//! pre-norm blocks with parameterless layer norm (eps 1e-6, biased variance);
//! scaled dot-product attention with per-head column blocks; tanh-form GELU
//! feedforward; a final layer norm after each stack; logits through a
//! bias-free output projection. The decoder input is the padding token
//! followed by the target shifted right by one.

use super::params::{AttnParams, FfParams, Parameters};
use super::{ModelConfig, TokenSequence};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::vocab::{TokenId, PAD};

pub(crate) const LN_EPS: f64 = 1e-6;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// A frozen backbone: immutable after construction. Prompt search reads its
/// embedding table and gradients but never writes to it.
#[derive(Debug, Clone)]
pub struct FrozenSeq2Seq {
    config: ModelConfig,
    params: Parameters,
    pe: Matrix,
}

impl FrozenSeq2Seq {
    /// Seeded random model; the same config yields bitwise-identical weights.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config);
        Ok(Self::assemble(config, params))
    }

    /// All weights zero: every output distribution is uniform. Test fixture.
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::zeros(&config);
        Ok(Self::assemble(config, params))
    }

    /// Wraps explicit parameters, validating shapes and finiteness.
    pub fn from_parameters(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        params.validate_for(&config)?;
        Ok(Self::assemble(config, params))
    }

    fn assemble(config: ModelConfig, params: Parameters) -> Self {
        let pe = positional_encoding(config.max_seq_len, config.embed_dim);
        FrozenSeq2Seq { config, params, pe }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn embedding_row(&self, t: TokenId) -> Result<&[f64]> {
        if t.idx() >= self.config.vocab_size {
            return Err(Error::UnknownToken(t.0, self.config.vocab_size));
        }
        Ok(self.params.embedding.row(t.idx()))
    }

    /// FNV-1a over every tensor in declared order; used to assert that
    /// nothing mutates the model.
    pub fn parameter_checksum(&self) -> u64 {
        let mut h = Fnv64::new();
        for t in self.params.tensors() {
            for v in t.data() {
                h.update(&v.to_le_bytes());
            }
        }
        h.finish()
    }

    /// Teacher-forced negative log-likelihood of `target` given `input`:
    /// the sum over target positions of `-log p(y_i | input, y_<i)`.
    pub fn forward_loss(&self, input: &TokenSequence, target: &[TokenId]) -> Result<f64> {
        let net = self.network();
        net.check_ids(&input.ids, "input")?;
        net.check_ids(target, "target")?;
        let dec_in = decoder_input(target);
        let (enc_out, _) = net.encoder_forward(&input.ids);
        let (logits, _) = net.decoder_forward(&dec_in, &enc_out, None, false);
        Ok(loss_from_logits(&logits, target))
    }

    /// Gradient of [`Self::forward_loss`] with respect to the embedding row
    /// used at each requested input position, one vector per position.
    /// Distinct calls with identical arguments are bitwise identical.
    pub fn input_embedding_gradients(
        &self,
        input: &TokenSequence,
        target: &[TokenId],
        positions: &[usize],
    ) -> Result<Vec<Vec<f64>>> {
        for &p in positions {
            if p >= input.ids.len() {
                return Err(Error::InvalidArgument(format!(
                    "gradient position {p} is outside an input of length {}",
                    input.ids.len()
                )));
            }
        }
        let grads = self.backward(input, target, false)?;
        Ok(positions.iter().map(|&p| grads.d_enc_embed.row(p).to_vec()).collect())
    }

    pub(crate) fn backward(
        &self,
        input: &TokenSequence,
        target: &[TokenId],
        want_params: bool,
    ) -> Result<Gradients> {
        let net = self.network();
        net.check_ids(&input.ids, "input")?;
        net.check_ids(target, "target")?;
        let dec_in = decoder_input(target);
        Ok(net.forward_backward(&input.ids, &dec_in, target, want_params))
    }

    pub(crate) fn network(&self) -> Network<'_> {
        Network { config: &self.config, params: &self.params, pe: &self.pe }
    }

    /// Runs the encoder once and caches the cross-attention projections so
    /// repeated decode steps over the same input stay cheap.
    pub(crate) fn decode_session(&self, input: &TokenSequence) -> Result<DecodeSession<'_>> {
        let net = self.network();
        net.check_ids(&input.ids, "input")?;
        let (enc_out, _) = net.encoder_forward(&input.ids);
        let cross_kv = self
            .params
            .decoder
            .iter()
            .map(|l| {
                let mut k = enc_out.matmul(&l.cross_attn.wk);
                k.add_bias(&l.cross_attn.bk);
                let mut v = enc_out.matmul(&l.cross_attn.wv);
                v.add_bias(&l.cross_attn.bv);
                (k, v)
            })
            .collect();
        Ok(DecodeSession { model: self, enc_out, cross_kv })
    }
}

/// Decoder input for teacher forcing: padding start token, then the target
/// shifted right by one.
pub(crate) fn decoder_input(target: &[TokenId]) -> Vec<TokenId> {
    let mut dec_in = Vec::with_capacity(target.len());
    dec_in.push(PAD);
    dec_in.extend_from_slice(&target[..target.len().saturating_sub(1)]);
    dec_in
}

pub(crate) struct Gradients {
    /// Per encoder input position, the gradient with respect to the
    /// embedding row used there.
    pub d_enc_embed: Matrix,
    /// Full parameter gradients when requested (embedding rows are already
    /// scattered by token id).
    pub params: Option<Parameters>,
    pub loss: f64,
}

pub(crate) struct Network<'a> {
    pub config: &'a ModelConfig,
    pub params: &'a Parameters,
    pub pe: &'a Matrix,
}

impl Network<'_> {
    pub(crate) fn check_ids(&self, ids: &[TokenId], what: &str) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::InvalidArgument(format!("{what} sequence must be non-empty")));
        }
        if ids.len() > self.config.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: ids.len(),
                max: self.config.max_seq_len,
            });
        }
        for &t in ids {
            if t.idx() >= self.config.vocab_size {
                return Err(Error::UnknownToken(t.0, self.config.vocab_size));
            }
        }
        Ok(())
    }

    fn embed(&self, ids: &[TokenId]) -> Matrix {
        let d = self.config.embed_dim;
        let mut x = Matrix::zeros(ids.len(), d);
        for (pos, &t) in ids.iter().enumerate() {
            let e = self.params.embedding.row(t.idx());
            let pe = self.pe.row(pos);
            let row = x.row_mut(pos);
            for j in 0..d {
                row[j] = e[j] + pe[j];
            }
        }
        x
    }

    pub(crate) fn encoder_forward(&self, ids: &[TokenId]) -> (Matrix, EncForwardCache) {
        let nh = self.config.num_heads;
        let mut x = self.embed(ids);
        let mut layers = Vec::with_capacity(self.params.encoder.len());
        for layer in &self.params.encoder {
            let (a, ln1) = layer_norm(&x);
            let (attn_out, attn) = attention(&layer.attn, &a, &a, false, nh);
            x.add_assign(&attn_out);
            let (b, ln2) = layer_norm(&x);
            let (ff_out, ff) = feedforward(&layer.ff, &b);
            x.add_assign(&ff_out);
            layers.push(EncLayerCache { ln1, attn, ln2, ff });
        }
        let (enc_out, ln_final) = layer_norm(&x);
        (enc_out, EncForwardCache { layers, ln_final })
    }

    /// Decoder stack over `dec_in` attending to `enc_out`. When `cross_kv`
    /// is given, the cross-attention key/value projections are reused
    /// instead of recomputed. When `only_last_logits` is set the returned
    /// logits matrix has a single row for the final position.
    pub(crate) fn decoder_forward(
        &self,
        dec_in: &[TokenId],
        enc_out: &Matrix,
        cross_kv: Option<&[(Matrix, Matrix)]>,
        only_last_logits: bool,
    ) -> (Matrix, DecForwardCache) {
        let nh = self.config.num_heads;
        let mut y = self.embed(dec_in);
        let mut layers = Vec::with_capacity(self.params.decoder.len());
        for (li, layer) in self.params.decoder.iter().enumerate() {
            let (a, ln1) = layer_norm(&y);
            let (sa_out, self_attn) = attention(&layer.self_attn, &a, &a, true, nh);
            y.add_assign(&sa_out);
            let (b, ln2) = layer_norm(&y);
            let (ca_out, cross_attn) = match cross_kv {
                Some(kv) => {
                    let (k, v) = &kv[li];
                    attention_with_kv(&layer.cross_attn, &b, enc_out, k.clone(), v.clone(), nh)
                }
                None => attention(&layer.cross_attn, &b, enc_out, false, nh),
            };
            y.add_assign(&ca_out);
            let (c, ln3) = layer_norm(&y);
            let (ff_out, ff) = feedforward(&layer.ff, &c);
            y.add_assign(&ff_out);
            layers.push(DecLayerCache { ln1, self_attn, ln2, cross_attn, ln3, ff });
        }
        let (dec_out, ln_final) = layer_norm(&y);
        let logits = if only_last_logits {
            let last = Matrix::from_vec(1, dec_out.cols(), dec_out.row(dec_out.rows() - 1).to_vec());
            last.matmul(&self.params.output)
        } else {
            dec_out.matmul(&self.params.output)
        };
        (logits, DecForwardCache { layers, ln_final, dec_out })
    }

    /// Full forward plus reverse pass. `targets` must align with `dec_in`.
    pub(crate) fn forward_backward(
        &self,
        enc_ids: &[TokenId],
        dec_in: &[TokenId],
        targets: &[TokenId],
        want_params: bool,
    ) -> Gradients {
        debug_assert_eq!(dec_in.len(), targets.len());
        let nh = self.config.num_heads;
        let (enc_out, enc_cache) = self.encoder_forward(enc_ids);
        let (logits, dec_cache) = self.decoder_forward(dec_in, &enc_out, None, false);
        let loss = loss_from_logits(&logits, targets);

        let mut gp = want_params.then(|| Parameters::zeros(self.config));

        // Loss and output projection.
        let dlogits = dlogits(&logits, targets);
        let d_dec_out = dlogits.matmul_bt(&self.params.output);
        if let Some(g) = gp.as_mut() {
            g.output.add_assign(&dec_cache.dec_out.matmul_at(&dlogits));
        }
        let mut d_y = layer_norm_bwd(&d_dec_out, &dec_cache.ln_final);

        // Decoder stack in reverse; cross-attention feeds the encoder output.
        let mut d_enc_out = Matrix::zeros(enc_out.rows(), enc_out.cols());
        for (li, layer) in self.params.decoder.iter().enumerate().rev() {
            let cache = &dec_cache.layers[li];
            let gl = gp.as_mut().map(|g| &mut g.decoder[li]);
            let (g_self, g_cross, g_ff) = match gl {
                Some(l) => (Some(&mut l.self_attn), Some(&mut l.cross_attn), Some(&mut l.ff)),
                None => (None, None, None),
            };
            let d_c = feedforward_bwd(&layer.ff, &cache.ff, &d_y, g_ff);
            d_y.add_assign(&layer_norm_bwd(&d_c, &cache.ln3));
            let (d_b, d_enc_contrib) =
                attention_bwd(&layer.cross_attn, &cache.cross_attn, &d_y, nh, g_cross);
            d_enc_out.add_assign(&d_enc_contrib);
            d_y.add_assign(&layer_norm_bwd(&d_b, &cache.ln2));
            let (d_a_q, d_a_kv) =
                attention_bwd(&layer.self_attn, &cache.self_attn, &d_y, nh, g_self);
            let mut d_a = d_a_q;
            d_a.add_assign(&d_a_kv);
            d_y.add_assign(&layer_norm_bwd(&d_a, &cache.ln1));
        }
        let d_dec_embed = d_y;

        // Encoder stack in reverse.
        let mut d_x = layer_norm_bwd(&d_enc_out, &enc_cache.ln_final);
        for (li, layer) in self.params.encoder.iter().enumerate().rev() {
            let cache = &enc_cache.layers[li];
            let gl = gp.as_mut().map(|g| &mut g.encoder[li]);
            let (g_attn, g_ff) = match gl {
                Some(l) => (Some(&mut l.attn), Some(&mut l.ff)),
                None => (None, None),
            };
            let d_b = feedforward_bwd(&layer.ff, &cache.ff, &d_x, g_ff);
            d_x.add_assign(&layer_norm_bwd(&d_b, &cache.ln2));
            let (d_a_q, d_a_kv) = attention_bwd(&layer.attn, &cache.attn, &d_x, nh, g_attn);
            let mut d_a = d_a_q;
            d_a.add_assign(&d_a_kv);
            d_x.add_assign(&layer_norm_bwd(&d_a, &cache.ln1));
        }
        let d_enc_embed = d_x;

        // Scatter position gradients into shared embedding rows.
        if let Some(g) = gp.as_mut() {
            for (pos, &t) in enc_ids.iter().enumerate() {
                let src = d_enc_embed.row(pos);
                let dst = g.embedding.row_mut(t.idx());
                for j in 0..src.len() {
                    dst[j] += src[j];
                }
            }
            for (pos, &t) in dec_in.iter().enumerate() {
                let src = d_dec_embed.row(pos);
                let dst = g.embedding.row_mut(t.idx());
                for j in 0..src.len() {
                    dst[j] += src[j];
                }
            }
        }

        Gradients { d_enc_embed, params: gp, loss }
    }
}

/// Encoder-side decode cache for beam search.
pub(crate) struct DecodeSession<'m> {
    model: &'m FrozenSeq2Seq,
    enc_out: Matrix,
    cross_kv: Vec<(Matrix, Matrix)>,
}

impl DecodeSession<'_> {
    /// Log-probabilities of the next token after `generated`.
    pub(crate) fn next_log_probs(&self, generated: &[TokenId]) -> Result<Vec<f64>> {
        let net = self.model.network();
        let mut dec_in = Vec::with_capacity(generated.len() + 1);
        dec_in.push(PAD);
        dec_in.extend_from_slice(generated);
        net.check_ids(&dec_in, "decoder prefix")?;
        let (logits, _) = net.decoder_forward(&dec_in, &self.enc_out, Some(&self.cross_kv), true);
        let row = logits.row(0);
        let lse = log_sum_exp(row);
        Ok(row.iter().map(|&z| z - lse).collect())
    }
}

// ---- building blocks ----

pub(crate) struct LnCache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
}

pub(crate) fn layer_norm(x: &Matrix) -> (Matrix, LnCache) {
    let (rows, cols) = (x.rows(), x.cols());
    let mut y = Matrix::zeros(rows, cols);
    let mut inv_std = Vec::with_capacity(rows);
    for i in 0..rows {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_std.push(inv);
        let out = y.row_mut(i);
        for j in 0..cols {
            out[j] = (row[j] - mean) * inv;
        }
    }
    let cache = LnCache { x_hat: y.clone(), inv_std };
    (y, cache)
}

pub(crate) fn layer_norm_bwd(dy: &Matrix, cache: &LnCache) -> Matrix {
    let (rows, cols) = (dy.rows(), dy.cols());
    let mut dx = Matrix::zeros(rows, cols);
    let n = cols as f64;
    for i in 0..rows {
        let dy_row = dy.row(i);
        let xh = cache.x_hat.row(i);
        let m1 = dy_row.iter().sum::<f64>() / n;
        let m2 = dy_row.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n;
        let inv = cache.inv_std[i];
        let out = dx.row_mut(i);
        for j in 0..cols {
            out[j] = inv * (dy_row[j] - m1 - xh[j] * m2);
        }
    }
    dx
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) struct FfCache {
    x_in: Matrix,
    pre: Matrix,
    act: Matrix,
}

fn feedforward(p: &FfParams, x_in: &Matrix) -> (Matrix, FfCache) {
    let mut pre = x_in.matmul(&p.w1);
    pre.add_bias(&p.b1);
    let mut act = pre.clone();
    for v in act.data_mut() {
        *v = gelu(*v);
    }
    let mut out = act.matmul(&p.w2);
    out.add_bias(&p.b2);
    (out, FfCache { x_in: x_in.clone(), pre, act })
}

fn feedforward_bwd(
    p: &FfParams,
    cache: &FfCache,
    d_out: &Matrix,
    grads: Option<&mut FfParams>,
) -> Matrix {
    let d_act = d_out.matmul_bt(&p.w2);
    let mut d_pre = d_act;
    for (dp, x) in d_pre.data_mut().iter_mut().zip(cache.pre.data()) {
        *dp *= gelu_grad(*x);
    }
    if let Some(g) = grads {
        g.w2.add_assign(&cache.act.matmul_at(d_out));
        g.b2.add_assign(&d_out.column_sums());
        g.w1.add_assign(&cache.x_in.matmul_at(&d_pre));
        g.b1.add_assign(&d_pre.column_sums());
    }
    d_pre.matmul_bt(&p.w1)
}

pub(crate) struct AttnCache {
    q_in: Matrix,
    kv_in: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Per head, the post-softmax attention matrix (masked entries are zero).
    probs: Vec<Matrix>,
    concat: Matrix,
}

fn attention(
    p: &AttnParams,
    q_in: &Matrix,
    kv_in: &Matrix,
    causal: bool,
    nh: usize,
) -> (Matrix, AttnCache) {
    let mut k = kv_in.matmul(&p.wk);
    k.add_bias(&p.bk);
    let mut v = kv_in.matmul(&p.wv);
    v.add_bias(&p.bv);
    attention_core(p, q_in, kv_in, k, v, causal, nh)
}

fn attention_with_kv(
    p: &AttnParams,
    q_in: &Matrix,
    kv_in: &Matrix,
    k: Matrix,
    v: Matrix,
    nh: usize,
) -> (Matrix, AttnCache) {
    attention_core(p, q_in, kv_in, k, v, false, nh)
}

// Indexed loops over `row[..allowed]` keep the causal-prefix bound visible.
#[allow(clippy::needless_range_loop)]
fn attention_core(
    p: &AttnParams,
    q_in: &Matrix,
    kv_in: &Matrix,
    k: Matrix,
    v: Matrix,
    causal: bool,
    nh: usize,
) -> (Matrix, AttnCache) {
    let d = q_in.cols();
    let dh = d / nh;
    let scale = 1.0 / (dh as f64).sqrt();
    let (lq, lk) = (q_in.rows(), k.rows());

    let mut q = q_in.matmul(&p.wq);
    q.add_bias(&p.bq);

    let mut probs = Vec::with_capacity(nh);
    let mut concat = Matrix::zeros(lq, d);
    for h in 0..nh {
        let c0 = h * dh;
        let mut pm = Matrix::zeros(lq, lk);
        for i in 0..lq {
            let allowed = if causal { i + 1 } else { lk };
            let qi = &q.row(i)[c0..c0 + dh];
            // scores, then a numerically stable softmax over allowed keys
            let mut max = f64::NEG_INFINITY;
            let row = pm.row_mut(i);
            for j in 0..allowed {
                let kj = &k.row(j)[c0..c0 + dh];
                let mut s = 0.0;
                for t in 0..dh {
                    s += qi[t] * kj[t];
                }
                let s = s * scale;
                row[j] = s;
                if s > max {
                    max = s;
                }
            }
            let mut sum = 0.0;
            for j in 0..allowed {
                row[j] = (row[j] - max).exp();
                sum += row[j];
            }
            for j in 0..allowed {
                row[j] /= sum;
            }
        }
        for i in 0..lq {
            let pr = pm.row(i);
            let out = &mut concat.row_mut(i)[c0..c0 + dh];
            for j in 0..lk {
                let pij = pr[j];
                if pij == 0.0 {
                    continue;
                }
                let vj = &v.row(j)[c0..c0 + dh];
                for t in 0..dh {
                    out[t] += pij * vj[t];
                }
            }
        }
        probs.push(pm);
    }

    let mut out = concat.matmul(&p.wo);
    out.add_bias(&p.bo);
    let cache = AttnCache {
        q_in: q_in.clone(),
        kv_in: kv_in.clone(),
        q,
        k,
        v,
        probs,
        concat,
    };
    (out, cache)
}

/// Returns gradients with respect to the query-side input and the
/// key/value-side input. For self-attention the caller adds them.
fn attention_bwd(
    p: &AttnParams,
    cache: &AttnCache,
    d_out: &Matrix,
    nh: usize,
    grads: Option<&mut AttnParams>,
) -> (Matrix, Matrix) {
    let d = cache.q.cols();
    let dh = d / nh;
    let scale = 1.0 / (dh as f64).sqrt();
    let (lq, lk) = (cache.q.rows(), cache.k.rows());

    let d_concat = d_out.matmul_bt(&p.wo);
    let mut dq = Matrix::zeros(lq, d);
    let mut dk = Matrix::zeros(lk, d);
    let mut dv = Matrix::zeros(lk, d);

    for h in 0..nh {
        let c0 = h * dh;
        let pm = &cache.probs[h];
        for i in 0..lq {
            let pr = pm.row(i);
            let dci = &d_concat.row(i)[c0..c0 + dh];
            // dP and dV for this query row
            let mut dp = vec![0.0; lk];
            for j in 0..lk {
                let pij = pr[j];
                let vj = &cache.v.row(j)[c0..c0 + dh];
                let mut s = 0.0;
                for t in 0..dh {
                    s += dci[t] * vj[t];
                }
                dp[j] = s;
                if pij != 0.0 {
                    let dvj = &mut dv.row_mut(j)[c0..c0 + dh];
                    for t in 0..dh {
                        dvj[t] += pij * dci[t];
                    }
                }
            }
            // softmax backward: dS = P .* (dP - sum(dP .* P))
            let row_dot: f64 = dp.iter().zip(pr).map(|(a, b)| a * b).sum();
            let dqi = &mut dq.row_mut(i)[c0..c0 + dh];
            for j in 0..lk {
                let ds = pr[j] * (dp[j] - row_dot);
                if ds == 0.0 {
                    continue;
                }
                let ds = ds * scale;
                let kj = &cache.k.row(j)[c0..c0 + dh];
                for t in 0..dh {
                    dqi[t] += ds * kj[t];
                }
                let qi = &cache.q.row(i)[c0..c0 + dh];
                let dkj = &mut dk.row_mut(j)[c0..c0 + dh];
                for t in 0..dh {
                    dkj[t] += ds * qi[t];
                }
            }
        }
    }

    if let Some(g) = grads {
        g.wo.add_assign(&cache.concat.matmul_at(d_out));
        g.bo.add_assign(&d_out.column_sums());
        g.wq.add_assign(&cache.q_in.matmul_at(&dq));
        g.bq.add_assign(&dq.column_sums());
        g.wk.add_assign(&cache.kv_in.matmul_at(&dk));
        g.bk.add_assign(&dk.column_sums());
        g.wv.add_assign(&cache.kv_in.matmul_at(&dv));
        g.bv.add_assign(&dv.column_sums());
    }

    let d_q_in = dq.matmul_bt(&p.wq);
    let mut d_kv_in = dk.matmul_bt(&p.wk);
    d_kv_in.add_assign(&dv.matmul_bt(&p.wv));
    (d_q_in, d_kv_in)
}

pub(crate) struct EncLayerCache {
    ln1: LnCache,
    attn: AttnCache,
    ln2: LnCache,
    ff: FfCache,
}

pub(crate) struct EncForwardCache {
    layers: Vec<EncLayerCache>,
    ln_final: LnCache,
}

pub(crate) struct DecLayerCache {
    ln1: LnCache,
    self_attn: AttnCache,
    ln2: LnCache,
    cross_attn: AttnCache,
    ln3: LnCache,
    ff: FfCache,
}

pub(crate) struct DecForwardCache {
    layers: Vec<DecLayerCache>,
    ln_final: LnCache,
    dec_out: Matrix,
}

pub(crate) fn positional_encoding(max_len: usize, d: usize) -> Matrix {
    Matrix::from_fn(max_len, d, |pos, j| {
        let i = (j - j % 2) as f64;
        let angle = pos as f64 / 10000f64.powf(i / d as f64);
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

pub(crate) fn loss_from_logits(logits: &Matrix, targets: &[TokenId]) -> f64 {
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        loss += log_sum_exp(row) - row[t.idx()];
    }
    loss
}

fn dlogits(logits: &Matrix, targets: &[TokenId]) -> Matrix {
    let mut d = Matrix::zeros(logits.rows(), logits.cols());
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        let lse = log_sum_exp(row);
        let out = d.row_mut(i);
        for j in 0..row.len() {
            out[j] = (row[j] - lse).exp();
        }
        out[t.idx()] -= 1.0;
    }
    d
}

/// 64-bit FNV-1a, used for parameter and file checksums.
pub(crate) struct Fnv64 {
    state: u64,
}

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Fnv64 { state: 0xcbf2_9ce4_8422_2325 }
    }

    pub(crate) fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= b as u64;
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.state
    }
}
