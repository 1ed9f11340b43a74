//! Independent forward-pass oracle.
//!
//! Reimplements the whole architecture from its written definition with plain
//! nested vectors and scalar loops, sharing nothing with the crate's linear
//! algebra, then checks the teacher-forced loss to 1e-10. Agreement means the
//! production forward computes the intended architecture, not merely
//! something self-consistent.

use promptforge_core::linalg::Matrix;
use promptforge_core::{FrozenSeq2Seq, ModelConfig, TokenId, TokenSequence, PAD};

type Rows = Vec<Vec<f64>>;

// Index arithmetic on purpose: the oracle must not share the library's
// iteration helpers.
#[allow(clippy::needless_range_loop)]
fn matvec(x: &Rows, w: &Matrix) -> Rows {
    let (rows, inner, cols) = (x.len(), w.rows(), w.cols());
    let mut out = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        assert_eq!(x[i].len(), inner);
        for j in 0..cols {
            let mut s = 0.0;
            for k in 0..inner {
                s += x[i][k] * w.get(k, j);
            }
            out[i][j] = s;
        }
    }
    out
}

fn add_bias(x: &mut Rows, b: &Matrix) {
    for row in x.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v += b.get(0, j);
        }
    }
}

fn add(x: &Rows, y: &Rows) -> Rows {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect())
        .collect()
}

/// Parameterless layer norm: per-row mean and biased variance, eps 1e-6.
fn layer_norm(x: &Rows) -> Rows {
    x.iter()
        .map(|row| {
            let d = row.len() as f64;
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + 1e-6).sqrt();
            row.iter().map(|v| (v - mean) * inv).collect()
        })
        .collect()
}

/// Tanh-form GELU.
fn gelu(x: f64) -> f64 {
    let c = 0.797_884_560_802_865_4;
    0.5 * x * (1.0 + (c * (x + 0.044_715 * x * x * x)).tanh())
}

fn feedforward(x: &Rows, p: &promptforge_core::FfParams) -> Rows {
    let mut h = matvec(x, &p.w1);
    add_bias(&mut h, &p.b1);
    for row in h.iter_mut() {
        for v in row.iter_mut() {
            *v = gelu(*v);
        }
    }
    let mut out = matvec(&h, &p.w2);
    add_bias(&mut out, &p.b2);
    out
}

/// Multi-head attention with per-head column blocks and 1/sqrt(head_dim)
/// scaling. `causal` masks scores to keys at or before the query position.
#[allow(clippy::needless_range_loop)]
fn attention(
    q_in: &Rows,
    kv_in: &Rows,
    p: &promptforge_core::AttnParams,
    heads: usize,
    causal: bool,
) -> Rows {
    let mut q = matvec(q_in, &p.wq);
    add_bias(&mut q, &p.bq);
    let mut k = matvec(kv_in, &p.wk);
    add_bias(&mut k, &p.bk);
    let mut v = matvec(kv_in, &p.wv);
    add_bias(&mut v, &p.bv);

    let d = q[0].len();
    let dh = d / heads;
    let nq = q.len();
    let nk = k.len();
    let mut concat = vec![vec![0.0; d]; nq];
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..nq {
            // Scores for query i against every visible key.
            let visible = if causal { i + 1 } else { nk };
            let mut scores = Vec::with_capacity(visible);
            for j in 0..visible {
                let mut s = 0.0;
                for c in cols.clone() {
                    s += q[i][c] * k[j][c];
                }
                scores.push(s / (dh as f64).sqrt());
            }
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for (j, e) in exps.iter().enumerate() {
                let w = e / z;
                for (ci, c) in cols.clone().enumerate() {
                    concat[i][h * dh + ci] += w * v[j][c];
                }
            }
        }
    }
    let mut out = matvec(&concat, &p.wo);
    add_bias(&mut out, &p.bo);
    out
}

/// Sinusoidal position row: even coordinates sine, odd cosine, with the
/// frequency exponent paired two-by-two.
fn position_row(pos: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let exp = (j - j % 2) as f64 / d as f64;
            let angle = pos as f64 / 10000f64.powf(exp);
            if j % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

fn embed(model: &FrozenSeq2Seq, ids: &[TokenId]) -> Rows {
    let d = model.config().embed_dim;
    ids.iter()
        .enumerate()
        .map(|(pos, t)| {
            let e = model.embedding_row(*t).unwrap();
            let pe = position_row(pos, d);
            e.iter().zip(pe).map(|(a, b)| a + b).collect()
        })
        .collect()
}

/// The whole model, end to end: pre-norm residual blocks, a final norm after
/// each stack, cross-attention reading the finished encoder output, logits
/// from a bias-free projection, and summed next-token negative log-likelihood.
fn oracle_loss(model: &FrozenSeq2Seq, input: &[TokenId], target: &[TokenId]) -> f64 {
    let params = model.parameters();
    let heads = model.config().num_heads;

    let mut x = embed(model, input);
    for layer in &params.encoder {
        let a = attention(&layer_norm(&x), &layer_norm(&x), &layer.attn, heads, false);
        x = add(&x, &a);
        let f = feedforward(&layer_norm(&x), &layer.ff);
        x = add(&x, &f);
    }
    let enc_out = layer_norm(&x);

    let mut dec_in = vec![PAD];
    dec_in.extend_from_slice(&target[..target.len() - 1]);
    let mut y = embed(model, &dec_in);
    for layer in &params.decoder {
        let a = attention(&layer_norm(&y), &layer_norm(&y), &layer.self_attn, heads, true);
        y = add(&y, &a);
        let c = attention(&layer_norm(&y), &enc_out, &layer.cross_attn, heads, false);
        y = add(&y, &c);
        let f = feedforward(&layer_norm(&y), &layer.ff);
        y = add(&y, &f);
    }
    let dec_out = layer_norm(&y);
    let logits = matvec(&dec_out, &params.output);

    let mut loss = 0.0;
    for (i, t) in target.iter().enumerate() {
        let row = &logits[i];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss -= row[t.idx()] - lse;
    }
    loss
}

fn check(config: ModelConfig, input_ids: Vec<u32>, target_ids: Vec<u32>) {
    let model = FrozenSeq2Seq::new(config).unwrap();
    let input: Vec<TokenId> = input_ids.into_iter().map(TokenId).collect();
    let target: Vec<TokenId> = target_ids.into_iter().map(TokenId).collect();
    let got = model.forward_loss(&TokenSequence::plain(input.clone()), &target).unwrap();
    let want = oracle_loss(&model, &input, &target);
    assert!(
        (got - want).abs() < 1e-10,
        "forward loss {got:.15} differs from oracle {want:.15}"
    );
}

#[test]
fn forward_loss_matches_oracle_on_multi_head_multi_layer_model() {
    let config = ModelConfig {
        vocab_size: 50,
        embed_dim: 12,
        num_encoder_layers: 2,
        num_decoder_layers: 2,
        num_heads: 3,
        feedforward_dim: 20,
        max_seq_len: 16,
        seed: 3,
    };
    check(config.clone(), vec![5, 9, 14, 30, 49, 9], vec![7, 7, 21, 44]);
    check(config.clone(), vec![48], vec![6]);
    check(config, (0..16).collect(), (10..20).collect());
}

#[test]
fn forward_loss_matches_oracle_with_odd_embedding_width() {
    // Odd width exercises the unpaired trailing sine in the position rows.
    let config = ModelConfig {
        vocab_size: 20,
        embed_dim: 5,
        num_encoder_layers: 1,
        num_decoder_layers: 3,
        num_heads: 1,
        feedforward_dim: 7,
        max_seq_len: 8,
        seed: 77,
    };
    check(config, vec![3, 3, 12, 19], vec![1, 18, 2]);
}
