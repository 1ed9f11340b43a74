use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One attention block: projection weights are `d×d`, biases `1×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnParams {
    pub wq: Matrix,
    pub bq: Matrix,
    pub wk: Matrix,
    pub bk: Matrix,
    pub wv: Matrix,
    pub bv: Matrix,
    pub wo: Matrix,
    pub bo: Matrix,
}

/// One feedforward block: `w1` is `d×f`, `w2` is `f×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FfParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayerParams {
    pub attn: AttnParams,
    pub ff: FfParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayerParams {
    pub self_attn: AttnParams,
    pub cross_attn: AttnParams,
    pub ff: FfParams,
}

/// Every learned tensor of the backbone. The embedding table is shared by
/// the encoder and decoder inputs; the output projection is separate.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub embedding: Matrix,
    pub encoder: Vec<EncoderLayerParams>,
    pub decoder: Vec<DecoderLayerParams>,
    pub output: Matrix,
}

fn zero_attn(d: usize) -> AttnParams {
    AttnParams {
        wq: Matrix::zeros(d, d),
        bq: Matrix::zeros(1, d),
        wk: Matrix::zeros(d, d),
        bk: Matrix::zeros(1, d),
        wv: Matrix::zeros(d, d),
        bv: Matrix::zeros(1, d),
        wo: Matrix::zeros(d, d),
        bo: Matrix::zeros(1, d),
    }
}

fn zero_ff(d: usize, f: usize) -> FfParams {
    FfParams {
        w1: Matrix::zeros(d, f),
        b1: Matrix::zeros(1, f),
        w2: Matrix::zeros(f, d),
        b2: Matrix::zeros(1, d),
    }
}

impl Parameters {
    /// All tensors zero. Also serves as the gradient accumulator shape.
    pub fn zeros(config: &ModelConfig) -> Parameters {
        let d = config.embed_dim;
        let f = config.feedforward_dim;
        Parameters {
            embedding: Matrix::zeros(config.vocab_size, d),
            encoder: (0..config.num_encoder_layers)
                .map(|_| EncoderLayerParams { attn: zero_attn(d), ff: zero_ff(d, f) })
                .collect(),
            decoder: (0..config.num_decoder_layers)
                .map(|_| DecoderLayerParams {
                    self_attn: zero_attn(d),
                    cross_attn: zero_attn(d),
                    ff: zero_ff(d, f),
                })
                .collect(),
            output: Matrix::zeros(d, config.vocab_size),
        }
    }

    /// Seeded random initialization: embedding rows are standard normal so
    /// token identity is not drowned out by the positional encoding,
    /// projection matrices are Xavier-uniform, biases are zero. Tensors are
    /// filled in declared order, so a seed pins every weight.
    pub fn init(config: &ModelConfig) -> Parameters {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let mut params = Parameters::zeros(config);
        for (i, t) in params.tensors_mut().into_iter().enumerate() {
            let (rows, cols) = (t.rows(), t.cols());
            if i == 0 {
                for x in t.data_mut() {
                    *x = normal(&mut rng);
                }
            } else if rows > 1 {
                let limit = (6.0 / (rows + cols) as f64).sqrt();
                for x in t.data_mut() {
                    *x = rng.gen_range(-limit..limit);
                }
            }
        }
        params
    }

    /// Tensors in declared order: embedding, encoder layers (attention then
    /// feedforward), decoder layers (self-attention, cross-attention,
    /// feedforward), output projection. Weight I/O, checksums, and the
    /// optimizer all iterate in this order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = vec![&self.embedding];
        for l in &self.encoder {
            out.extend(attn_tensors(&l.attn));
            out.extend(ff_tensors(&l.ff));
        }
        for l in &self.decoder {
            out.extend(attn_tensors(&l.self_attn));
            out.extend(attn_tensors(&l.cross_attn));
            out.extend(ff_tensors(&l.ff));
        }
        out.push(&self.output);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = vec![&mut self.embedding];
        for l in &mut self.encoder {
            out.extend(attn_tensors_mut(&mut l.attn));
            out.extend(ff_tensors_mut(&mut l.ff));
        }
        for l in &mut self.decoder {
            out.extend(attn_tensors_mut(&mut l.self_attn));
            out.extend(attn_tensors_mut(&mut l.cross_attn));
            out.extend(ff_tensors_mut(&mut l.ff));
        }
        out.push(&mut self.output);
        out
    }

    /// self += other, tensor by tensor. Used to accumulate gradients.
    pub fn add_assign(&mut self, other: &Parameters) {
        let other_tensors = other.tensors();
        for (t, o) in self.tensors_mut().into_iter().zip(other_tensors) {
            t.add_assign(o);
        }
    }

    /// Multiplies every tensor by `s`.
    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.data_mut() {
                *v *= s;
            }
        }
    }

    /// Verifies that every tensor has the shape implied by `config` and that
    /// all values are finite.
    pub fn validate_for(&self, config: &ModelConfig) -> Result<()> {
        let expected = Parameters::zeros(config);
        let got = self.tensors();
        let want = expected.tensors();
        if got.len() != want.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} tensors, found {}",
                want.len(),
                got.len()
            )));
        }
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            if (g.rows(), g.cols()) != (w.rows(), w.cols()) {
                return Err(Error::InvalidConfig(format!(
                    "tensor {i} has shape {}x{}, expected {}x{}",
                    g.rows(),
                    g.cols(),
                    w.rows(),
                    w.cols()
                )));
            }
            if !g.is_finite() {
                return Err(Error::InvalidConfig(format!("tensor {i} contains non-finite values")));
            }
        }
        Ok(())
    }
}

fn attn_tensors(a: &AttnParams) -> Vec<&Matrix> {
    vec![&a.wq, &a.bq, &a.wk, &a.bk, &a.wv, &a.bv, &a.wo, &a.bo]
}

fn attn_tensors_mut(a: &mut AttnParams) -> Vec<&mut Matrix> {
    vec![
        &mut a.wq, &mut a.bq, &mut a.wk, &mut a.bk, &mut a.wv, &mut a.bv, &mut a.wo, &mut a.bo,
    ]
}

fn ff_tensors(f: &FfParams) -> Vec<&Matrix> {
    vec![&f.w1, &f.b1, &f.w2, &f.b2]
}

fn ff_tensors_mut(f: &mut FfParams) -> Vec<&mut Matrix> {
    vec![&mut f.w1, &mut f.b1, &mut f.w2, &mut f.b2]
}

/// Standard normal draw via Box-Muller, deterministic given the RNG state.
fn normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
