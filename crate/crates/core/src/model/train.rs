//! Gradient-descent training of the backbone before it is frozen.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::params::Parameters;
use super::transformer::{decoder_input, positional_encoding, FrozenSeq2Seq, Network};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::vocab::TokenId;

const BATCH: usize = 16;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Mean teacher-forced loss per epoch, in order.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Trains a fresh seeded model on `(input, target)` token pairs by
/// minibatch Adam on the teacher-forced negative log-likelihood, then
/// freezes it. `config.seed` pins the initial weights and `seed` pins the
/// shuffling order, so identical arguments give bitwise-identical models.
/// With `epochs == 0` the seeded initialization is returned unchanged.
pub fn train_backbone(
    pairs: &[(Vec<TokenId>, Vec<TokenId>)],
    config: &ModelConfig,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(FrozenSeq2Seq, TrainReport)> {
    config.validate()?;
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {learning_rate} must be positive and finite"
        )));
    }
    let mut params = Parameters::init(config);
    let pe = positional_encoding(config.max_seq_len, config.embed_dim);
    {
        let net = Network { config, params: &params, pe: &pe };
        for (input, target) in pairs {
            net.check_ids(input, "input")?;
            net.check_ids(target, "target")?;
        }
    }
    if epochs > 0 && pairs.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut moments: Vec<(Matrix, Matrix)> = Parameters::zeros(config)
        .tensors()
        .iter()
        .map(|t| (Matrix::zeros(t.rows(), t.cols()), Matrix::zeros(t.rows(), t.cols())))
        .collect();
    let mut step = 0u32;
    let mut epoch_losses = Vec::with_capacity(epochs);

    for epoch in 1..=epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(BATCH) {
            let mut grads = Parameters::zeros(config);
            for &idx in batch {
                let (input, target) = &pairs[idx];
                let net = Network { config, params: &params, pe: &pe };
                let dec_in = decoder_input(target);
                let result = net.forward_backward(input, &dec_in, target, true);
                epoch_loss += result.loss;
                grads.add_assign(&result.params.expect("parameter gradients requested"));
            }
            grads.scale(1.0 / batch.len() as f64);
            step += 1;
            adam_step(&mut params, &grads, &mut moments, learning_rate, step);
        }
        let mean_loss = epoch_loss / pairs.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        epoch_losses.push(mean_loss);
    }

    let model = FrozenSeq2Seq::from_parameters(config.clone(), params)?;
    Ok((model, TrainReport { epoch_losses }))
}

fn adam_step(
    params: &mut Parameters,
    grads: &Parameters,
    moments: &mut [(Matrix, Matrix)],
    lr: f64,
    step: u32,
) {
    let bc1 = 1.0 - BETA1.powi(step as i32);
    let bc2 = 1.0 - BETA2.powi(step as i32);
    let grad_tensors = grads.tensors();
    for ((t, g), (m, v)) in params.tensors_mut().into_iter().zip(grad_tensors).zip(moments.iter_mut()) {
        let td = t.data_mut();
        let gd = g.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..td.len() {
            md[i] = BETA1 * md[i] + (1.0 - BETA1) * gd[i];
            vd[i] = BETA2 * vd[i] + (1.0 - BETA2) * gd[i] * gd[i];
            let m_hat = md[i] / bc1;
            let v_hat = vd[i] / bc2;
            td[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}
