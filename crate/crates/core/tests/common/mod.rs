//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use citecast::linalg::Rng;
use citecast::model::{
    self, decode_train, encode, init_model, ModelConfig, Params, Sample, Seq2SeqModel,
};
use citecast::par::Execution;

/// Mean batch loss via the forward pass only.
pub fn batch_loss(model: &Seq2SeqModel, batch: &[Sample]) -> f64 {
    batch
        .iter()
        .map(|s| {
            let h = encode(model, &s.inputs).unwrap();
            let y = decode_train(model, &h, &s.teacher_inputs).unwrap();
            model::loss(&y, &s.targets).unwrap()
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Central finite differences of `batch_loss` for every parameter.
pub fn numeric_gradient(model: &Seq2SeqModel, batch: &[Sample], eps: f64) -> Params {
    let mut grad = Params::zeros(model.config.hidden_dim);
    let mut probe = model.clone();
    for t in 0..8 {
        let len = model.params.tensors()[t].len();
        for i in 0..len {
            let orig = model.params.tensors()[t].as_slice()[i];
            probe.params.tensors_mut()[t].as_mut_slice()[i] = orig + eps;
            let up = batch_loss(&probe, batch);
            probe.params.tensors_mut()[t].as_mut_slice()[i] = orig - eps;
            let down = batch_loss(&probe, batch);
            probe.params.tensors_mut()[t].as_mut_slice()[i] = orig;
            grad.tensors_mut()[t].as_mut_slice()[i] = (up - down) / (2.0 * eps);
        }
    }
    grad
}

/// Largest `|a - b| / max(|a|, |b|)` over all entries; entries where both
/// are exactly zero count as agreement.
pub fn max_relative_error(analytic: &Params, numeric: &Params) -> f64 {
    analytic
        .tensors()
        .iter()
        .zip(numeric.tensors())
        .flat_map(|(a, n)| a.as_slice().iter().zip(n.as_slice()))
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// A random tiny configuration (H in {4, 8}, k in {1, 2}, n in {3, 5}) with
/// `batch` random sequences.
pub fn random_problem(seed: u64, batch: usize) -> (Seq2SeqModel, Vec<Sample>) {
    let mut r = Rng::new(seed);
    let hidden = [4, 8][r.below(2)];
    let k = 1 + r.below(2);
    let n = [3, 5][r.below(2)];
    let config = ModelConfig {
        hidden_dim: hidden,
        dropout_rate: 0.0,
        seed,
        ..ModelConfig::new(k, n)
    };
    let mut m = init_model(&config, &mut r).unwrap();
    // Nudge biases off zero, and keep the output head live: hidden states
    // are non-negative, so a non-negative W_out can never silence every
    // output and leave the check with nothing to compare.
    for b in [&mut m.params.encoder.bias, &mut m.params.decoder.bias] {
        b.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = 0.2 * r.next_f64() - 0.05);
    }
    m.params.head.bias.as_mut_slice()[0] = 0.1;
    m.params
        .head
        .w_out
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = v.abs());
    let samples = (0..batch)
        .map(|_| {
            let c: Vec<f64> = (0..=n).map(|_| r.below(12) as f64).collect();
            Sample {
                inputs: c[..=k].to_vec(),
                teacher_inputs: c[k..n].to_vec(),
                targets: c[k + 1..=n].to_vec(),
            }
        })
        .collect();
    (m, samples)
}

pub fn analytic_gradient(model: &Seq2SeqModel, batch: &[Sample]) -> (f64, Params) {
    let refs: Vec<&Sample> = batch.iter().collect();
    model::backward(model, &refs, None, Execution::Sequential).unwrap()
}
