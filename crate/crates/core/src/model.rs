//! The NNCP predictor: a simple-recurrent encoder/decoder with a dense output
//! head, ReLU everywhere, trained by backpropagation through time and RMSProp.
//!
//! Encoder, for `t = 0..=k` with `h_0 = 0`:
//!
//! ```text
//! h_{t+1} = relu(W_in c_t + W_rec h_t + b)
//! ```
//!
//! The decoder starts from the final encoder state and runs the same
//! recurrence with its own weights. Its input at step `t` is `c_{k+t}`
//! during training (teacher forcing) and its own previous output when
//! sampling; the first step always consumes the true `c_k`. Each decoder
//! state is mapped to a prediction by `ĉ = relu(W_out · s + b_out)`.
//!
//! Counts enter and leave the network unscaled.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{CitationRecord, Corpus};
use crate::error::{Error, Result};
use crate::linalg::{relu_scalar, sample_orthogonal, sample_uniform, Matrix, Rng};
use crate::par::Execution;

/// Papers per gradient work unit. Fixed so the floating-point summation
/// order does not depend on the number of threads.
const GRAD_CHUNK: usize = 16;

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4F50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Last known year; the encoder reads `c_0..=c_k`.
    pub k: usize,
    /// Horizon; the decoder emits `ĉ_{k+1}..=ĉ_n`.
    pub n: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// RMSProp decay.
    pub rho: f64,
    /// RMSProp denominator offset.
    pub epsilon: f64,
    /// Global gradient-norm clip, off by default.
    pub clip_norm: Option<f64>,
}

impl ModelConfig {
    pub fn new(k: usize, n: usize) -> Self {
        ModelConfig {
            k,
            n,
            hidden_dim: 512,
            dropout_rate: 0.2,
            epochs: 100,
            learning_rate: 1e-5,
            batch_size: 256,
            seed: 42,
            rho: 0.9,
            epsilon: 1e-8,
            clip_norm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Argument(m));
        if self.k >= self.n {
            return fail(format!("k = {} must be below n = {}", self.k, self.n));
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(format!("invalid learning rate {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.rho) || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return fail("RMSProp needs 0 <= rho < 1 and epsilon > 0".into());
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return fail(format!("clip norm {c} must be positive"));
            }
        }
        Ok(())
    }

    /// Decoder steps, `n - k`.
    pub fn output_len(&self) -> usize {
        self.n - self.k
    }
}

/// One simple-recurrent layer with scalar input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrentLayer {
    /// `1 x H`
    pub w_in: Matrix,
    /// `H x H`; row `i` feeds hidden unit `i`.
    pub w_rec: Matrix,
    /// `1 x H`
    pub bias: Matrix,
}

impl RecurrentLayer {
    fn zeros(h: usize) -> Self {
        RecurrentLayer {
            w_in: Matrix::zeros(1, h),
            w_rec: Matrix::zeros(h, h),
            bias: Matrix::zeros(1, h),
        }
    }

    fn hidden(&self) -> usize {
        self.bias.cols()
    }

    /// `relu(W_in x + W_rec h + b)` into `out`.
    #[inline]
    fn step(&self, x: f64, h: &[f64], out: &mut [f64]) {
        let w_in = self.w_in.as_slice();
        let b = self.bias.as_slice();
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.w_rec.row(i);
            let mut acc = b[i] + w_in[i] * x;
            for (w, hj) in row.iter().zip(h) {
                acc += w * hj;
            }
            *o = relu_scalar(acc);
        }
    }

    /// Backpropagates through one step. `d_out` is the gradient at the
    /// step's output `h_next`; gradients land in `grad`, and the gradient at
    /// the step's input state is written to `d_prev`.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn step_backward(
        &self,
        x: f64,
        h_prev: &[f64],
        h_next: &[f64],
        d_out: &[f64],
        grad: &mut RecurrentLayer,
        d_prev: &mut [f64],
        dz: &mut [f64],
    ) {
        for ((z, &d), &hn) in dz.iter_mut().zip(d_out).zip(h_next) {
            *z = if hn > 0.0 { d } else { 0.0 };
        }
        d_prev.iter_mut().for_each(|v| *v = 0.0);
        let h = self.hidden();
        let gw_in = grad.w_in.as_mut_slice();
        for i in 0..h {
            gw_in[i] += dz[i] * x;
        }
        let gb = grad.bias.as_mut_slice();
        for i in 0..h {
            gb[i] += dz[i];
        }
        let gw = grad.w_rec.as_mut_slice();
        for (i, &z) in dz.iter().enumerate() {
            if z == 0.0 {
                continue;
            }
            let g_row = &mut gw[i * h..(i + 1) * h];
            for (g, &hp) in g_row.iter_mut().zip(h_prev) {
                *g += z * hp;
            }
            for (dp, &w) in d_prev.iter_mut().zip(self.w_rec.row(i)) {
                *dp += z * w;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    /// `H x 1`
    pub w_out: Matrix,
    /// `1 x 1`
    pub bias: Matrix,
}

impl OutputHead {
    #[inline]
    fn pre_activation(&self, s: &[f64]) -> f64 {
        let mut acc = self.bias.as_slice()[0];
        for (w, v) in self.w_out.as_slice().iter().zip(s) {
            acc += w * v;
        }
        acc
    }

    #[inline]
    fn emit(&self, s: &[f64]) -> f64 {
        relu_scalar(self.pre_activation(s))
    }
}

/// All trainable tensors. Also used for gradients and optimizer accumulators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub encoder: RecurrentLayer,
    pub decoder: RecurrentLayer,
    pub head: OutputHead,
}

impl Params {
    pub fn zeros(hidden: usize) -> Self {
        Params {
            encoder: RecurrentLayer::zeros(hidden),
            decoder: RecurrentLayer::zeros(hidden),
            head: OutputHead {
                w_out: Matrix::zeros(hidden, 1),
                bias: Matrix::zeros(1, 1),
            },
        }
    }

    /// Tensors in checkpoint order.
    pub fn tensors(&self) -> [&Matrix; 8] {
        [
            &self.encoder.w_in,
            &self.encoder.w_rec,
            &self.encoder.bias,
            &self.decoder.w_in,
            &self.decoder.w_rec,
            &self.decoder.bias,
            &self.head.w_out,
            &self.head.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 8] {
        [
            &mut self.encoder.w_in,
            &mut self.encoder.w_rec,
            &mut self.encoder.bias,
            &mut self.decoder.w_in,
            &mut self.decoder.w_rec,
            &mut self.decoder.bias,
            &mut self.head.w_out,
            &mut self.head.bias,
        ]
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b).expect("parameter shapes agree");
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.scale(factor);
        }
    }

    fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.as_slice())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// `2 (H² + 2H) + H + 1`.
pub fn parameter_count(hidden: usize) -> usize {
    2 * (hidden * hidden + 2 * hidden) + hidden + 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub params: Params,
}

impl Seq2SeqModel {
    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden_dim
    }
}

/// Glorot-uniform input and output weights, orthogonal recurrent weights,
/// zero biases.
pub fn init_model(config: &ModelConfig, rng: &mut Rng) -> Result<Seq2SeqModel> {
    config.validate()?;
    let h = config.hidden_dim;
    let limit = (6.0 / (1 + h) as f64).sqrt();
    let layer = |rng: &mut Rng| -> Result<RecurrentLayer> {
        Ok(RecurrentLayer {
            w_in: sample_uniform(rng, -limit, limit, 1, h)?,
            w_rec: sample_orthogonal(rng, h),
            bias: Matrix::zeros(1, h),
        })
    };
    let encoder = layer(rng)?;
    let decoder = layer(rng)?;
    let head = OutputHead {
        w_out: sample_uniform(rng, -limit, limit, h, 1)?,
        bias: Matrix::zeros(1, 1),
    };
    Ok(Seq2SeqModel {
        config: config.clone(),
        params: Params {
            encoder,
            decoder,
            head,
        },
    })
}

fn check_counts(what: &str, xs: &[f64], len: usize) -> Result<()> {
    if xs.len() != len {
        return Err(Error::Shape(format!(
            "{what}: expected {len} values, got {}",
            xs.len()
        )));
    }
    if let Some(bad) = xs.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Argument(format!(
            "{what}: invalid citation count {bad}"
        )));
    }
    Ok(())
}

/// Runs the encoder over `c_0..=c_k` from a zero state and returns the final
/// hidden state.
pub fn encode(model: &Seq2SeqModel, inputs: &[f64]) -> Result<Vec<f64>> {
    check_counts("encoder inputs", inputs, model.config.k + 1)?;
    let h = model.hidden();
    let mut state = vec![0.0; h];
    let mut next = vec![0.0; h];
    for &x in inputs {
        model.params.encoder.step(x, &state, &mut next);
        std::mem::swap(&mut state, &mut next);
    }
    Ok(state)
}

/// Teacher-forced decoding: step `t` consumes the true `c_{k+t}`.
/// `teacher_inputs` is `c_k..=c_{n-1}`; returns `ĉ_{k+1}..=ĉ_n`.
pub fn decode_train(
    model: &Seq2SeqModel,
    encoder_state: &[f64],
    teacher_inputs: &[f64],
) -> Result<Vec<f64>> {
    check_counts("teacher inputs", teacher_inputs, model.config.output_len())?;
    check_state(model, encoder_state)?;
    let mut state = encoder_state.to_vec();
    let mut next = vec![0.0; state.len()];
    Ok(teacher_inputs
        .iter()
        .map(|&u| {
            model.params.decoder.step(u, &state, &mut next);
            std::mem::swap(&mut state, &mut next);
            model.params.head.emit(&state)
        })
        .collect())
}

/// Free-running decoding: the first step consumes `c_k`, later steps the
/// previous prediction.
pub fn decode_sample(model: &Seq2SeqModel, encoder_state: &[f64], c_k: f64) -> Result<Vec<f64>> {
    check_counts("c_k", &[c_k], 1)?;
    check_state(model, encoder_state)?;
    let mut state = encoder_state.to_vec();
    let mut next = vec![0.0; state.len()];
    let mut u = c_k;
    Ok((0..model.config.output_len())
        .map(|_| {
            model.params.decoder.step(u, &state, &mut next);
            std::mem::swap(&mut state, &mut next);
            u = model.params.head.emit(&state);
            u
        })
        .collect())
}

fn check_state(model: &Seq2SeqModel, state: &[f64]) -> Result<()> {
    if state.len() != model.hidden() {
        return Err(Error::Shape(format!(
            "hidden state has {} units, model has {}",
            state.len(),
            model.hidden()
        )));
    }
    Ok(())
}

/// Mean squared error.
pub fn loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "loss over {} predictions and {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sse / predictions.len() as f64)
}

/// One training sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `c_0..=c_k`
    pub inputs: Vec<f64>,
    /// `c_k..=c_{n-1}`
    pub teacher_inputs: Vec<f64>,
    /// `c_{k+1}..=c_n`
    pub targets: Vec<f64>,
}

impl Sample {
    pub fn from_record(record: &CitationRecord, k: usize, n: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::Argument(format!("k = {k} must be below n = {n}")));
        }
        if record.citations.len() < n + 1 {
            return Err(Error::Argument(format!(
                "paper {} has {} observed years, needs {}",
                record.paper_id,
                record.citations.len(),
                n + 1
            )));
        }
        let c: Vec<f64> = record.citations[..=n].iter().map(|&v| v as f64).collect();
        Ok(Sample {
            inputs: c[..=k].to_vec(),
            teacher_inputs: c[k..n].to_vec(),
            targets: c[k + 1..=n].to_vec(),
        })
    }

    fn check(&self, config: &ModelConfig) -> Result<()> {
        check_counts("encoder inputs", &self.inputs, config.k + 1)?;
        check_counts("teacher inputs", &self.teacher_inputs, config.output_len())?;
        check_counts("targets", &self.targets, config.output_len())
    }
}

/// Inverted-dropout multipliers on the encoder and decoder input
/// connections for one sequence. With scalar inputs a mask is one draw per
/// sequence, shared by every time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutMask {
    pub encoder: f64,
    pub decoder: f64,
}

impl DropoutMask {
    pub const NONE: DropoutMask = DropoutMask {
        encoder: 1.0,
        decoder: 1.0,
    };

    pub fn draw(rng: &mut Rng, rate: f64) -> Self {
        if rate == 0.0 {
            return DropoutMask::NONE;
        }
        let keep = 1.0 - rate;
        let mut one = || {
            if rng.next_f64() < keep {
                1.0 / keep
            } else {
                0.0
            }
        };
        DropoutMask {
            encoder: one(),
            decoder: one(),
        }
    }
}

/// Loss of one sample, accumulating the gradient of that loss into `grad`.
fn sample_backward(
    model: &Seq2SeqModel,
    sample: &Sample,
    mask: DropoutMask,
    grad: &mut Params,
) -> f64 {
    let p = &model.params;
    let h = model.hidden();
    let steps_in = sample.inputs.len();
    let steps_out = sample.targets.len();

    // Forward, keeping every state: enc[0] = 0, enc[t+1] after input t;
    // dec[0] = enc[last], dec[t+1] after decoder step t.
    let mut enc = vec![vec![0.0; h]; steps_in + 1];
    for t in 0..steps_in {
        let (prev, next) = enc.split_at_mut(t + 1);
        p.encoder
            .step(sample.inputs[t] * mask.encoder, &prev[t], &mut next[0]);
    }
    let mut dec = vec![vec![0.0; h]; steps_out + 1];
    dec[0].copy_from_slice(&enc[steps_in]);
    let mut outputs = Vec::with_capacity(steps_out);
    for t in 0..steps_out {
        let (prev, next) = dec.split_at_mut(t + 1);
        p.decoder.step(
            sample.teacher_inputs[t] * mask.decoder,
            &prev[t],
            &mut next[0],
        );
        outputs.push(p.head.pre_activation(&next[0]));
    }

    let m = steps_out as f64;
    let mut sse = 0.0;
    let mut d_state = vec![0.0; h];
    let mut d_prev = vec![0.0; h];
    let mut dz = vec![0.0; h];
    let w_out = p.head.w_out.as_slice();
    for t in (0..steps_out).rev() {
        let pre = outputs[t];
        let y = relu_scalar(pre);
        let resid = y - sample.targets[t];
        sse += resid * resid;
        let d_pre = if pre > 0.0 { 2.0 * resid / m } else { 0.0 };
        if d_pre != 0.0 {
            let s = &dec[t + 1];
            for (g, &v) in grad.head.w_out.as_mut_slice().iter_mut().zip(s) {
                *g += d_pre * v;
            }
            grad.head.bias.as_mut_slice()[0] += d_pre;
            for (d, &w) in d_state.iter_mut().zip(w_out) {
                *d += d_pre * w;
            }
        }
        p.decoder.step_backward(
            sample.teacher_inputs[t] * mask.decoder,
            &dec[t],
            &dec[t + 1],
            &d_state,
            &mut grad.decoder,
            &mut d_prev,
            &mut dz,
        );
        std::mem::swap(&mut d_state, &mut d_prev);
    }
    for t in (0..steps_in).rev() {
        p.encoder.step_backward(
            sample.inputs[t] * mask.encoder,
            &enc[t],
            &enc[t + 1],
            &d_state,
            &mut grad.encoder,
            &mut d_prev,
            &mut dz,
        );
        std::mem::swap(&mut d_state, &mut d_prev);
    }
    sse / m
}

/// Mean loss over `batch` and its exact gradient with respect to every
/// parameter. `masks`, when given, pairs one dropout mask with each sample.
pub fn backward(
    model: &Seq2SeqModel,
    batch: &[&Sample],
    masks: Option<&[DropoutMask]>,
    exec: Execution,
) -> Result<(f64, Params)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    if let Some(m) = masks {
        if m.len() != batch.len() {
            return Err(Error::Shape(format!(
                "{} masks for {} samples",
                m.len(),
                batch.len()
            )));
        }
    }
    for s in batch {
        s.check(&model.config)?;
    }
    let items: Vec<(&Sample, DropoutMask)> = batch
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, masks.map_or(DropoutMask::NONE, |m| m[i])))
        .collect();
    let hidden = model.hidden();
    let (loss_sum, mut grad) = exec
        .map_chunks_reduce(
            &items,
            GRAD_CHUNK,
            |chunk| {
                let mut g = Params::zeros(hidden);
                let mut l = 0.0;
                for (s, mask) in chunk {
                    l += sample_backward(model, s, *mask, &mut g);
                }
                (l, g)
            },
            |(la, mut ga), (lb, gb)| {
                ga.add_assign(&gb);
                (la + lb, ga)
            },
        )
        .expect("non-empty batch");
    let b = batch.len() as f64;
    grad.scale(1.0 / b);
    Ok((loss_sum / b, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Running mean of squared gradients, one entry per parameter.
    pub accumulators: Params,
    pub rho: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(model: &Seq2SeqModel) -> Self {
        OptimizerState {
            accumulators: Params::zeros(model.hidden()),
            rho: model.config.rho,
            epsilon: model.config.epsilon,
        }
    }
}

/// `a <- rho a + (1 - rho) g²;  w <- w - lr g / (sqrt(a) + eps)`
pub fn rmsprop_step(
    params: &mut Params,
    grad: &Params,
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    let (rho, eps) = (state.rho, state.epsilon);
    for ((w, g), a) in params
        .tensors_mut()
        .into_iter()
        .zip(grad.tensors())
        .zip(state.accumulators.tensors_mut())
    {
        if w.shape() != g.shape() || w.shape() != a.shape() {
            return Err(Error::Shape(format!(
                "parameter {:?}, gradient {:?}, accumulator {:?}",
                w.shape(),
                g.shape(),
                a.shape()
            )));
        }
        for ((wi, &gi), ai) in w
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(a.as_mut_slice())
        {
            *ai = rho * *ai + (1.0 - rho) * gi * gi;
            *wi -= lr * gi / (ai.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: Seq2SeqModel,
    /// Mean training loss of each epoch, dropout active.
    pub epoch_losses: Vec<f64>,
}

pub fn train(config: &ModelConfig, corpus: &Corpus) -> Result<TrainOutput> {
    train_with(config, corpus, Execution::default(), |_, _| {})
}

/// Trains from `init_model(config, Rng::new(config.seed))`. Papers are
/// reshuffled every epoch; batches are consecutive slices of the shuffled
/// order, the last one possibly short. `on_epoch` sees `(epoch, mean loss)`.
pub fn train_with(
    config: &ModelConfig,
    corpus: &Corpus,
    exec: Execution,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutput> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Argument("cannot train on an empty corpus".into()));
    }
    let samples = corpus
        .records()
        .iter()
        .map(|r| Sample::from_record(r, config.k, config.n))
        .collect::<Result<Vec<_>>>()?;

    let mut model = init_model(config, &mut Rng::new(config.seed))?;
    let mut opt = OptimizerState::new(&model);
    let mut shuffle_rng = Rng::derive(config.seed, &[SHUFFLE_STREAM]);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = batch_idx.iter().map(|&i| &samples[i]).collect();
            let masks: Vec<DropoutMask> = batch_idx
                .iter()
                .map(|&i| {
                    let mut r = Rng::derive(config.seed, &[DROPOUT_STREAM, epoch as u64, i as u64]);
                    DropoutMask::draw(&mut r, config.dropout_rate)
                })
                .collect();
            let (batch_loss, mut grad) = backward(&model, &batch, Some(&masks), exec)?;
            if let Some(max) = config.clip_norm {
                let norm = grad.norm();
                if norm > max {
                    grad.scale(max / norm);
                }
            }
            rmsprop_step(&mut model.params, &grad, &mut opt, config.learning_rate)?;
            loss_sum += batch_loss * batch.len() as f64;
        }
        let epoch_loss = loss_sum / samples.len() as f64;
        if !epoch_loss.is_finite() || !model.params.is_finite() {
            return Err(Error::Validation(format!(
                "training diverged at epoch {epoch} (loss {epoch_loss})"
            )));
        }
        epoch_losses.push(epoch_loss);
        on_epoch(epoch, epoch_loss);
    }
    Ok(TrainOutput {
        model,
        epoch_losses,
    })
}

/// A paper's predicted yearly citations `ĉ_{first_year}..` and their total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub paper_id: String,
    /// Post-publication year of `yearly[0]`, normally `k + 1`.
    pub first_year: usize,
    pub yearly: Vec<f64>,
    /// Sum of `yearly`.
    pub total: f64,
}

impl PredictionResult {
    pub fn new(paper_id: &str, first_year: usize, yearly: Vec<f64>) -> Self {
        let total = yearly.iter().sum();
        PredictionResult {
            paper_id: paper_id.to_string(),
            first_year,
            yearly,
            total,
        }
    }
}

/// Encodes `c_0..=c_k` and decodes freely. Dropout is never applied here.
pub fn predict(
    model: &Seq2SeqModel,
    record: &CitationRecord,
    k: usize,
) -> Result<PredictionResult> {
    if k != model.config.k {
        return Err(Error::Argument(format!(
            "model was trained for k = {}, asked for k = {k}",
            model.config.k
        )));
    }
    if record.citations.len() < k + 1 {
        return Err(Error::Argument(format!(
            "paper {} has {} observed years, needs {}",
            record.paper_id,
            record.citations.len(),
            k + 1
        )));
    }
    let inputs = record.early(k);
    let state = encode(model, &inputs)?;
    let yearly = decode_sample(model, &state, inputs[k])?;
    Ok(PredictionResult::new(&record.paper_id, k + 1, yearly))
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CITECAST";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint layout, all little-endian:
///
/// ```text
/// magic "CITECAST" | u32 version
/// u64 k | u64 n | u64 hidden | f64 dropout | u64 epochs | f64 lr
/// u64 batch | u64 seed | f64 rho | f64 epsilon | u8 has_clip | f64 clip
/// u32 tensor count, then per tensor: u64 rows | u64 cols | f64 data[rows*cols]
/// ```
///
/// Tensors follow [`Params::tensors`] order. Floats are stored as raw bits,
/// so a round trip is exact.
pub fn write_checkpoint<W: Write>(mut w: W, model: &Seq2SeqModel) -> std::io::Result<()> {
    let c = &model.config;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for v in [c.k, c.n, c.hidden_dim] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&c.dropout_rate.to_le_bytes())?;
    w.write_all(&(c.epochs as u64).to_le_bytes())?;
    w.write_all(&c.learning_rate.to_le_bytes())?;
    w.write_all(&(c.batch_size as u64).to_le_bytes())?;
    w.write_all(&c.seed.to_le_bytes())?;
    w.write_all(&c.rho.to_le_bytes())?;
    w.write_all(&c.epsilon.to_le_bytes())?;
    w.write_all(&[c.clip_norm.is_some() as u8])?;
    w.write_all(&c.clip_norm.unwrap_or(0.0).to_le_bytes())?;
    let tensors = model.params.tensors();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.rows() as u64).to_le_bytes())?;
        w.write_all(&(t.cols() as u64).to_le_bytes())?;
        for v in t.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Seq2SeqModel> {
    let mut r = Reader { inner: r };
    if &r.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a citecast checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.bytes()?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let config = ModelConfig {
        k: r.usize()?,
        n: r.usize()?,
        hidden_dim: r.usize()?,
        dropout_rate: r.f64()?,
        epochs: r.usize()?,
        learning_rate: r.f64()?,
        batch_size: r.usize()?,
        seed: r.u64()?,
        rho: r.f64()?,
        epsilon: r.f64()?,
        clip_norm: {
            let has = r.bytes::<1>()?[0] != 0;
            let v = r.f64()?;
            has.then_some(v)
        },
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("invalid stored config: {e}")))?;
    let count = u32::from_le_bytes(r.bytes()?) as usize;
    let mut params = Params::zeros(config.hidden_dim);
    if count != params.tensors().len() {
        return Err(Error::Checkpoint(format!(
            "expected 8 tensors, found {count}"
        )));
    }
    for t in params.tensors_mut() {
        let (rows, cols) = (r.usize()?, r.usize()?);
        if (rows, cols) != t.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor shape {rows}x{cols} does not match hidden size {}",
                config.hidden_dim
            )));
        }
        for v in t.as_mut_slice() {
            *v = r.f64()?;
        }
    }
    if !params.is_finite() {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    if r.inner
        .read(&mut [0u8; 1])
        .map_err(|e| Error::Checkpoint(e.to_string()))?
        != 0
    {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(Seq2SeqModel { config, params })
}

pub fn save_model(path: impl AsRef<Path>, model: &Seq2SeqModel) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, model)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Seq2SeqModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
