//! MLP encoder `d → 128 → 64 → 32` and projection head `32 → 32 → 32`
//! trained with the supervised contrastive loss.
//!
//! Forward pass: `h = f(x)` (ReLU after every encoder layer), then
//! `z = normalize(g(h))` (ReLU only after the projection's hidden layer).
//! After training only `f` is used; see [`encode_latent`].

use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::matrix::{compensated_sum, FeatureMatrix};
use crate::rng::{self, purpose};
use crate::{class_counts, Error, Label, Result};

pub const ENCODER_WIDTHS: [usize; 3] = [128, 64, 32];
pub const PROJECTION_WIDTHS: [usize; 2] = [32, 32];
pub const LATENT_DIM: usize = 32;
pub const EMBEDDING_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub temperature: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 100,
            temperature: 0.07,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("train config: {msg}")));
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return bad("temperature must be > 0");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be > 0");
        }
        Ok(())
    }
}

/// Fully connected layer; `weights` is `inputs × outputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn he(inputs: usize, outputs: usize, rng: &mut rng::Rng) -> Self {
        let normal = Normal::new(0.0, libm::sqrt(2.0 / inputs as f64)).expect("positive std");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            bias: alloc::vec![0.0; outputs],
        }
    }

    fn forward(&self, input: &[f64], n: usize, relu: bool) -> Vec<f64> {
        let (d, o) = (self.inputs, self.outputs);
        let mut out = Vec::with_capacity(n * o);
        for _ in 0..n {
            out.extend_from_slice(&self.bias);
        }
        for (x, y) in input.chunks_exact(d).zip(out.chunks_exact_mut(o)) {
            for (k, &a) in x.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let w = &self.weights[k * o..(k + 1) * o];
                for (yj, wj) in y.iter_mut().zip(w) {
                    *yj += a * wj;
                }
            }
        }
        if relu {
            for v in &mut out {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input` when `want_input` is set.
    fn backward(
        &self,
        input: &[f64],
        d_out: &[f64],
        grad: &mut DenseGrad,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let (d, o) = (self.inputs, self.outputs);
        for (x, g) in input.chunks_exact(d).zip(d_out.chunks_exact(o)) {
            for (bj, gj) in grad.bias.iter_mut().zip(g) {
                *bj += gj;
            }
            for (k, &a) in x.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let w = &mut grad.weights[k * o..(k + 1) * o];
                for (wj, gj) in w.iter_mut().zip(g) {
                    *wj += a * gj;
                }
            }
        }
        want_input.then(|| {
            let mut d_in = alloc::vec![0.0; input.len()];
            for (di, g) in d_in.chunks_exact_mut(d).zip(d_out.chunks_exact(o)) {
                for (k, dk) in di.iter_mut().enumerate() {
                    let w = &self.weights[k * o..(k + 1) * o];
                    *dk = w.iter().zip(g).map(|(a, b)| a * b).sum();
                }
            }
            d_in
        })
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseGrad {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseGrad {
    fn zeros(layer: &Dense) -> Self {
        Self {
            weights: alloc::vec![0.0; layer.weights.len()],
            bias: alloc::vec![0.0; layer.bias.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderBundle {
    pub input_dim: usize,
    pub encoder: Vec<Dense>,
    pub projection: Vec<Dense>,
    pub config: TrainConfig,
}

/// Gradient of the loss with respect to every parameter, flattened in
/// [`EncoderBundle::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient(pub Vec<f64>);

/// `relu_mask[i]` is whether layer `i` of the stack applies ReLU.
const ENCODER_RELU: [bool; 3] = [true, true, true];
const PROJECTION_RELU: [bool; 2] = [true, false];

struct ForwardTrace {
    /// Input to every layer (encoder then projection), plus the final
    /// pre-normalization output as the last entry.
    activations: Vec<Vec<f64>>,
    n: usize,
}

impl EncoderBundle {
    fn layers(&self) -> impl Iterator<Item = (&Dense, bool)> {
        self.encoder
            .iter()
            .zip(ENCODER_RELU)
            .chain(self.projection.iter().zip(PROJECTION_RELU))
    }

    pub fn param_count(&self) -> usize {
        self.encoder
            .iter()
            .chain(&self.projection)
            .map(Dense::param_count)
            .sum()
    }

    /// All parameters in a fixed order: per layer (encoder first) weights then bias.
    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.encoder
            .iter()
            .chain(&self.projection)
            .flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.encoder
            .iter_mut()
            .chain(self.projection.iter_mut())
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut width = self.input_dim;
        for (layer, _) in self.layers() {
            if layer.inputs != width
                || layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(Error::Invariant("encoder layer shapes do not chain".into()));
            }
            width = layer.outputs;
        }
        if self.encoder.last().map(|l| l.outputs) != Some(LATENT_DIM)
            || self.projection.last().map(|l| l.outputs) != Some(EMBEDDING_DIM)
        {
            return Err(Error::Invariant("unexpected latent or embedding width".into()));
        }
        if self.parameters().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("encoder parameters"));
        }
        Ok(())
    }

    fn trace(&self, x: &FeatureMatrix, through_projection: bool) -> Result<ForwardTrace> {
        x.ensure_width(self.input_dim)?;
        self.validate()?;
        let n = x.n_rows();
        let mut activations = alloc::vec![x.as_slice().to_vec()];
        let depth = if through_projection {
            self.encoder.len() + self.projection.len()
        } else {
            self.encoder.len()
        };
        for (layer, relu) in self.layers().take(depth) {
            let next = layer.forward(activations.last().unwrap(), n, relu);
            activations.push(next);
        }
        Ok(ForwardTrace { activations, n })
    }

    /// Supervised contrastive loss of the batch and its gradient with
    /// respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        x: &FeatureMatrix,
        y: &[Label],
        temperature: f64,
    ) -> Result<(f64, ParamGradient)> {
        let trace = self.trace(x, true)?;
        let n = trace.n;
        let projected = trace.activations.last().unwrap();
        let (z, norms) = normalize_rows(projected, EMBEDDING_DIM);
        let z = FeatureMatrix::from_raw_parts(n, EMBEDDING_DIM, z);
        let (loss, d_z) = supcon_loss_and_grad(&z, y, temperature)?;

        // back through the row normalization: dp = (dz − z (z·dz)) / ‖p‖
        let mut delta = d_z.into_vec();
        for ((dz, zr), &norm) in delta
            .chunks_exact_mut(EMBEDDING_DIM)
            .zip(z.rows())
            .zip(&norms)
        {
            if norm == 0.0 {
                dz.fill(0.0);
                continue;
            }
            let dot: f64 = dz.iter().zip(zr).map(|(a, b)| a * b).sum();
            for (d, zi) in dz.iter_mut().zip(zr) {
                *d = (*d - zi * dot) / norm;
            }
        }

        let layers: Vec<(&Dense, bool)> = self.layers().collect();
        let mut grads: Vec<DenseGrad> = layers.iter().map(|(l, _)| DenseGrad::zeros(l)).collect();
        for idx in (0..layers.len()).rev() {
            let (layer, relu) = layers[idx];
            if relu {
                // post-activation > 0 exactly where pre-activation > 0
                for (d, &a) in delta.iter_mut().zip(&trace.activations[idx + 1]) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &trace.activations[idx];
            match layer.backward(input, &delta, &mut grads[idx], idx > 0) {
                Some(d_in) => delta = d_in,
                None => break,
            }
        }
        let flat = grads
            .into_iter()
            .flat_map(|g| g.weights.into_iter().chain(g.bias))
            .collect();
        Ok((loss, ParamGradient(flat)))
    }
}

/// Row-wise ℓ2 normalization; zero rows map to `e₁`. Returns the
/// normalized values and the original norms.
fn normalize_rows(values: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut out = values.to_vec();
    let mut norms = Vec::with_capacity(values.len() / width);
    for row in out.chunks_exact_mut(width) {
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 {
            row.fill(0.0);
            row[0] = 1.0;
        } else {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        norms.push(norm);
    }
    (out, norms)
}

pub fn init_encoder(input_dim: usize, seed: u64) -> Result<EncoderBundle> {
    if input_dim == 0 {
        return Err(Error::InvalidArgument("encoder input width must be >= 1".into()));
    }
    let mut rng = rng::stream(seed, purpose::ENCODER_INIT);
    let mut width = input_dim;
    let mut encoder = Vec::new();
    for &w in &ENCODER_WIDTHS {
        encoder.push(Dense::he(width, w, &mut rng));
        width = w;
    }
    let mut projection = Vec::new();
    for &w in &PROJECTION_WIDTHS {
        projection.push(Dense::he(width, w, &mut rng));
        width = w;
    }
    Ok(EncoderBundle {
        input_dim,
        encoder,
        projection,
        config: TrainConfig {
            seed,
            ..TrainConfig::default()
        },
    })
}

/// Returns `(H, Z)`: latent vectors and unit-norm projected embeddings.
pub fn forward_embed(
    bundle: &EncoderBundle,
    x: &FeatureMatrix,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let trace = bundle.trace(x, true)?;
    let n = trace.n;
    let h = trace.activations[bundle.encoder.len()].clone();
    let (z, _) = normalize_rows(trace.activations.last().unwrap(), EMBEDDING_DIM);
    Ok((
        FeatureMatrix::new(n, LATENT_DIM, h)?,
        FeatureMatrix::new(n, EMBEDDING_DIM, z)?,
    ))
}

/// Frozen-encoder inference: `f(x)` without the projection head.
pub fn encode_latent(bundle: &EncoderBundle, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut trace = bundle.trace(x, false)?;
    let h = trace.activations.pop().unwrap();
    FeatureMatrix::new(trace.n, LATENT_DIM, h)
}

/// Supervised contrastive loss summed over anchors, and `∂loss/∂Z`.
///
/// Anchor `i` contributes `log Σ_{a≠i} exp(s_ia) − mean_{p∈P(i)} s_ip` with
/// `s_ia = z_i·z_a / τ`; anchors without positives contribute nothing.
pub fn supcon_loss_and_grad(
    z: &FeatureMatrix,
    y: &[Label],
    temperature: f64,
) -> Result<(f64, FeatureMatrix)> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature {temperature} must be > 0"
        )));
    }
    let n = z.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("batch of {n} rows, need >= 2")));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument("label count differs from batch size".into()));
    }
    let dim = z.n_cols();
    let mut sim = alloc::vec![0.0; n * n];
    for i in 0..n {
        for a in i..n {
            let s = z.row(i).iter().zip(z.row(a)).map(|(p, q)| p * q).sum::<f64>() / temperature;
            sim[i * n + a] = s;
            sim[a * n + i] = s;
        }
    }

    // coef[i][a] = ∂loss/∂s_ia
    let mut coef = alloc::vec![0.0; n * n];
    let mut per_anchor = Vec::with_capacity(n);
    let mut weights = alloc::vec![0.0; n];
    for i in 0..n {
        let positives = (0..n).filter(|&p| p != i && y[p] == y[i]).count();
        if positives == 0 {
            continue;
        }
        let row = &sim[i * n..(i + 1) * n];
        let max = (0..n)
            .filter(|&a| a != i)
            .map(|a| row[a])
            .fold(f64::NEG_INFINITY, f64::max);
        for a in 0..n {
            weights[a] = if a == i { 0.0 } else { libm::exp(row[a] - max) };
        }
        let denom = compensated_sum(weights.iter().copied());
        let lse = max + libm::log(denom);
        let inv_p = 1.0 / positives as f64;
        let pos_mean =
            compensated_sum((0..n).filter(|&p| p != i && y[p] == y[i]).map(|p| row[p])) * inv_p;
        per_anchor.push(lse - pos_mean);
        let c = &mut coef[i * n..(i + 1) * n];
        for a in 0..n {
            if a == i {
                continue;
            }
            let target = if y[a] == y[i] { inv_p } else { 0.0 };
            c[a] = weights[a] / denom - target;
        }
    }
    let loss = compensated_sum(per_anchor);

    let mut grad = alloc::vec![0.0; n * dim];
    for i in 0..n {
        let g = &mut grad[i * dim..(i + 1) * dim];
        for a in 0..n {
            let w = (coef[i * n + a] + coef[a * n + i]) / temperature;
            if w == 0.0 {
                continue;
            }
            for (gk, zk) in g.iter_mut().zip(z.row(a)) {
                *gk += w * zk;
            }
        }
    }
    if !loss.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("supervised contrastive loss"));
    }
    Ok((loss, FeatureMatrix::from_raw_parts(n, dim, grad)))
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    steps: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            epsilon,
            steps: 0,
            m: alloc::vec![0.0; n_params],
            v: alloc::vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut f64>, grad: &[f64]) {
        self.steps += 1;
        let t = self.steps as f64;
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        for (((p, &g), m), v) in params.zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (libm::sqrt(v_hat) + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEncoder {
    pub bundle: EncoderBundle,
    /// Per epoch: summed batch losses divided by the number of rows.
    pub loss_history: Vec<f64>,
    pub steps: u64,
}

/// Mini-batch Adam on the supervised contrastive loss. Each epoch shuffles
/// with seed `cfg.seed ⊕ epoch`; the final partial batch is kept. A batch of
/// one row has no anchor with a positive, so it contributes zero loss and a
/// zero gradient, but still counts as an optimizer step.
pub fn train_encoder(x: &FeatureMatrix, y: &[Label], cfg: &TrainConfig) -> Result<TrainedEncoder> {
    cfg.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument("label count differs from row count".into()));
    }
    let counts = class_counts(y);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass("encoder training data"));
    }
    let mut bundle = init_encoder(x.n_cols(), cfg.seed)?;
    bundle.config = *cfg;
    let mut adam = Adam::new(
        bundle.param_count(),
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
    );
    let n = x.n_rows();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let zero = alloc::vec![0.0; bundle.param_count()];
    for epoch in 0..cfg.epochs {
        let mut rng = rng::stream(rng::derive(cfg.seed, epoch as u64), purpose::EPOCH_SHUFFLE);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                adam.step(bundle.parameters_mut(), &zero);
                continue;
            }
            let xb = x.select_rows(batch);
            let yb: Vec<Label> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grad) = bundle.loss_and_gradients(&xb, &yb, cfg.temperature)?;
            adam.step(bundle.parameters_mut(), &grad.0);
            epoch_loss += loss;
        }
        if bundle.parameters().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("encoder parameters during training"));
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(TrainedEncoder {
        bundle,
        loss_history: history,
        steps: adam.steps(),
    })
}
