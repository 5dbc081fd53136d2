//! Fully connected autoencoder trained to reproduce its input.
//!
//! Hidden layers use ReLU, the output layer uses a sigmoid, and training
//! minimizes the per-pixel mean squared reconstruction error with Adam.
//! The encoder is the first half of the layer stack, up to the bottleneck.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

pub const DEFAULT_LAYERS: [usize; 7] = [784, 128, 64, 32, 64, 128, 784];
const MAGIC: &[u8; 4] = b"AEM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub layer_sizes: Vec<usize>,
    /// `weights[l]` is `layer_sizes[l+1] × layer_sizes[l]`.
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    /// Position of the bottleneck in `layer_sizes`.
    pub latent_index: usize,
}

/// Parameters gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 20,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean reconstruction loss over each epoch's samples, measured before
    /// each batch's update.
    pub epoch_losses: Vec<f64>,
    pub epochs: usize,
    pub final_loss: f64,
}

fn validate_sizes(sizes: &[usize]) -> Result<usize> {
    if sizes.len() < 3 || sizes.len().is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "autoencoder needs an odd number (≥ 3) of layer sizes, got {}",
            sizes.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Parameter("layer sizes must be positive".into()));
    }
    if sizes.iter().ne(sizes.iter().rev()) {
        return Err(Error::Parameter(format!(
            "layer sizes must be palindromic, got {sizes:?}"
        )));
    }
    let mid = sizes.len() / 2;
    if sizes.iter().any(|&s| s < sizes[mid]) {
        return Err(Error::Parameter(format!(
            "the middle layer must be the bottleneck, got {sizes:?}"
        )));
    }
    Ok(mid)
}

/// Glorot-uniform weights, zero biases.
pub fn ae_init(layer_sizes: &[usize], seed: u64) -> Result<AeModel> {
    let latent_index = validate_sizes(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        weights.push(Matrix::new(fan_out, fan_in, data)?);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(AeModel {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        latent_index,
    })
}

impl AeModel {
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.layer_sizes[self.latent_index]
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            Activation::Sigmoid
        } else {
            Activation::Relu
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Applies layers `from..to` to a batch.
    fn run_layers(&self, x: &Matrix, from: usize, to: usize) -> Result<Matrix> {
        let mut a = x.clone();
        for l in from..to {
            a = self.affine(&a, l)?;
            let act = self.activation(l);
            a.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        }
        Ok(a)
    }

    fn affine(&self, a: &Matrix, l: usize) -> Result<Matrix> {
        let mut z = linalg::matmul_transb(a, &self.weights[l])?;
        let b = &self.biases[l];
        for r in 0..z.rows() {
            for (v, &bi) in z.row_mut(r).iter_mut().zip(b) {
                *v += bi;
            }
        }
        Ok(z)
    }

    /// Loss (mean squared error over all entries) and its exact gradient for
    /// reconstructing `x` from itself.
    pub fn loss_and_gradients(&self, x: &Matrix) -> Result<(f64, Gradients)> {
        let (rows, grads) = self.backprop(x)?;
        Ok((rows.iter().sum::<f64>() / rows.len() as f64, grads))
    }

    /// Per-row losses and the gradient of their mean.
    fn backprop(&self, x: &Matrix) -> Result<(Vec<f64>, Gradients)> {
        self.check_input(x)?;
        let layers = self.n_layers();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.clone());
        for l in 0..layers {
            let mut a = self.affine(&acts[l], l)?;
            let act = self.activation(l);
            a.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            acts.push(a);
        }
        let out = &acts[layers];
        let count = (x.rows() * x.cols()) as f64;
        let mut row_losses = Vec::with_capacity(x.rows());
        let mut delta = Matrix::zeros(out.rows(), out.cols());
        for r in 0..x.rows() {
            let mut sse = 0.0;
            for ((d, &o), &t) in delta.row_mut(r).iter_mut().zip(out.row(r)).zip(x.row(r)) {
                let e = o - t;
                sse += e * e;
                *d = 2.0 * e / count * o * (1.0 - o);
            }
            row_losses.push(sse / x.cols() as f64);
        }

        let mut gw = vec![Matrix::zeros(0, 0); layers];
        let mut gb = vec![Vec::new(); layers];
        for l in (0..layers).rev() {
            gw[l] = linalg::matmul_transa(&delta, &acts[l])?;
            let mut db = vec![0.0; delta.cols()];
            for row in delta.row_iter() {
                for (s, &v) in db.iter_mut().zip(row) {
                    *s += v;
                }
            }
            gb[l] = db;
            if l > 0 {
                let mut prev = linalg::matmul(&delta, &self.weights[l])?;
                // ReLU derivative from the stored activation
                for (p, &a) in prev.as_mut_slice().iter_mut().zip(acts[l].as_slice()) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((
            row_losses,
            Gradients {
                weights: gw,
                biases: gb,
            },
        ))
    }

    /// Mean squared reconstruction error of each row.
    pub fn row_losses(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let out = self.run_layers(x, 0, self.n_layers())?;
        Ok(out
            .row_iter()
            .zip(x.row_iter())
            .map(|(o, t)| linalg::squared_distance(o, t) / x.cols() as f64)
            .collect())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "autoencoder input",
                x.shape(),
                (x.rows(), self.input_dim()),
            ));
        }
        Ok(())
    }

    /// `AEM1`, number of layer sizes, the sizes (all u64 LE), then for each
    /// layer its row-major weights followed by its biases as f64 LE.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.layer_sizes.len() as u64).to_le_bytes())?;
        for &s in &self.layer_sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for (wm, b) in self.weights.iter().zip(&self.biases) {
            for v in wm.as_slice().iter().chain(b) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an AEM1 model file".into()));
        }
        let read_u64 = |off: usize| -> Result<u64> {
            bytes
                .get(off..off + 8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .ok_or(Error::Length {
                    expected: off + 8,
                    actual: bytes.len(),
                })
        };
        let count = read_u64(4)? as usize;
        if count > 1024 {
            return Err(Error::Format(format!("implausible layer count {count}")));
        }
        let sizes: Vec<usize> = (0..count)
            .map(|i| read_u64(12 + 8 * i).map(|v| v as usize))
            .collect::<Result<_>>()?;
        let latent_index = validate_sizes(&sizes)?;
        let params: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let header = 12 + 8 * count;
        let expected = header + 8 * params;
        if bytes.len() != expected {
            return Err(Error::Length {
                expected,
                actual: bytes.len(),
            });
        }
        let mut values = bytes[header..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let data: Vec<f64> = values.by_ref().take(w[0] * w[1]).collect();
            weights.push(Matrix::new(w[1], w[0], data)?);
            biases.push(values.by_ref().take(w[1]).collect());
        }
        Ok(AeModel {
            layer_sizes: sizes,
            weights,
            biases,
            latent_index,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        AeModel::from_bytes(&bytes)
    }
}

/// Activations of every layer for one sample, input first.
pub fn ae_forward(model: &AeModel, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x.len() != model.input_dim() {
        return Err(Error::shape(
            "ae_forward",
            (1, x.len()),
            (1, model.input_dim()),
        ));
    }
    let mut acts = vec![x.to_vec()];
    for l in 0..model.n_layers() {
        let prev = &acts[l];
        let act = model.activation(l);
        let next = model.weights[l]
            .row_iter()
            .zip(&model.biases[l])
            .map(|(w, &b)| act.apply(linalg::dot(w, prev) + b))
            .collect();
        acts.push(next);
    }
    Ok(acts)
}

/// Bottleneck activations for every row.
pub fn encode(model: &AeModel, x: &Matrix) -> Result<Matrix> {
    model.check_input(x)?;
    model.run_layers(x, 0, model.latent_index)
}

/// Reconstructions from bottleneck codes.
pub fn decode(model: &AeModel, z: &Matrix) -> Result<Matrix> {
    if z.cols() != model.latent_dim() {
        return Err(Error::shape(
            "decode",
            z.shape(),
            (z.rows(), model.latent_dim()),
        ));
    }
    model.run_layers(z, model.latent_index, model.n_layers())
}

struct Adam {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(model: &AeModel) -> Self {
        let zw = || model.weights.iter().map(|w| vec![0.0; w.as_slice().len()]).collect();
        let zb = || model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        Adam {
            m_w: zw(),
            v_w: zw(),
            m_b: zb(),
            v_b: zb(),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut AeModel, grads: &Gradients, p: &TrainParams) {
        self.step += 1;
        let c1 = 1.0 - p.beta1.powi(self.step);
        let c2 = 1.0 - p.beta2.powi(self.step);
        let apply = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((t, &g), m), v) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = p.beta1 * *m + (1.0 - p.beta1) * g;
                *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *t -= p.learning_rate * m_hat / (v_hat.sqrt() + p.epsilon);
            }
        };
        for l in 0..model.n_layers() {
            apply(
                model.weights[l].as_mut_slice(),
                grads.weights[l].as_slice(),
                &mut self.m_w[l],
                &mut self.v_w[l],
            );
            apply(
                &mut model.biases[l],
                &grads.biases[l],
                &mut self.m_b[l],
                &mut self.v_b[l],
            );
        }
    }
}

/// Mini-batch Adam on the reconstruction loss, reshuffling every epoch.
pub fn ae_train(model: &mut AeModel, x: &Matrix, params: &TrainParams) -> Result<TrainReport> {
    model.check_input(x)?;
    if params.epochs == 0 {
        return Err(Error::Parameter("epochs must be at least 1".into()));
    }
    if params.batch_size == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    if !(params.learning_rate >= 0.0) {
        return Err(Error::Parameter(format!(
            "learning rate must be non-negative, got {}",
            params.learning_rate
        )));
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::Degenerate("no training samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = Adam::new(model);
    let mut per_sample = vec![0.0; n];
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for (batch_no, batch) in order.chunks(params.batch_size).enumerate() {
            let xb = x.select_rows(batch);
            let (rows, grads) = model.backprop(&xb)?;
            if rows.iter().any(|l| !l.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                });
            }
            // stored by sample so the epoch mean is summed in index order
            for (&i, row) in batch.iter().zip(rows) {
                per_sample[i] = row;
            }
            adam.update(model, &grads, params);
            if !model.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                });
            }
        }
        epoch_losses.push(per_sample.iter().sum::<f64>() / n as f64);
    }
    Ok(TrainReport {
        final_loss: *epoch_losses.last().unwrap(),
        epochs: params.epochs,
        epoch_losses,
    })
}
