//! A small per-point segmentation network with exact manual backprop.
//!
//! ```text
//! x_i ─ Linear ─ ReLU ─ Linear ─ ReLU ─ e_i ──────────────┐
//!                                    max_{j ∈ kNN(i)} e_j ┴ concat ─ Linear ─ ReLU ─ Linear ─ logits_i
//! ```
//!
//! Inputs are `[L, F]` rows of a standardized cloud; neighbour lists come
//! from [`crate::pointcloud::knn_indices`] on the original cloud and are
//! reused for every augmented view.

mod checkpoint;
mod sgd;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use sgd::{sgd_step, TrainState};

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pointcloud::PointCloud;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// `3 + D_f`.
    pub in_dim: usize,
    pub hidden: usize,
    pub n_classes: usize,
    /// Neighbourhood size of the aggregation stage.
    pub k: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_dim < 3 || self.hidden == 0 || self.n_classes < 2 || self.k == 0 {
            return Err(Error::arg(format!("invalid model config {self:?}")));
        }
        Ok(())
    }
}

/// Dense layer `y = x W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

/// One tensor set with the network's shapes. Used for parameters, their
/// gradients and momentum buffers alike.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub enc1: Linear,
    pub enc2: Linear,
    pub agg: Linear,
    pub head: Linear,
}

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden;
        Self {
            enc1: Linear::zeros(cfg.in_dim, h),
            enc2: Linear::zeros(h, h),
            agg: Linear::zeros(2 * h, h),
            head: Linear::zeros(h, cfg.n_classes),
        }
    }

    pub fn glorot<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let h = cfg.hidden;
        Self {
            enc1: Linear::glorot(cfg.in_dim, h, rng),
            enc2: Linear::glorot(h, h, rng),
            agg: Linear::glorot(2 * h, h, rng),
            head: Linear::glorot(h, cfg.n_classes, rng),
        }
    }

    fn layers(&self) -> [&Linear; 4] {
        [&self.enc1, &self.enc2, &self.agg, &self.head]
    }

    fn layers_mut(&mut self) -> [&mut Linear; 4] {
        [&mut self.enc1, &mut self.enc2, &mut self.agg, &mut self.head]
    }

    /// Flat views in a fixed order: weight then bias, layer by layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .into_iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn n_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn same_shape(&self, other: &Weights) -> bool {
        self.layers()
            .iter()
            .zip(other.layers())
            .all(|(a, b)| a.weight.dim() == b.weight.dim() && a.bias.dim() == b.bias.dim())
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Weights, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    /// `self += other`.
    pub fn add(&mut self, other: &Weights) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| *v == 0.0))
    }
}

/// Model parameters plus a version counter that invalidates old tapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub weights: Weights,
    version: u64,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng::seeded(seed);
        Ok(Self {
            config,
            weights: Weights::glorot(&config, &mut rng),
            version: 0,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            weights: Weights::zeros(&config),
            version: 0,
        })
    }

    pub fn from_weights(config: ModelConfig, weights: Weights) -> Result<Self> {
        config.validate()?;
        if !weights.same_shape(&Weights::zeros(&config)) {
            return Err(Error::arg("weights do not match model config"));
        }
        if !weights.all_finite() {
            return Err(Error::arg("non-finite weights"));
        }
        Ok(Self {
            config,
            weights,
            version: 0,
        })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Mutable access to the weights. Bumps the version, so tapes recorded
    /// before the call can no longer be used for backprop.
    pub fn weights_mut(&mut self) -> &mut Weights {
        self.version += 1;
        &mut self.weights
    }
}

/// Activations recorded by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    input: Array2<f64>,
    pre1: Array2<f64>,
    act1: Array2<f64>,
    pre2: Array2<f64>,
    pool_arg: Array2<usize>,
    concat: Array2<f64>,
    pre3: Array2<f64>,
    act3: Array2<f64>,
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn relu_backward(grad: &mut Array2<f64>, pre: &Array2<f64>) {
    ndarray::Zip::from(grad)
        .and(pre)
        .for_each(|g, &p| if p <= 0.0 { *g = 0.0 });
}

/// Features are taken to lie in [0, 1]; this maps a uniform one to zero
/// mean and unit variance.
pub const FEATURE_CENTER: f64 = 0.5;
pub const FEATURE_SCALE: f64 = 3.464_101_615_137_754_6; // √12

/// Centres locations on the original cloud's centroid and divides by its
/// largest axis extent; shifts and scales features by fixed constants so
/// colour contrasts are not drowned by the initial weights. The same
/// transform is applied to every view of a scene so augmentations remain
/// visible to the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub center: [f64; 3],
    pub inv_extent: f64,
}

impl Normalizer {
    pub fn fit(cloud: &PointCloud) -> Self {
        let center = cloud.centroid();
        let loc = cloud.locations();
        let extent = (0..3)
            .map(|a| {
                let col = loc.column(a);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                max - min
            })
            .fold(0.0, f64::max);
        Self {
            center,
            inv_extent: if extent > 0.0 { 1.0 / extent } else { 1.0 },
        }
    }

    /// Standardized `[L, F]` input matrix.
    pub fn input(&self, cloud: &PointCloud) -> Array2<f64> {
        let mut x = cloud.stacked();
        for mut row in x.rows_mut() {
            for a in 0..3 {
                row[a] = (row[a] - self.center[a]) * self.inv_extent;
            }
            for v in row.iter_mut().skip(3) {
                *v = (*v - FEATURE_CENTER) * FEATURE_SCALE;
            }
        }
        x
    }
}

/// Row-wise normalized exponential with max subtraction.
pub fn probabilities(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    p
}

/// Logits for a standardized `N × (3 + D_f)` input.
pub fn forward(params: &ModelParams, input: &Array2<f64>, neighbors: &Array2<usize>) -> Result<(Array2<f64>, Tape)> {
    let cfg = &params.config;
    let n = input.nrows();
    if input.ncols() != cfg.in_dim {
        return Err(Error::arg(format!(
            "input has {} columns, model expects {}",
            input.ncols(),
            cfg.in_dim
        )));
    }
    if neighbors.dim() != (n, cfg.k) {
        return Err(Error::arg(format!(
            "neighbour matrix {:?}, expected ({n}, {})",
            neighbors.dim(),
            cfg.k
        )));
    }
    if neighbors.iter().any(|&j| j >= n) {
        return Err(Error::arg("neighbour index out of range"));
    }
    let w = &params.weights;
    let h = cfg.hidden;

    let pre1 = w.enc1.forward(input);
    let act1 = relu(&pre1);
    let pre2 = w.enc2.forward(&act1);
    let encoded = relu(&pre2);

    let mut concat = Array2::zeros((n, 2 * h));
    concat.slice_mut(s![.., ..h]).assign(&encoded);
    let mut pool_arg = Array2::zeros((n, h));
    for i in 0..n {
        let nbrs = neighbors.row(i);
        let mut best = encoded.row(nbrs[0]).to_owned();
        let mut arg = ndarray::Array1::from_elem(h, nbrs[0]);
        for &j in nbrs.iter().skip(1) {
            for (ch, &v) in encoded.row(j).iter().enumerate() {
                if v > best[ch] {
                    best[ch] = v;
                    arg[ch] = j;
                }
            }
        }
        concat.slice_mut(s![i, h..]).assign(&best);
        pool_arg.row_mut(i).assign(&arg);
    }

    let pre3 = w.agg.forward(&concat);
    let act3 = relu(&pre3);
    let logits = w.head.forward(&act3);
    let tape = Tape {
        version: params.version,
        input: input.clone(),
        pre1,
        act1,
        pre2,
        pool_arg,
        concat,
        pre3,
        act3,
    };
    Ok((logits, tape))
}

/// Convenience wrapper: standardize `cloud` with `normalizer`, then forward.
pub fn forward_cloud(
    params: &ModelParams,
    cloud: &PointCloud,
    normalizer: &Normalizer,
    neighbors: &Array2<usize>,
) -> Result<(Array2<f64>, Tape)> {
    forward(params, &normalizer.input(cloud), neighbors)
}

fn linear_backward(layer_in: &Array2<f64>, grad_out: &Array2<f64>, grad: &mut Linear) {
    grad.weight = layer_in.t().dot(grad_out);
    grad.bias = grad_out.sum_axis(Axis(0));
}

/// Gradients of `Σ grad_logits ⊙ logits` w.r.t. every parameter.
pub fn backward(params: &ModelParams, tape: &Tape, grad_logits: &Array2<f64>) -> Result<Weights> {
    if tape.version != params.version {
        return Err(Error::Contract(format!(
            "tape recorded at parameter version {} but parameters are at {}",
            tape.version, params.version
        )));
    }
    let cfg = &params.config;
    let n = tape.input.nrows();
    if grad_logits.dim() != (n, cfg.n_classes) {
        return Err(Error::arg(format!(
            "logit gradient {:?}, expected ({n}, {})",
            grad_logits.dim(),
            cfg.n_classes
        )));
    }
    let w = &params.weights;
    let h = cfg.hidden;
    let mut g = Weights::zeros(cfg);

    linear_backward(&tape.act3, grad_logits, &mut g.head);
    let mut d3 = grad_logits.dot(&w.head.weight.t());
    relu_backward(&mut d3, &tape.pre3);

    linear_backward(&tape.concat, &d3, &mut g.agg);
    let dconcat = d3.dot(&w.agg.weight.t());

    let mut dencoded = dconcat.slice(s![.., ..h]).to_owned();
    let dpool = dconcat.slice(s![.., h..]);
    for i in 0..n {
        for ch in 0..h {
            dencoded[[tape.pool_arg[[i, ch]], ch]] += dpool[[i, ch]];
        }
    }
    relu_backward(&mut dencoded, &tape.pre2);

    linear_backward(&tape.act1, &dencoded, &mut g.enc2);
    let mut d1 = dencoded.dot(&w.enc2.weight.t());
    relu_backward(&mut d1, &tape.pre1);
    linear_backward(&tape.input, &d1, &mut g.enc1);
    Ok(g)
}

/// Argmax class per point.
pub fn predict(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(crate::reliability::argmax)
        .collect()
}
