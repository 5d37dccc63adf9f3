//! Training losses and their gradients with respect to logits.
//!
//! Every loss takes raw logits of the branch being trained and turns them
//! into probabilities internally. Targets (`Y`, one-hot and soft pseudo
//! labels) are constants: no gradient is reported for them. Logarithm
//! arguments are clamped below at [`LOG_EPS`].
//!
//! Reductions: mean over the selected points of a view, summed over views.

use ndarray::{Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::pointcloud::SparseLabels;
use crate::reliability::ReliabilityPartition;
use crate::segmodel::probabilities;
use crate::{Error, Result};

pub const LOG_EPS: f64 = 1e-12;
pub const DICE_SMOOTHING: f64 = 1.0;

fn clamped_ln(v: f64) -> f64 {
    v.max(LOG_EPS).ln()
}

/// Loss value plus one logit gradient per trained view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewLoss {
    pub value: f64,
    pub grads: Vec<Array2<f64>>,
}

impl ViewLoss {
    fn zero(logits: &[Array2<f64>]) -> Self {
        Self {
            value: 0.0,
            grads: logits.iter().map(|l| Array2::zeros(l.raw_dim())).collect(),
        }
    }
}

fn check_targets(
    name: &str,
    target: &Array2<f64>,
    mask: &[bool],
    logits: &[Array2<f64>],
) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::arg(format!("{name}: no views to train")));
    }
    if mask.len() != target.nrows() {
        return Err(Error::arg(format!(
            "{name}: mask has {} entries, target {} rows",
            mask.len(),
            target.nrows()
        )));
    }
    for (k, l) in logits.iter().enumerate() {
        if l.dim() != target.dim() {
            return Err(Error::arg(format!(
                "{name}: view {k} logits {:?} vs target {:?}",
                l.dim(),
                target.dim()
            )));
        }
    }
    Ok(())
}

/// Chains `dL/dp` through the normalized exponential:
/// `dL/dz = p ⊙ (g − ⟨g, p⟩)`.
fn softmax_backward(p: ArrayView1<'_, f64>, g: ArrayView1<'_, f64>) -> ndarray::Array1<f64> {
    let dot: f64 = p.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
    Zip::from(&p).and(&g).map_collect(|&pi, &gi| pi * (gi - dot))
}

/// Cross-entropy against the sparse manual labels, averaged over the
/// labelled points.
pub fn seg_loss(logits: &Array2<f64>, labels: &SparseLabels) -> Result<(f64, Array2<f64>)> {
    let (n, c) = logits.dim();
    let mut grad = Array2::zeros((n, c));
    for &(i, y) in labels.entries() {
        if i >= n || y >= c {
            return Err(Error::arg(format!(
                "label ({i}, {y}) out of range for {n}×{c} logits"
            )));
        }
    }
    let m = labels.n_labeled();
    if m == 0 {
        return Ok((0.0, grad));
    }
    let p = probabilities(logits);
    let inv_m = 1.0 / m as f64;
    let mut loss = 0.0;
    for &(i, y) in labels.entries() {
        loss -= clamped_ln(p[[i, y]]);
        let mut g = grad.row_mut(i);
        g.assign(&p.row(i));
        g[y] -= 1.0;
        g *= inv_m;
    }
    Ok((loss * inv_m, grad))
}

fn ce_view(one_hot: &Array2<f64>, mask: &[bool], logits: &Array2<f64>, count: usize) -> (f64, Array2<f64>) {
    let p = probabilities(logits);
    let inv = 1.0 / count as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let row = one_hot.row(i);
        loss -= row
            .iter()
            .zip(p.row(i))
            .filter(|(y, _)| **y != 0.0)
            .map(|(y, pv)| y * clamped_ln(*pv))
            .sum::<f64>();
        Zip::from(grad.row_mut(i))
            .and(p.row(i))
            .and(row)
            .for_each(|g, &pv, &y| *g = (pv - y) * inv);
    }
    (loss * inv, grad)
}

/// Cross-entropy of each augmented view against the one-hot pseudo labels
/// on the reliable points, summed over views.
pub fn reliable_loss(one_hot: &Array2<f64>, mask: &[bool], aug_logits: &[Array2<f64>]) -> Result<ViewLoss> {
    check_targets("reliable loss", one_hot, mask, aug_logits)?;
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Ok(ViewLoss::zero(aug_logits));
    }
    let mut out = ViewLoss {
        value: 0.0,
        grads: Vec::with_capacity(aug_logits.len()),
    };
    for logits in aug_logits {
        let (v, g) = ce_view(one_hot, mask, logits, count);
        out.value += v;
        out.grads.push(g);
    }
    Ok(out)
}

/// KL divergence from the soft pseudo labels to each augmented view on the
/// ambiguous points (where `mask` is false), summed over views.
pub fn ambiguous_loss(soft: &Array2<f64>, mask: &[bool], aug_logits: &[Array2<f64>]) -> Result<ViewLoss> {
    check_targets("ambiguous loss", soft, mask, aug_logits)?;
    let count = mask.iter().filter(|&&m| !m).count();
    if count == 0 {
        return Ok(ViewLoss::zero(aug_logits));
    }
    let inv = 1.0 / count as f64;
    let mut out = ViewLoss {
        value: 0.0,
        grads: Vec::with_capacity(aug_logits.len()),
    };
    for logits in aug_logits {
        let p = probabilities(logits);
        let mut grad = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| !m) {
            let t = soft.row(i);
            loss += t
                .iter()
                .zip(p.row(i))
                .filter(|(tv, _)| **tv != 0.0)
                .map(|(tv, pv)| tv * (clamped_ln(*tv) - clamped_ln(*pv)))
                .sum::<f64>();
            Zip::from(grad.row_mut(i))
                .and(p.row(i))
                .and(t)
                .for_each(|g, &pv, &tv| *g = (pv - tv) * inv);
        }
        out.value += loss * inv;
        out.grads.push(grad);
    }
    Ok(out)
}

/// Cross-entropy of the mixed view against the one-hot pseudo labels.
pub fn mix_loss(one_hot: &Array2<f64>, mask: &[bool], mix_logits: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let mut out = reliable_loss(one_hot, mask, std::slice::from_ref(mix_logits))?;
    Ok((out.value, out.grads.pop().expect("one view")))
}

/// Soft Dice loss on the reliable points, averaged over classes and summed
/// over views. Drop-in replacement for [`reliable_loss`].
pub fn dice_loss(one_hot: &Array2<f64>, mask: &[bool], aug_logits: &[Array2<f64>]) -> Result<ViewLoss> {
    check_targets("dice loss", one_hot, mask, aug_logits)?;
    if !mask.iter().any(|&m| m) {
        return Ok(ViewLoss::zero(aug_logits));
    }
    let (n, c) = one_hot.dim();
    let s = DICE_SMOOTHING;
    let inv_c = 1.0 / c as f64;
    let mut out = ViewLoss {
        value: 0.0,
        grads: Vec::with_capacity(aug_logits.len()),
    };
    for logits in aug_logits {
        let p = probabilities(logits);
        let mut inter = vec![0.0; c];
        let mut pp = vec![0.0; c];
        let mut yy = vec![0.0; c];
        for i in (0..n).filter(|&i| mask[i]) {
            for j in 0..c {
                let (pv, yv) = (p[[i, j]], one_hot[[i, j]]);
                inter[j] += pv * yv;
                pp[j] += pv * pv;
                yy[j] += yv * yv;
            }
        }
        let mut loss = 0.0;
        let mut num = vec![0.0; c];
        let mut den = vec![0.0; c];
        for j in 0..c {
            num[j] = 2.0 * inter[j] + s;
            den[j] = pp[j] + yy[j] + s;
            loss += 1.0 - num[j] / den[j];
        }
        let mut grad = Array2::zeros((n, c));
        for i in (0..n).filter(|&i| mask[i]) {
            let dp = ndarray::Array1::from_shape_fn(c, |j| {
                -inv_c * (2.0 * one_hot[[i, j]] * den[j] - num[j] * 2.0 * p[[i, j]]) / (den[j] * den[j])
            });
            grad.row_mut(i).assign(&softmax_backward(p.row(i), dp.view()));
        }
        out.value += loss * inv_c;
        out.grads.push(grad);
    }
    Ok(out)
}

/// Mean squared difference between probability rows and soft targets on the
/// ambiguous points, summed over views. Drop-in replacement for
/// [`ambiguous_loss`].
pub fn mse_loss(soft: &Array2<f64>, mask: &[bool], aug_logits: &[Array2<f64>]) -> Result<ViewLoss> {
    check_targets("mse loss", soft, mask, aug_logits)?;
    let count = mask.iter().filter(|&&m| !m).count();
    if count == 0 {
        return Ok(ViewLoss::zero(aug_logits));
    }
    let c = soft.ncols();
    let inv = 1.0 / (count * c) as f64;
    let mut out = ViewLoss {
        value: 0.0,
        grads: Vec::with_capacity(aug_logits.len()),
    };
    for logits in aug_logits {
        let p = probabilities(logits);
        let mut grad = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| !m) {
            let diff = &p.row(i) - &soft.row(i);
            loss += diff.iter().map(|d| d * d).sum::<f64>();
            let dp = diff.mapv(|d| 2.0 * d * inv);
            grad.row_mut(i).assign(&softmax_backward(p.row(i), dp.view()));
        }
        out.value += loss * inv;
        out.grads.push(grad);
    }
    Ok(out)
}

/// Weights of the consistency, ambiguous and mix terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub reliable: f64,
    pub ambiguous: f64,
    pub mix: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Self {
            reliable: 1.0,
            ambiguous: 1.0,
            mix: 1.0,
        }
    }
}

impl Lambdas {
    pub fn new(reliable: f64, ambiguous: f64, mix: f64) -> Self {
        Self {
            reliable,
            ambiguous,
            mix,
        }
    }
}

/// `seg + λ1·reliable + λ2·ambiguous + λ3·mix`, accumulated left to right.
pub fn total_loss(seg: f64, reliable: f64, ambiguous: f64, mix: f64, lambdas: Lambdas) -> f64 {
    seg + lambdas.reliable * reliable + lambdas.ambiguous * ambiguous + lambdas.mix * mix
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReliableLossKind {
    #[default]
    Ce,
    Dice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbiguousLossKind {
    #[default]
    Kl,
    Mse,
}

impl std::str::FromStr for ReliableLossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(Self::Ce),
            "dice" => Ok(Self::Dice),
            _ => Err(Error::arg(format!("unknown reliable loss {s:?} (ce|dice)"))),
        }
    }
}

impl std::str::FromStr for AmbiguousLossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Self::Kl),
            "mse" => Ok(Self::Mse),
            _ => Err(Error::arg(format!("unknown ambiguous loss {s:?} (kl|mse)"))),
        }
    }
}

impl ReliableLossKind {
    pub fn eval(self, one_hot: &Array2<f64>, mask: &[bool], aug_logits: &[Array2<f64>]) -> Result<ViewLoss> {
        match self {
            Self::Ce => reliable_loss(one_hot, mask, aug_logits),
            Self::Dice => dice_loss(one_hot, mask, aug_logits),
        }
    }
}

impl AmbiguousLossKind {
    pub fn eval(self, soft: &Array2<f64>, mask: &[bool], aug_logits: &[Array2<f64>]) -> Result<ViewLoss> {
        match self {
            Self::Kl => ambiguous_loss(soft, mask, aug_logits),
            Self::Mse => mse_loss(soft, mask, aug_logits),
        }
    }
}

/// All loss terms of one scene and their logit gradients per branch.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub seg: f64,
    pub reliable: f64,
    pub ambiguous: f64,
    pub mix: f64,
    pub total: f64,
    pub lambdas: Lambdas,
    /// Gradient w.r.t. the original branch logits (segmentation only).
    pub grad_original: Array2<f64>,
    /// Weighted consistency gradient per augmented branch.
    pub grad_augmented: Vec<Array2<f64>>,
    /// Weighted gradient w.r.t. the mixed branch logits.
    pub grad_mix: Array2<f64>,
}

/// The choice of loss for each pseudo-label set and the term weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSetup {
    pub reliable: ReliableLossKind,
    pub ambiguous: AmbiguousLossKind,
    pub lambdas: Lambdas,
}

impl LossReport {
    /// Evaluates every term of one scene. A term whose weight is zero adds
    /// nothing to the gradients, not even a signed zero.
    pub fn compute(
        original_logits: &Array2<f64>,
        clicks: &SparseLabels,
        partition: &ReliabilityPartition,
        aug_logits: &[Array2<f64>],
        mix_logits: &Array2<f64>,
        setup: LossSetup,
    ) -> Result<Self> {
        let lambdas = setup.lambdas;
        let (seg, grad_original) = seg_loss(original_logits, clicks)?;
        let rel = setup.reliable.eval(&partition.one_hot, &partition.mask, aug_logits)?;
        let amb = setup.ambiguous.eval(&partition.soft, &partition.mask, aug_logits)?;
        let (mix, mix_grad) = mix_loss(&partition.one_hot, &partition.mask, mix_logits)?;

        let grad_augmented = rel
            .grads
            .iter()
            .zip(&amb.grads)
            .map(|(r, a)| {
                let mut g = Array2::zeros(r.raw_dim());
                if lambdas.reliable != 0.0 {
                    g.scaled_add(lambdas.reliable, r);
                }
                if lambdas.ambiguous != 0.0 {
                    g.scaled_add(lambdas.ambiguous, a);
                }
                g
            })
            .collect();
        let grad_mix = if lambdas.mix != 0.0 {
            mix_grad * lambdas.mix
        } else {
            Array2::zeros(mix_grad.raw_dim())
        };
        Ok(Self {
            seg,
            reliable: rel.value,
            ambiguous: amb.value,
            mix,
            total: total_loss(seg, rel.value, amb.value, mix, lambdas),
            lambdas,
            grad_original,
            grad_augmented,
            grad_mix,
        })
    }
}
