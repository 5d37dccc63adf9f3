//! Multi-view confidence and uncertainty, and the reliable/ambiguous split.
//!
//! With the original prediction `P` and `K` augmented predictions, the
//! confidence is the element-wise mean `P̄` of the `K + 1` views and the
//! uncertainty the element-wise population standard deviation. A point is
//! reliable iff some class `c` has `P̄[c] ≥ τ` and `σ[c] ≤ κ` on the same
//! class.

use ndarray::{Array2, Zip};

use crate::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;

pub const DEFAULT_TAU: f64 = 0.7;
pub const DEFAULT_KAPPA: f64 = 0.05;

fn check_probabilities(name: &str, p: &Array2<f64>) -> Result<()> {
    for (i, row) in p.rows().into_iter().enumerate() {
        if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg(format!("{name}: row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::arg(format!("{name}: row {i} sums to {s}")));
        }
    }
    Ok(())
}

fn check_views(original: &Array2<f64>, augmented: &[Array2<f64>]) -> Result<()> {
    if augmented.is_empty() {
        return Err(Error::arg("need at least one augmented view (K ≥ 1)"));
    }
    for (k, a) in augmented.iter().enumerate() {
        if a.dim() != original.dim() {
            return Err(Error::arg(format!(
                "augmented view {k} has shape {:?}, original {:?}",
                a.dim(),
                original.dim()
            )));
        }
    }
    Ok(())
}

/// Element-wise mean over the original and the `K` augmented predictions.
pub fn mean_prediction(original: &Array2<f64>, augmented: &[Array2<f64>]) -> Result<Array2<f64>> {
    check_views(original, augmented)?;
    check_probabilities("original", original)?;
    for a in augmented {
        check_probabilities("augmented", a)?;
    }
    let mut sum = original.clone();
    for a in augmented {
        sum += a;
    }
    let views = (augmented.len() + 1) as f64;
    Ok(sum.mapv_into(|v| v / views))
}

/// Element-wise population standard deviation over the `K + 1` views.
pub fn uncertainty(
    original: &Array2<f64>,
    augmented: &[Array2<f64>],
    mean: &Array2<f64>,
) -> Result<Array2<f64>> {
    check_views(original, augmented)?;
    if mean.dim() != original.dim() {
        return Err(Error::arg("mean shape differs from predictions"));
    }
    let mut acc = Zip::from(original)
        .and(mean)
        .map_collect(|p, m| (p - m) * (p - m));
    for a in augmented {
        Zip::from(&mut acc)
            .and(a)
            .and(mean)
            .for_each(|s, p, m| *s += (p - m) * (p - m));
    }
    let views = (augmented.len() + 1) as f64;
    Ok(acc.mapv_into(|s| (s / views).sqrt()))
}

/// Reliability split of one scene's points.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityPartition {
    /// `true` for reliable points.
    pub mask: Vec<bool>,
    /// One-hot pseudo labels; all-zero rows at ambiguous points.
    pub one_hot: Array2<f64>,
    /// Soft pseudo labels (the original prediction); all-zero rows at
    /// reliable points.
    pub soft: Array2<f64>,
    /// Argmax class of the original prediction, meaningful where `mask` is set.
    pub hard_labels: Vec<usize>,
    pub tau: f64,
    pub kappa: f64,
}

impl ReliabilityPartition {
    pub fn n_points(&self) -> usize {
        self.mask.len()
    }

    pub fn reliable_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn ambiguous_count(&self) -> usize {
        self.n_points() - self.reliable_count()
    }

    pub fn reliable_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }
}

pub fn validate_thresholds(tau: f64, kappa: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::arg(format!("tau must be in (0, 1), got {tau}")));
    }
    // κ = +∞ is allowed and selects by confidence alone
    if kappa.is_nan() || kappa < 0.0 {
        return Err(Error::arg(format!("kappa must be ≥ 0, got {kappa}")));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest class.
pub fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

pub fn partition(
    original: &Array2<f64>,
    mean: &Array2<f64>,
    deviation: &Array2<f64>,
    tau: f64,
    kappa: f64,
) -> Result<ReliabilityPartition> {
    validate_thresholds(tau, kappa)?;
    if mean.dim() != original.dim() || deviation.dim() != original.dim() {
        return Err(Error::arg("partition inputs differ in shape"));
    }
    let (n, c) = original.dim();
    let mut mask = vec![false; n];
    let mut one_hot = Array2::zeros((n, c));
    let mut soft = Array2::zeros((n, c));
    let mut hard_labels = vec![0; n];
    for i in 0..n {
        let reliable = (0..c).any(|j| mean[[i, j]] >= tau && deviation[[i, j]] <= kappa);
        let label = argmax(original.row(i));
        hard_labels[i] = label;
        mask[i] = reliable;
        if reliable {
            one_hot[[i, label]] = 1.0;
        } else {
            soft.row_mut(i).assign(&original.row(i));
        }
    }
    Ok(ReliabilityPartition {
        mask,
        one_hot,
        soft,
        hard_labels,
        tau,
        kappa,
    })
}

/// Mean, deviation and partition in one call.
pub fn split(
    original: &Array2<f64>,
    augmented: &[Array2<f64>],
    tau: f64,
    kappa: f64,
) -> Result<(Array2<f64>, Array2<f64>, ReliabilityPartition)> {
    let mean = mean_prediction(original, augmented)?;
    let dev = uncertainty(original, augmented, &mean)?;
    let part = partition(original, &mean, &dev, tau, kappa)?;
    Ok((mean, dev, part))
}
