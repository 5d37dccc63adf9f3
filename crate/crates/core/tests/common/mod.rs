//! Independent reference implementations used by the integration tests.
//! Everything here is written as plain loops over `Vec`s so that it shares
//! no code path with the library.

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;

pub fn random_probs<R: Rng>(rng: &mut R, n: usize, c: usize) -> Array2<f64> {
    let mut p = Array2::zeros((n, c));
    for i in 0..n {
        // Occasionally peaked rows so that confident points occur.
        let sharp = if rng.random_bool(0.5) { 6.0 } else { 1.0 };
        let raw: Vec<f64> = (0..c).map(|_| (sharp * rng.random::<f64>()).exp()).collect();
        let s: f64 = raw.iter().sum();
        for j in 0..c {
            p[[i, j]] = raw[j] / s;
        }
    }
    p
}

pub fn random_logits<R: Rng>(rng: &mut R, n: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, c), |_| scale * (2.0 * rng.random::<f64>() - 1.0))
}

pub struct Reliability {
    pub mean: Vec<Vec<f64>>,
    pub dev: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub hard: Vec<usize>,
}

/// Mean over K+1 views, population deviation, and the indicator
/// `Σ_c [mean ≥ τ][dev ≤ κ] > 0`, evaluated literally.
pub fn reliability(original: &Array2<f64>, augmented: &[Array2<f64>], tau: f64, kappa: f64) -> Reliability {
    let (n, c) = original.dim();
    let views: Vec<&Array2<f64>> = std::iter::once(original).chain(augmented.iter()).collect();
    let count = views.len() as f64;
    let mut mean = vec![vec![0.0; c]; n];
    let mut dev = vec![vec![0.0; c]; n];
    let mut mask = vec![false; n];
    let mut hard = vec![0; n];
    for i in 0..n {
        for j in 0..c {
            let mut s = 0.0;
            for v in &views {
                s += v[[i, j]];
            }
            mean[i][j] = s / count;
            let mut q = 0.0;
            for v in &views {
                let d = v[[i, j]] - mean[i][j];
                q += d * d;
            }
            dev[i][j] = (q / count).sqrt();
        }
        let mut indicator = 0;
        for j in 0..c {
            if mean[i][j] >= tau && dev[i][j] <= kappa {
                indicator += 1;
            }
        }
        mask[i] = indicator > 0;
        let mut best = 0;
        for j in 1..c {
            if original[[i, j]] > original[[i, best]] {
                best = j;
            }
        }
        hard[i] = best;
    }
    Reliability { mean, dev, mask, hard }
}

pub fn softmax_row(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn row(a: &Array2<f64>, i: usize) -> Vec<f64> {
    a.row(i).to_vec()
}

fn ln(v: f64) -> f64 {
    v.max(1e-12).ln()
}

/// Mean cross-entropy over `selected` points against class `labels[i]`.
pub fn ce(logits: &Array2<f64>, selected: &[usize], labels: &[usize]) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for &i in selected {
        s -= ln(softmax_row(&row(logits, i))[labels[i]]);
    }
    s / selected.len() as f64
}

/// Mean KL(t ‖ p) over `selected`.
pub fn kl(logits: &Array2<f64>, target: &Array2<f64>, selected: &[usize]) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for &i in selected {
        let p = softmax_row(&row(logits, i));
        for (j, pj) in p.iter().enumerate() {
            let t = target[[i, j]];
            if t > 0.0 {
                s += t * (ln(t) - ln(*pj));
            }
        }
    }
    s / selected.len() as f64
}

/// Mean over `selected` points and classes of the squared probability error.
pub fn mse(logits: &Array2<f64>, target: &Array2<f64>, selected: &[usize]) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let c = logits.ncols();
    let mut s = 0.0;
    for &i in selected {
        let p = softmax_row(&row(logits, i));
        for j in 0..c {
            let d = p[j] - target[[i, j]];
            s += d * d;
        }
    }
    s / (selected.len() * c) as f64
}

/// Per-class soft Dice loss with smoothing 1 over `selected`, averaged over classes.
pub fn dice(logits: &Array2<f64>, labels: &[usize], selected: &[usize]) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    let c = logits.ncols();
    let mut total = 0.0;
    for class in 0..c {
        let (mut inter, mut pp, mut yy) = (0.0, 0.0, 0.0);
        for &i in selected {
            let p = softmax_row(&row(logits, i))[class];
            let y = if labels[i] == class { 1.0 } else { 0.0 };
            inter += p * y;
            pp += p * p;
            yy += y * y;
        }
        total += 1.0 - (2.0 * inter + 1.0) / (pp + yy + 1.0);
    }
    total / c as f64
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn numeric_grad(x: &Array2<f64>, h: f64, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let (i, j) = (idx / x.ncols(), idx % x.ncols());
        let orig = probe[[i, j]];
        probe[[i, j]] = orig + h;
        let up = f(&probe);
        probe[[i, j]] = orig - h;
        let down = f(&probe);
        probe[[i, j]] = orig;
        g[[i, j]] = (up - down) / (2.0 * h);
    }
    g
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute norm when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

pub fn pairwise_distances(points: &Array2<f64>) -> Vec<f64> {
    let n = points.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for d in 0..3 {
                let v = points[[i, d]] - points[[j, d]];
                s += v * v;
            }
            out.push(s.sqrt());
        }
    }
    out
}

/// Exhaustive k-NN: sort every other point by (distance, index), self first.
pub fn knn(points: &Array2<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = points.nrows();
    (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let mut s = 0.0;
                    for d in 0..3 {
                        let v = points[[i, d]] - points[[j, d]];
                        s += v * v;
                    }
                    (s, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            std::iter::once(i).chain(others.into_iter().map(|(_, j)| j)).take(k).collect()
        })
        .collect()
}
