mod common;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use racnet::reliability::{mean_prediction, partition, split, uncertainty};

const TRIALS: usize = 1000;

fn instance(rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<Array2<f64>>, f64, f64) {
    let n = rng.random_range(1..=32);
    let c = rng.random_range(2..=5);
    let k = rng.random_range(1..=3);
    let original = common::random_probs(rng, n, c);
    let augmented = (0..k)
        .map(|_| {
            // Some views copy the original so zero and tiny deviations occur.
            if rng.random_bool(0.3) {
                original.clone()
            } else {
                common::random_probs(rng, n, c)
            }
        })
        .collect();
    let tau = rng.random_range(0.3..0.95);
    let kappa = if rng.random_bool(0.1) { f64::INFINITY } else { rng.random_range(0.0..0.3) };
    (original, augmented, tau, kappa)
}

#[test]
fn agrees_with_literal_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut reliable_seen = 0;
    let mut ambiguous_seen = 0;
    for trial in 0..TRIALS {
        let (p, aug, tau, kappa) = instance(&mut rng);
        let oracle = common::reliability(&p, &aug, tau, kappa);
        let (mean, dev, part) = split(&p, &aug, tau, kappa).unwrap();
        for i in 0..p.nrows() {
            for j in 0..p.ncols() {
                assert!((mean[[i, j]] - oracle.mean[i][j]).abs() <= 1e-12, "trial {trial} mean");
                assert!((dev[[i, j]] - oracle.dev[i][j]).abs() <= 1e-12, "trial {trial} dev");
            }
            assert_eq!(part.mask[i], oracle.mask[i], "trial {trial} point {i}");
            if part.mask[i] {
                reliable_seen += 1;
                let ones: Vec<usize> = (0..p.ncols()).filter(|&j| part.one_hot[[i, j]] == 1.0).collect();
                assert_eq!(ones, vec![oracle.hard[i]]);
                assert_eq!(part.one_hot.row(i).sum(), 1.0);
            } else {
                ambiguous_seen += 1;
                assert_eq!(part.soft.row(i), p.row(i));
            }
        }
        assert_eq!(part.reliable_count() + part.ambiguous_count(), p.nrows());
    }
    assert!(reliable_seen > 1000 && ambiguous_seen > 1000, "{reliable_seen} {ambiguous_seen}");
}

#[test]
fn deviation_is_bounded_by_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..TRIALS {
        let (p, aug, _, _) = instance(&mut rng);
        let mean = mean_prediction(&p, &aug).unwrap();
        let dev = uncertainty(&p, &aug, &mean).unwrap();
        worst = worst.max(dev.iter().cloned().fold(0.0, f64::max));
        for row in mean.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
    assert!(worst <= 0.5, "{worst}");
    // Extreme case attains the bound: one view says 1, the other 0.
    let a = ndarray::array![[1.0, 0.0]];
    let b = ndarray::array![[0.0, 1.0]];
    let mean = mean_prediction(&a, std::slice::from_ref(&b)).unwrap();
    assert_eq!(uncertainty(&a, &[b], &mean).unwrap()[[0, 0]], 0.5);
}

#[test]
fn zero_deviation_exactly_when_views_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let (p, aug, _, _) = instance(&mut rng);
        let mean = mean_prediction(&p, &aug).unwrap();
        let dev = uncertainty(&p, &aug, &mean).unwrap();
        for i in 0..p.nrows() {
            for j in 0..p.ncols() {
                let same = aug.iter().all(|a| (a[[i, j]] - p[[i, j]]).abs() <= 1e-12);
                assert_eq!(dev[[i, j]] <= 1e-12, same, "point {i} class {j}");
            }
        }
    }
}

#[test]
fn threshold_exactly_met_counts_as_reliable() {
    let p = ndarray::array![[0.75, 0.25]];
    let mean = ndarray::array![[0.7, 0.3]];
    let dev = ndarray::array![[0.05, 0.05]];
    assert!(partition(&p, &mean, &dev, 0.7, 0.05).unwrap().mask[0]);
    // Confidence on class 0 but low deviation only on class 1: not reliable.
    let dev = ndarray::array![[0.2, 0.01]];
    assert!(!partition(&p, &mean, &dev, 0.7, 0.05).unwrap().mask[0]);
}
