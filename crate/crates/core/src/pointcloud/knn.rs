use ndarray::Array2;
use rayon::prelude::*;

use super::PointCloud;
use crate::{Error, Result};

fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Exact brute-force k nearest neighbours by Euclidean distance on
/// locations. Row `i` starts with `i` itself, followed by the nearest other
/// points in ascending distance; ties go to the lower index. Self comes first
/// even when other points coincide with it.
pub fn knn_indices(cloud: &PointCloud, k: usize) -> Result<Array2<usize>> {
    let n = cloud.n_points();
    if k == 0 || k > n {
        return Err(Error::arg(format!("k must be in 1..={n}, got {k}")));
    }
    let points: Vec<[f64; 3]> = cloud
        .locations()
        .rows()
        .into_iter()
        .map(|r| [r[0], r[1], r[2]])
        .collect();

    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            // Sorted (distance, index) list kept at length k. Scanning j in
            // increasing order means an equal distance never displaces an
            // earlier entry, which gives the lower-index tie-break.
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            best.push((-1.0, i));
            for (j, p) in points.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = squared_distance(&points[i], p);
                if best.len() == k && d >= best[k - 1].0 {
                    continue;
                }
                let pos = best.partition_point(|&(bd, _)| bd <= d);
                best.insert(pos, (d, j));
                best.truncate(k);
            }
            best.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let flat: Vec<usize> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, k), flat).expect("each row has k entries"))
}
