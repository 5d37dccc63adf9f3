//! Point clouds, annotations, file formats and neighbourhood queries.
//!
//! Point identity is positional: row `i` of every view derived from a cloud
//! refers to the same physical point.

mod io;
mod knn;

pub use io::{load_cloud, save_cloud, CloudFormat, BINARY_MAGIC};
pub use knn::knn_indices;

use ndarray::{concatenate, Array2, ArrayView1, Axis};

use crate::{Error, Result};

/// `N` points with 3D locations and `D_f` per-point features.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    locations: Array2<f64>,
    features: Array2<f64>,
}

impl PointCloud {
    pub fn new(locations: Array2<f64>, features: Array2<f64>) -> Result<Self> {
        if locations.ncols() != 3 {
            return Err(Error::arg(format!(
                "locations must have 3 columns, got {}",
                locations.ncols()
            )));
        }
        if locations.nrows() == 0 {
            return Err(Error::EmptyInput("point cloud has no points".into()));
        }
        if locations.nrows() != features.nrows() {
            return Err(Error::arg(format!(
                "locations have {} rows but features have {}",
                locations.nrows(),
                features.nrows()
            )));
        }
        if let Some(v) = locations.iter().chain(features.iter()).find(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite value {v} in point cloud")));
        }
        Ok(Self {
            locations,
            features,
        })
    }

    /// Builds a cloud with no per-point features.
    pub fn from_locations(locations: Array2<f64>) -> Result<Self> {
        let n = locations.nrows();
        Self::new(locations, Array2::zeros((n, 0)))
    }

    pub fn n_points(&self) -> usize {
        self.locations.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn locations(&self) -> &Array2<f64> {
        &self.locations
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn location(&self, i: usize) -> ArrayView1<'_, f64> {
        self.locations.row(i)
    }

    /// `[L, F]` as a single `N × (3 + D_f)` matrix.
    pub fn stacked(&self) -> Array2<f64> {
        concatenate(Axis(1), &[self.locations.view(), self.features.view()])
            .expect("row counts checked at construction")
    }

    /// Replaces the locations, keeping features and row order.
    pub fn with_locations(&self, locations: Array2<f64>) -> Result<Self> {
        Self::new(locations, self.features.clone())
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.n_points() as f64;
        let mut c = [0.0; 3];
        for row in self.locations.rows() {
            for d in 0..3 {
                c[d] += row[d];
            }
        }
        c.map(|v| v / n)
    }

    /// Same shape (`N`, `D_f`) as `other`.
    pub fn same_shape(&self, other: &PointCloud) -> bool {
        self.n_points() == other.n_points() && self.feature_dim() == other.feature_dim()
    }
}

/// The `M` manually labelled points of a scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseLabels {
    entries: Vec<(usize, usize)>,
}

impl SparseLabels {
    /// Validates indices against a cloud of `n_points` and `n_classes` classes.
    pub fn new(entries: Vec<(usize, usize)>, n_points: usize, n_classes: usize) -> Result<Self> {
        if entries.len() > n_points {
            return Err(Error::arg(format!(
                "{} labels for {} points",
                entries.len(),
                n_points
            )));
        }
        let mut seen = vec![false; n_points];
        for &(idx, class) in &entries {
            if idx >= n_points {
                return Err(Error::arg(format!(
                    "label index {idx} out of range for {n_points} points"
                )));
            }
            if class >= n_classes {
                return Err(Error::arg(format!(
                    "class {class} out of range for {n_classes} classes"
                )));
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::arg(format!("duplicate label index {idx}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn n_labeled(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the click file format: one `point_index class_id` pair per line.
    pub fn parse_clicks(text: &str, n_points: usize, n_classes: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("{s:?}: {e}"),
                })
            };
            if cols.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            entries.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(entries, n_points, n_classes)
    }

    pub fn to_clicks_text(&self) -> String {
        self.entries
            .iter()
            .map(|(i, c)| format!("{i} {c}\n"))
            .collect()
    }
}

/// Dense per-point ground truth. Only used for scene generation and
/// evaluation; training sees it through [`SparseLabels`] alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLabels {
    pub class_per_point: Vec<usize>,
    /// Instance ids; `-1` marks an unknown instance.
    pub instance_per_point: Vec<i64>,
}

impl DenseLabels {
    pub fn new(class_per_point: Vec<usize>, instance_per_point: Vec<i64>) -> Result<Self> {
        if class_per_point.len() != instance_per_point.len() {
            return Err(Error::arg("class and instance vectors differ in length"));
        }
        Ok(Self {
            class_per_point,
            instance_per_point,
        })
    }

    pub fn len(&self) -> usize {
        self.class_per_point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_per_point.is_empty()
    }

    pub fn n_classes_present(&self) -> usize {
        self.class_per_point.iter().max().map_or(0, |m| m + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_mismatched_rows_and_nan() {
        let loc = array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert!(PointCloud::new(loc.clone(), Array2::zeros((1, 2))).is_err());
        let mut bad = loc.clone();
        bad[[1, 2]] = f64::NAN;
        assert!(PointCloud::from_locations(bad).is_err());
        assert!(PointCloud::from_locations(Array2::zeros((0, 3))).is_err());
        assert!(PointCloud::from_locations(loc).is_ok());
    }

    #[test]
    fn sparse_labels_validate() {
        assert!(SparseLabels::new(vec![(0, 1), (2, 0)], 3, 2).is_ok());
        assert!(SparseLabels::new(vec![(3, 0)], 3, 2).is_err());
        assert!(SparseLabels::new(vec![(0, 2)], 3, 2).is_err());
        assert!(SparseLabels::new(vec![(1, 0), (1, 1)], 3, 2).is_err());
    }

    #[test]
    fn clicks_text_round_trip() {
        let labels = SparseLabels::new(vec![(5, 1), (0, 3)], 10, 4).unwrap();
        let text = labels.to_clicks_text();
        assert_eq!(text, "5 1\n0 3\n");
        assert_eq!(SparseLabels::parse_clicks(&text, 10, 4).unwrap(), labels);
        assert!(matches!(
            SparseLabels::parse_clicks("1 2 3\n", 10, 4),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
