//! Procedural indoor-like scenes and click annotation.
//!
//! A scene is a square room: an optional floor, up to four walls and a
//! number of objects (boxes, spheres, cylinders) resting on the floor.
//! Class 0 is the floor, class 1 the walls, classes `2..C` are object
//! categories cycling through box, sphere and cylinder with a size variant
//! per cycle. Each class has a mean colour; points get colour noise plus a
//! per-instance tint.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::pointcloud::{save_cloud, CloudFormat, DenseLabels, PointCloud, SparseLabels};
use crate::{Error, Result};

pub const FLOOR_CLASS: usize = 0;
pub const WALL_CLASS: usize = 1;

/// Points reserved for every instance before the area-proportional split.
const MIN_POINTS_PER_INSTANCE: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub n_points: usize,
    pub n_classes: usize,
    pub floor: bool,
    /// Number of walls, 0 to 4.
    pub walls: usize,
    pub objects_min: usize,
    pub objects_max: usize,
    /// Room side length, meters.
    pub extent: f64,
    pub wall_height: f64,
    /// Gaussian noise on surface samples, meters.
    pub surface_noise: f64,
    /// Per-point colour noise (std per channel).
    pub color_noise: f64,
    /// Per-instance colour offset (std per channel).
    pub instance_tint: f64,
    /// Mean colour per class; generated when empty.
    pub palette: Vec<[f64; 3]>,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_points: 4096,
            n_classes: 6,
            floor: true,
            walls: 2,
            objects_min: 4,
            objects_max: 7,
            extent: 4.0,
            wall_height: 2.4,
            surface_noise: 0.01,
            color_noise: 0.1,
            instance_tint: 0.05,
            palette: Vec::new(),
            seed: 0,
        }
    }
}

fn default_palette(n_classes: usize) -> Vec<[f64; 3]> {
    const BASE: [[f64; 3]; 6] = [
        [0.55, 0.50, 0.45], // floor
        [0.80, 0.80, 0.75], // wall
        [0.65, 0.40, 0.20], // table
        [0.25, 0.45, 0.75], // ball
        [0.70, 0.70, 0.40], // pillar
        [0.40, 0.30, 0.25], // cabinet
    ];
    (0..n_classes)
        .map(|c| {
            if c < BASE.len() {
                BASE[c]
            } else {
                let mut rng = crate::rng::stream(0xC0_10_05, &[c as u64]);
                std::array::from_fn(|_| rng.random_range(0.2..0.8))
            }
        })
        .collect()
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::arg("need at least 2 classes"));
        }
        if self.walls > 4 {
            return Err(Error::arg("at most 4 walls"));
        }
        if self.objects_min > self.objects_max {
            return Err(Error::arg("objects_min > objects_max"));
        }
        if self.objects_max > 0 && self.n_classes < 3 {
            return Err(Error::arg("objects need at least 3 classes"));
        }
        if !self.floor && self.walls == 0 && self.objects_max == 0 {
            return Err(Error::arg("scene config has no floor, walls or objects"));
        }
        let max_instances = self.floor as usize + self.walls + self.objects_max;
        if self.n_points < max_instances {
            return Err(Error::arg(format!(
                "{} points cannot cover up to {max_instances} instances",
                self.n_points
            )));
        }
        for v in [
            self.extent,
            self.wall_height,
            self.surface_noise,
            self.color_noise,
            self.instance_tint,
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::arg("scene dimensions and noise levels must be finite and ≥ 0"));
            }
        }
        if self.extent <= 0.0 {
            return Err(Error::arg("extent must be > 0"));
        }
        if !self.palette.is_empty() && self.palette.len() != self.n_classes {
            return Err(Error::arg(format!(
                "palette has {} colours for {} classes",
                self.palette.len(),
                self.n_classes
            )));
        }
        Ok(())
    }

    pub fn class_colors(&self) -> Vec<[f64; 3]> {
        if self.palette.is_empty() {
            default_palette(self.n_classes)
        } else {
            self.palette.clone()
        }
    }

    /// The config of scene `index` of a dataset.
    pub fn for_scene(&self, index: usize) -> Self {
        Self {
            seed: self.seed.wrapping_add(index as u64),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Floor,
    Wall { side: usize },
    Box { center: [f64; 2], size: [f64; 3], yaw: f64 },
    Sphere { center: [f64; 2], radius: f64 },
    Cylinder { center: [f64; 2], radius: f64, height: f64 },
}

struct Instance {
    class: usize,
    shape: Shape,
}

impl Shape {
    fn area(&self, extent: f64, wall_height: f64) -> f64 {
        match *self {
            Shape::Floor => extent * extent,
            Shape::Wall { .. } => extent * wall_height,
            Shape::Box { size: [a, b, c], .. } => a * b + 2.0 * c * (a + b),
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::Cylinder { radius, height, .. } => TAU * radius * height + PI * radius * radius,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, extent: f64, wall_height: f64, rng: &mut R) -> [f64; 3] {
        match *self {
            Shape::Floor => [rng.random_range(0.0..extent), rng.random_range(0.0..extent), 0.0],
            Shape::Wall { side } => {
                let u = rng.random_range(0.0..extent);
                let z = rng.random_range(0.0..wall_height);
                match side {
                    0 => [u, 0.0, z],
                    1 => [0.0, u, z],
                    2 => [u, extent, z],
                    _ => [extent, u, z],
                }
            }
            Shape::Box { center, size, yaw } => {
                let [a, b, c] = size;
                let faces = [a * b, a * c, a * c, b * c, b * c];
                let total: f64 = faces.iter().sum();
                let mut pick = rng.random_range(0.0..total);
                let mut face = 0;
                while face < 4 && pick >= faces[face] {
                    pick -= faces[face];
                    face += 1;
                }
                let u = rng.random_range(-0.5..0.5);
                let v = rng.random_range(-0.5..0.5);
                let z01 = rng.random_range(0.0..1.0);
                let (lx, ly, z) = match face {
                    0 => (u * a, v * b, c),
                    1 => (u * a, -0.5 * b, z01 * c),
                    2 => (u * a, 0.5 * b, z01 * c),
                    3 => (-0.5 * a, v * b, z01 * c),
                    _ => (0.5 * a, v * b, z01 * c),
                };
                let (s, co) = yaw.sin_cos();
                [center[0] + co * lx - s * ly, center[1] + s * lx + co * ly, z]
            }
            Shape::Sphere { center, radius } => {
                let d: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-12);
                [
                    center[0] + radius * d[0] / norm,
                    center[1] + radius * d[1] / norm,
                    radius + radius * d[2] / norm,
                ]
            }
            Shape::Cylinder {
                center,
                radius,
                height,
            } => {
                let lateral = TAU * radius * height;
                let top = PI * radius * radius;
                let theta = rng.random_range(0.0..TAU);
                if rng.random_range(0.0..lateral + top) < lateral {
                    [
                        center[0] + radius * theta.cos(),
                        center[1] + radius * theta.sin(),
                        rng.random_range(0.0..height),
                    ]
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    [center[0] + r * theta.cos(), center[1] + r * theta.sin(), height]
                }
            }
        }
    }
}

fn object_shape<R: Rng + ?Sized>(class: usize, extent: f64, rng: &mut R) -> Shape {
    let kind = (class - 2) % 3;
    let variant = (class - 2) / 3;
    let place = |half: f64, rng: &mut R| -> [f64; 2] {
        let m = (half + 0.05).min(extent / 2.0);
        [rng.random_range(m..=extent - m), rng.random_range(m..=extent - m)]
    };
    match (kind, variant % 2) {
        (0, 0) => {
            let size = [
                rng.random_range(0.6..1.2),
                rng.random_range(0.6..1.2),
                rng.random_range(0.4..0.8),
            ];
            Shape::Box {
                center: place(0.6, rng),
                size,
                yaw: rng.random_range(0.0..PI),
            }
        }
        (0, _) => {
            let size = [
                rng.random_range(0.3..0.6),
                rng.random_range(0.3..0.6),
                rng.random_range(1.0..1.8),
            ];
            Shape::Box {
                center: place(0.45, rng),
                size,
                yaw: rng.random_range(0.0..PI),
            }
        }
        (1, v) => {
            let radius = if v == 0 {
                rng.random_range(0.2..0.45)
            } else {
                rng.random_range(0.1..0.2)
            };
            Shape::Sphere {
                center: place(radius, rng),
                radius,
            }
        }
        (_, v) => {
            let (radius, height) = if v == 0 {
                (rng.random_range(0.1..0.25), rng.random_range(0.8..1.6))
            } else {
                (rng.random_range(0.25..0.4), rng.random_range(0.3..0.6))
            };
            Shape::Cylinder {
                center: place(radius, rng),
                radius,
                height,
            }
        }
    }
}

/// Splits `n` points over instances: a fixed minimum each, the rest in
/// proportion to surface area (largest remainder).
fn allocate_points(n: usize, areas: &[f64]) -> Vec<usize> {
    let base = MIN_POINTS_PER_INSTANCE.min(n / areas.len());
    let rest = n - base * areas.len();
    let total: f64 = areas.iter().sum();
    let exact: Vec<f64> = areas.iter().map(|a| rest as f64 * a / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(rest - assigned) {
        counts[i] += 1;
    }
    counts.iter().map(|c| c + base).collect()
}

pub fn generate_scene(config: &SceneConfig) -> Result<(PointCloud, DenseLabels)> {
    config.validate()?;
    let mut rng = crate::rng::seeded(config.seed);
    let colors = config.class_colors();

    let mut instances = Vec::new();
    if config.floor {
        instances.push(Instance {
            class: FLOOR_CLASS,
            shape: Shape::Floor,
        });
    }
    let mut sides = [0usize, 1, 2, 3];
    sides.shuffle(&mut rng);
    for &side in sides.iter().take(config.walls) {
        instances.push(Instance {
            class: WALL_CLASS,
            shape: Shape::Wall { side },
        });
    }
    let n_objects = rng.random_range(config.objects_min..=config.objects_max);
    let object_classes = config.n_classes - 2;
    for o in 0..n_objects {
        // cover every object class first, then draw at random
        let class = if o < object_classes {
            2 + o
        } else {
            2 + rng.random_range(0..object_classes)
        };
        instances.push(Instance {
            class,
            shape: object_shape(class, config.extent, &mut rng),
        });
    }
    if instances.is_empty() {
        return Err(Error::arg("scene has no instances"));
    }

    let areas: Vec<f64> = instances
        .iter()
        .map(|i| i.shape.area(config.extent, config.wall_height).max(1e-6))
        .collect();
    let counts = allocate_points(config.n_points, &areas);

    let surface = Normal::new(0.0, config.surface_noise.max(0.0)).map_err(|e| Error::arg(e.to_string()))?;
    let color = Normal::new(0.0, config.color_noise.max(0.0)).map_err(|e| Error::arg(e.to_string()))?;
    let tint = Normal::new(0.0, config.instance_tint.max(0.0)).map_err(|e| Error::arg(e.to_string()))?;

    let mut rows: Vec<([f64; 3], [f64; 3], usize, i64)> = Vec::with_capacity(config.n_points);
    for (id, (inst, &count)) in instances.iter().zip(&counts).enumerate() {
        let base = colors[inst.class];
        let offset: [f64; 3] = std::array::from_fn(|_| tint.sample(&mut rng));
        for _ in 0..count {
            let mut p = inst.shape.sample(config.extent, config.wall_height, &mut rng);
            for v in p.iter_mut() {
                *v += surface.sample(&mut rng);
            }
            let rgb: [f64; 3] =
                std::array::from_fn(|c| (base[c] + offset[c] + color.sample(&mut rng)).clamp(0.0, 1.0));
            rows.push((p, rgb, inst.class, id as i64));
        }
    }
    rows.shuffle(&mut rng);

    let n = rows.len();
    let locations = Array2::from_shape_fn((n, 3), |(i, j)| rows[i].0[j]);
    let features = Array2::from_shape_fn((n, 3), |(i, j)| rows[i].1[j]);
    let labels = DenseLabels::new(
        rows.iter().map(|r| r.2).collect(),
        rows.iter().map(|r| r.3).collect(),
    )?;
    Ok((PointCloud::new(locations, features)?, labels))
}

/// Weak annotation: `clicks_per_thing` random points per object instance
/// (1 = one-thing-one-click, 3 = one-thing-three-clicks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickScheme {
    pub clicks_per_thing: usize,
    pub seed: u64,
}

impl ClickScheme {
    pub fn otoc(seed: u64) -> Self {
        Self {
            clicks_per_thing: 1,
            seed,
        }
    }

    pub fn ottc(seed: u64) -> Self {
        Self {
            clicks_per_thing: 3,
            seed,
        }
    }
}

pub fn sample_clicks(labels: &DenseLabels, scheme: &ClickScheme, n_classes: usize) -> Result<SparseLabels> {
    if scheme.clicks_per_thing == 0 {
        return Err(Error::arg("clicks_per_thing must be ≥ 1"));
    }
    let mut by_instance: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    for (i, &inst) in labels.instance_per_point.iter().enumerate() {
        if inst >= 0 {
            by_instance.entry(inst).or_default().push(i);
        }
    }
    let mut rng = crate::rng::seeded(scheme.seed);
    let mut entries = Vec::new();
    for (inst, points) in &by_instance {
        if points.len() < scheme.clicks_per_thing {
            return Err(Error::Annotation(format!(
                "instance {inst} has {} points, fewer than {} clicks",
                points.len(),
                scheme.clicks_per_thing
            )));
        }
        let mut chosen: Vec<usize> =
            rand::seq::index::sample(&mut rng, points.len(), scheme.clicks_per_thing)
                .into_iter()
                .map(|k| points[k])
                .collect();
        chosen.sort_unstable();
        entries.extend(chosen.into_iter().map(|i| (i, labels.class_per_point[i])));
    }
    SparseLabels::new(entries, labels.len(), n_classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub split: Split,
    pub cloud_path: PathBuf,
    pub clicks_path: PathBuf,
}

/// Dataset manifest: `#`-prefixed `key=value` metadata, then one scene per
/// line as `split<TAB>cloud_path<TAB>clicks_path`. Relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub n_classes: usize,
    pub labeled_points: usize,
    pub train_points: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// `Σ M / Σ N` over the training split.
    pub fn label_fraction(&self) -> f64 {
        if self.train_points == 0 {
            0.0
        } else {
            self.labeled_points as f64 / self.train_points as f64
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# n_classes={}\n# labeled_points={}\n# train_points={}\n# label_fraction={}\n",
            self.n_classes,
            self.labeled_points,
            self.train_points,
            self.label_fraction()
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                e.split.as_str(),
                e.cloud_path.display(),
                e.clicks_path.display()
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n_classes = None;
        let mut labeled_points = 0;
        let mut train_points = 0;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.trim().split_once('=') {
                    let parsed = || value.parse::<usize>().map_err(|e| err(format!("{key}: {e}")));
                    match key {
                        "n_classes" => n_classes = Some(parsed()?),
                        "labeled_points" => labeled_points = parsed()?,
                        "train_points" => train_points = parsed()?,
                        _ => {}
                    }
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, found {}", cols.len())));
            }
            let split = match cols[0] {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(err(format!("unknown split {other:?}"))),
            };
            entries.push(ManifestEntry {
                split,
                cloud_path: PathBuf::from(cols[1]),
                clicks_path: PathBuf::from(cols[2]),
            });
        }
        let n_classes = n_classes.ok_or_else(|| Error::Format("manifest lacks n_classes".into()))?;
        Ok(Self {
            n_classes,
            labeled_points,
            train_points,
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Generates `n_train + n_test` scenes into `out_dir` and writes the
/// manifest. Scene `i` uses seed `config.seed + i`, its clicks
/// `scheme.seed + i`.
pub fn make_dataset(
    config: &SceneConfig,
    n_train: usize,
    n_test: usize,
    scheme: &ClickScheme,
    out_dir: &Path,
) -> Result<(PathBuf, Manifest)> {
    config.validate()?;
    if n_train + n_test == 0 {
        return Err(Error::arg("dataset needs at least one scene"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = Manifest {
        n_classes: config.n_classes,
        labeled_points: 0,
        train_points: 0,
        entries: Vec::new(),
    };
    for i in 0..n_train + n_test {
        let split = if i < n_train { Split::Train } else { Split::Test };
        let (cloud, dense) = generate_scene(&config.for_scene(i))?;
        let clicks = sample_clicks(
            &dense,
            &ClickScheme {
                seed: scheme.seed.wrapping_add(i as u64),
                ..*scheme
            },
            config.n_classes,
        )?;
        let cloud_name = format!("scene_{i:04}.bin");
        let clicks_name = format!("scene_{i:04}.clicks");
        save_cloud(&cloud, Some(&dense), &out_dir.join(&cloud_name), CloudFormat::Binary)?;
        let clicks_path = out_dir.join(&clicks_name);
        fs::write(&clicks_path, clicks.to_clicks_text()).map_err(|e| Error::io(&clicks_path, e))?;
        if split == Split::Train {
            manifest.labeled_points += clicks.n_labeled();
            manifest.train_points += cloud.n_points();
        }
        manifest.entries.push(ManifestEntry {
            split,
            cloud_path: cloud_name.into(),
            clicks_path: clicks_name.into(),
        });
    }
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok((path, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n_instances(labels: &DenseLabels) -> usize {
        let mut ids: Vec<i64> = labels.instance_per_point.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    #[test]
    fn floor_only_scene() {
        let cfg = SceneConfig {
            walls: 0,
            objects_min: 0,
            objects_max: 0,
            n_points: 500,
            ..Default::default()
        };
        let (cloud, labels) = generate_scene(&cfg).unwrap();
        assert_eq!(cloud.n_points(), 500);
        assert!(labels.class_per_point.iter().all(|&c| c == FLOOR_CLASS));
    }

    #[test]
    fn shape_and_determinism() {
        let cfg = SceneConfig::default();
        let (a, la) = generate_scene(&cfg).unwrap();
        assert_eq!(a.n_points(), 4096);
        assert_eq!(a.feature_dim(), 3);
        let (b, lb) = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = generate_scene(&cfg.for_scene(1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn infeasible_configs() {
        let empty = SceneConfig {
            floor: false,
            walls: 0,
            objects_min: 0,
            objects_max: 0,
            ..Default::default()
        };
        assert!(generate_scene(&empty).is_err());
        let two_class_objects = SceneConfig {
            n_classes: 2,
            ..Default::default()
        };
        assert!(generate_scene(&two_class_objects).is_err());
    }

    #[test]
    fn all_classes_present_when_enough_objects() {
        let cfg = SceneConfig {
            objects_min: 6,
            objects_max: 8,
            ..Default::default()
        };
        for s in 0..5 {
            let (_, labels) = generate_scene(&cfg.for_scene(s)).unwrap();
            for c in 0..cfg.n_classes {
                assert!(labels.class_per_point.contains(&c), "class {c} missing");
            }
        }
    }

    #[test]
    fn otoc_and_ottc_counts() {
        let cfg = SceneConfig {
            walls: 2,
            objects_min: 4,
            objects_max: 4,
            ..Default::default()
        };
        let (_, labels) = generate_scene(&cfg).unwrap();
        let inst = n_instances(&labels);
        assert_eq!(inst, 7);
        let one = sample_clicks(&labels, &ClickScheme::otoc(1), 6).unwrap();
        assert_eq!(one.n_labeled(), 7);
        let three = sample_clicks(&labels, &ClickScheme::ottc(1), 6).unwrap();
        assert_eq!(three.n_labeled(), 21);
        for &(i, c) in three.entries() {
            assert_eq!(labels.class_per_point[i], c);
        }
    }

    #[test]
    fn tiny_instance_is_annotation_error() {
        let labels = DenseLabels::new(vec![0, 0, 1], vec![0, 0, 1]).unwrap();
        match sample_clicks(&labels, &ClickScheme::ottc(0), 2) {
            Err(Error::Annotation(msg)) => assert!(msg.contains("instance 0")),
            other => panic!("expected annotation error, got {other:?}"),
        }
    }

    #[test]
    fn allocation_sums_to_n() {
        let counts = allocate_points(1000, &[16.0, 9.6, 0.5, 0.01]);
        assert_eq!(counts.iter().sum::<usize>(), 1000);
        assert!(counts.iter().all(|&c| c >= MIN_POINTS_PER_INSTANCE));
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            n_classes: 6,
            labeled_points: 3,
            train_points: 100,
            entries: vec![ManifestEntry {
                split: Split::Train,
                cloud_path: "a.bin".into(),
                clicks_path: "a.clicks".into(),
            }],
        };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        assert!(Manifest::parse("# n_classes=2\nvalid\ta\tb\n").is_err());
    }
}
