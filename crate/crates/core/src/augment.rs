//! Index-preserving augmentations: PointWolf local deformation, global
//! affine transform, point-wise jitter, and point-wise mix interpolation.
//!
//! Every op keeps `N`, `D_f` and row order; features are left untouched
//! except by [`mix_augment`], which interpolates the full `[L, F]` rows.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pointcloud::PointCloud;
use crate::{Error, Result};

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// `scale · rotation − I`. Exactly zero for the identity transform, which
/// keeps identity parameters bit-exact.
fn linear_minus_identity(rotation: &Mat3, scale: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = scale * rotation[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    m
}

fn apply(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be finite")))
    }
}

// ---------------------------------------------------------------------------
// Affine

/// Global rotation about the vertical axis, isotropic scale and translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub rotation_angle: f64,
    pub scale: f64,
    pub translation: [f64; 3],
}

impl AffineParams {
    pub fn identity() -> Self {
        Self {
            rotation_angle: 0.0,
            scale: 1.0,
            translation: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("affine parameters", &[self.rotation_angle, self.scale])?;
        check_finite("affine translation", &self.translation)?;
        if self.scale <= 0.0 {
            return Err(Error::arg(format!("scale must be > 0, got {}", self.scale)));
        }
        if !(0.0..TAU).contains(&self.rotation_angle) {
            return Err(Error::arg(format!(
                "rotation angle must be in [0, 2π), got {}",
                self.rotation_angle
            )));
        }
        Ok(())
    }
}

/// Sampling ranges for affine views. The angle is always uniform on [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AffineRanges {
    pub scale_min: f64,
    pub scale_max: f64,
    /// Per-axis translation bound, meters.
    pub max_translation: f64,
}

impl Default for AffineRanges {
    fn default() -> Self {
        Self {
            scale_min: 0.8,
            scale_max: 1.25,
            max_translation: 0.2,
        }
    }
}

impl AffineRanges {
    pub fn validate(&self) -> Result<()> {
        check_finite(
            "affine ranges",
            &[self.scale_min, self.scale_max, self.max_translation],
        )?;
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max) || self.max_translation < 0.0
        {
            return Err(Error::arg("affine ranges need 0 < scale_min ≤ scale_max, max_translation ≥ 0"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AffineParams {
        AffineParams {
            rotation_angle: rng.random_range(0.0..TAU),
            scale: rng.random_range(self.scale_min..=self.scale_max),
            translation: std::array::from_fn(|_| {
                rng.random_range(-self.max_translation..=self.max_translation)
            }),
        }
    }
}

/// Rotates and scales about the centroid, then translates.
pub fn affine_transform(cloud: &PointCloud, params: &AffineParams) -> Result<PointCloud> {
    params.validate()?;
    let m = linear_minus_identity(&rot_z(params.rotation_angle), params.scale);
    let c = cloud.centroid();
    let t = params.translation;
    let mut out = cloud.locations().clone();
    for mut row in out.rows_mut() {
        let d = apply(&m, [row[0] - c[0], row[1] - c[1], row[2] - c[2]]);
        for a in 0..3 {
            row[a] += d[a] + t[a];
        }
    }
    cloud.with_locations(out)
}

// ---------------------------------------------------------------------------
// Point-wise noise

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    /// Per-coordinate Gaussian standard deviation, meters.
    pub sigma: f64,
    /// Absolute displacement bound, meters.
    pub clip: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            clip: 0.05,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        check_finite("noise parameters", &[self.sigma, self.clip])?;
        if self.sigma < 0.0 || self.clip < 0.0 {
            return Err(Error::arg("noise sigma and clip must be ≥ 0"));
        }
        Ok(())
    }
}

pub fn pointwise_noise<R: Rng + ?Sized>(
    cloud: &PointCloud,
    params: &NoiseParams,
    rng: &mut R,
) -> Result<PointCloud> {
    params.validate()?;
    if params.sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, params.sigma).map_err(|e| Error::arg(e.to_string()))?;
    let mut out = cloud.locations().clone();
    for v in out.iter_mut() {
        let g: f64 = normal.sample(rng);
        *v += g.clamp(-params.clip, params.clip);
    }
    cloud.with_locations(out)
}

// ---------------------------------------------------------------------------
// PointWolf

/// A rigid-plus-scale transform about an anchor point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorTransform {
    /// Rotation angles about x, y, z (radians), composed as `Rz·Ry·Rx`.
    pub angles: [f64; 3],
    pub scale: f64,
    pub translation: [f64; 3],
}

impl AnchorTransform {
    pub fn identity() -> Self {
        Self {
            angles: [0.0; 3],
            scale: 1.0,
            translation: [0.0; 3],
        }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    fn rotation(&self) -> Mat3 {
        mat_mul(
            &rot_z(self.angles[2]),
            &mat_mul(&rot_y(self.angles[1]), &rot_x(self.angles[0])),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointWolfParams {
    pub n_anchors: usize,
    /// Gaussian kernel bandwidth, meters.
    pub kernel_bandwidth: f64,
    /// Per-axis rotation bound, degrees.
    pub max_rotation_deg: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Per-axis translation bound, meters.
    pub max_translation: f64,
}

impl Default for PointWolfParams {
    fn default() -> Self {
        Self {
            n_anchors: 4,
            kernel_bandwidth: 0.5,
            max_rotation_deg: 15.0,
            scale_min: 0.9,
            scale_max: 1.1,
            max_translation: 0.1,
        }
    }
}

impl PointWolfParams {
    pub fn validate(&self) -> Result<()> {
        check_finite(
            "pointwolf parameters",
            &[
                self.kernel_bandwidth,
                self.max_rotation_deg,
                self.scale_min,
                self.scale_max,
                self.max_translation,
            ],
        )?;
        if self.n_anchors == 0 {
            return Err(Error::arg("pointwolf needs at least one anchor"));
        }
        if self.kernel_bandwidth <= 0.0 {
            return Err(Error::arg("pointwolf bandwidth must be > 0"));
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max)
            || self.max_rotation_deg < 0.0
            || self.max_translation < 0.0
        {
            return Err(Error::arg("invalid pointwolf sampling ranges"));
        }
        Ok(())
    }

    pub fn sample_transform<R: Rng + ?Sized>(&self, rng: &mut R) -> AnchorTransform {
        let max_rot = self.max_rotation_deg * PI / 180.0;
        AnchorTransform {
            angles: std::array::from_fn(|_| rng.random_range(-max_rot..=max_rot)),
            scale: rng.random_range(self.scale_min..=self.scale_max),
            translation: std::array::from_fn(|_| {
                rng.random_range(-self.max_translation..=self.max_translation)
            }),
        }
    }
}

/// Farthest-point sampling from a given start index. Ties go to the lower
/// index.
pub fn farthest_point_sampling(cloud: &PointCloud, start: usize, count: usize) -> Result<Vec<usize>> {
    let n = cloud.n_points();
    if count == 0 || count > n || start >= n {
        return Err(Error::arg(format!(
            "cannot sample {count} anchors from {n} points starting at {start}"
        )));
    }
    let loc = cloud.locations();
    let dist2 = |i: usize, j: usize| -> f64 {
        (0..3).map(|a| (loc[[i, a]] - loc[[j, a]]).powi(2)).sum()
    };
    let mut chosen = vec![start];
    let mut min_d: Vec<f64> = (0..n).map(|i| dist2(i, start)).collect();
    while chosen.len() < count {
        let mut best = 0;
        for i in 1..n {
            if min_d[i] > min_d[best] {
                best = i;
            }
        }
        chosen.push(best);
        for (i, d) in min_d.iter_mut().enumerate() {
            *d = d.min(dist2(i, best));
        }
    }
    Ok(chosen)
}

/// Kernel-weighted blend of per-anchor transforms. Point `i` moves by
/// `Σ_a w_ia (T_a(x_i) − x_i)` with `w_ia ∝ exp(−‖x_i − x_a‖² / bandwidth²)`
/// normalised over anchors.
pub fn pointwolf_with_transforms(
    cloud: &PointCloud,
    anchors: &[usize],
    transforms: &[AnchorTransform],
    bandwidth: f64,
) -> Result<PointCloud> {
    if anchors.is_empty() || anchors.len() != transforms.len() {
        return Err(Error::arg("need one transform per anchor, at least one anchor"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::arg("bandwidth must be positive and finite"));
    }
    if let Some(&a) = anchors.iter().find(|&&a| a >= cloud.n_points()) {
        return Err(Error::arg(format!("anchor index {a} out of range")));
    }
    for t in transforms {
        check_finite("anchor transform", &t.angles)?;
        check_finite("anchor transform", &t.translation)?;
        if !(t.scale > 0.0 && t.scale.is_finite()) {
            return Err(Error::arg("anchor scale must be positive"));
        }
    }

    let loc = cloud.locations();
    let anchor_pos: Vec<[f64; 3]> = anchors
        .iter()
        .map(|&a| [loc[[a, 0]], loc[[a, 1]], loc[[a, 2]]])
        .collect();
    let linear: Vec<Mat3> = transforms
        .iter()
        .map(|t| linear_minus_identity(&t.rotation(), t.scale))
        .collect();
    let inv_b2 = 1.0 / (bandwidth * bandwidth);

    let mut out = loc.clone();
    let mut logw = vec![0.0; anchors.len()];
    for mut row in out.rows_mut() {
        let x = [row[0], row[1], row[2]];
        for (lw, a) in logw.iter_mut().zip(&anchor_pos) {
            let d2: f64 = (0..3).map(|k| (x[k] - a[k]).powi(2)).sum();
            *lw = -d2 * inv_b2;
        }
        // normalise in log space so far-away points never underflow to 0/0
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logw.iter().map(|lw| (lw - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut disp = [0.0; 3];
        for ((w, a), (m, t)) in weights
            .iter()
            .zip(&anchor_pos)
            .zip(linear.iter().zip(transforms))
        {
            let w = w / total;
            let local = apply(m, [x[0] - a[0], x[1] - a[1], x[2] - a[2]]);
            for k in 0..3 {
                disp[k] += w * (local[k] + t.translation[k]);
            }
        }
        for k in 0..3 {
            row[k] += disp[k];
        }
    }
    cloud.with_locations(out)
}

/// Samples anchors by farthest-point sampling from a random start and one
/// transform per anchor, then deforms the cloud.
pub fn pointwolf_deform<R: Rng + ?Sized>(
    cloud: &PointCloud,
    params: &PointWolfParams,
    rng: &mut R,
) -> Result<PointCloud> {
    params.validate()?;
    if params.n_anchors > cloud.n_points() {
        return Err(Error::arg(format!(
            "{} anchors requested for {} points",
            params.n_anchors,
            cloud.n_points()
        )));
    }
    let start = rng.random_range(0..cloud.n_points());
    let anchors = farthest_point_sampling(cloud, start, params.n_anchors)?;
    let transforms: Vec<AnchorTransform> = (0..anchors.len())
        .map(|_| params.sample_transform(rng))
        .collect();
    pointwolf_with_transforms(cloud, &anchors, &transforms, params.kernel_bandwidth)
}

// ---------------------------------------------------------------------------
// View generation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugMethod {
    PointWolf,
    Affine,
    Noise,
}

impl std::str::FromStr for AugMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointwolf" => Ok(AugMethod::PointWolf),
            "affine" => Ok(AugMethod::Affine),
            "noise" => Ok(AugMethod::Noise),
            other => Err(Error::arg(format!("unknown augmentation method {other:?}"))),
        }
    }
}

/// The `K` base augmentations; list order defines the view index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationSpec {
    pub methods: Vec<AugMethod>,
    pub pointwolf: PointWolfParams,
    pub affine: AffineRanges,
    pub noise: NoiseParams,
    pub rng_seed: u64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            methods: vec![AugMethod::PointWolf, AugMethod::Affine],
            pointwolf: PointWolfParams::default(),
            affine: AffineRanges::default(),
            noise: NoiseParams::default(),
            rng_seed: 0,
        }
    }
}

impl AugmentationSpec {
    pub fn k(&self) -> usize {
        self.methods.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::arg("augmentation spec needs at least one method (K ≥ 1)"));
        }
        self.pointwolf.validate()?;
        self.affine.validate()?;
        self.noise.validate()
    }

    /// Views from a stream seeded by `rng_seed`.
    pub fn views(&self, cloud: &PointCloud) -> Result<Vec<PointCloud>> {
        gen_augmented_views(cloud, self, &mut crate::rng::seeded(self.rng_seed))
    }
}

/// View `k` is `methods[k]` applied to the original cloud with freshly
/// sampled parameters. Views are independent, not chained.
pub fn gen_augmented_views<R: Rng + ?Sized>(
    cloud: &PointCloud,
    spec: &AugmentationSpec,
    rng: &mut R,
) -> Result<Vec<PointCloud>> {
    spec.validate()?;
    spec.methods
        .iter()
        .map(|method| match method {
            AugMethod::PointWolf => pointwolf_deform(cloud, &spec.pointwolf, rng),
            AugMethod::Affine => affine_transform(cloud, &spec.affine.sample(rng)),
            AugMethod::Noise => pointwise_noise(cloud, &spec.noise, rng),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Mix

/// A point-wise interpolation of two index-corresponding views.
#[derive(Debug, Clone, PartialEq)]
pub struct MixSample {
    pub cloud: PointCloud,
    pub alpha: Vec<f64>,
    /// Identifiers of the two source views `(m, n)`.
    pub source_views: (usize, usize),
}

/// Row `i` becomes `α_i · m[i] + (1 − α_i) · n[i]` over locations and
/// features. Results are clamped to the source interval so round-off never
/// leaves the segment; `α = 1` and `α = 0` reproduce the sources exactly.
pub fn mix_with_alpha(view_m: &PointCloud, view_n: &PointCloud, alpha: &[f64]) -> Result<PointCloud> {
    if !view_m.same_shape(view_n) {
        return Err(Error::arg(format!(
            "mix views differ in shape: {}×{} vs {}×{}",
            view_m.n_points(),
            view_m.feature_dim(),
            view_n.n_points(),
            view_n.feature_dim()
        )));
    }
    if alpha.len() != view_m.n_points() {
        return Err(Error::arg("alpha length must equal the point count"));
    }
    if let Some(a) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::arg(format!("alpha {a} outside [0, 1]")));
    }
    let lerp = |a: &Array2<f64>, b: &Array2<f64>| {
        let mut out = Array2::zeros(a.raw_dim());
        for ((i, j), v) in out.indexed_iter_mut() {
            let (x, y) = (a[[i, j]], b[[i, j]]);
            let w = alpha[i];
            *v = (w * x + (1.0 - w) * y).clamp(x.min(y), x.max(y));
        }
        out
    };
    PointCloud::new(
        lerp(view_m.locations(), view_n.locations()),
        lerp(view_m.features(), view_n.features()),
    )
}

/// Samples `α_i ~ U[0, 1]` per point and interpolates.
pub fn mix_augment<R: Rng + ?Sized>(
    view_m: &PointCloud,
    view_n: &PointCloud,
    rng: &mut R,
) -> Result<MixSample> {
    if !view_m.same_shape(view_n) {
        return Err(Error::arg("mix views differ in shape"));
    }
    let alpha: Vec<f64> = (0..view_m.n_points()).map(|_| rng.random::<f64>()).collect();
    Ok(MixSample {
        cloud: mix_with_alpha(view_m, view_n, &alpha)?,
        alpha,
        source_views: (0, 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::{array, Array2};

    fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
        let mut rng = seeded(seed);
        let loc = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
        let feat = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
        PointCloud::new(loc, feat).unwrap()
    }

    fn pairwise(cloud: &PointCloud) -> Vec<f64> {
        let l = cloud.locations();
        let n = cloud.n_points();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d: f64 = (0..3).map(|a| (l[[i, a]] - l[[j, a]]).powi(2)).sum();
                out.push(d.sqrt());
            }
        }
        out
    }

    #[test]
    fn affine_identity_is_bit_exact() {
        let cloud = random_cloud(50, 3, 1);
        let out = affine_transform(&cloud, &AffineParams::identity()).unwrap();
        assert_eq!(out, cloud);
    }

    #[test]
    fn affine_quarter_turn() {
        // two points symmetric about the centroid
        let cloud = PointCloud::from_locations(array![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        let p = AffineParams {
            rotation_angle: PI / 2.0,
            scale: 1.0,
            translation: [0.0; 3],
        };
        let out = affine_transform(&cloud, &p).unwrap();
        let r = out.location(0);
        assert!((r[0] - 0.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12 && r[2].abs() < 1e-12);
    }

    #[test]
    fn affine_scale_two_doubles_distances() {
        let cloud = random_cloud(30, 0, 2);
        let p = AffineParams {
            rotation_angle: 1.234,
            scale: 2.0,
            translation: [0.3, -0.1, 0.05],
        };
        let out = affine_transform(&cloud, &p).unwrap();
        for (a, b) in pairwise(&cloud).iter().zip(pairwise(&out)) {
            assert!((2.0 * a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn affine_rejects_bad_params() {
        let cloud = random_cloud(3, 0, 3);
        let mut p = AffineParams::identity();
        p.scale = 0.0;
        assert!(affine_transform(&cloud, &p).is_err());
        p = AffineParams::identity();
        p.translation[1] = f64::NAN;
        assert!(affine_transform(&cloud, &p).is_err());
        p = AffineParams::identity();
        p.rotation_angle = f64::INFINITY;
        assert!(affine_transform(&cloud, &p).is_err());
    }

    #[test]
    fn noise_zero_sigma_and_clip_bound() {
        let cloud = random_cloud(200, 2, 4);
        let zero = NoiseParams {
            sigma: 0.0,
            clip: 0.05,
        };
        assert_eq!(pointwise_noise(&cloud, &zero, &mut seeded(0)).unwrap(), cloud);

        let p = NoiseParams {
            sigma: 0.5,
            clip: 0.05,
        };
        let out = pointwise_noise(&cloud, &p, &mut seeded(5)).unwrap();
        for (a, b) in cloud.locations().iter().zip(out.locations()) {
            assert!((b - a).abs() <= 0.05 + 1e-15);
        }
        assert_eq!(out.features(), cloud.features());
        let again = pointwise_noise(&cloud, &p, &mut seeded(5)).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn pointwolf_identity_transforms() {
        let cloud = random_cloud(40, 1, 6);
        let anchors = farthest_point_sampling(&cloud, 3, 4).unwrap();
        let out =
            pointwolf_with_transforms(&cloud, &anchors, &[AnchorTransform::identity(); 4], 0.5)
                .unwrap();
        assert_eq!(out, cloud);
    }

    #[test]
    fn pointwolf_single_anchor_translation() {
        let cloud = random_cloud(40, 1, 7);
        let t = [0.05, -0.02, 0.1];
        let out =
            pointwolf_with_transforms(&cloud, &[11], &[AnchorTransform::translation(t)], 0.3)
                .unwrap();
        for (a, b) in cloud.locations().rows().into_iter().zip(out.locations().rows()) {
            for k in 0..3 {
                assert_eq!(b[k], a[k] + t[k]);
            }
        }
    }

    #[test]
    fn pointwolf_far_points_stay_finite() {
        let mut loc = Array2::zeros((3, 3));
        loc[[2, 0]] = 1.0e4;
        let cloud = PointCloud::from_locations(loc).unwrap();
        let out = pointwolf_with_transforms(
            &cloud,
            &[0, 1],
            &[AnchorTransform::translation([1.0, 0.0, 0.0]); 2],
            0.01,
        )
        .unwrap();
        assert_eq!(out.location(2)[0], 1.0e4 + 1.0);
    }

    #[test]
    fn pointwolf_errors_on_too_many_anchors() {
        let cloud = random_cloud(3, 0, 8);
        let p = PointWolfParams {
            n_anchors: 4,
            ..Default::default()
        };
        assert!(pointwolf_deform(&cloud, &p, &mut seeded(0)).is_err());
    }

    #[test]
    fn fps_picks_extremes() {
        let cloud = PointCloud::from_locations(array![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [10.0, 0.0, 0.0],
            [5.0, 0.0, 0.0]
        ])
        .unwrap();
        assert_eq!(farthest_point_sampling(&cloud, 0, 3).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn views_shape_and_determinism() {
        let cloud = random_cloud(64, 3, 9);
        let spec = AugmentationSpec {
            rng_seed: 17,
            ..Default::default()
        };
        let views = spec.views(&cloud).unwrap();
        assert_eq!(views.len(), 2);
        for v in &views {
            assert!(v.same_shape(&cloud));
            assert_eq!(v.features(), cloud.features());
        }
        assert_eq!(views, spec.views(&cloud).unwrap());

        let three = AugmentationSpec {
            methods: vec![AugMethod::PointWolf, AugMethod::Affine, AugMethod::Noise],
            ..spec.clone()
        };
        assert_eq!(three.views(&cloud).unwrap().len(), 3);
        assert!(AugmentationSpec {
            methods: vec![],
            ..spec
        }
        .validate()
        .is_err());
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let m = random_cloud(20, 3, 10);
        let n = random_cloud(20, 3, 11);
        assert_eq!(mix_with_alpha(&m, &n, &[1.0; 20]).unwrap(), m);
        assert_eq!(mix_with_alpha(&m, &n, &[0.0; 20]).unwrap(), n);
        let mid = mix_with_alpha(&m, &n, &[0.5; 20]).unwrap();
        for ((a, b), c) in m.stacked().iter().zip(n.stacked().iter()).zip(mid.stacked().iter()) {
            assert!((c - (a + b) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mix_shape_mismatch() {
        let m = random_cloud(20, 3, 12);
        let n = random_cloud(21, 3, 13);
        assert!(mix_augment(&m, &n, &mut seeded(0)).is_err());
        let n = random_cloud(20, 2, 13);
        assert!(mix_augment(&m, &n, &mut seeded(0)).is_err());
    }
}
