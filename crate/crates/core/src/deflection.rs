//! Deflection metric: per-pixel angle between the optical axis and the
//! pixel's ray, computed from the inverse intrinsic matrix as
//! `α(u) = sqrt((K⁻¹u)ᵀ(K⁻¹u) − 1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pixel_center, Pixel, SensorIntrinsics};

/// Number of pyramid levels: the input resolution plus five halvings.
pub const PYRAMID_LEVELS: usize = 6;

/// Spatial stride of the coarsest level; image sides must be multiples of it.
pub const PYRAMID_STRIDE: usize = 1 << (PYRAMID_LEVELS - 1);

/// How the intrinsic matrix is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionModel {
    /// `K⁻¹u` yields angles `[φ, θ, 1]`; the deflection is the radial norm itself.
    #[default]
    Spherical,
    /// `K⁻¹u` yields normalized image coordinates; the radial norm is the
    /// normed distance `d = tan α`.
    Camera,
}

impl ProjectionModel {
    pub fn of(k: &SensorIntrinsics) -> Self {
        if k.is_pinhole() {
            ProjectionModel::Camera
        } else {
            ProjectionModel::Spherical
        }
    }
}

/// Raw value `sqrt(qᵀq − 1)` with `q = K⁻¹·[u, v, 1]ᵀ`.
#[inline]
pub fn radial_norm(px: Pixel, k: &SensorIntrinsics) -> f64 {
    let q = k.back_project(px.u, px.v);
    let arg = q[0] * q[0] + q[1] * q[1] + (q[2] - 1.0) * (q[2] + 1.0);
    arg.max(0.0).sqrt()
}

#[inline]
pub fn deflection_at(px: Pixel, k: &SensorIntrinsics, model: ProjectionModel) -> f64 {
    let s = radial_norm(px, k);
    match model {
        ProjectionModel::Spherical => s,
        ProjectionModel::Camera => s.atan(),
    }
}

/// Normed distance `d = tan α` such that `|CP| = 1`.
pub fn normed_distance(alpha: f64) -> Result<f64> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&alpha) {
        return Err(Error::invalid(format!(
            "normed distance is undefined for alpha = {alpha} (must lie in [0, π/2))"
        )));
    }
    Ok(alpha.tan())
}

/// One-channel image of deflection angles aligned with the data image.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionImage {
    intrinsics: SensorIntrinsics,
    model: ProjectionModel,
    alpha: Vec<f64>,
}

impl DeflectionImage {
    pub fn height(&self) -> usize {
        self.intrinsics.height()
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width()
    }

    pub fn intrinsics(&self) -> &SensorIntrinsics {
        &self.intrinsics
    }

    pub fn model(&self) -> ProjectionModel {
        self.model
    }

    /// Row-major angles in radians.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.alpha[row * self.width() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.width();
        &self.alpha[row * w..(row + 1) * w]
    }

    /// Export precision.
    pub fn to_f32(&self) -> Vec<f32> {
        self.alpha.iter().map(|&a| a as f32).collect()
    }

    pub fn max(&self) -> f64 {
        self.alpha.iter().copied().fold(0.0, f64::max)
    }

    /// `(row, col)` of the smallest angle (first in row-major order on ties).
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &a) in self.alpha.iter().enumerate() {
            if a < self.alpha[best] {
                best = i;
            }
        }
        (best / self.width(), best % self.width())
    }
}

/// Samples [`deflection_at`] at every pixel centre.
pub fn deflection_image(k: &SensorIntrinsics, model: ProjectionModel) -> DeflectionImage {
    let w = k.width();
    let mut alpha = vec![0.0; k.pixel_count()];
    alpha.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
        for (col, a) in out.iter_mut().enumerate() {
            *a = deflection_at(pixel_center(row, col), k, model);
        }
    });
    DeflectionImage {
        intrinsics: *k,
        model,
        alpha,
    }
}

/// Deflection images at the input resolution and after each of five
/// stride-2 stages.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionPyramid {
    levels: Vec<DeflectionImage>,
}

impl DeflectionPyramid {
    pub fn levels(&self) -> &[DeflectionImage] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &DeflectionImage {
        &self.levels[i]
    }
}

/// Each level is evaluated analytically from intrinsics with doubled steps
/// and halved principal point rather than by pooling the level above.
pub fn build_pyramid(k: &SensorIntrinsics, model: ProjectionModel) -> Result<DeflectionPyramid> {
    if !k.height().is_multiple_of(PYRAMID_STRIDE) || !k.width().is_multiple_of(PYRAMID_STRIDE) {
        return Err(Error::invalid(format!(
            "pyramid needs dimensions divisible by {PYRAMID_STRIDE}, got {}x{}",
            k.height(),
            k.width()
        )));
    }
    let levels = (0..PYRAMID_LEVELS as u32)
        .map(|i| k.downscaled(i).map(|ki| deflection_image(&ki, model)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DeflectionPyramid { levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{intrinsics_from_fov, unproject};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI, TAU};

    fn hires() -> SensorIntrinsics {
        intrinsics_from_fov(TAU, PI, 2048, 1024, 120.0).unwrap()
    }

    #[test]
    fn zero_at_principal_point() {
        let k = hires();
        let p = Pixel { u: k.c_phi(), v: k.c_theta() };
        assert_eq!(deflection_at(p, &k, ProjectionModel::Spherical), 0.0);
        let cam = SensorIntrinsics::pinhole(640, 480, 500.0, 500.0, 320.0, 240.0, 50.0).unwrap();
        let p = Pixel { u: 320.0, v: 240.0 };
        assert_eq!(deflection_at(p, &cam, ProjectionModel::Camera), 0.0);
    }

    #[test]
    fn three_four_five() {
        // Unit steps put the angles directly in pixel offsets.
        let k = SensorIntrinsics::new(10, 10, 0.1, 0.1, 0.0, 0.0, 1.0).unwrap();
        let a = deflection_at(Pixel { u: 3.0, v: 4.0 }, &k, ProjectionModel::Spherical);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn camera_unit_normalized_offset_is_quarter_pi() {
        let cam = SensorIntrinsics::pinhole(640, 480, 500.0, 500.0, 320.0, 240.0, 50.0).unwrap();
        let a = deflection_at(Pixel { u: 820.0, v: 240.0 }, &cam, ProjectionModel::Camera);
        assert_abs_diff_eq!(a, FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn on_axis_offset_matches_ray_angle() {
        let k = hires();
        let px = Pixel { u: k.c_phi() + 100.0, v: k.c_theta() };
        let a = deflection_at(px, &k, ProjectionModel::Spherical);
        let ray = unproject(px, 1.0, &k).unwrap();
        let oracle = ray.x.clamp(-1.0, 1.0).acos();
        assert_abs_diff_eq!(a, 100.0 * k.delta_phi().abs(), epsilon = 1e-12);
        assert_abs_diff_eq!(a, oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(a, 0.306_796_157_577_128_25, epsilon = 1e-12);
    }

    #[test]
    fn normed_distance_values() {
        assert_eq!(normed_distance(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(normed_distance(FRAC_PI_4).unwrap(), 1.0, epsilon = 1e-15);
        // tan(0.3) from a 30-digit reference: 0.309336249609623...
        assert_abs_diff_eq!(normed_distance(0.3).unwrap(), 0.309_336_249_609_623_3, epsilon = 1e-15);
        assert!(normed_distance(std::f64::consts::FRAC_PI_2).is_err());
        assert!(normed_distance(2.0).is_err());
        assert!(normed_distance(-0.1).is_err());
    }

    #[test]
    fn single_pixel_image() {
        let k = SensorIntrinsics::new(1, 1, -0.01, -0.01, 0.5, 0.5, 1.0).unwrap();
        let img = deflection_image(&k, ProjectionModel::Spherical);
        assert_eq!(img.alpha(), &[0.0]);
    }

    #[test]
    fn corners_are_symmetric_and_maximal() {
        let k = hires();
        let img = deflection_image(&k, ProjectionModel::Spherical);
        let (h, w) = (img.height(), img.width());
        let c = [img.get(0, 0), img.get(0, w - 1), img.get(h - 1, 0), img.get(h - 1, w - 1)];
        assert!(c.iter().all(|&x| x == c[0]));
        let closed = ((PI - k.delta_phi().abs() / 2.0).powi(2) + (PI / 2.0 - k.delta_theta().abs() / 2.0).powi(2)).sqrt();
        assert_abs_diff_eq!(img.max(), closed, epsilon = 1e-12);
        assert_eq!(img.max(), c[0]);
    }

    #[test]
    fn sign_flips_are_bit_identical() {
        let k = intrinsics_from_fov(TAU, PI / 2.0, 512, 64, 100.0).unwrap();
        let base = deflection_image(&k, ProjectionModel::Spherical);
        for (fp, ft) in [(true, false), (false, true), (true, true)] {
            let m = deflection_image(&k.with_sign_flip(fp, ft), ProjectionModel::Spherical);
            assert_eq!(base.alpha(), m.alpha());
        }
    }

    #[test]
    fn iso_contours_are_ellipses() {
        let k = intrinsics_from_fov(TAU, PI / 2.0, 512, 64, 100.0).unwrap();
        let radius = 0.4;
        for i in 0..32 {
            let t = i as f64 / 32.0 * TAU;
            let u = k.c_phi() + radius * t.cos() / k.delta_phi().abs();
            let v = k.c_theta() + radius * t.sin() / k.delta_theta().abs();
            let a = deflection_at(Pixel { u, v }, &k, ProjectionModel::Spherical);
            assert_abs_diff_eq!(a, radius, epsilon = 1e-12);
        }
    }

    #[test]
    fn strictly_increasing_along_rays() {
        let k = hires();
        for dir in [(1.0, 0.0), (0.3, 0.7), (-1.0, -1.0), (0.0, -1.0)] {
            let mut prev = -1.0;
            for step in 1..200 {
                let t = step as f64 * 2.5;
                let px = Pixel { u: k.c_phi() + dir.0 * t, v: k.c_theta() + dir.1 * t };
                let a = deflection_at(px, &k, ProjectionModel::Spherical);
                assert!(a > prev);
                prev = a;
            }
        }
    }

    #[test]
    fn pyramid_dimensions() {
        let k = intrinsics_from_fov(TAU, PI / 4.0, 2048, 64, 100.0).unwrap();
        let pyr = build_pyramid(&k, ProjectionModel::Spherical).unwrap();
        let dims: Vec<_> = pyr.levels().iter().map(|l| (l.height(), l.width())).collect();
        assert_eq!(dims, vec![(64, 2048), (32, 1024), (16, 512), (8, 256), (4, 128), (2, 64)]);
        assert_eq!(pyr.level(0), &deflection_image(&k, ProjectionModel::Spherical));
        for l in pyr.levels() {
            assert_abs_diff_eq!(l.intrinsics().h_fov(), k.h_fov(), epsilon = 1e-12);
            assert_abs_diff_eq!(l.intrinsics().v_fov(), k.v_fov(), epsilon = 1e-12);
        }
    }

    #[test]
    fn pyramid_levels_sample_block_centres() {
        let k = intrinsics_from_fov(TAU, PI / 2.0, 512, 128, 100.0).unwrap();
        let pyr = build_pyramid(&k, ProjectionModel::Spherical).unwrap();
        for (i, level) in pyr.levels().iter().enumerate() {
            let f = (1usize << i) as f64;
            for row in 0..level.height() {
                for col in (0..level.width()).step_by(7) {
                    let centre = Pixel { u: (col as f64 + 0.5) * f, v: (row as f64 + 0.5) * f };
                    let a0 = deflection_at(centre, &k, ProjectionModel::Spherical);
                    assert!((level.get(row, col) - a0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn pyramid_rejects_indivisible_dims() {
        let k = intrinsics_from_fov(TAU, PI, 2048, 1000, 100.0).unwrap();
        assert!(build_pyramid(&k, ProjectionModel::Spherical).is_err());
    }

    #[test]
    fn argmin_near_principal_point() {
        let k = hires();
        let img = deflection_image(&k, ProjectionModel::Spherical);
        let (r, c) = img.argmin();
        assert!((511..=512).contains(&r) && (1023..=1024).contains(&c));
    }
}
