//! Spherical sensor model.
//!
//! A spinning LiDAR is modelled by a 3×3 intrinsic matrix
//!
//! ```text
//!     | 1/Δφ   0     c_φ |
//! K = |  0    1/Δθ   c_θ |
//!     |  0     0      1  |
//! ```
//!
//! mapping homogeneous angles `[φ, θ, 1]` to continuous pixel coordinates
//! `[u, v, 1]`. The discretization steps are signed; with the default
//! negative steps world-up maps to image-up and azimuth increases to the
//! left, so a scan reads left to right. `θ` is elevation measured from the
//! sensor xy-plane.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when checking field-of-view bounds.
const FOV_REL_TOL: f64 = 1e-9;

/// Linear intrinsics of a spherical (or, see [`SensorIntrinsics::pinhole`],
/// pinhole) projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRecord", into = "IntrinsicsRecord")]
pub struct SensorIntrinsics {
    width: usize,
    height: usize,
    delta_phi: f64,
    delta_theta: f64,
    c_phi: f64,
    c_theta: f64,
    max_range: f64,
    pinhole: bool,
}

/// Serialized form of [`SensorIntrinsics`]; re-validated on load.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntrinsicsRecord {
    pub width: usize,
    pub height: usize,
    pub delta_phi_rad: f64,
    pub delta_theta_rad: f64,
    pub c_phi: f64,
    pub c_theta: f64,
    pub max_range_m: f64,
    #[serde(default)]
    pub pinhole: bool,
}

impl TryFrom<IntrinsicsRecord> for SensorIntrinsics {
    type Error = Error;

    fn try_from(r: IntrinsicsRecord) -> Result<Self> {
        let k = SensorIntrinsics {
            width: r.width,
            height: r.height,
            delta_phi: r.delta_phi_rad,
            delta_theta: r.delta_theta_rad,
            c_phi: r.c_phi,
            c_theta: r.c_theta,
            max_range: r.max_range_m,
            pinhole: r.pinhole,
        };
        k.validated()
    }
}

impl From<SensorIntrinsics> for IntrinsicsRecord {
    fn from(k: SensorIntrinsics) -> Self {
        IntrinsicsRecord {
            width: k.width,
            height: k.height,
            delta_phi_rad: k.delta_phi,
            delta_theta_rad: k.delta_theta,
            c_phi: k.c_phi,
            c_theta: k.c_theta,
            max_range_m: k.max_range,
            pinhole: k.pinhole,
        }
    }
}

impl SensorIntrinsics {
    /// Builds spherical intrinsics from explicit parameters, checking the
    /// field-of-view invariants `|Δφ|·w ∈ (0, 2π]` and `|Δθ|·h ∈ (0, π]`.
    pub fn new(
        width: usize,
        height: usize,
        delta_phi: f64,
        delta_theta: f64,
        c_phi: f64,
        c_theta: f64,
        max_range: f64,
    ) -> Result<Self> {
        SensorIntrinsics {
            width,
            height,
            delta_phi,
            delta_theta,
            c_phi,
            c_theta,
            max_range,
            pinhole: false,
        }
        .validated()
    }

    /// Pinhole camera intrinsics expressed in the same matrix layout: the
    /// steps are `1/f_x` and `1/f_y` (normalized image-plane units per
    /// pixel). Only positivity and finiteness are checked since tangent-plane
    /// extents are not bounded by `2π`.
    pub fn pinhole(
        width: usize,
        height: usize,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        max_range: f64,
    ) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        let k = SensorIntrinsics {
            width,
            height,
            delta_phi: 1.0 / fx,
            delta_theta: 1.0 / fy,
            c_phi: cx,
            c_theta: cy,
            max_range,
            pinhole: true,
        };
        k.check_common()?;
        Ok(k)
    }

    fn check_common(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.delta_phi.is_finite() && self.delta_phi != 0.0) {
            return Err(Error::invalid(format!("delta_phi must be finite and nonzero, got {}", self.delta_phi)));
        }
        if !(self.delta_theta.is_finite() && self.delta_theta != 0.0) {
            return Err(Error::invalid(format!(
                "delta_theta must be finite and nonzero, got {}",
                self.delta_theta
            )));
        }
        if !(self.c_phi.is_finite() && self.c_theta.is_finite()) {
            return Err(Error::invalid("principal point must be finite"));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(Error::invalid(format!("max_range must be positive, got {}", self.max_range)));
        }
        Ok(())
    }

    fn validated(self) -> Result<Self> {
        self.check_common()?;
        if self.pinhole {
            return Ok(self);
        }
        let fh = self.h_fov();
        if fh > TAU * (1.0 + FOV_REL_TOL) {
            return Err(Error::invalid(format!("horizontal FoV {fh} rad exceeds 2π")));
        }
        let fv = self.v_fov();
        if fv > PI * (1.0 + FOV_REL_TOL) {
            return Err(Error::invalid(format!("vertical FoV {fv} rad exceeds π")));
        }
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn delta_phi(&self) -> f64 {
        self.delta_phi
    }

    pub fn delta_theta(&self) -> f64 {
        self.delta_theta
    }

    pub fn c_phi(&self) -> f64 {
        self.c_phi
    }

    pub fn c_theta(&self) -> f64 {
        self.c_theta
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    /// True for intrinsics built with [`SensorIntrinsics::pinhole`].
    pub fn is_pinhole(&self) -> bool {
        self.pinhole
    }

    /// Horizontal field of view `|Δφ|·w`.
    pub fn h_fov(&self) -> f64 {
        self.delta_phi.abs() * self.width as f64
    }

    /// Vertical field of view `|Δθ|·h`.
    pub fn v_fov(&self) -> f64 {
        self.delta_theta.abs() * self.height as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// True when the sensor covers the full azimuth circle, in which case
    /// column coordinates wrap modulo `w`.
    pub fn is_full_circle(&self) -> bool {
        !self.pinhole && (self.h_fov() - TAU).abs() <= TAU * FOV_REL_TOL
    }

    /// True when the rows span the full elevation range `[-π/2, π/2]`.
    pub fn is_full_dome(&self) -> bool {
        !self.pinhole && (self.v_fov() - PI).abs() <= PI * FOV_REL_TOL
    }

    pub fn with_max_range(mut self, max_range: f64) -> Result<Self> {
        self.max_range = max_range;
        self.validated()
    }

    /// Returns a copy with both steps negated (mirrored image axes).
    pub fn with_sign_flip(mut self, flip_phi: bool, flip_theta: bool) -> Self {
        if flip_phi {
            self.delta_phi = -self.delta_phi;
        }
        if flip_theta {
            self.delta_theta = -self.delta_theta;
        }
        self
    }

    /// Intrinsics of the same field of view sampled `2^level` times more
    /// coarsely: steps doubled and the principal point halved per level.
    pub fn downscaled(&self, level: u32) -> Result<Self> {
        let f = (1usize << level) as f64;
        let div = 1usize << level;
        if !self.width.is_multiple_of(div) || !self.height.is_multiple_of(div) {
            return Err(Error::invalid(format!(
                "{}x{} is not divisible by 2^{level}",
                self.height, self.width
            )));
        }
        Ok(SensorIntrinsics {
            width: self.width / div,
            height: self.height / div,
            delta_phi: self.delta_phi * f,
            delta_theta: self.delta_theta * f,
            c_phi: self.c_phi / f,
            c_theta: self.c_theta / f,
            ..*self
        })
    }

    pub(crate) fn with_rows(mut self, height: usize, c_theta: f64) -> Self {
        self.height = height;
        self.c_theta = c_theta;
        self
    }

    pub(crate) fn with_grid(mut self, height: usize, width: usize, delta_theta: f64, delta_phi: f64) -> Self {
        self.c_theta *= height as f64 / self.height as f64;
        self.c_phi *= width as f64 / self.width as f64;
        self.height = height;
        self.width = width;
        self.delta_theta = delta_theta;
        self.delta_phi = delta_phi;
        self
    }

    /// The intrinsic matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.delta_phi,
            0.0,
            self.c_phi,
            0.0,
            1.0 / self.delta_theta,
            self.c_theta,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Closed-form inverse of [`SensorIntrinsics::matrix`].
    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.delta_phi,
            0.0,
            -self.c_phi * self.delta_phi,
            0.0,
            self.delta_theta,
            -self.c_theta * self.delta_theta,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `K⁻¹·[u, v, 1]ᵀ`, evaluated in the factored form `(u − c)·Δ` so
    /// that sign flips of the steps negate the result exactly.
    #[inline]
    pub fn back_project(&self, u: f64, v: f64) -> [f64; 3] {
        [(u - self.c_phi) * self.delta_phi, (v - self.c_theta) * self.delta_theta, 1.0]
    }

    /// Integer pixel `(row, col)` of a continuous coordinate, or `None` when
    /// off-frame. Columns wrap for full-circle sensors; for full-dome sensors
    /// the nadir (`v == h`) is folded into the last row.
    pub fn pixel_of(&self, px: Pixel) -> Option<(usize, usize)> {
        if !(px.u.is_finite() && px.v.is_finite()) {
            return None;
        }
        let w = self.width as f64;
        let h = self.height as f64;
        let u = if self.is_full_circle() { wrap(px.u, w) } else { px.u };
        if !(0.0..w).contains(&u) {
            return None;
        }
        let mut v = px.v;
        if self.is_full_dome() && v >= h && v <= h * (1.0 + FOV_REL_TOL) {
            v = h - 0.5;
        }
        if !(0.0..h).contains(&v) {
            return None;
        }
        Some(((v.floor() as usize).min(self.height - 1), (u.floor() as usize).min(self.width - 1)))
    }
}

fn wrap(u: f64, w: f64) -> f64 {
    let r = u.rem_euclid(w);
    if r >= w {
        0.0
    } else {
        r
    }
}

/// Builds intrinsics for a sensor with horizontal FoV `f_h`, vertical FoV
/// `f_v` and a `w`×`h` image, with negative steps and a centred principal
/// point.
pub fn intrinsics_from_fov(f_h: f64, f_v: f64, width: usize, height: usize, max_range: f64) -> Result<SensorIntrinsics> {
    if !(f_h > 0.0 && f_h <= TAU * (1.0 + FOV_REL_TOL)) {
        return Err(Error::invalid(format!("horizontal FoV must lie in (0, 2π], got {f_h}")));
    }
    if !(f_v > 0.0 && f_v <= PI * (1.0 + FOV_REL_TOL)) {
        return Err(Error::invalid(format!("vertical FoV must lie in (0, π], got {f_v}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("image dimensions must be positive, got {height}x{width}")));
    }
    SensorIntrinsics::new(
        width,
        height,
        -f_h / width as f64,
        -f_v / height as f64,
        width as f64 / 2.0,
        height as f64 / 2.0,
        max_range,
    )
}

/// Azimuth, elevation and range of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalAngles {
    /// Azimuth in `(−π, π]`.
    pub phi: f64,
    /// Elevation from the xy-plane in `[−π/2, π/2]`.
    pub theta: f64,
    /// Euclidean range, positive.
    pub r: f64,
}

/// Continuous pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

pub fn cart_to_spherical(p: &Vector3<f64>) -> Result<SphericalAngles> {
    let r = p.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("point {p:?} has no defined direction")));
    }
    let phi = p.y.atan2(p.x);
    // atan2 yields -π for (negative x, -0.0 y); fold onto the half-open range.
    let phi = if phi <= -PI { PI } else { phi };
    let theta = (p.z / r).clamp(-1.0, 1.0).asin().clamp(-FRAC_PI_2, FRAC_PI_2);
    Ok(SphericalAngles { phi, theta, r })
}

pub fn spherical_to_cart(phi: f64, theta: f64, r: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(r * ct * cp, r * ct * sp, r * st)
}

/// Applies `K` to `[φ, θ, 1]`. No clamping; `u` wraps modulo `w` only for
/// full-circle sensors.
pub fn project(a: &SphericalAngles, k: &SensorIntrinsics) -> Pixel {
    let u = k.c_phi + a.phi / k.delta_phi;
    let v = k.c_theta + a.theta / k.delta_theta;
    let u = if k.is_full_circle() { wrap(u, k.width as f64) } else { u };
    Pixel { u, v }
}

/// Inverse of [`project`] followed by the spherical-to-Cartesian map.
pub fn unproject(px: Pixel, r: f64, k: &SensorIntrinsics) -> Result<Vector3<f64>> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("range must be positive, got {r}")));
    }
    let [phi, theta, _] = k.back_project(px.u, px.v);
    Ok(spherical_to_cart(phi, theta, r))
}

/// Unit beam direction through a pixel coordinate.
pub fn beam_direction(px: Pixel, k: &SensorIntrinsics) -> Vector3<f64> {
    let [phi, theta, _] = k.back_project(px.u, px.v);
    spherical_to_cart(phi, theta, 1.0)
}

/// Pixel-centre coordinate of integer pixel `(row, col)`.
#[inline]
pub fn pixel_center(row: usize, col: usize) -> Pixel {
    Pixel {
        u: col as f64 + 0.5,
        v: row as f64 + 0.5,
    }
}

/// A single labelled return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Vector3<f64>,
    pub intensity: f32,
    pub semantic: u16,
    pub instance: u16,
}

/// Point cloud with per-point intensity, semantic class and instance id,
/// stored as parallel arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPointCloud {
    positions: Vec<Vector3<f64>>,
    intensity: Vec<f32>,
    semantic: Vec<u16>,
    instance: Vec<u16>,
}

impl LabeledPointCloud {
    pub fn new(
        positions: Vec<Vector3<f64>>,
        intensity: Vec<f32>,
        semantic: Vec<u16>,
        instance: Vec<u16>,
    ) -> Result<Self> {
        let n = positions.len();
        if intensity.len() != n || semantic.len() != n || instance.len() != n {
            return Err(Error::invalid(format!(
                "array lengths disagree: {n} positions, {} intensities, {} semantic, {} instance labels",
                intensity.len(),
                semantic.len(),
                instance.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| p.norm_squared() == 0.0 || !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("point {i} is at the origin or not finite")));
        }
        Ok(LabeledPointCloud {
            positions,
            intensity,
            semantic,
            instance,
        })
    }

    pub fn from_points(points: impl IntoIterator<Item = LabeledPoint>) -> Result<Self> {
        let mut pc = LabeledPointCloud::default();
        for p in points {
            pc.positions.push(p.position);
            pc.intensity.push(p.intensity);
            pc.semantic.push(p.semantic);
            pc.instance.push(p.instance);
        }
        LabeledPointCloud::new(pc.positions, pc.intensity, pc.semantic, pc.instance)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn intensity(&self) -> &[f32] {
        &self.intensity
    }

    pub fn semantic(&self) -> &[u16] {
        &self.semantic
    }

    pub fn instance(&self) -> &[u16] {
        &self.instance
    }

    pub fn point(&self, i: usize) -> LabeledPoint {
        LabeledPoint {
            position: self.positions[i],
            intensity: self.intensity[i],
            semantic: self.semantic[i],
            instance: self.instance[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = LabeledPoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}
