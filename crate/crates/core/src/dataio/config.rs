use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deflection::ProjectionModel;
use crate::error::{Error, Result};
use crate::geometry::{intrinsics_from_fov, SensorIntrinsics};

/// Sensor description as written by hand: fields of view in degrees plus
/// optional explicit discretization and principal-point overrides.
///
/// For `model = "camera"` the FoVs describe a pinhole frustum
/// (`f = (w/2) / tan(f_h/2)`) and the delta overrides are `1/f` in
/// normalized image-plane units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub f_h_deg: f64,
    pub f_v_deg: f64,
    pub width: usize,
    pub height: usize,
    pub max_range_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_phi_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_theta: Option<f64>,
    #[serde(default)]
    pub model: ProjectionModel,
}

impl SensorConfig {
    /// The 2048×1024 full-dome sensor with 120 m range.
    pub fn full_dome() -> Self {
        SensorConfig {
            f_h_deg: 360.0,
            f_v_deg: 180.0,
            width: 2048,
            height: 1024,
            max_range_m: 120.0,
            delta_phi_rad: None,
            delta_theta_rad: None,
            c_phi: None,
            c_theta: None,
            model: ProjectionModel::Spherical,
        }
    }

    pub fn from_intrinsics(k: &SensorIntrinsics) -> Self {
        let model = ProjectionModel::of(k);
        let (f_h_deg, f_v_deg) = match model {
            ProjectionModel::Spherical => (k.h_fov().to_degrees(), k.v_fov().to_degrees()),
            ProjectionModel::Camera => (
                (2.0 * (k.h_fov() / 2.0).atan()).to_degrees(),
                (2.0 * (k.v_fov() / 2.0).atan()).to_degrees(),
            ),
        };
        SensorConfig {
            f_h_deg,
            f_v_deg,
            width: k.width(),
            height: k.height(),
            max_range_m: k.max_range(),
            delta_phi_rad: Some(k.delta_phi()),
            delta_theta_rad: Some(k.delta_theta()),
            c_phi: Some(k.c_phi()),
            c_theta: Some(k.c_theta()),
            model,
        }
    }

    pub fn intrinsics(&self) -> Result<SensorIntrinsics> {
        let base = match self.model {
            ProjectionModel::Spherical => intrinsics_from_fov(
                self.f_h_deg.to_radians(),
                self.f_v_deg.to_radians(),
                self.width,
                self.height,
                self.max_range_m,
            )?,
            ProjectionModel::Camera => {
                let half = |deg: f64| {
                    let rad = deg.to_radians();
                    if !(rad > 0.0 && rad < std::f64::consts::PI) {
                        return Err(Error::invalid(format!("camera FoV must lie in (0°, 180°), got {deg}°")));
                    }
                    Ok((rad / 2.0).tan())
                };
                let fx = self.width as f64 / 2.0 / half(self.f_h_deg)?;
                let fy = self.height as f64 / 2.0 / half(self.f_v_deg)?;
                SensorIntrinsics::pinhole(
                    self.width,
                    self.height,
                    fx,
                    fy,
                    self.width as f64 / 2.0,
                    self.height as f64 / 2.0,
                    self.max_range_m,
                )?
            }
        };
        if self.delta_phi_rad.is_none()
            && self.delta_theta_rad.is_none()
            && self.c_phi.is_none()
            && self.c_theta.is_none()
        {
            return Ok(base);
        }
        let dphi = self.delta_phi_rad.unwrap_or(base.delta_phi());
        let dtheta = self.delta_theta_rad.unwrap_or(base.delta_theta());
        let cphi = self.c_phi.unwrap_or(base.c_phi());
        let ctheta = self.c_theta.unwrap_or(base.c_theta());
        match self.model {
            ProjectionModel::Spherical => {
                SensorIntrinsics::new(self.width, self.height, dphi, dtheta, cphi, ctheta, self.max_range_m)
            }
            ProjectionModel::Camera => {
                if dphi <= 0.0 || dtheta <= 0.0 {
                    return Err(Error::invalid("camera delta overrides must be positive (1/f)"));
                }
                SensorIntrinsics::pinhole(
                    self.width,
                    self.height,
                    1.0 / dphi,
                    1.0 / dtheta,
                    cphi,
                    ctheta,
                    self.max_range_m,
                )
            }
        }
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::invalid(format!("sensor config {}: {e}", path.display()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// Parses a sensor config file straight to intrinsics.
pub fn load_intrinsics(path: &Path) -> Result<SensorIntrinsics> {
    SensorConfig::load(path)?.intrinsics()
}
