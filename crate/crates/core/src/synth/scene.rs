use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PEDESTRIAN: u16 = 1;
pub const VEHICLE: u16 = 2;
pub const TWO_WHEELER: u16 = 3;
pub const GROUND: u16 = 4;

/// Class names indexed by semantic id.
pub const CLASS_NAMES: [&str; 5] = ["unlabeled", "pedestrian", "vehicle", "two-wheeler", "ground"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: Vector3<f64>, radius: f64 },
    Aabb { min: Vector3<f64>, max: Vector3<f64> },
    GroundPlane { z0: f64 },
}

impl Shape {
    /// The shape displaced by `offset`.
    pub fn translated(&self, offset: &Vector3<f64>) -> Shape {
        match self {
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: center + offset,
                radius: *radius,
            },
            Shape::Aabb { min, max } => Shape::Aabb {
                min: min + offset,
                max: max + offset,
            },
            Shape::GroundPlane { z0 } => Shape::GroundPlane { z0: z0 + offset.z },
        }
    }

    /// Distance from `p` to the surface; zero on it.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Shape::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            Shape::Aabb { min, max } => {
                let outside = Vector3::from_fn(|i, _| (min[i] - p[i]).max(p[i] - max[i]).max(0.0));
                if outside.norm_squared() > 0.0 {
                    outside.norm()
                } else {
                    (0..3)
                        .map(|i| (p[i] - min[i]).min(max[i] - p[i]))
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Shape::GroundPlane { z0 } => (p.z - z0).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub semantic: u16,
    pub instance: u16,
    #[serde(default = "Vector3::zeros")]
    pub velocity: Vector3<f64>,
}

impl Primitive {
    pub fn at_time(&self, t: f64) -> Shape {
        if self.velocity == Vector3::zeros() {
            self.shape.clone()
        } else {
            self.shape.translated(&(self.velocity * t))
        }
    }
}

/// Rigid sensor pose: world position and roll/pitch/yaw in radians
/// (applied as `Rz(yaw)·Ry(pitch)·Rx(roll)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPose {
    pub translation: Vector3<f64>,
    pub rotation_rpy: Vector3<f64>,
}

impl Default for SensorPose {
    fn default() -> Self {
        SensorPose {
            translation: Vector3::zeros(),
            rotation_rpy: Vector3::zeros(),
        }
    }
}

impl SensorPose {
    pub fn rotation(&self) -> Rotation3<f64> {
        let r = self.rotation_rpy;
        Rotation3::from_euler_angles(r.x, r.y, r.z)
    }

    pub fn is_identity(&self) -> bool {
        self.translation == Vector3::zeros() && self.rotation_rpy == Vector3::zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub primitives: Vec<Primitive>,
    #[serde(default)]
    pub sensor_pose: SensorPose,
    pub frame_rate: f64,
    pub n_frames: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SceneDescription {
    pub fn empty(n_frames: usize) -> Self {
        SceneDescription {
            primitives: Vec::new(),
            sensor_pose: SensorPose::default(),
            frame_rate: 10.0,
            n_frames,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            problems.push(format!("frame_rate must be positive, got {}", self.frame_rate));
        }
        let mut ids = BTreeSet::new();
        for (i, p) in self.primitives.iter().enumerate() {
            match &p.shape {
                Shape::Sphere { radius, center } => {
                    if !(*radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
                        problems.push(format!("primitive {i}: sphere needs a finite center and positive radius"));
                    }
                }
                Shape::Aabb { min, max } => {
                    if !(0..3).all(|a| min[a].is_finite() && max[a].is_finite() && min[a] < max[a]) {
                        problems.push(format!("primitive {i}: box extents must be positive"));
                    }
                }
                Shape::GroundPlane { z0 } => {
                    if !z0.is_finite() {
                        problems.push(format!("primitive {i}: ground plane height must be finite"));
                    }
                }
            }
            if !p.velocity.iter().all(|v| v.is_finite()) {
                problems.push(format!("primitive {i}: velocity must be finite"));
            }
            match p.semantic {
                PEDESTRIAN | VEHICLE | TWO_WHEELER => {
                    if p.instance == 0 {
                        problems.push(format!("primitive {i}: road users need a positive instance id"));
                    } else if !ids.insert(p.instance) {
                        problems.push(format!("primitive {i}: duplicate instance id {}", p.instance));
                    }
                }
                GROUND => {
                    if p.instance != 0 {
                        problems.push(format!("primitive {i}: ground carries instance 0"));
                    }
                }
                s => problems.push(format!("primitive {i}: unknown semantic class {s}")),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn scene_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: SceneDescription =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("scene config: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// A street-like scene: a ground plane 1.8 m below the sensor plus a
    /// seeded mix of pedestrians (spheres), vehicles and two-wheelers
    /// (boxes) moving at walking, driving and cycling speeds.
    pub fn random(seed: u64, n_frames: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ground_z = -1.8;
        let mut primitives = vec![Primitive {
            shape: Shape::GroundPlane { z0: ground_z },
            semantic: GROUND,
            instance: 0,
            velocity: Vector3::zeros(),
        }];
        let n_objects = rng.gen_range(6..=14);
        for i in 0..n_objects {
            let class = [PEDESTRIAN, VEHICLE, TWO_WHEELER][rng.gen_range(0..3)];
            let dist = rng.gen_range(4.0..40.0);
            let bearing: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let (x, y) = (dist * bearing.cos(), dist * bearing.sin());
            let heading: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let dir = Vector3::new(heading.cos(), heading.sin(), 0.0);
            let (shape, speed) = match class {
                PEDESTRIAN => {
                    let radius = rng.gen_range(0.3..0.5);
                    let shape = Shape::Sphere {
                        center: Vector3::new(x, y, ground_z + radius),
                        radius,
                    };
                    (shape, rng.gen_range(0.5..1.8))
                }
                VEHICLE => {
                    let half = Vector3::new(rng.gen_range(1.8..2.5), rng.gen_range(0.8..1.0), 0.0);
                    let height = rng.gen_range(1.4..1.9);
                    (axis_box(x, y, ground_z, half, height), rng.gen_range(3.0..14.0))
                }
                _ => {
                    let half = Vector3::new(0.9, 0.3, 0.0);
                    let height = rng.gen_range(1.2..1.6);
                    (axis_box(x, y, ground_z, half, height), rng.gen_range(2.0..7.0))
                }
            };
            primitives.push(Primitive {
                shape,
                semantic: class,
                instance: i as u16 + 1,
                velocity: dir * speed,
            });
        }
        SceneDescription {
            primitives,
            sensor_pose: SensorPose::default(),
            frame_rate: 10.0,
            n_frames,
            seed,
        }
    }
}

fn axis_box(x: f64, y: f64, ground_z: f64, half: Vector3<f64>, height: f64) -> Shape {
    Shape::Aabb {
        min: Vector3::new(x - half.x, y - half.y, ground_z),
        max: Vector3::new(x + half.x, y + half.y, ground_z + height),
    }
}
