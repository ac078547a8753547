//! Sensor-geometry toolkit for spinning LiDAR range images.
//!
//! * [`geometry`]: intrinsics, spherical projection and point clouds.
//! * [`deflection`]: per-pixel deflection angle images and pyramids.
//! * [`raster`]: z-buffered rasterization of clouds into range images.
//! * [`resim`]: derived sensors by center-crop and nearest resize.
//! * [`synth`]: analytic ray casting of parametric scenes.
//! * [`eval`]: COCO-style mean average recall over instance masks.
//! * [`dataio`]: bit-exact file formats and dataset manifests.
//! * [`dataset`]: whole-dataset synthesis, re-simulation and ground-truth collection.

pub mod dataio;
pub mod dataset;
pub mod deflection;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod raster;
pub mod resim;
pub mod synth;

pub use error::{Error, Result};
