//! On-disk formats: point binaries, NPY channels, frame directories,
//! dataset manifests, sensor configs and debug PNGs.

use std::io::Write;
use std::path::Path;

use crate::deflection::DeflectionImage;
use crate::error::{Error, Result};
use crate::raster::SphericalImage;

pub mod cloud;
pub mod colormap;
pub mod config;
pub mod frame;
pub mod manifest;
pub mod npy;
pub mod png;

pub use cloud::{read_cloud, write_cloud};
pub use config::SensorConfig;
pub use frame::{read_frame_image, validate_frame, write_frame, FrameMeta, FrameOptions, OutputFormat};
pub use manifest::{read_manifest, write_manifest, DatasetManifest, DerivedSensor, SequenceRecord, Split};
pub use npy::{NpyArray, NpyData};

/// Writes `bytes` to a sibling temp file and renames it over `path`, creating
/// parent directories as needed.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Named image channels and their fixed element types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelKind {
    Range,
    Intensity,
    Semantic,
    Instance,
    Deflection,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Range,
        ChannelKind::Intensity,
        ChannelKind::Semantic,
        ChannelKind::Instance,
        ChannelKind::Deflection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Range => "range",
            ChannelKind::Intensity => "intensity",
            ChannelKind::Semantic => "semantic",
            ChannelKind::Instance => "instance",
            ChannelKind::Deflection => "deflection",
        }
    }

    pub fn descr(self) -> &'static str {
        match self {
            ChannelKind::Range | ChannelKind::Intensity | ChannelKind::Deflection => "<f4",
            ChannelKind::Semantic => "<u2",
            ChannelKind::Instance => "<u4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// The channel as a 2-D array; `Deflection` is not stored in a
    /// [`SphericalImage`] and yields `None`.
    pub fn extract(self, img: &SphericalImage) -> Option<NpyArray> {
        let (h, w) = (img.height(), img.width());
        let data = match self {
            ChannelKind::Range => NpyData::F32(img.range().to_vec()),
            ChannelKind::Intensity => NpyData::F32(img.intensity().to_vec()),
            ChannelKind::Semantic => NpyData::U16(img.semantic().to_vec()),
            ChannelKind::Instance => NpyData::U32(img.instance().to_vec()),
            ChannelKind::Deflection => return None,
        };
        Some(NpyArray { height: h, width: w, data })
    }
}

pub fn deflection_array(d: &DeflectionImage) -> NpyArray {
    NpyArray {
        height: d.height(),
        width: d.width(),
        data: NpyData::F32(d.to_f32()),
    }
}

/// Writes one channel, rejecting arrays whose element type does not match
/// the channel.
pub fn write_channel(path: &Path, kind: ChannelKind, arr: &NpyArray) -> Result<()> {
    if arr.data.descr() != kind.descr() {
        return Err(Error::invalid(format!(
            "channel {} must be {}, got {}",
            kind.name(),
            kind.descr(),
            arr.data.descr()
        )));
    }
    npy::write_npy(path, arr)
}

pub fn read_channel(path: &Path, kind: ChannelKind) -> Result<NpyArray> {
    let arr = npy::read_npy(path)?;
    if arr.data.descr() != kind.descr() {
        return Err(Error::format(
            path,
            None,
            format!("descr: channel {} must be '{}', found '{}'", kind.name(), kind.descr(), arr.data.descr()),
        ));
    }
    Ok(arr)
}
