use std::path::{Path, PathBuf};

use thiserror::Error;

use super::FrameBuffer;
use crate::profiles::Resolution;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read frame directory {}: {source}", dir.display())]
    ReadDir {
        dir: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no frame_NNNNNN.png files in {}", dir.display())]
    Empty { dir: PathBuf },
    #[error("frame sequence in {} has a gap: frame {missing} is missing", dir.display())]
    Gap { dir: PathBuf, missing: u32 },
    #[error("frame {} is {found}, expected {expected}", frame.display())]
    DimensionMismatch {
        frame: PathBuf,
        expected: Resolution,
        found: Resolution,
    },
    #[error("cannot decode frame {}: {message}", frame.display())]
    Decode { frame: PathBuf, message: String },
    #[error("frame index {index} out of range 1..={len}")]
    OutOfRange { index: usize, len: usize },
}

/// `frame_000042.png` for index 42. Sequences start at 1.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

fn parse_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".png")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// A validated, numbered frame directory. Frames are decoded only when
/// requested, so a long clip never needs to be resident at once.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    dir: PathBuf,
    paths: Vec<PathBuf>,
    resolution: Resolution,
}

/// Scans `dir` for `frame_%06d.png` files numbered contiguously from 1.
///
/// Only PNG headers are read here; every frame must share the first frame's
/// dimensions.
pub fn ingest_frames(dir: &Path) -> Result<FrameSequence, IngestError> {
    let read_err = |source| IngestError::ReadDir {
        dir: dir.to_owned(),
        source,
    };
    let mut indexed = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(read_err)? {
        let entry = entry.map_err(read_err)?;
        if let Some(i) = entry.file_name().to_str().and_then(parse_index) {
            indexed.push((i, entry.path()));
        }
    }
    if indexed.is_empty() {
        return Err(IngestError::Empty { dir: dir.to_owned() });
    }
    indexed.sort();
    for (expected, (i, _)) in (1u32..).zip(&indexed) {
        if *i != expected {
            return Err(IngestError::Gap {
                dir: dir.to_owned(),
                missing: expected,
            });
        }
    }
    let paths: Vec<PathBuf> = indexed.into_iter().map(|(_, p)| p).collect();
    let dims = |p: &Path| {
        image::image_dimensions(p)
            .map(Resolution::from)
            .map_err(|e| IngestError::Decode {
                frame: p.to_owned(),
                message: e.to_string(),
            })
    };
    let resolution = dims(&paths[0])?;
    for p in &paths[1..] {
        let found = dims(p)?;
        if found != resolution {
            return Err(IngestError::DimensionMismatch {
                frame: p.clone(),
                expected: resolution,
                found,
            });
        }
    }
    Ok(FrameSequence {
        dir: dir.to_owned(),
        paths,
        resolution,
    })
}

impl FrameSequence {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    /// Path of 1-based frame `index`.
    pub fn path(&self, index: usize) -> Result<&Path, IngestError> {
        index
            .checked_sub(1)
            .and_then(|i| self.paths.get(i))
            .map(PathBuf::as_path)
            .ok_or(IngestError::OutOfRange {
                index,
                len: self.paths.len(),
            })
    }

    /// Decodes 1-based frame `index`.
    pub fn load(&self, index: usize) -> Result<FrameBuffer, IngestError> {
        let path = self.path(index)?;
        let frame = FrameBuffer::load_png(path).map_err(|e| IngestError::Decode {
            frame: path.to_owned(),
            message: e.to_string(),
        })?;
        if frame.resolution() != self.resolution {
            return Err(IngestError::DimensionMismatch {
                frame: path.to_owned(),
                expected: self.resolution,
                found: frame.resolution(),
            });
        }
        Ok(frame)
    }

    /// Frames in numeric order, decoded one at a time.
    pub fn iter(&self) -> impl Iterator<Item = Result<FrameBuffer, IngestError>> + '_ {
        (1..=self.len()).map(|i| self.load(i))
    }
}
