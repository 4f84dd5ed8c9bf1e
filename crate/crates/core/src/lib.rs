//! Simulate how 2D UI designs look through optical see-through head-mounted
//! displays by blending them onto first-person context video.
//!
//! The crate is split by concern:
//!
//! - [`profiles`]: headset, camera and context-clip descriptions plus the
//!   lux-dependent correction curves.
//! - [`optics`]: linear-light tint, washout and additive compositing per pixel.
//! - [`geometry`]: FOV decomposition, overlay placement and the 1:1 viewing
//!   distance.
//! - [`pipeline`]: frame ingestion, rendering and manifest-driven batches.
//! - [`stats`]: paired TOST equivalence tests and the context grid used to
//!   validate simulator ratings against headset ratings.
//!
//! ```
//! use simulatar::geometry::overlay_rect;
//! use simulatar::profiles::{load_profiles, GOPRO_HERO10_LINEAR, HL2};
//!
//! let registry = load_profiles(None)?;
//! let rect = overlay_rect(registry.camera(GOPRO_HERO10_LINEAR)?, registry.hmd(HL2)?)?;
//! assert_eq!((rect.w, rect.h), (1162, 756));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod error;
pub mod geometry;
pub mod optics;
pub mod pipeline;
pub mod profiles;
pub mod stats;

pub use error::{DomainError, Error, ErrorCategory, Result};

/// The guide under `book/`, compiled here so its Rust snippets run as
/// doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    pub mod profiles {}
    #[doc = include_str!("../../../book/src/optics.md")]
    pub mod optics {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub mod pipeline {}
    #[doc = include_str!("../../../book/src/equivalence.md")]
    pub mod equivalence {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/service.md")]
    pub mod service {}
}
