//! Frame-level rendering and batch orchestration.
//!
//! Rendering one background frame always runs the same fixed sequence:
//!
//! 1. decode the sRGB background to linear light;
//! 2. apply the combiner tint (whole frame, or the overlay rectangle only);
//! 3. compute the overlay rectangle from camera and headset FOV;
//! 4. resample the design into the rectangle;
//! 5. composite each design pixel, with the alpha scale and contrast
//!    retention looked up from the headset's lux curves;
//! 6. encode back to 8-bit sRGB.
//!
//! Steps 3 and 4 depend only on the job, not the frame, so [`FrameRenderer`]
//! does them once and reuses the result for every frame.

mod assemble;
mod ingest;
mod manifest;

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};
use serde::Serialize;

pub use assemble::{assemble_video, assemble_video_with, AssemblyError, AssemblyOutcome, TRANSCODER_ENV};
pub use ingest::{frame_file_name, ingest_frames, FrameSequence, IngestError};
pub use manifest::{
    run_manifest, BlendJob, BlendManifest, DesignSource, JobReport, ManifestError, RunReport,
    Sidecar, SIDECAR_FILE,
};

use crate::error::{Error, Result};
use crate::geometry::{overlay_rect, resample_design, DesignBlock, GeometryError, OverlayRect};
use crate::optics::{self, apply_tint, decode_u8, encode_u8, BlendMode, BlendParams, LinearColor, TintExtent};
use crate::profiles::{CameraProfile, HmdProfile, Resolution};

/// An 8-bit sRGB RGB image, rows top to bottom.
#[derive(Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for FrameBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl FrameBuffer {
    /// Wraps packed RGB bytes. Returns `None` if the length does not match.
    pub fn from_rgb(width: u32, height: u32, data: Vec<u8>) -> Option<Self> {
        (data.len() == width as usize * height as usize * 3).then_some(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb.repeat(width as usize * height as usize),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_owned(),
            source,
        })?;
        let rgb = img.into_rgb8();
        let (w, h) = rgb.dimensions();
        Ok(Self {
            width: w,
            height: h,
            data: rgb.into_raw(),
        })
    }

    /// PNG bytes for this frame. The same encoder settings are used for every
    /// output, so equal frames always encode to equal bytes.
    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() / 2);
        PngEncoder::new_with_quality(Cursor::new(&mut out), CompressionType::Fast, FilterType::Sub)
            .write_image(&self.data, self.width, self.height, ExtendedColorType::Rgb8)
            .expect("in-memory PNG encoding of a well-formed buffer");
        out
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode_png()).map_err(|e| Error::io(path, e))
    }

    /// Box-filtered copy no wider than `max_width`, keeping the aspect.
    /// Averaging happens on the stored sRGB codes; this is for previews only.
    pub fn thumbnail(&self, max_width: u32) -> Self {
        if self.width <= max_width || max_width == 0 {
            return self.clone();
        }
        let w = max_width;
        let h = ((u64::from(self.height) * u64::from(w) + u64::from(self.width) / 2) / u64::from(self.width)).max(1) as u32;
        let mut data = Vec::with_capacity(w as usize * h as usize * 3);
        for ty in 0..h {
            let (y0, y1) = span(ty, h, self.height);
            for tx in 0..w {
                let (x0, x1) = span(tx, w, self.width);
                let mut acc = [0u64; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = self.pixel(x, y);
                        for c in 0..3 {
                            acc[c] += u64::from(p[c]);
                        }
                    }
                }
                let n = u64::from((x1 - x0) * (y1 - y0));
                data.extend(acc.iter().map(|&a| ((a + n / 2) / n) as u8));
            }
        }
        Self { width: w, height: h, data }
    }
}

/// Source range `[start, end)` covered by destination index `i`.
fn span(i: u32, dst: u32, src: u32) -> (u32, u32) {
    let start = (u64::from(i) * u64::from(src) / u64::from(dst)) as u32;
    let end = ((u64::from(i) + 1) * u64::from(src) / u64::from(dst)) as u32;
    (start, end.max(start + 1))
}

/// A UI design canvas: 8-bit sRGB color with straight 8-bit alpha, and an
/// optional mask flagging solid-background pixels.
#[derive(Clone, PartialEq, Eq)]
pub struct DesignAsset {
    id: String,
    width: u32,
    height: u32,
    rgba: Vec<u8>,
    mask: Option<Vec<bool>>,
}

impl std::fmt::Debug for DesignAsset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DesignAsset")
            .field("id", &self.id)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("masked", &self.mask.is_some())
            .finish_non_exhaustive()
    }
}

impl DesignAsset {
    pub fn from_rgba(
        id: impl Into<String>,
        width: u32,
        height: u32,
        rgba: Vec<u8>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self, GeometryError> {
        let n = width as usize * height as usize;
        if width == 0 || height == 0 || rgba.len() != n * 4 {
            return Err(crate::error::DomainError::new(
                "design buffer length",
                rgba.len() as f64,
                "width * height * 4 bytes with non-zero size",
            )
            .into());
        }
        if let Some(m) = &mask {
            if m.len() != n {
                return Err(crate::error::DomainError::new(
                    "design mask length",
                    m.len() as f64,
                    "one entry per canvas pixel",
                )
                .into());
            }
        }
        Ok(Self {
            id: id.into(),
            width,
            height,
            rgba,
            mask,
        })
    }

    /// Loads a design PNG and, optionally, a mask PNG whose non-zero luma
    /// marks solid-background pixels.
    pub fn load(id: impl Into<String>, design: &Path, mask: Option<&Path>) -> Result<Self> {
        let open = |p: &Path| {
            image::open(p).map_err(|source| Error::Image {
                path: p.to_owned(),
                source,
            })
        };
        let img = open(design)?.into_rgba8();
        let (w, h) = img.dimensions();
        let mask = match mask {
            Some(p) => {
                let m = open(p)?.into_luma8();
                if m.dimensions() != (w, h) {
                    return Err(GeometryError::AspectMismatch {
                        design: f64::from(w) / f64::from(h),
                        rect: f64::from(m.width()) / f64::from(m.height()),
                    }
                    .into());
                }
                Some(m.into_raw().into_iter().map(|v| v != 0).collect())
            }
            None => None,
        };
        Ok(Self::from_rgba(id, w, h, img.into_raw(), mask)?)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.width, self.height)
    }

    pub fn rgba(&self) -> &[u8] {
        &self.rgba
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }
}

/// Everything about a render that does not change from frame to frame.
#[derive(Debug, Clone, Serialize)]
pub struct RenderSetup {
    pub frame: Resolution,
    pub rect: OverlayRect,
    pub lux: f64,
    pub params: BlendParams,
}

/// Renders background frames for one (design, headset, camera, lux) setup.
#[derive(Debug, Clone)]
pub struct FrameRenderer {
    setup: RenderSetup,
    block: DesignBlock,
    /// `encode(decode(c) * transmittance)` for every 8-bit code.
    tint_lut: [u8; 256],
}

impl FrameRenderer {
    pub fn new(
        design: &DesignAsset,
        hmd: &HmdProfile,
        camera: &CameraProfile,
        lux: f64,
        mode: BlendMode,
        tint_extent: TintExtent,
    ) -> Result<Self> {
        let alpha_scale = hmd.opacity_curve.eval(lux)?;
        let contrast_retention = hmd.contrast_curve.eval(lux)?;
        let params = BlendParams {
            transmittance: hmd.transmittance,
            alpha_scale,
            contrast_retention,
            mode,
            tint_extent,
        };
        params.validate()?;
        let rect = overlay_rect(camera, hmd)?;
        let block = resample_design(design, &rect)?;
        let tint_lut = std::array::from_fn(|c| {
            encode_u8(apply_tint(LinearColor::gray(decode_u8(c as u8)), params.transmittance).r)
        });
        Ok(Self {
            setup: RenderSetup {
                frame: camera.frame_resolution,
                rect,
                lux,
                params,
            },
            block,
            tint_lut,
        })
    }

    pub fn setup(&self) -> &RenderSetup {
        &self.setup
    }

    pub fn rect(&self) -> OverlayRect {
        self.setup.rect
    }

    pub fn params(&self) -> &BlendParams {
        &self.setup.params
    }

    pub fn render(&self, bg: &FrameBuffer) -> Result<FrameBuffer, GeometryError> {
        if bg.resolution() != self.setup.frame {
            return Err(GeometryError::FrameSize {
                frame: bg.resolution(),
                camera: self.setup.frame,
            });
        }
        let RenderSetup { rect, params, .. } = &self.setup;
        let tint_outside = params.tint_extent == TintExtent::FullFrame;
        let width = bg.width as usize;
        let mut out = Vec::with_capacity(bg.data.len());
        for (y, row) in bg.data.chunks_exact(width * 3).enumerate() {
            let y = y as u32;
            let row_in_rect = y >= rect.y && y < rect.y + rect.h;
            for (x, px) in row.chunks_exact(3).enumerate() {
                let x = x as u32;
                if row_in_rect && x >= rect.x && x < rect.x + rect.w {
                    out.extend_from_slice(&self.composite_at(px, x - rect.x, y - rect.y));
                } else if tint_outside {
                    out.extend(px.iter().map(|&c| self.tint_lut[c as usize]));
                } else {
                    out.extend_from_slice(px);
                }
            }
        }
        Ok(FrameBuffer {
            width: bg.width,
            height: bg.height,
            data: out,
        })
    }

    #[inline]
    fn composite_at(&self, px: &[u8], bx: u32, by: u32) -> [u8; 3] {
        let params = &self.setup.params;
        let bg = LinearColor::new(decode_u8(px[0]), decode_u8(px[1]), decode_u8(px[2]));
        let bg = apply_tint(bg, params.transmittance);
        let i = self.block.index(bx, by);
        let scale = match &self.block.mask {
            // Opacity scaling only touches solid-background coverage.
            Some(mask) => 1.0 + mask[i] * (params.alpha_scale - 1.0),
            None => params.alpha_scale,
        };
        let out = optics::composite(
            bg,
            self.block.color[i],
            self.block.alpha[i] * scale,
            params.contrast_retention,
            params.mode,
        );
        [encode_u8(out.r), encode_u8(out.g), encode_u8(out.b)]
    }
}

/// Renders a single frame. Equivalent to building a [`FrameRenderer`] and
/// calling [`FrameRenderer::render`].
pub fn render_frame(
    bg: &FrameBuffer,
    design: &DesignAsset,
    hmd: &HmdProfile,
    camera: &CameraProfile,
    lux: f64,
    mode: BlendMode,
    tint_extent: TintExtent,
) -> Result<FrameBuffer> {
    let renderer = FrameRenderer::new(design, hmd, camera, lux, mode, tint_extent)?;
    Ok(renderer.render(bg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ProfileRegistry, GOPRO_HERO10_LINEAR, HL2};

    fn small_setup() -> (HmdProfile, CameraProfile) {
        let reg = ProfileRegistry::builtin();
        let mut cam = reg.camera(GOPRO_HERO10_LINEAR).unwrap().clone();
        cam.frame_resolution = Resolution::new(64, 36);
        (reg.hmd(HL2).unwrap().clone(), cam)
    }

    fn gradient(w: u32, h: u32) -> FrameBuffer {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(&[(x * 4) as u8, (y * 7) as u8, ((x + y) * 3) as u8]);
            }
        }
        FrameBuffer::from_rgb(w, h, data).unwrap()
    }

    fn transparent(w: u32, h: u32) -> DesignAsset {
        DesignAsset::from_rgba("t", w, h, vec![255, 255, 255, 0].repeat((w * h) as usize), None).unwrap()
    }

    #[test]
    fn transparent_design_is_tint_only() {
        let (hmd, cam) = small_setup();
        let bg = gradient(64, 36);
        let out = render_frame(&bg, &transparent(144, 94), &hmd, &cam, 100.0, BlendMode::Additive, TintExtent::FullFrame)
            .unwrap();
        for (o, i) in out.as_bytes().iter().zip(bg.as_bytes()) {
            assert_eq!(*o, encode_u8(decode_u8(*i) * hmd.transmittance));
        }
    }

    #[test]
    fn full_transmission_is_identity() {
        let (mut hmd, cam) = small_setup();
        hmd.transmittance = 1.0;
        let bg = gradient(64, 36);
        for mode in [BlendMode::Additive, BlendMode::AlphaOver] {
            let out = render_frame(&bg, &transparent(144, 94), &hmd, &cam, 250.0, mode, TintExtent::FullFrame).unwrap();
            assert_eq!(out, bg);
        }
    }

    #[test]
    fn rect_only_tint_leaves_outside_untouched() {
        let (hmd, cam) = small_setup();
        let bg = gradient(64, 36);
        let r = FrameRenderer::new(&transparent(144, 94), &hmd, &cam, 100.0, BlendMode::Additive, TintExtent::OverlayRectOnly)
            .unwrap();
        let out = r.render(&bg).unwrap();
        let rect = r.rect();
        for y in 0..36 {
            for x in 0..64 {
                if !rect.contains(x, y) {
                    assert_eq!(out.pixel(x, y), bg.pixel(x, y));
                }
            }
        }
        assert_ne!(out, bg);
    }

    #[test]
    fn wrong_frame_size_is_rejected() {
        let (hmd, cam) = small_setup();
        let r = FrameRenderer::new(&transparent(144, 94), &hmd, &cam, 100.0, BlendMode::Additive, TintExtent::FullFrame)
            .unwrap();
        assert!(matches!(r.render(&gradient(32, 18)), Err(GeometryError::FrameSize { .. })));
    }

    #[test]
    fn mask_limits_opacity_scaling() {
        let (hmd, cam) = small_setup();
        let bg = FrameBuffer::filled(64, 36, [0, 0, 0]);
        let (w, h) = (144u32, 94u32);
        let white = vec![255u8, 255, 255, 255].repeat((w * h) as usize);
        let unmasked = DesignAsset::from_rgba("a", w, h, white.clone(), Some(vec![false; (w * h) as usize])).unwrap();
        let masked = DesignAsset::from_rgba("b", w, h, white, Some(vec![true; (w * h) as usize])).unwrap();
        let lux = 10_000.0;
        let a = render_frame(&bg, &unmasked, &hmd, &cam, lux, BlendMode::Additive, TintExtent::FullFrame).unwrap();
        let b = render_frame(&bg, &masked, &hmd, &cam, lux, BlendMode::Additive, TintExtent::FullFrame).unwrap();
        let c = (32, 18);
        // Unmasked pixels keep full opacity; masked ones are scaled by 0.6.
        let retention = hmd.contrast_curve.eval(lux).unwrap();
        let d = 0.5 + 0.5 * retention;
        assert_eq!(a.pixel(c.0, c.1)[0], encode_u8(d));
        assert_eq!(b.pixel(c.0, c.1)[0], encode_u8(d * 0.6));
    }

    #[test]
    fn thumbnail_averages_blocks() {
        let mut data = Vec::new();
        for _y in 0..4 {
            for x in 0..8u8 {
                data.extend_from_slice(&[x * 10, 100, 0]);
            }
        }
        let f = FrameBuffer::from_rgb(8, 4, data).unwrap();
        let t = f.thumbnail(4);
        assert_eq!(t.resolution(), Resolution::new(4, 2));
        assert_eq!(t.pixel(0, 0), [5, 100, 0]);
        assert_eq!(t.pixel(3, 1), [65, 100, 0]);
        assert_eq!(f.thumbnail(16), f);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.png");
        let f = gradient(13, 7);
        f.save_png(&p).unwrap();
        assert_eq!(FrameBuffer::load_png(&p).unwrap(), f);
    }
}
