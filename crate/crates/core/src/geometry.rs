//! Field-of-view geometry for rectilinear cameras and headset canvases.
//!
//! For a rectilinear (pinhole) projection, image-plane position is
//! proportional to the tangent of the view angle, so a diagonal FOV splits
//! into horizontal and vertical components in tan-space:
//!
//! ```text
//! tan(h/2) = tan(d/2) * w / sqrt(w^2 + h^2)
//! tan(v/2) = tan(d/2) * h / sqrt(w^2 + h^2)
//! ```
//!
//! The headset canvas then covers `tan(hmd_h/2) / tan(cam_h/2)` of the frame
//! width, and likewise vertically.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::DomainError;
use crate::optics::{decode_u8, LinearColor};
use crate::pipeline::DesignAsset;
use crate::profiles::{CameraProfile, HmdProfile, Resolution};

/// Relative aspect difference tolerated between a design canvas and the
/// overlay rectangle it is scaled into.
pub const ASPECT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(
        "headset {axis} FOV {hmd_deg:.3} deg exceeds camera {axis} FOV {camera_deg:.3} deg; \
         cannot simulate a display wider than the capture"
    )]
    FovExceedsCamera {
        axis: &'static str,
        hmd_deg: f64,
        camera_deg: f64,
    },
    #[error("design aspect {design:.4} does not match overlay aspect {rect:.4} (tolerance 2%)")]
    AspectMismatch { design: f64, rect: f64 },
    #[error("frame {frame} does not match camera resolution {camera}")]
    FrameSize { frame: Resolution, camera: Resolution },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovSpec {
    pub h_fov_deg: f64,
    pub v_fov_deg: f64,
    pub d_fov_deg: f64,
    pub aspect: f64,
}

impl FovSpec {
    pub fn tan_half_h(&self) -> f64 {
        tan_half(self.h_fov_deg)
    }

    pub fn tan_half_v(&self) -> f64 {
        tan_half(self.v_fov_deg)
    }

    pub fn tan_half_d(&self) -> f64 {
        tan_half(self.d_fov_deg)
    }
}

fn tan_half(deg: f64) -> f64 {
    (deg.to_radians() / 2.0).tan()
}

fn check_fov(name: &'static str, deg: f64) -> Result<(), DomainError> {
    if deg > 0.0 && deg < 180.0 {
        Ok(())
    } else {
        Err(DomainError::new(name, deg, "an angle in (0, 180) degrees"))
    }
}

/// Splits a diagonal FOV into horizontal and vertical components for a
/// rectilinear image of the given width/height aspect.
pub fn fov_from_diagonal(d_fov_deg: f64, aspect: f64) -> Result<FovSpec, DomainError> {
    check_fov("diagonal FOV", d_fov_deg)?;
    if !(aspect.is_finite() && aspect > 0.0) {
        return Err(DomainError::new("aspect", aspect, "a positive ratio"));
    }
    let t = tan_half(d_fov_deg);
    let norm = aspect.hypot(1.0);
    let h = 2.0 * (t * aspect / norm).atan();
    let v = 2.0 * (t / norm).atan();
    Ok(FovSpec {
        h_fov_deg: h.to_degrees(),
        v_fov_deg: v.to_degrees(),
        d_fov_deg,
        aspect,
    })
}

pub fn camera_fov(camera: &CameraProfile) -> Result<FovSpec, DomainError> {
    fov_from_diagonal(camera.diagonal_fov_deg, camera.aspect())
}

pub fn hmd_fov(hmd: &HmdProfile) -> Result<FovSpec, DomainError> {
    fov_from_diagonal(hmd.diagonal_fov_deg, hmd.display_resolution.aspect())
}

/// Pixel rectangle of the camera frame covered by the headset canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OverlayRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl OverlayRect {
    pub fn full(frame: Resolution) -> Self {
        Self {
            x: 0,
            y: 0,
            w: frame.width,
            h: frame.height,
        }
    }

    #[inline]
    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    pub fn aspect(&self) -> f64 {
        f64::from(self.w) / f64::from(self.h)
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.w, self.h)
    }
}

/// Centered rectangle that the headset canvas subtends inside the camera
/// frame. Extents round half away from zero; the origin is floored.
pub fn overlay_rect(camera: &CameraProfile, hmd: &HmdProfile) -> Result<OverlayRect, GeometryError> {
    let cam = camera_fov(camera)?;
    let disp = hmd_fov(hmd)?;
    let frame = camera.frame_resolution;
    let axes = [
        ("horizontal", disp.h_fov_deg, cam.h_fov_deg, disp.tan_half_h() / cam.tan_half_h(), frame.width),
        ("vertical", disp.v_fov_deg, cam.v_fov_deg, disp.tan_half_v() / cam.tan_half_v(), frame.height),
    ];
    let mut extents = [0u32; 2];
    for (slot, (axis, hmd_deg, camera_deg, fraction, full)) in extents.iter_mut().zip(axes) {
        // Equal FOVs may differ in the last bits after the tan round trip.
        if fraction > 1.0 + 1e-9 {
            return Err(GeometryError::FovExceedsCamera {
                axis,
                hmd_deg,
                camera_deg,
            });
        }
        let extent = (fraction.min(1.0) * f64::from(full)).round() as u32;
        *slot = extent.clamp(1, full);
    }
    let [w, h] = extents;
    Ok(OverlayRect {
        x: (frame.width - w) / 2,
        y: (frame.height - h) / 2,
        w,
        h,
    })
}

/// Seat distance at which a monitor of the given width subtends the camera's
/// horizontal FOV, so that on-screen angles match the captured ones 1:1.
pub fn viewing_distance(monitor_width_cm: f64, camera_h_fov_deg: f64) -> Result<f64, DomainError> {
    if !(monitor_width_cm.is_finite() && monitor_width_cm > 0.0) {
        return Err(DomainError::new("monitor width", monitor_width_cm, "a positive length"));
    }
    check_fov("horizontal FOV", camera_h_fov_deg)?;
    Ok(monitor_width_cm / 2.0 / tan_half(camera_h_fov_deg))
}

/// Design pixels scaled to an overlay rectangle, in linear light.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBlock {
    pub width: u32,
    pub height: u32,
    pub color: Vec<LinearColor>,
    pub alpha: Vec<f64>,
    /// Solid-background coverage in `[0, 1]`, present when the design had a mask.
    pub mask: Option<Vec<f64>>,
}

impl DesignBlock {
    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

/// Source sample positions and weights along one axis, pixel-center aligned.
fn axis_taps(src: u32, dst: u32) -> Vec<(usize, usize, f64)> {
    let scale = f64::from(src) / f64::from(dst);
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((f64::from(i) + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor();
            let i1 = (i0 + 1.0).min(last);
            (i0 as usize, i1 as usize, s - i0)
        })
        .collect()
}

fn bilinear<T, F>(src_w: usize, taps_x: &[(usize, usize, f64)], taps_y: &[(usize, usize, f64)], sample: F) -> Vec<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    F: Fn(usize) -> T,
{
    let mut out = Vec::with_capacity(taps_x.len() * taps_y.len());
    for &(y0, y1, fy) in taps_y {
        for &(x0, x1, fx) in taps_x {
            let top = sample(y0 * src_w + x0) * (1.0 - fx) + sample(y0 * src_w + x1) * fx;
            let bottom = sample(y1 * src_w + x0) * (1.0 - fx) + sample(y1 * src_w + x1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Bilinearly scales the design to the rectangle: color in linear light,
/// alpha (and mask coverage) linearly.
pub fn resample_design(design: &DesignAsset, rect: &OverlayRect) -> Result<DesignBlock, GeometryError> {
    let design_aspect = design.resolution().aspect();
    let rect_aspect = rect.aspect();
    if (design_aspect / rect_aspect - 1.0).abs() > ASPECT_TOLERANCE {
        return Err(GeometryError::AspectMismatch {
            design: design_aspect,
            rect: rect_aspect,
        });
    }
    let src_w = design.width() as usize;
    let taps_x = axis_taps(design.width(), rect.w);
    let taps_y = axis_taps(design.height(), rect.h);
    let rgba = design.rgba();
    let linear: Vec<LinearColor> = rgba
        .chunks_exact(4)
        .map(|p| LinearColor::new(decode_u8(p[0]), decode_u8(p[1]), decode_u8(p[2])))
        .collect();
    let color = bilinear(src_w, &taps_x, &taps_y, |i| linear[i]);
    let alpha = bilinear(src_w, &taps_x, &taps_y, |i| f64::from(rgba[i * 4 + 3]) / 255.0);
    let mask = design.mask().map(|m| {
        bilinear(src_w, &taps_x, &taps_y, |i| if m[i] { 1.0 } else { 0.0 })
    });
    Ok(DesignBlock {
        width: rect.w,
        height: rect.h,
        color,
        alpha,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ProfileRegistry, GOPRO_HERO10_LINEAR, HL2};

    // Independent trig oracle: half-angle tangents straight from the
    // definition, no shared helpers.
    fn oracle_split(d_deg: f64, w: f64, h: f64) -> (f64, f64) {
        let t = (d_deg * std::f64::consts::PI / 360.0).tan();
        let n = (w * w + h * h).sqrt();
        (
            (t * w / n).atan() * 360.0 / std::f64::consts::PI,
            (t * h / n).atan() * 360.0 / std::f64::consts::PI,
        )
    }

    #[test]
    fn gopro_linear_split() {
        let f = fov_from_diagonal(95.0, 16.0 / 9.0).unwrap();
        assert!((f.h_fov_deg - 87.13).abs() <= 0.01, "{}", f.h_fov_deg);
        assert!((f.v_fov_deg - 56.29).abs() <= 0.01, "{}", f.v_fov_deg);
        let (h, v) = oracle_split(95.0, 16.0, 9.0);
        assert!((f.h_fov_deg - h).abs() < 1e-9 && (f.v_fov_deg - v).abs() < 1e-9);
    }

    #[test]
    fn hl2_default_split() {
        let f = fov_from_diagonal(52.0, 1440.0 / 936.0).unwrap();
        assert!((f.h_fov_deg - 44.49).abs() <= 0.01, "{}", f.h_fov_deg);
        assert!((f.v_fov_deg - 29.77).abs() <= 0.01, "{}", f.v_fov_deg);
    }

    #[test]
    fn square_aspect_is_symmetric() {
        let f = fov_from_diagonal(90.0, 1.0).unwrap();
        assert!((f.h_fov_deg - f.v_fov_deg).abs() < 1e-12);
    }

    #[test]
    fn fov_domain_errors() {
        assert!(fov_from_diagonal(0.0, 1.0).is_err());
        assert!(fov_from_diagonal(180.0, 1.0).is_err());
        assert!(fov_from_diagonal(90.0, 0.0).is_err());
        assert!(fov_from_diagonal(90.0, f64::NAN).is_err());
    }

    #[test]
    fn gopro_hl2_rect() {
        let reg = ProfileRegistry::builtin();
        let cam = reg.camera(GOPRO_HERO10_LINEAR).unwrap();
        let hmd = reg.hmd(HL2).unwrap();
        let r = overlay_rect(cam, hmd).unwrap();
        assert!((i64::from(r.w) - 1163).abs() <= 1, "{r:?}");
        assert!((i64::from(r.h) - 755).abs() <= 1, "{r:?}");
        let (lm, rm) = (r.x, cam.frame_resolution.width - r.x - r.w);
        let (tm, bm) = (r.y, cam.frame_resolution.height - r.y - r.h);
        assert!(lm.abs_diff(rm) <= 1 && tm.abs_diff(bm) <= 1);
    }

    #[test]
    fn identical_fov_is_full_frame() {
        let reg = ProfileRegistry::builtin();
        let cam = reg.camera(GOPRO_HERO10_LINEAR).unwrap().clone();
        let mut hmd = reg.hmd(HL2).unwrap().clone();
        hmd.diagonal_fov_deg = cam.diagonal_fov_deg;
        hmd.display_resolution = cam.frame_resolution;
        assert_eq!(overlay_rect(&cam, &hmd).unwrap(), OverlayRect::full(cam.frame_resolution));
    }

    #[test]
    fn wide_hmd_is_rejected() {
        let reg = ProfileRegistry::builtin();
        let cam = reg.camera(GOPRO_HERO10_LINEAR).unwrap();
        let mut hmd = reg.hmd(HL2).unwrap().clone();
        hmd.diagonal_fov_deg = 120.0;
        assert!(matches!(
            overlay_rect(cam, &hmd),
            Err(GeometryError::FovExceedsCamera { .. })
        ));
    }

    #[test]
    fn viewing_distance_examples() {
        let d = viewing_distance(59.77, 87.13).unwrap();
        assert!((d - 31.4).abs() <= 0.1, "{d}");
        let w = 2.0 * (45f64).to_radians().tan() * 10.0;
        assert!((viewing_distance(w, 90.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(viewing_distance(0.0, 90.0).is_err());
        assert!(viewing_distance(10.0, 0.0).is_err());
    }

    fn solid(w: u32, h: u32, px: [u8; 4]) -> DesignAsset {
        DesignAsset::from_rgba("d", w, h, px.repeat((w * h) as usize), None).unwrap()
    }

    #[test]
    fn identity_resample() {
        let rgba = vec![10, 20, 30, 255, 40, 50, 60, 128, 70, 80, 90, 0, 200, 210, 220, 64];
        let d = DesignAsset::from_rgba("d", 2, 2, rgba.clone(), None).unwrap();
        let block = resample_design(&d, &OverlayRect { x: 0, y: 0, w: 2, h: 2 }).unwrap();
        for (i, p) in rgba.chunks_exact(4).enumerate() {
            assert_eq!(block.color[i], LinearColor::new(decode_u8(p[0]), decode_u8(p[1]), decode_u8(p[2])));
            assert_eq!(block.alpha[i], f64::from(p[3]) / 255.0);
        }
    }

    #[test]
    fn constant_design_stays_constant() {
        let d = solid(40, 26, [120, 30, 200, 77]);
        let block = resample_design(&d, &OverlayRect { x: 5, y: 5, w: 23, h: 15 }).unwrap();
        let c = LinearColor::new(decode_u8(120), decode_u8(30), decode_u8(200));
        for (col, a) in block.color.iter().zip(&block.alpha) {
            assert!((col.r - c.r).abs() < 1e-12 && (col.g - c.g).abs() < 1e-12 && (col.b - c.b).abs() < 1e-12);
            assert!((a - 77.0 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aspect_mismatch_names_both() {
        let d = solid(100, 100, [0, 0, 0, 255]);
        let err = resample_design(&d, &OverlayRect { x: 0, y: 0, w: 160, h: 90 }).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1.0000") && msg.contains("1.7778"), "{msg}");
    }

    #[test]
    fn checkerboard_mean_alpha_matches_area_average() {
        // 8-px checker of opaque/transparent cells on the HL2 canvas.
        let (w, h) = (1440u32, 936u32);
        let mut rgba = Vec::with_capacity((w * h * 4) as usize);
        for y in 0..h {
            for x in 0..w {
                let a = if (x / 8 + y / 8) % 2 == 0 { 255 } else { 0 };
                rgba.extend_from_slice(&[255, 255, 255, a]);
            }
        }
        let d = DesignAsset::from_rgba("checker", w, h, rgba.clone(), None).unwrap();
        let rect = OverlayRect { x: 0, y: 0, w: 1163, h: 755 };
        let block = resample_design(&d, &rect).unwrap();
        let mean = block.alpha.iter().sum::<f64>() / block.alpha.len() as f64;

        // Brute-force area average: each output pixel averages the source
        // area it covers, integrated on a fine sub-grid.
        let (sx, sy) = (f64::from(w) / f64::from(rect.w), f64::from(h) / f64::from(rect.h));
        let sub = 4;
        let mut total = 0.0;
        for oy in 0..rect.h {
            for ox in 0..rect.w {
                let mut acc = 0.0;
                for j in 0..sub {
                    for i in 0..sub {
                        let fx = (f64::from(ox) + (f64::from(i) + 0.5) / f64::from(sub)) * sx;
                        let fy = (f64::from(oy) + (f64::from(j) + 0.5) / f64::from(sub)) * sy;
                        let idx = (fy as usize) * w as usize + fx as usize;
                        acc += f64::from(rgba[idx * 4 + 3]) / 255.0;
                    }
                }
                total += acc / f64::from(sub * sub);
            }
        }
        let oracle = total / f64::from(rect.w * rect.h);
        assert!((mean - oracle).abs() / oracle < 0.01, "bilinear {mean} vs area {oracle}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tan_space_invariant(d in 1.0f64..179.0, aspect in 0.1f64..10.0) {
                let f = fov_from_diagonal(d, aspect).unwrap();
                let lhs = f.tan_half_d().powi(2);
                let rhs = f.tan_half_h().powi(2) + f.tan_half_v().powi(2);
                prop_assert!(((lhs - rhs) / lhs.max(1.0)).abs() < 1e-9);
            }

            #[test]
            fn rect_centered_and_scale_free(
                hmd_d in 10.0f64..60.0,
                w in 16u32..2000,
                h in 16u32..2000,
            ) {
                let reg = ProfileRegistry::builtin();
                let mut cam = reg.camera(GOPRO_HERO10_LINEAR).unwrap().clone();
                cam.frame_resolution = Resolution::new(w, h);
                let hmd = HmdProfile { diagonal_fov_deg: hmd_d, ..reg.hmd(HL2).unwrap().clone() };
                let Ok(r) = overlay_rect(&cam, &hmd) else { return Ok(()) };
                prop_assert!(r.x + r.w <= w && r.y + r.h <= h);
                prop_assert!(r.x.abs_diff(w - r.x - r.w) <= 1);
                prop_assert!(r.y.abs_diff(h - r.y - r.h) <= 1);

                cam.frame_resolution = Resolution::new(w * 2, h * 2);
                let r2 = overlay_rect(&cam, &hmd).unwrap();
                prop_assert!(r2.w.abs_diff(r.w * 2) <= 1 && r2.h.abs_diff(r.h * 2) <= 1);
            }

            #[test]
            fn distance_linear_in_width(width in 1.0f64..200.0, k in 0.1f64..10.0, fov in 10.0f64..170.0) {
                let a = viewing_distance(width, fov).unwrap();
                let b = viewing_distance(width * k, fov).unwrap();
                prop_assert!((b - a * k).abs() < 1e-9 * b.max(1.0));
            }
        }
    }
}
