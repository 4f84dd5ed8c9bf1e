//! The 4x4 golden frame setup, shared by the pipeline tests and the
//! acceptance suite.
#![allow(dead_code)]

use simulatar::pipeline::{DesignAsset, FrameBuffer};
use simulatar::profiles::{CameraProfile, HmdProfile, LuxCurve, Projection, Resolution};

pub const GOLDEN_LUX: f64 = 1000.0;

pub fn tiny_camera() -> CameraProfile {
    CameraProfile {
        id: "tiny".into(),
        frame_resolution: Resolution::new(4, 4),
        diagonal_fov_deg: 90.0,
        projection: Projection::Rectilinear,
        fps: 30.0,
    }
}

/// Square display whose half-angle tangent is exactly half the camera's, so
/// the overlay is the centered 2x2 block.
pub fn tiny_hmd() -> HmdProfile {
    HmdProfile {
        id: "tiny-hmd".into(),
        display_resolution: Resolution::new(2, 2),
        diagonal_fov_deg: 2.0 * 0.5f64.atan().to_degrees(),
        transmittance: 0.5,
        contrast_curve: LuxCurve::new(vec![(100.0, 0.8), (10000.0, 0.4)]),
        opacity_curve: LuxCurve::new(vec![(100.0, 0.9), (10000.0, 0.5)]),
        optics_label: String::new(),
        display_label: String::new(),
    }
}

pub fn tiny_background() -> FrameBuffer {
    let mut data = Vec::new();
    for y in 0..4u32 {
        for x in 0..4u32 {
            data.extend_from_slice(&[(16 + y * 55 + x * 20) as u8, (200 - x * 40) as u8, (30 + y * 50) as u8]);
        }
    }
    FrameBuffer::from_rgb(4, 4, data).unwrap()
}

pub fn tiny_design() -> DesignAsset {
    #[rustfmt::skip]
    let rgba = vec![
        255, 255, 255, 255,   255, 0, 0, 128,      0, 0, 255, 0,
        0, 255, 0, 200,       128, 128, 128, 255,  255, 200, 0, 64,
        10, 10, 10, 255,      0, 128, 255, 100,    255, 255, 255, 32,
    ];
    DesignAsset::from_rgba("tiny", 3, 3, rgba, None).unwrap()
}

// Frozen output of a standalone scalar oracle that applies the published
// formulas pixel by pixel (sRGB decode, bilinear taps on the 3x3 design,
// tint, wash-out, blend, sRGB encode with half-up rounding) at lux 1000.
#[rustfmt::skip]
pub const GOLDEN_ADDITIVE_FULL: [u8; 48] = [
    9, 146, 19, 23, 116, 19, 38, 86, 19, 53, 56, 19,
    50, 146, 56, 179, 200, 164, 105, 102, 96, 95, 56, 56,
    91, 146, 94, 141, 166, 149, 151, 125, 131, 136, 56, 94,
    132, 146, 131, 147, 116, 131, 162, 86, 131, 177, 56, 131,
];
#[rustfmt::skip]
pub const GOLDEN_ALPHA_OVER_RECT: [u8; 48] = [
    16, 200, 30, 36, 160, 30, 56, 120, 30, 76, 80, 30,
    71, 200, 80, 173, 182, 159, 101, 97, 94, 131, 80, 80,
    126, 200, 130, 118, 143, 133, 143, 121, 126, 186, 80, 130,
    181, 200, 180, 201, 160, 180, 221, 120, 180, 241, 80, 180,
];

