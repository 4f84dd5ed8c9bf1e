//! Per-pixel light model for additive see-through displays.
//!
//! All blending happens on linear-light values. Background video is darkened
//! by the combiner's transmittance, the design is compressed toward mid-gray
//! to mimic washout, and the result is either added to the background
//! (`Additive`) or composited source-over (`AlphaOver`).

use std::ops::{Add, Mul};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// Pivot that [`wash_out`] compresses toward.
pub const WASHOUT_PIVOT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearColor {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl LinearColor {
    pub const BLACK: Self = Self::gray(0.0);
    pub const WHITE: Self = Self::gray(1.0);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub const fn gray(v: f64) -> Self {
        Self { r: v, g: v, b: v }
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.r), f(self.g), f(self.b))
    }

    pub fn clamp01(self) -> Self {
        self.map(|c| c.clamp(0.0, 1.0))
    }

    /// Rec. 709 relative luminance.
    pub fn luminance(self) -> f64 {
        0.2126 * self.r + 0.7152 * self.g + 0.0722 * self.b
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }
}

impl Add for LinearColor {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.r + o.r, self.g + o.g, self.b + o.b)
    }
}

impl Mul<f64> for LinearColor {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.map(|c| c * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlendMode {
    /// Display light adds to the (tinted) world light. Black is transparent.
    #[default]
    Additive,
    /// Source-over compositing with the scaled design alpha.
    #[serde(alias = "alpha_over")]
    AlphaOver,
}

impl BlendMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BlendMode::Additive => "additive",
            BlendMode::AlphaOver => "alpha-over",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TintExtent {
    /// The combiner tint darkens the whole field of view.
    #[default]
    #[serde(alias = "full")]
    FullFrame,
    /// Only the display area behind the design is tinted.
    #[serde(alias = "rect")]
    OverlayRectOnly,
}

impl TintExtent {
    pub fn as_str(self) -> &'static str {
        match self {
            TintExtent::FullFrame => "full_frame",
            TintExtent::OverlayRectOnly => "overlay_rect_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendParams {
    pub transmittance: f64,
    pub alpha_scale: f64,
    pub contrast_retention: f64,
    pub mode: BlendMode,
    pub tint_extent: TintExtent,
}

impl BlendParams {
    /// Parameters that leave the design untouched: no tint, full opacity,
    /// full contrast.
    pub fn neutral(mode: BlendMode) -> Self {
        Self {
            transmittance: 1.0,
            alpha_scale: 1.0,
            contrast_retention: 1.0,
            mode,
            tint_extent: TintExtent::FullFrame,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return Err(DomainError::new("transmittance", self.transmittance, "(0, 1]"));
        }
        check_unit("alpha_scale", self.alpha_scale)?;
        check_unit("contrast_retention", self.contrast_retention)?;
        Ok(())
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<f64, DomainError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(DomainError::new(name, v, "[0, 1]"))
    }
}

/// sRGB code value to linear light.
pub fn srgb_decode(code: f64) -> Result<f64, DomainError> {
    check_unit("sRGB code", code).map(decode_unchecked)
}

/// Linear light to sRGB code value.
pub fn srgb_encode(linear: f64) -> Result<f64, DomainError> {
    check_unit("linear value", linear).map(encode_unchecked)
}

#[inline]
fn decode_unchecked(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn encode_unchecked(l: f64) -> f64 {
    if l <= 0.003_130_8 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

fn decode_lut() -> &'static [f64; 256] {
    static LUT: OnceLock<[f64; 256]> = OnceLock::new();
    LUT.get_or_init(|| std::array::from_fn(|i| decode_unchecked(i as f64 / 255.0)))
}

/// Linear value of an 8-bit sRGB code.
#[inline]
pub fn decode_u8(code: u8) -> f64 {
    decode_lut()[code as usize]
}

/// Nearest 8-bit sRGB code for a linear value; input is clamped to `[0, 1]`.
#[inline]
pub fn encode_u8(linear: f64) -> u8 {
    let code = encode_unchecked(linear.clamp(0.0, 1.0)) * 255.0;
    code.round() as u8
}

/// Darkens world light by the combiner transmittance.
///
/// A black overlay of opacity `1 - t` composited over the video is exactly a
/// multiplication by `t` in linear light.
pub fn apply_tint(bg: LinearColor, transmittance: f64) -> LinearColor {
    bg * transmittance
}

/// Compresses a design color toward mid-gray: `0.5 + (d - 0.5) * retention`.
pub fn wash_out(d: LinearColor, retention: f64) -> LinearColor {
    d.map(|c| WASHOUT_PIVOT + (c - WASHOUT_PIVOT) * retention)
        .clamp01()
}

/// Composites one design pixel over an already-tinted background pixel.
pub fn composite_pixel(
    bg: LinearColor,
    design: LinearColor,
    design_alpha: f64,
    params: &BlendParams,
) -> LinearColor {
    composite(
        bg,
        design,
        design_alpha * params.alpha_scale,
        params.contrast_retention,
        params.mode,
    )
}

/// [`composite_pixel`] with the effective alpha already resolved.
#[inline]
pub(crate) fn composite(
    bg: LinearColor,
    design: LinearColor,
    effective_alpha: f64,
    retention: f64,
    mode: BlendMode,
) -> LinearColor {
    if effective_alpha == 0.0 {
        return bg;
    }
    let d = wash_out(design, retention);
    let out = match mode {
        BlendMode::Additive => bg + d * effective_alpha,
        BlendMode::AlphaOver => d * effective_alpha + bg * (1.0 - effective_alpha),
    };
    out.clamp01()
}
