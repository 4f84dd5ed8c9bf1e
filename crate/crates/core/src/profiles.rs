//! Headset, camera and context-clip descriptions.
//!
//! Profiles are plain data. [`load_profiles`] returns the built-in registry,
//! optionally merged with a JSON override file:
//!
//! ```json
//! {
//!   "hmd_profiles": {
//!     "hl2": { "transmittance": 0.35 },
//!     "my-glasses": {
//!       "display_resolution": [1280, 720],
//!       "diagonal_fov_deg": 30,
//!       "transmittance": 0.5,
//!       "contrast_curve": [[100, 1.0], [10000, 0.5]],
//!       "opacity_curve": [[100, 1.0], [10000, 0.6]]
//!     }
//!   },
//!   "camera_profiles": {}
//! }
//! ```
//!
//! Entries for an existing id are merged field by field over the built-in
//! profile; entries for a new id must carry every required field.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::error::DomainError;

pub const HL2: &str = "hl2";
pub const NREAL_LIGHT: &str = "nreal-light";
pub const GOPRO_HERO10_LINEAR: &str = "gopro-hero10-linear";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("config {}: line {line}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("profile {profile:?}: invalid {field}: {message}")]
    Validation {
        profile: String,
        field: &'static str,
        message: String,
    },
    #[error("unknown {kind} profile {id:?}")]
    Unknown { kind: &'static str, id: String },
}

fn invalid(profile: &str, field: &'static str, message: impl Into<String>) -> ProfileError {
    ProfileError::Validation {
        profile: profile.to_owned(),
        field,
        message: message.into(),
    }
}

/// Pixel dimensions, serialized as `[width, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

impl Resolution {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn aspect(self) -> f64 {
        f64::from(self.width) / f64::from(self.height)
    }

    pub fn pixel_count(self) -> usize {
        self.width as usize * self.height as usize
    }
}

impl From<(u32, u32)> for Resolution {
    fn from((width, height): (u32, u32)) -> Self {
        Self { width, height }
    }
}

impl From<Resolution> for (u32, u32) {
    fn from(r: Resolution) -> Self {
        (r.width, r.height)
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Piecewise-linear curve over log10(lux), serialized as `[[lux, value], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LuxCurve(Vec<(f64, f64)>);

impl LuxCurve {
    /// Builds a curve without validation; see [`LuxCurve::validate`].
    pub fn new(anchors: impl Into<Vec<(f64, f64)>>) -> Self {
        Self(anchors.into())
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.0
    }

    /// Checks the anchor invariants: at least two anchors, positive lux
    /// strictly increasing, values in `[0, 1]`.
    pub fn validate(&self) -> Result<(), String> {
        if self.0.len() < 2 {
            return Err(format!("needs at least 2 anchors, got {}", self.0.len()));
        }
        for (i, &(lux, value)) in self.0.iter().enumerate() {
            if !(lux.is_finite() && lux > 0.0) {
                return Err(format!("anchor {i}: lux {lux} must be positive and finite"));
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(format!("anchor {i}: value {value} outside [0, 1]"));
            }
            if i > 0 && lux <= self.0[i - 1].0 {
                return Err(format!("anchor {i}: lux {lux} not strictly increasing"));
            }
        }
        Ok(())
    }

    /// Interpolates the curve at `lux`.
    ///
    /// Interpolation is linear in log10(lux) between neighbouring anchors and
    /// clamps to the first/last anchor value outside the covered range.
    pub fn eval(&self, lux: f64) -> Result<f64, DomainError> {
        eval_curve(self, lux)
    }
}

/// See [`LuxCurve::eval`].
pub fn eval_curve(curve: &LuxCurve, lux: f64) -> Result<f64, DomainError> {
    if !(lux.is_finite() && lux > 0.0) {
        return Err(DomainError::new("lux", lux, "a positive finite illuminance"));
    }
    let anchors = curve.anchors();
    let (first, last) = match (anchors.first(), anchors.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(DomainError::new("curve anchors", 0.0, "at least 2 anchors")),
    };
    if lux <= first.0 {
        return Ok(first.1);
    }
    if lux >= last.0 {
        return Ok(last.1);
    }
    let x = lux.log10();
    let seg = anchors
        .windows(2)
        .find(|w| lux <= w[1].0)
        .expect("lux lies strictly inside the anchor range");
    let (x0, y0) = (seg[0].0.log10(), seg[0].1);
    let (x1, y1) = (seg[1].0.log10(), seg[1].1);
    let t = (x - x0) / (x1 - x0);
    Ok(y0 + (y1 - y0) * t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmdProfile {
    #[serde(default)]
    pub id: String,
    /// Per-eye display resolution; also fixes the design canvas aspect.
    pub display_resolution: Resolution,
    pub diagonal_fov_deg: f64,
    /// Fraction of world light passing the combiner. Tint opacity is
    /// `1 - transmittance`.
    pub transmittance: f64,
    pub contrast_curve: LuxCurve,
    pub opacity_curve: LuxCurve,
    #[serde(default)]
    pub optics_label: String,
    #[serde(default)]
    pub display_label: String,
}

impl HmdProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let id = self.id.as_str();
        if self.display_resolution.width == 0 || self.display_resolution.height == 0 {
            return Err(invalid(id, "display_resolution", "components must be > 0"));
        }
        validate_fov(id, self.diagonal_fov_deg)?;
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return Err(invalid(
                id,
                "transmittance",
                format!("{} outside (0, 1]", self.transmittance),
            ));
        }
        self.contrast_curve
            .validate()
            .map_err(|m| invalid(id, "contrast_curve", m))?;
        self.opacity_curve
            .validate()
            .map_err(|m| invalid(id, "opacity_curve", m))?;
        Ok(())
    }

    pub fn tint_opacity(&self) -> f64 {
        1.0 - self.transmittance
    }
}

fn validate_fov(id: &str, fov: f64) -> Result<(), ProfileError> {
    if fov > 0.0 && fov < 180.0 {
        Ok(())
    } else {
        Err(invalid(id, "diagonal_fov_deg", format!("{fov} outside (0, 180)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    #[default]
    Rectilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraProfile {
    #[serde(default)]
    pub id: String,
    pub frame_resolution: Resolution,
    pub diagonal_fov_deg: f64,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_fps() -> f64 {
    30.0
}

impl CameraProfile {
    /// Width over height of the captured frame.
    pub fn aspect(&self) -> f64 {
        self.frame_resolution.aspect()
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let id = self.id.as_str();
        if self.frame_resolution.width == 0 || self.frame_resolution.height == 0 {
            return Err(invalid(id, "frame_resolution", "components must be > 0"));
        }
        validate_fov(id, self.diagonal_fov_deg)?;
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(invalid(id, "fps", format!("{} must be positive", self.fps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Indoor,
    Outdoor,
    Transport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mobility {
    Sitting,
    Walking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightingClass {
    Low,
    High,
}

impl LightingClass {
    /// Lux at and above which a clip counts as brightly lit when no class is
    /// given. Separates the studied low (100 outdoor, 250 indoor) from the
    /// high (500 indoor, 10000 outdoor) conditions.
    pub const HIGH_THRESHOLD_LUX: f64 = 500.0;

    pub fn from_lux(lux: f64) -> Self {
        if lux >= Self::HIGH_THRESHOLD_LUX {
            LightingClass::High
        } else {
            LightingClass::Low
        }
    }
}

/// A first-person context recording stored as numbered frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextClip {
    #[serde(default)]
    pub id: String,
    pub frames_path: PathBuf,
    pub location: Location,
    pub mobility: Mobility,
    pub lighting_lux: f64,
    #[serde(default)]
    pub lighting_class: Option<LightingClass>,
    #[serde(default = "default_camera")]
    pub camera: String,
}

fn default_camera() -> String {
    GOPRO_HERO10_LINEAR.to_owned()
}

impl ContextClip {
    pub fn lighting_class(&self) -> LightingClass {
        self.lighting_class
            .unwrap_or_else(|| LightingClass::from_lux(self.lighting_lux))
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if !(self.lighting_lux.is_finite() && self.lighting_lux > 0.0) {
            return Err(invalid(
                &self.id,
                "lighting_lux",
                format!("{} must be positive", self.lighting_lux),
            ));
        }
        if self.frames_path.as_os_str().is_empty() {
            return Err(invalid(&self.id, "frames_path", "must not be empty"));
        }
        Ok(())
    }
}

/// Immutable set of headset and camera profiles keyed by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileRegistry {
    #[serde(rename = "hmd_profiles", default)]
    pub hmds: BTreeMap<String, HmdProfile>,
    #[serde(rename = "camera_profiles", default)]
    pub cameras: BTreeMap<String, CameraProfile>,
}

impl ProfileRegistry {
    /// The built-in profiles: `hl2`, `nreal-light` and `gopro-hero10-linear`.
    ///
    /// Headset FOV, transmittance and both lux curves are starting values
    /// that need calibration against real hardware.
    pub fn builtin() -> Self {
        let opacity = LuxCurve::new([(100.0, 1.0), (10_000.0, 0.6)]);
        let hmds = [
            HmdProfile {
                id: HL2.into(),
                display_resolution: Resolution::new(1440, 936),
                diagonal_fov_deg: 52.0,
                transmittance: 0.40,
                contrast_curve: LuxCurve::new([(100.0, 1.0), (10_000.0, 0.3)]),
                opacity_curve: opacity.clone(),
                optics_label: "Waveguides".into(),
                display_label: "Laser Beam Scanning".into(),
            },
            HmdProfile {
                id: NREAL_LIGHT.into(),
                display_resolution: Resolution::new(1920, 1080),
                diagonal_fov_deg: 52.0,
                transmittance: 0.25,
                contrast_curve: LuxCurve::new([(100.0, 1.0), (10_000.0, 0.6)]),
                opacity_curve: opacity,
                optics_label: "Birdbath".into(),
                display_label: "OLED".into(),
            },
        ];
        let camera = CameraProfile {
            id: GOPRO_HERO10_LINEAR.into(),
            frame_resolution: Resolution::new(2704, 1520),
            diagonal_fov_deg: 95.0,
            projection: Projection::Rectilinear,
            fps: 50.0,
        };
        Self {
            hmds: hmds.into_iter().map(|h| (h.id.clone(), h)).collect(),
            cameras: BTreeMap::from([(camera.id.clone(), camera)]),
        }
    }

    pub fn hmd(&self, id: &str) -> Result<&HmdProfile, ProfileError> {
        self.hmds.get(id).ok_or_else(|| ProfileError::Unknown {
            kind: "hmd",
            id: id.to_owned(),
        })
    }

    pub fn camera(&self, id: &str) -> Result<&CameraProfile, ProfileError> {
        self.cameras.get(id).ok_or_else(|| ProfileError::Unknown {
            kind: "camera",
            id: id.to_owned(),
        })
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        self.hmds.values().try_for_each(HmdProfile::validate)?;
        self.cameras.values().try_for_each(CameraProfile::validate)
    }

    /// Merges a parsed override document into this registry.
    pub fn merge_overrides(&mut self, path: &Path, doc: Value) -> Result<(), ProfileError> {
        let Value::Object(mut top) = doc else {
            return Err(parse_error(path, "top level must be a JSON object"));
        };
        if let Some(section) = top.remove("hmd_profiles") {
            merge_section(path, "hmd_profiles", &mut self.hmds, section)?;
        }
        if let Some(section) = top.remove("camera_profiles") {
            merge_section(path, "camera_profiles", &mut self.cameras, section)?;
        }
        if let Some(key) = top.keys().next() {
            return Err(parse_error(path, format!("unknown top-level key {key:?}")));
        }
        Ok(())
    }
}

trait Keyed: Serialize + serde::de::DeserializeOwned {
    fn set_id(&mut self, id: String);
}

impl Keyed for HmdProfile {
    fn set_id(&mut self, id: String) {
        self.id = id;
    }
}

impl Keyed for CameraProfile {
    fn set_id(&mut self, id: String) {
        self.id = id;
    }
}

fn parse_error(path: &Path, message: impl Into<String>) -> ProfileError {
    ProfileError::Parse {
        path: path.to_owned(),
        line: 0,
        column: 0,
        message: message.into(),
    }
}

fn merge_section<T: Keyed>(
    path: &Path,
    section_name: &str,
    entries: &mut BTreeMap<String, T>,
    section: Value,
) -> Result<(), ProfileError> {
    let Value::Object(section) = section else {
        return Err(parse_error(path, format!("{section_name} must be an object")));
    };
    for (id, user) in section {
        let Value::Object(user) = user else {
            return Err(parse_error(path, format!("{section_name}.{id} must be an object")));
        };
        let mut merged = match entries.get(&id) {
            Some(existing) => match serde_json::to_value(existing) {
                Ok(Value::Object(map)) => map,
                _ => unreachable!("profiles serialize to JSON objects"),
            },
            None => serde_json::Map::new(),
        };
        merged.extend(user);
        let mut profile: T = serde_json::from_value(Value::Object(merged))
            .map_err(|e| parse_error(path, format!("{section_name}.{id}: {e}")))?;
        profile.set_id(id.clone());
        entries.insert(id, profile);
    }
    Ok(())
}

/// Loads the built-in profiles, merged with the overrides at `config_path`
/// when given. User entries win on id collision. Every profile is validated.
pub fn load_profiles(config_path: Option<&Path>) -> Result<ProfileRegistry, ProfileError> {
    let mut registry = ProfileRegistry::builtin();
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Read {
            path: path.to_owned(),
            source,
        })?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| ProfileError::Parse {
            path: path.to_owned(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        registry.merge_overrides(path, doc)?;
    }
    registry.validate()?;
    Ok(registry)
}
