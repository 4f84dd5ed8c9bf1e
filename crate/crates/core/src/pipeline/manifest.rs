//! Declarative batch jobs.
//!
//! A manifest names the context clips and designs it uses, then lists jobs
//! over them. Relative paths resolve against the manifest's directory.
//!
//! ```json
//! {
//!   "contexts": {
//!     "bus": { "frames_path": "clips/bus", "location": "transport",
//!              "mobility": "sitting", "lighting_lux": 250 }
//!   },
//!   "designs": { "email": { "path": "designs/email.png" } },
//!   "jobs": [
//!     { "context_id": "bus", "hmd_profile_id": "hl2", "design_id": "email",
//!       "mode": "additive", "tint_extent": "full_frame", "output": "out/bus-hl2" }
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{frame_file_name, ingest_frames, DesignAsset, FrameRenderer};
use crate::error::{Error, Result};
use crate::geometry::OverlayRect;
use crate::optics::{BlendMode, TintExtent};
use crate::profiles::{ContextClip, ProfileRegistry};

pub const SIDECAR_FILE: &str = "blend.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {}: line {line}, column {column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("jobs {first} and {second} both write to {}", output.display())]
    DuplicateOutput {
        first: usize,
        second: usize,
        output: PathBuf,
    },
    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSource {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendJob {
    pub context_id: String,
    pub hmd_profile_id: String,
    pub design_id: String,
    /// Defaults to the context's recorded lighting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lux: Option<f64>,
    #[serde(default)]
    pub mode: BlendMode,
    #[serde(default)]
    pub tint_extent: TintExtent,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendManifest {
    #[serde(default)]
    pub contexts: BTreeMap<String, ContextClip>,
    #[serde(default)]
    pub designs: BTreeMap<String, DesignSource>,
    pub jobs: Vec<BlendJob>,
}

impl BlendManifest {
    /// Reads and validates a manifest file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut manifest: Self = serde_json::from_str(&text).map_err(|e| ManifestError::Parse {
            path: path.to_owned(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.resolve_paths(base);
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for (id, clip) in &mut self.contexts {
            if clip.id.is_empty() {
                clip.id = id.clone();
            }
            fix(&mut clip.frames_path);
        }
        for d in self.designs.values_mut() {
            fix(&mut d.path);
            if let Some(m) = &mut d.mask {
                fix(m);
            }
        }
        for j in &mut self.jobs {
            fix(&mut j.output);
        }
    }

    /// Checks manifest-wide invariants. Unresolvable ids are reported per job
    /// at run time so that sibling jobs still run.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut seen: BTreeMap<&Path, usize> = BTreeMap::new();
        for (i, job) in self.jobs.iter().enumerate() {
            if let Some(&first) = seen.get(job.output.as_path()) {
                return Err(ManifestError::DuplicateOutput {
                    first,
                    second: i,
                    output: job.output.clone(),
                });
            }
            seen.insert(&job.output, i);
        }
        Ok(())
    }

    /// Ids referenced by jobs but not declared, as (kind, id) pairs.
    pub fn unresolved(&self, registry: &ProfileRegistry) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for j in &self.jobs {
            let checks = [
                ("context", &j.context_id, self.contexts.contains_key(&j.context_id)),
                ("hmd profile", &j.hmd_profile_id, registry.hmds.contains_key(&j.hmd_profile_id)),
                ("design", &j.design_id, self.designs.contains_key(&j.design_id)),
            ];
            for (kind, id, ok) in checks {
                if !ok && seen.insert((kind, id.clone())) {
                    out.push((kind, id.clone()));
                }
            }
        }
        out
    }
}

/// Metadata written next to every rendered frame sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub tool_version: String,
    pub context_id: String,
    pub hmd_profile_id: String,
    pub camera_profile_id: String,
    pub design_id: String,
    pub lux: f64,
    pub mode: BlendMode,
    pub tint_extent: TintExtent,
    pub transmittance: f64,
    pub alpha_scale: f64,
    pub contrast_retention: f64,
    pub rect: OverlayRect,
    pub frame_count: usize,
    pub frame_pattern: String,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub job: usize,
    pub context_id: String,
    pub hmd_profile_id: String,
    pub design_id: String,
    pub output: PathBuf,
    pub success: bool,
    pub frames: usize,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub jobs: Vec<JobReport>,
    pub succeeded: usize,
    pub failed: usize,
    pub parallelism: usize,
    /// Most decoded frames alive at once during the run.
    pub peak_resident_frames: usize,
}

struct FrameGauge {
    live: AtomicUsize,
    peak: AtomicUsize,
}

impl FrameGauge {
    fn enter(&self) -> GaugeGuard<'_> {
        let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        GaugeGuard(self)
    }
}

struct GaugeGuard<'a>(&'a FrameGauge);

impl Drop for GaugeGuard<'_> {
    fn drop(&mut self) {
        self.0.live.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Renders every job of the manifest with at most `parallelism` worker
/// threads. Failing jobs are reported without stopping the others; outputs
/// do not depend on the worker count.
pub fn run_manifest(
    manifest: &BlendManifest,
    registry: &ProfileRegistry,
    parallelism: usize,
) -> Result<RunReport> {
    if parallelism == 0 {
        return Err(ManifestError::ZeroParallelism.into());
    }
    manifest.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool with a positive thread count");
    let gauge = FrameGauge {
        live: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    };
    let jobs: Vec<JobReport> = pool.install(|| {
        manifest
            .jobs
            .par_iter()
            .enumerate()
            .map(|(i, job)| {
                let start = Instant::now();
                let result = run_job(manifest, registry, job, &gauge);
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                let (success, frames, error, error_category) = match result {
                    Ok(n) => (true, n, None, None),
                    Err(e) => (false, 0, Some(e.to_string()), Some(e.category().as_str().to_owned())),
                };
                JobReport {
                    job: i,
                    context_id: job.context_id.clone(),
                    hmd_profile_id: job.hmd_profile_id.clone(),
                    design_id: job.design_id.clone(),
                    output: job.output.clone(),
                    success,
                    frames,
                    wall_ms,
                    error,
                    error_category,
                }
            })
            .collect()
    });
    let succeeded = jobs.iter().filter(|j| j.success).count();
    Ok(RunReport {
        failed: jobs.len() - succeeded,
        succeeded,
        jobs,
        parallelism,
        peak_resident_frames: gauge.peak.load(Ordering::SeqCst),
    })
}

fn unknown(kind: &'static str, id: &str) -> Error {
    ManifestError::UnknownId {
        kind,
        id: id.to_owned(),
    }
    .into()
}

fn run_job(manifest: &BlendManifest, registry: &ProfileRegistry, job: &BlendJob, gauge: &FrameGauge) -> Result<usize> {
    let clip = manifest
        .contexts
        .get(&job.context_id)
        .ok_or_else(|| unknown("context", &job.context_id))?;
    clip.validate()?;
    let source = manifest
        .designs
        .get(&job.design_id)
        .ok_or_else(|| unknown("design", &job.design_id))?;
    let hmd = registry.hmd(&job.hmd_profile_id)?;
    let camera = registry.camera(&clip.camera)?;
    let lux = job.lux.unwrap_or(clip.lighting_lux);

    let design = DesignAsset::load(&job.design_id, &source.path, source.mask.as_deref())?;
    let renderer = FrameRenderer::new(&design, hmd, camera, lux, job.mode, job.tint_extent)?;
    let frames = ingest_frames(&clip.frames_path)?;

    std::fs::create_dir_all(&job.output).map_err(|e| Error::io(&job.output, e))?;
    (1..=frames.len()).into_par_iter().try_for_each(|i| -> Result<()> {
        let _resident = gauge.enter();
        let bg = frames.load(i)?;
        let out = renderer.render(&bg)?;
        out.save_png(&job.output.join(frame_file_name(i)))
    })?;

    let params = renderer.params();
    let sidecar = Sidecar {
        tool: "simulatar".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        context_id: job.context_id.clone(),
        hmd_profile_id: job.hmd_profile_id.clone(),
        camera_profile_id: camera.id.clone(),
        design_id: job.design_id.clone(),
        lux,
        mode: job.mode,
        tint_extent: job.tint_extent,
        transmittance: params.transmittance,
        alpha_scale: params.alpha_scale,
        contrast_retention: params.contrast_retention,
        rect: renderer.rect(),
        frame_count: frames.len(),
        frame_pattern: "frame_%06d.png".into(),
        fps: camera.fps,
    };
    let path = job.output.join(SIDECAR_FILE);
    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(frames.len())
}
