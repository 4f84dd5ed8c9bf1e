use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use simulatar::optics::{BlendMode, TintExtent};
use simulatar::pipeline::{frame_file_name, ingest_frames, DesignAsset, FrameRenderer, FrameSequence};
use simulatar::profiles::{load_profiles, ContextClip, Location, Mobility, ProfileRegistry};

use crate::error::StartupError;
use crate::pool::RenderPool;
use crate::ServiceConfig;

/// `assets/contexts/<id>/meta.json`. Frames live next to it in `frames/`.
#[derive(Debug, Clone, Deserialize)]
struct ContextMeta {
    location: Location,
    mobility: Mobility,
    lighting_lux: f64,
    #[serde(default)]
    lighting_class: Option<simulatar::profiles::LightingClass>,
    #[serde(default)]
    camera: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ContextEntry {
    pub clip: ContextClip,
    pub frames: FrameSequence,
}

/// Scans the asset library. Clips that fail to load are skipped with a
/// warning so one bad directory does not take the service down.
pub fn scan_contexts(assets: &Path, registry: &ProfileRegistry) -> BTreeMap<String, ContextEntry> {
    let mut out = BTreeMap::new();
    let dir = assets.join("contexts");
    let Ok(entries) = std::fs::read_dir(&dir) else {
        tracing::warn!("no context library at {}", dir.display());
        return out;
    };
    for entry in entries.flatten() {
        let path = entry.path();
        let Some(id) = path.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
            continue;
        };
        if !path.is_dir() {
            continue;
        }
        match load_context(&id, &path, registry) {
            Ok(e) => {
                out.insert(id, e);
            }
            Err(msg) => tracing::warn!("skipping context {id}: {msg}"),
        }
    }
    out
}

fn load_context(id: &str, dir: &Path, registry: &ProfileRegistry) -> Result<ContextEntry, String> {
    let meta_path = dir.join("meta.json");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| format!("{}: {e}", meta_path.display()))?;
    let meta: ContextMeta = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", meta_path.display()))?;
    let clip = ContextClip {
        id: id.to_owned(),
        frames_path: dir.join("frames"),
        location: meta.location,
        mobility: meta.mobility,
        lighting_lux: meta.lighting_lux,
        lighting_class: meta.lighting_class,
        camera: meta
            .camera
            .unwrap_or_else(|| simulatar::profiles::GOPRO_HERO10_LINEAR.to_owned()),
    };
    clip.validate().map_err(|e| e.to_string())?;
    let camera = registry.camera(&clip.camera).map_err(|e| e.to_string())?;
    let frames = ingest_frames(&clip.frames_path).map_err(|e| e.to_string())?;
    if frames.resolution() != camera.frame_resolution {
        return Err(format!(
            "frames are {} but camera {} records {}",
            frames.resolution(),
            camera.id,
            camera.frame_resolution
        ));
    }
    Ok(ContextEntry { clip, frames })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub context_id: String,
    pub profile_id: String,
    pub design_id: String,
    pub lux: f64,
    pub mode: BlendMode,
    pub tint_extent: TintExtent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub spec: JobSpec,
    pub state: JobState,
    pub progress: Progress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_url: Option<String>,
}

pub fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub struct AppState {
    pub config: ServiceConfig,
    pub registry: ProfileRegistry,
    pub contexts: BTreeMap<String, ContextEntry>,
    pub jobs: Mutex<BTreeMap<String, JobRecord>>,
    pub pool: RenderPool,
}

impl AppState {
    /// Loads profiles (refusing to start on a bad config), scans assets and
    /// restores persisted jobs.
    pub fn open(config: ServiceConfig) -> Result<Self, StartupError> {
        let registry = load_profiles(config.profiles_config.as_deref())?;
        let contexts = scan_contexts(&config.assets, &registry);
        for dir in [config.designs_dir(), config.jobs_dir()] {
            std::fs::create_dir_all(&dir).map_err(|source| StartupError::Io { path: dir.clone(), source })?;
        }
        let jobs = restore_jobs(&config.jobs_dir());
        let pool = RenderPool::new(config.workers);
        Ok(Self {
            config,
            registry,
            contexts,
            jobs: Mutex::new(jobs),
            pool,
        })
    }

    pub fn design_path(&self, id: &str) -> Option<PathBuf> {
        valid_token(id).then(|| self.config.designs_dir().join(format!("{id}.png")))
    }

    pub fn mask_path(&self, id: &str) -> Option<PathBuf> {
        valid_token(id).then(|| self.config.designs_dir().join(format!("{id}.mask.png")))
    }

    pub fn design_exists(&self, id: &str) -> bool {
        self.design_path(id).is_some_and(|p| p.is_file())
    }

    pub fn load_design(&self, id: &str) -> simulatar::Result<DesignAsset> {
        let path = self.design_path(id).expect("caller checked the id");
        let mask = self.mask_path(id).filter(|p| p.is_file());
        DesignAsset::load(id, &path, mask.as_deref())
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.config.jobs_dir().join(id)
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    /// Applies `f` to the job under the lock and persists the result.
    pub fn update_job(&self, id: &str, f: impl FnOnce(&mut JobRecord)) {
        let snapshot = {
            let mut jobs = self.jobs.lock().unwrap();
            let Some(job) = jobs.get_mut(id) else { return };
            f(job);
            job.clone()
        };
        if matches!(snapshot.state, JobState::Done | JobState::Failed | JobState::Queued) {
            persist_job(&self.job_dir(id), &snapshot);
        }
    }

    /// Builds the renderer for a job spec. Shared by previews and batch jobs.
    pub fn renderer(&self, spec: &JobSpec) -> simulatar::Result<FrameRenderer> {
        let context = &self.contexts[&spec.context_id];
        let hmd = self.registry.hmd(&spec.profile_id)?;
        let camera = self.registry.camera(&context.clip.camera)?;
        let design = self.load_design(&spec.design_id)?;
        FrameRenderer::new(&design, hmd, camera, spec.lux, spec.mode, spec.tint_extent)
    }

    /// Queues one batch task per frame of the job's clip.
    pub fn start_job(self: &Arc<Self>, id: &str, renderer: FrameRenderer) -> std::io::Result<()> {
        let frames_dir = self.job_dir(id).join("frames");
        std::fs::create_dir_all(&frames_dir)?;
        let Some(job) = self.job(id) else { return Ok(()) };
        persist_job(&self.job_dir(id), &job);
        let renderer = Arc::new(renderer);
        for index in 1..=job.progress.total {
            let state = Arc::clone(self);
            let renderer = Arc::clone(&renderer);
            let frames_dir = frames_dir.clone();
            let id = id.to_owned();
            self.pool
                .submit_batch(move || state.render_job_frame(&id, &renderer, &frames_dir, index));
        }
        Ok(())
    }

    fn render_job_frame(self: &Arc<Self>, id: &str, renderer: &FrameRenderer, frames_dir: &Path, index: usize) {
        let Some(job) = self.job(id) else { return };
        if job.state == JobState::Failed {
            return;
        }
        if job.state == JobState::Queued {
            self.update_job(id, |j| {
                if j.state == JobState::Queued {
                    j.state = JobState::Running;
                }
            });
        }
        let frames = &self.contexts[&job.spec.context_id].frames;
        let result = frames
            .load(index)
            .map_err(simulatar::Error::from)
            .and_then(|bg| Ok(renderer.render(&bg)?))
            .and_then(|out| out.save_png(&frames_dir.join(frame_file_name(index))));
        let mut finished = false;
        self.update_job(id, |j| {
            if j.state == JobState::Failed {
                return;
            }
            match result {
                Ok(()) => {
                    j.progress.done += 1;
                    if j.progress.done == j.progress.total {
                        finished = true;
                    }
                }
                Err(e) => {
                    j.state = JobState::Failed;
                    j.error = Some(format!("frame {index}: {e}"));
                }
            }
        });
        if finished {
            self.finish_job(id, frames_dir);
        }
    }

    fn finish_job(&self, id: &str, frames_dir: &Path) {
        let mut video_url = None;
        if let Some(transcoder) = &self.config.transcoder {
            let fps = self
                .job(id)
                .and_then(|j| self.contexts.get(&j.spec.context_id))
                .and_then(|c| self.registry.camera(&c.clip.camera).ok())
                .map_or(30.0, |c| c.fps);
            let out = self.job_dir(id).join("video.mp4");
            match simulatar::pipeline::assemble_video_with(Some(transcoder), frames_dir, fps, &out) {
                Ok(simulatar::pipeline::AssemblyOutcome::Container(_)) => {
                    video_url = Some(format!("/api/jobs/{id}/video"));
                }
                Ok(simulatar::pipeline::AssemblyOutcome::FramesOnly) => {}
                Err(e) => tracing::warn!("job {id}: video assembly failed: {e}"),
            }
        }
        self.update_job(id, |j| {
            j.state = JobState::Done;
            j.video_url = video_url;
        });
    }
}

/// Ids are generated by the service; anything else is rejected before it can
/// reach the filesystem.
pub fn valid_token(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

fn persist_job(dir: &Path, job: &JobRecord) {
    if let Err(e) = std::fs::create_dir_all(dir)
        .and_then(|()| std::fs::write(dir.join("job.json"), serde_json::to_vec_pretty(job).expect("job serializes")))
    {
        tracing::warn!("cannot persist job {}: {e}", job.id);
    }
}

fn restore_jobs(jobs_dir: &Path) -> BTreeMap<String, JobRecord> {
    let mut out = BTreeMap::new();
    let Ok(entries) = std::fs::read_dir(jobs_dir) else {
        return out;
    };
    for entry in entries.flatten() {
        let path = entry.path().join("job.json");
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        let Ok(mut job) = serde_json::from_str::<JobRecord>(&text) else {
            tracing::warn!("ignoring unreadable {}", path.display());
            continue;
        };
        if matches!(job.state, JobState::Queued | JobState::Running) {
            job.state = JobState::Failed;
            job.error = Some("interrupted by service restart".into());
            persist_job(&entry.path(), &job);
        }
        out.insert(job.id.clone(), job);
    }
    out
}
