use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Multipart, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use simulatar::optics::{BlendMode, TintExtent};
use simulatar::pipeline::{frame_file_name, DesignAsset};
use simulatar::profiles::{LightingClass, Location, Mobility, Resolution};
use simulatar::ErrorCategory;

use crate::error::ApiError;
use crate::state::{now_secs, valid_token, AppState, JobRecord, JobSpec, JobState, Progress};

type Shared = State<Arc<AppState>>;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";
const THUMBNAIL_WIDTH: u32 = 320;

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

#[derive(Debug, Serialize)]
pub struct ContextSummary {
    pub id: String,
    pub location: Location,
    pub mobility: Mobility,
    pub lighting_lux: f64,
    pub lighting_class: LightingClass,
    pub camera: String,
    pub frame_count: usize,
    pub resolution: Resolution,
    pub thumbnail_url: String,
}

pub async fn list_contexts(State(state): Shared) -> Json<Vec<ContextSummary>> {
    Json(
        state
            .contexts
            .values()
            .map(|c| ContextSummary {
                id: c.clip.id.clone(),
                location: c.clip.location,
                mobility: c.clip.mobility,
                lighting_lux: c.clip.lighting_lux,
                lighting_class: c.clip.lighting_class(),
                camera: c.clip.camera.clone(),
                frame_count: c.frames.len(),
                resolution: c.frames.resolution(),
                thumbnail_url: format!("/api/contexts/{}/thumbnail.png", c.clip.id),
            })
            .collect(),
    )
}

pub async fn context_thumbnail(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let context = state
        .contexts
        .get(&id)
        .ok_or_else(|| ApiError::not_found("context", &id))?
        .clone();
    let bytes = tokio::task::spawn_blocking(move || {
        context
            .frames
            .load(1)
            .map(|f| f.thumbnail(THUMBNAIL_WIDTH).encode_png())
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(png(bytes))
}

pub async fn list_profiles(State(state): Shared) -> Json<Value> {
    Json(serde_json::to_value(&state.registry).expect("registry serializes"))
}

#[derive(Debug, Serialize)]
pub struct DesignCreated {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub has_mask: bool,
}

pub async fn upload_design(
    State(state): Shared,
    headers: HeaderMap,
    multipart: Result<Multipart, axum::extract::multipart::MultipartRejection>,
) -> Result<(StatusCode, Json<DesignCreated>), ApiError> {
    let too_large = || {
        ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("upload exceeds {} bytes", state.config.upload_limit),
        )
    };
    let declared = headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok());
    if declared.is_some_and(|n| n > state.config.upload_limit) {
        return Err(too_large());
    }
    let mut multipart = multipart.map_err(|e| ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, e.body_text()))?;

    let mut design: Option<Bytes> = None;
    let mut mask: Option<Bytes> = None;
    loop {
        let field = match multipart.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) if e.status() == StatusCode::PAYLOAD_TOO_LARGE => return Err(too_large()),
            Err(e) => return Err(ApiError::new(e.status(), e.body_text())),
        };
        let name = field.name().unwrap_or_default().to_owned();
        let data = field.bytes().await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                too_large()
            } else {
                ApiError::new(e.status(), e.body_text())
            }
        })?;
        match name.as_str() {
            "design" => design = Some(data),
            "mask" => mask = Some(data),
            _ => {}
        }
    }
    let design = design.ok_or_else(|| ApiError::unprocessable("missing multipart field \"design\""))?;
    for (label, bytes) in [("design", Some(&design)), ("mask", mask.as_ref())] {
        if let Some(bytes) = bytes {
            if !bytes.starts_with(PNG_SIGNATURE) {
                return Err(ApiError::new(
                    StatusCode::UNSUPPORTED_MEDIA_TYPE,
                    format!("{label} is not a PNG image"),
                ));
            }
        }
    }

    let id = uuid::Uuid::new_v4().to_string();
    let design_path = state.design_path(&id).expect("uuid is a valid token");
    let mask_path = state.mask_path(&id).expect("uuid is a valid token");
    let stored = tokio::task::spawn_blocking(move || -> Result<DesignAsset, ApiError> {
        let write = |path: &std::path::Path, bytes: &[u8]| {
            std::fs::write(path, bytes).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))
        };
        write(&design_path, &design)?;
        if let Some(mask) = &mask {
            write(&mask_path, mask)?;
        }
        DesignAsset::load(&id, &design_path, mask.is_some().then_some(mask_path.as_path())).map_err(|e| {
            let _ = std::fs::remove_file(&design_path);
            let _ = std::fs::remove_file(&mask_path);
            // Passes the signature check but does not decode (or the mask
            // does not match): still not an acceptable PNG upload.
            ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, e.to_string())
        })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    Ok((
        StatusCode::CREATED,
        Json(DesignCreated {
            id: stored.id().to_owned(),
            width: stored.width(),
            height: stored.height(),
            has_mask: stored.mask().is_some(),
        }),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRequest {
    pub context_id: String,
    pub profile_id: String,
    pub design_id: String,
    #[serde(default)]
    pub lux: Option<f64>,
    #[serde(default)]
    pub mode: BlendMode,
    #[serde(default)]
    pub tint_extent: TintExtent,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewRequest {
    pub context_id: String,
    /// 1-based, like the frame files.
    #[serde(default = "first_frame")]
    pub frame_index: usize,
    pub profile_id: String,
    pub design_id: String,
    #[serde(default)]
    pub lux: Option<f64>,
    #[serde(default)]
    pub mode: BlendMode,
    #[serde(default)]
    pub tint_extent: TintExtent,
}

fn first_frame() -> usize {
    1
}

fn json_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable(format!("invalid request body: {e}")))
}

/// Resolves ids (404) and lux (422) into a job spec.
fn resolve_spec(
    state: &AppState,
    context_id: String,
    profile_id: String,
    design_id: String,
    lux: Option<f64>,
    mode: BlendMode,
    tint_extent: TintExtent,
) -> Result<JobSpec, ApiError> {
    let context = state
        .contexts
        .get(&context_id)
        .ok_or_else(|| ApiError::not_found("context", &context_id))?;
    state
        .registry
        .hmd(&profile_id)
        .map_err(|_| ApiError::not_found("profile", &profile_id))?;
    if !state.design_exists(&design_id) {
        return Err(ApiError::not_found("design", &design_id));
    }
    let lux = lux.unwrap_or(context.clip.lighting_lux);
    if !(lux.is_finite() && lux > 0.0) {
        return Err(ApiError::unprocessable(format!("lux must be positive and finite, got {lux}")));
    }
    Ok(JobSpec {
        context_id,
        profile_id,
        design_id,
        lux,
        mode,
        tint_extent,
    })
}

fn render_error(e: simulatar::Error) -> ApiError {
    match e.category() {
        ErrorCategory::Io => ApiError::internal(e.to_string()),
        _ => ApiError::unprocessable(e.to_string()),
    }
}

pub async fn create_job(State(state): Shared, body: Bytes) -> Result<(StatusCode, Json<JobRecord>), ApiError> {
    let req: JobRequest = json_body(&body)?;
    let spec = resolve_spec(
        &state,
        req.context_id,
        req.profile_id,
        req.design_id,
        req.lux,
        req.mode,
        req.tint_extent,
    )?;
    let total = state.contexts[&spec.context_id].frames.len();
    let renderer = {
        let state = Arc::clone(&state);
        let spec = spec.clone();
        tokio::task::spawn_blocking(move || state.renderer(&spec))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(render_error)?
    };
    let record = JobRecord {
        id: uuid::Uuid::new_v4().to_string(),
        spec,
        state: JobState::Queued,
        progress: Progress { done: 0, total },
        error: None,
        created_at: now_secs(),
        video_url: None,
    };
    state
        .jobs
        .lock()
        .unwrap()
        .insert(record.id.clone(), record.clone());
    state
        .start_job(&record.id, renderer)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((StatusCode::ACCEPTED, Json(record)))
}

pub async fn list_jobs(State(state): Shared) -> Json<Vec<JobRecord>> {
    Json(state.jobs.lock().unwrap().values().cloned().collect())
}

pub async fn get_job(State(state): Shared, Path(id): Path<String>) -> Result<Json<JobRecord>, ApiError> {
    state
        .job(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found("job", &id))
}

pub async fn job_frame(State(state): Shared, Path((id, file)): Path<(String, String)>) -> Result<Response, ApiError> {
    let job = state.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let index = file
        .strip_suffix(".png")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|n| (1..=job.progress.total).contains(n))
        .ok_or_else(|| ApiError::not_found("frame", &file))?;
    let path = state.job_dir(&id).join("frames").join(frame_file_name(index));
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(png(bytes)),
        Err(_) => Err(ApiError::not_found("frame", &file)),
    }
}

pub async fn job_video(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let job = state.job(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    if job.video_url.is_none() || !valid_token(&id) {
        return Err(ApiError::not_found("video for job", &id));
    }
    let bytes = tokio::fs::read(state.job_dir(&id).join("video.mp4"))
        .await
        .map_err(|_| ApiError::not_found("video for job", &id))?;
    Ok(([(header::CONTENT_TYPE, "video/mp4")], bytes).into_response())
}

pub async fn preview(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: PreviewRequest = json_body(&body)?;
    let frame_index = req.frame_index;
    let spec = resolve_spec(
        &state,
        req.context_id,
        req.profile_id,
        req.design_id,
        req.lux,
        req.mode,
        req.tint_extent,
    )?;
    let frames = &state.contexts[&spec.context_id].frames;
    if !(1..=frames.len()).contains(&frame_index) {
        return Err(ApiError::not_found("frame", frame_index));
    }
    let (tx, rx) = tokio::sync::oneshot::channel();
    let worker_state = Arc::clone(&state);
    state.pool.submit_preview(move || {
        let result = (|| {
            let renderer = worker_state.renderer(&spec)?;
            let bg = worker_state.contexts[&spec.context_id].frames.load(frame_index)?;
            Ok::<_, simulatar::Error>(renderer.render(&bg)?.encode_png())
        })();
        let _ = tx.send(result);
    });
    let bytes = rx
        .await
        .map_err(|_| ApiError::internal("preview worker crashed"))?
        .map_err(render_error)?;
    Ok(png(bytes))
}

pub async fn schema() -> Json<Value> {
    Json(json!({
        "endpoints": [
            {"method": "GET", "path": "/api/contexts", "response": "ContextSummary[]"},
            {"method": "GET", "path": "/api/contexts/{id}/thumbnail.png", "response": "image/png"},
            {"method": "GET", "path": "/api/profiles", "response": "ProfileRegistry"},
            {"method": "POST", "path": "/api/designs", "request": "multipart/form-data: design (PNG), mask (PNG, optional)",
             "response": "DesignCreated", "errors": {"413": "upload over the size cap", "415": "not a PNG"}},
            {"method": "POST", "path": "/api/jobs", "request": "JobRequest", "response": "JobRecord",
             "errors": {"404": "unknown context, profile or design", "422": "invalid lux or geometry"}},
            {"method": "GET", "path": "/api/jobs", "response": "JobRecord[]"},
            {"method": "GET", "path": "/api/jobs/{id}", "response": "JobRecord"},
            {"method": "GET", "path": "/api/jobs/{id}/frames/{n}.png", "response": "image/png"},
            {"method": "GET", "path": "/api/jobs/{id}/video", "response": "video/mp4"},
            {"method": "POST", "path": "/api/preview", "request": "PreviewRequest", "response": "image/png",
             "errors": {"404": "unknown id or frame_index outside the clip", "422": "invalid lux or geometry"}},
            {"method": "GET", "path": "/api/schema", "response": "this document"}
        ],
        "types": {
            "Error": {"error": "string"},
            "ContextSummary": {
                "id": "string", "location": ["indoor", "outdoor", "transport"], "mobility": ["sitting", "walking"],
                "lighting_lux": "number", "lighting_class": ["low", "high"], "camera": "string",
                "frame_count": "integer", "resolution": "[width, height]", "thumbnail_url": "string"
            },
            "DesignCreated": {"id": "string", "width": "integer", "height": "integer", "has_mask": "boolean"},
            "JobRequest": {
                "context_id": "string", "profile_id": "string", "design_id": "string",
                "lux": "number, optional (defaults to the clip's lighting)",
                "mode": ["additive", "alpha-over"], "tint_extent": ["full_frame", "overlay_rect_only"]
            },
            "PreviewRequest": {
                "context_id": "string", "frame_index": "integer, 1-based", "profile_id": "string",
                "design_id": "string", "lux": "number, optional", "mode": ["additive", "alpha-over"],
                "tint_extent": ["full_frame", "overlay_rect_only"]
            },
            "JobRecord": {
                "id": "string", "spec": "JobRequest with lux resolved",
                "state": ["queued", "running", "done", "failed"],
                "progress": {"done": "integer", "total": "integer"},
                "error": "string, optional", "created_at": "integer, seconds since the Unix epoch",
                "video_url": "string, optional (set when a transcoder is configured)"
            }
        }
    }))
}
