#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use simulatar::pipeline::{frame_file_name, FrameBuffer};
use simulatar_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

pub const FRAME_W: u32 = 96;
pub const FRAME_H: u32 = 54;
pub const FRAMES: usize = 10;

pub const PROFILE_OVERRIDES: &str = r#"{
  "camera_profiles": {
    "fixture-cam": { "frame_resolution": [96, 54], "diagonal_fov_deg": 95.0, "fps": 10 }
  },
  "hmd_profiles": {
    "nreal-light": { "transmittance": 0.3 }
  }
}"#;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: ServiceConfig,
}

impl Fixture {
    /// Two 10-frame clips, `hallway` (indoor, 250 lux) and `street`
    /// (outdoor, 10000 lux), shot with a small camera profile.
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let assets = dir.path().join("assets");
        write_clip(&assets, "street", "outdoor", "walking", 10000.0, 40);
        write_clip(&assets, "hallway", "indoor", "sitting", 250.0, 0);
        let profiles = dir.path().join("profiles.json");
        std::fs::write(&profiles, PROFILE_OVERRIDES).unwrap();
        let mut config = ServiceConfig::new(&assets, dir.path().join("data"));
        config.profiles_config = Some(profiles);
        config.workers = 4;
        Self { dir, config }
    }

    pub fn app(&self) -> (Router, Arc<AppState>) {
        let state = Arc::new(AppState::open(self.config.clone()).unwrap());
        (router(Arc::clone(&state)), state)
    }
}

fn write_clip(assets: &Path, id: &str, location: &str, mobility: &str, lux: f64, shift: u32) {
    let dir = assets.join("contexts").join(id);
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).unwrap();
    std::fs::write(
        dir.join("meta.json"),
        format!(
            r#"{{"location": "{location}", "mobility": "{mobility}", "lighting_lux": {lux}, "camera": "fixture-cam"}}"#
        ),
    )
    .unwrap();
    for i in 1..=FRAMES {
        let mut data = Vec::with_capacity((FRAME_W * FRAME_H * 3) as usize);
        for y in 0..FRAME_H {
            for x in 0..FRAME_W {
                let v = (x * 2 + y + i as u32 * 7 + shift) % 256;
                data.extend_from_slice(&[v as u8, (255 - v) as u8, ((x * y) % 256) as u8]);
            }
        }
        FrameBuffer::from_rgb(FRAME_W, FRAME_H, data)
            .unwrap()
            .save_png(&frames.join(frame_file_name(i)))
            .unwrap();
    }
}

/// A 1440x936 design: opaque white panel with a translucent blue band.
pub fn design_png() -> Vec<u8> {
    let img = image::RgbaImage::from_fn(1440, 936, |x, y| {
        if y < 300 {
            image::Rgba([30, 60, 220, 160])
        } else if (200..1240).contains(&x) && (400..800).contains(&y) {
            image::Rgba([255, 255, 255, 255])
        } else {
            image::Rgba([0, 0, 0, 0])
        }
    });
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub const BOUNDARY: &str = "simulatar-test-boundary";

pub fn multipart_body(fields: &[(&str, &str, &str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, filename, content_type, data) in fields {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{filename}\"\r\n\
                 Content-Type: {content_type}\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn upload_request(body: Vec<u8>) -> Request<Body> {
    Request::post("/api/designs")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .header(header::CONTENT_LENGTH, body.len())
        .body(Body::from(body))
        .unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let content_type = res
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_owned());
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        body,
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> Reply {
    send(
        app,
        Request::post(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body.to_string()))
            .unwrap(),
    )
    .await
}

pub async fn upload_design(app: &Router) -> String {
    let png = design_png();
    let reply = send(app, upload_request(multipart_body(&[("design", "d.png", "image/png", &png)]))).await;
    assert_eq!(reply.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&reply.body));
    reply.json()["id"].as_str().unwrap().to_owned()
}

/// Polls a job until it leaves the queued/running states.
pub async fn wait_for_job(app: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let job = get(app, &format!("/api/jobs/{id}")).await.json();
        if matches!(job["state"].as_str(), Some("done" | "failed")) {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("job {id} did not finish");
}

pub fn job_frames_dir(data_dir: &Path, id: &str) -> PathBuf {
    data_dir.join("jobs").join(id).join("frames")
}
