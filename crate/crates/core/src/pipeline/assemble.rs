//! Optional muxing of rendered frames into a video container.
//!
//! Frame sequences are the canonical output. When `SIMULATAR_TRANSCODER`
//! names an executable, it is invoked as
//!
//! ```text
//! $SIMULATAR_TRANSCODER <frames_dir>/frame_%06d.png <fps> <out_path>
//! ```
//!
//! and must write `out_path`. A thin ffmpeg wrapper is enough:
//!
//! ```sh
//! #!/bin/sh
//! exec ffmpeg -y -loglevel error -framerate "$2" -i "$1" -pix_fmt yuv420p "$3"
//! ```

use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

pub const TRANSCODER_ENV: &str = "SIMULATAR_TRANSCODER";

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("no frames to assemble in {}", dir.display())]
    NoFrames { dir: PathBuf },
    #[error("fps {0} must be positive")]
    Fps(f64),
    #[error("cannot start transcoder {}: {source}", program.display())]
    Spawn {
        program: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("transcoder exited with {status}: {diagnostics}")]
    Failed { status: String, diagnostics: String },
    #[error("transcoder succeeded but {} is missing or empty", path.display())]
    NoOutput { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssemblyOutcome {
    /// A container file was written.
    Container(PathBuf),
    /// No transcoder is configured; the frame sequence is the result.
    FramesOnly,
}

/// Muxes `frames_dir` into `out_path` using the transcoder named by
/// [`TRANSCODER_ENV`], or reports [`AssemblyOutcome::FramesOnly`] when unset.
pub fn assemble_video(frames_dir: &Path, fps: f64, out_path: &Path) -> Result<AssemblyOutcome, AssemblyError> {
    let transcoder = std::env::var_os(TRANSCODER_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    assemble_video_with(transcoder.as_deref(), frames_dir, fps, out_path)
}

pub fn assemble_video_with(
    transcoder: Option<&Path>,
    frames_dir: &Path,
    fps: f64,
    out_path: &Path,
) -> Result<AssemblyOutcome, AssemblyError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(AssemblyError::Fps(fps));
    }
    if !frames_dir.join(super::frame_file_name(1)).is_file() {
        return Err(AssemblyError::NoFrames {
            dir: frames_dir.to_owned(),
        });
    }
    let Some(program) = transcoder else {
        return Ok(AssemblyOutcome::FramesOnly);
    };
    let output = Command::new(program)
        .arg(frames_dir.join("frame_%06d.png"))
        .arg(fps.to_string())
        .arg(out_path)
        .output()
        .map_err(|source| AssemblyError::Spawn {
            program: program.to_owned(),
            source,
        })?;
    if !output.status.success() {
        let mut diagnostics = String::from_utf8_lossy(&output.stderr).trim().to_owned();
        if diagnostics.is_empty() {
            diagnostics = String::from_utf8_lossy(&output.stdout).trim().to_owned();
        }
        return Err(AssemblyError::Failed {
            status: output.status.to_string(),
            diagnostics,
        });
    }
    match std::fs::metadata(out_path) {
        Ok(m) if m.len() > 0 => Ok(AssemblyOutcome::Container(out_path.to_owned())),
        _ => Err(AssemblyError::NoOutput {
            path: out_path.to_owned(),
        }),
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::pipeline::FrameBuffer;
    use std::os::unix::fs::PermissionsExt;

    fn script(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("transcode.sh");
        std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
        p
    }

    fn frames(dir: &Path, n: usize) {
        for i in 1..=n {
            FrameBuffer::filled(2, 2, [0, 0, 0])
                .save_png(&dir.join(super::super::frame_file_name(i)))
                .unwrap();
        }
    }

    #[test]
    fn configured_transcoder_writes_container() {
        let dir = tempfile::tempdir().unwrap();
        frames(dir.path(), 10);
        // Concatenate the frames, recording the arguments first.
        let t = script(dir.path(), r#"echo "$1 $2" > "$3"; cat "$(dirname "$1")"/frame_*.png >> "$3""#);
        let out = dir.path().join("clip.mp4");
        let r = assemble_video_with(Some(&t), dir.path(), 50.0, &out).unwrap();
        assert_eq!(r, AssemblyOutcome::Container(out.clone()));
        let head = std::fs::read(&out).unwrap();
        assert!(head.len() > 100);
        assert!(String::from_utf8_lossy(&head).contains("frame_%06d.png 50"));
    }

    #[test]
    fn unset_is_frames_only() {
        let dir = tempfile::tempdir().unwrap();
        frames(dir.path(), 1);
        let r = assemble_video_with(None, dir.path(), 50.0, &dir.path().join("x.mp4")).unwrap();
        assert_eq!(r, AssemblyOutcome::FramesOnly);
    }

    #[test]
    fn nonzero_exit_carries_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        frames(dir.path(), 1);
        let t = script(dir.path(), "echo 'codec exploded' >&2; exit 3");
        match assemble_video_with(Some(&t), dir.path(), 50.0, &dir.path().join("x.mp4")) {
            Err(AssemblyError::Failed { diagnostics, .. }) => assert_eq!(diagnostics, "codec exploded"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_frames_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            assemble_video_with(None, dir.path(), 50.0, &dir.path().join("x.mp4")),
            Err(AssemblyError::NoFrames { .. })
        ));
    }
}
