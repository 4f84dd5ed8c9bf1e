use std::collections::BTreeMap;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use simulatar::geometry::{camera_fov, hmd_fov, overlay_rect, viewing_distance};
use simulatar::optics::{BlendMode, TintExtent};
use simulatar::pipeline::{
    assemble_video, run_manifest, AssemblyOutcome, BlendJob, BlendManifest, DesignSource, JobReport, Sidecar,
    SIDECAR_FILE,
};
use simulatar::profiles::{load_profiles, ContextClip, Location, Mobility, ProfileRegistry, GOPRO_HERO10_LINEAR};
use simulatar::stats::{build_grid, read_ratings, DEFAULT_ALPHA, DEFAULT_BOUND};
use simulatar::{Error, ErrorCategory};

/// Exit status for command-line usage errors (BSD `EX_USAGE`).
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "simulatar", version, about = "Simulate optical see-through headset output on first-person video")]
struct Cli {
    /// Profile override file (JSON) merged over the built-in profiles.
    #[arg(long, global = true, env = "SIMULATAR_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blend a design into one frame sequence.
    Blend(BlendArgs),
    /// Run every job of a blend manifest.
    Batch(BatchArgs),
    /// Print the camera and headset fields of view and the overlay rectangle.
    Geometry(GeometryArgs),
    /// Print the viewing distance that reproduces the camera's field of view on a monitor.
    Distance(DistanceArgs),
    /// Run paired equivalence tests on a ratings CSV.
    Tost(TostArgs),
    /// Start the local HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Additive,
    AlphaOver,
}

impl From<ModeArg> for BlendMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Additive => BlendMode::Additive,
            ModeArg::AlphaOver => BlendMode::AlphaOver,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TintArg {
    /// Tint the whole frame (the headset lens covers the camera view).
    Full,
    /// Tint only the overlay rectangle.
    Rect,
}

impl From<TintArg> for TintExtent {
    fn from(t: TintArg) -> Self {
        match t {
            TintArg::Full => TintExtent::FullFrame,
            TintArg::Rect => TintExtent::OverlayRectOnly,
        }
    }
}

#[derive(Debug, Args)]
struct BlendArgs {
    /// Directory of frame_NNNNNN.png background frames.
    #[arg(long, value_name = "DIR")]
    frames: PathBuf,
    /// Design PNG (RGBA).
    #[arg(long, value_name = "PNG")]
    design: PathBuf,
    /// Optional mask PNG marking solid-background regions.
    #[arg(long, value_name = "PNG")]
    mask: Option<PathBuf>,
    /// Headset profile id.
    #[arg(long, value_name = "ID")]
    profile: String,
    /// Camera profile id.
    #[arg(long, value_name = "ID", default_value = GOPRO_HERO10_LINEAR)]
    camera: String,
    /// Ambient illuminance in lux.
    #[arg(long, value_name = "N", allow_negative_numbers = true)]
    lux: f64,
    #[arg(long, value_enum, default_value = "additive")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "full")]
    tint: TintArg,
    /// Output directory for the blended frames.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// Blend manifest (JSON).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Worker threads shared by all jobs.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct GeometryArgs {
    #[arg(long, value_name = "ID", default_value = GOPRO_HERO10_LINEAR)]
    camera: String,
    /// Headset profile id.
    #[arg(long, value_name = "ID")]
    profile: String,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    /// Visible width of the monitor in centimetres.
    #[arg(long, value_name = "W", allow_negative_numbers = true)]
    monitor_width_cm: f64,
    #[arg(long, value_name = "ID", default_value = GOPRO_HERO10_LINEAR)]
    camera: String,
}

#[derive(Debug, Args)]
struct TostArgs {
    /// Ratings CSV: participant,context,variant,method,dimension,rating.
    #[arg(long, value_name = "FILE")]
    csv: PathBuf,
    /// Equivalence bound in rating points.
    #[arg(long, default_value_t = DEFAULT_BOUND, allow_negative_numbers = true)]
    bound: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA, allow_negative_numbers = true)]
    alpha: f64,
    /// Print one colored cell per (context, dimension) instead of per-variant results.
    #[arg(long)]
    grid: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = simulatar_service::DEFAULT_PORT)]
    port: u16,
    /// Address to listen on. Use 0.0.0.0 to expose the service on the LAN.
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    /// Asset library containing contexts/<id>/{meta.json, frames/}.
    #[arg(long, value_name = "DIR", default_value = "assets")]
    assets: PathBuf,
    /// Where uploads and job outputs are kept.
    #[arg(long, value_name = "DIR", default_value = "simulatar-data")]
    data: PathBuf,
    /// Built web UI to serve at /.
    #[arg(long, value_name = "DIR")]
    web_root: Option<PathBuf>,
    /// Render worker threads.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Upload size cap in MiB.
    #[arg(long, value_name = "MIB", default_value_t = 10)]
    upload_limit_mb: usize,
}

/// A failure reported as one JSON line on stderr.
struct Failure {
    category: &'static str,
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let category = e.category();
        Self {
            category: category.as_str(),
            code: category.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<simulatar::profiles::ProfileError> for Failure {
    fn from(e: simulatar::profiles::ProfileError) -> Self {
        Error::from(e).into()
    }
}

fn emit(record: &Value) {
    let mut out = std::io::stdout().lock();
    // A closed pipe is not worth a panic.
    let _ = writeln!(out, "{record}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return report(Failure {
                category: "usage",
                code: EXIT_USAGE,
                message: e.to_string().trim_end().to_owned(),
            })
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!(
        "{}",
        json!({"error": f.category, "exit_code": f.code, "message": f.message})
    );
    ExitCode::from(f.code)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Blend(args) => blend(args, &load_profiles(config)?),
        Command::Batch(args) => batch(args, &load_profiles(config)?),
        Command::Geometry(args) => geometry(args, &load_profiles(config)?),
        Command::Distance(args) => distance(args, &load_profiles(config)?),
        Command::Tost(args) => tost(args),
        Command::Serve(args) => serve(args, cli.config),
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn blend(args: BlendArgs, registry: &ProfileRegistry) -> Result<(), Failure> {
    const CONTEXT: &str = "frames";
    let design_id = args
        .design
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("design")
        .to_owned();
    // The clip's recorded lighting is irrelevant here: the job carries the
    // lux, and an invalid value is reported by the renderer as a domain error.
    let clip = ContextClip {
        id: CONTEXT.into(),
        frames_path: args.frames,
        location: Location::Indoor,
        mobility: Mobility::Sitting,
        lighting_lux: if args.lux.is_finite() && args.lux > 0.0 { args.lux } else { 1.0 },
        lighting_class: None,
        camera: args.camera,
    };
    let manifest = BlendManifest {
        contexts: BTreeMap::from([(CONTEXT.to_owned(), clip)]),
        designs: BTreeMap::from([(
            design_id.clone(),
            DesignSource {
                path: args.design,
                mask: args.mask,
            },
        )]),
        jobs: vec![BlendJob {
            context_id: CONTEXT.into(),
            hmd_profile_id: args.profile,
            design_id,
            lux: Some(args.lux),
            mode: args.mode.into(),
            tint_extent: args.tint.into(),
            output: args.out,
        }],
    };
    let report = run_manifest(&manifest, registry, args.jobs.unwrap_or_else(default_jobs))?;
    finish_jobs(report.jobs)
}

fn batch(args: BatchArgs, registry: &ProfileRegistry) -> Result<(), Failure> {
    let manifest = BlendManifest::load(&args.manifest).map_err(Error::from)?;
    let report = run_manifest(&manifest, registry, args.jobs.unwrap_or_else(default_jobs))?;
    let summary = json!({
        "summary": {
            "succeeded": report.succeeded,
            "failed": report.failed,
            "parallelism": report.parallelism,
            "peak_resident_frames": report.peak_resident_frames,
        }
    });
    let result = finish_jobs(report.jobs);
    emit(&summary);
    result
}

/// Assembles videos for successful jobs, prints one record per job and
/// returns the first failure.
fn finish_jobs(jobs: Vec<JobReport>) -> Result<(), Failure> {
    let mut first_failure = None;
    for mut job in jobs {
        let mut record = serde_json::to_value(&job).expect("report serializes");
        if job.success {
            match assemble(&job.output) {
                Ok(video) => record["video"] = video,
                Err(e) => {
                    job.success = false;
                    record["success"] = json!(false);
                    record["error"] = json!(e.to_string());
                    record["error_category"] = json!(e.category().as_str());
                    job.error = Some(e.to_string());
                    job.error_category = Some(e.category().as_str().to_owned());
                }
            }
        }
        if !job.success && first_failure.is_none() {
            first_failure = Some(job_failure(&job));
        }
        emit(&record);
    }
    first_failure.map_or(Ok(()), Err)
}

fn job_failure(job: &JobReport) -> Failure {
    let category = match job.error_category.as_deref() {
        Some("config") => ErrorCategory::Config,
        Some("ingestion") => ErrorCategory::Ingestion,
        Some("geometry") => ErrorCategory::Geometry,
        _ => ErrorCategory::Io,
    };
    Failure {
        category: category.as_str(),
        code: category.exit_code() as u8,
        message: format!("job {}: {}", job.job, job.error.as_deref().unwrap_or("failed")),
    }
}

/// Muxes the job's frames when a transcoder is configured. Returns the
/// container path, or `"frames-only"`.
fn assemble(output: &Path) -> Result<Value, Error> {
    let sidecar_path = output.join(SIDECAR_FILE);
    let sidecar: Sidecar = std::fs::read(&sidecar_path)
        .map_err(|e| Error::io(&sidecar_path, e))
        .map(|bytes| serde_json::from_slice(&bytes).expect("sidecar written by this tool"))?;
    Ok(match assemble_video(output, sidecar.fps, &output.join("video.mp4"))? {
        AssemblyOutcome::Container(path) => json!(path),
        AssemblyOutcome::FramesOnly => json!("frames-only"),
    })
}

fn geometry(args: GeometryArgs, registry: &ProfileRegistry) -> Result<(), Failure> {
    let camera = registry.camera(&args.camera)?;
    let hmd = registry.hmd(&args.profile)?;
    let camera_fov = camera_fov(camera).map_err(Error::from)?;
    let hmd_fov = hmd_fov(hmd).map_err(Error::from)?;
    let rect = overlay_rect(camera, hmd).map_err(Error::from)?;
    emit(&json!({
        "camera": camera.id,
        "profile": hmd.id,
        "frame": camera.frame_resolution,
        "camera_fov": camera_fov,
        "hmd_fov": hmd_fov,
        "rect": rect,
    }));
    Ok(())
}

fn distance(args: DistanceArgs, registry: &ProfileRegistry) -> Result<(), Failure> {
    let camera = registry.camera(&args.camera)?;
    let fov = camera_fov(camera).map_err(Error::from)?;
    let d = viewing_distance(args.monitor_width_cm, fov.h_fov_deg).map_err(Error::from)?;
    emit(&json!({
        "camera": camera.id,
        "monitor_width_cm": args.monitor_width_cm,
        "h_fov_deg": fov.h_fov_deg,
        "viewing_distance_cm": d,
    }));
    Ok(())
}

fn tost(args: TostArgs) -> Result<(), Failure> {
    let records = read_ratings(&args.csv).map_err(Error::from)?;
    let grid = build_grid(&records, args.bound, args.alpha).map_err(Error::from)?;
    for cell in &grid.cells {
        if args.grid {
            emit(&serde_json::to_value(cell).expect("cell serializes"));
            continue;
        }
        for (variant, result) in [("A", &cell.variant_a), ("B", &cell.variant_b)] {
            if let Some(result) = result {
                let mut record = json!({"context": cell.context, "dimension": cell.dimension, "variant": variant});
                let Value::Object(fields) = serde_json::to_value(result).expect("result serializes") else {
                    unreachable!()
                };
                record.as_object_mut().unwrap().extend(fields);
                emit(&record);
            }
        }
    }
    for ind in &grid.indeterminate {
        emit(&json!({"indeterminate": ind}));
    }
    for rec in &grid.unpaired {
        emit(&json!({"unpaired": rec}));
    }
    if grid.warning_count() > 0 {
        eprintln!(
            "{}",
            json!({"warning": "excluded records", "count": grid.warning_count()})
        );
    }
    Ok(())
}

fn serve(args: ServeArgs, profiles_config: Option<PathBuf>) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let mut config = simulatar_service::ServiceConfig::new(args.assets, args.data);
    config.profiles_config = profiles_config;
    config.upload_limit = args.upload_limit_mb.saturating_mul(1024 * 1024);
    config.web_root = args.web_root;
    config.transcoder = std::env::var_os(simulatar::pipeline::TRANSCODER_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    if let Some(n) = args.workers {
        config.workers = n;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure {
            category: ErrorCategory::Io.as_str(),
            code: ErrorCategory::Io.exit_code() as u8,
            message: e.to_string(),
        })?;
    runtime
        .block_on(simulatar_service::serve(config, SocketAddr::new(args.bind, args.port)))
        .map_err(|e| {
            let category = match e {
                simulatar_service::StartupError::Profiles(_) => ErrorCategory::Config,
                _ => ErrorCategory::Io,
            };
            Failure {
                category: category.as_str(),
                code: category.exit_code() as u8,
                message: e.to_string(),
            }
        })
}
