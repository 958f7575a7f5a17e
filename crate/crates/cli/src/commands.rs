use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use wirewatch_core::geometry::{backproject, rasterize_obstacles, voxel_downsample, GridMetadata, GridSpec, VoxelSpec};
use wirewatch_core::io::{pgm, ply, sorted_files, stream::FrameReader};
use wirewatch_core::metrics::batch_eval;
use wirewatch_core::nn::check::{self, CaseKind, CheckConfig};
use wirewatch_core::synth::{self, DepthConfig, SynthConfig, SynthSequence};
use wirewatch_core::{BinaryMask, PipelineConfig, PointCloudF64, SlidingWindowDenoiser};

use crate::args::{CloudArgs, Command, ConvcheckArgs, EvalArgs, GridArgs, PostprocessArgs, SynthArgs};
use crate::config::{read_json, resolve_pipeline, write_json, CameraFile};
use crate::error::{CliError, CliResult};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Postprocess(a) => postprocess(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Cloud(a) => cloud(a),
        Command::Grid(a) => grid(a),
        Command::Convcheck(a) => convcheck(a),
        Command::Run(a) => crate::run::run(a),
    }
}

pub fn frame_name(index: usize) -> String {
    format!("{index:05}.pgm")
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::at(dir, e.into()))
}

/// Named masks of a directory in file-name order.
pub fn mask_dir(dir: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    let files = sorted_files(dir, "pgm").map_err(|e| CliError::at(dir, e))?;
    Ok(files
        .into_iter()
        .map(|p| (p.file_name().unwrap_or_default().to_string_lossy().into_owned(), p))
        .collect())
}

pub struct Denoised {
    pub frames: usize,
    pub last_output: Option<BinaryMask>,
}

/// Runs the denoiser over `frames`, writing each output mask under `out`
/// with the frame's name and one log line per frame.
pub fn denoise_stream(
    config: PipelineConfig,
    frames: impl Iterator<Item = CliResult<(String, BinaryMask)>>,
    out: &Path,
    log: &mut impl Write,
) -> CliResult<Denoised> {
    let mut denoiser = SlidingWindowDenoiser::new(config)?;
    let mut last_output = None;
    for frame in frames {
        let (name, mask) = frame?;
        let result = denoiser.process_frame(&mask)?;
        let line = serde_json::to_string(&result.log()).map_err(|e| CliError::validation(e.to_string()))?;
        writeln!(log, "{line}")?;
        let path = out.join(&name);
        pgm::write_mask(&path, &result.output).map_err(|e| CliError::at(&path, e))?;
        last_output = Some(result.output);
    }
    log.flush()?;
    Ok(Denoised {
        frames: denoiser.frames_seen(),
        last_output,
    })
}

fn postprocess(a: PostprocessArgs) -> CliResult<()> {
    let config = resolve_pipeline(a.config.as_deref(), &a.pipeline)?;
    create_dir(&a.out)?;
    let log_path = a.log.clone().unwrap_or_else(|| a.out.join("log.jsonl"));
    let log_file = fs::File::create(&log_path).map_err(|e| CliError::at(&log_path, e.into()))?;
    let mut log = BufWriter::new(log_file);
    let done = match &a.input {
        Some(dir) => {
            let files = mask_dir(dir)?;
            let frames = files
                .into_iter()
                .map(|(name, p)| pgm::read_mask(&p).map(|m| (name, m)).map_err(|e| CliError::at(&p, e)));
            denoise_stream(config, frames, &a.out, &mut log)?
        }
        None => {
            let stdin = io::stdin().lock();
            let frames = FrameReader::new(stdin)
                .enumerate()
                .map(|(i, m)| Ok((frame_name(i), m?)));
            denoise_stream(config, frames, &a.out, &mut log)?
        }
    };
    println!(
        "denoised {} frames (window {}, threshold {}, min area {}, kernel {}) -> {}",
        done.frames,
        config.window,
        config.dist_threshold,
        config.min_area,
        config.kernel,
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let report = batch_eval(&a.pred, &a.gt, a.allow_missing)?;
    if report.image_count == 0 {
        return Err(CliError::validation("no mask pairs to score"));
    }
    print!("{}", report.to_table(&a.label));
    if !report.missing.is_empty() {
        eprintln!("skipped {} unpaired files", report.missing.len());
    }
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    Ok(())
}

/// Writes `masks/`, `gt/` and (when present) `depth/` under `dir` and
/// returns every file written, in a fixed order.
pub fn write_sequence(dir: &Path, seq: &SynthSequence) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |sub: &str, name: String, bytes: Vec<u8>| -> CliResult<()> {
        let path = dir.join(sub).join(name);
        fs::write(&path, bytes).map_err(|e| CliError::at(&path, e.into()))?;
        written.push(path);
        Ok(())
    };
    for sub in ["masks", "gt"] {
        create_dir(&dir.join(sub))?;
    }
    for (i, m) in seq.masks.iter().enumerate() {
        put("masks", frame_name(i), pgm::encode_mask(m))?;
    }
    for (i, m) in seq.ground_truth.iter().enumerate() {
        put("gt", frame_name(i), pgm::encode_mask(m))?;
    }
    if let Some(depth) = &seq.depth {
        create_dir(&dir.join("depth"))?;
        for (i, d) in depth.iter().enumerate() {
            put("depth", frame_name(i), pgm::encode16(d.width(), d.height(), d.data()))?;
        }
    }
    Ok(written)
}

pub fn camera_for(depth: &DepthConfig) -> CameraFile {
    CameraFile {
        intrinsics: depth.intrinsics,
        extrinsics: depth.extrinsics(),
    }
}

fn synth_cmd(a: SynthArgs) -> CliResult<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.frames {
        cfg.frames = v;
    }
    if let Some(v) = a.flicker {
        cfg.noise.flicker = v;
    }
    if let Some(v) = a.noise_count {
        cfg.noise.count = v;
    }
    if a.depth && cfg.depth.is_none() {
        cfg.depth = Some(DepthConfig::default());
    }
    let seq = synth::generate(&cfg)?;
    create_dir(&a.out)?;
    write_sequence(&a.out, &seq)?;
    write_json(&a.out.join("synth.json"), &cfg)?;
    if let Some(d) = &cfg.depth {
        write_json(&a.out.join("camera.json"), &camera_for(d))?;
    }
    println!(
        "wrote {} frames ({}x{}, {} noise regions, flicker {}) -> {}",
        cfg.frames,
        cfg.width,
        cfg.height,
        cfg.noise.count,
        cfg.noise.flicker,
        a.out.display()
    );
    Ok(())
}

pub fn voxel_spec(leaf: Option<f64>) -> CliResult<Option<VoxelSpec<f64>>> {
    leaf.map(VoxelSpec::new).transpose().map_err(CliError::from)
}

pub fn make_cloud(
    mask: &BinaryMask,
    depth: &wirewatch_core::geometry::DepthFrame,
    camera: &CameraFile,
    voxel: Option<VoxelSpec<f64>>,
) -> CliResult<PointCloudF64> {
    let cloud = backproject(depth, &camera.intrinsics, mask)?;
    Ok(match voxel {
        Some(v) => voxel_downsample(&cloud, v),
        None => cloud,
    })
}

fn cloud(a: CloudArgs) -> CliResult<()> {
    let camera: CameraFile = read_json(&a.camera)?;
    camera.intrinsics.validate()?;
    let voxel = voxel_spec(a.voxel)?;
    let mask = pgm::read_mask(&a.mask).map_err(|e| CliError::at(&a.mask, e))?;
    let depth = pgm::read_depth(&a.depth).map_err(|e| CliError::at(&a.depth, e))?;
    let cloud = make_cloud(&mask, &depth, &camera, voxel)?;
    ply::write(&a.out, &cloud).map_err(|e| CliError::at(&a.out, e))?;
    println!("{} points -> {}", cloud.len(), a.out.display());
    Ok(())
}

/// Rasterizes `cloud` and writes the PGM plus its sidecar; returns the
/// number of occupied cells.
pub fn write_grid(cloud: &PointCloudF64, camera: &CameraFile, spec: &GridSpec<f64>, out: &Path) -> CliResult<usize> {
    let r = rasterize_obstacles(cloud, spec, &camera.extrinsics)?;
    fs::write(out, r.grid.to_pgm_bytes()).map_err(|e| CliError::at(out, e.into()))?;
    let image = out.file_name().unwrap_or_default().to_string_lossy().into_owned();
    write_json(&out.with_extension("json"), &GridMetadata::new(image, spec))?;
    Ok(r.grid.occupied_cells().len())
}

fn grid(a: GridArgs) -> CliResult<()> {
    let camera: CameraFile = read_json(&a.camera)?;
    camera.extrinsics.validate()?;
    let mut spec: GridSpec<f64> = match &a.grid_config {
        Some(p) => read_json(p)?,
        None => GridSpec::default(),
    };
    if let Some(r) = a.resolution {
        spec.resolution = r;
    }
    spec.validate()?;
    let cloud: PointCloudF64 = ply::read(&a.cloud).map_err(|e| CliError::at(&a.cloud, e))?;
    let occupied = write_grid(&cloud, &camera, &spec, &a.out)?;
    println!(
        "{} of {} cells occupied ({} points) -> {}",
        occupied,
        spec.width * spec.height,
        cloud.len(),
        a.out.display()
    );
    Ok(())
}

fn convcheck(a: ConvcheckArgs) -> CliResult<()> {
    if !(a.tolerance >= 0.0) {
        return Err(CliError::validation("tolerance must be non-negative"));
    }
    let report = check::run(CheckConfig {
        cases: a.cases,
        seed: a.seed,
        tolerance: a.tolerance,
    })?;
    for (kind, label) in [(CaseKind::Strip, "strip"), (CaseKind::Asconv, "asconv"), (CaseKind::Ascspp, "ascspp")] {
        let n = report.cases.iter().filter(|c| c.kind == kind).count();
        println!("{label:<7} cases {n:>4}  max |fast - reference| {:.3e}", report.max_for(kind));
    }
    let bad_support = report.support.iter().filter(|s| !s.ok()).count();
    println!(
        "impulse support checks {}, mismatches {}",
        report.support.len(),
        bad_support
    );
    println!("overall max deviation {:.3e} (tolerance {:.1e})", report.max_deviation, a.tolerance);
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    if !report.passed() {
        return Err(CliError::check_failed("equivalence check failed"));
    }
    println!("PASS");
    Ok(())
}
