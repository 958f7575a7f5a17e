//! End-to-end run: denoise a sequence, score it, back-project the final
//! frame and rasterize the costmap. Every run writes `manifest.json` with the
//! resolved config and SHA-256 of each input and output, and `--manifest`
//! re-executes that config and verifies the outputs match bitwise.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wirewatch_core::geometry::GridSpec;
use wirewatch_core::io::{pgm, ply};
use wirewatch_core::metrics::{batch_eval, MetricsReport};
use wirewatch_core::synth::{self, DepthConfig, SynthConfig};
use wirewatch_core::{PipelineConfig, PointCloudF64};

use crate::args::RunArgs;
use crate::commands::{camera_for, create_dir, denoise_stream, make_cloud, mask_dir, voxel_spec, write_grid, write_sequence};
use crate::config::{read_json, write_json, CameraFile};
use crate::error::{CliError, CliResult};

pub const MANIFEST_SCHEMA: &str = "wirewatch-run";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunInput {
    /// Generate the sequence; inputs are written under `<out>/input/`.
    Synth { config: SynthConfig },
    /// Existing mask and depth directories, paired by sorted file name.
    Files {
        masks: PathBuf,
        depth: PathBuf,
        #[serde(default)]
        ground_truth: Option<PathBuf>,
    },
}

fn default_leaf() -> Option<f64> {
    Some(0.01)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: RunInput,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    /// Required for file input; synthetic input defaults to the generator's camera.
    #[serde(default)]
    pub camera: Option<CameraFile>,
    /// Voxel leaf in meters, or `null` to skip downsampling.
    #[serde(default = "default_leaf")]
    pub voxel_leaf: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec<f64>,
}

impl RunConfig {
    /// Fills defaults that depend on the input and checks cross-field rules.
    pub fn resolve(mut self) -> CliResult<Self> {
        self.pipeline.validate()?;
        self.grid.validate()?;
        voxel_spec(self.voxel_leaf)?;
        match &mut self.input {
            RunInput::Synth { config } => {
                let depth = *config.depth.get_or_insert_with(DepthConfig::default);
                config.validate()?;
                config.check_drift(self.pipeline.dist_threshold)?;
                self.camera.get_or_insert_with(|| camera_for(&depth));
            }
            RunInput::Files {
                masks,
                depth,
                ground_truth,
            } => {
                for dir in [Some(&*masks), Some(&*depth), ground_truth.as_ref()].into_iter().flatten() {
                    if !dir.is_dir() {
                        return Err(CliError {
                            code: crate::ExitCode::Io,
                            message: format!("{}: not a directory", dir.display()),
                        });
                    }
                }
                if self.camera.is_none() {
                    return Err(CliError::validation("file input needs a camera (intrinsics and extrinsics)"));
                }
            }
        }
        self.camera.as_ref().expect("camera resolved").validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub version: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub pre: MetricsReport,
    pub post: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub metrics: Option<RunMetrics>,
    pub occupied_cells: usize,
    pub cloud_points: usize,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::at(path, e.into()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hashes `files`, naming each relative to `base` when it lies inside it.
fn hash_all(files: &[PathBuf], base: &Path) -> CliResult<Vec<FileHash>> {
    files
        .iter()
        .map(|p| {
            let name = p.strip_prefix(base).unwrap_or(p);
            let path = name.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            Ok(FileHash {
                path,
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

fn input_files(masks: &Path, depth: &Path, gt: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for dir in [Some(masks), Some(depth), gt].into_iter().flatten() {
        files.extend(mask_dir(dir)?.into_iter().map(|(_, p)| p));
    }
    Ok(files)
}

/// Executes a resolved config into `out`.
pub fn execute(config: &RunConfig, out: &Path) -> CliResult<RunOutcome> {
    create_dir(out)?;
    let camera = config.camera.expect("resolved config has a camera");

    let (masks_dir, depth_dir, gt_dir, inputs) = match &config.input {
        RunInput::Synth { config: synth_cfg } => {
            let seq = synth::generate(synth_cfg)?;
            let dir = out.join("input");
            let written = write_sequence(&dir, &seq)?;
            let inputs = hash_all(&written, out)?;
            (dir.join("masks"), dir.join("depth"), Some(dir.join("gt")), inputs)
        }
        RunInput::Files {
            masks,
            depth,
            ground_truth,
        } => {
            let files = input_files(masks, depth, ground_truth.as_deref())?;
            let inputs = hash_all(&files, out)?;
            (masks.clone(), depth.clone(), ground_truth.clone(), inputs)
        }
    };

    let mask_files = mask_dir(&masks_dir)?;
    let depth_files = mask_dir(&depth_dir)?;
    if mask_files.is_empty() {
        return Err(CliError::validation(format!("{}: no masks", masks_dir.display())));
    }
    if mask_files.len() != depth_files.len() {
        return Err(CliError::validation(format!(
            "{} masks but {} depth frames",
            mask_files.len(),
            depth_files.len()
        )));
    }

    let mut outputs = Vec::new();
    let post_dir = out.join("masks");
    create_dir(&post_dir)?;
    let log_path = out.join("log.jsonl");
    let log_file = fs::File::create(&log_path).map_err(|e| CliError::at(&log_path, e.into()))?;
    let frames = mask_files
        .iter()
        .map(|(name, p)| pgm::read_mask(p).map(|m| (name.clone(), m)).map_err(|e| CliError::at(p, e)));
    let done = denoise_stream(config.pipeline, frames, &post_dir, &mut BufWriter::new(log_file))?;
    outputs.extend(mask_files.iter().map(|(name, _)| post_dir.join(name)));
    outputs.push(log_path);

    let metrics = match &gt_dir {
        Some(gt) => {
            let m = RunMetrics {
                pre: batch_eval(&masks_dir, gt, false)?,
                post: batch_eval(&post_dir, gt, false)?,
            };
            let path = out.join("metrics.json");
            write_json(&path, &m)?;
            outputs.push(path);
            Some(m)
        }
        None => None,
    };

    // the costmap is built from the final frame
    let last_depth_path = &depth_files.last().expect("non-empty").1;
    let depth = pgm::read_depth(last_depth_path).map_err(|e| CliError::at(last_depth_path, e))?;
    let last_mask = done.last_output.expect("non-empty sequence");
    let cloud = make_cloud(&last_mask, &depth, &camera, voxel_spec(config.voxel_leaf)?)?;
    let cloud_path = out.join("cloud.ply");
    ply::write(&cloud_path, &cloud).map_err(|e| CliError::at(&cloud_path, e))?;
    // rasterize what was written, so `grid` on cloud.ply gives the same map
    let stored: PointCloudF64 = ply::read(&cloud_path).map_err(|e| CliError::at(&cloud_path, e))?;
    let grid_path = out.join("grid.pgm");
    let occupied_cells = write_grid(&stored, &camera, &config.grid, &grid_path)?;
    outputs.push(cloud_path);
    outputs.push(grid_path.clone());
    outputs.push(grid_path.with_extension("json"));

    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        inputs,
        outputs: hash_all(&outputs, out)?,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(RunOutcome {
        manifest,
        metrics,
        occupied_cells,
        cloud_points: stored.len(),
    })
}

fn config_from_args(a: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg: Option<RunConfig> = a.config.as_deref().map(read_json).transpose()?;
    let input = if let Some(p) = &a.synth {
        Some(RunInput::Synth { config: read_json(p)? })
    } else {
        a.masks.as_ref().map(|m| RunInput::Files {
            masks: m.clone(),
            depth: a.depth.clone().expect("clap enforces --depth"),
            ground_truth: a.gt.clone(),
        })
    };
    let mut cfg = match (cfg.take(), input) {
        (Some(mut c), Some(i)) => {
            c.input = i;
            c
        }
        (Some(c), None) => c,
        (None, Some(input)) => RunConfig {
            input,
            pipeline: PipelineConfig::default(),
            camera: None,
            voxel_leaf: default_leaf(),
            grid: GridSpec::default(),
        },
        (None, None) => {
            return Err(CliError::validation("run needs --config, --synth, --masks or --manifest"));
        }
    };
    if let Some(p) = &a.camera {
        cfg.camera = Some(read_json(p)?);
    }
    cfg.pipeline = a.pipeline.apply(cfg.pipeline)?;
    Ok(cfg)
}

fn print_summary(o: &RunOutcome, out: &Path) {
    if let Some(m) = &o.metrics {
        print!("{}", m.pre.to_table("pre-SW"));
        print!("{}", m.post.to_table("post-SW"));
    }
    println!(
        "cloud {} points, {} occupied cells -> {}",
        o.cloud_points,
        o.occupied_cells,
        out.display()
    );
}

fn diff(kind: &str, want: &[FileHash], got: &[FileHash]) -> Vec<String> {
    let mut bad = Vec::new();
    if want.len() != got.len() {
        bad.push(format!("{kind}: {} files recorded, {} produced", want.len(), got.len()));
    }
    for (w, g) in want.iter().zip(got) {
        if w != g {
            bad.push(format!("{kind}: {} differs", w.path));
        }
    }
    bad
}

pub fn run(a: RunArgs) -> CliResult<()> {
    let Some(manifest_path) = &a.manifest else {
        let cfg = config_from_args(&a)?.resolve()?;
        let outcome = execute(&cfg, &a.out)?;
        print_summary(&outcome, &a.out);
        return Ok(());
    };

    if !a.pipeline.is_empty() {
        return Err(CliError::validation("pipeline flags cannot be combined with --manifest"));
    }
    let recorded: Manifest = read_json(manifest_path)?;
    if recorded.schema != MANIFEST_SCHEMA || recorded.version != MANIFEST_VERSION {
        return Err(CliError::validation(format!(
            "unsupported manifest {} v{}",
            recorded.schema, recorded.version
        )));
    }
    let cfg = recorded.config.clone().resolve()?;
    if let RunInput::Files {
        masks,
        depth,
        ground_truth,
    } = &cfg.input
    {
        let now = hash_all(&input_files(masks, depth, ground_truth.as_deref())?, &a.out)?;
        let bad = diff("input", &recorded.inputs, &now);
        if !bad.is_empty() {
            return Err(CliError::validation(format!("inputs changed since the manifest: {}", bad.join("; "))));
        }
    }
    let outcome = execute(&cfg, &a.out)?;
    print_summary(&outcome, &a.out);
    let mut bad = diff("input", &recorded.inputs, &outcome.manifest.inputs);
    bad.extend(diff("output", &recorded.outputs, &outcome.manifest.outputs));
    if !bad.is_empty() {
        return Err(CliError::check_failed(format!("run did not reproduce: {}", bad.join("; "))));
    }
    println!(
        "reproduced {} inputs and {} outputs bitwise",
        recorded.inputs.len(),
        recorded.outputs.len()
    );
    Ok(())
}
