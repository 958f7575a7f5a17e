use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wirewatch_core::{KeepMode, Morphology, StructuringElement};

#[derive(Debug, Parser)]
#[command(name = "wirewatch", version, about = "Cable-on-floor perception toolkit: mask denoising, scoring and costmaps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove flickering false positives from a mask sequence by sliding-window ID voting.
    Postprocess(PostprocessArgs),
    /// Score predicted masks against ground truth (pairs files by name).
    Eval(EvalArgs),
    /// Generate a seeded noisy mask sequence with ground truth and optional depth.
    Synth(SynthArgs),
    /// Back-project masked depth pixels into a PLY point cloud.
    Cloud(CloudArgs),
    /// Rasterize a point cloud into an occupancy grid (PGM plus JSON sidecar).
    Grid(GridArgs),
    /// Check the strip-convolution blocks against the dense reference on random cases.
    Convcheck(ConvcheckArgs),
    /// Run denoising, scoring, back-projection and rasterization end to end.
    Run(RunArgs),
}

/// Pipeline settings; each flag overrides the matching config field.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineFlags {
    /// Vote window length in frames.
    #[arg(long = "k", value_name = "FRAMES")]
    pub window: Option<usize>,
    /// Centroid distance in pixels below which regions share an ID.
    #[arg(long, value_name = "PX")]
    pub dist_threshold: Option<f64>,
    /// Regions with area not above this many pixels are dropped.
    #[arg(long, value_name = "PX")]
    pub min_area: Option<usize>,
    /// Structuring element as ROWSxCOLS, e.g. 1x1 or 3x5.
    #[arg(long, value_name = "ROWSxCOLS")]
    pub kernel: Option<StructuringElement>,
    /// Pixel connectivity for region labeling.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["4", "8"]))]
    pub connectivity: Option<String>,
    /// Survivor rule: argmax, or fraction:F for every ID seen in at least F of the window.
    #[arg(long, value_name = "MODE")]
    pub keep_mode: Option<KeepMode>,
    /// Morphology applied before labeling: erode, dilate or none.
    #[arg(long)]
    pub morphology: Option<Morphology>,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Directory of PGM masks, processed in file-name order.
    #[arg(long, required_unless_present = "stdin", conflicts_with = "stdin")]
    pub input: Option<PathBuf>,
    /// Read length-prefixed frames (u32 LE width, u32 LE height, bytes) from standard input.
    #[arg(long)]
    pub stdin: bool,
    /// Output directory for denoised masks.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-frame JSON-lines log; defaults to <OUT>/log.jsonl.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Pipeline config JSON; flags win over its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted PGM masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth PGM masks.
    #[arg(long)]
    pub gt: PathBuf,
    /// Score the files present in both directories instead of failing on unpaired names.
    #[arg(long)]
    pub allow_missing: bool,
    /// Also write the full report, including per-image scores, as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Row label in the printed table.
    #[arg(long, default_value = "pred")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config JSON; flags win over its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Per-frame presence probability of each noise region.
    #[arg(long)]
    pub flicker: Option<f64>,
    /// Number of noise regions.
    #[arg(long)]
    pub noise_count: Option<usize>,
    /// Emit depth frames with the default camera when the config has none.
    #[arg(long)]
    pub depth: bool,
    /// Output directory: masks/, gt/, depth/, synth.json and camera.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CloudArgs {
    /// Binary mask PGM selecting the pixels to back-project.
    #[arg(long)]
    pub mask: PathBuf,
    /// 16-bit depth PGM.
    #[arg(long)]
    pub depth: PathBuf,
    /// Camera JSON with "intrinsics" (fx, fy, cx, cy, depth_scale).
    #[arg(long)]
    pub camera: PathBuf,
    /// Voxel leaf size in meters; omit to keep every point.
    #[arg(long)]
    pub voxel: Option<f64>,
    /// Output PLY path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// ASCII PLY point cloud in the camera frame.
    #[arg(long)]
    pub cloud: PathBuf,
    /// Camera JSON with "extrinsics" (rotation, translation) mapping camera to ground.
    #[arg(long)]
    pub camera: PathBuf,
    /// Grid spec JSON (resolution, origin, width, height, z_band, min_hits).
    #[arg(long)]
    pub grid_config: Option<PathBuf>,
    /// Cell size in meters, overriding the grid spec.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Output PGM path; the metadata sidecar is written next to it with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvcheckArgs {
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted absolute deviation.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run config JSON (input, pipeline, camera, voxel_leaf, grid).
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Generator config JSON; runs on a synthetic sequence.
    #[arg(long, conflicts_with_all = ["manifest", "masks"])]
    pub synth: Option<PathBuf>,
    /// Directory of input masks (real data).
    #[arg(long, requires_all = ["depth", "camera"], conflicts_with = "manifest")]
    pub masks: Option<PathBuf>,
    /// Directory of 16-bit depth PGMs, paired with masks by sorted file name.
    #[arg(long, requires = "masks")]
    pub depth: Option<PathBuf>,
    /// Directory of ground-truth masks for scoring.
    #[arg(long, requires = "masks")]
    pub gt: Option<PathBuf>,
    /// Camera JSON with intrinsics and extrinsics.
    #[arg(long, conflicts_with = "manifest")]
    pub camera: Option<PathBuf>,
    /// Re-run from a previous manifest and verify every output reproduces bitwise.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}
