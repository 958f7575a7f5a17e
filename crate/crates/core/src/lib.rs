//! Floor-level cable detection support: temporal denoising of segmentation
//! masks, strip-convolution network blocks, depth-to-costmap geometry and
//! segmentation metrics.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`). The aliases below
//! fix the precision used by the command-line tools: `f32` for feature maps,
//! `f64` for geometry and scores.

pub mod error;
pub mod geometry;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod nn;
mod scalar;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
pub use mask::{BinaryMask, Connectivity, Morphology, RegionStats, StructuringElement};
pub use scalar::Real;
pub use tracker::{KeepMode, PipelineConfig, SlidingWindowDenoiser, TrackId};

pub type FeatureMapF32 = nn::FeatureMap<f32>;
pub type FeatureMapF64 = nn::FeatureMap<f64>;
pub type AscsppF32 = nn::AscsppParams<f32>;
pub type ChannelAttentionF32 = nn::ChannelAttention<f32>;

pub type Point3F64 = geometry::Point3<f64>;
pub type PointCloudF64 = geometry::PointCloud<f64>;
pub type IntrinsicsF64 = geometry::CameraIntrinsics<f64>;
pub type ExtrinsicsF64 = geometry::Extrinsics<f64>;
pub type GridSpecF64 = geometry::GridSpec<f64>;
pub type OccupancyGridF64 = geometry::OccupancyGrid<f64>;

pub type PointCloudF32 = geometry::PointCloud<f32>;
