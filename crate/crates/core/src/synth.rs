//! Seeded generator for noisy mask sequences with known ground truth.
//!
//! A thick polyline (the cable) drifts slowly across the frame and is present
//! in every frame. Static noise regions, rectangles and short line segments,
//! each appear independently per frame with the flicker probability. Depth
//! frames, when requested, image a flat floor with the cable and the noise
//! objects raised above it, seen by a pitched pinhole camera.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthFrame, Extrinsics};
use crate::mask::{dilate, BinaryMask, StructuringElement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DloSpec {
    /// Polyline control points `(x, y)` in pixels at frame 0.
    pub points: Vec<(f64, f64)>,
    pub thickness: f64,
    /// Per-frame translation `(dx, dy)` in pixels.
    pub drift: (f64, f64),
}

impl Default for DloSpec {
    fn default() -> Self {
        Self {
            points: vec![(60.0, 380.0), (220.0, 330.0), (380.0, 360.0), (540.0, 310.0)],
            thickness: 6.0,
            drift: (0.8, -0.4),
        }
    }
}

impl DloSpec {
    pub fn drift_per_frame(&self) -> f64 {
        self.drift.0.hypot(self.drift.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub count: usize,
    /// Inclusive side-length range in pixels.
    pub size: (usize, usize),
    /// Per-frame presence probability of each region.
    pub flicker: f64,
    /// Minimum gap in pixels between a region and the cable's swept area.
    pub margin: usize,
    /// Minimum distance from a region's center to the cable centroid at any frame.
    pub centroid_clearance: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            count: 3,
            size: (20, 60),
            flicker: 0.3,
            margin: 8,
            centroid_clearance: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthConfig {
    pub intrinsics: CameraIntrinsics<f64>,
    /// Camera height above the floor, meters.
    pub camera_height: f64,
    /// Downward pitch, radians.
    pub pitch: f64,
    pub dlo_height: f64,
    pub noise_height: f64,
}

impl Default for DepthConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: 319.5,
                cy: 239.5,
                depth_scale: 0.001,
            },
            camera_height: 0.35,
            pitch: 0.6,
            dlo_height: 0.015,
            noise_height: 0.05,
        }
    }
}

impl DepthConfig {
    pub fn extrinsics(&self) -> Extrinsics<f64> {
        Extrinsics::looking_down(self.camera_height, self.pitch)
    }

    fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let ok = self.camera_height > 0.0
            && self.pitch.is_finite()
            && self.dlo_height >= 0.0
            && self.noise_height >= 0.0
            && self.dlo_height.max(self.noise_height) < self.camera_height;
        if !ok {
            return Err(Error::InvalidConfig(
                "depth: object heights must be non-negative and below the camera".into(),
            ));
        }
        Ok(())
    }

    /// Depth sample for a pixel whose ray meets the plane `z = height`,
    /// or 0 when the ray never reaches it or the range overflows.
    fn sample(&self, ext: &Extrinsics<f64>, u: usize, v: usize, height: f64) -> u16 {
        let i = &self.intrinsics;
        let dx = (u as f64 - i.cx) / i.fx;
        let dy = (v as f64 - i.cy) / i.fy;
        let r = &ext.rotation;
        let dz = r[2][0] * dx + r[2][1] * dy + r[2][2];
        if dz >= 0.0 {
            return 0;
        }
        // camera-frame depth equals the ray parameter since the ray has unit z
        let depth = (height - ext.translation[2]) / dz;
        let raw = (depth / i.depth_scale).round();
        if raw >= 1.0 && raw <= u16::MAX as f64 {
            raw as u16
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub dlo: DloSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub depth: Option<DepthConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames: 90,
            width: 640,
            height: 480,
            dlo: DloSpec::default(),
            noise: NoiseSpec::default(),
            seed: 0,
            depth: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.frames == 0 || self.width == 0 || self.height == 0 {
            return bad("frames, width and height must be positive");
        }
        if self.dlo.points.len() < 2 {
            return bad("dlo needs at least two control points");
        }
        if !(self.dlo.thickness > 0.0) || !self.dlo.drift_per_frame().is_finite() {
            return bad("dlo thickness must be positive and drift finite");
        }
        if !(0.0..=1.0).contains(&self.noise.flicker) {
            return bad("flicker probability must lie in [0, 1]");
        }
        let (lo, hi) = self.noise.size;
        if lo == 0 || lo > hi || hi > self.width.min(self.height) {
            return bad("noise size range must satisfy 0 < min <= max <= frame side");
        }
        if let Some(d) = &self.depth {
            d.validate()?;
        }
        let r = self.dlo.thickness / 2.0;
        let (w, h) = (self.width as f64, self.height as f64);
        for f in [0, self.frames - 1] {
            for &(x, y) in &self.polyline(f) {
                if x - r < 0.0 || y - r < 0.0 || x + r > w - 1.0 || y + r > h - 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "dlo leaves the {}x{} frame at frame {f} near ({x:.1}, {y:.1})",
                        self.width, self.height
                    )));
                }
            }
        }
        Ok(())
    }

    /// Refuses drifts that a tracker with this threshold could not follow.
    pub fn check_drift(&self, dist_threshold: f64) -> Result<()> {
        let d = self.dlo.drift_per_frame();
        if d >= dist_threshold {
            return Err(Error::InvalidConfig(format!(
                "dlo drift {d:.2} px/frame must stay below the tracker threshold {dist_threshold}"
            )));
        }
        Ok(())
    }

    /// Control points at frame `f`. Drift is linear, so checking the first
    /// and last frames bounds every frame in between.
    pub fn polyline(&self, f: usize) -> Vec<(f64, f64)> {
        let t = f as f64;
        self.dlo
            .points
            .iter()
            .map(|&(x, y)| (x + t * self.dlo.drift.0, y + t * self.dlo.drift.1))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    Rectangle,
    Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRegion {
    pub shape: NoiseShape,
    pub footprint: BinaryMask,
    /// Whether the region is drawn in each frame.
    pub presence: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub masks: Vec<BinaryMask>,
    pub ground_truth: Vec<BinaryMask>,
    pub depth: Option<Vec<DepthFrame>>,
    pub noise: Vec<NoiseRegion>,
}

impl SynthSequence {
    /// Union of every noise footprint.
    pub fn noise_union(&self) -> Option<BinaryMask> {
        let mut it = self.noise.iter().map(|n| n.footprint.clone());
        let first = it.next()?;
        Some(it.fold(first, |acc, m| acc.union(&m)))
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * abx).hypot(p.1 - a.1 - t * aby)
}

/// Marks pixels whose centers lie within `thickness / 2` of the polyline.
fn draw_polyline(mask: &mut BinaryMask, pts: &[(f64, f64)], thickness: f64) {
    let r = thickness / 2.0;
    let (w, h) = mask.dims();
    for seg in pts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let x0 = (a.0.min(b.0) - r).floor().max(0.0) as usize;
        let y0 = (a.1.min(b.1) - r).floor().max(0.0) as usize;
        let x1 = ((a.0.max(b.0) + r).ceil().max(0.0) as usize).min(w - 1);
        let y1 = ((a.1.max(b.1) + r).ceil().max(0.0) as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if segment_distance((x as f64, y as f64), a, b) <= r {
                    mask.set(x, y, true);
                }
            }
        }
    }
}

fn centroid(mask: &BinaryMask) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    (sx / n.max(1) as f64, sy / n.max(1) as f64)
}

const PLACEMENT_ATTEMPTS: usize = 10_000;

fn place_noise(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    forbidden: &mut BinaryMask,
    centroids: &[(f64, f64)],
    index: usize,
) -> Result<(NoiseShape, BinaryMask)> {
    let (w, h) = (cfg.width, cfg.height);
    let (lo, hi) = cfg.noise.size;
    // segments mimic line-like false positives such as baseboards
    let shape = if index.is_multiple_of(2) {
        NoiseShape::Rectangle
    } else {
        NoiseShape::Segment
    };
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut m = BinaryMask::new(w, h);
        match shape {
            NoiseShape::Rectangle => {
                let rw = rng.gen_range(lo..=hi);
                let rh = rng.gen_range(lo..=hi);
                let x0 = rng.gen_range(0..=w - rw);
                let y0 = rng.gen_range(0..=h - rh);
                for y in y0..y0 + rh {
                    for x in x0..x0 + rw {
                        m.set(x, y, true);
                    }
                }
            }
            NoiseShape::Segment => {
                let len = rng.gen_range(2 * lo..=2 * hi) as f64;
                let angle = rng.gen_range(0.0..std::f64::consts::PI);
                let thick = rng.gen_range(3.0..6.0);
                let half = (len / 2.0 + thick).ceil();
                if 2.0 * half >= w.min(h) as f64 {
                    continue;
                }
                let cx = rng.gen_range(half..w as f64 - half);
                let cy = rng.gen_range(half..h as f64 - half);
                let (dx, dy) = (angle.cos() * len / 2.0, angle.sin() * len / 2.0);
                draw_polyline(&mut m, &[(cx - dx, cy - dy), (cx + dx, cy + dy)], thick);
            }
        }
        if m.foreground_count() == 0 || m.data().iter().zip(forbidden.data()).any(|(a, b)| *a && *b) {
            continue;
        }
        let c = centroid(&m);
        if centroids
            .iter()
            .any(|d| (c.0 - d.0).hypot(c.1 - d.1) < cfg.noise.centroid_clearance)
        {
            continue;
        }
        let side = 2 * cfg.noise.margin + 1;
        let grown = dilate(&m, StructuringElement::new(side.min(h), side.min(w))?)?;
        *forbidden = forbidden.union(&grown);
        return Ok((shape, m));
    }
    Err(Error::InvalidConfig(format!(
        "could not place noise region {index} clear of the dlo after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

/// Generates the full sequence. Identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthSequence> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let ground_truth: Vec<BinaryMask> = (0..cfg.frames)
        .map(|f| {
            let mut m = BinaryMask::new(w, h);
            draw_polyline(&mut m, &cfg.polyline(f), cfg.dlo.thickness);
            m
        })
        .collect();
    let centroids: Vec<(f64, f64)> = ground_truth.iter().map(centroid).collect();

    let swept = ground_truth.iter().skip(1).fold(ground_truth[0].clone(), |acc, m| acc.union(m));
    let side = 2 * cfg.noise.margin + 1;
    let mut forbidden = dilate(&swept, StructuringElement::new(side.min(h), side.min(w))?)?;

    let mut noise = Vec::with_capacity(cfg.noise.count);
    for i in 0..cfg.noise.count {
        let (shape, footprint) = place_noise(cfg, &mut rng, &mut forbidden, &centroids, i)?;
        noise.push(NoiseRegion {
            shape,
            footprint,
            presence: Vec::with_capacity(cfg.frames),
        });
    }
    for _ in 0..cfg.frames {
        for n in noise.iter_mut() {
            n.presence.push(rng.gen_bool(cfg.noise.flicker));
        }
    }

    let masks = ground_truth
        .iter()
        .enumerate()
        .map(|(f, gt)| {
            noise
                .iter()
                .filter(|n| n.presence[f])
                .fold(gt.clone(), |acc, n| acc.union(&n.footprint))
        })
        .collect();

    let depth = match &cfg.depth {
        None => None,
        Some(d) => {
            let ext = d.extrinsics();
            let objects = noise.iter().skip(1).fold(
                noise.first().map_or_else(|| BinaryMask::new(w, h), |n| n.footprint.clone()),
                |acc, n| acc.union(&n.footprint),
            );
            let frames = ground_truth
                .iter()
                .map(|gt| {
                    let mut data = Vec::with_capacity(w * h);
                    for v in 0..h {
                        for u in 0..w {
                            let z = if gt.get(u, v) {
                                d.dlo_height
                            } else if objects.get(u, v) {
                                d.noise_height
                            } else {
                                0.0
                            };
                            data.push(d.sample(&ext, u, v, z));
                        }
                    }
                    DepthFrame::from_vec(w, h, data)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(frames)
        }
    };

    Ok(SynthSequence {
        masks,
        ground_truth,
        depth,
        noise,
    })
}
