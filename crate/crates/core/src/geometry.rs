//! Depth back-projection, voxel downsampling and occupancy rasterization.
//!
//! The camera frame is the usual optical frame: x right, y down, z forward.
//! The ground frame has x and y on the floor and z pointing up.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Real>(self) -> Point3<U> {
        Point3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    /// Meters per raw depth unit.
    #[serde(default = "default_depth_scale")]
    pub depth_scale: T,
}

fn default_depth_scale<T: Real>() -> T {
    T::lit(0.001)
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, depth_scale: T) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            depth_scale,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::InvalidConfig("focal lengths must be positive".into()));
        }
        if !(self.depth_scale > T::zero()) {
            return Err(Error::InvalidConfig("depth scale must be positive".into()));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidConfig("principal point must be finite".into()));
        }
        Ok(())
    }

    /// Pixel `(u, v)` at metric depth `z` to a camera-frame point.
    #[inline]
    pub fn unproject(&self, u: T, v: T, z: T) -> Point3<T> {
        Point3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Camera-frame point to pixel coordinates and depth.
    #[inline]
    pub fn project(&self, p: Point3<T>) -> (T, T, T) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy, p.z)
    }
}

/// Raw 16-bit depth samples; `0` means no return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl DepthFrame {
    pub fn from_vec(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "depth data has {} samples, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T> {
    points: Vec<Point3<T>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new() -> Self {
        Self { points: Vec::new() }
    }

    pub fn from_points(points: Vec<Point3<T>>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3<T>> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Back-projects every masked pixel with a valid depth sample.
pub fn backproject<T: Real>(
    depth: &DepthFrame,
    intr: &CameraIntrinsics<T>,
    mask: &BinaryMask,
) -> Result<PointCloud<T>> {
    if depth.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            found: depth.dims(),
        });
    }
    intr.validate()?;
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let raw = depth.get(u, v);
            if raw == 0 || !mask.get(u, v) {
                continue;
            }
            let z = T::lit(raw as f64) * intr.depth_scale;
            points.push(intr.unproject(T::from_count(u), T::from_count(v), z));
        }
    }
    Ok(PointCloud { points })
}

/// Cubic voxel edge length; voxels are anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelSpec<T> {
    pub leaf: T,
}

impl<T: Real> VoxelSpec<T> {
    pub fn new(leaf: T) -> Result<Self> {
        if !(leaf > T::zero() && leaf.is_finite()) {
            return Err(Error::InvalidConfig("voxel leaf must be positive".into()));
        }
        Ok(Self { leaf })
    }

    /// Half-open floor indexing: a point on a face belongs to the higher voxel.
    #[inline]
    pub fn index(&self, p: &Point3<T>) -> (i64, i64, i64) {
        let idx = |v: T| (v / self.leaf).floor().to_i64().expect("coordinate in i64 range");
        (idx(p.x), idx(p.y), idx(p.z))
    }
}

/// One centroid per occupied voxel, in ascending voxel-index order.
pub fn voxel_downsample<T: Real>(cloud: &PointCloud<T>, spec: VoxelSpec<T>) -> PointCloud<T> {
    let mut buckets: BTreeMap<(i64, i64, i64), (Point3<T>, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let acc = buckets
            .entry(spec.index(p))
            .or_insert((Point3::new(T::zero(), T::zero(), T::zero()), 0));
        acc.0.x += p.x;
        acc.0.y += p.y;
        acc.0.z += p.z;
        acc.1 += 1;
    }
    let points = buckets
        .into_values()
        .map(|(sum, n)| {
            let n = T::from_count(n);
            Point3::new(sum.x / n, sum.y / n, sum.z / n)
        })
        .collect();
    PointCloud { points }
}

/// Camera-to-ground rigid transform: `ground = rotation * camera + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrinsics<T> {
    pub rotation: [[T; 3]; 3],
    pub translation: [T; 3],
}

impl<T: Real> Default for Extrinsics<T> {
    fn default() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            rotation: [[o, z, z], [z, o, z], [z, z, o]],
            translation: [z; 3],
        }
    }
}

impl<T: Real> Extrinsics<T> {
    pub fn determinant(&self) -> T {
        let r = &self.rotation;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Rejects singular or non-finite rotations.
    pub fn validate(&self) -> Result<()> {
        let det = self.determinant();
        let finite = self.rotation.iter().flatten().chain(&self.translation).all(|v| v.is_finite());
        if !finite || det.abs() < T::lit(1e-6) {
            return Err(Error::DegenerateTransform(det.to_f64_lossy()));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, p: &Point3<T>) -> Point3<T> {
        let r = &self.rotation;
        let t = &self.translation;
        Point3::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + t[0],
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + t[1],
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + t[2],
        )
    }

    /// Camera mounted `height` above the floor looking along ground +x,
    /// pitched down by `pitch` radians.
    pub fn looking_down(height: T, pitch: T) -> Self {
        let (s, c) = pitch.sin_cos();
        let (o, z) = (T::one(), T::zero());
        // columns are the camera axes expressed in the ground frame
        // x_cam -> -y_ground, y_cam -> down-and-forward, z_cam -> forward-and-down
        Self {
            rotation: [[z, -s, c], [-o, z, z], [z, -c, -s]],
            translation: [z, z, height],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec<T> {
    /// Meters per cell.
    pub resolution: T,
    /// Ground `(x, y)` of the corner of cell `(0, 0)`.
    pub origin: (T, T),
    pub width: usize,
    pub height: usize,
    /// Height slab `[min, max]` in meters counted as obstacle.
    pub z_band: (T, T),
    pub min_hits: u32,
}

impl<T: Real> Default for GridSpec<T> {
    fn default() -> Self {
        Self {
            resolution: T::lit(0.05),
            origin: (T::zero(), T::lit(-2.0)),
            width: 80,
            height: 80,
            z_band: (T::lit(0.005), T::lit(0.30)),
            min_hits: 1,
        }
    }
}

impl<T: Real> GridSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > T::zero() && self.resolution.is_finite()) {
            return Err(Error::InvalidConfig("grid resolution must be positive".into()));
        }
        if !(self.z_band.0 <= self.z_band.1) {
            return Err(Error::InvalidConfig("z band must satisfy min <= max".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("grid must have at least one cell".into()));
        }
        Ok(())
    }

    /// Cell `(ix, iy)` containing ground point `(x, y)`, if inside the grid.
    pub fn cell(&self, x: T, y: T) -> Option<(usize, usize)> {
        let fx = ((x - self.origin.0) / self.resolution).floor();
        let fy = ((y - self.origin.1) / self.resolution).floor();
        let ix = fx.to_i64()?;
        let iy = fy.to_i64()?;
        (ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height)
            .then_some((ix as usize, iy as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Occupied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid<T> {
    spec: GridSpec<T>,
    cells: Vec<Cell>,
}

impl<T: Real> OccupancyGrid<T> {
    pub fn free(spec: GridSpec<T>) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            cells: vec![Cell::Free; spec.width * spec.height],
            spec,
        })
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    /// Cells in row-major order, row `iy`, column `ix`.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn get(&self, ix: usize, iy: usize) -> Cell {
        self.cells[iy * self.spec.width + ix]
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.get(ix, iy) == Cell::Occupied
    }

    pub fn occupied_cells(&self) -> Vec<(usize, usize)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == Cell::Occupied)
            .map(|(i, _)| (i % self.spec.width, i / self.spec.width))
            .collect()
    }

    /// 8-bit map image: 0 occupied, 254 free. Image row 0 is the largest
    /// ground y so the picture reads like a map with +y up.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut px = Vec::with_capacity(w * h);
        for row in 0..h {
            let iy = h - 1 - row;
            for ix in 0..w {
                px.push(if self.is_occupied(ix, iy) { 0 } else { 254 });
            }
        }
        crate::io::pgm::encode8(w, h, &px)
    }

    /// Inverse of [`to_pgm_bytes`](Self::to_pgm_bytes); any sample below 128 is occupied.
    pub fn from_pgm_bytes(bytes: &[u8], spec: GridSpec<T>) -> Result<Self> {
        let img = crate::io::pgm::decode(bytes)?;
        if (img.width, img.height) != (spec.width, spec.height) {
            return Err(Error::DimensionMismatch {
                expected: (spec.width, spec.height),
                found: (img.width, img.height),
            });
        }
        let mut grid = Self::free(spec)?;
        for row in 0..img.height {
            for ix in 0..img.width {
                if img.samples[row * img.width + ix] < 128 {
                    let iy = img.height - 1 - row;
                    grid.cells[iy * img.width + ix] = Cell::Occupied;
                }
            }
        }
        Ok(grid)
    }
}

/// JSON sidecar written next to the grid image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub image: String,
    pub resolution: f64,
    pub origin: (f64, f64),
    pub width: usize,
    pub height: usize,
    pub z_band: (f64, f64),
    pub min_hits: u32,
    pub occupied_value: u8,
    pub free_value: u8,
}

impl GridMetadata {
    pub fn new<T: Real>(image: impl Into<String>, spec: &GridSpec<T>) -> Self {
        Self {
            image: image.into(),
            resolution: spec.resolution.to_f64_lossy(),
            origin: (spec.origin.0.to_f64_lossy(), spec.origin.1.to_f64_lossy()),
            width: spec.width,
            height: spec.height,
            z_band: (spec.z_band.0.to_f64_lossy(), spec.z_band.1.to_f64_lossy()),
            min_hits: spec.min_hits,
            occupied_value: 0,
            free_value: 254,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rasterized<T> {
    pub grid: OccupancyGrid<T>,
    /// Points whose height fell inside the z band.
    pub in_band: usize,
    /// In-band points that landed outside the grid.
    pub out_of_bounds: usize,
}

/// Marks cells hit by at least `min_hits` in-band points.
pub fn rasterize_obstacles<T: Real>(
    cloud: &PointCloud<T>,
    spec: &GridSpec<T>,
    extrinsics: &Extrinsics<T>,
) -> Result<Rasterized<T>> {
    spec.validate()?;
    extrinsics.validate()?;
    let mut hits = vec![0u32; spec.width * spec.height];
    let (mut in_band, mut out_of_bounds) = (0, 0);
    for p in cloud.points() {
        let g = extrinsics.apply(p);
        if g.z < spec.z_band.0 || g.z > spec.z_band.1 {
            continue;
        }
        in_band += 1;
        match spec.cell(g.x, g.y) {
            Some((ix, iy)) => hits[iy * spec.width + ix] += 1,
            None => out_of_bounds += 1,
        }
    }
    let min_hits = spec.min_hits.max(1);
    let mut grid = OccupancyGrid::free(*spec)?;
    for (cell, &n) in grid.cells.iter_mut().zip(&hits) {
        if n >= min_hits {
            *cell = Cell::Occupied;
        }
    }
    Ok(Rasterized {
        grid,
        in_band,
        out_of_bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 1.0, 1.0, 0.001).unwrap()
    }

    #[test]
    fn principal_ray() {
        let intr = CameraIntrinsics::new(500.0, 500.0, 2.0, 1.0, 0.001).unwrap();
        let mut data = vec![0u16; 15];
        data[5 + 2] = 2000;
        let depth = DepthFrame::from_vec(5, 3, data).unwrap();
        let cloud = backproject(&depth, &intr, &BinaryMask::filled(5, 3)).unwrap();
        assert_eq!(cloud.points(), &[Point3::new(0.0, 0.0, 2.0)]);
    }

    #[test]
    fn empty_mask_gives_empty_cloud() {
        let depth = DepthFrame::from_vec(3, 3, vec![1000; 9]).unwrap();
        assert!(backproject(&depth, &intr(), &BinaryMask::new(3, 3)).unwrap().is_empty());
    }

    #[test]
    fn three_by_three_plane() {
        // depth plane z = 1.0 + 0.1 u + 0.2 v meters, evaluated by hand
        let raw: Vec<u16> = (0..9).map(|i| 1000 + 100 * (i % 3) + 200 * (i / 3)).collect();
        let depth = DepthFrame::from_vec(3, 3, raw).unwrap();
        let cloud = backproject(&depth, &intr(), &BinaryMask::filled(3, 3)).unwrap();
        let expected = [
            (-0.01, -0.01, 1.0),
            (0.0, -0.011, 1.1),
            (0.012, -0.012, 1.2),
            (-0.012, 0.0, 1.2),
            (0.0, 0.0, 1.3),
            (0.014, 0.0, 1.4),
            (-0.014, 0.014, 1.4),
            (0.0, 0.015, 1.5),
            (0.016, 0.016, 1.6),
        ];
        assert_eq!(cloud.len(), 9);
        for (p, e) in cloud.points().iter().zip(expected) {
            assert!((p.x - e.0).abs() < 1e-12 && (p.y - e.1).abs() < 1e-12 && (p.z - e.2).abs() < 1e-12, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn invalid_depth_and_dims() {
        let depth = DepthFrame::from_vec(2, 1, vec![0, 500]).unwrap();
        assert_eq!(backproject(&depth, &intr(), &BinaryMask::filled(2, 1)).unwrap().len(), 1);
        assert!(matches!(
            backproject(&depth, &intr(), &BinaryMask::filled(1, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 0.001).is_err());
    }

    #[test]
    fn voxel_cases() {
        let spec = VoxelSpec::new(1.0f64).unwrap();
        let one = PointCloud::from_points(vec![Point3::new(0.3, -0.2, 4.0)]);
        assert_eq!(voxel_downsample(&one, spec), one);
        let two = PointCloud::from_points(vec![Point3::new(0.1, 0.0, 1.0), Point3::new(0.3, 0.0, 1.0)]);
        let out = voxel_downsample(&two, spec);
        assert_eq!(out.len(), 1);
        assert!((out.points()[0].x - 0.2).abs() < 1e-15);
        assert_eq!((out.points()[0].y, out.points()[0].z), (0.0, 1.0));
        assert!(VoxelSpec::new(0.0f64).is_err());
    }

    #[test]
    fn voxel_boundaries_use_floor() {
        let spec = VoxelSpec::new(0.5).unwrap();
        assert_eq!(spec.index(&Point3::new(0.5, -0.25, -0.5)), (1, -1, -1));
        assert_eq!(spec.index(&Point3::new(0.0, -0.0, 0.49)), (0, 0, 0));
    }

    #[test]
    fn single_point_cell() {
        let spec = GridSpec {
            resolution: 0.05,
            origin: (0.0, 0.0),
            width: 100,
            height: 100,
            ..Default::default()
        };
        let cloud = PointCloud::from_points(vec![Point3::new(1.0, 2.0, 0.1)]);
        let r = rasterize_obstacles(&cloud, &spec, &Extrinsics::default()).unwrap();
        assert_eq!(r.grid.occupied_cells(), vec![(20, 40)]);
        assert_eq!((r.in_band, r.out_of_bounds), (1, 0));

        let high = PointCloud::from_points(vec![Point3::new(1.0, 2.0, 0.5)]);
        let r = rasterize_obstacles(&high, &spec, &Extrinsics::default()).unwrap();
        assert!(r.grid.occupied_cells().is_empty());
        assert_eq!(r.in_band, 0);

        let far = PointCloud::from_points(vec![Point3::new(-1.0, 2.0, 0.1)]);
        let r = rasterize_obstacles(&far, &spec, &Extrinsics::default()).unwrap();
        assert_eq!(r.out_of_bounds, 1);
    }

    #[test]
    fn empty_cloud_and_min_hits() {
        let spec = GridSpec::<f64> {
            origin: (0.0, 0.0),
            min_hits: 2,
            ..Default::default()
        };
        let r = rasterize_obstacles(&PointCloud::new(), &spec, &Extrinsics::default()).unwrap();
        assert!(r.grid.cells().iter().all(|c| *c == Cell::Free));
        let cloud = PointCloud::from_points(vec![Point3::new(0.01, 0.01, 0.1), Point3::new(0.2, 0.2, 0.1), Point3::new(0.02, 0.03, 0.1)]);
        let r = rasterize_obstacles(&cloud, &spec, &Extrinsics::default()).unwrap();
        assert_eq!(r.grid.occupied_cells(), vec![(0, 0)]);
    }

    #[test]
    fn degenerate_rotation_rejected() {
        let ext = Extrinsics {
            rotation: [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        };
        let r = rasterize_obstacles(&PointCloud::<f64>::new(), &GridSpec::default(), &ext);
        assert!(matches!(r, Err(Error::DegenerateTransform(_))));
    }

    #[test]
    fn looking_down_is_a_rotation() {
        let e = Extrinsics::looking_down(0.4f64, 0.5);
        assert!((e.determinant() - 1.0).abs() < 1e-12);
        // optical axis points forward and down
        let ahead = e.apply(&Point3::new(0.0, 0.0, 1.0));
        assert!(ahead.x > 0.0 && ahead.z < 0.4);
        // image right is ground -y
        let right = e.apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((right.y + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_pgm_round_trip() {
        let spec = GridSpec::<f64> {
            origin: (0.0, 0.0),
            width: 4,
            height: 3,
            ..Default::default()
        };
        let cloud = PointCloud::from_points(vec![Point3::new(0.01, 0.12, 0.1)]);
        let grid = rasterize_obstacles(&cloud, &spec, &Extrinsics::default()).unwrap().grid;
        let bytes = grid.to_pgm_bytes();
        let img = crate::io::pgm::decode(&bytes).unwrap();
        // cell (0, 2) sits on the top image row
        assert_eq!(img.samples[0], 0);
        assert_eq!(img.samples.iter().filter(|&&s| s == 254).count(), 11);
        assert_eq!(OccupancyGrid::from_pgm_bytes(&bytes, spec).unwrap(), grid);
    }

    fn arb_points(n: usize) -> impl Strategy<Value = Vec<Point3<f64>>> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 0.05..5.0f64), 0..n)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn pinhole_round_trip(u in 0.0..640.0f64, v in 0.0..480.0f64, raw in 1u16..=u16::MAX) {
            let intr = CameraIntrinsics::new(615.3, 612.8, 321.7, 238.2, 0.001).unwrap();
            let z = raw as f64 * intr.depth_scale;
            let p = intr.unproject(u, v, z);
            let (pu, pv, pz) = intr.project(p);
            prop_assert!((pu - u).abs() <= 1e-6 && (pv - v).abs() <= 1e-6 && (pz - z).abs() <= 1e-6);
        }

        #[test]
        fn voxel_output_inside_voxels(points in arb_points(300), leaf in 0.05..1.0f64) {
            let spec = VoxelSpec::new(leaf).unwrap();
            let cloud = PointCloud::from_points(points);
            let out = voxel_downsample(&cloud, spec);
            prop_assert!(out.len() <= cloud.len());
            let keys: Vec<_> = out.points().iter().map(|p| spec.index(p)).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(&keys, &sorted);
            prop_assert_eq!(voxel_downsample(&out, spec), out);
        }

        #[test]
        fn rasterization_is_order_free(points in arb_points(200), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let spec = GridSpec { origin: (-3.0, -3.0), width: 120, height: 120, ..Default::default() };
            let ext = Extrinsics::looking_down(0.3, 0.4);
            let a = rasterize_obstacles(&PointCloud::from_points(points.clone()), &spec, &ext).unwrap();
            let mut shuffled = points;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = rasterize_obstacles(&PointCloud::from_points(shuffled), &spec, &ext).unwrap();
            prop_assert!(a.grid.occupied_cells().len() <= a.in_band);
            prop_assert_eq!(a, b);
        }
    }
}
