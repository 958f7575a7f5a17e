//! Binary masks, rectangular morphology and connected-region extraction.
//!
//! Morphology uses a centered rectangular footprint. For even sizes the
//! anchor sits at `(size - 1) / 2`, so a 2-wide footprint covers offsets
//! `{0, +1}`. Pixels outside the frame count as background for both
//! erosion and dilation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major foreground/background bitmap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("foreground", &self.foreground_count())
            .finish()
    }
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "mask data has {} elements, {}x{} needs {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Thresholds 8-bit samples: values >= 128 are foreground.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::from_vec(width, height, bytes.iter().map(|&b| b >= 128).collect())
    }

    /// 0 for background, 255 for foreground.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }

    /// Every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims()
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Pixelwise union. Panics if dimensions differ.
    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims(), "union of masks with different dims");
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// Rectangular all-ones footprint of `rows` x `cols` pixels. Serialized as
/// `"ROWSxCOLS"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StructuringElement {
    rows: usize,
    cols: usize,
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self { rows: 1, cols: 1 }
    }
}

impl StructuringElement {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "structuring element must be at least 1x1, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Inclusive offset range `[lo, hi]` along an axis of `size` taps.
    #[inline]
    fn span(size: usize) -> (isize, isize) {
        let anchor = ((size - 1) / 2) as isize;
        (-anchor, size as isize - 1 - anchor)
    }

    /// Row (dy) offsets covered by the footprint.
    pub fn row_span(&self) -> (isize, isize) {
        Self::span(self.rows)
    }

    /// Column (dx) offsets covered by the footprint.
    pub fn col_span(&self) -> (isize, isize) {
        Self::span(self.cols)
    }

    /// All `(dx, dy)` offsets of the footprint.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize)> {
        let (r0, r1) = self.row_span();
        let (c0, c1) = self.col_span();
        (r0..=r1).flat_map(move |dy| (c0..=c1).map(move |dx| (dx, dy)))
    }
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for StructuringElement {
    type Err = Error;

    /// Parses `"MxN"` as rows x cols.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("kernel must look like MxN, got {s:?}"));
        let (m, n) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let m = m.trim().parse().map_err(|_| bad())?;
        let n = n.trim().parse().map_err(|_| bad())?;
        Self::new(m, n)
    }
}

impl TryFrom<String> for StructuringElement {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StructuringElement> for String {
    fn from(se: StructuringElement) -> String {
        se.to_string()
    }
}

/// Morphology step applied before region extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Morphology {
    #[default]
    Erode,
    Dilate,
    None,
}

impl Morphology {
    pub fn apply(self, mask: &BinaryMask, se: StructuringElement) -> Result<BinaryMask> {
        match self {
            Morphology::Erode => erode(mask, se),
            Morphology::Dilate => dilate(mask, se),
            Morphology::None => Ok(mask.clone()),
        }
    }
}

impl FromStr for Morphology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "erode" => Ok(Morphology::Erode),
            "dilate" => Ok(Morphology::Dilate),
            "none" => Ok(Morphology::None),
            _ => Err(Error::InvalidConfig(format!(
                "morphology must be erode, dilate or none, got {s:?}"
            ))),
        }
    }
}

fn check_morph_input(mask: &BinaryMask, se: StructuringElement) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::EmptyInput("mask has zero width or height"));
    }
    if se.rows > mask.height || se.cols > mask.width {
        return Err(Error::ShapeMismatch(format!(
            "structuring element {se} exceeds mask {}x{}",
            mask.height, mask.width
        )));
    }
    Ok(())
}

/// Runs a 1-D window test along one axis using prefix sums of foreground
/// counts. `keep(count, window)` decides the output given how many window
/// taps are foreground and how many taps the full window has; taps outside
/// `0..len` are background.
fn sweep_line(
    line: &[bool],
    out: &mut [bool],
    (lo, hi): (isize, isize),
    keep: impl Fn(usize, usize) -> bool,
    prefix: &mut Vec<usize>,
) {
    let len = line.len() as isize;
    prefix.clear();
    prefix.push(0);
    let mut acc = 0;
    for &b in line {
        acc += b as usize;
        prefix.push(acc);
    }
    let window = (hi - lo + 1) as usize;
    for (i, o) in out.iter_mut().enumerate() {
        let a = (i as isize + lo).clamp(0, len) as usize;
        let b = (i as isize + hi + 1).clamp(0, len) as usize;
        *o = keep(prefix[b] - prefix[a], window);
    }
}

fn separable(
    mask: &BinaryMask,
    se: StructuringElement,
    keep: impl Fn(usize, usize) -> bool + Copy,
) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut prefix = Vec::with_capacity(w.max(h) + 1);

    let mut rows_done = vec![false; w * h];
    if se.cols == 1 {
        rows_done.copy_from_slice(&mask.data);
    } else {
        for y in 0..h {
            let r = y * w..(y + 1) * w;
            sweep_line(&mask.data[r.clone()], &mut rows_done[r], se.col_span(), keep, &mut prefix);
        }
    }
    if se.rows == 1 {
        return BinaryMask {
            width: w,
            height: h,
            data: rows_done,
        };
    }

    let mut out = vec![false; w * h];
    let mut column = vec![false; h];
    let mut column_out = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = rows_done[y * w + x];
        }
        sweep_line(&column, &mut column_out, se.row_span(), keep, &mut prefix);
        for y in 0..h {
            out[y * w + x] = column_out[y];
        }
    }
    BinaryMask {
        width: w,
        height: h,
        data: out,
    }
}

/// Foreground iff every footprint pixel is foreground.
pub fn erode(mask: &BinaryMask, se: StructuringElement) -> Result<BinaryMask> {
    check_morph_input(mask, se)?;
    Ok(separable(mask, se, |count, window| count == window))
}

/// Foreground iff any footprint pixel is foreground.
pub fn dilate(mask: &BinaryMask, se: StructuringElement) -> Result<BinaryMask> {
    check_morph_input(mask, se)?;
    Ok(separable(mask, se, |count, _| count > 0))
}

/// Pixel adjacency used when growing regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::InvalidConfig(format!("connectivity must be 4 or 8, got {v}"))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl Connectivity {
    pub fn neighbours(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(isize, isize); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Per-pixel region labels, `0` for background and `1..=R` for regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn region_count(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x as f64 && x <= self.max_x as f64 && y >= self.min_y as f64 && y <= self.max_y as f64
    }
}

/// Area and centroid of one labelled region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub label: u32,
    pub area: usize,
    /// Mean pixel coordinate `(x, y)`, not rounded.
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
}

/// Labels connected foreground components in raster order of their first
/// pixel and returns per-region statistics in label order.
pub fn label_regions(mask: &BinaryMask, connectivity: Connectivity) -> (LabelMap, Vec<RegionStats>) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut stats = Vec::new();
    let mut stack = Vec::new();
    let neighbours = connectivity.neighbours();

    for start in 0..w * h {
        if !mask.data[start] || labels[start] != 0 {
            continue;
        }
        let label = stats.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);

        let (mut area, mut sum_x, mut sum_y) = (0usize, 0u64, 0u64);
        let mut bbox = BoundingBox {
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
        };
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            area += 1;
            sum_x += x as u64;
            sum_y += y as u64;
            bbox.min_x = bbox.min_x.min(x);
            bbox.min_y = bbox.min_y.min(y);
            bbox.max_x = bbox.max_x.max(x);
            bbox.max_y = bbox.max_y.max(y);

            for &(dx, dy) in neighbours {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if mask.data[n] && labels[n] == 0 {
                    labels[n] = label;
                    stack.push(n);
                }
            }
        }
        stats.push(RegionStats {
            label,
            area,
            centroid: (sum_x as f64 / area as f64, sum_y as f64 / area as f64),
            bbox,
        });
    }

    (
        LabelMap {
            width: w,
            height: h,
            labels,
        },
        stats,
    )
}

/// Keeps regions whose area is strictly greater than `min_area`.
pub fn filter_by_area(regions: &[RegionStats], min_area: usize) -> Vec<RegionStats> {
    regions.iter().filter(|r| r.area > min_area).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_morph(mask: &BinaryMask, se: StructuringElement, all: bool) -> BinaryMask {
        BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            let mut hits = se.offsets().map(|(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < mask.width()
                    && (ny as usize) < mask.height()
                    && mask.get(nx as usize, ny as usize)
            });
            if all {
                hits.all(|b| b)
            } else {
                hits.any(|b| b)
            }
        })
    }

    fn square(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
        })
    }

    #[test]
    fn identity_footprint_is_noop() {
        let m = BinaryMask::from_fn(7, 5, |x, y| (x * 3 + y * 5) % 4 == 0);
        let se = StructuringElement::default();
        assert_eq!(erode(&m, se).unwrap(), m);
        assert_eq!(dilate(&m, se).unwrap(), m);
    }

    #[test]
    fn erode_square_to_center() {
        let m = square(5, 5, 1, 1, 3);
        let se = StructuringElement::new(3, 3).unwrap();
        let expected = brute_morph(&m, se, true);
        assert_eq!(expected.foreground_count(), 1);
        assert!(expected.get(2, 2));
        assert_eq!(erode(&m, se).unwrap(), expected);
    }

    #[test]
    fn dilate_point_to_square() {
        let m = square(5, 5, 2, 2, 1);
        let se = StructuringElement::new(3, 3).unwrap();
        let expected = brute_morph(&m, se, false);
        assert_eq!(expected, square(5, 5, 1, 1, 3));
        assert_eq!(dilate(&m, se).unwrap(), expected);
    }

    #[test]
    fn fixed_points() {
        let se = StructuringElement::new(3, 3).unwrap();
        assert_eq!(erode(&BinaryMask::new(6, 6), se).unwrap(), BinaryMask::new(6, 6));
        assert_eq!(dilate(&BinaryMask::filled(6, 6), se).unwrap(), BinaryMask::filled(6, 6));
    }

    #[test]
    fn even_footprint_anchor() {
        let se = StructuringElement::new(2, 4).unwrap();
        assert_eq!(se.row_span(), (0, 1));
        assert_eq!(se.col_span(), (-1, 2));
    }

    #[test]
    fn empty_mask_rejected() {
        let err = erode(&BinaryMask::new(0, 3), StructuringElement::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
        assert!(dilate(&BinaryMask::new(2, 2), StructuringElement::new(3, 1).unwrap()).is_err());
    }

    #[test]
    fn kernel_parsing() {
        assert_eq!("1x1".parse::<StructuringElement>().unwrap(), StructuringElement::default());
        let se: StructuringElement = "3X5".parse().unwrap();
        assert_eq!((se.rows(), se.cols()), (3, 5));
        assert!("0x1".parse::<StructuringElement>().is_err());
        assert!("3".parse::<StructuringElement>().is_err());
    }

    #[test]
    fn label_empty() {
        let (labels, regions) = label_regions(&BinaryMask::new(4, 3), Connectivity::Eight);
        assert!(regions.is_empty());
        assert!(labels.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn label_two_squares() {
        let m = square(10, 6, 1, 1, 2).union(&square(10, 6, 6, 3, 2));
        let (labels, regions) = label_regions(&m, Connectivity::Eight);
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0].area, 4);
        assert_eq!(regions[1].area, 4);
        assert_eq!(regions[0].centroid, (1.5, 1.5));
        assert_eq!(regions[1].centroid, (6.5, 3.5));
        assert_eq!(labels.get(7, 4), 2);
    }

    #[test]
    fn label_full_frame() {
        let (_, regions) = label_regions(&BinaryMask::filled(7, 4), Connectivity::Four);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].area, 28);
        assert_eq!(regions[0].centroid, (3.0, 1.5));
    }

    #[test]
    fn diagonal_connectivity() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x == y);
        assert_eq!(label_regions(&m, Connectivity::Eight).1.len(), 1);
        assert_eq!(label_regions(&m, Connectivity::Four).1.len(), 4);
    }

    fn stats(area: usize) -> RegionStats {
        RegionStats {
            label: 1,
            area,
            centroid: (0.0, 0.0),
            bbox: BoundingBox {
                min_x: 0,
                min_y: 0,
                max_x: 0,
                max_y: 0,
            },
        }
    }

    #[test]
    fn area_filter_is_strict() {
        assert!(filter_by_area(&[stats(50)], 50).is_empty());
        assert_eq!(filter_by_area(&[stats(51), stats(10)], 50), vec![stats(51)]);
        assert_eq!(filter_by_area(&[stats(1), stats(3)], 0).len(), 2);
    }

    /// Independent labelling oracle: union-find over 8/4 neighbours, then
    /// components renumbered by first raster pixel.
    fn union_find_labels(mask: &BinaryMask, conn: Connectivity) -> Vec<u32> {
        let (w, h) = mask.dims();
        let mut parent: Vec<usize> = (0..w * h).collect();
        fn find(p: &mut Vec<usize>, mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for y in 0..h {
            for x in 0..w {
                if !mask.get(x, y) {
                    continue;
                }
                for &(dx, dy) in conn.neighbours() {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    if mask.get(nx as usize, ny as usize) {
                        let a = find(&mut parent, y * w + x);
                        let b = find(&mut parent, ny as usize * w + nx as usize);
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut remap = std::collections::HashMap::new();
        let mut out = vec![0u32; w * h];
        for i in 0..w * h {
            if mask.data()[i] {
                let root = find(&mut parent, i);
                let next = remap.len() as u32 + 1;
                out[i] = *remap.entry(root).or_insert(next);
            }
        }
        out
    }

    fn arb_mask(max: usize) -> impl Strategy<Value = BinaryMask> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            prop::collection::vec(prop::bool::weighted(0.4), w * h)
                .prop_map(move |d| BinaryMask::from_vec(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn morphology_matches_brute_force(m in arb_mask(24), r in 1usize..6, c in 1usize..6) {
            prop_assume!(r <= m.height() && c <= m.width());
            let se = StructuringElement::new(r, c).unwrap();
            prop_assert_eq!(erode(&m, se).unwrap(), brute_morph(&m, se, true));
            prop_assert_eq!(dilate(&m, se).unwrap(), brute_morph(&m, se, false));
        }

        #[test]
        fn labelling_matches_union_find(m in arb_mask(20), four in any::<bool>()) {
            let conn = if four { Connectivity::Four } else { Connectivity::Eight };
            let (labels, regions) = label_regions(&m, conn);
            prop_assert_eq!(labels.labels(), &union_find_labels(&m, conn)[..]);
            let total: usize = regions.iter().map(|r| r.area).sum();
            prop_assert_eq!(total, m.foreground_count());
            for r in &regions {
                prop_assert!(r.bbox.contains(r.centroid.0, r.centroid.1));
                let n = labels.labels().iter().filter(|&&l| l == r.label).count();
                prop_assert_eq!(n, r.area);
            }
        }

        #[test]
        fn area_filter_monotone(areas in prop::collection::vec(0usize..120, 0..12), a in 0usize..100, b in 0usize..100) {
            let regions: Vec<_> = areas.iter().map(|&x| stats(x)).collect();
            let (lo, hi) = (a.min(b), a.max(b));
            let f_lo = filter_by_area(&regions, lo);
            let f_hi = filter_by_area(&regions, hi);
            prop_assert!(f_hi.len() <= f_lo.len());
            prop_assert_eq!(filter_by_area(&f_lo, lo), f_lo.clone());
            prop_assert!(f_hi.iter().all(|r| f_lo.contains(r)));
        }
    }
}
