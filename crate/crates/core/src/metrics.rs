//! Pixel-level segmentation metrics for the two-class (background,
//! foreground) case, with micro-averaging over image sets.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::scalar::Real;

/// Pixel counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts for the complementary (background) class.
    pub fn complement(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Foreground-class counts of `pred` against `gt`.
pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    gt.ensure_same_dims(pred)?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// A ratio plus whether its denominator was nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score<T> {
    pub value: T,
    pub defined: bool,
}

fn ratio<T: Real>(num: u64, den: u64) -> Score<T> {
    if den == 0 {
        Score {
            value: T::zero(),
            defined: false,
        }
    } else {
        Score {
            value: T::lit(num as f64) / T::lit(den as f64),
            defined: true,
        }
    }
}

/// `tp / (tp + fp + fn)`; a class absent from both masks scores 1.
pub fn iou<T: Real>(c: &ConfusionCounts) -> T {
    let den = c.tp + c.fp + c.fn_;
    if den == 0 {
        T::one()
    } else {
        T::lit(c.tp as f64) / T::lit(den as f64)
    }
}

/// Unweighted mean of per-class IoU.
pub fn miou<T: Real>(per_class: &[ConfusionCounts]) -> T {
    assert!(!per_class.is_empty(), "mIoU needs at least one class");
    per_class.iter().map(iou::<T>).sum::<T>() / T::from_count(per_class.len())
}

pub fn precision<T: Real>(c: &ConfusionCounts) -> Score<T> {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall<T: Real>(c: &ConfusionCounts) -> Score<T> {
    ratio(c.tp, c.tp + c.fn_)
}

/// Harmonic mean; undefined (0) when either input is undefined or both are 0.
pub fn f1<T: Real>(p: Score<T>, r: Score<T>) -> Score<T> {
    let sum = p.value + r.value;
    if !p.defined || !r.defined || sum == T::zero() {
        return Score {
            value: T::zero(),
            defined: false,
        };
    }
    Score {
        value: T::lit(2.0) * p.value * r.value / sum,
        defined: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub counts: ConfusionCounts,
    pub iou_foreground: f64,
    pub iou_background: f64,
    pub miou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
}

impl Scores {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let p = precision::<f64>(&counts);
        let r = recall::<f64>(&counts);
        let f = f1(p, r);
        Self {
            counts,
            iou_foreground: iou(&counts),
            iou_background: iou(&counts.complement()),
            miou: miou(&[counts.complement(), counts]),
            precision: p.value,
            recall: r.value,
            f1: f.value,
            precision_defined: p.defined,
            recall_defined: r.defined,
            f1_defined: f.defined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub name: String,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub image_count: usize,
    /// Micro-averaged: counts summed over images, then ratios taken.
    #[serde(flatten)]
    pub overall: Scores,
    pub per_image: Vec<ImageScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
}

impl MetricsReport {
    pub fn from_images(per_image: Vec<ImageScores>) -> Self {
        let total = per_image.iter().map(|s| s.scores.counts).sum();
        Self {
            image_count: per_image.len(),
            overall: Scores::from_counts(total),
            per_image,
            missing: Vec::new(),
        }
    }

    /// Aligned text table with Precision, Recall, Mean IoU and F1 columns.
    pub fn to_table(&self, label: &str) -> String {
        let o = &self.overall;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} | {:>9} | {:>9} | {:>9} | {:>9} | {:>6}",
            "Name", "Precision", "Recall", "Mean IoU", "F1 Score", "Images"
        );
        let _ = writeln!(s, "{}", "-".repeat(16 + 4 * 12 + 9 + 3));
        let _ = writeln!(
            s,
            "{:<16} | {:>9.4} | {:>9.4} | {:>9.4} | {:>9.4} | {:>6}",
            label, o.precision, o.recall, o.miou, o.f1, self.image_count
        );
        let _ = writeln!(s, "foreground IoU {:.4}, background IoU {:.4}", o.iou_foreground, o.iou_background);
        let undefined: Vec<&str> = [
            (!o.precision_defined).then_some("precision"),
            (!o.recall_defined).then_some("recall"),
            (!o.f1_defined).then_some("f1"),
        ]
        .into_iter()
        .flatten()
        .collect();
        if !undefined.is_empty() {
            let _ = writeln!(s, "undefined (empty denominator): {}", undefined.join(", "));
        }
        s
    }
}

/// Scores named `(pred, gt)` pairs.
pub fn evaluate_pairs<'a, I>(pairs: I) -> Result<MetricsReport>
where
    I: IntoIterator<Item = (String, &'a BinaryMask, &'a BinaryMask)>,
{
    let per_image = pairs
        .into_iter()
        .map(|(name, pred, gt)| {
            Ok(ImageScores {
                name,
                scores: Scores::from_counts(confusion(pred, gt)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_images(per_image))
}

/// Pairs `*.pgm` files by file name.
pub fn batch_eval(pred_dir: &Path, gt_dir: &Path, allow_missing: bool) -> Result<MetricsReport> {
    let names = |dir: &Path| -> Result<BTreeSet<String>> {
        Ok(crate::io::sorted_files(dir, "pgm")?
            .into_iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect())
    };
    let pred = names(pred_dir)?;
    let gt = names(gt_dir)?;
    let missing: Vec<String> = pred.symmetric_difference(&gt).cloned().collect();
    if !missing.is_empty() && !allow_missing {
        return Err(Error::UnmatchedFiles(missing));
    }

    let mut per_image = Vec::new();
    for name in pred.intersection(&gt) {
        let p = crate::io::pgm::read_mask(&pred_dir.join(name))?;
        let g = crate::io::pgm::read_mask(&gt_dir.join(name))?;
        per_image.push(ImageScores {
            name: name.clone(),
            scores: Scores::from_counts(confusion(&p, &g)?),
        });
    }
    let mut report = MetricsReport::from_images(per_image);
    report.missing = missing;
    Ok(report)
}
