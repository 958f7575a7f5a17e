//! Randomized equivalence suite: fast `f32` kernels against the `f64`
//! reference implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{reference, strip_conv, AscsppParams, AsconvParams, FeatureMap, Orientation, StripKernel};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub cases: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            cases: 200,
            seed: 0,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Strip,
    Asconv,
    Ascspp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub index: usize,
    pub kind: CaseKind,
    /// `(channels, height, width)` of the input.
    pub shape: (usize, usize, usize),
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportResult {
    pub orientation: Orientation,
    pub length: usize,
    pub dilation: usize,
    pub expected: usize,
    pub along_axis: usize,
    pub across_axis: usize,
}

impl SupportResult {
    pub fn ok(&self) -> bool {
        self.along_axis == self.expected && self.across_axis == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub config: CheckConfig,
    pub cases: Vec<CaseResult>,
    pub support: Vec<SupportResult>,
    pub max_deviation: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.config.tolerance && self.support.iter().all(SupportResult::ok)
    }

    pub fn max_for(&self, kind: CaseKind) -> f64 {
        self.cases
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.max_deviation)
            .fold(0.0, f64::max)
    }
}

fn orientation(rng: &mut impl Rng) -> Orientation {
    if rng.gen() {
        Orientation::Horizontal
    } else {
        Orientation::Vertical
    }
}

/// Nonzero taps of the response to a unit impulse, along and across the strip.
pub fn impulse_support(orientation: Orientation, length: usize, dilation: usize, rng: &mut impl Rng) -> Result<SupportResult> {
    let mut kern = StripKernel::<f32>::random(orientation, length, dilation, 1, 1, rng);
    kern.bias = vec![0.0];
    // keep every tap clearly nonzero
    for w in &mut kern.weights {
        if w.abs() < 0.05 {
            *w = 0.5;
        }
    }
    let extent = kern.extent();
    let size = 2 * extent + 1;
    let center = size / 2;
    let x = FeatureMap::from_fn(1, size, size, |_, y, xx| if (y, xx) == (center, center) { 1.0f32 } else { 0.0 });
    let y = strip_conv(&x, &kern)?;
    let (mut rows, mut cols) = (vec![false; size], vec![false; size]);
    for r in 0..size {
        for c in 0..size {
            if y.get(0, r, c) != 0.0 {
                rows[r] = true;
                cols[c] = true;
            }
        }
    }
    let span = |v: &[bool]| match (v.iter().position(|&b| b), v.iter().rposition(|&b| b)) {
        (Some(a), Some(b)) => b - a + 1,
        _ => 0,
    };
    let (along, across) = match orientation {
        Orientation::Horizontal => (span(&cols), span(&rows)),
        Orientation::Vertical => (span(&rows), span(&cols)),
    };
    Ok(SupportResult {
        orientation,
        length,
        dilation,
        expected: extent,
        along_axis: along,
        across_axis: across,
    })
}

pub fn run(config: CheckConfig) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cases = Vec::with_capacity(config.cases);
    let mut support = Vec::new();
    for index in 0..config.cases {
        let kind = match index % 3 {
            0 => CaseKind::Strip,
            1 => CaseKind::Asconv,
            _ => CaseKind::Ascspp,
        };
        let c = rng.gen_range(1..=4);
        let h = rng.gen_range(1..=17);
        let w = rng.gen_range(1..=17);
        let x = FeatureMap::<f32>::random(c, h, w, &mut rng);
        let max_deviation = match kind {
            CaseKind::Strip => {
                let o = orientation(&mut rng);
                let k = rng.gen_range(1..=5);
                let d = rng.gen_range(1..=4);
                let kern = StripKernel::random(o, k, d, rng.gen_range(1..=4), c, &mut rng);
                support.push(impulse_support(o, k, d, &mut rng)?);
                strip_conv(&x, &kern)?
                    .cast::<f64>()
                    .max_abs_diff(&reference::strip(&x, &kern))
                    .expect("same shape")
            }
            CaseKind::Asconv => {
                let n = rng.gen_range(1..=3);
                let rates: Vec<usize> = (1..=n).collect();
                let p = AsconvParams::random(c, rng.gen_range(1..=4), rng.gen_range(1..=5), &rates, &mut rng);
                super::asconv_forward(&x, &p)?
                    .cast::<f64>()
                    .max_abs_diff(&reference::asconv(&x, &p))
                    .expect("same shape")
            }
            CaseKind::Ascspp => {
                let pool = [1usize, 2, 3, 6];
                let rates: Vec<usize> = pool.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
                let rates = if rates.is_empty() { vec![1] } else { rates };
                let p = AscsppParams::random(c, rng.gen_range(1..=3), rng.gen_range(1..=4), &rates, &mut rng);
                p.forward(&x)?
                    .cast::<f64>()
                    .max_abs_diff(&reference::ascspp(&x, &p))
                    .expect("same shape")
            }
        };
        cases.push(CaseResult {
            index,
            kind,
            shape: (c, h, w),
            max_deviation,
        });
    }
    let max_deviation = cases.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
    Ok(CheckReport {
        config,
        cases,
        support,
        max_deviation,
    })
}
