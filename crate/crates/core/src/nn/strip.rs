use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::accumulate_shifted;
use super::{pad_before, random_weights, Conv2d, FeatureMap};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `1 x k`, taps along the width.
    Horizontal,
    /// `k x 1`, taps along the height.
    Vertical,
}

/// One-dimensional dilated kernel, weights laid out `out x in x length`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripKernel<T> {
    pub orientation: Orientation,
    pub length: usize,
    pub dilation: usize,
    pub out_channels: usize,
    pub in_channels: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> StripKernel<T> {
    pub fn zeros(orientation: Orientation, length: usize, dilation: usize, out_channels: usize, in_channels: usize) -> Self {
        Self {
            orientation,
            length,
            dilation,
            out_channels,
            in_channels,
            weights: vec![T::zero(); out_channels * in_channels * length],
            bias: vec![T::zero(); out_channels],
        }
    }

    /// Channel-preserving kernel whose center tap is 1.
    pub fn identity(orientation: Orientation, channels: usize) -> Self {
        let mut k = Self::zeros(orientation, 1, 1, channels, channels);
        for c in 0..channels {
            k.weights[c * channels + c] = T::one();
        }
        k
    }

    pub fn random(
        orientation: Orientation,
        length: usize,
        dilation: usize,
        out_channels: usize,
        in_channels: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * length;
        Self {
            orientation,
            length,
            dilation,
            out_channels,
            in_channels,
            weights: random_weights(out_channels * fan_in, fan_in, rng),
            bias: random_weights(out_channels, fan_in, rng),
        }
    }

    /// Footprint along the strip axis, `(length - 1) * dilation + 1`.
    pub fn extent(&self) -> usize {
        (self.length - 1) * self.dilation + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.dilation == 0 || self.out_channels == 0 || self.in_channels == 0 {
            return Err(Error::ShapeMismatch("strip kernel dims must be positive".into()));
        }
        if self.weights.len() != self.out_channels * self.in_channels * self.length
            || self.bias.len() != self.out_channels
        {
            return Err(Error::ShapeMismatch(format!(
                "strip {}x{}x{} has {} weights and {} biases",
                self.out_channels,
                self.in_channels,
                self.length,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, t: usize) -> T {
        self.weights[(o * self.in_channels + i) * self.length + t]
    }

    /// The same kernel as a `1 x k` or `k x 1` dense convolution.
    pub fn to_dense(&self) -> Conv2d<T> {
        let (kernel, dilation) = match self.orientation {
            Orientation::Horizontal => ((1, self.length), (1, self.dilation)),
            Orientation::Vertical => ((self.length, 1), (self.dilation, 1)),
        };
        Conv2d {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            kernel,
            dilation,
            weights: self.weights.clone(),
            bias: self.bias.clone(),
        }
    }
}

/// Strip convolution evaluated along its single axis.
pub fn strip_conv<T: Real>(x: &FeatureMap<T>, kern: &StripKernel<T>) -> Result<FeatureMap<T>> {
    kern.validate()?;
    if x.channels() != kern.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, strip expects {}",
            x.channels(),
            kern.in_channels
        )));
    }
    let (h, w) = (x.height(), x.width());
    let pad = pad_before(kern.length, kern.dilation) as isize;
    let mut out = FeatureMap::zeros(kern.out_channels, h, w);
    for o in 0..kern.out_channels {
        let plane = out.channel_mut(o);
        plane.fill(kern.bias[o]);
        for i in 0..kern.in_channels {
            let src = x.channel(i);
            for t in 0..kern.length {
                let wgt = kern.weight(o, i, t);
                if wgt == T::zero() {
                    continue;
                }
                let shift = (t * kern.dilation) as isize - pad;
                let (dy, dx) = match kern.orientation {
                    Orientation::Horizontal => (0, shift),
                    Orientation::Vertical => (shift, 0),
                };
                accumulate_shifted(plane, src, h, w, dy, dx, wgt);
            }
        }
    }
    Ok(out)
}

/// Vertical strip followed by horizontal strip at one dilation rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AsconvBranch<T> {
    pub vertical: StripKernel<T>,
    pub horizontal: StripKernel<T>,
}

impl<T: Real> AsconvBranch<T> {
    pub fn random(length: usize, dilation: usize, out_channels: usize, in_channels: usize, rng: &mut impl Rng) -> Self {
        Self {
            vertical: StripKernel::random(Orientation::Vertical, length, dilation, out_channels, in_channels, rng),
            horizontal: StripKernel::random(Orientation::Horizontal, length, dilation, out_channels, out_channels, rng),
        }
    }

    pub fn zeros(length: usize, dilation: usize, out_channels: usize, in_channels: usize) -> Self {
        Self {
            vertical: StripKernel::zeros(Orientation::Vertical, length, dilation, out_channels, in_channels),
            horizontal: StripKernel::zeros(Orientation::Horizontal, length, dilation, out_channels, out_channels),
        }
    }

    pub fn dilation(&self) -> usize {
        self.vertical.dilation
    }

    pub fn in_channels(&self) -> usize {
        self.vertical.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.horizontal.out_channels
    }

    pub fn validate(&self) -> Result<()> {
        self.vertical.validate()?;
        self.horizontal.validate()?;
        if self.vertical.orientation != Orientation::Vertical || self.horizontal.orientation != Orientation::Horizontal {
            return Err(Error::ShapeMismatch("branch needs a vertical then a horizontal strip".into()));
        }
        if self.vertical.dilation != self.horizontal.dilation {
            return Err(Error::ShapeMismatch("branch strips must share a dilation".into()));
        }
        if self.horizontal.in_channels != self.vertical.out_channels
            || self.horizontal.out_channels != self.vertical.out_channels
        {
            return Err(Error::ShapeMismatch("horizontal strip must map out->out channels".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        strip_conv(&strip_conv(x, &self.vertical)?, &self.horizontal)
    }
}

/// Parallel strip branches at different dilations, summed, then projected 1x1.
#[derive(Debug, Clone, PartialEq)]
pub struct AsconvParams<T> {
    pub branches: Vec<AsconvBranch<T>>,
    pub projection: Conv2d<T>,
}

impl<T: Real> AsconvParams<T> {
    pub fn random(in_channels: usize, out_channels: usize, length: usize, dilations: &[usize], rng: &mut impl Rng) -> Self {
        Self {
            branches: dilations
                .iter()
                .map(|&d| AsconvBranch::random(length, d, out_channels, in_channels, rng))
                .collect(),
            projection: Conv2d::random(out_channels, out_channels, (1, 1), (1, 1), rng),
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize, length: usize, dilations: &[usize]) -> Self {
        Self {
            branches: dilations
                .iter()
                .map(|&d| AsconvBranch::zeros(length, d, out_channels, in_channels))
                .collect(),
            projection: Conv2d::zeros(out_channels, out_channels, (1, 1), (1, 1)),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.branches.first().map_or(0, |b| b.in_channels())
    }

    pub fn out_channels(&self) -> usize {
        self.projection.out_channels
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.branches.first().ok_or(Error::EmptyInput("ASConv needs a branch"))?;
        for b in &self.branches {
            b.validate()?;
            if b.in_channels() != first.in_channels() || b.out_channels() != first.out_channels() {
                return Err(Error::ShapeMismatch("ASConv branches disagree on channels".into()));
            }
        }
        self.projection.validate()?;
        if self.projection.kernel != (1, 1) || self.projection.in_channels != first.out_channels() {
            return Err(Error::ShapeMismatch("ASConv projection must be 1x1 over branch channels".into()));
        }
        Ok(())
    }
}

pub fn asconv_forward<T: Real>(x: &FeatureMap<T>, p: &AsconvParams<T>) -> Result<FeatureMap<T>> {
    p.validate()?;
    let mut sum: Option<FeatureMap<T>> = None;
    for branch in &p.branches {
        let y = branch.forward(x)?;
        match sum.as_mut() {
            Some(s) => s.add_assign(&y)?,
            None => sum = Some(y),
        }
    }
    p.projection.forward(&sum.expect("validated non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv2d_dense;
    use rand::SeedableRng;

    fn impulse(h: usize, w: usize, y: usize, x: usize) -> FeatureMap<f32> {
        FeatureMap::from_fn(1, h, w, |_, yy, xx| if (yy, xx) == (y, x) { 1.0 } else { 0.0 })
    }

    fn ones_strip(o: Orientation, d: usize) -> StripKernel<f32> {
        StripKernel {
            orientation: o,
            length: 3,
            dilation: d,
            out_channels: 1,
            in_channels: 1,
            weights: vec![1.0; 3],
            bias: vec![0.0],
        }
    }

    #[test]
    fn unit_strip_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = FeatureMap::<f32>::random(2, 4, 6, &mut rng);
        for o in [Orientation::Horizontal, Orientation::Vertical] {
            assert_eq!(strip_conv(&x, &StripKernel::identity(o, 2)).unwrap(), x);
        }
    }

    #[test]
    fn dilated_horizontal_taps() {
        let y = strip_conv(&impulse(5, 9, 2, 4), &ones_strip(Orientation::Horizontal, 2)).unwrap();
        let hot: Vec<(usize, usize)> = (0..5)
            .flat_map(|r| (0..9).map(move |c| (r, c)))
            .filter(|&(r, c)| y.get(0, r, c) != 0.0)
            .collect();
        assert_eq!(hot, vec![(2, 2), (2, 4), (2, 6)]);
        assert!(hot.iter().all(|&(r, c)| y.get(0, r, c) == 1.0));
    }

    #[test]
    fn cascade_is_outer_product() {
        let x = impulse(7, 7, 3, 3);
        let v = strip_conv(&x, &ones_strip(Orientation::Vertical, 1)).unwrap();
        let vh = strip_conv(&v, &ones_strip(Orientation::Horizontal, 1)).unwrap();
        let expected = FeatureMap::from_fn(1, 7, 7, |_, y, x| {
            if (2..=4).contains(&y) && (2..=4).contains(&x) { 1.0 } else { 0.0 }
        });
        assert_eq!(vh, expected);
    }

    #[test]
    fn matches_embedded_dense_kernel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for (o, k, d) in [(Orientation::Horizontal, 3, 2), (Orientation::Vertical, 4, 3), (Orientation::Horizontal, 2, 5)] {
            let x = FeatureMap::<f32>::random(3, 9, 8, &mut rng);
            let kern = StripKernel::random(o, k, d, 2, 3, &mut rng);
            let a = strip_conv(&x, &kern).unwrap();
            let b = conv2d_dense(&x, &kern.to_dense()).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn asconv_identity_and_symmetry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = FeatureMap::<f32>::random(2, 5, 5, &mut rng);
        let ident = AsconvParams {
            branches: vec![AsconvBranch {
                vertical: StripKernel::identity(Orientation::Vertical, 2),
                horizontal: StripKernel::identity(Orientation::Horizontal, 2),
            }],
            projection: Conv2d::identity(2),
        };
        assert_eq!(asconv_forward(&x, &ident).unwrap(), x);

        let branch = AsconvBranch::random(3, 2, 2, 2, &mut rng);
        let single = AsconvParams {
            branches: vec![branch.clone()],
            projection: Conv2d::identity(2),
        };
        let mut half = Conv2d::identity(2);
        half.weights.iter_mut().for_each(|w| *w *= 0.5);
        let doubled = AsconvParams {
            branches: vec![branch.clone(), branch],
            projection: half,
        };
        let a = asconv_forward(&x, &single).unwrap();
        let b = asconv_forward(&x, &doubled).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-6);
    }

    #[test]
    fn asconv_rejects_mismatched_branches() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut p = AsconvParams::<f32>::random(2, 3, 3, &[1, 2], &mut rng);
        p.branches[1] = AsconvBranch::random(3, 2, 4, 2, &mut rng);
        assert!(p.validate().is_err());
        let mut p = AsconvParams::<f32>::random(2, 3, 3, &[1], &mut rng);
        p.branches[0].horizontal.dilation = 4;
        assert!(asconv_forward(&FeatureMap::zeros(2, 4, 4), &p).is_err());
        let empty = AsconvParams::<f32> { branches: vec![], projection: Conv2d::identity(2) };
        assert!(empty.validate().is_err());
    }
}
