//! Forward passes for atrous strip convolution blocks.
//!
//! All convolutions here are stride 1 with zero "same" padding: for a
//! kernel of `k` taps at dilation `d` the extent is `(k - 1) * d + 1` and
//! `((k - 1) * d) / 2` zeros are padded before the first sample.

mod ascspp;
mod attention;
pub mod check;
mod conv;
pub mod reference;
mod strip;
pub mod weights;

pub use ascspp::AscsppParams;
pub use attention::ChannelAttention;
pub use conv::{conv2d_dense, Conv2d};
pub use strip::{asconv_forward, strip_conv, AsconvBranch, AsconvParams, Orientation, StripKernel};

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense `channels x height x width` tensor, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature map dims must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "feature map data has {} values, {channels}x{height}x{width} needs {}",
                data.len(),
                channels * height * width
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("feature map values must be finite".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn random(channels: usize, height: usize, width: usize, rng: &mut impl Rng) -> Self {
        Self::from_fn(channels, height, width, |_, _, _| T::lit(rng.gen_range(-1.0..1.0)))
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "cannot add {:?} to {:?}",
                other.shape(),
                self.shape()
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Stacks maps with equal spatial dims along the channel axis.
    pub fn concat(maps: &[Self]) -> Result<Self> {
        let first = maps.first().ok_or(Error::EmptyInput("nothing to concatenate"))?;
        let (h, w) = (first.height, first.width);
        if let Some(bad) = maps.iter().find(|m| (m.height, m.width) != (h, w)) {
            return Err(Error::ShapeMismatch(format!(
                "concat spatial dims {:?} vs {:?}",
                (bad.height, bad.width),
                (h, w)
            )));
        }
        let data = maps.iter().flat_map(|m| m.data.iter().copied()).collect();
        Ok(Self {
            channels: maps.iter().map(|m| m.channels).sum(),
            height: h,
            width: w,
            data,
        })
    }

    /// Per-channel spatial mean.
    pub fn global_average_pool(&self) -> Vec<T> {
        let n = T::from_count(self.height * self.width);
        (0..self.channels)
            .map(|c| self.channel(c).iter().copied().sum::<T>() / n)
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        (self.shape() == other.shape()).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
                .fold(0.0, f64::max)
        })
    }

    pub fn cast<U: Real>(&self) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Zeros padded before the first tap for `taps` samples at `dilation`.
#[inline]
pub(crate) fn pad_before(taps: usize, dilation: usize) -> usize {
    ((taps - 1) * dilation) / 2
}

pub(crate) fn random_weights<T: Real>(n: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<T> {
    let scale = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| T::lit(rng.gen_range(-scale..scale))).collect()
}
