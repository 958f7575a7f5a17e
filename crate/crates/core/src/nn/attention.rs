use rand::Rng;

use super::{Conv2d, FeatureMap};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Squeeze-style channel gate where the excitation is a single 1x1
/// convolution over the pooled channel vector followed by a logistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAttention<T> {
    pub conv: Conv2d<T>,
}

#[inline]
fn logistic<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Real> ChannelAttention<T> {
    pub fn new(conv: Conv2d<T>) -> Result<Self> {
        let att = Self { conv };
        att.validate()?;
        Ok(att)
    }

    pub fn zeros(channels: usize) -> Self {
        Self {
            conv: Conv2d::zeros(channels, channels, (1, 1), (1, 1)),
        }
    }

    pub fn random(channels: usize, rng: &mut impl Rng) -> Self {
        Self {
            conv: Conv2d::random(channels, channels, (1, 1), (1, 1), rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.conv.in_channels
    }

    pub fn validate(&self) -> Result<()> {
        self.conv.validate()?;
        if self.conv.kernel != (1, 1) || self.conv.in_channels != self.conv.out_channels {
            return Err(Error::ShapeMismatch("channel attention needs a CxCx1x1 conv".into()));
        }
        Ok(())
    }

    /// Per-channel gate values in (0, 1).
    pub fn gates(&self, x: &FeatureMap<T>) -> Result<Vec<T>> {
        self.validate()?;
        if x.channels() != self.channels() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} channels, attention expects {}",
                x.channels(),
                self.channels()
            )));
        }
        Ok(self
            .conv
            .apply_to_vector(&x.global_average_pool())?
            .into_iter()
            .map(logistic)
            .collect())
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let gates = self.gates(x)?;
        let mut out = x.clone();
        for (c, &g) in gates.iter().enumerate() {
            out.channel_mut(c).iter_mut().for_each(|v| *v *= g);
        }
        Ok(out)
    }
}
