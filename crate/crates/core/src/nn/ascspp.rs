use rand::Rng;

use super::{asconv_forward, AsconvParams, Conv2d, FeatureMap};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spatial pyramid over atrous strip convolutions.
///
/// Branches run in parallel on the input: a 1x1 conv, one ASConv per
/// rate, and a global-pool branch (pool, 1x1 conv, broadcast). Their
/// outputs are concatenated, projected back to the input width with a
/// 1x1 conv, and the input is added back.
#[derive(Debug, Clone, PartialEq)]
pub struct AscsppParams<T> {
    pub pointwise: Conv2d<T>,
    pub branches: Vec<AsconvParams<T>>,
    pub pool: Conv2d<T>,
    pub projection: Conv2d<T>,
}

impl<T: Real> AscsppParams<T> {
    pub const DEFAULT_RATES: [usize; 4] = [1, 6, 12, 18];
    pub const DEFAULT_STRIP_LENGTH: usize = 3;

    /// Each rate's ASConv has a single branch at that rate.
    pub fn random(in_channels: usize, branch_channels: usize, strip_length: usize, rates: &[usize], rng: &mut impl Rng) -> Self {
        let concat = branch_channels * (rates.len() + 2);
        Self {
            pointwise: Conv2d::random(branch_channels, in_channels, (1, 1), (1, 1), rng),
            branches: rates
                .iter()
                .map(|&r| AsconvParams::random(in_channels, branch_channels, strip_length, &[r], rng))
                .collect(),
            pool: Conv2d::random(branch_channels, in_channels, (1, 1), (1, 1), rng),
            projection: Conv2d::random(in_channels, concat, (1, 1), (1, 1), rng),
        }
    }

    pub fn zeros(in_channels: usize, branch_channels: usize, strip_length: usize, rates: &[usize]) -> Self {
        let concat = branch_channels * (rates.len() + 2);
        Self {
            pointwise: Conv2d::zeros(branch_channels, in_channels, (1, 1), (1, 1)),
            branches: rates
                .iter()
                .map(|&r| AsconvParams::zeros(in_channels, branch_channels, strip_length, &[r]))
                .collect(),
            pool: Conv2d::zeros(branch_channels, in_channels, (1, 1), (1, 1)),
            projection: Conv2d::zeros(in_channels, concat, (1, 1), (1, 1)),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.pointwise.in_channels
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.in_channels();
        for conv in [&self.pointwise, &self.pool, &self.projection] {
            conv.validate()?;
            if conv.kernel != (1, 1) {
                return Err(Error::ShapeMismatch("ASCSPP 1x1 convs must be 1x1".into()));
            }
        }
        if self.pool.in_channels != c {
            return Err(Error::ShapeMismatch("pool branch input channels differ".into()));
        }
        let mut concat = self.pointwise.out_channels + self.pool.out_channels;
        for b in &self.branches {
            b.validate()?;
            if b.in_channels() != c {
                return Err(Error::ShapeMismatch("ASConv branch input channels differ".into()));
            }
            concat += b.out_channels();
        }
        if self.projection.in_channels != concat {
            return Err(Error::ShapeMismatch(format!(
                "projection expects {} channels, branches produce {concat}",
                self.projection.in_channels
            )));
        }
        if self.projection.out_channels != c {
            return Err(Error::ShapeMismatch("residual needs projection output = input channels".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        self.validate()?;
        if x.channels() != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} channels, ASCSPP expects {}",
                x.channels(),
                self.in_channels()
            )));
        }
        let mut parts = Vec::with_capacity(self.branches.len() + 2);
        parts.push(self.pointwise.forward(x)?);
        for b in &self.branches {
            parts.push(asconv_forward(x, b)?);
        }
        let pooled = self.pool.apply_to_vector(&x.global_average_pool())?;
        parts.push(FeatureMap::from_fn(pooled.len(), x.height(), x.width(), |c, _, _| pooled[c]));

        let mut out = self.projection.forward(&FeatureMap::concat(&parts)?)?;
        out.add_assign(x)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_params_pass_input_through() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let x = FeatureMap::<f32>::random(3, 8, 8, &mut rng);
        let p = AscsppParams::zeros(3, 2, 3, &AscsppParams::<f32>::DEFAULT_RATES);
        assert_eq!(p.forward(&x).unwrap(), x);
    }

    #[test]
    fn preserves_spatial_dims() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let p = AscsppParams::<f32>::random(2, 2, 3, &[1, 6, 12, 18], &mut rng);
        for (h, w) in [(1, 1), (1, 17), (17, 1), (5, 9), (17, 17)] {
            let x = FeatureMap::random(2, h, w, &mut rng);
            assert_eq!(p.forward(&x).unwrap().shape(), (2, h, w));
        }
    }

    #[test]
    fn shape_errors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        let mut p = AscsppParams::<f32>::random(2, 2, 3, &[1, 2], &mut rng);
        assert!(p.forward(&FeatureMap::zeros(3, 4, 4)).is_err());
        p.projection = Conv2d::zeros(3, 8, (1, 1), (1, 1));
        assert!(p.validate().is_err());
    }
}
