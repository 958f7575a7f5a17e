use rand::Rng;

use super::{pad_before, random_weights, FeatureMap};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense 2-D convolution weights `out x in x kh x kw` plus per-output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: (usize, usize),
    pub dilation: (usize, usize),
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: (usize, usize),
        dilation: (usize, usize),
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        let conv = Self {
            out_channels,
            in_channels,
            kernel,
            dilation,
            weights,
            bias,
        };
        conv.validate()?;
        Ok(conv)
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel: (usize, usize), dilation: (usize, usize)) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel,
            dilation,
            weights: vec![T::zero(); out_channels * in_channels * kernel.0 * kernel.1],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn pointwise(out_channels: usize, in_channels: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        Self::new(out_channels, in_channels, (1, 1), (1, 1), weights, bias)
    }

    /// 1x1 identity projection, zero bias.
    pub fn identity(channels: usize) -> Self {
        let mut conv = Self::zeros(channels, channels, (1, 1), (1, 1));
        for c in 0..channels {
            conv.weights[c * channels + c] = T::one();
        }
        conv
    }

    pub fn random(
        out_channels: usize,
        in_channels: usize,
        kernel: (usize, usize),
        dilation: (usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * kernel.0 * kernel.1;
        Self {
            out_channels,
            in_channels,
            kernel,
            dilation,
            weights: random_weights(out_channels * fan_in, fan_in, rng),
            bias: random_weights(out_channels, fan_in, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (kh, kw) = self.kernel;
        if self.out_channels == 0 || self.in_channels == 0 || kh == 0 || kw == 0 {
            return Err(Error::ShapeMismatch("convolution dims must be positive".into()));
        }
        if self.dilation.0 == 0 || self.dilation.1 == 0 {
            return Err(Error::ShapeMismatch("dilation must be at least 1".into()));
        }
        let n = self.out_channels * self.in_channels * kh * kw;
        if self.weights.len() != n || self.bias.len() != self.out_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv {}x{}x{kh}x{kw} has {} weights and {} biases",
                self.out_channels,
                self.in_channels,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> T {
        let (kh, kw) = self.kernel;
        self.weights[((o * self.in_channels + i) * kh + ky) * kw + kx]
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        conv2d_dense(x, self)
    }

    /// Applies a 1x1 convolution to a bare channel vector.
    pub fn apply_to_vector(&self, v: &[T]) -> Result<Vec<T>> {
        if self.kernel != (1, 1) || v.len() != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "vector of {} channels into {}x{} kernel over {} channels",
                v.len(),
                self.kernel.0,
                self.kernel.1,
                self.in_channels
            )));
        }
        Ok((0..self.out_channels)
            .map(|o| {
                let row = &self.weights[o * self.in_channels..(o + 1) * self.in_channels];
                self.bias[o] + row.iter().zip(v).map(|(&w, &x)| w * x).sum::<T>()
            })
            .collect())
    }
}

/// Same-padded, stride-1 dilated cross-correlation.
pub fn conv2d_dense<T: Real>(x: &FeatureMap<T>, conv: &Conv2d<T>) -> Result<FeatureMap<T>> {
    conv.validate()?;
    if x.channels() != conv.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, convolution expects {}",
            x.channels(),
            conv.in_channels
        )));
    }
    let (h, w) = (x.height(), x.width());
    let (kh, kw) = conv.kernel;
    let (dh, dw) = conv.dilation;
    let (ph, pw) = (pad_before(kh, dh) as isize, pad_before(kw, dw) as isize);

    let mut out = FeatureMap::zeros(conv.out_channels, h, w);
    for o in 0..conv.out_channels {
        let plane = out.channel_mut(o);
        plane.fill(conv.bias[o]);
        for i in 0..conv.in_channels {
            let src = x.channel(i);
            for ky in 0..kh {
                let dy = (ky * dh) as isize - ph;
                for kx in 0..kw {
                    let wgt = conv.weight(o, i, ky, kx);
                    if wgt == T::zero() {
                        continue;
                    }
                    let dx = (kx * dw) as isize - pw;
                    accumulate_shifted(plane, src, h, w, dy, dx, wgt);
                }
            }
        }
    }
    Ok(out)
}

/// `plane[y][x] += wgt * src[y + dy][x + dx]` wherever the source is in bounds.
#[inline]
pub(crate) fn accumulate_shifted<T: Real>(
    plane: &mut [T],
    src: &[T],
    h: usize,
    w: usize,
    dy: isize,
    dx: isize,
    wgt: T,
) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy).clamp(0, h as isize) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).clamp(0, w as isize) as usize;
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let dst = &mut plane[y * w + x0..y * w + x1];
        let sx0 = (x0 as isize + dx) as usize;
        let s = &src[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
        for (d, &v) in dst.iter_mut().zip(s) {
            *d += wgt * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn one_by_one_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = FeatureMap::<f32>::random(3, 5, 4, &mut rng);
        assert_eq!(conv2d_dense(&x, &Conv2d::identity(3)).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = FeatureMap::<f32>::random(2, 4, 4, &mut rng);
        let mut conv = Conv2d::zeros(3, 2, (3, 3), (2, 2));
        conv.bias = vec![0.5, -1.0, 0.0];
        let y = conv2d_dense(&x, &conv).unwrap();
        assert!(y.channel(0).iter().all(|&v| v == 0.5));
        assert!(y.channel(1).iter().all(|&v| v == -1.0));
        assert!(y.channel(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_mismatch() {
        let x = FeatureMap::<f32>::zeros(2, 3, 3);
        assert!(conv2d_dense(&x, &Conv2d::identity(3)).is_err());
        assert!(Conv2d::<f32>::new(1, 1, (3, 3), (1, 1), vec![0.0; 8], vec![0.0]).is_err());
        assert!(Conv2d::<f32>::new(1, 1, (1, 1), (0, 1), vec![0.0], vec![0.0]).is_err());
    }

    /// Direct six-loop summation, independent of the shifted-plane kernel.
    fn naive(x: &FeatureMap<f64>, c: &Conv2d<f64>) -> FeatureMap<f64> {
        let (h, w) = (x.height() as isize, x.width() as isize);
        let ph = (((c.kernel.0 - 1) * c.dilation.0) / 2) as isize;
        let pw = (((c.kernel.1 - 1) * c.dilation.1) / 2) as isize;
        FeatureMap::from_fn(c.out_channels, x.height(), x.width(), |o, y, xx| {
            let mut acc = c.bias[o];
            for i in 0..c.in_channels {
                for ky in 0..c.kernel.0 {
                    for kx in 0..c.kernel.1 {
                        let sy = y as isize - ph + (ky * c.dilation.0) as isize;
                        let sx = xx as isize - pw + (kx * c.dilation.1) as isize;
                        if sy >= 0 && sy < h && sx >= 0 && sx < w {
                            acc += c.weight(o, i, ky, kx) * x.get(i, sy as usize, sx as usize);
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn dilated_kernel_matches_naive_loops() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // 2x3x5x5 input batch: run both images
        for _ in 0..2 {
            let x = FeatureMap::<f64>::random(3, 5, 5, &mut rng);
            let conv = Conv2d::random(2, 3, (3, 3), (2, 2), &mut rng);
            let fast = conv2d_dense(&x, &conv).unwrap();
            assert!(fast.max_abs_diff(&naive(&x, &conv)).unwrap() < 1e-12);
        }
        for (kh, kw, dh, dw) in [(2, 4, 1, 3), (5, 1, 3, 1), (1, 2, 1, 7)] {
            let x = FeatureMap::<f64>::random(2, 6, 7, &mut rng);
            let conv = Conv2d::random(3, 2, (kh, kw), (dh, dw), &mut rng);
            let fast = conv2d_dense(&x, &conv).unwrap();
            assert!(fast.max_abs_diff(&naive(&x, &conv)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn vector_application() {
        let conv = Conv2d::pointwise(2, 2, vec![1.0f64, 2.0, 3.0, 4.0], vec![0.5, 0.0]).unwrap();
        assert_eq!(conv.apply_to_vector(&[1.0, 1.0]).unwrap(), vec![3.5, 7.0]);
        assert!(conv.apply_to_vector(&[1.0]).is_err());
    }
}
