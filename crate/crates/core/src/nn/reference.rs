//! Slow reference forward passes used to cross-check the fast kernels.
//!
//! Everything here is computed in `f64` with plain nested loops over
//! dense kernels. Strip kernels are embedded into dense `1 x k` / `k x 1`
//! arrays locally rather than through [`StripKernel::to_dense`].

use super::{AscsppParams, AsconvParams, ChannelAttention, Conv2d, FeatureMap, Orientation, StripKernel};
use crate::scalar::Real;

/// Dense kernel in `f64`, weights `out x in x kh x kw`.
pub struct DenseKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub dh: usize,
    pub dw: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseKernel {
    pub fn from_conv<T: Real>(c: &Conv2d<T>) -> Self {
        Self {
            out_channels: c.out_channels,
            in_channels: c.in_channels,
            kh: c.kernel.0,
            kw: c.kernel.1,
            dh: c.dilation.0,
            dw: c.dilation.1,
            weights: c.weights.iter().map(|v| v.to_f64_lossy()).collect(),
            bias: c.bias.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    pub fn from_strip<T: Real>(s: &StripKernel<T>) -> Self {
        let (kh, kw, dh, dw) = match s.orientation {
            Orientation::Horizontal => (1, s.length, 1, s.dilation),
            Orientation::Vertical => (s.length, 1, s.dilation, 1),
        };
        let mut weights = vec![0.0; s.out_channels * s.in_channels * s.length];
        for o in 0..s.out_channels {
            for i in 0..s.in_channels {
                for t in 0..s.length {
                    let (ky, kx) = if kh == 1 { (0, t) } else { (t, 0) };
                    weights[((o * s.in_channels + i) * kh + ky) * kw + kx] =
                        s.weights[(o * s.in_channels + i) * s.length + t].to_f64_lossy();
                }
            }
        }
        Self {
            out_channels: s.out_channels,
            in_channels: s.in_channels,
            kh,
            kw,
            dh,
            dw,
            weights,
            bias: s.bias.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }
}

pub fn naive_conv2d(x: &FeatureMap<f64>, k: &DenseKernel) -> FeatureMap<f64> {
    assert_eq!(x.channels(), k.in_channels, "reference conv channel mismatch");
    let (h, w) = (x.height() as isize, x.width() as isize);
    let top = (((k.kh - 1) * k.dh) / 2) as isize;
    let left = (((k.kw - 1) * k.dw) / 2) as isize;
    let mut out = FeatureMap::zeros(k.out_channels, x.height(), x.width());
    for o in 0..k.out_channels {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = k.bias[o];
                for i in 0..k.in_channels {
                    for ky in 0..k.kh {
                        for kx in 0..k.kw {
                            let sy = y - top + (ky * k.dh) as isize;
                            let sx = xx - left + (kx * k.dw) as isize;
                            if sy < 0 || sy >= h || sx < 0 || sx >= w {
                                continue;
                            }
                            let wgt = k.weights[((o * k.in_channels + i) * k.kh + ky) * k.kw + kx];
                            acc += wgt * x.get(i, sy as usize, sx as usize);
                        }
                    }
                }
                out.set(o, y as usize, xx as usize, acc);
            }
        }
    }
    out
}

fn elementwise_sum(a: &FeatureMap<f64>, b: &FeatureMap<f64>) -> FeatureMap<f64> {
    FeatureMap::from_fn(a.channels(), a.height(), a.width(), |c, y, x| a.get(c, y, x) + b.get(c, y, x))
}

pub fn strip<T: Real>(x: &FeatureMap<T>, s: &StripKernel<T>) -> FeatureMap<f64> {
    naive_conv2d(&x.cast(), &DenseKernel::from_strip(s))
}

pub fn asconv<T: Real>(x: &FeatureMap<T>, p: &AsconvParams<T>) -> FeatureMap<f64> {
    let x = x.cast::<f64>();
    let mut total: Option<FeatureMap<f64>> = None;
    for b in &p.branches {
        let v = naive_conv2d(&x, &DenseKernel::from_strip(&b.vertical));
        let vh = naive_conv2d(&v, &DenseKernel::from_strip(&b.horizontal));
        total = Some(match total {
            Some(t) => elementwise_sum(&t, &vh),
            None => vh,
        });
    }
    naive_conv2d(&total.expect("at least one branch"), &DenseKernel::from_conv(&p.projection))
}

fn pool(x: &FeatureMap<f64>) -> Vec<f64> {
    (0..x.channels())
        .map(|c| {
            let mut s = 0.0;
            for y in 0..x.height() {
                for xx in 0..x.width() {
                    s += x.get(c, y, xx);
                }
            }
            s / (x.height() * x.width()) as f64
        })
        .collect()
}

fn matvec(k: &DenseKernel, v: &[f64]) -> Vec<f64> {
    (0..k.out_channels)
        .map(|o| k.bias[o] + (0..k.in_channels).map(|i| k.weights[o * k.in_channels + i] * v[i]).sum::<f64>())
        .collect()
}

pub fn channel_attention<T: Real>(x: &FeatureMap<T>, p: &ChannelAttention<T>) -> FeatureMap<f64> {
    let x = x.cast::<f64>();
    let z = matvec(&DenseKernel::from_conv(&p.conv), &pool(&x));
    let s: Vec<f64> = z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
    FeatureMap::from_fn(x.channels(), x.height(), x.width(), |c, y, xx| x.get(c, y, xx) * s[c])
}

pub fn ascspp<T: Real>(x: &FeatureMap<T>, p: &AscsppParams<T>) -> FeatureMap<f64> {
    let xf = x.cast::<f64>();
    let mut parts = vec![naive_conv2d(&xf, &DenseKernel::from_conv(&p.pointwise))];
    for b in &p.branches {
        parts.push(asconv(x, b));
    }
    let pooled = matvec(&DenseKernel::from_conv(&p.pool), &pool(&xf));
    parts.push(FeatureMap::from_fn(pooled.len(), xf.height(), xf.width(), |c, _, _| pooled[c]));

    let channels: usize = parts.iter().map(|m| m.channels()).sum();
    let mut stacked = FeatureMap::zeros(channels, xf.height(), xf.width());
    let mut base = 0;
    for part in &parts {
        for c in 0..part.channels() {
            for y in 0..xf.height() {
                for xx in 0..xf.width() {
                    stacked.set(base + c, y, xx, part.get(c, y, xx));
                }
            }
        }
        base += part.channels();
    }
    let projected = naive_conv2d(&stacked, &DenseKernel::from_conv(&p.projection));
    elementwise_sum(&projected, &xf)
}
