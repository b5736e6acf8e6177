//! Layer kinds and their per-timestep kernels.
//!
//! Every kernel works on a single sample at a single timestep; the caller
//! owns the time loop. Shapes exclude the time axis.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

/// Fully connected map `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(in_features: usize, out_features: usize, weight: Vec<S>, bias: Vec<S>) -> Result<Self> {
        let d = Self {
            in_features,
            out_features,
            weight,
            bias,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weight: vec![S::zero(); in_features * out_features],
            bias: vec![S::zero(); out_features],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.weight.len() != self.in_features * self.out_features || self.bias.len() != self.out_features {
            return Err(Error::InvalidModel(format!(
                "dense {}→{} has {} weights and {} biases",
                self.in_features,
                self.out_features,
                self.weight.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    fn forward(&self, input: &[S], out: &mut [S]) {
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_features..(o + 1) * self.in_features];
            *y = self.bias[o] + row.iter().zip(input).map(|(&w, &x)| w * x).sum::<S>();
        }
    }

    fn backward_input(&self, grad_out: &[S], grad_in: &mut [S]) {
        grad_in.iter_mut().for_each(|g| *g = S::zero());
        for (o, &g) in grad_out.iter().enumerate() {
            if g == S::zero() {
                continue;
            }
            let row = &self.weight[o * self.in_features..(o + 1) * self.in_features];
            for (gi, &w) in grad_in.iter_mut().zip(row) {
                *gi += w * g;
            }
        }
    }

    fn accumulate(&self, input: &[S], grad_out: &[S], grads: &mut ParamGrads<S>) {
        for (o, &g) in grad_out.iter().enumerate() {
            grads.bias[o] += g;
            if g == S::zero() {
                continue;
            }
            let row = &mut grads.weight[o * self.in_features..(o + 1) * self.in_features];
            for (gw, &x) in row.iter_mut().zip(input) {
                *gw += g * x;
            }
        }
    }
}

/// 2-D convolution over `(channels, height, width)` with square kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<S> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `(out, in, kernel, kernel)` row-major.
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: vec![S::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![S::zero(); out_channels],
        }
    }

    fn validate(&self) -> Result<()> {
        let expected = self.out_channels * self.in_channels * self.kernel * self.kernel;
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::InvalidModel("conv2d kernel and stride must be positive".into()));
        }
        if self.weight.len() != expected || self.bias.len() != self.out_channels {
            return Err(Error::InvalidModel(format!(
                "conv2d expects {expected} weights and {} biases, has {} and {}",
                self.out_channels,
                self.weight.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    fn out_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < self.kernel || wp < self.kernel {
            return None;
        }
        Some((
            (hp - self.kernel) / self.stride + 1,
            (wp - self.kernel) / self.stride + 1,
        ))
    }

    /// Visits every (output position, input position, weight index) triple
    /// that contributes to the convolution.
    #[inline]
    fn for_each_tap(&self, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize)) {
        let (oh, ow) = self.out_hw(h, w).expect("validated geometry");
        let k = self.kernel;
        for o in 0..self.out_channels {
            for c in 0..self.in_channels {
                for ky in 0..k {
                    for kx in 0..k {
                        let wi = ((o * self.in_channels + c) * k + ky) * k + kx;
                        for y in 0..oh {
                            let iy = (y * self.stride + ky) as isize - self.padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for x in 0..ow {
                                let ix = (x * self.stride + kx) as isize - self.padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let oi = (o * oh + y) * ow + x;
                                let ii = (c * h + iy as usize) * w + ix as usize;
                                f(oi, ii, wi);
                            }
                        }
                    }
                }
            }
        }
    }

    fn forward(&self, input: &[S], h: usize, w: usize, out: &mut [S]) {
        let plane = out.len() / self.out_channels;
        for (o, chunk) in out.chunks_mut(plane).enumerate() {
            chunk.iter_mut().for_each(|v| *v = self.bias[o]);
        }
        let weight = &self.weight;
        self.for_each_tap(h, w, |oi, ii, wi| out[oi] += weight[wi] * input[ii]);
    }

    fn backward_input(&self, grad_out: &[S], h: usize, w: usize, grad_in: &mut [S]) {
        grad_in.iter_mut().for_each(|g| *g = S::zero());
        let weight = &self.weight;
        self.for_each_tap(h, w, |oi, ii, wi| grad_in[ii] += weight[wi] * grad_out[oi]);
    }

    fn accumulate(&self, input: &[S], grad_out: &[S], h: usize, w: usize, grads: &mut ParamGrads<S>) {
        let plane = grad_out.len() / self.out_channels;
        for (o, chunk) in grad_out.chunks(plane).enumerate() {
            grads.bias[o] += chunk.iter().copied().sum::<S>();
        }
        let gw = &mut grads.weight;
        self.for_each_tap(h, w, |oi, ii, wi| gw[wi] += grad_out[oi] * input[ii]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec<S> {
    Dense(Dense<S>),
    Conv2d(Conv2d<S>),
    /// Non-overlapping average pooling with stride equal to the kernel.
    AvgPool2d {
        kernel: usize,
    },
    Flatten,
    /// Leaky integrate-and-fire neurons over the shape of the previous layer.
    Lif,
    /// Non-spiking linear readout producing per-timestep class scores.
    Head(Dense<S>),
}

/// Weight and bias gradients of one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<S> {
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> ParamGrads<S> {
    pub fn zeros_like(layer: &LayerSpec<S>) -> Option<Self> {
        layer.params().map(|(w, b)| Self {
            weight: vec![S::zero(); w.len()],
            bias: vec![S::zero(); b.len()],
        })
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.weight.iter_mut().zip(&other.weight).for_each(|(a, &b)| *a += b);
        self.bias.iter_mut().zip(&other.bias).for_each(|(a, &b)| *a += b);
    }
}

impl<S: Scalar> LayerSpec<S> {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense(_) => "dense",
            LayerSpec::Conv2d(_) => "conv2d",
            LayerSpec::AvgPool2d { .. } => "avgpool2d",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Lif => "lif",
            LayerSpec::Head(_) => "output-head",
        }
    }

    pub fn params(&self) -> Option<(&[S], &[S])> {
        match self {
            LayerSpec::Dense(d) | LayerSpec::Head(d) => Some((&d.weight, &d.bias)),
            LayerSpec::Conv2d(c) => Some((&c.weight, &c.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut [S], &mut [S])> {
        match self {
            LayerSpec::Dense(d) | LayerSpec::Head(d) => Some((&mut d.weight, &mut d.bias)),
            LayerSpec::Conv2d(c) => Some((&mut c.weight, &mut c.bias)),
            _ => None,
        }
    }

    pub fn cast<T: Scalar>(&self) -> LayerSpec<T> {
        let cv = |v: &[S]| v.iter().map(|&x| cast::<S, T>(x)).collect::<Vec<T>>();
        let dense = |d: &Dense<S>| Dense {
            in_features: d.in_features,
            out_features: d.out_features,
            weight: cv(&d.weight),
            bias: cv(&d.bias),
        };
        match self {
            LayerSpec::Dense(d) => LayerSpec::Dense(dense(d)),
            LayerSpec::Head(d) => LayerSpec::Head(dense(d)),
            LayerSpec::Conv2d(c) => LayerSpec::Conv2d(Conv2d {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
                weight: cv(&c.weight),
                bias: cv(&c.bias),
            }),
            LayerSpec::AvgPool2d { kernel } => LayerSpec::AvgPool2d { kernel: *kernel },
            LayerSpec::Flatten => LayerSpec::Flatten,
            LayerSpec::Lif => LayerSpec::Lif,
        }
    }

    /// Output shape for a given input shape, validating geometry.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |what: String| Err(Error::InvalidModel(format!("{}: {what}", self.kind())));
        match self {
            LayerSpec::Dense(d) | LayerSpec::Head(d) => {
                d.validate()?;
                if input != [d.in_features] {
                    return mismatch(format!("expects [{}] input, got {input:?}", d.in_features));
                }
                Ok(vec![d.out_features])
            }
            LayerSpec::Conv2d(c) => {
                c.validate()?;
                if input.len() != 3 || input[0] != c.in_channels {
                    return mismatch(format!("expects ({}, H, W) input, got {input:?}", c.in_channels));
                }
                match c.out_hw(input[1], input[2]) {
                    Some((oh, ow)) => Ok(vec![c.out_channels, oh, ow]),
                    None => mismatch(format!("kernel {} larger than padded input {input:?}", c.kernel)),
                }
            }
            LayerSpec::AvgPool2d { kernel } => {
                if input.len() != 3 || *kernel == 0 || input[1] < *kernel || input[2] < *kernel {
                    return mismatch(format!("kernel {kernel} does not fit input {input:?}"));
                }
                Ok(vec![input[0], input[1] / kernel, input[2] / kernel])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Lif => Ok(input.to_vec()),
        }
    }

    /// Applies a stateless layer. Must not be called on `Lif`.
    pub(crate) fn forward(&self, input: &[S], in_shape: &[usize], out: &mut [S]) {
        match self {
            LayerSpec::Dense(d) | LayerSpec::Head(d) => d.forward(input, out),
            LayerSpec::Conv2d(c) => c.forward(input, in_shape[1], in_shape[2], out),
            LayerSpec::AvgPool2d { kernel } => {
                avgpool_forward(input, in_shape, *kernel, out);
            }
            LayerSpec::Flatten => out.copy_from_slice(input),
            LayerSpec::Lif => unreachable!("lif layers are stateful"),
        }
    }

    pub(crate) fn backward_input(&self, grad_out: &[S], in_shape: &[usize], grad_in: &mut [S]) {
        match self {
            LayerSpec::Dense(d) | LayerSpec::Head(d) => d.backward_input(grad_out, grad_in),
            LayerSpec::Conv2d(c) => c.backward_input(grad_out, in_shape[1], in_shape[2], grad_in),
            LayerSpec::AvgPool2d { kernel } => avgpool_backward(grad_out, in_shape, *kernel, grad_in),
            LayerSpec::Flatten => grad_in.copy_from_slice(grad_out),
            LayerSpec::Lif => unreachable!("lif layers are handled by the backward sweep"),
        }
    }

    pub(crate) fn accumulate_param_grads(
        &self,
        input: &[S],
        in_shape: &[usize],
        grad_out: &[S],
        grads: &mut ParamGrads<S>,
    ) {
        match self {
            LayerSpec::Dense(d) | LayerSpec::Head(d) => d.accumulate(input, grad_out, grads),
            LayerSpec::Conv2d(c) => c.accumulate(input, grad_out, in_shape[1], in_shape[2], grads),
            _ => {}
        }
    }
}

fn avgpool_forward<S: Scalar>(input: &[S], in_shape: &[usize], k: usize, out: &mut [S]) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h / k, w / k);
    let scale = S::one() / S::lit((k * k) as f64);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = S::zero();
                for ky in 0..k {
                    let row = (ch * h + y * k + ky) * w + x * k;
                    acc += input[row..row + k].iter().copied().sum::<S>();
                }
                out[(ch * oh + y) * ow + x] = acc * scale;
            }
        }
    }
}

fn avgpool_backward<S: Scalar>(grad_out: &[S], in_shape: &[usize], k: usize, grad_in: &mut [S]) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h / k, w / k);
    let scale = S::one() / S::lit((k * k) as f64);
    grad_in.iter_mut().for_each(|g| *g = S::zero());
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let g = grad_out[(ch * oh + y) * ow + x] * scale;
                for ky in 0..k {
                    let row = (ch * h + y * k + ky) * w + x * k;
                    grad_in[row..row + k].iter_mut().for_each(|v| *v += g);
                }
            }
        }
    }
}
