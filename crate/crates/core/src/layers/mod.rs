//! Differentiable layers and a sequential network container.

pub mod activation;
mod batchnorm;
mod blocks;
pub mod fixed;
mod network;

pub use batchnorm::{BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use blocks::{build_downsample_block, build_upsample_block, Approach};
pub use fixed::{fixed_forward, same_padding};
pub use network::{Gradients, LossHead, Network, ParamGrad, ParamId, ParamInfo, ParamName};

use crate::conv::{self, ConvGeometry, ConvMode, Padding};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::smooth::SmoothKernel;
use crate::tensor::{Rng, Tensor3, Tensor4};

fn cast_vec<T: Scalar, U: Scalar>(v: &[T]) -> Vec<U> {
    v.iter().map(|x| U::from_f64_lossy(x.to_f64_lossy())).collect()
}

/// BatchNorm behaviour; other layers ignore it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Default negative slope for leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    StridedConv,
    TransposedConv,
    FixedSmooth,
    BatchNorm,
    Relu,
    LeakyRelu,
    Tanh,
}

/// Trainable convolution in any of the three modes.
#[derive(Clone, Debug)]
pub struct ConvLayer<T> {
    pub kernel: Tensor4<T>,
    pub bias: Vec<T>,
    pub geometry: ConvGeometry,
    pub kernel_trainable: bool,
    pub bias_trainable: bool,
}

impl<T: Scalar> ConvLayer<T> {
    /// Zero-initialized layer; `in_ch`/`out_ch` are feature channels.
    pub fn new(in_ch: usize, out_ch: usize, kernel_size: usize, geometry: ConvGeometry) -> Self {
        let kernel = match geometry.mode {
            ConvMode::Transposed => Tensor4::zeros(in_ch, out_ch, kernel_size, kernel_size),
            _ => Tensor4::zeros(out_ch, in_ch, kernel_size, kernel_size),
        };
        Self { kernel, bias: vec![T::zero(); out_ch], geometry, kernel_trainable: true, bias_trainable: true }
    }

    pub fn in_channels(&self) -> usize {
        self.geometry.kernel_inputs(&self.kernel)
    }

    pub fn out_channels(&self) -> usize {
        self.geometry.kernel_outputs(&self.kernel)
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.kh()
    }

    pub fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        ConvLayer {
            kernel: self.kernel.cast(),
            bias: cast_vec(&self.bias),
            geometry: self.geometry,
            kernel_trainable: self.kernel_trainable,
            bias_trainable: self.bias_trainable,
        }
    }

    /// Bias frozen at zero.
    pub fn without_bias(mut self) -> Self {
        self.bias.iter_mut().for_each(|b| *b = T::zero());
        self.bias_trainable = false;
        self
    }
}

/// Depthwise convolution with the fixed kernel `K(d)` and a per-channel bias.
///
/// The kernel is never exposed as a parameter, so no optimizer can reach it.
#[derive(Clone, Debug)]
pub struct FixedSmoothLayer<T> {
    kernel: SmoothKernel,
    slice: Vec<T>,
    pub padding: Padding,
    pub bias: Vec<T>,
    pub bias_trainable: bool,
}

impl<T: Scalar> FixedSmoothLayer<T> {
    /// Size-preserving ("same") padding.
    pub fn new(order: usize, rate: usize, channels: usize, bias_trainable: bool) -> Result<Self> {
        let kernel = SmoothKernel::new(order, rate, channels)?;
        let padding = same_padding(kernel.size());
        Ok(Self {
            slice: kernel.slice_values(),
            kernel,
            padding,
            bias: vec![T::zero(); channels],
            bias_trainable,
        })
    }

    pub fn kernel(&self) -> &SmoothKernel {
        &self.kernel
    }

    pub fn channels(&self) -> usize {
        self.kernel.channels()
    }

    /// Dense depthwise weights as used in the forward pass.
    pub fn weights(&self) -> Tensor4<T> {
        let k = self.kernel.size();
        let c = self.channels();
        let mut w = Tensor4::zeros(c, c, k, k);
        for ch in 0..c {
            for (i, &v) in self.slice.iter().enumerate() {
                w.set(ch, ch, i / k, i % k, v);
            }
        }
        w
    }

    pub fn cast<U: Scalar>(&self) -> FixedSmoothLayer<U> {
        FixedSmoothLayer {
            kernel: self.kernel.clone(),
            slice: self.kernel.slice_values(),
            padding: self.padding,
            bias: cast_vec(&self.bias),
            bias_trainable: self.bias_trainable,
        }
    }

    pub fn forward(&self, v: &Tensor3<T>) -> Result<Tensor3<T>> {
        if v.channels() != self.channels() {
            return Err(Error::shape(format!(
                "input has {} channels, fixed layer has {}",
                v.channels(),
                self.channels()
            )));
        }
        fixed::depthwise_forward(v, &self.slice, self.kernel.size(), &self.bias, self.padding)
    }

    pub fn backward_input(&self, grad: &Tensor3<T>, input_hw: (usize, usize)) -> Result<Tensor3<T>> {
        fixed::depthwise_backward_input(grad, &self.slice, self.kernel.size(), self.padding, input_hw)
    }
}

#[derive(Clone, Debug)]
pub enum Layer<T> {
    Conv(ConvLayer<T>),
    FixedSmooth(FixedSmoothLayer<T>),
    BatchNorm(BatchNorm<T>),
    Relu,
    LeakyRelu(T),
    Tanh,
}

/// Kernel initialization scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Normal with standard deviation `sqrt(2 / fan_in)`.
    He,
    Normal(f64),
    Constant(f64),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv(c) => match c.geometry.mode {
                ConvMode::Plain => LayerKind::Conv,
                ConvMode::Strided => LayerKind::StridedConv,
                ConvMode::Transposed => LayerKind::TransposedConv,
            },
            Layer::FixedSmooth(_) => LayerKind::FixedSmooth,
            Layer::BatchNorm(_) => LayerKind::BatchNorm,
            Layer::Relu => LayerKind::Relu,
            Layer::LeakyRelu(_) => LayerKind::LeakyRelu,
            Layer::Tanh => LayerKind::Tanh,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv(c) => Layer::Conv(c.cast()),
            Layer::FixedSmooth(f) => Layer::FixedSmooth(f.cast()),
            Layer::BatchNorm(bn) => Layer::BatchNorm(bn.cast()),
            Layer::Relu => Layer::Relu,
            Layer::LeakyRelu(s) => Layer::LeakyRelu(U::from_f64_lossy(s.to_f64_lossy())),
            Layer::Tanh => Layer::Tanh,
        }
    }

    pub fn leaky_relu() -> Self {
        Layer::LeakyRelu(T::from_f64_lossy(LEAKY_SLOPE))
    }

    /// Fills a trainable kernel; frozen kernels are left alone.
    pub fn initialize(&mut self, rng: &mut Rng, init: Init) {
        if let Layer::Conv(c) = self {
            if !c.kernel_trainable {
                return;
            }
            let fan_in = c.in_channels() * c.kernel.kh() * c.kernel.kw();
            let n = c.kernel.len();
            let vals: Vec<f64> = match init {
                Init::He => {
                    let sd = (2.0 / fan_in as f64).sqrt();
                    rng.normal_vec(n).into_iter().map(|z| z * sd).collect()
                }
                Init::Normal(sd) => rng.normal_vec(n).into_iter().map(|z| z * sd).collect(),
                Init::Constant(v) => vec![v; n],
            };
            for (k, v) in c.kernel.data_mut().iter_mut().zip(vals) {
                *k = T::from_f64_lossy(v);
            }
        }
    }

    /// Forward over a batch.
    pub fn forward(&mut self, batch: &[Tensor3<T>], mode: Mode) -> Result<Vec<Tensor3<T>>> {
        match self {
            Layer::Conv(c) => batch.iter().map(|v| conv::forward(v, &c.kernel, &c.bias, &c.geometry)).collect(),
            Layer::FixedSmooth(f) => batch.iter().map(|v| f.forward(v)).collect(),
            Layer::BatchNorm(bn) => bn.forward(batch, mode),
            Layer::Relu => Ok(batch.iter().map(activation::relu).collect()),
            Layer::LeakyRelu(s) => Ok(batch.iter().map(|v| activation::leaky_relu(v, *s)).collect()),
            Layer::Tanh => Ok(batch.iter().map(activation::tanh).collect()),
        }
    }

    /// Input gradients plus gradients of the trainable parameters, summed
    /// over the batch in sample order.
    pub fn backward(
        &mut self,
        inputs: &[Tensor3<T>],
        grads: &[Tensor3<T>],
    ) -> Result<(Vec<Tensor3<T>>, Vec<(ParamName, Vec<T>)>)> {
        if inputs.len() != grads.len() {
            return Err(Error::shape("gradient batch size differs from forward batch"));
        }
        if matches!(self, Layer::Relu | Layer::LeakyRelu(_) | Layer::Tanh)
            && inputs.iter().zip(grads).any(|(v, g)| v.shape() != g.shape())
        {
            return Err(Error::shape("activation gradient shape differs from its input"));
        }
        match self {
            Layer::Conv(c) => {
                let mut dx = Vec::with_capacity(inputs.len());
                let mut dk = vec![T::zero(); c.kernel.len()];
                let mut db = vec![T::zero(); c.bias.len()];
                for (v, g) in inputs.iter().zip(grads) {
                    dx.push(conv::backward_input(g, &c.kernel, &c.geometry, (v.height(), v.width()))?);
                    if c.kernel_trainable || c.bias_trainable {
                        let (k, b) = conv::conv_backward_params(v, g, c.kernel.shape(), &c.geometry)?;
                        dk.iter_mut().zip(k.data()).for_each(|(a, &b)| *a += b);
                        db.iter_mut().zip(&b).for_each(|(a, &b)| *a += b);
                    }
                }
                let mut params = Vec::new();
                if c.kernel_trainable {
                    params.push((ParamName::Kernel, dk));
                }
                if c.bias_trainable {
                    params.push((ParamName::Bias, db));
                }
                Ok((dx, params))
            }
            Layer::FixedSmooth(f) => {
                let mut dx = Vec::with_capacity(inputs.len());
                let mut db = vec![T::zero(); f.bias.len()];
                for (v, g) in inputs.iter().zip(grads) {
                    dx.push(f.backward_input(g, (v.height(), v.width()))?);
                    for (ch, d) in db.iter_mut().enumerate() {
                        *d += g.channel(ch).iter().copied().sum::<T>();
                    }
                }
                let params = if f.bias_trainable { vec![(ParamName::Bias, db)] } else { vec![] };
                Ok((dx, params))
            }
            Layer::BatchNorm(bn) => {
                let (dx, ds, dt) = bn.backward(grads)?;
                let params = if bn.trainable {
                    vec![(ParamName::Scale, ds), (ParamName::Shift, dt)]
                } else {
                    vec![]
                };
                Ok((dx, params))
            }
            Layer::Relu => Ok((
                inputs.iter().zip(grads).map(|(v, g)| activation::relu_backward(v, g)).collect(),
                vec![],
            )),
            Layer::LeakyRelu(s) => Ok((
                inputs.iter().zip(grads).map(|(v, g)| activation::leaky_relu_backward(v, g, *s)).collect(),
                vec![],
            )),
            Layer::Tanh => Ok((
                inputs.iter().zip(grads).map(|(v, g)| activation::tanh_backward(v, g)).collect(),
                vec![],
            )),
        }
    }
}
