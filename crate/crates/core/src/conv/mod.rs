//! Plain, strided and transposed 2-D convolution with their adjoints.
//!
//! Forward maps, with 0-based indices and `Vp` the zero-padded input:
//!
//! * plain / strided: `Z[i,j,k] = sum_{l,m,n} Vp[l, j*s+m, k*s+n] K[i,l,m,n] + b[i]`
//! * transposed: `Z[i,j,k] = sum_{q, l*s+m=j', n*s+p=k'} V[q,l,n] K[q,i,m,p] + b[i]`,
//!   where `(j', k')` is `(j, k)` shifted by the top/left padding, which is
//!   cropped from the full scatter result.
//!
//! Kernel layout differs by mode. Plain and strided kernels are
//! `(out, in, kh, kw)`. Transposed kernels are `(in, out, kh, kw)`: the
//! first axis is the layer's input feature channel, matching the
//! `K[q, i, m, p]` order of the scatter form. Because of this, the input
//! gradient of a strided convolution is the transposed convolution with the
//! very same stored kernel.
//!
//! The functions in this module use an im2col + GEMM path. [`reference`]
//! holds literal direct-sum versions used as test oracles.

mod im2col;
pub mod reference;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor3, Tensor4};

use im2col::{col2im, im2col};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvMode {
    Plain,
    Strided,
    Transposed,
}

/// Zero padding per side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Padding {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl Padding {
    pub fn uniform(p: usize) -> Self {
        Self { top: p, left: p, bottom: p, right: p }
    }

    pub fn vertical(&self) -> usize {
        self.top + self.bottom
    }

    pub fn horizontal(&self) -> usize {
        self.left + self.right
    }

    pub fn max(&self) -> usize {
        self.top.max(self.left).max(self.bottom).max(self.right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: Padding,
    pub mode: ConvMode,
}

impl ConvGeometry {
    pub fn plain() -> Self {
        Self { stride: 1, padding: Padding::default(), mode: ConvMode::Plain }
    }

    pub fn strided(stride: usize) -> Self {
        Self { stride, padding: Padding::default(), mode: ConvMode::Strided }
    }

    pub fn transposed(stride: usize) -> Self {
        Self { stride, padding: Padding::default(), mode: ConvMode::Transposed }
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_pad(self, p: usize) -> Self {
        self.with_padding(Padding::uniform(p))
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::param("stride must be positive"));
        }
        if self.mode == ConvMode::Plain && self.stride != 1 {
            return Err(Error::param("plain convolution requires stride 1"));
        }
        Ok(())
    }

    /// Spatial output size for an `h x w` input and a `kh x kw` kernel.
    pub fn output_size(&self, h: usize, w: usize, kh: usize, kw: usize) -> Result<(usize, usize)> {
        self.validate()?;
        if h == 0 || w == 0 || kh == 0 || kw == 0 {
            return Err(Error::shape("zero-sized input or kernel"));
        }
        let s = self.stride;
        let (oh, ow) = match self.mode {
            ConvMode::Plain | ConvMode::Strided => {
                let ph = h + self.padding.vertical();
                let pw = w + self.padding.horizontal();
                if ph < kh || pw < kw {
                    (0, 0)
                } else {
                    ((ph - kh) / s + 1, (pw - kw) / s + 1)
                }
            }
            ConvMode::Transposed => {
                let fh = (h - 1) * s + kh;
                let fw = (w - 1) * s + kw;
                (
                    fh.saturating_sub(self.padding.vertical()),
                    fw.saturating_sub(self.padding.horizontal()),
                )
            }
        };
        if oh == 0 || ow == 0 {
            return Err(Error::shape(format!(
                "non-positive output size for {h}x{w} input, {kh}x{kw} kernel, {self:?}"
            )));
        }
        Ok((oh, ow))
    }

    /// Number of input channels the kernel expects.
    pub fn kernel_inputs<T: Scalar>(&self, k: &Tensor4<T>) -> usize {
        match self.mode {
            ConvMode::Transposed => k.out_channels(),
            _ => k.in_channels(),
        }
    }

    /// Number of output channels the kernel produces.
    pub fn kernel_outputs<T: Scalar>(&self, k: &Tensor4<T>) -> usize {
        match self.mode {
            ConvMode::Transposed => k.in_channels(),
            _ => k.out_channels(),
        }
    }
}

fn expect_mode(g: &ConvGeometry, mode: ConvMode) -> Result<()> {
    if g.mode != mode {
        return Err(Error::param(format!("expected {mode:?} geometry, got {:?}", g.mode)));
    }
    Ok(())
}

fn check_forward<T: Scalar>(v: &Tensor3<T>, k: &Tensor4<T>, b: &[T], g: &ConvGeometry) -> Result<()> {
    g.validate()?;
    let inputs = g.kernel_inputs(k);
    if v.channels() != inputs {
        return Err(Error::shape(format!(
            "input has {} channels, kernel expects {inputs}",
            v.channels()
        )));
    }
    let outputs = g.kernel_outputs(k);
    if b.len() != outputs {
        return Err(Error::shape(format!("bias length {} != {outputs} output channels", b.len())));
    }
    Ok(())
}

fn add_bias<T: Scalar>(z: &mut Tensor3<T>, b: &[T]) {
    for (c, &bias) in b.iter().enumerate() {
        if bias != T::zero() {
            z.channel_mut(c).iter_mut().for_each(|v| *v += bias);
        }
    }
}

/// Stride-1 convolution (correlation form).
pub fn conv_forward<T: Scalar>(
    v: &Tensor3<T>,
    k: &Tensor4<T>,
    b: &[T],
    g: &ConvGeometry,
) -> Result<Tensor3<T>> {
    expect_mode(g, ConvMode::Plain)?;
    forward(v, k, b, g)
}

pub fn strided_conv_forward<T: Scalar>(
    v: &Tensor3<T>,
    k: &Tensor4<T>,
    b: &[T],
    g: &ConvGeometry,
) -> Result<Tensor3<T>> {
    expect_mode(g, ConvMode::Strided)?;
    forward(v, k, b, g)
}

pub fn transposed_conv_forward<T: Scalar>(
    v: &Tensor3<T>,
    k: &Tensor4<T>,
    b: &[T],
    g: &ConvGeometry,
) -> Result<Tensor3<T>> {
    expect_mode(g, ConvMode::Transposed)?;
    forward(v, k, b, g)
}

/// Forward pass for any mode.
pub fn forward<T: Scalar>(
    v: &Tensor3<T>,
    k: &Tensor4<T>,
    b: &[T],
    g: &ConvGeometry,
) -> Result<Tensor3<T>> {
    check_forward(v, k, b, g)?;
    let (oh, ow) = g.output_size(v.height(), v.width(), k.kh(), k.kw())?;
    let kk = k.kh() * k.kw();
    let mut z = match g.mode {
        ConvMode::Plain | ConvMode::Strided => {
            let (cols, ho, wo) = im2col(v, k.kh(), k.kw(), g.stride, g.padding);
            debug_assert_eq!((ho, wo), (oh, ow));
            let rows = k.in_channels() * kk;
            let n = ho * wo;
            let mut out = vec![T::zero(); k.out_channels() * n];
            T::gemm(
                k.out_channels(), rows, n,
                T::one(), k.data(), rows as isize, 1,
                &cols, n as isize, 1,
                T::zero(), &mut out, n as isize, 1,
            );
            Tensor3::from_vec(k.out_channels(), oh, ow, out)?
        }
        ConvMode::Transposed => {
            let cin = k.out_channels();
            let cout = k.in_channels();
            let rows = cout * kk;
            let n = v.height() * v.width();
            let mut cols = vec![T::zero(); rows * n];
            // cols = K_mat^T * V_mat, K_mat is cin x (cout*kk).
            T::gemm(
                rows, cin, n,
                T::one(), k.data(), 1, rows as isize,
                v.data(), n as isize, 1,
                T::zero(), &mut cols, n as isize, 1,
            );
            col2im(&cols, cout, oh, ow, k.kh(), k.kw(), g.stride, g.padding, v.height(), v.width())
        }
    };
    add_bias(&mut z, b);
    Ok(z)
}

fn check_grad_shape<T: Scalar>(grad: &Tensor3<T>, expect: (usize, usize, usize)) -> Result<()> {
    if grad.shape() != expect {
        return Err(Error::shape(format!(
            "gradient shape {:?} does not match forward output {expect:?}",
            grad.shape()
        )));
    }
    Ok(())
}

/// Gradient of the loss with respect to the input of any convolution.
///
/// `input_hw` is the spatial size of the forward input. For strided
/// convolutions it cannot always be recovered from the output size since
/// trailing rows that no window reaches receive zero gradient.
pub fn backward_input<T: Scalar>(
    grad: &Tensor3<T>,
    k: &Tensor4<T>,
    g: &ConvGeometry,
    input_hw: (usize, usize),
) -> Result<Tensor3<T>> {
    g.validate()?;
    let (h, w) = input_hw;
    let (oh, ow) = g.output_size(h, w, k.kh(), k.kw())?;
    check_grad_shape(grad, (g.kernel_outputs(k), oh, ow))?;
    let kk = k.kh() * k.kw();
    match g.mode {
        ConvMode::Plain | ConvMode::Strided => {
            let rows = k.in_channels() * kk;
            let n = oh * ow;
            let mut cols = vec![T::zero(); rows * n];
            T::gemm(
                rows, k.out_channels(), n,
                T::one(), k.data(), 1, rows as isize,
                grad.data(), n as isize, 1,
                T::zero(), &mut cols, n as isize, 1,
            );
            Ok(col2im(&cols, k.in_channels(), h, w, k.kh(), k.kw(), g.stride, g.padding, oh, ow))
        }
        ConvMode::Transposed => {
            let (cols, ho, wo) = im2col(grad, k.kh(), k.kw(), g.stride, g.padding);
            debug_assert_eq!((ho, wo), (h, w));
            let rows = k.in_channels() * kk;
            let n = h * w;
            let mut out = vec![T::zero(); k.out_channels() * n];
            T::gemm(
                k.out_channels(), rows, n,
                T::one(), k.data(), rows as isize, 1,
                &cols, n as isize, 1,
                T::zero(), &mut out, n as isize, 1,
            );
            Tensor3::from_vec(k.out_channels(), h, w, out)
        }
    }
}

/// Input gradient of a strided (or plain) convolution: the transposed
/// convolution of `grad` with the same kernel, zero-extended to `input_hw`.
pub fn strided_conv_backward_input<T: Scalar>(
    grad: &Tensor3<T>,
    k: &Tensor4<T>,
    g: &ConvGeometry,
    input_hw: (usize, usize),
) -> Result<Tensor3<T>> {
    if g.mode == ConvMode::Transposed {
        return Err(Error::param("expected strided geometry"));
    }
    backward_input(grad, k, g, input_hw)
}

/// Input gradient of a transposed convolution: a strided convolution of the
/// zero-padded gradient with the same kernel.
pub fn transposed_conv_backward_input<T: Scalar>(
    grad: &Tensor3<T>,
    k: &Tensor4<T>,
    g: &ConvGeometry,
) -> Result<Tensor3<T>> {
    expect_mode(g, ConvMode::Transposed)?;
    let s = g.stride;
    let fh = grad.height() + g.padding.vertical();
    let fw = grad.width() + g.padding.horizontal();
    if fh < k.kh() || fw < k.kw() || !(fh - k.kh()).is_multiple_of(s) || !(fw - k.kw()).is_multiple_of(s) {
        return Err(Error::shape(format!(
            "gradient {:?} is not a transposed-convolution output for this geometry",
            grad.shape()
        )));
    }
    let input_hw = ((fh - k.kh()) / s + 1, (fw - k.kw()) / s + 1);
    backward_input(grad, k, g, input_hw)
}

/// Kernel and bias gradients for any mode. `v` is the forward input.
pub fn conv_backward_params<T: Scalar>(
    v: &Tensor3<T>,
    grad: &Tensor3<T>,
    kernel_shape: (usize, usize, usize, usize),
    g: &ConvGeometry,
) -> Result<(Tensor4<T>, Vec<T>)> {
    g.validate()?;
    let (d0, d1, kh, kw) = kernel_shape;
    let probe = Tensor4::<T>::zeros(d0, d1, kh, kw);
    if v.channels() != g.kernel_inputs(&probe) {
        return Err(Error::shape("input channels do not match kernel"));
    }
    let (oh, ow) = g.output_size(v.height(), v.width(), kh, kw)?;
    check_grad_shape(grad, (g.kernel_outputs(&probe), oh, ow))?;
    let kk = kh * kw;
    let mut dk = vec![T::zero(); d0 * d1 * kk];
    match g.mode {
        ConvMode::Plain | ConvMode::Strided => {
            let (cols, _, _) = im2col(v, kh, kw, g.stride, g.padding);
            let rows = d1 * kk;
            let n = oh * ow;
            // dK = G_mat * cols^T
            T::gemm(
                d0, n, rows,
                T::one(), grad.data(), n as isize, 1,
                &cols, 1, n as isize,
                T::zero(), &mut dk, rows as isize, 1,
            );
        }
        ConvMode::Transposed => {
            let (cols, _, _) = im2col(grad, kh, kw, g.stride, g.padding);
            let rows = d1 * kk;
            let n = v.height() * v.width();
            // dK = V_mat * cols^T
            T::gemm(
                d0, n, rows,
                T::one(), v.data(), n as isize, 1,
                &cols, 1, n as isize,
                T::zero(), &mut dk, rows as isize, 1,
            );
        }
    }
    let db = (0..grad.channels()).map(|c| grad.channel(c).iter().copied().sum()).collect();
    Ok((Tensor4::from_vec(d0, d1, kh, kw, dk)?, db))
}
