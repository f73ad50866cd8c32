//! Depthwise stride-1 convolution with the fixed kernel `K(d)`.
//!
//! `Z[i,j,k] = sum_{m,n} V[i, j+m, k+n] K(d)[m,n] + b[i]` over the zero-padded
//! input; channels never mix.

use crate::conv::Padding;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::smooth::SmoothKernel;
use crate::tensor::Tensor3;

/// Size-preserving padding for a `k x k` stride-1 kernel: the extra pixel of
/// an even kernel goes to the bottom/right.
pub fn same_padding(k: usize) -> Padding {
    let lo = (k - 1) / 2;
    let hi = k - 1 - lo;
    Padding { top: lo, left: lo, bottom: hi, right: hi }
}

fn output_hw(h: usize, w: usize, k: usize, pad: Padding) -> Result<(usize, usize)> {
    let ph = h + pad.vertical();
    let pw = w + pad.horizontal();
    if ph < k || pw < k {
        return Err(Error::shape(format!("{h}x{w} input too small for {k}x{k} fixed kernel")));
    }
    Ok((ph - k + 1, pw - k + 1))
}

/// Forward pass with a row-major `k x k` slice.
pub fn depthwise_forward<T: Scalar>(
    v: &Tensor3<T>,
    slice: &[T],
    k: usize,
    bias: &[T],
    pad: Padding,
) -> Result<Tensor3<T>> {
    if bias.len() != v.channels() {
        return Err(Error::shape(format!(
            "bias length {} != {} channels",
            bias.len(),
            v.channels()
        )));
    }
    let (h, w) = (v.height(), v.width());
    let (oh, ow) = output_hw(h, w, k, pad)?;
    let mut z = Tensor3::zeros(v.channels(), oh, ow);
    for c in 0..v.channels() {
        let src = v.channel(c);
        let dst = z.channel_mut(c);
        for m in 0..k {
            for n in 0..k {
                let wv = slice[m * k + n];
                for y in 0..oh {
                    let sy = (y + m) as isize - pad.top as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let srow = &src[sy as usize * w..(sy as usize + 1) * w];
                    let drow = &mut dst[y * ow..(y + 1) * ow];
                    for (x, d) in drow.iter_mut().enumerate() {
                        let sx = (x + n) as isize - pad.left as isize;
                        if sx >= 0 && sx < w as isize {
                            *d += srow[sx as usize] * wv;
                        }
                    }
                }
            }
        }
        let b = bias[c];
        dst.iter_mut().for_each(|d| *d += b);
    }
    Ok(z)
}

/// Input gradient of [`depthwise_forward`].
pub fn depthwise_backward_input<T: Scalar>(
    grad: &Tensor3<T>,
    slice: &[T],
    k: usize,
    pad: Padding,
    input_hw: (usize, usize),
) -> Result<Tensor3<T>> {
    let (h, w) = input_hw;
    let (oh, ow) = output_hw(h, w, k, pad)?;
    if (grad.height(), grad.width()) != (oh, ow) {
        return Err(Error::shape(format!(
            "gradient {:?} does not match fixed layer output {oh}x{ow}",
            grad.shape()
        )));
    }
    let mut dv = Tensor3::zeros(grad.channels(), h, w);
    for c in 0..grad.channels() {
        let src = grad.channel(c);
        let dst = dv.channel_mut(c);
        for m in 0..k {
            for n in 0..k {
                let wv = slice[m * k + n];
                for y in 0..oh {
                    let sy = (y + m) as isize - pad.top as isize;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let grow = &src[y * ow..(y + 1) * ow];
                    let drow = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    for (x, &g) in grow.iter().enumerate() {
                        let sx = (x + n) as isize - pad.left as isize;
                        if sx >= 0 && sx < w as isize {
                            drow[sx as usize] += g * wv;
                        }
                    }
                }
            }
        }
    }
    Ok(dv)
}

/// `fixed_forward(V, K(d), b, padding)`.
pub fn fixed_forward<T: Scalar>(
    v: &Tensor3<T>,
    sk: &SmoothKernel,
    bias: &[T],
    pad: Padding,
) -> Result<Tensor3<T>> {
    if v.channels() != sk.channels() {
        return Err(Error::shape(format!(
            "input has {} channels, fixed kernel has {}",
            v.channels(),
            sk.channels()
        )));
    }
    depthwise_forward(v, &sk.slice_values::<T>(), sk.size(), bias, pad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::{self, ConvGeometry};
    use crate::smooth::smooth_kernel;
    use crate::tensor::Rng;

    #[test]
    fn hold_kernel_sums_window() {
        let sk = smooth_kernel(0, 2, 1).unwrap();
        let v = Tensor3::from_rows(&[&[1.0f64, 2.0], &[3.0, 4.0]]).unwrap();
        let z = fixed_forward(&v, &sk, &[0.0], Padding::default()).unwrap();
        assert_eq!(z.shape(), (1, 1, 1));
        assert_eq!(z.data(), &[10.0]);
    }

    #[test]
    fn rate_one_is_identity_and_bias_only() {
        let sk = smooth_kernel(3, 1, 2).unwrap();
        let mut rng = Rng::new(3);
        let v = Tensor3::from_vec(2, 3, 4, rng.normal_vec(24)).unwrap();
        assert_eq!(fixed_forward(&v, &sk, &[0.0, 0.0], Padding::default()).unwrap(), v);

        let sk = smooth_kernel(1, 2, 1).unwrap();
        let z = fixed_forward(&Tensor3::<f64>::zeros(1, 4, 4), &sk, &[5.0], same_padding(3)).unwrap();
        assert_eq!(z, Tensor3::filled(1, 4, 4, 5.0));
    }

    #[test]
    fn channel_mismatch() {
        let sk = smooth_kernel(0, 2, 2).unwrap();
        assert!(fixed_forward(&Tensor3::<f64>::zeros(1, 4, 4), &sk, &[0.0], same_padding(2)).is_err());
    }

    #[test]
    fn same_padding_preserves_size() {
        for k in 1..8 {
            let p = same_padding(k);
            assert_eq!(p.vertical(), k - 1);
            assert_eq!(p.top, (k - 1) / 2);
        }
    }

    #[test]
    fn matches_dense_conv_with_depthwise_weights() {
        let mut rng = Rng::new(11);
        let sk = smooth_kernel(1, 3, 3).unwrap();
        let v = Tensor3::from_vec(3, 7, 6, rng.normal_vec(126)).unwrap();
        let b = [0.5, -1.0, 2.0];
        let pad = same_padding(sk.size());
        let z = fixed_forward(&v, &sk, &b, pad).unwrap();
        let dense = conv::forward(&v, &sk.weights(), &b, &ConvGeometry::plain().with_padding(pad)).unwrap();
        for (a, e) in z.data().iter().zip(dense.data()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_is_adjoint() {
        let mut rng = Rng::new(12);
        let sk = smooth_kernel(2, 2, 2).unwrap();
        let pad = same_padding(sk.size());
        let v = Tensor3::from_vec(2, 5, 6, rng.normal_vec(60)).unwrap();
        let z = fixed_forward(&v, &sk, &[0.0, 0.0], pad).unwrap();
        let g = Tensor3::from_vec(2, 5, 6, rng.normal_vec(60)).unwrap();
        let dv = depthwise_backward_input(&g, &sk.slice_values(), sk.size(), pad, (5, 6)).unwrap();
        let lhs = z.dot(&g);
        let rhs = v.dot(&dv);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}
