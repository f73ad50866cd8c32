//! Direct-sum convolutions written index for index from their defining sums.
//!
//! Slow, allocation-heavy and deliberately free of shared helpers with the
//! optimized path. Loop variables are 1-based to match the usual notation.

use super::{ConvGeometry, ConvMode};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::{Tensor3, Tensor4};

/// `V` at 1-based padded coordinates; zero outside the real input.
fn padded<T: Scalar>(v: &Tensor3<T>, l: usize, y: isize, x: isize) -> T {
    if y < 1 || x < 1 || y > v.height() as isize || x > v.width() as isize {
        T::zero()
    } else {
        v.get(l - 1, y as usize - 1, x as usize - 1)
    }
}

/// `Z[i,j,k] = sum_{l,m,n} V[l,(j-1)s+m,(k-1)s+n] K[i,l,m,n] + b[i]` with
/// the input shifted by the top/left padding.
pub fn strided<T: Scalar>(v: &Tensor3<T>, k: &Tensor4<T>, b: &[T], g: &ConvGeometry) -> Result<Tensor3<T>> {
    let (oh, ow) = g.output_size(v.height(), v.width(), k.kh(), k.kw())?;
    let s = g.stride as isize;
    let (pt, pl) = (g.padding.top as isize, g.padding.left as isize);
    let mut z = Tensor3::zeros(k.out_channels(), oh, ow);
    for i in 1..=k.out_channels() {
        for j in 1..=oh {
            for kk in 1..=ow {
                let mut acc = b[i - 1];
                for l in 1..=k.in_channels() {
                    for m in 1..=k.kh() {
                        for n in 1..=k.kw() {
                            let y = (j as isize - 1) * s + m as isize - pt;
                            let x = (kk as isize - 1) * s + n as isize - pl;
                            acc += padded(v, l, y, x) * k.get(i - 1, l - 1, m - 1, n - 1);
                        }
                    }
                }
                z.set(i - 1, j - 1, kk - 1, acc);
            }
        }
    }
    Ok(z)
}

/// `Z[i,j,k] = sum_{(l-1)s+m=j} sum_{(n-1)s+p=k} sum_q V[q,l,n] K[q,i,m,p] + b[i]`
/// evaluated on the uncropped frame, then cropped by the padding.
pub fn transposed<T: Scalar>(v: &Tensor3<T>, k: &Tensor4<T>, b: &[T], g: &ConvGeometry) -> Result<Tensor3<T>> {
    let (oh, ow) = g.output_size(v.height(), v.width(), k.kh(), k.kw())?;
    let s = g.stride;
    let full_h = (v.height() - 1) * s + k.kh();
    let full_w = (v.width() - 1) * s + k.kw();
    let cout = k.in_channels();
    let mut full = Tensor3::zeros(cout, full_h, full_w);
    for i in 1..=cout {
        for j in 1..=full_h {
            for kk in 1..=full_w {
                let mut acc = T::zero();
                for l in 1..=v.height() {
                    for m in 1..=k.kh() {
                        if (l - 1) * s + m != j {
                            continue;
                        }
                        for n in 1..=v.width() {
                            for p in 1..=k.kw() {
                                if (n - 1) * s + p != kk {
                                    continue;
                                }
                                for q in 1..=v.channels() {
                                    acc += v.get(q - 1, l - 1, n - 1) * k.get(q - 1, i - 1, m - 1, p - 1);
                                }
                            }
                        }
                    }
                }
                full.set(i - 1, j - 1, kk - 1, acc);
            }
        }
    }
    let mut z = Tensor3::zeros(cout, oh, ow);
    for i in 0..cout {
        for y in 0..oh {
            for x in 0..ow {
                let val = full.get(i, y + g.padding.top, x + g.padding.left) + b[i];
                z.set(i, y, x, val);
            }
        }
    }
    Ok(z)
}

/// Forward pass dispatched on the geometry mode.
pub fn forward<T: Scalar>(v: &Tensor3<T>, k: &Tensor4<T>, b: &[T], g: &ConvGeometry) -> Result<Tensor3<T>> {
    match g.mode {
        ConvMode::Plain | ConvMode::Strided => strided(v, k, b, g),
        ConvMode::Transposed => transposed(v, k, b, g),
    }
}

/// Input gradient by explicit transposition of the forward sum: every term
/// `V[a] * K[b]` that feeds `Z[c]` sends `G[c] * K[b]` back to `a`.
pub fn backward_input<T: Scalar>(
    grad: &Tensor3<T>,
    k: &Tensor4<T>,
    g: &ConvGeometry,
    input_shape: (usize, usize, usize),
) -> Result<Tensor3<T>> {
    let (c, h, w) = input_shape;
    let mut dv = Tensor3::zeros(c, h, w);
    let s = g.stride as isize;
    let (pt, pl) = (g.padding.top as isize, g.padding.left as isize);
    match g.mode {
        ConvMode::Plain | ConvMode::Strided => {
            for i in 0..grad.channels() {
                for j in 0..grad.height() {
                    for kk in 0..grad.width() {
                        let gv = grad.get(i, j, kk);
                        for l in 0..c {
                            for m in 0..k.kh() {
                                for n in 0..k.kw() {
                                    let y = j as isize * s + m as isize - pt;
                                    let x = kk as isize * s + n as isize - pl;
                                    if y >= 0 && x >= 0 && y < h as isize && x < w as isize {
                                        let cur = dv.get(l, y as usize, x as usize);
                                        dv.set(l, y as usize, x as usize, cur + gv * k.get(i, l, m, n));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        ConvMode::Transposed => {
            for q in 0..c {
                for l in 0..h {
                    for n in 0..w {
                        let mut acc = T::zero();
                        for i in 0..grad.channels() {
                            for m in 0..k.kh() {
                                for p in 0..k.kw() {
                                    let y = l as isize * s + m as isize - pt;
                                    let x = n as isize * s + p as isize - pl;
                                    if y >= 0 && x >= 0 && y < grad.height() as isize && x < grad.width() as isize {
                                        acc += grad.get(i, y as usize, x as usize) * k.get(q, i, m, p);
                                    }
                                }
                            }
                        }
                        dv.set(q, l, n, acc);
                    }
                }
            }
        }
    }
    Ok(dv)
}

/// Kernel and bias gradients by the same term-by-term transposition.
pub fn backward_params<T: Scalar>(
    v: &Tensor3<T>,
    grad: &Tensor3<T>,
    kernel_shape: (usize, usize, usize, usize),
    g: &ConvGeometry,
) -> Result<(Tensor4<T>, Vec<T>)> {
    let (d0, d1, kh, kw) = kernel_shape;
    let mut dk = Tensor4::zeros(d0, d1, kh, kw);
    let s = g.stride as isize;
    let (pt, pl) = (g.padding.top as isize, g.padding.left as isize);
    for a in 0..d0 {
        for bb in 0..d1 {
            for m in 0..kh {
                for n in 0..kw {
                    let mut acc = T::zero();
                    match g.mode {
                        ConvMode::Plain | ConvMode::Strided => {
                            // a = output channel, bb = input channel
                            for j in 0..grad.height() {
                                for kk in 0..grad.width() {
                                    let y = j as isize * s + m as isize - pt;
                                    let x = kk as isize * s + n as isize - pl;
                                    if y >= 0 && x >= 0 && y < v.height() as isize && x < v.width() as isize {
                                        acc += grad.get(a, j, kk) * v.get(bb, y as usize, x as usize);
                                    }
                                }
                            }
                        }
                        ConvMode::Transposed => {
                            // a = input channel q, bb = output channel i
                            for l in 0..v.height() {
                                for p in 0..v.width() {
                                    let y = l as isize * s + m as isize - pt;
                                    let x = p as isize * s + n as isize - pl;
                                    if y >= 0 && x >= 0 && y < grad.height() as isize && x < grad.width() as isize {
                                        acc += v.get(a, l, p) * grad.get(bb, y as usize, x as usize);
                                    }
                                }
                            }
                        }
                    }
                    dk.set(a, bb, m, n, acc);
                }
            }
        }
    }
    let db = (0..grad.channels()).map(|c| grad.channel(c).iter().copied().sum()).collect();
    Ok((dk, db))
}
