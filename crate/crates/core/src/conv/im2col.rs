use super::Padding;
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

/// Unfolds every `kh x kw` window of the zero-padded input into a column.
///
/// Returns a row-major `(C*kh*kw) x (ho*wo)` matrix and the window grid size.
pub(super) fn im2col<T: Scalar>(
    x: &Tensor3<T>,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: Padding,
) -> (Vec<T>, usize, usize) {
    let (c, h, w) = x.shape();
    let ho = (h + pad.vertical() - kh) / stride + 1;
    let wo = (w + pad.horizontal() - kw) / stride + 1;
    let n = ho * wo;
    let mut cols = vec![T::zero(); c * kh * kw * n];
    for ci in 0..c {
        let src = x.channel(ci);
        for m in 0..kh {
            for p in 0..kw {
                let row = (ci * kh + m) * kw + p;
                let dst = &mut cols[row * n..(row + 1) * n];
                for j in 0..ho {
                    let y = (j * stride + m) as isize - pad.top as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    let src_row = &src[y as usize * w..(y as usize + 1) * w];
                    let dst_row = &mut dst[j * wo..(j + 1) * wo];
                    for (k, d) in dst_row.iter_mut().enumerate() {
                        let xi = (k * stride + p) as isize - pad.left as isize;
                        if xi >= 0 && xi < w as isize {
                            *d = src_row[xi as usize];
                        }
                    }
                }
            }
        }
    }
    (cols, ho, wo)
}

/// Adjoint of [`im2col`]: scatters columns back onto an `h x w` frame,
/// summing overlaps and dropping entries that land in the padding.
#[allow(clippy::too_many_arguments)]
pub(super) fn col2im<T: Scalar>(
    cols: &[T],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: Padding,
    ho: usize,
    wo: usize,
) -> Tensor3<T> {
    let n = ho * wo;
    let mut out = Tensor3::zeros(c, h, w);
    for ci in 0..c {
        let dst = out.channel_mut(ci);
        for m in 0..kh {
            for p in 0..kw {
                let row = (ci * kh + m) * kw + p;
                let src = &cols[row * n..(row + 1) * n];
                for j in 0..ho {
                    let y = (j * stride + m) as isize - pad.top as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    let dst_row = &mut dst[y as usize * w..(y as usize + 1) * w];
                    let src_row = &src[j * wo..(j + 1) * wo];
                    for (k, &v) in src_row.iter().enumerate() {
                        let xi = (k * stride + p) as isize - pad.left as isize;
                        if xi >= 0 && xi < w as isize {
                            dst_row[xi as usize] += v;
                        }
                    }
                }
            }
        }
    }
    out
}
