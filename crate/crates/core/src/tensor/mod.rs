//! Dense channel-major tensors.
//!
//! A [`Tensor3`] is a `C x H x W` feature map stored row-major within each
//! channel, channels one after another. Equations are usually written with
//! 1-based indices: element `(c, y, x)` in that notation lives at
//! `data[(c-1)*H*W + (y-1)*W + (x-1)]`. All accessors here are 0-based.

mod io;
mod rng;

pub use io::{read_tensor, read_tensor_file, write_tensor, write_tensor_file, AnyTensor};
pub use rng::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feature map: channels x height x width.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, T::zero())
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "tensor dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "{} values do not fill a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    /// Single-channel map from nested rows.
    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::shape("ragged rows"));
        }
        Self::from_vec(1, height, width, rows.concat())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        let i = self.index(c, y, x);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor3<U> {
        Tensor3 {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }
}

/// Convolution kernel: out_channels x in_channels x kh x kw.
///
/// For transposed convolutions the first axis indexes the layer's input
/// feature channels and the second its output channels (see [`crate::conv`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(out_channels: usize, in_channels: usize, kh: usize, kw: usize) -> Self {
        Self::filled(out_channels, in_channels, kh, kw, T::zero())
    }

    pub fn filled(out_channels: usize, in_channels: usize, kh: usize, kw: usize, value: T) -> Self {
        Self {
            out_channels,
            in_channels,
            kh,
            kw,
            data: vec![value; out_channels * in_channels * kh * kw],
        }
    }

    pub fn from_vec(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        data: Vec<T>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kh == 0 || kw == 0 {
            return Err(Error::shape(format!(
                "kernel dimensions must be positive, got {out_channels}x{in_channels}x{kh}x{kw}"
            )));
        }
        if data.len() != out_channels * in_channels * kh * kw {
            return Err(Error::shape(format!(
                "{} values do not fill a {out_channels}x{in_channels}x{kh}x{kw} kernel",
                data.len()
            )));
        }
        Ok(Self { out_channels, in_channels, kh, kw, data })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.out_channels, self.in_channels, self.kh, self.kw)
    }

    #[inline]
    pub fn index(&self, o: usize, i: usize, y: usize, x: usize) -> usize {
        debug_assert!(o < self.out_channels && i < self.in_channels && y < self.kh && x < self.kw);
        ((o * self.in_channels + i) * self.kh + y) * self.kw + x
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, y: usize, x: usize) -> T {
        self.data[self.index(o, i, y, x)]
    }

    #[inline]
    pub fn set(&mut self, o: usize, i: usize, y: usize, x: usize, v: T) {
        let idx = self.index(o, i, y, x);
        self.data[idx] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The 2-D filter `K[o, i, :, :]`, row-major.
    pub fn slice(&self, o: usize, i: usize) -> &[T] {
        let n = self.kh * self.kw;
        let start = (o * self.in_channels + i) * n;
        &self.data[start..start + n]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            kh: self.kh,
            kw: self.kw,
            data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_based_index_map() {
        // (c,y,x) = (2,1,3) in 1-based notation on a 2x2x3 tensor.
        let t = Tensor3::<f64>::zeros(2, 2, 3);
        assert_eq!(t.index(1, 0, 2), 2 * 3 + 2);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(Tensor3::<f64>::from_vec(0, 2, 2, vec![]).is_err());
        assert!(Tensor3::<f64>::from_vec(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(Tensor4::<f64>::from_vec(1, 1, 0, 1, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn index_map_is_bijective(c in 1usize..5, h in 1usize..9, w in 1usize..9) {
            let n = c * h * w;
            let t = Tensor3::from_vec(c, h, w, (0..n).map(|v| v as f64).collect()).unwrap();
            let mut seen = Vec::with_capacity(n);
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        seen.push(t.get(ci, y, x) as usize);
                    }
                }
            }
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }
}
