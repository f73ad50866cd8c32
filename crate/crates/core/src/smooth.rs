//! Fixed smooth kernels and the exact checkerboard-freedom test.
//!
//! The zero-order hold kernel `h0` of rate `r` is the `r x r` all-ones
//! matrix. The order-`d` smooth kernel is `h0` convolved with itself `d`
//! times:
//!
//! ```text
//! K(0) = h0
//! K(d) = K(d-1) * h0      (d >= 1)
//! ```
//!
//! so its side is `(d+1)(r-1)+1`, its entries are positive integers summing
//! to `r^(2(d+1))`, and every order is divisible by `h0`. An interpolator
//! (or the adjoint of a decimator) with filter `h` is free of checkerboard
//! artifacts exactly when `h = h0 * h'` for some `h'`; that test is carried
//! out here by exact polynomial division.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// Row-major 2-D array over an arbitrary ring, used for exact kernel algebra.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values for a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols).map(<[T]>::to_vec).collect()
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c).clone());
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }
}

impl<T: fmt::Display> fmt::Display for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let line: Vec<String> = self.data[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(ToString::to_string)
                .collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Full 2-D linear convolution; the result is `(ra+rb-1) x (ca+cb-1)`.
pub fn convolve_full<T>(a: &Grid<T>, b: &Grid<T>) -> Grid<T>
where
    T: Clone + Zero + Mul<Output = T>,
{
    let rows = a.rows + b.rows - 1;
    let cols = a.cols + b.cols - 1;
    let mut out = Grid::filled(rows, cols, T::zero());
    for i in 0..a.rows {
        for j in 0..a.cols {
            let av = a.get(i, j);
            for m in 0..b.rows {
                for n in 0..b.cols {
                    let idx = (i + m) * cols + j + n;
                    out.data[idx] = out.data[idx].clone() + av.clone() * b.get(m, n).clone();
                }
            }
        }
    }
    out
}

/// The `rate x rate` all-ones kernel `h0`.
pub fn zero_order_kernel(rate: usize) -> Result<Grid<i64>> {
    if rate < 1 {
        return Err(Error::param("rate must be at least 1"));
    }
    Ok(Grid::filled(rate, rate, 1))
}

/// Side length of `K(d)` at the given rate.
pub fn smooth_kernel_size(order: usize, rate: usize) -> usize {
    (order + 1) * (rate - 1) + 1
}

/// 2-D slice of `K(d)`.
pub fn smooth_slice(order: usize, rate: usize) -> Result<Grid<i64>> {
    let h0 = zero_order_kernel(rate)?;
    let mut k = h0.clone();
    for _ in 0..order {
        k = convolve_full(&k, &h0);
    }
    Ok(k)
}

/// Depthwise fixed kernel `K(d)`.
///
/// Every channel is filtered with the same integer slice and channels never
/// mix; the dense form puts that slice on the diagonal of a
/// `channels x channels x k x k` tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmoothKernel {
    rate: usize,
    order: usize,
    channels: usize,
    slice: Grid<i64>,
}

impl SmoothKernel {
    pub fn new(order: usize, rate: usize, channels: usize) -> Result<Self> {
        if channels < 1 {
            return Err(Error::param("channels must be at least 1"));
        }
        Ok(Self { rate, order, channels, slice: smooth_slice(order, rate)? })
    }

    pub fn rate(&self) -> usize {
        self.rate
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> usize {
        self.slice.rows()
    }

    pub fn slice(&self) -> &Grid<i64> {
        &self.slice
    }

    /// Slice as real values, row-major.
    pub fn slice_values<T: Scalar>(&self) -> Vec<T> {
        self.slice.data().iter().map(|&v| T::from_f64_lossy(v as f64)).collect()
    }

    /// Dense depthwise weights, zero off the channel diagonal.
    pub fn weights<T: Scalar>(&self) -> Tensor4<T> {
        let k = self.size();
        let mut w = Tensor4::zeros(self.channels, self.channels, k, k);
        let vals = self.slice_values::<T>();
        for c in 0..self.channels {
            for y in 0..k {
                for x in 0..k {
                    w.set(c, c, y, x, vals[y * k + x]);
                }
            }
        }
        w
    }
}

/// `smooth_kernel(d, rate, channels)`.
pub fn smooth_kernel(order: usize, rate: usize, channels: usize) -> Result<SmoothKernel> {
    SmoothKernel::new(order, rate, channels)
}

/// Exact division of a 1-D sequence (lowest degree first) by the length-`rate`
/// all-ones sequence. Returns the quotient when the remainder is zero.
pub fn divide_by_ones<T>(seq: &[T], rate: usize) -> Option<Vec<T>>
where
    T: Clone + Zero + PartialEq + Sub<Output = T> + Add<Output = T>,
{
    if rate == 0 || seq.len() < rate {
        return None;
    }
    let qlen = seq.len() - rate + 1;
    // The divisor is monic, so synthetic division stays in the ring:
    // seq[i] = sum_{j=0}^{rate-1} q[i-j].
    let mut q: Vec<T> = Vec::with_capacity(qlen);
    for i in 0..qlen {
        let mut acc = seq[i].clone();
        for j in 1..rate.min(i + 1) {
            acc = acc - q[i - j].clone();
        }
        q.push(acc);
    }
    // Remainder check on the remaining top coefficients.
    for i in qlen..seq.len() {
        let mut acc = T::zero();
        for j in 0..rate {
            if i >= j && i - j < qlen {
                acc = acc + q[i - j].clone();
            }
        }
        if acc != seq[i] {
            return None;
        }
    }
    Some(q)
}

/// Whether `h = h0 * h'` for the rate-`rate` hold kernel `h0`; returns `h'`.
///
/// Rows are divided by the 1-D all-ones sequence first, then the columns of
/// the partial quotient. The 2-D hold kernel is the outer product of two
/// 1-D all-ones sequences, so this is exact 2-D polynomial division.
pub fn is_checkerboard_free<T>(h: &Grid<T>, rate: usize) -> Option<Grid<T>>
where
    T: Clone + Zero + PartialEq + Sub<Output = T> + Add<Output = T>,
{
    if rate == 0 {
        return None;
    }
    let mut partial = Vec::with_capacity(h.rows);
    for r in 0..h.rows {
        partial.push(divide_by_ones(h.row(r), rate)?);
    }
    let partial = Grid::from_rows(&partial).ok()?.transpose();
    let mut cols = Vec::with_capacity(partial.rows);
    for c in 0..partial.rows {
        cols.push(divide_by_ones(partial.row(c), rate)?);
    }
    Some(Grid::from_rows(&cols).ok()?.transpose())
}

/// Integer view of a real grid, if every entry is an exact integer.
pub fn integer_grid<T: Scalar>(g: &Grid<T>) -> Option<Grid<i64>> {
    let mut out = Vec::with_capacity(g.data.len());
    for v in &g.data {
        let f = v.to_f64_lossy();
        if f.fract() != 0.0 || f.abs() > (1u64 << 53) as f64 {
            return None;
        }
        out.push(f as i64);
    }
    Grid::from_vec(g.rows, g.cols, out).ok()
}

/// Exact rational view of a real grid (every finite float is a rational).
pub fn rational_grid<T: Scalar>(g: &Grid<T>) -> Option<Grid<num_rational::BigRational>> {
    let mut out = Vec::with_capacity(g.data.len());
    for v in &g.data {
        out.push(num_rational::BigRational::from_float(v.to_f64_lossy())?);
    }
    Grid::from_vec(g.rows, g.cols, out).ok()
}

/// Identity element for full convolution.
pub fn unit_grid<T: Clone + One>() -> Grid<T> {
    Grid { rows: 1, cols: 1, data: vec![T::one()] }
}
