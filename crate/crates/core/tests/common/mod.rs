#![allow(dead_code)]

use smoothconv::conv::{ConvGeometry, ConvMode, Padding};
use smoothconv::{Rng, Tensor3, Tensor4};

pub fn rand_t3(rng: &mut Rng, c: usize, h: usize, w: usize) -> Tensor3<f64> {
    Tensor3::from_vec(c, h, w, rng.normal_vec(c * h * w)).unwrap()
}

pub fn rand_t4(rng: &mut Rng, a: usize, b: usize, kh: usize, kw: usize) -> Tensor4<f64> {
    Tensor4::from_vec(a, b, kh, kw, rng.normal_vec(a * b * kh * kw)).unwrap()
}

/// A convolution with its operands.
pub struct Case {
    pub geometry: ConvGeometry,
    pub input: Tensor3<f64>,
    pub kernel: Tensor4<f64>,
    pub bias: Vec<f64>,
}

impl Case {
    pub fn describe(&self) -> String {
        format!(
            "{:?} s={} pad={:?} input={:?} kernel={:?}",
            self.geometry.mode,
            self.geometry.stride,
            self.geometry.padding,
            self.input.shape(),
            self.kernel.shape()
        )
    }
}

/// Random geometry: stride 1..=max_stride, kernel sides up to `max_k`,
/// channels up to `max_ch`, spatial size up to `max_hw`, any mode.
pub fn random_case(rng: &mut Rng, max_ch: usize, max_k: usize, max_hw: usize, max_stride: usize) -> Case {
    loop {
        let mode = match rng.below(3) {
            0 => ConvMode::Plain,
            1 => ConvMode::Strided,
            _ => ConvMode::Transposed,
        };
        let stride = match mode {
            ConvMode::Plain => 1,
            _ => 1 + rng.below(max_stride),
        };
        let kh = 1 + rng.below(max_k);
        let kw = 1 + rng.below(max_k);
        let pad = Padding {
            top: rng.below(kh),
            left: rng.below(kw),
            bottom: rng.below(kh),
            right: rng.below(kw),
        };
        let cin = 1 + rng.below(max_ch);
        let cout = 1 + rng.below(max_ch);
        let h = 1 + rng.below(max_hw);
        let w = 1 + rng.below(max_hw);
        let geometry = ConvGeometry { stride, padding: pad, mode };
        let ok = matches!(geometry.output_size(h, w, kh, kw), Ok((oh, ow)) if oh > 0 && ow > 0);
        if !ok {
            continue;
        }
        let kernel = match mode {
            ConvMode::Transposed => rand_t4(rng, cin, cout, kh, kw),
            _ => rand_t4(rng, cout, cin, kh, kw),
        };
        return Case { geometry, input: rand_t3(rng, cin, h, w), kernel, bias: rng.normal_vec(cout) };
    }
}

/// `|a - b| / max(|a|, |b|)`, or the absolute difference when both are
/// below `1e-6`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Independent divisibility oracle: solves `h = h0 * q` as a dense linear
/// system over exact rationals by Gauss-Jordan elimination. Returns the
/// quotient when the system is consistent.
pub fn elimination_quotient(h: &[Vec<i64>], rate: usize) -> Option<Vec<Vec<num_rational::Ratio<i64>>>> {
    use num_rational::Ratio;
    let (hr, hc) = (h.len(), h[0].len());
    if hr < rate || hc < rate {
        return None;
    }
    let (qr, qc) = (hr - rate + 1, hc - rate + 1);
    let unknowns = qr * qc;
    // one equation per entry of h: sum over q cells whose hold window covers it
    let mut rows: Vec<Vec<Ratio<i64>>> = Vec::with_capacity(hr * hc);
    for y in 0..hr {
        for x in 0..hc {
            let mut row = vec![Ratio::from_integer(0); unknowns + 1];
            for i in 0..qr {
                for j in 0..qc {
                    if y >= i && y < i + rate && x >= j && x < j + rate {
                        row[i * qc + j] = Ratio::from_integer(1);
                    }
                }
            }
            row[unknowns] = Ratio::from_integer(h[y][x]);
            rows.push(row);
        }
    }
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..unknowns {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][col] != Ratio::from_integer(0)) else {
            continue;
        };
        rows.swap(r, p);
        let inv = Ratio::from_integer(1) / rows[r][col];
        for v in rows[r].iter_mut() {
            *v *= inv;
        }
        for i in 0..rows.len() {
            if i != r && rows[i][col] != Ratio::from_integer(0) {
                let f = rows[i][col];
                for c in 0..=unknowns {
                    let sub = f * rows[r][c];
                    rows[i][c] -= sub;
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| row[unknowns] != Ratio::from_integer(0)) {
        return None;
    }
    let mut q = vec![vec![Ratio::from_integer(0); qc]; qr];
    for (i, &col) in pivot_cols.iter().enumerate() {
        q[col / qc][col % qc] = rows[i][unknowns];
    }
    Some(q)
}
