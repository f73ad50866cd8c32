//! Measuring checkerboard artifacts through step and impulse responses.
//!
//! A block is driven with an all-ones (DC) input. Away from the borders the
//! response of an artifact-free block is constant; a block that leaks the
//! resampling grid instead shows a pattern that repeats with period `P`, the
//! product of the block strides. The score is the spread between the
//! largest and smallest of the `P x P` polyphase means over the interior.

use crate::conv::ConvMode;
use crate::error::{Error, Result};
use crate::layers::{Layer, Mode};
use crate::scalar::Scalar;
use crate::smooth::Grid;
use crate::tensor::Tensor3;

/// Polyphase summary of a single-channel response.
#[derive(Clone, Debug, PartialEq)]
pub struct ArtifactReport {
    pub height: usize,
    pub width: usize,
    /// Row-major response of the first output (or input-gradient) channel.
    pub response: Vec<f64>,
    pub rate: usize,
    pub interior_margin: usize,
    /// `rate x rate`, row-major, indexed by `(y mod rate, x mod rate)`.
    pub phase_means: Vec<f64>,
    pub score: f64,
}

impl ArtifactReport {
    pub fn phase_mean(&self, py: usize, px: usize) -> f64 {
        self.phase_means[py * self.rate + px]
    }

    /// Response values inside the margin.
    pub fn interior(&self) -> Vec<f64> {
        let m = self.interior_margin;
        let mut out = Vec::new();
        for y in m..self.height.saturating_sub(m) {
            for x in m..self.width.saturating_sub(m) {
                out.push(self.response[y * self.width + x]);
            }
        }
        out
    }

    /// CSV with one row per phase plus a final score row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("phase_y,phase_x,mean\n");
        for py in 0..self.rate {
            for px in 0..self.rate {
                s.push_str(&format!("{py},{px},{}\n", self.phase_mean(py, px)));
            }
        }
        s.push_str(&format!("score,,{}\n", self.score));
        s
    }
}

/// Per-phase means over the interior and their max-min spread.
pub fn checkerboard_score(
    map: &[f64],
    height: usize,
    width: usize,
    rate: usize,
    margin: usize,
) -> Result<(Vec<f64>, f64)> {
    if rate == 0 {
        return Err(Error::param("rate must be positive"));
    }
    if map.len() != height * width {
        return Err(Error::shape("map size does not match its dimensions"));
    }
    let ih = height.saturating_sub(2 * margin);
    let iw = width.saturating_sub(2 * margin);
    if ih == 0 || iw == 0 {
        return Err(Error::shape(format!(
            "empty interior: {height}x{width} map with margin {margin}"
        )));
    }
    if ih < rate || iw < rate {
        return Err(Error::shape(format!(
            "interior {ih}x{iw} does not contain every phase of rate {rate}"
        )));
    }
    let mut sums = vec![0.0; rate * rate];
    let mut counts = vec![0usize; rate * rate];
    for y in margin..height - margin {
        for x in margin..width - margin {
            let p = (y % rate) * rate + x % rate;
            sums[p] += map[y * width + x];
            counts[p] += 1;
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((means, max - min))
}

/// Copy of `block` prepared for response measurement: biases zeroed and
/// batch normalization removed.
fn linearized<T: Scalar>(block: &[Layer<T>]) -> Vec<Layer<T>> {
    block
        .iter()
        .filter(|l| !matches!(l, Layer::BatchNorm(_)))
        .cloned()
        .map(|mut l| {
            match &mut l {
                Layer::Conv(c) => c.bias.iter_mut().for_each(|b| *b = T::zero()),
                Layer::FixedSmooth(f) => f.bias.iter_mut().for_each(|b| *b = T::zero()),
                _ => {}
            }
            l
        })
        .collect()
}

/// Copy of `block` with every trainable kernel set to all ones.
pub fn with_unit_kernels<T: Scalar>(block: &[Layer<T>]) -> Vec<Layer<T>> {
    block
        .iter()
        .cloned()
        .map(|mut l| {
            if let Layer::Conv(c) = &mut l {
                c.kernel.data_mut().iter_mut().for_each(|k| *k = T::one());
            }
            l
        })
        .collect()
}

fn input_channels<T: Scalar>(block: &[Layer<T>]) -> Result<usize> {
    block
        .iter()
        .find_map(|l| match l {
            Layer::Conv(c) => Some(c.in_channels()),
            Layer::FixedSmooth(f) => Some(f.channels()),
            _ => None,
        })
        .ok_or_else(|| Error::param("block has no convolution"))
}

fn total_rate<T: Scalar>(block: &[Layer<T>]) -> usize {
    block
        .iter()
        .map(|l| match l {
            Layer::Conv(c) => c.geometry.stride,
            _ => 1,
        })
        .product()
}

/// Border width (in map pixels) that boundary effects can reach.
///
/// Each layer contributes its kernel extent minus one, its largest pad and,
/// for resampling layers, `stride - 1` for the partial window at the far
/// edge, scaled by the resampling between that layer and the map.
fn interior_margin<T: Scalar>(block: &[Layer<T>], forward: bool) -> usize {
    let reach = |l: &Layer<T>| -> (usize, usize, ConvMode) {
        match l {
            Layer::Conv(c) => (
                c.kernel_size() - 1 + c.geometry.padding.max() + c.geometry.stride - 1,
                c.geometry.stride,
                c.geometry.mode,
            ),
            Layer::FixedSmooth(f) => (f.kernel().size() - 1 + f.padding.max(), 1, ConvMode::Plain),
            _ => (0, 1, ConvMode::Plain),
        }
    };
    let mut scale = 1;
    let mut margin = 0;
    if forward {
        // Map at the output; earlier upsamplers run at coarser resolution.
        for l in block.iter().rev() {
            let (r, s, mode) = reach(l);
            margin += r * scale;
            if mode == ConvMode::Transposed {
                scale *= s;
            }
        }
    } else {
        // Map at the input; later decimators run at coarser resolution.
        for l in block {
            let (r, s, mode) = reach(l);
            margin += r * scale;
            if mode == ConvMode::Strided {
                scale *= s;
            }
        }
    }
    margin
}

fn report(map: &Tensor3<f64>, rate: usize, margin: usize) -> Result<ArtifactReport> {
    let (h, w) = (map.height(), map.width());
    let response = map.channel(0).to_vec();
    let (phase_means, score) = checkerboard_score(&response, h, w, rate, margin)?;
    Ok(ArtifactReport { height: h, width: w, response, rate, interior_margin: margin, phase_means, score })
}

/// Response of the block's first output channel to an all-ones input of
/// size `input_size x input_size` on every input channel.
pub fn forward_step_response<T: Scalar>(block: &[Layer<T>], input_size: usize) -> Result<ArtifactReport> {
    let mut layers = linearized(block);
    let ch = input_channels(&layers)?;
    let input = Tensor3::filled(ch, input_size, input_size, T::one());
    let mut out = input;
    for l in &mut layers {
        out = l.forward(std::slice::from_ref(&out), Mode::Eval)?.remove(0);
    }
    report(&out.cast(), total_rate(&layers), interior_margin(&layers, true))
}

/// Input gradient of the block's first input channel when an all-ones
/// gradient arrives at every output.
pub fn backward_step_response<T: Scalar>(block: &[Layer<T>], input_size: usize) -> Result<ArtifactReport> {
    let mut layers = linearized(block);
    let ch = input_channels(&layers)?;
    let mut acts = vec![Tensor3::filled(ch, input_size, input_size, T::one())];
    for l in &mut layers {
        let next = l.forward(std::slice::from_ref(acts.last().unwrap()), Mode::Eval)?.remove(0);
        acts.push(next);
    }
    let last = acts.last().unwrap();
    let mut grad = Tensor3::filled(last.channels(), last.height(), last.width(), T::one());
    for (i, l) in layers.iter_mut().enumerate().rev() {
        grad = l.backward(std::slice::from_ref(&acts[i]), std::slice::from_ref(&grad))?.0.remove(0);
    }
    report(&grad.cast(), total_rate(&layers), interior_margin(&layers, false))
}

/// Composite filter seen from input channel 0 to output channel 0.
///
/// Drives the (bias-free, BN-free) block with a unit impulse and cuts out the
/// full support of the response, so the result is the end-to-end filter of
/// the block: for an upsampling block it is the transposed kernel slice
/// convolved with the fixed kernel. Supports stride-1 convolutions, transposed
/// convolutions and fixed layers.
pub fn impulse_response<T: Scalar>(block: &[Layer<T>]) -> Result<Grid<f64>> {
    let mut layers = linearized(block);
    // Support interval of the response, tracked per axis (square kernels).
    let track = |start: isize, len: usize, n: usize| -> Result<(isize, usize, usize)> {
        let mut start = start;
        let mut len = len;
        let mut n = n;
        for l in &layers {
            match l {
                Layer::Conv(c) if c.geometry.mode == ConvMode::Transposed => {
                    let (s, k) = (c.geometry.stride, c.kernel_size());
                    start = start * s as isize - c.geometry.padding.top as isize;
                    len = (len - 1) * s + k;
                    n = (n - 1) * s + k - c.geometry.padding.vertical();
                }
                Layer::Conv(c) if c.geometry.stride == 1 => {
                    let k = c.kernel_size();
                    start = start + c.geometry.padding.top as isize - (k as isize - 1);
                    len += k - 1;
                    n = n + c.geometry.padding.vertical() + 1 - k;
                }
                Layer::Conv(_) => return Err(Error::param("impulse response of a strided convolution is not a filter")),
                Layer::FixedSmooth(f) => {
                    let k = f.kernel().size();
                    start = start + f.padding.top as isize - (k as isize - 1);
                    len += k - 1;
                    n = n + f.padding.vertical() + 1 - k;
                }
                _ => {}
            }
        }
        Ok((start, len, n))
    };
    let extent: usize = layers
        .iter()
        .map(|l| match l {
            Layer::Conv(c) => c.kernel_size() + c.geometry.padding.max(),
            Layer::FixedSmooth(f) => f.kernel().size() + f.padding.max(),
            _ => 0,
        })
        .sum();
    let n = 2 * extent + 3;
    let centre = n / 2;
    let (start, len, out_n) = track(centre as isize, 1, n)?;
    if start < 0 || start as usize + len > out_n {
        return Err(Error::shape("impulse response does not fit the probe frame"));
    }
    let ch = input_channels(&layers)?;
    let mut x = Tensor3::zeros(ch, n, n);
    x.set(0, centre, centre, T::one());
    for l in &mut layers {
        x = l.forward(std::slice::from_ref(&x), Mode::Eval)?.remove(0);
    }
    let s = start as usize;
    let mut data = Vec::with_capacity(len * len);
    for y in s..s + len {
        for xx in s..s + len {
            data.push(x.get(0, y, xx).to_f64_lossy());
        }
    }
    Grid::from_vec(len, len, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_scores_zero() {
        let (means, score) = checkerboard_score(&[3.0; 36], 6, 6, 2, 1).unwrap();
        assert_eq!(means, vec![3.0; 4]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn column_parity_pattern() {
        let map: Vec<f64> = (0..36).map(|i| if (i % 6) % 2 == 0 { 2.0 } else { 1.0 }).collect();
        let (means, score) = checkerboard_score(&map, 6, 6, 2, 0).unwrap();
        assert_eq!(means, vec![2.0, 1.0, 2.0, 1.0]);
        assert_eq!(score, 1.0);
    }

    #[test]
    fn rate_one_is_always_zero() {
        let map: Vec<f64> = (0..25).map(|i| i as f64).collect();
        assert_eq!(checkerboard_score(&map, 5, 5, 1, 1).unwrap().1, 0.0);
    }

    #[test]
    fn empty_interior_is_an_error() {
        assert!(checkerboard_score(&[0.0; 16], 4, 4, 2, 2).is_err());
        assert!(checkerboard_score(&[0.0; 16], 4, 4, 2, 3).is_err());
    }
}
