//! Labeled image sets: a procedural stand-in for CIFAR-10 and the CIFAR-10
//! binary reader.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Rng, Tensor3};

pub const CIFAR_RECORD: usize = 3073;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    pub images: Vec<Tensor3<T>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn append(&mut self, other: LabeledDataset<T>) {
        self.images.extend(other.images);
        self.labels.extend(other.labels);
        self.classes = self.classes.max(other.classes);
    }

    /// Channel mean, one channel per image.
    pub fn to_grayscale(&self) -> Self {
        let images = self
            .images
            .iter()
            .map(|im| {
                let (c, h, w) = im.shape();
                let ct = T::from_usize_lossy(c);
                let data = (0..h * w)
                    .map(|i| (0..c).map(|ch| im.channel(ch)[i]).sum::<T>() / ct)
                    .collect();
                Tensor3::from_vec(1, h, w, data).expect("non-empty image")
            })
            .collect();
        Self { images, labels: self.labels.clone(), classes: self.classes }
    }
}

const SYNTH_CLASSES: usize = 10;

/// Procedural labeled images.
///
/// Ten shape families (horizontal, vertical and both diagonal stripe sets,
/// plus, cross, disk, ring, square, triangle) drawn with random position,
/// scale, stripe period, colours and additive Gaussian noise. Labels cycle
/// round-robin so every class gets `n / classes` samples. Size 32 yields
/// 3-channel images, size 16 single-channel ones. Pixels lie in `[-1, 1]`.
pub fn synth_dataset<T: Scalar>(classes: usize, n: usize, size: usize, seed: u64) -> Result<LabeledDataset<T>> {
    let channels = match size {
        32 => 3,
        16 => 1,
        _ => return Err(Error::param(format!("synthetic image size must be 16 or 32, got {size}"))),
    };
    if classes == 0 || classes > SYNTH_CLASSES {
        return Err(Error::param(format!("synthetic classes must be in 1..={SYNTH_CLASSES}")));
    }
    if n < classes {
        return Err(Error::param("need at least one sample per class"));
    }
    let mut rng = Rng::new(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        images.push(render(label, size, channels, &mut rng));
        labels.push(label);
    }
    Ok(LabeledDataset { images, labels, classes })
}

fn render<T: Scalar>(label: usize, size: usize, channels: usize, rng: &mut Rng) -> Tensor3<T> {
    let cx = rng.uniform_range(-0.15, 0.15);
    let cy = rng.uniform_range(-0.15, 0.15);
    let scale = rng.uniform_range(0.8, 1.2);
    let period = rng.uniform_range(0.35, 0.6);
    let phase = rng.uniform_range(0.0, 2.0 * PI);
    let width = 0.12 * scale;
    let radius = 0.55 * scale;
    let fg: Vec<f64> = (0..channels).map(|_| rng.uniform_range(0.3, 1.0)).collect();
    let bg: Vec<f64> = (0..channels).map(|_| rng.uniform_range(-1.0, -0.3)).collect();
    let stripes = |t: f64| (2.0 * PI * t / period + phase).sin() > 0.0;
    let mut img = Tensor3::zeros(channels, size, size);
    for y in 0..size {
        for x in 0..size {
            let u = (x as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            let v = (y as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            let (du, dv) = (u - cx, v - cy);
            let r = (du * du + dv * dv).sqrt();
            let inside = match label {
                0 => stripes(v),
                1 => stripes(u),
                2 => stripes((u + v) / 2f64.sqrt()),
                3 => stripes((u - v) / 2f64.sqrt()),
                4 => (du.abs() < width || dv.abs() < width) && r < radius * 1.3,
                5 => {
                    let a = (du - dv).abs() / 2f64.sqrt();
                    let b = (du + dv).abs() / 2f64.sqrt();
                    (a < width || b < width) && r < radius * 1.3
                }
                6 => r < radius,
                7 => (r - radius).abs() < width,
                8 => du.abs().max(dv.abs()) < radius * 0.85,
                _ => dv < radius * 0.6 && dv > -radius && du.abs() < (dv + radius) * 0.6,
            };
            for c in 0..channels {
                let base = if inside { fg[c] } else { bg[c] };
                let val = (base + 0.15 * rng.normal()).clamp(-1.0, 1.0);
                img.set(c, y, x, T::from_f64_lossy(val));
            }
        }
    }
    img
}

/// Parses CIFAR-10 binary records: one label byte then 3072 pixel bytes
/// (R, G, B planes of 32x32, row-major). Pixels map to `x / 127.5 - 1`.
pub fn read_cifar10_batch<T: Scalar>(bytes: &[u8]) -> Result<LabeledDataset<T>> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD) {
        return Err(Error::param(format!(
            "CIFAR-10 batch length {} is not a positive multiple of {CIFAR_RECORD}",
            bytes.len()
        )));
    }
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD);
    let mut labels = Vec::with_capacity(images.capacity());
    for rec in bytes.chunks_exact(CIFAR_RECORD) {
        let label = rec[0] as usize;
        if label >= 10 {
            return Err(Error::param(format!("CIFAR-10 label {label} out of range")));
        }
        let data = rec[1..].iter().map(|&p| T::from_f64_lossy(p as f64 / 127.5 - 1.0)).collect();
        images.push(Tensor3::from_vec(3, 32, 32, data)?);
        labels.push(label);
    }
    Ok(LabeledDataset { images, labels, classes: 10 })
}

pub fn read_cifar10_file<T: Scalar>(path: impl AsRef<Path>) -> Result<LabeledDataset<T>> {
    read_cifar10_batch(&std::fs::read(path)?)
}
