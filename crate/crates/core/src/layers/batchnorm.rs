//! Per-channel batch normalization over batch and spatial axes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

use super::Mode;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct BatchNorm<T> {
    pub scale: Vec<T>,
    pub shift: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub trainable: bool,
    cache: Option<Cache<T>>,
}

#[derive(Clone, Debug)]
struct Cache<T> {
    normalized: Vec<Tensor3<T>>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            scale: vec![T::one(); channels],
            shift: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            trainable: true,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    /// Parameters and running statistics in another precision; no cache.
    pub fn cast<U: Scalar>(&self) -> BatchNorm<U> {
        let c = |v: &[T]| v.iter().map(|x| U::from_f64_lossy(x.to_f64_lossy())).collect();
        BatchNorm {
            scale: c(&self.scale),
            shift: c(&self.shift),
            running_mean: c(&self.running_mean),
            running_var: c(&self.running_var),
            trainable: self.trainable,
            cache: None,
        }
    }

    pub fn forward(&mut self, batch: &[Tensor3<T>], mode: Mode) -> Result<Vec<Tensor3<T>>> {
        let c = self.channels();
        if let Some(bad) = batch.iter().find(|v| v.channels() != c) {
            return Err(Error::shape(format!(
                "batchnorm over {c} channels got input with {}",
                bad.channels()
            )));
        }
        let eps = T::from_f64_lossy(BN_EPSILON);
        let (mean, var) = match mode {
            Mode::Train => {
                let per = batch.first().map_or(0, |v| v.height() * v.width());
                let n = per * batch.len();
                if n < 2 {
                    return Err(Error::shape("batchnorm statistics need more than one value per channel"));
                }
                let nt = T::from_usize_lossy(n);
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                for ch in 0..c {
                    let m = batch.iter().map(|v| v.channel(ch).iter().copied().sum::<T>()).sum::<T>() / nt;
                    let s = batch
                        .iter()
                        .map(|v| v.channel(ch).iter().map(|&x| (x - m) * (x - m)).sum::<T>())
                        .sum::<T>();
                    mean[ch] = m;
                    var[ch] = s / nt;
                    let mom = T::from_f64_lossy(BN_MOMENTUM);
                    let unbiased = s / T::from_usize_lossy(n - 1);
                    self.running_mean[ch] = (T::one() - mom) * self.running_mean[ch] + mom * m;
                    self.running_var[ch] = (T::one() - mom) * self.running_var[ch] + mom * unbiased;
                }
                (mean, var)
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut normalized = Vec::with_capacity(batch.len());
        let mut out = Vec::with_capacity(batch.len());
        for v in batch {
            let mut xh = v.clone();
            let mut y = v.clone();
            for ch in 0..c {
                let (m, is, g, b) = (mean[ch], inv_std[ch], self.scale[ch], self.shift[ch]);
                for (xv, yv) in xh.channel_mut(ch).iter_mut().zip(y.channel_mut(ch).iter_mut()) {
                    let n = (*xv - m) * is;
                    *xv = n;
                    *yv = g * n + b;
                }
            }
            normalized.push(xh);
            out.push(y);
        }
        self.cache = Some(Cache { normalized, inv_std, mode });
        Ok(out)
    }

    /// Returns input gradients and `(d scale, d shift)`.
    pub fn backward(&mut self, grads: &[Tensor3<T>]) -> Result<(Vec<Tensor3<T>>, Vec<T>, Vec<T>)> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::shape("batchnorm backward before forward"))?;
        if grads.len() != cache.normalized.len() {
            return Err(Error::shape("batchnorm gradient batch size mismatch"));
        }
        let c = self.channels();
        let mut dscale = vec![T::zero(); c];
        let mut dshift = vec![T::zero(); c];
        for (g, xh) in grads.iter().zip(&cache.normalized) {
            if g.shape() != xh.shape() {
                return Err(Error::shape("batchnorm gradient shape mismatch"));
            }
            for ch in 0..c {
                for (&gv, &xv) in g.channel(ch).iter().zip(xh.channel(ch)) {
                    dscale[ch] += gv * xv;
                    dshift[ch] += gv;
                }
            }
        }
        let per = grads.first().map_or(0, |v| v.height() * v.width());
        let nt = T::from_usize_lossy(per * grads.len());
        let mut dx = Vec::with_capacity(grads.len());
        for (g, xh) in grads.iter().zip(&cache.normalized) {
            let mut d = g.clone();
            for ch in 0..c {
                let k = self.scale[ch] * cache.inv_std[ch];
                match cache.mode {
                    Mode::Train => {
                        // dx = k/N * (N g - sum g - xhat * sum(g xhat))
                        let (sg, sgx) = (dshift[ch], dscale[ch]);
                        for (dv, &xv) in d.channel_mut(ch).iter_mut().zip(xh.channel(ch)) {
                            *dv = k * (*dv - (sg + xv * sgx) / nt);
                        }
                    }
                    Mode::Eval => d.channel_mut(ch).iter_mut().for_each(|dv| *dv *= k),
                }
            }
            dx.push(d);
        }
        Ok((dx, dscale, dshift))
    }
}
