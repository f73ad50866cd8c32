use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cross-entropy of `softmax(logits)` against `label`, with its gradient
/// `softmax - onehot`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::param(format!("label {label} out of range for {} classes", logits.len())));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<T> = exps.iter().map(|&e| e / sum).collect();
    grad[label] -= T::one();
    Ok((loss, grad))
}

/// Binary cross-entropy of `sigmoid(logit)` against a 0/1 target, with the
/// derivative `sigmoid(logit) - target`.
pub fn bce_with_logit<T: Scalar>(logit: T, target: T) -> (T, T) {
    // max(x,0) - x*t + ln(1 + exp(-|x|))
    let zero = T::zero();
    let loss = logit.max(zero) - logit * target + (-logit.abs()).exp().ln_1p();
    let sig = if logit >= zero {
        T::one() / (T::one() + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (T::one() + e)
    };
    (loss, sig - target)
}

/// Batch-mean losses and logit gradients for one adversarial step.
#[derive(Clone, Debug, PartialEq)]
pub struct GanLosses<T> {
    /// `mean BCE(D(x), 1) + mean BCE(D(G(z)), 0)`.
    pub discriminator: T,
    pub d_grad_real: Vec<T>,
    pub d_grad_fake: Vec<T>,
    /// Non-saturating `mean BCE(D(G(z)), 1)`.
    pub generator: T,
    pub g_grad_fake: Vec<T>,
}

pub fn gan_losses<T: Scalar>(real_logits: &[T], fake_logits: &[T]) -> GanLosses<T> {
    let nr = T::from_usize_lossy(real_logits.len().max(1));
    let nf = T::from_usize_lossy(fake_logits.len().max(1));
    let mut discriminator = T::zero();
    let mut d_grad_real = Vec::with_capacity(real_logits.len());
    for &x in real_logits {
        let (l, g) = bce_with_logit(x, T::one());
        discriminator += l / nr;
        d_grad_real.push(g / nr);
    }
    let mut d_grad_fake = Vec::with_capacity(fake_logits.len());
    let mut generator = T::zero();
    let mut g_grad_fake = Vec::with_capacity(fake_logits.len());
    for &x in fake_logits {
        let (l, g) = bce_with_logit(x, T::zero());
        discriminator += l / nf;
        d_grad_fake.push(g / nf);
        let (l, g) = bce_with_logit(x, T::one());
        generator += l / nf;
        g_grad_fake.push(g / nf);
    }
    GanLosses { discriminator, d_grad_real, d_grad_fake, generator, g_grad_fake }
}
