//! Adversarial training: one discriminator update then one generator update
//! per batch, with the non-saturating generator loss.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use super::adam::{Adam, AdamConfig};
use super::classify::config_meta;
use super::config::{DataSource, Preset, TrainConfig};
use super::data::{read_cifar10_file, synth_dataset};
use super::loss::{bce_with_logit, gan_losses};
use super::model::save_network;
use super::presets::{gan_desk, gan_paper, init_gan, GanPair};
use crate::analyzer::forward_step_response;
use crate::error::{Error, Result};
use crate::layers::{Approach, Mode};
use crate::pgm;
use crate::scalar::Scalar;
use crate::tensor::{Rng, Tensor3};

/// Input size used when measuring the generator's step responses.
pub const SCORE_INPUT_SIZE: usize = 32;
/// Number of fixed latents rendered at each checkpoint.
pub const SAMPLE_COUNT: usize = 16;

const DATA_SALT: u64 = 0x6a4e_0001;
const LATENT_SALT: u64 = 0x6a4e_0002;
const SAMPLE_SALT: u64 = 0x6a4e_0003;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanStep {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    /// Largest step-response score over the generator's upsampling blocks.
    pub score: f64,
    pub samples: Vec<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct GanRun<T> {
    pub pair: GanPair<T>,
    pub steps: Vec<GanStep>,
    pub checkpoints: Vec<Checkpoint>,
    pub outputs: Vec<PathBuf>,
}

pub fn steps_csv(rows: &[GanStep]) -> String {
    let mut s = String::from("step,d_loss,g_loss\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.6},{:.6}", r.step, r.d_loss, r.g_loss);
    }
    s
}

pub fn checkpoints_csv(rows: &[Checkpoint]) -> String {
    let mut s = String::from("step,score\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.12}", r.step, r.score);
    }
    s
}

pub fn build_gan<T: Scalar>(preset: Preset, approach: Option<Approach>, order: usize, latent_dim: usize) -> Result<GanPair<T>> {
    match preset {
        Preset::GanDesk => gan_desk(approach, order, latent_dim),
        Preset::GanPaper => gan_paper(approach, order, latent_dim),
        Preset::SimpleCnn => Err(Error::Config("simple_cnn is not a gan preset".into())),
    }
}

/// Worst step-response score over the generator's upsampling blocks,
/// measured in 64-bit.
pub fn generator_score<T: Scalar>(pair: &GanPair<T>) -> Result<f64> {
    let g = pair.generator.cast::<f64>();
    let mut worst = 0.0f64;
    for r in &pair.up_blocks {
        let rep = forward_step_response(&g.layers()[r.clone()], SCORE_INPUT_SIZE)?;
        worst = worst.max(rep.score);
    }
    Ok(worst)
}

pub fn latents<T: Scalar>(rng: &mut Rng, n: usize, dim: usize) -> Vec<Tensor3<T>> {
    (0..n)
        .map(|_| {
            let z = rng.normal_vec(dim).into_iter().map(T::from_f64_lossy).collect();
            Tensor3::from_vec(dim, 1, 1, z).expect("positive latent dim")
        })
        .collect()
}

/// Generator output for seeded latents, tiled into one image.
pub fn sample_grid<T: Scalar>(pair: &mut GanPair<T>, seed: u64, count: usize) -> Result<Tensor3<T>> {
    let z = latents(&mut Rng::new(seed), count, pair.latent_dim);
    let imgs = pair.generator.forward(&z, Mode::Eval)?;
    let cols = (count as f64).sqrt().ceil() as usize;
    pgm::tile(&imgs, cols, -T::one())
}

fn real_images<T: Scalar>(cfg: &TrainConfig, shape: (usize, usize, usize)) -> Result<Vec<Tensor3<T>>> {
    let data = match &cfg.dataset {
        DataSource::Synthetic => {
            if shape.1 != 32 {
                return Err(Error::Config(format!(
                    "no {}x{} data: the synthetic source renders 32x32 at most",
                    shape.1, shape.2
                )));
            }
            synth_dataset::<T>(10, cfg.train_size, 32, cfg.seed ^ DATA_SALT)?
        }
        DataSource::Cifar10 { train, .. } => {
            let mut d = read_cifar10_file::<T>(&train[0])?;
            for p in &train[1..] {
                d.append(read_cifar10_file(p)?);
            }
            d
        }
    };
    let data = if shape.0 == 1 { data.to_grayscale() } else { data };
    if data.images[0].shape() != shape {
        return Err(Error::Config(format!("dataset images {:?} do not match generator output {shape:?}", data.images[0].shape())));
    }
    Ok(data.images)
}

fn check_finite(step: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!("step {step}: {what} loss is {v}")))
    }
}

/// Trains the generator/discriminator pair of `cfg.preset`.
///
/// Every `sample_every` steps and after the last one, the generator's
/// step-response score is recorded and, with an output directory, a grid
/// of samples from fixed latents is written as PGM.
pub fn train_gan<T: Scalar>(cfg: &TrainConfig) -> Result<GanRun<T>> {
    cfg.validate()?;
    let mut pair = build_gan::<T>(cfg.preset, cfg.approach, cfg.order, cfg.latent_dim)?;
    init_gan(&mut pair, cfg.seed);
    let reals = real_images::<T>(cfg, pair.image_shape)?;
    let total = if cfg.steps > 0 { cfg.steps } else { cfg.epochs * (reals.len() / cfg.batch_size) };
    let adam_cfg = AdamConfig::new(cfg.lr, cfg.beta1, cfg.beta2);
    let mut opt_g = Adam::new(adam_cfg);
    let mut opt_d = Adam::new(adam_cfg);
    let mut rng = Rng::new(cfg.seed ^ LATENT_SALT);
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut order = rng.permutation(reals.len());
    let mut cursor = 0;
    let mut steps = Vec::with_capacity(total);
    let mut checkpoints = Vec::new();
    let mut outputs = Vec::new();
    let scale = T::one() / T::from_usize_lossy(cfg.batch_size);
    for step in 1..=total {
        if cursor + cfg.batch_size > order.len() {
            order = rng.permutation(reals.len());
            cursor = 0;
        }
        let real: Vec<Tensor3<T>> = order[cursor..cursor + cfg.batch_size].iter().map(|&i| reals[i].clone()).collect();
        cursor += cfg.batch_size;
        let z = latents::<T>(&mut rng, cfg.batch_size, pair.latent_dim);

        // discriminator: real -> 1, fake -> 0
        let fake = pair.generator.forward(&z, Mode::Train)?;
        let real_logits: Vec<T> = pair.discriminator.forward(&real, Mode::Train)?.iter().map(|t| t.data()[0]).collect();
        let grads: Vec<Tensor3<T>> =
            real_logits.iter().map(|&x| Tensor3::filled(1, 1, 1, bce_with_logit(x, T::one()).1 * scale)).collect();
        let (_, mut d_grads) = pair.discriminator.backward(&grads)?;
        let fake_logits: Vec<T> = pair.discriminator.forward(&fake, Mode::Train)?.iter().map(|t| t.data()[0]).collect();
        let losses = gan_losses(&real_logits, &fake_logits);
        check_finite(step, "discriminator", losses.discriminator.to_f64_lossy())?;
        let grads: Vec<Tensor3<T>> = losses.d_grad_fake.iter().map(|&g| Tensor3::filled(1, 1, 1, g)).collect();
        let (_, fake_grads) = pair.discriminator.backward(&grads)?;
        d_grads.accumulate(&fake_grads);
        opt_d.step(&mut pair.discriminator, &d_grads)?;

        // generator: fake -> 1 through the updated discriminator
        let logits: Vec<T> = pair.discriminator.forward(&fake, Mode::Train)?.iter().map(|t| t.data()[0]).collect();
        let g_losses = gan_losses(&[], &logits);
        check_finite(step, "generator", g_losses.generator.to_f64_lossy())?;
        let grads: Vec<Tensor3<T>> = g_losses.g_grad_fake.iter().map(|&g| Tensor3::filled(1, 1, 1, g)).collect();
        let (dx, _) = pair.discriminator.backward(&grads)?;
        let (_, g_grads) = pair.generator.backward(&dx)?;
        opt_g.step(&mut pair.generator, &g_grads)?;

        steps.push(GanStep {
            step,
            d_loss: losses.discriminator.to_f64_lossy(),
            g_loss: g_losses.generator.to_f64_lossy(),
        });

        if (cfg.sample_every > 0 && step % cfg.sample_every == 0) || step == total {
            let score = generator_score(&pair)?;
            let mut samples = Vec::new();
            if let Some(dir) = &cfg.out_dir {
                let grid = sample_grid(&mut pair, cfg.seed ^ SAMPLE_SALT, SAMPLE_COUNT)?;
                samples = pgm::write_image(dir.join(format!("samples_{step:06}.pgm")), &grid)?;
            }
            checkpoints.push(Checkpoint { step, score, samples });
        }
    }
    if let Some(dir) = &cfg.out_dir {
        let p = dir.join("gan_metrics.csv");
        fs::write(&p, steps_csv(&steps))?;
        outputs.push(p);
        let p = dir.join("gan_checkpoints.csv");
        fs::write(&p, checkpoints_csv(&checkpoints))?;
        outputs.push(p);
        let meta = config_meta(cfg);
        outputs.push(save_network(&pair.generator, dir, "generator", &meta)?);
        outputs.push(save_network(&pair.discriminator, dir, "discriminator", &meta)?);
    }
    Ok(GanRun { pair, steps, checkpoints, outputs })
}
