use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use super::adam::{Adam, AdamConfig};
use super::config::{DataSource, TrainConfig};
use super::data::{read_cifar10_file, synth_dataset, LabeledDataset};
use super::loss::softmax_cross_entropy;
use super::model::save_network;
use super::presets::{init_classifier, simple_cnn};
use crate::error::{Error, Result};
use crate::layers::{Mode, Network};
use crate::scalar::Scalar;
use crate::tensor::{Rng, Tensor3};

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc";

const TRAIN_DATA_SALT: u64 = 0x7a11_0001;
const TEST_DATA_SALT: u64 = 0x7a11_0002;
const SHUFFLE_SALT: u64 = 0x5bff_1e00;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6}",
            r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc
        );
    }
    s
}

#[derive(Clone, Debug)]
pub struct ClassifierRun<T> {
    pub net: Network<T>,
    pub metrics: Vec<EpochMetrics>,
    /// Files written when the config names an output directory.
    pub outputs: Vec<PathBuf>,
}

/// Train and test sets for `cfg`.
pub fn load_classification_data<T: Scalar>(cfg: &TrainConfig) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    match &cfg.dataset {
        DataSource::Synthetic => Ok((
            synth_dataset(10, cfg.train_size, cfg.image_size, cfg.seed ^ TRAIN_DATA_SALT)?,
            synth_dataset(10, cfg.test_size, cfg.image_size, cfg.seed ^ TEST_DATA_SALT)?,
        )),
        DataSource::Cifar10 { train, test } => {
            let mut tr = LabeledDataset { images: Vec::new(), labels: Vec::new(), classes: 10 };
            for p in train {
                tr.append(read_cifar10_file(p)?);
            }
            let te = read_cifar10_file(test)?;
            Ok((tr, te))
        }
    }
}

/// Summed loss and number of correct predictions over a batch.
fn score_batch<T: Scalar>(logits: &[Tensor3<T>], labels: &[usize], scale: T) -> Result<(f64, usize, Vec<Tensor3<T>>)> {
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grads = Vec::with_capacity(logits.len());
    for (z, &label) in logits.iter().zip(labels) {
        let (l, g) = softmax_cross_entropy(z.data(), label)?;
        loss += l.to_f64_lossy();
        let pred = z
            .data()
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0;
        correct += usize::from(pred == label);
        let g: Vec<T> = g.into_iter().map(|v| v * scale).collect();
        grads.push(Tensor3::from_vec(z.channels(), z.height(), z.width(), g)?);
    }
    Ok((loss, correct, grads))
}

/// Mean loss and accuracy in eval mode.
pub fn evaluate<T: Scalar>(net: &mut Network<T>, data: &LabeledDataset<T>, batch: usize) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for (imgs, labels) in data.images.chunks(batch).zip(data.labels.chunks(batch)) {
        let logits = net.forward(imgs, Mode::Eval)?;
        let (l, c, _) = score_batch(&logits, labels, T::one())?;
        loss += l;
        correct += c;
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains the simple CNN; deterministic for a given config.
pub fn train_classifier<T: Scalar>(cfg: &TrainConfig) -> Result<ClassifierRun<T>> {
    cfg.validate()?;
    let (train, test) = load_classification_data::<T>(cfg)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let in_ch = train.images[0].channels();
    let mut net = simple_cnn::<T>(in_ch, cfg.approach, cfg.order, cfg.width_divisor, cfg.final_relu)?;
    init_classifier(&mut net, cfg.seed);
    let mut adam = Adam::new(AdamConfig::new(cfg.lr, cfg.beta1, cfg.beta2));
    let mut shuffle = Rng::new(cfg.seed ^ SHUFFLE_SALT);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        adam.set_lr(cfg.schedule.lr_at(cfg.lr, epoch));
        let order = shuffle.permutation(train.len());
        let mut loss = 0.0;
        let mut correct = 0;
        let mut seen = 0;
        for idx in order.chunks(cfg.batch_size) {
            if idx.len() < 2 {
                continue;
            }
            let imgs: Vec<Tensor3<T>> = idx.iter().map(|&i| train.images[i].clone()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
            let logits = net.forward(&imgs, Mode::Train)?;
            let scale = T::one() / T::from_usize_lossy(idx.len());
            let (l, c, grads) = score_batch(&logits, &labels, scale)?;
            if !l.is_finite() {
                return Err(Error::Diverged(format!("epoch {epoch}: non-finite training loss")));
            }
            loss += l;
            correct += c;
            seen += idx.len();
            let (_, g) = net.backward(&grads)?;
            adam.step(&mut net, &g)?;
        }
        let (test_loss, test_acc) = evaluate(&mut net, &test, cfg.batch_size)?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss / seen.max(1) as f64,
            train_acc: correct as f64 / seen.max(1) as f64,
            test_loss,
            test_acc,
        });
    }
    let mut outputs = Vec::new();
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        let csv = dir.join("metrics.csv");
        fs::write(&csv, metrics_csv(&metrics))?;
        outputs.push(csv);
        let mut meta = config_meta(cfg);
        meta.insert("in_channels".into(), in_ch.to_string());
        outputs.push(save_network(&net, dir, "model", &meta)?);
    }
    Ok(ClassifierRun { net, metrics, outputs })
}

/// Config keys as manifest metadata.
pub(crate) fn config_meta(cfg: &TrainConfig) -> BTreeMap<String, String> {
    cfg.to_text()
        .lines()
        .filter_map(|l| l.split_once('='))
        .filter(|(k, _)| *k != "out_dir")
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let m = EpochMetrics { epoch: 1, train_loss: 2.5, train_acc: 0.1, test_loss: 1.0, test_acc: 0.25 };
        assert_eq!(
            metrics_csv(&[m]),
            "epoch,train_loss,train_acc,test_loss,test_acc\n1,2.500000,0.100000,1.000000,0.250000\n"
        );
    }

    #[test]
    fn tiny_run_is_repeatable() {
        let cfg = TrainConfig { epochs: 2, train_size: 40, test_size: 20, batch_size: 8, width_divisor: 16, ..TrainConfig::desk_classifier() };
        let a = train_classifier::<f32>(&cfg).unwrap();
        let b = train_classifier::<f32>(&cfg).unwrap();
        assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
        assert_eq!(a.metrics.len(), 2);
    }
}
