//! Flat `key=value` training configuration.
//!
//! Blank lines and lines starting with `#` are ignored. A `profile` key
//! (`desk` or `paper`) selects the defaults every other key overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::Approach;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Classify,
    Gan,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(Task::Classify),
            "gan" => Ok(Task::Gan),
            _ => Err(Error::Config(format!("task must be classify or gan, got {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    SimpleCnn,
    GanDesk,
    GanPaper,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::SimpleCnn => "simple_cnn",
            Preset::GanDesk => "gan_desk",
            Preset::GanPaper => "gan_paper",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple_cnn" => Ok(Preset::SimpleCnn),
            "gan_desk" => Ok(Preset::GanDesk),
            "gan_paper" => Ok(Preset::GanPaper),
            _ => Err(Error::Config(format!("unknown preset {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Cifar10 { train: Vec<PathBuf>, test: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// Learning-rate multipliers applied once training has passed an epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule(pub Vec<(usize, f64)>);

impl Schedule {
    pub fn new(marks: Vec<(usize, f64)>) -> Result<Self> {
        if marks.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config("schedule epochs must be strictly increasing".into()));
        }
        if marks.iter().any(|&(_, m)| !(m.is_finite() && m > 0.0)) {
            return Err(Error::Config("schedule multipliers must be positive".into()));
        }
        Ok(Self(marks))
    }

    /// Learning rate during 1-based `epoch`: every mark strictly below it
    /// has been applied.
    pub fn lr_at(&self, base: f64, epoch: usize) -> f64 {
        self.0.iter().filter(|&&(e, _)| epoch > e).fold(base, |lr, &(_, m)| lr * m)
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::default());
        }
        let marks = s
            .split(',')
            .map(|item| {
                let (e, m) = item
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("schedule entry {item:?} is not epoch:multiplier")))?;
                Ok((parse_num(e.trim(), "schedule epoch")?, parse_num(m.trim(), "schedule multiplier")?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(marks)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.0.iter().map(|(e, m)| format!("{e}:{m}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub preset: Preset,
    pub approach: Option<Approach>,
    pub order: usize,
    pub epochs: usize,
    /// GAN optimizer steps.
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub schedule: Schedule,
    pub dataset: DataSource,
    pub train_size: usize,
    pub test_size: usize,
    pub image_size: usize,
    /// Divides every hidden channel count of the preset.
    pub width_divisor: usize,
    pub final_relu: bool,
    pub latent_dim: usize,
    /// GAN checkpoint interval in steps.
    pub sample_every: usize,
    pub precision: Precision,
    pub out_dir: Option<PathBuf>,
}

impl TrainConfig {
    /// Full-width classifier with Adam (0.1, 0.9, 0.999) and lr x0.1 after epochs 150 and 225.
    pub fn paper_classifier() -> Self {
        Self {
            task: Task::Classify,
            preset: Preset::SimpleCnn,
            approach: None,
            order: 0,
            epochs: 300,
            steps: 0,
            batch_size: 64,
            seed: 0,
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            schedule: Schedule(vec![(150, 0.1), (225, 0.1)]),
            dataset: DataSource::Synthetic,
            train_size: 50_000,
            test_size: 10_000,
            image_size: 32,
            width_divisor: 1,
            final_relu: false,
            latent_dim: 100,
            sample_every: 0,
            precision: Precision::F32,
            out_dir: None,
        }
    }

    /// Same network at a fraction of the width on synthetic data.
    pub fn desk_classifier() -> Self {
        Self {
            epochs: 20,
            lr: 1e-3,
            schedule: Schedule::default(),
            train_size: 2000,
            test_size: 500,
            width_divisor: 8,
            ..Self::paper_classifier()
        }
    }

    /// Full-size 64x64 generator and discriminator with Adam (0.08, 0.5, 0.9).
    pub fn paper_gan() -> Self {
        Self {
            task: Task::Gan,
            preset: Preset::GanPaper,
            approach: Some(Approach::One),
            order: 1,
            epochs: 10,
            steps: 0,
            batch_size: 64,
            seed: 0,
            lr: 0.08,
            beta1: 0.5,
            beta2: 0.9,
            schedule: Schedule::default(),
            dataset: DataSource::Synthetic,
            train_size: 202_599,
            test_size: 0,
            image_size: 64,
            width_divisor: 1,
            final_relu: false,
            latent_dim: 100,
            sample_every: 1000,
            precision: Precision::F32,
            out_dir: None,
        }
    }

    pub fn desk_gan() -> Self {
        Self {
            preset: Preset::GanDesk,
            steps: 200,
            batch_size: 16,
            lr: 2e-4,
            train_size: 512,
            image_size: 32,
            sample_every: 50,
            ..Self::paper_gan()
        }
    }

    pub fn defaults(task: Task, profile: Profile) -> Self {
        match (task, profile) {
            (Task::Classify, Profile::Desk) => Self::desk_classifier(),
            (Task::Classify, Profile::Paper) => Self::paper_classifier(),
            (Task::Gan, Profile::Desk) => Self::desk_gan(),
            (Task::Gan, Profile::Paper) => Self::paper_gan(),
        }
    }

    /// Parses a config for `task`. Unknown keys are rejected.
    pub fn parse(text: &str, task: Task) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let k = k.trim();
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
        }
        if let Some(t) = entries.remove("task") {
            if t.parse::<Task>()? != task {
                return Err(Error::Config(format!("config is for task {t:?}")));
            }
        }
        let profile = match entries.remove("profile").as_deref() {
            None | Some("desk") => Profile::Desk,
            Some("paper") => Profile::Paper,
            Some(p) => return Err(Error::Config(format!("profile must be desk or paper, got {p:?}"))),
        };
        let mut cfg = Self::defaults(task, profile);
        let mut cifar_train = Vec::new();
        let mut cifar_test = None;
        for (k, v) in &entries {
            let v = v.as_str();
            match k.as_str() {
                "preset" => cfg.preset = v.parse()?,
                "approach" => {
                    cfg.approach = match v {
                        "none" => None,
                        _ => Some(v.parse().map_err(|_| Error::Config(format!("approach must be none, 1 or 2, got {v:?}")))?),
                    }
                }
                "order" => cfg.order = parse_num(v, k)?,
                "epochs" => cfg.epochs = parse_num(v, k)?,
                "steps" => cfg.steps = parse_num(v, k)?,
                "batch_size" => cfg.batch_size = parse_num(v, k)?,
                "seed" => cfg.seed = parse_num(v, k)?,
                "lr" => cfg.lr = parse_num(v, k)?,
                "beta1" => cfg.beta1 = parse_num(v, k)?,
                "beta2" => cfg.beta2 = parse_num(v, k)?,
                "schedule" => cfg.schedule = v.parse()?,
                "dataset" => {
                    cfg.dataset = match v {
                        "synthetic" => DataSource::Synthetic,
                        "cifar10" => DataSource::Cifar10 { train: Vec::new(), test: PathBuf::new() },
                        _ => return Err(Error::Config(format!("dataset must be synthetic or cifar10, got {v:?}"))),
                    }
                }
                "cifar_train" => cifar_train = v.split(',').map(|p| PathBuf::from(p.trim())).collect(),
                "cifar_test" => cifar_test = Some(PathBuf::from(v)),
                "train_size" => cfg.train_size = parse_num(v, k)?,
                "test_size" => cfg.test_size = parse_num(v, k)?,
                "image_size" => cfg.image_size = parse_num(v, k)?,
                "width_divisor" => cfg.width_divisor = parse_num(v, k)?,
                "final_relu" => cfg.final_relu = parse_num(v, k)?,
                "latent_dim" => cfg.latent_dim = parse_num(v, k)?,
                "sample_every" => cfg.sample_every = parse_num(v, k)?,
                "precision" => {
                    cfg.precision = match v {
                        "f32" => Precision::F32,
                        "f64" => Precision::F64,
                        _ => return Err(Error::Config(format!("precision must be f32 or f64, got {v:?}"))),
                    }
                }
                "out_dir" => cfg.out_dir = Some(PathBuf::from(v)),
                _ => return Err(Error::Config(format!("unknown key {k:?}"))),
            }
        }
        if let DataSource::Cifar10 { train, test } = &mut cfg.dataset {
            *train = cifar_train;
            *test = cifar_test.ok_or_else(|| Error::Config("cifar10 dataset needs cifar_test".into()))?;
            if train.is_empty() {
                return Err(Error::Config("cifar10 dataset needs cifar_train".into()));
            }
        } else if !cifar_train.is_empty() || cifar_test.is_some() {
            return Err(Error::Config("cifar_train/cifar_test given without dataset=cifar10".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        match (self.task, self.preset) {
            (Task::Classify, Preset::SimpleCnn) | (Task::Gan, Preset::GanDesk | Preset::GanPaper) => {}
            _ => return bad("preset does not match the task"),
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2 for batch normalization");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.width_divisor == 0 {
            return bad("width_divisor must be positive");
        }
        Schedule::new(self.schedule.0.clone())?;
        match self.task {
            Task::Classify => {
                if self.epochs == 0 {
                    return bad("epochs must be positive");
                }
                if self.image_size != 32 {
                    return bad("simple_cnn needs 32x32 inputs");
                }
                if self.train_size == 0 || self.test_size == 0 {
                    return bad("train_size and test_size must be positive");
                }
            }
            Task::Gan => {
                if self.steps == 0 && self.epochs == 0 {
                    return bad("gan needs steps or epochs");
                }
                if self.latent_dim == 0 {
                    return bad("latent_dim must be positive");
                }
                if self.train_size < self.batch_size {
                    return bad("train_size must cover one batch");
                }
                let size = match self.preset {
                    Preset::GanPaper => 64,
                    _ => 32,
                };
                if self.image_size != size {
                    return bad("image_size does not match the gan preset");
                }
            }
        }
        Ok(())
    }

    /// `key=value` text that parses back to this config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("task", match self.task {
            Task::Classify => "classify".into(),
            Task::Gan => "gan".into(),
        });
        kv("preset", self.preset.as_str().into());
        kv("approach", self.approach.map_or("none".into(), |a| a.to_string()));
        kv("order", self.order.to_string());
        kv("epochs", self.epochs.to_string());
        kv("steps", self.steps.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("seed", self.seed.to_string());
        kv("lr", self.lr.to_string());
        kv("beta1", self.beta1.to_string());
        kv("beta2", self.beta2.to_string());
        kv("schedule", self.schedule.to_string());
        match &self.dataset {
            DataSource::Synthetic => kv("dataset", "synthetic".into()),
            DataSource::Cifar10 { train, test } => {
                kv("dataset", "cifar10".into());
                let t: Vec<String> = train.iter().map(|p| p.display().to_string()).collect();
                kv("cifar_train", t.join(","));
                kv("cifar_test", test.display().to_string());
            }
        }
        kv("train_size", self.train_size.to_string());
        kv("test_size", self.test_size.to_string());
        kv("image_size", self.image_size.to_string());
        kv("width_divisor", self.width_divisor.to_string());
        kv("final_relu", self.final_relu.to_string());
        kv("latent_dim", self.latent_dim.to_string());
        kv("sample_every", self.sample_every.to_string());
        kv("precision", match self.precision {
            Precision::F32 => "f32".into(),
            Precision::F64 => "f64".into(),
        });
        if let Some(d) = &self.out_dir {
            kv("out_dir", d.display().to_string());
        }
        s
    }
}

fn parse_num<N: FromStr>(v: &str, key: &str) -> Result<N> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}
