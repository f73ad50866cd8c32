//! Desk-scale training: optimizer, losses, data, presets and loops.

pub mod adam;
pub mod classify;
pub mod config;
pub mod data;
pub mod gan;
pub mod loss;
pub mod model;
pub mod presets;

pub use adam::{adam_update, Adam, AdamConfig, Moments};
pub use classify::{evaluate, metrics_csv, train_classifier, ClassifierRun, EpochMetrics, METRICS_HEADER};
pub use config::{DataSource, Precision, Preset, Profile, Schedule, Task, TrainConfig};
pub use data::{read_cifar10_batch, read_cifar10_file, synth_dataset, LabeledDataset};
pub use gan::{generator_score, sample_grid, train_gan, Checkpoint, GanRun, GanStep};
pub use loss::{bce_with_logit, gan_losses, softmax_cross_entropy, GanLosses};
pub use model::{load_into, read_manifest, save_network, Manifest};
pub use presets::{gan_desk, gan_paper, simple_cnn, GanPair};
