//! Model manifests: `key=value` metadata lines followed by one
//! `layer name file` line per stored tensor. Files are FSCT, relative to
//! the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::layers::{Layer, Network};
use crate::scalar::Scalar;
use crate::tensor::{read_tensor_file, write_tensor_file, AnyTensor, Tensor3};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub layer: usize,
    pub name: String,
    pub file: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub meta: BTreeMap<String, String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("manifest lacks {key:?}")))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                m.meta.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [layer, name, file] = parts[..] else {
                return Err(Error::Config(format!("manifest line {}: expected `layer name file`", n + 1)));
            };
            let layer = layer
                .parse()
                .map_err(|_| Error::Config(format!("manifest line {}: bad layer index", n + 1)))?;
            m.entries.push(ManifestEntry { layer, name: name.to_string(), file: PathBuf::from(file) });
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "{k}={v}");
        }
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {}", e.layer, e.name, e.file.display());
        }
        s
    }
}

fn vector<T: Scalar>(v: &[T]) -> Result<AnyTensor<T>> {
    Ok(AnyTensor::Three(Tensor3::from_vec(v.len(), 1, 1, v.to_vec())?))
}

fn stored<T: Scalar>(layer: &Layer<T>) -> Result<Vec<(&'static str, AnyTensor<T>)>> {
    Ok(match layer {
        Layer::Conv(c) => vec![("kernel", AnyTensor::Four(c.kernel.clone())), ("bias", vector(&c.bias)?)],
        Layer::FixedSmooth(f) => vec![("bias", vector(&f.bias)?)],
        Layer::BatchNorm(bn) => vec![
            ("scale", vector(&bn.scale)?),
            ("shift", vector(&bn.shift)?),
            ("running_mean", vector(&bn.running_mean)?),
            ("running_var", vector(&bn.running_var)?),
        ],
        _ => vec![],
    })
}

/// Writes every parameter and BN statistic of `net` as `<stem>_<layer>_<name>.fsct`
/// plus `<stem>.manifest` in `dir`. Returns the manifest path.
pub fn save_network<T: Scalar>(
    net: &Network<T>,
    dir: impl AsRef<Path>,
    stem: &str,
    meta: &BTreeMap<String, String>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest { meta: meta.clone(), entries: Vec::new() };
    for (i, layer) in net.layers().iter().enumerate() {
        for (name, t) in stored(layer)? {
            let file = PathBuf::from(format!("{stem}_{i}_{name}.fsct"));
            write_tensor_file(&t, dir.join(&file))?;
            manifest.entries.push(ManifestEntry { layer: i, name: name.to_string(), file });
        }
    }
    let path = dir.join(format!("{stem}.manifest"));
    fs::write(&path, manifest.to_text())?;
    Ok(path)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    Manifest::parse(&fs::read_to_string(path)?)
}

/// Loads the tensors named by `manifest` into a network of matching shape.
pub fn load_into<T: Scalar>(net: &mut Network<T>, manifest: &Manifest, base: impl AsRef<Path>) -> Result<()> {
    let base = base.as_ref();
    for e in &manifest.entries {
        let t: AnyTensor<T> = read_tensor_file(base.join(&e.file))?;
        let layer = net
            .layers_mut()
            .get_mut(e.layer)
            .ok_or_else(|| Error::Config(format!("manifest names missing layer {}", e.layer)))?;
        let target: &mut [T] = match (layer, e.name.as_str()) {
            (Layer::Conv(c), "kernel") => {
                let (o, i, kh, kw) = c.kernel.shape();
                if t.dims() != vec![o, i, kh, kw] {
                    return Err(Error::shape(format!("layer {}: kernel shape {:?}", e.layer, t.dims())));
                }
                c.kernel.data_mut()
            }
            (Layer::Conv(c), "bias") => &mut c.bias,
            (Layer::FixedSmooth(f), "bias") => &mut f.bias,
            (Layer::BatchNorm(bn), "scale") => &mut bn.scale,
            (Layer::BatchNorm(bn), "shift") => &mut bn.shift,
            (Layer::BatchNorm(bn), "running_mean") => &mut bn.running_mean,
            (Layer::BatchNorm(bn), "running_var") => &mut bn.running_var,
            _ => return Err(Error::Config(format!("layer {} has no parameter {:?}", e.layer, e.name))),
        };
        if target.len() != t.data().len() {
            return Err(Error::shape(format!(
                "layer {} {}: expected {} values, file has {}",
                e.layer,
                e.name,
                target.len(),
                t.data().len()
            )));
        }
        target.copy_from_slice(t.data());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Approach, Init, Mode};
    use crate::tensor::Rng;
    use crate::train::presets::simple_cnn;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut net = simple_cnn::<f32>(3, Some(Approach::One), 0, 16, false).unwrap();
        net.initialize(&mut Rng::new(3), Init::He);
        let x = Tensor3::filled(3, 32, 32, 0.5f32);
        net.forward(&[x.clone(), x.clone()], Mode::Train).unwrap();
        let meta = BTreeMap::from([("preset".to_string(), "simple_cnn".to_string())]);
        let path = save_network(&net, dir.path(), "model", &meta).unwrap();
        let m = read_manifest(&path).unwrap();
        assert_eq!(m.get("preset").unwrap(), "simple_cnn");
        let mut fresh = simple_cnn::<f32>(3, Some(Approach::One), 0, 16, false).unwrap();
        load_into(&mut fresh, &m, dir.path()).unwrap();
        let a = net.forward(std::slice::from_ref(&x), Mode::Eval).unwrap();
        let b = fresh.forward(std::slice::from_ref(&x), Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_architecture_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let net = simple_cnn::<f32>(3, None, 0, 16, false).unwrap();
        let path = save_network(&net, dir.path(), "m", &BTreeMap::new()).unwrap();
        let m = read_manifest(path).unwrap();
        let mut other = simple_cnn::<f32>(3, None, 0, 8, false).unwrap();
        assert!(load_into(&mut other, &m, dir.path()).is_err());
    }
}
