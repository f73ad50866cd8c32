//! Binary PGM (P5) output with min-max normalization.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor3;

/// Maps `values` onto 0..=255. The minimum goes to 0, the maximum to 255 and
/// intermediate values are rounded half away from zero. A constant map is
/// all zeros.
pub fn normalize(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![0; values.len()];
    }
    values.iter().map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8).collect()
}

/// P5 bytes for a `height x width` map.
pub fn encode(values: &[f64], height: usize, width: usize) -> Result<Vec<u8>> {
    if height == 0 || width == 0 || values.len() != height * width {
        return Err(Error::shape(format!("pgm: {} values for {height}x{width}", values.len())));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(normalize(values));
    Ok(out)
}

pub fn write_map(path: impl AsRef<Path>, values: &[f64], height: usize, width: usize) -> Result<()> {
    fs::write(path, encode(values, height, width)?)?;
    Ok(())
}

/// Writes a 1-channel image to `path`, or a 3-channel image to
/// `stem.r.pgm`, `stem.g.pgm`, `stem.b.pgm` next to it. Each channel is
/// normalized on its own. Returns the files written.
pub fn write_image<T: Scalar>(path: impl AsRef<Path>, img: &Tensor3<T>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let (c, h, w) = img.shape();
    let chan = |i: usize| img.channel(i).iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>();
    match c {
        1 => {
            write_map(path, &chan(0), h, w)?;
            Ok(vec![path.to_path_buf()])
        }
        3 => {
            let stem = path.with_extension("");
            let mut files = Vec::new();
            for (i, tag) in ["r", "g", "b"].iter().enumerate() {
                let p = PathBuf::from(format!("{}.{tag}.pgm", stem.display()));
                write_map(&p, &chan(i), h, w)?;
                files.push(p);
            }
            Ok(files)
        }
        _ => Err(Error::shape(format!("pgm images need 1 or 3 channels, got {c}"))),
    }
}

/// Tiles equally sized images into a grid with `cols` columns and a
/// one-pixel gap filled with `gap`.
pub fn tile<T: Scalar>(images: &[Tensor3<T>], cols: usize, gap: T) -> Result<Tensor3<T>> {
    let first = images.first().ok_or_else(|| Error::shape("no images to tile"))?;
    let (c, h, w) = first.shape();
    if images.iter().any(|im| im.shape() != (c, h, w)) {
        return Err(Error::shape("tiled images differ in shape"));
    }
    let cols = cols.clamp(1, images.len());
    let rows = images.len().div_ceil(cols);
    let gh = rows * (h + 1) - 1;
    let gw = cols * (w + 1) - 1;
    let mut grid = Tensor3::filled(c, gh, gw, gap);
    for (n, im) in images.iter().enumerate() {
        let (oy, ox) = ((n / cols) * (h + 1), (n % cols) * (w + 1));
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    grid.set(ch, oy + y, ox + x, im.get(ch, y, x));
                }
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_levels() {
        let bytes = encode(&[0.0, 0.5, 1.0, 0.25], 2, 2).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        // 127.5 rounds away from zero
        assert_eq!(&bytes[11..], &[0, 128, 255, 64]);
    }

    #[test]
    fn constant_map_is_black() {
        assert_eq!(normalize(&[3.0; 4]), vec![0; 4]);
    }

    #[test]
    fn tiling() {
        let a = Tensor3::<f64>::filled(1, 2, 2, 1.0);
        let g = tile(&[a.clone(), a.clone(), a], 2, 0.0).unwrap();
        assert_eq!(g.shape(), (1, 5, 5));
        assert_eq!(g.get(0, 2, 2), 0.0);
        assert_eq!(g.get(0, 3, 0), 1.0);
        assert_eq!(g.get(0, 3, 3), 0.0);
    }

    #[test]
    fn colour_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = Tensor3::<f32>::zeros(3, 2, 2);
        let files = write_image(dir.path().join("s.pgm"), &img).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["s.r.pgm", "s.g.pgm", "s.b.pgm"]);
    }
}
