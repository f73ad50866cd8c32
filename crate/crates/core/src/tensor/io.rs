//! FSCT binary tensor files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 4            | magic `FSCT`                              |
//! | 4            | format version, `u32` (= 1)               |
//! | 1            | rank `n` (3 or 4)                         |
//! | 4 n          | dimensions, `u32` each                    |
//! | 4 prod(dims) | values as IEEE-754 `f32`, canonical order |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Tensor3, Tensor4};
use crate::error::{Error, FormatError, Result};
use crate::scalar::Scalar;

const MAGIC: [u8; 4] = *b"FSCT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum AnyTensor<T> {
    Three(Tensor3<T>),
    Four(Tensor4<T>),
}

impl<T: Scalar> AnyTensor<T> {
    pub fn dims(&self) -> Vec<usize> {
        match self {
            AnyTensor::Three(t) => vec![t.channels(), t.height(), t.width()],
            AnyTensor::Four(k) => vec![k.out_channels(), k.in_channels(), k.kh(), k.kw()],
        }
    }

    pub fn data(&self) -> &[T] {
        match self {
            AnyTensor::Three(t) => t.data(),
            AnyTensor::Four(k) => k.data(),
        }
    }
}

impl<T> From<Tensor3<T>> for AnyTensor<T> {
    fn from(t: Tensor3<T>) -> Self {
        AnyTensor::Three(t)
    }
}

impl<T> From<Tensor4<T>> for AnyTensor<T> {
    fn from(k: Tensor4<T>) -> Self {
        AnyTensor::Four(k)
    }
}

/// Serializes `tensor` and returns the number of bytes written.
pub fn write_tensor<T: Scalar, W: Write>(tensor: &AnyTensor<T>, sink: &mut W) -> Result<usize> {
    let dims = tensor.dims();
    if dims.contains(&0) {
        return Err(Error::shape("cannot serialize a tensor with a zero dimension"));
    }
    let mut buf = Vec::with_capacity(9 + 4 * dims.len() + 4 * tensor.data().len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(dims.len() as u8);
    for &d in &dims {
        let d = u32::try_from(d).map_err(|_| Error::shape("dimension exceeds u32"))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in tensor.data() {
        buf.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(buf.len())
}

fn read_exact_or<R: Read>(src: &mut R, buf: &mut [u8], what: &'static str) -> Result<()> {
    src.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(FormatError::Truncated(what)),
        _ => Error::Io(e),
    })
}

pub fn read_tensor<T: Scalar, R: Read>(source: &mut R) -> Result<AnyTensor<T>> {
    let mut magic = [0u8; 4];
    read_exact_or(source, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    let mut word = [0u8; 4];
    read_exact_or(source, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let mut rank = [0u8; 1];
    read_exact_or(source, &mut rank, "rank")?;
    let rank = rank[0];
    if rank != 3 && rank != 4 {
        return Err(FormatError::UnsupportedRank(rank).into());
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        read_exact_or(source, &mut word, "dimensions")?;
        dims.push(u32::from_le_bytes(word) as usize);
    }
    if dims.contains(&0) {
        return Err(FormatError::EmptyDimension.into());
    }
    let count: usize = dims.iter().product();
    let mut raw = vec![0u8; count * 4];
    read_exact_or(source, &mut raw, "payload")?;
    let data: Vec<T> = raw
        .chunks_exact(4)
        .map(|c| T::from_f64_lossy(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Ok(match rank {
        3 => AnyTensor::Three(Tensor3::from_vec(dims[0], dims[1], dims[2], data)?),
        _ => AnyTensor::Four(Tensor4::from_vec(dims[0], dims[1], dims[2], dims[3], data)?),
    })
}

pub fn write_tensor_file<T: Scalar>(tensor: &AnyTensor<T>, path: impl AsRef<Path>) -> Result<usize> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = write_tensor(tensor, &mut w)?;
    w.flush()?;
    Ok(n)
}

pub fn read_tensor_file<T: Scalar>(path: impl AsRef<Path>) -> Result<AnyTensor<T>> {
    read_tensor(&mut BufReader::new(File::open(path)?))
}
