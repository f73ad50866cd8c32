//! Resampling blocks paired with a fixed smooth layer.
//!
//! Upsampling: transposed convolution followed by `K(d)` at rate = stride.
//! Downsampling: `K(d)` at rate = stride followed by the strided convolution,
//! so that the input gradient passes through `K(d)` last.
//!
//! The two approaches differ only in where the single trainable bias sits:
//!
//! | block | Approach 1                      | Approach 2                      |
//! |-------|---------------------------------|---------------------------------|
//! | up    | conv bias = 0, fixed bias train | conv bias train, fixed bias = 0 |
//! | down  | fixed bias = 0, conv bias train | fixed bias train, conv bias = 0 |

use std::fmt;
use std::str::FromStr;

use super::{ConvLayer, FixedSmoothLayer, Layer};
use crate::conv::{ConvGeometry, Padding};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Approach {
    One,
    Two,
}

impl Approach {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Approach::One),
            2 => Ok(Approach::Two),
            _ => Err(Error::param(format!("approach must be 1 or 2, got {id}"))),
        }
    }

    pub fn id(&self) -> u8 {
        match self {
            Approach::One => 1,
            Approach::Two => 2,
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| Error::param(format!("approach must be 1 or 2, got {s:?}")))
            .and_then(Approach::from_id)
    }
}

fn check_stride(stride: usize) -> Result<()> {
    if stride < 2 {
        return Err(Error::param(format!("resampling blocks need stride >= 2, got {stride}")));
    }
    Ok(())
}

/// `[transposed_conv, fixed_smooth]` with zero-initialized trainable kernel.
#[allow(clippy::too_many_arguments)]
pub fn build_upsample_block<T: Scalar>(
    approach: Approach,
    order: usize,
    in_ch: usize,
    out_ch: usize,
    kernel_size: usize,
    stride: usize,
    padding: Padding,
) -> Result<Vec<Layer<T>>> {
    check_stride(stride)?;
    let geometry = ConvGeometry::transposed(stride).with_padding(padding);
    let mut conv = ConvLayer::new(in_ch, out_ch, kernel_size, geometry);
    let fixed_bias = match approach {
        Approach::One => {
            conv = conv.without_bias();
            true
        }
        Approach::Two => false,
    };
    let fixed = FixedSmoothLayer::new(order, stride, out_ch, fixed_bias)?;
    Ok(vec![Layer::Conv(conv), Layer::FixedSmooth(fixed)])
}

/// `[fixed_smooth, strided_conv]` with zero-initialized trainable kernel.
#[allow(clippy::too_many_arguments)]
pub fn build_downsample_block<T: Scalar>(
    approach: Approach,
    order: usize,
    in_ch: usize,
    out_ch: usize,
    kernel_size: usize,
    stride: usize,
    padding: Padding,
) -> Result<Vec<Layer<T>>> {
    check_stride(stride)?;
    let geometry = ConvGeometry::strided(stride).with_padding(padding);
    let mut conv = ConvLayer::new(in_ch, out_ch, kernel_size, geometry);
    let fixed_bias = match approach {
        Approach::One => false,
        Approach::Two => {
            conv = conv.without_bias();
            true
        }
    };
    let fixed = FixedSmoothLayer::new(order, stride, in_ch, fixed_bias)?;
    Ok(vec![Layer::FixedSmooth(fixed), Layer::Conv(conv)])
}
