//! Fixed smooth convolutional layers with a controllable order of smoothness.

pub mod analyzer;
pub mod conv;
pub mod error;
pub mod layers;
pub mod pgm;
pub mod scalar;
pub mod smooth;
pub mod tensor;
pub mod train;

pub use error::{Error, FormatError, Result};
pub use scalar::Scalar;
pub use tensor::{AnyTensor, Rng, Tensor3, Tensor4};

pub type Tensor3f = Tensor3<f32>;
pub type Tensor3d = Tensor3<f64>;
pub type Tensor4f = Tensor4<f32>;
pub type Tensor4d = Tensor4<f64>;
pub type Networkf = layers::Network<f32>;
pub type Networkd = layers::Network<f64>;
pub type Layerf = layers::Layer<f32>;
pub type Layerd = layers::Layer<f64>;
/// Exact kernel entries for divisibility checks on non-integer kernels.
pub type RationalGrid = smooth::Grid<num_rational::BigRational>;
