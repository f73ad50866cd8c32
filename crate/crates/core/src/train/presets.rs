//! Network presets: the simple classifier and the GAN pair.

use std::ops::Range;

use crate::conv::{ConvGeometry, Padding};
use crate::error::{Error, Result};
use crate::layers::{
    build_downsample_block, build_upsample_block, Approach, BatchNorm, ConvLayer, Init, Layer, LossHead, Network,
};
use crate::scalar::Scalar;
use crate::tensor::Rng;

/// One row of a layer table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerRow {
    pub stride: usize,
    pub kernel: usize,
    pub channels: usize,
}

const fn row(stride: usize, kernel: usize, channels: usize) -> LayerRow {
    LayerRow { stride, kernel, channels }
}

/// Simple CNN: every row is conv + BN + ReLU.
pub const SIMPLE_CNN: [LayerRow; 5] = [row(2, 3, 64), row(2, 3, 128), row(2, 3, 256), row(2, 3, 512), row(1, 2, 10)];

/// Generator rows (transposed conv + BN + LeakyReLU), then conv + tanh.
pub const GAN_GENERATOR: [LayerRow; 6] =
    [row(2, 4, 512), row(2, 4, 512), row(2, 4, 512), row(2, 4, 256), row(2, 4, 128), row(2, 4, 64)];
pub const GAN_GENERATOR_OUT: LayerRow = row(1, 3, 3);

/// Discriminator rows (conv + BN + LeakyReLU), then a bare conv.
pub const GAN_DISCRIMINATOR: [LayerRow; 4] = [row(2, 4, 8), row(2, 4, 32), row(2, 4, 64), row(2, 4, 64)];
pub const GAN_DISCRIMINATOR_OUT: LayerRow = row(1, 4, 1);

pub const GAN_LATENT_DIM: usize = 100;

fn scaled(ch: usize, divisor: usize) -> usize {
    (ch / divisor).max(1)
}

fn stride2_padding(kernel: usize) -> Padding {
    // 3x3 -> pad 1, 4x4 -> pad 1: halves even sizes exactly
    Padding::uniform((kernel - 1) / 2)
}

/// The simple CNN for `in_ch x 32 x 32` inputs and 10 classes.
///
/// Hidden widths are divided by `width_divisor`. With an approach, each
/// stride-2 row becomes a downsampling block with the fixed layer in front.
pub fn simple_cnn<T: Scalar>(
    in_ch: usize,
    approach: Option<Approach>,
    order: usize,
    width_divisor: usize,
    final_relu: bool,
) -> Result<Network<T>> {
    if width_divisor == 0 {
        return Err(Error::param("width_divisor must be positive"));
    }
    let mut layers = Vec::new();
    let mut prev = in_ch;
    let last = SIMPLE_CNN.len() - 1;
    for (i, r) in SIMPLE_CNN.iter().enumerate() {
        let ch = if i == last { r.channels } else { scaled(r.channels, width_divisor) };
        if r.stride > 1 {
            let pad = stride2_padding(r.kernel);
            match approach {
                Some(a) => layers.extend(build_downsample_block(a, order, prev, ch, r.kernel, r.stride, pad)?),
                None => {
                    let g = ConvGeometry::strided(r.stride).with_padding(pad);
                    layers.push(Layer::Conv(ConvLayer::new(prev, ch, r.kernel, g)));
                }
            }
        } else {
            layers.push(Layer::Conv(ConvLayer::new(prev, ch, r.kernel, ConvGeometry::plain())));
        }
        layers.push(Layer::BatchNorm(BatchNorm::new(ch)));
        if i != last || final_relu {
            layers.push(Layer::Relu);
        }
        prev = ch;
    }
    Ok(Network::new(layers, LossHead::SoftmaxCrossEntropy))
}

/// Generator and discriminator with the layer ranges of the generator's
/// resampling blocks (transposed conv plus its fixed layer, if any).
#[derive(Clone, Debug)]
pub struct GanPair<T> {
    pub generator: Network<T>,
    pub discriminator: Network<T>,
    pub up_blocks: Vec<Range<usize>>,
    pub latent_dim: usize,
    /// `(channels, height, width)` of generated images.
    pub image_shape: (usize, usize, usize),
}

impl<T: Scalar> GanPair<T> {
    pub fn cast<U: Scalar>(&self) -> GanPair<U> {
        GanPair {
            generator: self.generator.cast(),
            discriminator: self.discriminator.cast(),
            up_blocks: self.up_blocks.clone(),
            latent_dim: self.latent_dim,
            image_shape: self.image_shape,
        }
    }
}

fn up_layers<T: Scalar>(
    layers: &mut Vec<Layer<T>>,
    up_blocks: &mut Vec<Range<usize>>,
    approach: Option<Approach>,
    order: usize,
    in_ch: usize,
    r: LayerRow,
) -> Result<()> {
    let start = layers.len();
    let pad = stride2_padding(r.kernel);
    match approach {
        Some(a) => layers.extend(build_upsample_block(a, order, in_ch, r.channels, r.kernel, r.stride, pad)?),
        None => {
            let g = ConvGeometry::transposed(r.stride).with_padding(pad);
            layers.push(Layer::Conv(ConvLayer::new(in_ch, r.channels, r.kernel, g)));
        }
    }
    up_blocks.push(start..layers.len());
    layers.push(Layer::BatchNorm(BatchNorm::new(r.channels)));
    layers.push(Layer::leaky_relu());
    Ok(())
}

fn down_layers<T: Scalar>(layers: &mut Vec<Layer<T>>, in_ch: usize, r: LayerRow) {
    let g = ConvGeometry::strided(r.stride).with_padding(stride2_padding(r.kernel));
    layers.push(Layer::Conv(ConvLayer::new(in_ch, r.channels, r.kernel, g)));
    layers.push(Layer::BatchNorm(BatchNorm::new(r.channels)));
    layers.push(Layer::leaky_relu());
}

/// Full-size pair: `latent_dim x 1 x 1` to `3 x 64 x 64` and back to one logit.
pub fn gan_paper<T: Scalar>(approach: Option<Approach>, order: usize, latent_dim: usize) -> Result<GanPair<T>> {
    let mut g = Vec::new();
    let mut up_blocks = Vec::new();
    let mut prev = latent_dim;
    for r in GAN_GENERATOR {
        up_layers(&mut g, &mut up_blocks, approach, order, prev, r)?;
        prev = r.channels;
    }
    let out = GAN_GENERATOR_OUT;
    g.push(Layer::Conv(ConvLayer::new(prev, out.channels, out.kernel, ConvGeometry::plain().with_pad(1))));
    g.push(Layer::Tanh);

    let mut d = Vec::new();
    let mut prev = out.channels;
    for r in GAN_DISCRIMINATOR {
        down_layers(&mut d, prev, r);
        prev = r.channels;
    }
    let o = GAN_DISCRIMINATOR_OUT;
    d.push(Layer::Conv(ConvLayer::new(prev, o.channels, o.kernel, ConvGeometry::plain())));
    Ok(GanPair {
        generator: Network::new(g, LossHead::None),
        discriminator: Network::new(d, LossHead::SigmoidBinary),
        up_blocks,
        latent_dim,
        image_shape: (3, 64, 64),
    })
}

/// Desk-scale pair for `1 x 32 x 32` images.
///
/// The latent vector is projected to `64 x 4 x 4` by a stride-1 transposed
/// convolution, then three stride-2 upsampling rows with 64, 32 and 16
/// channels reach 32x32. The discriminator mirrors it with 8, 16 and 32
/// channels and a final 4x4 convolution to one logit.
pub fn gan_desk<T: Scalar>(approach: Option<Approach>, order: usize, latent_dim: usize) -> Result<GanPair<T>> {
    let mut g = Vec::new();
    let mut up_blocks = Vec::new();
    g.push(Layer::Conv(ConvLayer::new(latent_dim, 64, 4, ConvGeometry::transposed(1))));
    g.push(Layer::BatchNorm(BatchNorm::new(64)));
    g.push(Layer::leaky_relu());
    let mut prev = 64;
    for ch in [64, 32, 16] {
        up_layers(&mut g, &mut up_blocks, approach, order, prev, row(2, 4, ch))?;
        prev = ch;
    }
    g.push(Layer::Conv(ConvLayer::new(prev, 1, 3, ConvGeometry::plain().with_pad(1))));
    g.push(Layer::Tanh);

    let mut d = Vec::new();
    let mut prev = 1;
    for ch in [8, 16, 32] {
        down_layers(&mut d, prev, row(2, 4, ch));
        prev = ch;
    }
    d.push(Layer::Conv(ConvLayer::new(prev, 1, 4, ConvGeometry::plain())));
    Ok(GanPair {
        generator: Network::new(g, LossHead::None),
        discriminator: Network::new(d, LossHead::SigmoidBinary),
        up_blocks,
        latent_dim,
        image_shape: (1, 32, 32),
    })
}

/// He-normal kernels for the classifier.
pub fn init_classifier<T: Scalar>(net: &mut Network<T>, seed: u64) {
    net.initialize(&mut Rng::new(seed), Init::He);
}

/// N(0, 0.02) kernels for both GAN networks.
pub fn init_gan<T: Scalar>(pair: &mut GanPair<T>, seed: u64) {
    let mut rng = Rng::new(seed);
    pair.generator.initialize(&mut rng, Init::Normal(0.02));
    pair.discriminator.initialize(&mut rng, Init::Normal(0.02));
}
