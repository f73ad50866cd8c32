use std::fmt;

use super::{Init, Layer, LayerKind, Mode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Rng, Tensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamName {
    Kernel,
    Bias,
    Scale,
    Shift,
}

impl ParamName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamName::Kernel => "kernel",
            ParamName::Bias => "bias",
            ParamName::Scale => "scale",
            ParamName::Shift => "shift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "kernel" => ParamName::Kernel,
            "bias" => ParamName::Bias,
            "scale" => ParamName::Scale,
            "shift" => ParamName::Shift,
            _ => return None,
        })
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId {
    pub layer: usize,
    pub name: ParamName,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamInfo {
    pub id: ParamId,
    pub len: usize,
    pub trainable: bool,
}

#[derive(Clone, Debug)]
pub struct ParamGrad<T> {
    pub id: ParamId,
    pub values: Vec<T>,
}

/// Gradients of every trainable parameter, ordered by layer.
#[derive(Clone, Debug, Default)]
pub struct Gradients<T> {
    pub params: Vec<ParamGrad<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.params.iter().find(|p| p.id == id).map(|p| p.values.as_slice())
    }

    /// Elementwise sum with another gradient set over the same parameters.
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        if self.params.is_empty() {
            self.params = other.params.clone();
            return;
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            debug_assert_eq!(a.id, b.id);
            a.values.iter_mut().zip(&b.values).for_each(|(x, &y)| *x += y);
        }
    }
}

/// Loss attached to the network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossHead {
    None,
    SoftmaxCrossEntropy,
    SigmoidBinary,
}

/// Sequential layer graph.
#[derive(Clone, Debug)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    pub head: LossHead,
    inputs: Vec<Vec<Tensor3<T>>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>, head: LossHead) -> Self {
        Self { layers, head, inputs: Vec::new() }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn push(&mut self, layer: Layer<T>) {
        self.layers.push(layer);
    }

    pub fn extend(&mut self, layers: impl IntoIterator<Item = Layer<T>>) {
        self.layers.extend(layers);
    }

    /// Copy in another precision; cached activations are dropped.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network::new(self.layers.iter().map(Layer::cast).collect(), self.head)
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn initialize(&mut self, rng: &mut Rng, init: Init) {
        for l in &mut self.layers {
            l.initialize(rng, init);
        }
    }

    pub fn forward(&mut self, batch: &[Tensor3<T>], mode: Mode) -> Result<Vec<Tensor3<T>>> {
        self.inputs.clear();
        let mut cur = batch.to_vec();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let next = layer
                .forward(&cur, mode)
                .map_err(|e| Error::Layer { layer: i, message: e.to_string() })?;
            self.inputs.push(cur);
            cur = next;
        }
        Ok(cur)
    }

    /// Backpropagates `grads` (one per sample) through the last forward pass.
    ///
    /// Returns the gradient with respect to the network input and the
    /// gradients of all trainable parameters.
    pub fn backward(&mut self, grads: &[Tensor3<T>]) -> Result<(Vec<Tensor3<T>>, Gradients<T>)> {
        if self.inputs.len() != self.layers.len() {
            return Err(Error::shape("backward called without a matching forward pass"));
        }
        let mut cur = grads.to_vec();
        let mut params = Vec::new();
        for i in (0..self.layers.len()).rev() {
            let (dx, p) = self.layers[i]
                .backward(&self.inputs[i], &cur)
                .map_err(|e| Error::Layer { layer: i, message: e.to_string() })?;
            for (name, values) in p.into_iter().rev() {
                params.push(ParamGrad { id: ParamId { layer: i, name }, values });
            }
            cur = dx;
        }
        params.reverse();
        Ok((cur, Gradients { params }))
    }

    /// Every parameter, trainable or not. Fixed kernels are not parameters.
    pub fn parameters(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        for (layer, l) in self.layers.iter().enumerate() {
            let mut add = |name, len, trainable| out.push(ParamInfo { id: ParamId { layer, name }, len, trainable });
            match l {
                Layer::Conv(c) => {
                    add(ParamName::Kernel, c.kernel.len(), c.kernel_trainable);
                    add(ParamName::Bias, c.bias.len(), c.bias_trainable);
                }
                Layer::FixedSmooth(f) => add(ParamName::Bias, f.bias.len(), f.bias_trainable),
                Layer::BatchNorm(bn) => {
                    add(ParamName::Scale, bn.scale.len(), bn.trainable);
                    add(ParamName::Shift, bn.shift.len(), bn.trainable);
                }
                _ => {}
            }
        }
        out
    }

    pub fn trainable_count(&self) -> usize {
        self.parameters().iter().filter(|p| p.trainable).map(|p| p.len).sum()
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.parameters().iter().any(|p| p.id == id && p.trainable)
    }

    pub fn param(&self, id: ParamId) -> Option<&[T]> {
        match (self.layers.get(id.layer)?, id.name) {
            (Layer::Conv(c), ParamName::Kernel) => Some(c.kernel.data()),
            (Layer::Conv(c), ParamName::Bias) => Some(&c.bias),
            (Layer::FixedSmooth(f), ParamName::Bias) => Some(&f.bias),
            (Layer::BatchNorm(bn), ParamName::Scale) => Some(&bn.scale),
            (Layer::BatchNorm(bn), ParamName::Shift) => Some(&bn.shift),
            _ => None,
        }
    }

    pub fn param_mut(&mut self, id: ParamId) -> Option<&mut [T]> {
        match (self.layers.get_mut(id.layer)?, id.name) {
            (Layer::Conv(c), ParamName::Kernel) => Some(c.kernel.data_mut()),
            (Layer::Conv(c), ParamName::Bias) => Some(&mut c.bias),
            (Layer::FixedSmooth(f), ParamName::Bias) => Some(&mut f.bias),
            (Layer::BatchNorm(bn), ParamName::Scale) => Some(&mut bn.scale),
            (Layer::BatchNorm(bn), ParamName::Shift) => Some(&mut bn.shift),
            _ => None,
        }
    }

    /// Output shape for a single input of the given shape, without running
    /// any arithmetic-heavy code paths beyond shape checks.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let mut shape = input;
        for (i, l) in self.layers.iter().enumerate() {
            let wrap = |e: Error| Error::Layer { layer: i, message: e.to_string() };
            shape = match l {
                Layer::Conv(c) => {
                    if shape.0 != c.in_channels() {
                        return Err(wrap(Error::shape(format!(
                            "expects {} channels, got {}",
                            c.in_channels(),
                            shape.0
                        ))));
                    }
                    let (h, w) = c
                        .geometry
                        .output_size(shape.1, shape.2, c.kernel.kh(), c.kernel.kw())
                        .map_err(wrap)?;
                    (c.out_channels(), h, w)
                }
                Layer::FixedSmooth(f) => {
                    if shape.0 != f.channels() {
                        return Err(wrap(Error::shape("fixed layer channel mismatch")));
                    }
                    let k = f.kernel().size();
                    let h = (shape.1 + f.padding.vertical() + 1).checked_sub(k);
                    let w = (shape.2 + f.padding.horizontal() + 1).checked_sub(k);
                    match (h, w) {
                        (Some(h), Some(w)) if h > 0 && w > 0 => (shape.0, h, w),
                        _ => return Err(wrap(Error::shape("input too small for fixed layer"))),
                    }
                }
                Layer::BatchNorm(bn) => {
                    if shape.0 != bn.channels() {
                        return Err(wrap(Error::shape("batchnorm channel mismatch")));
                    }
                    shape
                }
                _ => shape,
            };
        }
        Ok(shape)
    }
}
