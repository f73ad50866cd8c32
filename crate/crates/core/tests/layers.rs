mod common;

use common::{rand_t3, rel_err};
use smoothconv::conv::{ConvGeometry, Padding};
use smoothconv::layers::{
    build_downsample_block, build_upsample_block, Approach, BatchNorm, ConvLayer, FixedSmoothLayer, Gradients, Init,
    Layer, LayerKind, LossHead, Mode, Network, ParamName,
};
use smoothconv::train::{bce_with_logit, simple_cnn, softmax_cross_entropy, Adam, AdamConfig};
use smoothconv::{Rng, Tensor3};

fn toy_net(rng: &mut Rng) -> Network<f64> {
    let layers = vec![
        Layer::Conv(ConvLayer::new(2, 3, 3, ConvGeometry::strided(2).with_pad(1))),
        Layer::BatchNorm(BatchNorm::new(3)),
        Layer::leaky_relu(),
        Layer::FixedSmooth(FixedSmoothLayer::new(1, 2, 3, true).unwrap()),
        Layer::Conv(ConvLayer::new(3, 2, 2, ConvGeometry::plain())),
        Layer::Tanh,
    ];
    let mut net = Network::new(layers, LossHead::None);
    net.initialize(rng, Init::He);
    for p in net.parameters() {
        let vals = rng.normal_vec(p.len);
        if p.id.name != ParamName::Kernel {
            net.param_mut(p.id).unwrap().iter_mut().zip(vals).for_each(|(a, v)| *a += 0.3 * v);
        }
    }
    net
}

/// Non-linear scalar loss: `sum(G * Z) + 0.5 * |Z|^2`.
fn quad_loss(out: &[Tensor3<f64>], g: &[Tensor3<f64>]) -> (f64, Vec<Tensor3<f64>>) {
    let mut loss = 0.0;
    let mut grads = Vec::new();
    for (z, gg) in out.iter().zip(g) {
        loss += z.dot(gg) + 0.5 * z.dot(z);
        let mut d = gg.clone();
        d.add_assign(z);
        grads.push(d);
    }
    (loss, grads)
}

fn check_params(net: &mut Network<f64>, batch: &[Tensor3<f64>], loss: impl Fn(&[Tensor3<f64>]) -> (f64, Vec<Tensor3<f64>>), tol: f64) {
    let out = net.forward(batch, Mode::Train).unwrap();
    let (_, g) = loss(&out);
    let (_, grads) = net.backward(&g).unwrap();
    let h = 1e-5;
    let mut checked = 0;
    for pg in grads.params.clone() {
        for i in 0..pg.values.len() {
            let orig = net.param(pg.id).unwrap()[i];
            net.param_mut(pg.id).unwrap()[i] = orig + h;
            let lp = loss(&net.forward(batch, Mode::Train).unwrap()).0;
            net.param_mut(pg.id).unwrap()[i] = orig - h;
            let lm = loss(&net.forward(batch, Mode::Train).unwrap()).0;
            net.param_mut(pg.id).unwrap()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                rel_err(fd, pg.values[i]) < tol,
                "layer {} {} [{i}]: fd {fd} vs {}",
                pg.id.layer,
                pg.id.name,
                pg.values[i]
            );
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn toy_network_parameter_gradients() {
    let mut rng = Rng::new(31);
    let mut net = toy_net(&mut rng);
    let batch: Vec<_> = (0..3).map(|_| rand_t3(&mut rng, 2, 8, 8)).collect();
    let shape = net.output_shape((2, 8, 8)).unwrap();
    let g: Vec<_> = (0..3).map(|_| rand_t3(&mut rng, shape.0, shape.1, shape.2)).collect();
    check_params(&mut net, &batch, |out| quad_loss(out, &g), 1e-5);
}

#[test]
fn toy_network_input_gradients() {
    let mut rng = Rng::new(32);
    let mut net = toy_net(&mut rng);
    let batch: Vec<_> = (0..2).map(|_| rand_t3(&mut rng, 2, 7, 7)).collect();
    let shape = net.output_shape((2, 7, 7)).unwrap();
    let g: Vec<_> = (0..2).map(|_| rand_t3(&mut rng, shape.0, shape.1, shape.2)).collect();
    let out = net.forward(&batch, Mode::Train).unwrap();
    let (dx, _) = net.backward(&quad_loss(&out, &g).1).unwrap();
    let h = 1e-5;
    for n in 0..2 {
        for i in 0..batch[n].len() {
            let mut p = batch.clone();
            p[n].data_mut()[i] += h;
            let mut m = batch.clone();
            m[n].data_mut()[i] -= h;
            let lp = quad_loss(&net.forward(&p, Mode::Train).unwrap(), &g).0;
            let lm = quad_loss(&net.forward(&m, Mode::Train).unwrap(), &g).0;
            let fd = (lp - lm) / (2.0 * h);
            assert!(rel_err(fd, dx[n].data()[i]) < 1e-5, "sample {n} [{i}]");
        }
    }
}

#[test]
fn softmax_head_through_two_layers() {
    let mut rng = Rng::new(33);
    let layers = vec![
        Layer::Conv(ConvLayer::new(1, 4, 3, ConvGeometry::strided(2))),
        Layer::BatchNorm(BatchNorm::new(4)),
        Layer::Relu,
        Layer::Conv(ConvLayer::new(4, 10, 3, ConvGeometry::plain())),
    ];
    let mut net = Network::new(layers, LossHead::SoftmaxCrossEntropy);
    net.initialize(&mut rng, Init::He);
    let batch: Vec<_> = (0..4).map(|_| rand_t3(&mut rng, 1, 7, 7)).collect();
    let labels = [3usize, 0, 9, 3];
    let loss = |out: &[Tensor3<f64>]| {
        let mut total = 0.0;
        let mut grads = Vec::new();
        for (z, &l) in out.iter().zip(&labels) {
            let (v, g) = softmax_cross_entropy(z.data(), l).unwrap();
            total += v;
            grads.push(Tensor3::from_vec(10, 1, 1, g).unwrap());
        }
        (total, grads)
    };
    check_params(&mut net, &batch, loss, 1e-5);
}

#[test]
fn binary_head_through_two_layer_discriminator() {
    let mut rng = Rng::new(34);
    let layers = vec![
        Layer::Conv(ConvLayer::new(1, 3, 4, ConvGeometry::strided(2).with_pad(1))),
        Layer::leaky_relu(),
        Layer::Conv(ConvLayer::new(3, 1, 4, ConvGeometry::plain())),
    ];
    let mut net = Network::new(layers, LossHead::SigmoidBinary);
    net.initialize(&mut rng, Init::Normal(0.5));
    let batch: Vec<_> = (0..3).map(|_| rand_t3(&mut rng, 1, 8, 8)).collect();
    let targets = [1.0, 0.0, 1.0];
    let loss = |out: &[Tensor3<f64>]| {
        let mut total = 0.0;
        let mut grads = Vec::new();
        for (z, &t) in out.iter().zip(&targets) {
            let (v, g) = bce_with_logit(z.data()[0], t);
            total += v;
            grads.push(Tensor3::filled(1, 1, 1, g));
        }
        (total, grads)
    };
    check_params(&mut net, &batch, loss, 1e-6);
}

fn fixed_weights(net: &Network<f64>) -> Vec<Vec<f64>> {
    net.layers()
        .iter()
        .filter_map(|l| match l {
            Layer::FixedSmooth(f) => Some(f.weights().data().to_vec()),
            _ => None,
        })
        .collect()
}

#[test]
fn optimizer_leaves_fixed_and_frozen_values_alone() {
    let mut rng = Rng::new(35);
    for approach in [Approach::One, Approach::Two] {
        let mut layers = build_upsample_block::<f64>(approach, 1, 2, 3, 4, 2, Padding::uniform(1)).unwrap();
        layers.push(Layer::Tanh);
        layers.extend(build_downsample_block::<f64>(approach, 2, 3, 2, 3, 2, Padding::uniform(1)).unwrap());
        let mut net = Network::new(layers, LossHead::None);
        net.initialize(&mut rng, Init::He);
        let before = fixed_weights(&net);
        let frozen: Vec<_> = net.parameters().into_iter().filter(|p| !p.trainable).collect();
        let frozen_before: Vec<Vec<f64>> = frozen.iter().map(|p| net.param(p.id).unwrap().to_vec()).collect();
        let mut adam = Adam::new(AdamConfig::new(0.1, 0.9, 0.999));
        for _ in 0..5 {
            let batch: Vec<_> = (0..2).map(|_| rand_t3(&mut rng, 2, 6, 6)).collect();
            let out = net.forward(&batch, Mode::Train).unwrap();
            let g: Vec<_> = out.iter().map(|z| rand_t3(&mut rng, z.channels(), z.height(), z.width())).collect();
            let (_, grads) = net.backward(&g).unwrap();
            adam.step(&mut net, &grads).unwrap();
        }
        assert_eq!(fixed_weights(&net), before);
        for (p, old) in frozen.iter().zip(&frozen_before) {
            assert_eq!(net.param(p.id).unwrap(), old.as_slice());
            assert!(old.iter().all(|&v| v == 0.0));
        }
        // a gradient aimed at a frozen bias is refused
        let mut bogus = Gradients::default();
        bogus.params.push(smoothconv::layers::ParamGrad { id: frozen[0].id, values: vec![1.0; frozen[0].len] });
        assert!(adam.step(&mut net, &bogus).is_err());
    }
}

#[test]
fn exactly_one_trainable_bias_per_block() {
    for approach in [Approach::One, Approach::Two] {
        for up in [true, false] {
            let layers = if up {
                build_upsample_block::<f64>(approach, 0, 3, 5, 4, 2, Padding::uniform(1)).unwrap()
            } else {
                build_downsample_block::<f64>(approach, 0, 3, 5, 3, 2, Padding::uniform(1)).unwrap()
            };
            let net = Network::new(layers, LossHead::None);
            let biases: Vec<_> = net.parameters().into_iter().filter(|p| p.id.name == ParamName::Bias).collect();
            assert_eq!(biases.len(), 2);
            assert_eq!(biases.iter().filter(|p| p.trainable).count(), 1);
            let trainable_on_fixed = matches!(net.layers()[biases.iter().find(|p| p.trainable).unwrap().id.layer], Layer::FixedSmooth(_));
            // approach 1 puts it after the transposed conv / on the strided conv
            assert_eq!(trainable_on_fixed, (approach == Approach::One) == up);
        }
    }
}

#[test]
fn approaches_share_the_linear_map() {
    let mut rng = Rng::new(36);
    for up in [true, false] {
        let build = |a| {
            if up {
                build_upsample_block::<f64>(a, 2, 2, 3, 4, 3, Padding::uniform(1)).unwrap()
            } else {
                build_downsample_block::<f64>(a, 2, 2, 3, 3, 3, Padding::uniform(1)).unwrap()
            }
        };
        let mut one = Network::new(build(Approach::One), LossHead::None);
        let mut two = Network::new(build(Approach::Two), LossHead::None);
        one.initialize(&mut Rng::new(7), Init::He);
        two.initialize(&mut Rng::new(7), Init::He);
        let x = rand_t3(&mut rng, 2, 9, 9);
        let a = one.forward(std::slice::from_ref(&x), Mode::Eval).unwrap();
        let b = two.forward(std::slice::from_ref(&x), Mode::Eval).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn simple_cnn_audit() {
    let base = simple_cnn::<f64>(3, None, 0, 1, false).unwrap();
    assert_eq!(base.output_shape((3, 32, 32)).unwrap(), (10, 1, 1));
    let mut sizes = Vec::new();
    for (i, k) in base.kinds().iter().enumerate() {
        if *k == LayerKind::StridedConv {
            let prefix = Network::new(base.layers()[..=i].to_vec(), LossHead::None);
            sizes.push(prefix.output_shape((3, 32, 32)).unwrap().1);
        }
    }
    assert_eq!(sizes, vec![16, 8, 4, 2]);
    let kernel_total = |n: &Network<f64>| -> usize {
        n.parameters().iter().filter(|p| p.id.name == ParamName::Kernel).map(|p| p.len).sum()
    };
    let expected = 64 * 3 * 9 + 128 * 64 * 9 + 256 * 128 * 9 + 512 * 256 * 9 + 10 * 512 * 4;
    assert_eq!(kernel_total(&base), expected);
    for approach in [Approach::One, Approach::Two] {
        let net = simple_cnn::<f64>(3, Some(approach), 0, 1, false).unwrap();
        assert_eq!(net.output_shape((3, 32, 32)).unwrap(), (10, 1, 1));
        assert_eq!(kernel_total(&net), expected);
        assert_eq!(net.kinds().iter().filter(|k| **k == LayerKind::FixedSmooth).count(), 4);
        let bias_total: usize = net.parameters().iter().filter(|p| p.trainable && p.id.name == ParamName::Bias).map(|p| p.len).sum();
        let expect_bias = match approach {
            // strided conv biases stay, as in the plain network
            Approach::One => 64 + 128 + 256 + 512 + 10,
            // fixed-layer biases sit on the block inputs
            Approach::Two => 3 + 64 + 128 + 256 + 10,
        };
        assert_eq!(bias_total, expect_bias);
    }
    let base_bias: usize = base.parameters().iter().filter(|p| p.trainable && p.id.name == ParamName::Bias).map(|p| p.len).sum();
    assert_eq!(base_bias, 64 + 128 + 256 + 512 + 10);
}
