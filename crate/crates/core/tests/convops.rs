mod common;

use common::{max_abs, max_abs_diff, rand_t3, random_case, rel_err, Case};
use smoothconv::conv::{self, reference, ConvGeometry, ConvMode, Padding};
use smoothconv::{Rng, Tensor3, Tensor4};

fn output(c: &Case) -> Tensor3<f64> {
    conv::forward(&c.input, &c.kernel, &c.bias, &c.geometry).unwrap()
}

#[test]
fn optimized_matches_direct_sums() {
    let mut rng = Rng::new(11);
    for _ in 0..60 {
        let c = random_case(&mut rng, 4, 5, 32, 3);
        let fast = output(&c);
        let slow = reference::forward(&c.input, &c.kernel, &c.bias, &c.geometry).unwrap();
        assert_eq!(fast.shape(), slow.shape(), "{}", c.describe());
        let tol = 1e-12 * max_abs(slow.data()).max(1.0);
        assert!(max_abs_diff(fast.data(), slow.data()) <= tol, "{}", c.describe());

        let g = rand_t3(&mut rng, fast.channels(), fast.height(), fast.width());
        let dv = conv::backward_input(&g, &c.kernel, &c.geometry, (c.input.height(), c.input.width())).unwrap();
        let dv_ref = reference::backward_input(&g, &c.kernel, &c.geometry, c.input.shape()).unwrap();
        let tol = 1e-12 * max_abs(dv_ref.data()).max(1.0);
        assert!(max_abs_diff(dv.data(), dv_ref.data()) <= tol, "{}", c.describe());

        let (dk, db) = conv::conv_backward_params(&c.input, &g, c.kernel.shape(), &c.geometry).unwrap();
        let (dk_ref, db_ref) = reference::backward_params(&c.input, &g, c.kernel.shape(), &c.geometry).unwrap();
        let tol = 1e-12 * max_abs(dk_ref.data()).max(1.0);
        assert!(max_abs_diff(dk.data(), dk_ref.data()) <= tol, "{}", c.describe());
        assert!(max_abs_diff(&db, &db_ref) <= 1e-12 * max_abs(&db_ref).max(1.0));
    }
}

#[test]
fn large_operands_match_direct_sums() {
    let mut rng = Rng::new(12);
    for (mode, stride) in [(ConvMode::Strided, 2), (ConvMode::Transposed, 3), (ConvMode::Plain, 1)] {
        let g = ConvGeometry { stride, padding: Padding::uniform(2), mode };
        let (k, v) = match mode {
            ConvMode::Transposed => (common::rand_t4(&mut rng, 4, 8, 5, 5), rand_t3(&mut rng, 4, 12, 12)),
            _ => (common::rand_t4(&mut rng, 8, 4, 5, 5), rand_t3(&mut rng, 4, 32, 32)),
        };
        let b = rng.normal_vec(8);
        let fast = conv::forward(&v, &k, &b, &g).unwrap();
        let slow = reference::forward(&v, &k, &b, &g).unwrap();
        assert!(max_abs_diff(fast.data(), slow.data()) <= 1e-12 * max_abs(slow.data()));
    }
}

#[test]
fn adjoint_identities() {
    let mut rng = Rng::new(13);
    for _ in 0..100 {
        let c = random_case(&mut rng, 8, 5, 12, 3);
        let zero_bias = vec![0.0; c.bias.len()];
        let z = conv::forward(&c.input, &c.kernel, &zero_bias, &c.geometry).unwrap();
        let g = rand_t3(&mut rng, z.channels(), z.height(), z.width());
        let lhs = z.dot(&g);
        let dv = conv::backward_input(&g, &c.kernel, &c.geometry, (c.input.height(), c.input.width())).unwrap();
        let rhs = c.input.dot(&dv);
        assert!(rel_err(lhs, rhs) < 1e-10, "input adjoint {}: {lhs} vs {rhs}", c.describe());

        let (dk, db) = conv::conv_backward_params(&c.input, &g, c.kernel.shape(), &c.geometry).unwrap();
        let rhs: f64 = c.kernel.data().iter().zip(dk.data()).map(|(a, b)| a * b).sum();
        assert!(rel_err(lhs, rhs) < 1e-10, "kernel adjoint {}: {lhs} vs {rhs}", c.describe());
        let sum_g: Vec<f64> = (0..g.channels()).map(|ch| g.channel(ch).iter().sum()).collect();
        assert!(max_abs_diff(&db, &sum_g) < 1e-10 * max_abs(&sum_g).max(1.0));
    }
}

/// Central differences of `<forward(V, K, b), G>` at a sample of entries.
#[test]
fn finite_differences() {
    let h = 1e-5;
    let mut rng = Rng::new(14);
    for _ in 0..30 {
        let c = random_case(&mut rng, 6, 5, 10, 3);
        let z = output(&c);
        let g = rand_t3(&mut rng, z.channels(), z.height(), z.width());
        let loss = |v: &Tensor3<f64>, k: &Tensor4<f64>, b: &[f64]| conv::forward(v, k, b, &c.geometry).unwrap().dot(&g);
        let dv = conv::backward_input(&g, &c.kernel, &c.geometry, (c.input.height(), c.input.width())).unwrap();
        let (dk, db) = conv::conv_backward_params(&c.input, &g, c.kernel.shape(), &c.geometry).unwrap();
        for _ in 0..10 {
            let i = rng.below(c.input.len());
            let (mut p, mut m) = (c.input.clone(), c.input.clone());
            p.data_mut()[i] += h;
            m.data_mut()[i] -= h;
            let fd = (loss(&p, &c.kernel, &c.bias) - loss(&m, &c.kernel, &c.bias)) / (2.0 * h);
            assert!(rel_err(fd, dv.data()[i]) < 1e-6, "dV[{i}] {}: {fd} vs {}", c.describe(), dv.data()[i]);

            let j = rng.below(c.kernel.len());
            let (mut p, mut m) = (c.kernel.clone(), c.kernel.clone());
            p.data_mut()[j] += h;
            m.data_mut()[j] -= h;
            let fd = (loss(&c.input, &p, &c.bias) - loss(&c.input, &m, &c.bias)) / (2.0 * h);
            assert!(rel_err(fd, dk.data()[j]) < 1e-6, "dK[{j}] {}", c.describe());
        }
        let o = rng.below(c.bias.len());
        let (mut p, mut m) = (c.bias.clone(), c.bias.clone());
        p[o] += h;
        m[o] -= h;
        let fd = (loss(&c.input, &c.kernel, &p) - loss(&c.input, &c.kernel, &m)) / (2.0 * h);
        assert!(rel_err(fd, db[o]) < 1e-6);
    }
}

/// A stride-1 transposed convolution equals a plain convolution with the
/// spatially flipped, channel-swapped kernel and full padding.
#[test]
fn unit_stride_transposed_is_flipped_full_convolution() {
    let mut rng = Rng::new(15);
    for _ in 0..20 {
        let (cin, cout) = (1 + rng.below(4), 1 + rng.below(4));
        let (kh, kw) = (1 + rng.below(5), 1 + rng.below(5));
        let (h, w) = (3 + rng.below(8), 3 + rng.below(8));
        let v = rand_t3(&mut rng, cin, h, w);
        let k = common::rand_t4(&mut rng, cin, cout, kh, kw);
        let b = rng.normal_vec(cout);
        let t = conv::transposed_conv_forward(&v, &k, &b, &ConvGeometry::transposed(1)).unwrap();
        let mut flipped = Tensor4::zeros(cout, cin, kh, kw);
        for q in 0..cin {
            for i in 0..cout {
                for y in 0..kh {
                    for x in 0..kw {
                        flipped.set(i, q, kh - 1 - y, kw - 1 - x, k.get(q, i, y, x));
                    }
                }
            }
        }
        let full = Padding { top: kh - 1, left: kw - 1, bottom: kh - 1, right: kw - 1 };
        let p = conv::conv_forward(&v, &flipped, &b, &ConvGeometry::plain().with_padding(full)).unwrap();
        assert_eq!(t.shape(), p.shape());
        assert!(max_abs_diff(t.data(), p.data()) < 1e-12 * max_abs(p.data()).max(1.0));
    }
}

#[test]
fn strided_input_gradient_is_transposed_convolution() {
    let mut rng = Rng::new(16);
    for _ in 0..20 {
        let s = 2 + rng.below(2);
        let k = common::rand_t4(&mut rng, 3, 2, 3, 3);
        // sizes where every input row is reached so no tail is cut
        let n = 1 + rng.below(5);
        let size = (n - 1) * s + 3;
        let g = rand_t3(&mut rng, 3, n, n);
        let geom = ConvGeometry::strided(s);
        let dv = conv::strided_conv_backward_input(&g, &k, &geom, (size, size)).unwrap();
        let t = conv::transposed_conv_forward(&g, &k, &[0.0, 0.0], &ConvGeometry::transposed(s)).unwrap();
        assert_eq!(dv.shape(), t.shape());
        assert!(max_abs_diff(dv.data(), t.data()) < 1e-12);
    }
}

#[test]
fn mismatched_shapes_are_errors() {
    let v = Tensor3::<f64>::zeros(2, 5, 5);
    let k = Tensor4::<f64>::zeros(3, 1, 3, 3);
    assert!(conv::conv_forward(&v, &k, &[0.0; 3], &ConvGeometry::plain()).is_err());
    let k = Tensor4::<f64>::zeros(3, 2, 3, 3);
    assert!(conv::conv_forward(&v, &k, &[0.0; 2], &ConvGeometry::plain()).is_err());
    let bad = Tensor3::<f64>::zeros(3, 4, 4);
    assert!(conv::backward_input(&bad, &k, &ConvGeometry::plain(), (5, 5)).is_err());
    let small = Tensor3::<f64>::zeros(2, 2, 2);
    assert!(conv::conv_forward(&small, &k, &[0.0; 3], &ConvGeometry::plain()).is_err());
}
