mod common;

use common::elimination_quotient;
use num_rational::BigRational;
use smoothconv::smooth::{
    convolve_full, is_checkerboard_free, rational_grid, smooth_kernel, smooth_slice, zero_order_kernel, Grid,
};
use smoothconv::Rng;

fn binomial_row(order: usize, rate: usize) -> Vec<i64> {
    // 1-D all-ones sequence convolved with itself `order` times
    let ones = vec![1i64; rate];
    let mut row = ones.clone();
    for _ in 0..order {
        let mut next = vec![0; row.len() + rate - 1];
        for (i, &a) in row.iter().enumerate() {
            for (j, &b) in ones.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        row = next;
    }
    row
}

#[test]
fn entry_sums() {
    for rate in 1..=4usize {
        for order in 0..=4usize {
            let s: i64 = smooth_slice(order, rate).unwrap().data().iter().sum();
            assert_eq!(s, (rate as i64).pow(2 * (order as u32 + 1)), "rate {rate} order {order}");
        }
    }
}

#[test]
fn slices_are_separable() {
    for rate in 1..=4 {
        for order in 0..=4 {
            let k = smooth_slice(order, rate).unwrap();
            let row = binomial_row(order, rate);
            assert_eq!(k.rows(), row.len());
            for y in 0..k.rows() {
                for x in 0..k.cols() {
                    assert_eq!(*k.get(y, x), row[y] * row[x]);
                }
            }
        }
    }
}

#[test]
fn repeated_division_peels_one_order_at_a_time() {
    for rate in 2..=4 {
        for order in 0..=4 {
            let mut k = smooth_slice(order, rate).unwrap();
            for d in (0..=order).rev() {
                assert_eq!(k, smooth_slice(d, rate).unwrap());
                match is_checkerboard_free(&k, rate) {
                    Some(q) if d > 0 => k = q,
                    Some(q) => assert_eq!(q.data(), &[1]),
                    None => panic!("K({d}) at rate {rate} not divisible"),
                }
            }
        }
    }
}

#[test]
fn products_with_the_hold_kernel_are_divisible() {
    let mut rng = Rng::new(21);
    for _ in 0..50 {
        let rate = 2 + rng.below(3);
        let (r, c) = (1 + rng.below(4), 1 + rng.below(4));
        let q: Vec<i64> = (0..r * c).map(|_| rng.below(19) as i64 - 9).collect();
        let q = Grid::from_vec(r, c, q).unwrap();
        let h = convolve_full(&zero_order_kernel(rate).unwrap(), &q);
        assert_eq!(is_checkerboard_free(&h, rate), Some(q));
    }
}

#[test]
fn random_kernels_are_not_divisible() {
    let mut rng = Rng::new(22);
    let mut rejected = 0;
    for _ in 0..50 {
        let k: Vec<i64> = (0..16).map(|_| rng.below(21) as i64 - 10).collect();
        let g = Grid::from_vec(4, 4, k).unwrap();
        let ours = is_checkerboard_free(&g, 2).is_some();
        let oracle = elimination_quotient(&g.to_rows(), 2).is_some();
        assert_eq!(ours, oracle);
        rejected += usize::from(!ours);
    }
    assert!(rejected >= 45, "only {rejected} of 50 random kernels rejected");
}

#[test]
fn all_binary_three_by_three_kernels() {
    let mut accepted = Vec::new();
    for bits in 0u32..512 {
        let k: Vec<i64> = (0..9).map(|i| i64::from((bits >> i) & 1)).collect();
        let g = Grid::from_vec(3, 3, k).unwrap();
        let ours = is_checkerboard_free(&g, 2);
        let oracle = elimination_quotient(&g.to_rows(), 2);
        assert_eq!(ours.is_some(), oracle.is_some(), "kernel bits {bits:09b}");
        if let (Some(q), Some(o)) = (ours, oracle) {
            for y in 0..2 {
                for x in 0..2 {
                    assert_eq!(num_rational::Ratio::from_integer(*q.get(y, x)), o[y][x]);
                }
            }
            accepted.push(bits);
        }
    }
    // top-left 2x2 block of ones is h0 itself
    assert!(accepted.contains(&0));
    assert!(accepted.contains(&0b000_011_011));
    assert!(!accepted.contains(&0b111_111_111));
}

#[test]
fn rational_kernels() {
    // K(1) at rate 2 normalized by its gain is still divisible exactly
    let k = smooth_kernel(1, 2, 1).unwrap();
    let scaled = k.slice().map(|&v| v as f64 / 16.0);
    let r = rational_grid(&scaled).unwrap();
    let q = is_checkerboard_free(&r, 2).unwrap();
    let expect: Vec<BigRational> =
        [1, 1, 1, 1].iter().map(|&v| BigRational::new(v.into(), 16.into())).collect();
    assert_eq!(q.data(), expect.as_slice());

    let off = scaled.map(|&v| v + 1e-3);
    assert!(is_checkerboard_free(&rational_grid(&off).unwrap(), 2).is_none());
}

#[test]
fn rate_one_accepts_anything() {
    let g = Grid::from_vec(2, 3, vec![5i64, -1, 0, 2, 7, 3]).unwrap();
    assert_eq!(is_checkerboard_free(&g, 1), Some(g));
}
