mod common;

use common::random_tensor;
use gaitrisk::model::{dfe_forward, global_branch, local_branch, risk_probability, BlockVars};
use gaitrisk::numerics::{Graph, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
    Tensor::new(shape, data).unwrap()
}

fn conv(x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>, band: Option<usize>) -> Tensor<f64> {
    let mut g = Graph::new();
    let (x, k, b) = (
        g.leaf(x.clone(), false),
        g.leaf(k.clone(), false),
        g.leaf(b.clone(), false),
    );
    let y = g.conv3d(x, k, b, band).unwrap();
    g.value(y).clone()
}

fn delta_kernel(kt: usize, ks: usize) -> Tensor<f64> {
    let mut k = Tensor::zeros(&[1, 1, kt, ks, ks]);
    k.data_mut()[(kt / 2) * ks * ks + (ks / 2) * ks + ks / 2] = 1.0;
    k
}

#[test]
fn delta_kernel_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_tensor(&[1, 4, 6, 5], &mut rng);
    let y = conv(&x, &delta_kernel(5, 3), &Tensor::zeros(&[1]), None);
    assert_eq!(y, x);
}

#[test]
fn ones_kernel_sums_the_neighbourhood() {
    let x = Tensor::full(&[1, 4, 5, 5], 1.0);
    let y = conv(&x, &Tensor::full(&[1, 1, 3, 3, 3], 1.0), &Tensor::zeros(&[1]), None);
    let at = |t: usize, h: usize, w: usize| y.data()[(t * 5 + h) * 5 + w];
    assert_eq!(at(1, 2, 2), 27.0);
    assert_eq!(at(2, 1, 3), 27.0);
    // corner sees 2·2·2 of the ones
    assert_eq!(at(0, 0, 0), 8.0);
}

#[test]
fn conv_output_keeps_extents() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = conv(
        &random_tensor(&[2, 8, 8, 8], &mut rng),
        &random_tensor(&[4, 2, 5, 3, 3], &mut rng),
        &random_tensor(&[4], &mut rng),
        None,
    );
    assert_eq!(y.shape(), &[4, 8, 8, 8]);
}

#[test]
fn conv_rejects_channel_mismatch_and_even_kernels() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::zeros(&[2, 3, 4, 4]), false);
    let k = g.leaf(Tensor::zeros(&[1, 3, 3, 3, 3]), false);
    let b = g.leaf(Tensor::zeros(&[1]), false);
    assert!(g.conv3d(x, k, b, None).is_err());
    let k = g.leaf(Tensor::zeros(&[1, 2, 2, 3, 3]), false);
    assert!(g.conv3d(x, k, b, None).is_err());
}

#[test]
fn maxpool_examples() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(t(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]), false);
    let y = g.max_pool2(x).unwrap();
    assert_eq!(g.value(y).data(), &[4.0]);

    let x = g.leaf(Tensor::full(&[3, 2, 64, 44], 0.7), false);
    let y = g.max_pool2(x).unwrap();
    assert_eq!(g.shape(y), &[3, 2, 32, 22]);
    assert!(g.value(y).data().iter().all(|&v| v == 0.7));

    // odd extents pool the partial window
    let x = g.leaf(
        t(&[1, 1, 3, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]),
        false,
    );
    let y = g.max_pool2(x).unwrap();
    assert_eq!(g.value(y).data(), &[5.0, 6.0, 8.0, 9.0]);
}

#[test]
fn maxpool_gradient_goes_to_first_maximum() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(t(&[1, 1, 2, 2], vec![4.0, 1.0, 4.0, 4.0]), true);
    let y = g.max_pool2(x).unwrap();
    let s = g.sum(y);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn linear_examples() {
    let mut g = Graph::<f64>::new();
    let f = g.leaf(t(&[3], vec![1.0, 0.0, 0.0]), false);
    let w = g.leaf(t(&[2, 3], vec![0.5, 7.0, 8.0, -1.5, 9.0, 9.0]), false);
    let b = g.leaf(Tensor::zeros(&[2]), false);
    let y = g.linear(f, w, b).unwrap();
    assert_eq!(g.value(y).data(), &[0.5, -1.5]);

    let f = g.leaf(Tensor::zeros(&[3]), false);
    let b = g.leaf(t(&[2], vec![0.3, -0.3]), false);
    let y = g.linear(f, w, b).unwrap();
    assert_eq!(g.value(y).data(), &[0.3, -0.3]);

    let f = g.leaf(Tensor::zeros(&[4]), false);
    assert!(g.linear(f, w, b).is_err());
}

#[test]
fn leaky_relu_examples() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(t(&[3], vec![2.0, -2.0, 0.0]), true);
    let y = g.leaky_relu(x, 0.1);
    assert_eq!(g.value(y).data(), &[2.0, -0.2, 0.0]);
    let s = g.sum(y);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[1.0, 0.1, 0.1]);
}

#[test]
fn temporal_compression_examples() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(t(&[1, 6, 1, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), false);
    let w = g.leaf(t(&[3], vec![1.0, 0.0, -1.0]), false);
    let y = g.temporal_compress(x, w).unwrap();
    assert_eq!(g.value(y).data(), &[-2.0, -2.0]);

    let w1 = g.leaf(t(&[1], vec![1.0]), false);
    let y = g.temporal_compress(x, w1).unwrap();
    assert_eq!(g.value(y), g.value(x));

    let w4 = g.leaf(Tensor::zeros(&[4]), false);
    assert!(g.temporal_compress(x, w4).is_err());
}

#[test]
fn risk_probability_examples() {
    assert_eq!(risk_probability(&[0.4f64, 0.4]), 0.5);
    assert!((risk_probability(&[10.0f64, -10.0]) - 1.0).abs() < 1e-4);
    assert!(risk_probability(&[-10.0f64, 10.0]) < 1e-4);
}

fn block(g: &mut Graph<f64>, lk: Tensor<f64>, gk: Tensor<f64>, co: usize) -> BlockVars {
    BlockVars {
        local_kernel: g.leaf(lk, false),
        local_bias: g.leaf(Tensor::zeros(&[co]), false),
        global_kernel: g.leaf(gk, false),
        global_bias: g.leaf(Tensor::zeros(&[co]), false),
        tcl_weight: None,
    }
}

#[test]
fn local_branch_does_not_leak_across_bands() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // support only in band 3 of 16 (rows 12..16 of 64)
    let mut x = Tensor::zeros(&[1, 3, 64, 6]);
    for ti in 0..3 {
        for h in 12..16 {
            for w in 0..6 {
                x.data_mut()[(ti * 64 + h) * 6 + w] = 1.0 + (h + w) as f64 * 0.1;
            }
        }
    }
    let k = random_tensor(&[1, 1, 3, 3, 3], &mut rng);
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), false);
    let kv = g.leaf(k.clone(), false);
    let bv = g.leaf(Tensor::zeros(&[1]), false);
    let y = local_branch(&mut g, xv, 16, kv, bv, 1.0).unwrap();
    let y = g.value(y).clone();

    // oracle: plain convolution of the isolated band
    let band: Vec<f64> = (0..3)
        .flat_map(|ti| x.data()[(ti * 64 + 12) * 6..(ti * 64 + 16) * 6].to_vec())
        .collect();
    let iso = conv(&t(&[1, 3, 4, 6], band), &k, &Tensor::zeros(&[1]), None);
    for ti in 0..3 {
        for h in 0..64 {
            for w in 0..6 {
                let v = y.data()[(ti * 64 + h) * 6 + w];
                if (12..16).contains(&h) {
                    let o = iso.data()[(ti * 4 + h - 12) * 6 + w];
                    assert!((v - o).abs() < 1e-12);
                } else {
                    assert_eq!(v, 0.0, "leak at t={ti} h={h} w={w}");
                }
            }
        }
    }
    assert!(local_branch(&mut g, xv, 7, kv, bv, 1.0).is_err());
}

#[test]
fn one_part_local_branch_equals_global_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_tensor(&[2, 4, 8, 6], &mut rng);
    let k = random_tensor(&[3, 2, 5, 3, 3], &mut rng);
    let b = random_tensor(&[3], &mut rng);
    let mut g = Graph::new();
    let (xv, kv, bv) = (g.leaf(x, false), g.leaf(k, false), g.leaf(b, false));
    let l = local_branch(&mut g, xv, 1, kv, bv, 0.1).unwrap();
    let gl = global_branch(&mut g, xv, kv, bv, 0.1).unwrap();
    assert_eq!(g.value(l), g.value(gl));
}

#[test]
fn dfe_is_the_sum_of_both_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_tensor(&[2, 4, 8, 6], &mut rng);
    let lk = random_tensor(&[3, 2, 5, 3, 3], &mut rng);
    let gk = random_tensor(&[3, 2, 5, 3, 3], &mut rng);
    let mut g = Graph::new();
    let xv = g.leaf(x.clone(), false);
    let vars = block(&mut g, lk.clone(), gk.clone(), 3);
    let y = dfe_forward(&mut g, xv, 4, &vars, 0.1).unwrap();
    let y = g.value(y).clone();

    let lrelu = |v: f64| if v > 0.0 { v } else { 0.1 * v };
    let local = conv(&x, &lk, &Tensor::zeros(&[3]), Some(2));
    let global = conv(&x, &gk, &Tensor::zeros(&[3]), None);
    for i in 0..y.numel() {
        let want = lrelu(local.data()[i]) + lrelu(global.data()[i]);
        assert!((y.data()[i] - want).abs() < 1e-6);
    }

    // zero global weights leave the local branch alone
    let vars = block(&mut g, lk, Tensor::zeros(&[3, 2, 5, 3, 3]), 3);
    let y = dfe_forward(&mut g, xv, 4, &vars, 0.1).unwrap();
    let l = local_branch(&mut g, xv, 4, vars.local_kernel, vars.local_bias, 0.1).unwrap();
    assert_eq!(g.value(y), g.value(l));

    let vars = block(
        &mut g,
        Tensor::zeros(&[3, 2, 5, 3, 3]),
        Tensor::zeros(&[3, 2, 5, 3, 3]),
        3,
    );
    let y = dfe_forward(&mut g, xv, 4, &vars, 0.1).unwrap();
    assert!(g.value(y).data().iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&[2, 4, 6, 5], &mut rng);
        let z = random_tensor(&[2, 4, 6, 5], &mut rng);
        let k = random_tensor(&[3, 2, 3, 3, 3], &mut rng);
        let zero = Tensor::zeros(&[3]);
        let mix = Tensor::from_fn(&[2, 4, 6, 5], |i| a * x.data()[i] + b * z.data()[i]);
        let lhs = conv(&mix, &k, &zero, Some(3));
        let (cx, cz) = (conv(&x, &k, &zero, Some(3)), conv(&z, &k, &zero, Some(3)));
        for i in 0..lhs.numel() {
            prop_assert!((lhs.data()[i] - (a * cx.data()[i] + b * cz.data()[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn maxpool_matches_window_oracle(seed in any::<u64>(), h in 1usize..8, w in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&[2, 2, h, w], &mut rng);
        let mut g = Graph::new();
        let xv = g.leaf(x.clone(), false);
        let y = g.max_pool2(xv).unwrap();
        let y = g.value(y);
        let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
        prop_assert_eq!(y.shape(), &[2, 2, ho, wo]);
        let global_max = x.max_value();
        for plane in 0..4 {
            for i in 0..ho {
                for j in 0..wo {
                    let mut m = f64::NEG_INFINITY;
                    for di in 0..2 {
                        for dj in 0..2 {
                            let (r, c) = (2 * i + di, 2 * j + dj);
                            if r < h && c < w {
                                m = m.max(x.data()[(plane * h + r) * w + c]);
                            }
                        }
                    }
                    let v = y.data()[(plane * ho + i) * wo + j];
                    prop_assert_eq!(v, m);
                    prop_assert!(v <= global_max);
                }
            }
        }
    }
}
