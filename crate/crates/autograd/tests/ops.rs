use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synclay_autograd::gradcheck::check_directional;
use synclay_autograd::ops::{BoxRegion, Conv2dGeometry, NormAxes, Overlap, Padding};
use synclay_autograd::{Adam, AdamConfig, ParamStore, Tape, Tensor};

const TOL: f64 = 1e-6;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct seven-loop convolution.
fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor, g: Conv2dGeometry) -> Tensor {
    let (n, c, h, wd) = x.dims4();
    let (o, _, k, _) = w.dims4();
    let (oh, ow) = g.output_size(h, wd);
    let mut out = Tensor::zeros(&[n, o, oh, ow]);
    for bi in 0..n {
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[oc];
                    for ic in 0..c {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = (oy * g.stride + ki) as isize - g.padding.top as isize;
                                let ix = (ox * g.stride + kj) as isize - g.padding.left as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += x.get(&[bi, ic, iy as usize, ix as usize])
                                    * w.get(&[oc, ic, ki, kj]);
                            }
                        }
                    }
                    out.set(&[bi, oc, oy, ox], acc);
                }
            }
        }
    }
    out
}

/// Scatter definition of the transposed convolution.
fn naive_conv_transpose(x: &Tensor, w: &Tensor, b: &Tensor, g: Conv2dGeometry) -> Tensor {
    let (n, cin, h, wd) = x.dims4();
    let (_, cout, k, _) = w.dims4();
    let (oh, ow) = g.transposed_output_size(h, wd);
    let mut out = Tensor::zeros(&[n, cout, oh, ow]);
    for bi in 0..n {
        for oc in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    out.set(&[bi, oc, oy, ox], b.data()[oc]);
                }
            }
        }
        for ic in 0..cin {
            for iy in 0..h {
                for ix in 0..wd {
                    for oc in 0..cout {
                        for ki in 0..k {
                            for kj in 0..k {
                                let oy = (iy * g.stride + ki) as isize - g.padding.top as isize;
                                let ox = (ix * g.stride + kj) as isize - g.padding.left as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                let idx = [bi, oc, oy as usize, ox as usize];
                                let v = out.get(&idx)
                                    + x.get(&[bi, ic, iy, ix]) * w.get(&[ic, oc, ki, kj]);
                                out.set(&idx, v);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn assert_close(a: &Tensor, b: &Tensor, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    let err = a.sub(b).max_abs();
    assert!(err < tol, "max abs diff {err}");
}

#[test]
fn conv2d_matches_direct_loops() {
    let mut r = rng(1);
    for (k, s, pad) in [(3, 1, 1), (4, 2, 1), (5, 2, 0), (1, 1, 0)] {
        let g = Conv2dGeometry::new(k, s, pad);
        let x = Tensor::randn(&[2, 3, 9, 8], 1.0, &mut r);
        let w = Tensor::randn(&[4, 3, k, k], 1.0, &mut r);
        let b = Tensor::randn(&[4], 1.0, &mut r);
        let tape = Tape::no_grad();
        let y = tape
            .constant(x.clone())
            .conv2d(tape.constant(w.clone()), Some(tape.constant(b.clone())), g);
        assert_close(&y.value(), &naive_conv(&x, &w, &b, g), 1e-10);
    }
}

#[test]
fn asymmetric_padding_keeps_size() {
    let mut r = rng(2);
    let pad = Padding {
        top: 2,
        bottom: 1,
        left: 2,
        right: 1,
    };
    let g = Conv2dGeometry::with_padding(4, 1, pad);
    let x = Tensor::randn(&[1, 2, 8, 8], 1.0, &mut r);
    let w = Tensor::randn(&[3, 2, 4, 4], 1.0, &mut r);
    let b = Tensor::zeros(&[3]);
    let tape = Tape::no_grad();
    let y = tape
        .constant(x.clone())
        .conv2d(tape.constant(w.clone()), None, g);
    assert_eq!(y.shape(), [1, 3, 8, 8]);
    assert_close(&y.value(), &naive_conv(&x, &w, &b, g), 1e-10);
}

#[test]
fn conv_transpose_matches_scatter_definition() {
    let mut r = rng(3);
    let g = Conv2dGeometry::new(4, 2, 1);
    let x = Tensor::randn(&[2, 3, 4, 5], 1.0, &mut r);
    let w = Tensor::randn(&[3, 2, 4, 4], 1.0, &mut r);
    let b = Tensor::randn(&[2], 1.0, &mut r);
    let tape = Tape::no_grad();
    let y = tape
        .constant(x.clone())
        .conv_transpose2d(tape.constant(w.clone()), Some(tape.constant(b.clone())), g);
    assert_eq!(y.shape(), [2, 2, 8, 10]);
    assert_close(&y.value(), &naive_conv_transpose(&x, &w, &b, g), 1e-10);
}

#[test]
fn conv_gradients() {
    let mut r = rng(4);
    let g = Conv2dGeometry::new(4, 2, 1);
    let inputs = [
        Tensor::randn(&[2, 3, 6, 6], 1.0, &mut r),
        Tensor::randn(&[4, 3, 4, 4], 0.5, &mut r),
        Tensor::randn(&[4], 0.5, &mut r),
    ];
    let report = check_directional(
        &inputs,
        |_, v| v[0].conv2d(v[1], Some(v[2]), g).square().mean(),
        1e-5,
        3,
        &mut r,
    );
    assert!(report.max_relative_error() < TOL, "{report:?}");

    let report = check_directional(
        &[
            Tensor::randn(&[2, 3, 3, 3], 1.0, &mut r),
            Tensor::randn(&[3, 2, 4, 4], 0.5, &mut r),
            Tensor::randn(&[2], 0.5, &mut r),
        ],
        |_, v| v[0].conv_transpose2d(v[1], Some(v[2]), g).square().mean(),
        1e-5,
        3,
        &mut r,
    );
    assert!(report.max_relative_error() < TOL, "{report:?}");
}

#[test]
fn elementwise_and_reduction_gradients() {
    let mut r = rng(5);
    let inputs = [
        Tensor::randn(&[2, 3, 4, 4], 1.0, &mut r),
        Tensor::randn(&[2, 3, 4, 4], 1.0, &mut r),
    ];
    let report = check_directional(
        &inputs,
        |_, v| {
            let a = v[0].leaky_relu(0.2).mul(v[1].sigmoid());
            let b = v[1].tanh().sub(v[0].scale(0.3)).add_scalar(0.1);
            a.add(b.square()).upsample_nearest(2).global_avg_pool().exp().sum()
        },
        1e-6,
        4,
        &mut r,
    );
    assert!(report.max_relative_error() < TOL, "{report:?}");
}

#[test]
fn normalization_gradients() {
    let mut r = rng(6);
    let x = Tensor::randn(&[3, 2, 4, 4], 2.0, &mut r);
    let gamma = Tensor::randn(&[2], 1.0, &mut r);
    let beta = Tensor::randn(&[2], 1.0, &mut r);
    let weights = Tensor::randn(&[3, 2, 4, 4], 1.0, &mut r);
    for axes in [NormAxes::Instance, NormAxes::Channel] {
        let w = weights.clone();
        let report = check_directional(
            &[x.clone(), gamma.clone(), beta.clone()],
            move |t, v| {
                let (y, _) = v[0].normalize(axes, 1e-5);
                y.channel_affine(v[1], v[2])
                    .mul(t.constant(w.clone()))
                    .sum()
            },
            1e-6,
            4,
            &mut r,
        );
        assert!(report.max_relative_error() < TOL, "{axes:?}: {report:?}");
    }
}

#[test]
fn instance_norm_zero_mean_unit_variance() {
    let mut r = rng(7);
    let tape = Tape::no_grad();
    let (y, stats) = tape
        .constant(Tensor::randn(&[2, 3, 8, 8], 3.0, &mut r))
        .normalize(NormAxes::Instance, 0.0);
    assert_eq!(stats.mean.len(), 6);
    for plane in y.value().data().chunks(64) {
        let m: f64 = plane.iter().sum::<f64>() / 64.0;
        let v: f64 = plane.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 64.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-9);
    }
}

#[test]
fn linear_matmul_concat_outer_gradients() {
    let mut r = rng(8);
    let report = check_directional(
        &[
            Tensor::randn(&[3, 5], 1.0, &mut r),
            Tensor::randn(&[4, 5], 1.0, &mut r),
            Tensor::randn(&[4], 1.0, &mut r),
            Tensor::randn(&[2, 3], 1.0, &mut r),
            Tensor::randn(&[3, 1, 2, 2], 1.0, &mut r),
        ],
        |_, v| {
            let h = v[0].linear(v[1], Some(v[2])); // [3, 4]
            let m = v[3].matmul(h); // [2, 4]
            let o = h.outer_spatial(v[4]); // [3, 4, 2, 2]
            let cat = synclay_autograd::Var::concat_channels(&[o, o.scale(2.0)]);
            m.square().sum().add(cat.tanh().sum())
        },
        1e-6,
        4,
        &mut r,
    );
    assert!(report.max_relative_error() < TOL, "{report:?}");
}

#[test]
fn loss_gradients() {
    let mut r = rng(9);
    let labels: Vec<usize> = (0..2 * 3 * 3).map(|i| (i * 7) % 4).collect();
    let target = Tensor::randn(&[6], 2.0, &mut r);
    let report = check_directional(
        &[
            Tensor::randn(&[2, 4, 3, 3], 1.0, &mut r),
            Tensor::randn(&[5], 2.0, &mut r),
            Tensor::randn(&[6], 2.0, &mut r),
        ],
        move |_, v| {
            v[0].cross_entropy(&labels)
                .add(v[1].bce_with_logits(1.0))
                .add(v[1].bce_with_logits(0.0))
                .add(v[2].huber(&target, 1.0))
        },
        1e-6,
        4,
        &mut r,
    );
    assert!(report.max_relative_error() < TOL, "{report:?}");
}

#[test]
fn cross_entropy_of_uniform_logits_is_ln_k() {
    let tape = Tape::no_grad();
    let loss = tape
        .constant(Tensor::zeros(&[1, 7, 4, 4]))
        .cross_entropy(&[3; 16]);
    assert!((loss.item() - 7f64.ln()).abs() < 1e-12);
}

#[test]
fn resample_gradients() {
    let mut r = rng(10);
    let boxes = [
        BoxRegion { x0: 1, y0: 2, x1: 7, y1: 5 },
        BoxRegion { x0: 3, y0: 0, x1: 8, y1: 8 },
    ];
    for overlap in [Overlap::Sum, Overlap::Max] {
        let report = check_directional(
            &[Tensor::randn(&[2, 3, 4, 4], 1.0, &mut r)],
            move |_, v| v[0].compose_boxes(&boxes, (8, 9), overlap).square().sum(),
            1e-6,
            4,
            &mut r,
        );
        assert!(report.max_relative_error() < TOL, "{overlap:?}: {report:?}");
    }
    let report = check_directional(
        &[Tensor::randn(&[1, 3, 8, 9], 1.0, &mut r)],
        move |_, v| v[0].crop_resize(&boxes, (5, 5)).square().sum(),
        1e-6,
        4,
        &mut r,
    );
    assert!(report.max_relative_error() < TOL, "{report:?}");
}

#[test]
fn frozen_and_no_grad_tapes_track_nothing() {
    let mut store = ParamStore::new("s");
    let w = store.add("w", Tensor::ones(&[2]));
    let tape = Tape::new();
    tape.freeze(&store);
    let loss = tape.param(&store, w).square().sum();
    let grads = tape.backward(loss);
    assert!(grads.param(&store, w).is_none());
    assert_eq!(grads.norm_for(&store), 0.0);

    let tape = Tape::no_grad();
    let v = tape.param(&store, w);
    assert!(!v.is_tracked());
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut store = ParamStore::new("s");
    let w = store.add("w", Tensor::new(&[3], vec![1.0, -2.0, 0.5]));
    let mut adam = Adam::new(&store, AdamConfig::default());
    let tape = Tape::new();
    let loss = tape.param(&store, w).square().sum();
    let grads = tape.backward(loss);
    adam.step(&mut store, &grads);
    // With bias correction the first step is lr * sign(g) up to eps.
    let expected = [1.0 - 1e-4, -2.0 + 1e-4, 0.5 - 1e-4];
    for (v, e) in store.get(w).data().iter().zip(expected) {
        assert!((v - e).abs() < 1e-10);
    }
}

#[test]
fn param_blob_round_trip_is_bit_exact() {
    let mut r = rng(11);
    let mut store = ParamStore::new("net");
    store.add("a", Tensor::randn(&[3, 4], 1.0, &mut r));
    store.add_buffer("b", Tensor::randn(&[2], 1.0, &mut r));
    let mut bytes = Vec::new();
    store.write_to(&mut bytes).unwrap();
    let back = ParamStore::read_from("net", &mut bytes.as_slice()).unwrap();
    assert!(store.bit_identical(&back));
    assert!(!back.is_trainable(back.find("b").unwrap()));
}
