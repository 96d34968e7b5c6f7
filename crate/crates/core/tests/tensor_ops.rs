use lyrnet_core::rng::SeedRng;
use lyrnet_core::tensor::{grad_check, Mode, Tensor, TensorError};
use proptest::prelude::*;

fn random_tensor(shape: Vec<usize>, rng: &mut SeedRng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform() * 4.0 - 2.0).collect();
    Tensor::param(shape, data)
}

// ── matmul ──────────────────────────────────────────────────────────

#[test]
fn matmul_identity() {
    let i = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
    let b = Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]);
    assert_eq!(i.matmul(&b).unwrap().data(), &[3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn matmul_inner_product() {
    let a = Tensor::new(vec![1, 2], vec![1.0, 2.0]);
    let b = Tensor::new(vec![2, 1], vec![3.0, 4.0]);
    assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let a = Tensor::new(vec![2, 3], vec![0.0; 6]);
    let b = Tensor::new(vec![2, 2], vec![0.0; 4]);
    let err = a.matmul(&b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = SeedRng::new(42);
    let a = random_tensor(vec![4, 5], &mut rng);
    let b = random_tensor(vec![5, 3], &mut rng);
    let report = grad_check(
        |inputs| Ok(inputs[0].matmul(&inputs[1])?.sum()),
        &[a, b],
        1e-5,
    )
    .unwrap();
    assert!(report.max_rel_err() < 1e-4, "{}", report.max_rel_err());
}

// ── softmax ─────────────────────────────────────────────────────────

#[test]
fn softmax_symmetry() {
    let x = Tensor::new(vec![2], vec![0.0, 0.0]);
    let y = x.softmax_last();
    assert_eq!(y.data(), &[0.5, 0.5]);
}

#[test]
fn softmax_large_logits_do_not_overflow() {
    let x = Tensor::new(vec![3], vec![1000.0, 1000.0, 1000.0]);
    let y = x.softmax_last();
    for v in y.data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn softmax_matches_direct_formula() {
    let x = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]);
    let y = x.softmax_last();
    let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
    for (j, v) in y.data().iter().enumerate() {
        let expect = ((j + 1) as f64).exp() / z;
        assert!((v - expect).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant(
        xs in proptest::collection::vec(-50.0f64..50.0, 1..12),
        c in -100.0f64..100.0,
    ) {
        let n = xs.len();
        let x = Tensor::new(vec![n], xs.clone());
        let y = x.softmax_last();
        let s: f64 = y.data().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-6);
        prop_assert!(y.data().iter().all(|v| *v >= 0.0));

        let shifted = Tensor::new(vec![n], xs.iter().map(|v| v + c).collect());
        let ys = shifted.softmax_last();
        for (a, b) in y.data().iter().zip(ys.data()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

// ── cross entropy ───────────────────────────────────────────────────

#[test]
fn cross_entropy_uniform_logits_is_ln_n() {
    let logits = Tensor::new(vec![1, 4], vec![0.0; 4]);
    for t in 0..4 {
        let loss = logits.cross_entropy(&[t]).unwrap().item();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn cross_entropy_saturated_correct_class() {
    let logits = Tensor::new(vec![1, 2], vec![30.0, -30.0]);
    let loss = logits.cross_entropy(&[0]).unwrap().item();
    assert!(loss < 1e-9 && loss >= 0.0);
}

#[test]
fn cross_entropy_matches_manual_batch() {
    let mut rng = SeedRng::new(9);
    let rows = 3;
    let n = 5;
    let data: Vec<f64> = (0..rows * n).map(|_| rng.uniform() * 4.0 - 2.0).collect();
    let targets = [1usize, 4, 0];
    let logits = Tensor::new(vec![rows, n], data.clone());
    let loss = logits.cross_entropy(&targets).unwrap().item();

    let mut manual = 0.0;
    for i in 0..rows {
        let row = &data[i * n..(i + 1) * n];
        let z: f64 = row.iter().map(|v| v.exp()).sum();
        manual -= (row[targets[i]].exp() / z).ln();
    }
    manual /= rows as f64;
    assert!((loss - manual).abs() < 1e-12);
}

#[test]
fn cross_entropy_rejects_out_of_range_target() {
    let logits = Tensor::new(vec![2, 3], vec![0.0; 6]);
    let err = logits.cross_entropy(&[0, 7]).unwrap_err();
    match err {
        TensorError::TargetOutOfRange { row, index, .. } => {
            assert_eq!((row, index), (1, 7));
        }
        other => panic!("unexpected error {other:?}"),
    }
}

proptest! {
    #[test]
    fn cross_entropy_is_nonnegative(
        xs in proptest::collection::vec(-20.0f64..20.0, 4),
        t in 0usize..4,
    ) {
        let logits = Tensor::new(vec![1, 4], xs);
        let loss = logits.cross_entropy(&[t]).unwrap().item();
        prop_assert!(loss >= 0.0);
    }
}

// ── layer norm ──────────────────────────────────────────────────────

#[test]
fn layer_norm_constant_row_collapses_to_bias() {
    let x = Tensor::new(vec![1, 3], vec![5.0, 5.0, 5.0]);
    let g = Tensor::new(vec![3], vec![1.0; 3]);
    let b = Tensor::new(vec![3], vec![0.0; 3]);
    let y = x.layer_norm(&g, &b, 1e-5).unwrap();
    for v in y.data() {
        assert!(v.abs() < 1e-9);
    }
}

#[test]
fn layer_norm_standardizes() {
    let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]);
    let g = Tensor::new(vec![3], vec![1.0; 3]);
    let b = Tensor::new(vec![3], vec![0.0; 3]);
    let y = x.layer_norm(&g, &b, 1e-9).unwrap();
    let mean: f64 = y.data().iter().sum::<f64>() / 3.0;
    let var: f64 = y.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
    assert!(mean.abs() < 1e-6);
    assert!((var - 1.0).abs() < 1e-6);
}

#[test]
fn layer_norm_gradient_matches_finite_differences() {
    let mut rng = SeedRng::new(5);
    let x = random_tensor(vec![2, 8], &mut rng);
    let g = random_tensor(vec![8], &mut rng);
    let b = random_tensor(vec![8], &mut rng);
    let w = random_tensor(vec![2, 8], &mut rng).detach(); // fixed downstream weighting
    let report = grad_check(
        move |inputs| {
            Ok(inputs[0]
                .layer_norm(&inputs[1], &inputs[2], 1e-5)?
                .mul(&w)?
                .sum())
        },
        &[x, g, b],
        1e-5,
    )
    .unwrap();
    assert!(report.max_rel_err() < 1e-4, "{}", report.max_rel_err());
}

// ── dropout ─────────────────────────────────────────────────────────

#[test]
fn dropout_eval_is_identity() {
    let mut rng = SeedRng::new(1);
    let x = Tensor::new(vec![4], vec![1.5, -2.0, 0.0, 7.0]);
    let y = x.dropout(0.5, Mode::Eval, &mut rng).unwrap();
    for (a, b) in x.data().iter().zip(y.data()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn dropout_p_zero_is_identity() {
    let mut rng = SeedRng::new(1);
    let x = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]);
    let y = x.dropout(0.0, Mode::Train, &mut rng).unwrap();
    assert_eq!(x.data(), y.data());
}

#[test]
fn dropout_rate_concentrates() {
    let mut rng = SeedRng::new(123);
    let n = 100_000;
    let x = Tensor::new(vec![n], vec![1.0; n]);
    let y = x.dropout(0.1, Mode::Train, &mut rng).unwrap();
    let dropped = y.data().iter().filter(|v| **v == 0.0).count();
    let rate = dropped as f64 / n as f64;
    assert!((rate - 0.1).abs() < 0.01, "observed drop rate {rate}");
    // survivors rescaled by 1/(1-p)
    let survivor = y.data().iter().find(|v| **v != 0.0).unwrap();
    assert!((survivor - 1.0 / 0.9).abs() < 1e-12);
}

#[test]
fn dropout_rejects_p_one() {
    let mut rng = SeedRng::new(1);
    let x = Tensor::new(vec![2], vec![1.0, 2.0]);
    assert!(x.dropout(1.0, Mode::Train, &mut rng).is_err());
}

#[test]
fn dropout_same_seed_bit_identical_gradients() {
    let run = || {
        let mut rng = SeedRng::new(77);
        let x = Tensor::param(vec![64], vec![0.5; 64]);
        let y = x.dropout(0.3, Mode::Train, &mut rng).unwrap().sum();
        y.backward();
        x.grad().unwrap()
    };
    let g1 = run();
    let g2 = run();
    assert_eq!(
        g1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        g2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

// ── grad_check itself ───────────────────────────────────────────────

#[test]
fn grad_check_sum_of_squares() {
    let x = Tensor::param(vec![2], vec![1.0, 2.0]);
    let report = grad_check(|inputs| Ok(inputs[0].mul(&inputs[0])?.sum()), &[x.clone()], 1e-5).unwrap();
    assert!(report.max_rel_err() < 1e-8, "{}", report.max_rel_err());
    // analytic gradient is [2, 4]
    let y = x.mul(&x).unwrap().sum();
    y.backward();
    let g = x.grad().unwrap();
    assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 4.0).abs() < 1e-12);
}

#[test]
fn grad_check_cross_entropy_of_matmul() {
    let mut rng = SeedRng::new(31);
    let a = random_tensor(vec![3, 4], &mut rng);
    let b = random_tensor(vec![4, 4], &mut rng);
    let report = grad_check(
        |inputs| inputs[0].matmul(&inputs[1])?.cross_entropy(&[2, 0, 3]),
        &[a, b],
        1e-5,
    )
    .unwrap();
    assert!(report.max_rel_err() < 1e-4, "{}", report.max_rel_err());
}

#[test]
fn grad_check_linear_map_is_exact() {
    let x = Tensor::param(vec![5], vec![0.3, -1.0, 2.0, 0.0, 4.5]);
    let y = x.sum();
    y.backward();
    assert_eq!(x.grad().unwrap(), vec![1.0; 5]);
}

#[test]
fn grad_check_rejects_non_scalar() {
    let x = Tensor::param(vec![2], vec![1.0, 2.0]);
    let err = grad_check(|inputs| inputs[0].add(&inputs[0]), &[x], 1e-5).unwrap_err();
    assert!(matches!(err, TensorError::NonScalarOutput { .. }));
}

// ── remaining primitive gradients ───────────────────────────────────

#[test]
fn elementwise_and_structural_gradients() {
    let mut rng = SeedRng::new(8);
    // Each case reduces through a fixed random weighting so every output
    // element contributes distinctly to the checked scalar.
    let mut weight = |shape: Vec<usize>| random_tensor(shape, &mut rng).detach();

    let w_add = weight(vec![3, 4]);
    let w_gelu = weight(vec![10]);
    let w_tanh = weight(vec![10]);
    let w_softmax = weight(vec![2, 5]);
    let w_transpose = weight(vec![4, 3]);
    let w_crows = weight(vec![6, 3]);
    let w_ccols = weight(vec![3, 6]);
    let w_slice = weight(vec![2, 2]);
    let w_bcast = weight(vec![3, 4]);
    let w_meanrows = weight(vec![3]);
    let w_gather = weight(vec![3, 5]);

    let cases: Vec<(&str, Box<dyn Fn(&[Tensor]) -> Result<Tensor, TensorError>>, Vec<Tensor>)> = vec![
        (
            "add",
            Box::new(move |i: &[Tensor]| Ok(i[0].add(&i[1])?.mul(&w_add)?.sum())),
            vec![random_tensor(vec![3, 4], &mut rng), random_tensor(vec![3, 4], &mut rng)],
        ),
        (
            "mul",
            Box::new(|i: &[Tensor]| Ok(i[0].mul(&i[1])?.sum())),
            vec![random_tensor(vec![6], &mut rng), random_tensor(vec![6], &mut rng)],
        ),
        (
            "gelu",
            Box::new(move |i: &[Tensor]| Ok(i[0].gelu().mul(&w_gelu)?.sum())),
            vec![random_tensor(vec![10], &mut rng)],
        ),
        (
            "tanh",
            Box::new(move |i: &[Tensor]| Ok(i[0].tanh_act().mul(&w_tanh)?.sum())),
            vec![random_tensor(vec![10], &mut rng)],
        ),
        (
            "softmax",
            Box::new(move |i: &[Tensor]| Ok(i[0].softmax_last().mul(&w_softmax)?.sum())),
            vec![random_tensor(vec![2, 5], &mut rng)],
        ),
        (
            "transpose",
            Box::new(move |i: &[Tensor]| Ok(i[0].transpose2()?.mul(&w_transpose)?.sum())),
            vec![random_tensor(vec![3, 4], &mut rng)],
        ),
        (
            "concat_rows",
            Box::new(move |i: &[Tensor]| {
                Ok(Tensor::concat_rows(&[i[0].clone(), i[1].clone()])?
                    .mul(&w_crows)?
                    .sum())
            }),
            vec![random_tensor(vec![2, 3], &mut rng), random_tensor(vec![4, 3], &mut rng)],
        ),
        (
            "concat_cols",
            Box::new(move |i: &[Tensor]| {
                Ok(Tensor::concat_cols(&[i[0].clone(), i[1].clone()])?
                    .mul(&w_ccols)?
                    .sum())
            }),
            vec![random_tensor(vec![3, 2], &mut rng), random_tensor(vec![3, 4], &mut rng)],
        ),
        (
            "slice",
            Box::new(move |i: &[Tensor]| {
                Ok(i[0].slice_rows(1, 3)?.slice_cols(0, 2)?.mul(&w_slice)?.sum())
            }),
            vec![random_tensor(vec![4, 4], &mut rng)],
        ),
        (
            "add_row_broadcast",
            Box::new(move |i: &[Tensor]| {
                Ok(i[0].add_row_broadcast(&i[1])?.mul(&w_bcast)?.sum())
            }),
            vec![random_tensor(vec![3, 4], &mut rng), random_tensor(vec![4], &mut rng)],
        ),
        (
            "mean_rows",
            Box::new(move |i: &[Tensor]| Ok(i[0].mean_rows()?.mul(&w_meanrows)?.sum())),
            vec![random_tensor(vec![5, 3], &mut rng)],
        ),
        (
            "gather_rel",
            Box::new(move |i: &[Tensor]| Ok(i[0].gather_rel(2)?.mul(&w_gather)?.sum())),
            // q_len=3, k_len=5, n_rel=7
            vec![random_tensor(vec![3, 7], &mut rng)],
        ),
    ];
    for (name, f, inputs) in cases {
        let report = grad_check(f, &inputs, 1e-5).unwrap();
        assert!(
            report.max_rel_err() < 1e-4,
            "{name}: max rel err {}",
            report.max_rel_err()
        );
    }
}

#[test]
fn embedding_lookup_gradient_scatters() {
    let table = Tensor::param(vec![4, 3], (0..12).map(|v| v as f64).collect());
    let out = Tensor::embedding_lookup(&table, &[1, 1, 3]).unwrap();
    assert_eq!(out.shape(), &[3, 3]);
    assert_eq!(&out.data()[0..3], &[3.0, 4.0, 5.0]);
    out.sum().backward();
    let g = table.grad().unwrap();
    assert_eq!(g, vec![0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
}

#[test]
fn embedding_lookup_rejects_out_of_vocab() {
    let table = Tensor::new(vec![4, 3], vec![0.0; 12]);
    let err = Tensor::embedding_lookup(&table, &[0, 9]).unwrap_err();
    assert!(err.to_string().contains("position 1"), "{err}");
}

#[test]
fn gather_rel_indexes_relative_offsets() {
    // q_len=2, m_len=1, k_len=3, n_rel=4; column r holds distance r-1.
    let x = Tensor::new(vec![2, 4], vec![10.0, 11.0, 12.0, 13.0, 20.0, 21.0, 22.0, 23.0]);
    let y = x.gather_rel(1).unwrap();
    // row 0 (global pos 1): distances to keys 0..3 are 1,0,-1
    // row 1 (global pos 2): distances 2,1,0
    assert_eq!(y.data(), &[12.0, 11.0, 10.0, 23.0, 22.0, 21.0]);
}

#[test]
fn forward_ops_stay_finite_on_finite_inputs() {
    let mut rng = SeedRng::new(99);
    let x = random_tensor(vec![4, 8], &mut rng);
    let g = Tensor::new(vec![8], vec![1.0; 8]);
    let b = Tensor::new(vec![8], vec![0.0; 8]);
    let y = x
        .layer_norm(&g, &b, 1e-5)
        .unwrap()
        .gelu()
        .softmax_last()
        .sum();
    assert!(y.all_finite());
}
