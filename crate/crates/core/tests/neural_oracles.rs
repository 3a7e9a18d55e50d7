mod common;

use commevolve::features::FeatureConfig;
use commevolve::models::{
    predict, predict_batched, BaselineModel, EventModel, FlatInput, GnanConfig, GnanInput, GnanModel,
};
use commevolve::neural::{attention_coefficients, gn_attention, AdamW, AdamWConfig, AttentionParams, Tape, Tensor};
use common::{finite_difference_check, permute_rows, random_example, targets};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-4;
const FD_TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
const FD_FLOOR: f64 = 1e-3;

fn gnan(heads: usize, seed: u64) -> GnanModel<f64> {
    GnanModel::new(GnanConfig::for_features(&FeatureConfig::default(), 16, heads), seed).unwrap()
}

#[test]
fn gnan_gradients_match_finite_differences() {
    let features = FeatureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut skipped = 0;
    for trial in 0..12u64 {
        let heads = [1, 2, 4][trial as usize % 3];
        let model = gnan(heads, trial);
        let n = rng.random_range(3..=12);
        let members = rng.random_range(1..=n);
        let e = random_example(&mut rng, n, members, &features);
        let input = model.prepare(&e).unwrap();
        let report = finite_difference_check(&model, &input, &targets(&e), FD_STEP, FD_FLOOR);
        assert!(report.max_rel_error < FD_TOLERANCE, "trial {trial}: {report:?}");
        assert!(report.checked > 1000);
        skipped += report.skipped;
    }
    assert!(skipped < 100, "too many ReLU crossings: {skipped}");
}

#[test]
fn baseline_gradients_match_finite_differences() {
    let features = FeatureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let width = features.flat_width();
    for seed in 0..6 {
        let e = random_example(&mut rng, 6, 3, &features);
        for model in [
            BaselineModel::logistic_regression(width, seed),
            BaselineModel::mlp3(width, 16, seed),
        ] {
            let input = FlatInput::from_example(&e);
            let report = finite_difference_check(&model, &input, &targets(&e), FD_STEP, FD_FLOOR);
            assert!(report.max_rel_error < FD_TOLERANCE, "{:?}: {report:?}", model.kind());
        }
    }
}

/// Per-head attention computed directly from the definition.
fn attention_by_hand(z_x: &Tensor<f64>, z_q: &Tensor<f64>, params: &AttentionParams<f64>) -> Vec<f64> {
    let d_m = params.d_m() as f64;
    let mut concat = Vec::new();
    for h in params.heads() {
        let q = z_q.matmul(&h.w_q).unwrap();
        let k = z_x.matmul(&h.w_k).unwrap();
        let v = z_x.matmul(&h.w_v).unwrap();
        let logits: Vec<f64> = (0..k.rows())
            .map(|j| (0..k.cols()).map(|c| q.get(0, c) * k.get(j, c)).sum::<f64>() / d_m.sqrt())
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for c in 0..v.cols() {
            let s: f64 = (0..v.rows()).map(|j| exps[j] / total * v.get(j, c)).sum();
            concat.push(s.max(0.0));
        }
    }
    let w_o = params.w_o();
    (0..w_o.cols())
        .map(|c| concat.iter().enumerate().map(|(r, x)| x * w_o.get(r, c)).sum())
        .collect()
}

#[test]
fn attention_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for heads in [1, 2, 4] {
        for n in [1, 3, 12] {
            let params = AttentionParams::<f64>::new(16, 16, 16 / heads, 16 / heads, heads, &mut rng).unwrap();
            let z_x = Tensor::from_vec(n, 16, (0..n * 16).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
            let z_q = Tensor::row_vector((0..16).map(|_| rng.random_range(0.0..2.0)).collect());
            let got = gn_attention(&z_x, &z_q, &params, None).unwrap();
            for (a, b) in got.data().iter().zip(attention_by_hand(&z_x, &z_q, &params)) {
                assert!((a - b).abs() < 1e-12, "heads {heads}, n {n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn adamw_follows_three_step_recurrence() {
    let cfg = AdamWConfig::default();
    let grads = [0.2, -0.1, 0.05];
    // Hand-rolled recurrence.
    let (mut theta, mut m, mut v) = (0.5f64, 0.0, 0.0);
    let mut oracle = Vec::new();
    for (t, g) in grads.iter().enumerate() {
        let t = t as i32 + 1;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        let m_hat = m / (1.0 - cfg.beta1.powi(t));
        let v_hat = v / (1.0 - cfg.beta2.powi(t));
        theta -= cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.epsilon) + cfg.weight_decay * theta);
        oracle.push(theta);
    }
    let frozen = [0.49899500004999997, 0.49872367307718624, 0.49837825671798947];

    let mut p = Tensor::<f64>::scalar(0.5);
    let mut opt = AdamW::new(cfg, [&p]);
    for (i, g) in grads.iter().enumerate() {
        opt.step(&mut [&mut p], &[Tensor::scalar(*g)]).unwrap();
        let got = p.item().unwrap();
        assert!((got - oracle[i]).abs() < 1e-15);
        assert!((got - frozen[i]).abs() < 1e-15);
    }
    assert_eq!(opt.steps(), 3);
}

#[test]
fn padded_batches_equal_single_predictions() {
    let features = FeatureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let examples: Vec<_> = (0..20)
        .map(|_| {
            let n = rng.random_range(1..=12);
            let members = rng.random_range(1..=n);
            random_example(&mut rng, n, members, &features)
        })
        .collect();
    let model = gnan(4, 5);
    let single = predict(&model, &examples).unwrap();
    let batched = predict_batched(&model, &examples, 7).unwrap();
    for (a, b) in single.iter().flatten().zip(batched.iter().flatten()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn gnan_single_precision_tracks_double() {
    let features = FeatureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let e = random_example(&mut rng, 7, 4, &features);
    let cfg = GnanConfig::for_features(&features, 16, 4);
    let wide = GnanModel::<f64>::new(cfg, 9).unwrap().forward(&e).unwrap();
    let narrow = GnanModel::<f32>::new(cfg, 9).unwrap().forward(&e).unwrap();
    for (a, b) in wide.iter().zip(&narrow) {
        assert!((a - f64::from(*b)).abs() < 1e-5);
    }
}

#[test]
fn ablated_attention_ignores_node_rows() {
    let features = FeatureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let a = random_example(&mut rng, 5, 2, &features);
    let mut b = random_example(&mut rng, 9, 3, &features);
    b.g = a.g.clone();
    let model = gnan(2, 1).with_attention_ablated();
    assert_eq!(model.forward(&a).unwrap(), model.forward(&b).unwrap());
    assert_ne!(gnan(2, 1).forward(&a).unwrap(), gnan(2, 1).forward(&b).unwrap());
}

#[test]
fn padding_rows_do_not_change_output() {
    let features = FeatureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let e = random_example(&mut rng, 4, 2, &features);
    let model = gnan(2, 3);
    let input = GnanInput::<f64>::from_example(&e).unwrap();
    let plain = model.predict_one(&input).unwrap();
    let padded = model.predict_one(&input.padded(9)).unwrap();
    for (a, b) in plain.iter().zip(&padded) {
        assert!((a - b).abs() < 1e-10);
    }
    let mut tape = Tape::new();
    let (bound, _) = model.bind(&mut tape).unwrap();
    let out = model.apply(&bound, &mut tape, &input.padded(9)).unwrap();
    let loss = tape.bce(out, &targets(&e)).unwrap();
    assert!(tape.backward(loss).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficient_rows_sum_to_one(seed in any::<u64>(), n in 1usize..30, scale in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = Tensor::from_vec(3, 4, (0..12).map(|_| rng.random_range(-scale..scale)).collect()).unwrap();
        let k = Tensor::from_vec(n, 4, (0..n * 4).map(|_| rng.random_range(-scale..scale)).collect()).unwrap();
        let mask: Vec<bool> = (0..n).map(|j| j == 0 || rng.random_bool(0.7)).collect();
        for m in [None, Some(mask.as_slice())] {
            let a = attention_coefficients(&q, &k, 16, m).unwrap();
            for r in 0..a.rows() {
                let s: f64 = a.row(r).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert!(a.row(r).iter().all(|&w| (0.0..=1.0).contains(&w)));
            }
        }
    }

    #[test]
    fn node_permutation_is_bit_identical(seed in any::<u64>(), n in 2usize..13, heads in prop::sample::select(vec![1usize, 2, 4])) {
        let features = FeatureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = rng.random_range(1..=n);
        let e = random_example(&mut rng, n, members, &features);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let model = gnan(heads, seed);
        prop_assert_eq!(model.forward(&e).unwrap(), model.forward(&permute_rows(&e, &perm)).unwrap());
    }

    #[test]
    fn predictions_are_probabilities(seed in any::<u64>(), n in 1usize..13) {
        let features = FeatureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_example(&mut rng, n, 1, &features);
        for p in gnan(4, seed).forward(&e).unwrap() {
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}
