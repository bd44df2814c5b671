use flowcast::encoding::EncodedSequence;
use flowcast::harness::{train_model, TrainParams};
use flowcast::neuralnet::{
    adam_step, clip_global_norm, forward, loss_and_gradients, AdamConfig, AdamState, Batch, Dims,
    GruNetwork,
};
use ndarray::Array3;
use proptest::prelude::*;
use rand::Rng;

fn max_relative_error(net: &mut GruNetwork, batch: &Batch) -> f64 {
    let (_, grads) = loss_and_gradients(net, batch).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.params().len() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let plus = loss_and_gradients(net, batch).unwrap().0;
        net.params_mut()[i] = orig - h;
        let minus = loss_and_gradients(net, batch).unwrap().0;
        net.params_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = grads.values()[i];
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

fn random_net(dims: Dims, seed: u64) -> GruNetwork {
    let mut rng = flowcast::seed::rng(seed);
    let mut net = GruNetwork::zeros(dims);
    for p in net.params_mut() {
        *p = rng.gen_range(-1.0..1.0);
    }
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dense_gradients_match_finite_differences(
        d in 1usize..4, h in 1usize..5, c in 2usize..5,
        lengths in proptest::collection::vec(1usize..5, 1..4),
        seed in any::<u64>(),
    ) {
        let dims = Dims { input: d, hidden: h, output: c };
        let mut net = random_net(dims, seed);
        let mut rng = flowcast::seed::rng(seed ^ 1);
        let t = *lengths.iter().max().unwrap();
        let x = Array3::from_shape_fn((lengths.len(), t, d), |_| rng.gen_range(-1.0..1.0));
        let targets = lengths.iter().map(|_| rng.gen_range(0..c)).collect();
        let batch = Batch::dense(x, lengths, targets).unwrap();
        let err = max_relative_error(&mut net, &batch);
        prop_assert!(err < 1e-4, "relative error {}", err);
    }

    #[test]
    fn binary_gradients_match_finite_differences(
        lengths in proptest::collection::vec(1usize..5, 1..4),
        seed in any::<u64>(),
    ) {
        let dims = Dims { input: 5, hidden: 3, output: 3 };
        let mut net = random_net(dims, seed);
        let mut rng = flowcast::seed::rng(seed ^ 2);
        let seqs: Vec<EncodedSequence> = lengths
            .iter()
            .map(|&len| EncodedSequence {
                steps: (0..len)
                    .map(|_| {
                        let mut s: Vec<u32> = (0..5).filter(|_| rng.gen_bool(0.4)).collect();
                        s.sort_unstable();
                        s
                    })
                    .collect(),
                width: 5,
                target: Some(rng.gen_range(0..3)),
                caseid: "c".into(),
                prefix_len: len,
            })
            .collect();
        let refs: Vec<&EncodedSequence> = seqs.iter().collect();
        let batch = Batch::from_sequences(&refs);
        let err = max_relative_error(&mut net, &batch);
        prop_assert!(err < 1e-4, "relative error {}", err);
    }

    #[test]
    fn probabilities_are_distributions(seed in any::<u64>(), len in 1usize..6) {
        let dims = Dims { input: 2, hidden: 3, output: 4 };
        let net = GruNetwork::new(dims, seed);
        let mut rng = flowcast::seed::rng(seed);
        let x = Array3::from_shape_fn((2, len, 2), |_| rng.gen_range(-3.0..3.0));
        let batch = Batch::dense(x, vec![len, 1], vec![0, 0]).unwrap();
        let (probs, _) = forward(&net, &batch).unwrap();
        for row in probs.rows() {
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clipping_bounds_norm(g in proptest::collection::vec(-100.0f64..100.0, 1..20), max in 0.1f64..10.0) {
        let mut g = g;
        let before = clip_global_norm(&mut g, max);
        let after = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(after <= max * (1.0 + 1e-12));
        if before <= max {
            prop_assert!((after - before).abs() < 1e-12);
        }
    }
}

#[test]
fn adam_matches_scalar_reference_on_quadratic() {
    let config = AdamConfig::default();
    let mut state = AdamState::new(2, config);
    let mut p = [1.0, -0.5];
    let mut reference = [(1.0f64, 0.0f64, 0.0f64), (-0.5, 0.0, 0.0)];
    for step in 1..=100 {
        let grads = [2.0 * p[0], 2.0 * p[1]];
        adam_step(&mut p, &grads, &mut state).unwrap();
        for (i, (q, m, v)) in reference.iter_mut().enumerate() {
            let g = 2.0 * *q;
            *m = 0.9 * *m + 0.1 * g;
            *v = 0.999 * *v + 0.001 * g * g;
            let m_hat = *m / (1.0 - 0.9f64.powi(step));
            let v_hat = *v / (1.0 - 0.999f64.powi(step));
            *q -= 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
            assert!((p[i] - *q).abs() <= 1e-10, "step {step}, param {i}");
        }
    }
}

#[test]
fn overfits_a_small_batch() {
    let dims = Dims { input: 3, hidden: 8, output: 3 };
    let mut net = GruNetwork::new(dims, 1);
    let mut rng = flowcast::seed::rng(8);
    let x = Array3::from_shape_fn((6, 4, 3), |_| rng.gen_range(-1.0..1.0));
    let batch = Batch::dense(x, vec![4, 3, 2, 4, 1, 3], vec![0, 1, 2, 2, 1, 0]).unwrap();
    let mut state = AdamState::new(net.params().len(), AdamConfig::default());
    let mut loss = f64::INFINITY;
    for _ in 0..3000 {
        let (l, mut g) = loss_and_gradients(&net, &batch).unwrap();
        loss = l;
        if loss < 0.01 {
            break;
        }
        clip_global_norm(g.values_mut(), 5.0);
        adam_step(net.params_mut(), g.values(), &mut state).unwrap();
    }
    assert!(loss < 0.01, "loss {loss}");
}

#[test]
fn training_reduces_loss_on_a_separable_task() {
    // The class is the first step's active input.
    let seqs: Vec<EncodedSequence> = (0..90)
        .map(|i| EncodedSequence {
            steps: vec![vec![(i % 3) as u32], vec![3], vec![4]],
            width: 5,
            target: Some(i % 3),
            caseid: format!("c{i}"),
            prefix_len: 3,
        })
        .collect();
    let params = TrainParams {
        iterations: 10,
        total_epochs: 10,
        batch_size: 16,
        hidden_dim: 8,
        learning_rate: 0.01,
        validation_sample: 1000,
    };
    let dims = Dims { input: 5, hidden: 8, output: 4 };
    let out = train_model(&params, dims, &seqs, &seqs, 4).unwrap();
    let first = out.loss_log[0];
    let last = *out.loss_log.last().unwrap();
    assert!(last < first, "loss {first} -> {last}");
    assert_eq!(out.validation_log.len(), 10);
}
