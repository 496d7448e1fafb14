use msnas::graph::{decode_table, encode_table, export_dot, sigmoid, validate_graph, ChannelBudget};
use msnas::mutation::{apply_node_op, init_population, MutationConfig, NODE_OPS};
use msnas::proxy::accuracy_of;
use msnas::search::{make_child, round_rng, tournament_select, Strategy};
use msnas::tensor::{softmax_rows, Tape, Tensor};
use msnas::LayerSchedule;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn population(seed: u64, n: usize) -> Vec<msnas::ArchitectureGraph> {
    init_population(n, ChannelBudget::DESK, &LayerSchedule::desk(), &MutationConfig::default(), seed).unwrap()
}

fn feature_map(seed: u64, shape: &[usize]) -> Tensor {
    Tensor::randn(shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gated_sum_ignores_input_order(seed in 0u64..1000, n in 1usize..5, rot in 0usize..4) {
        let shape = [1, 2, 2, 2, 3];
        let xs: Vec<Tensor> = (0..n).map(|i| feature_map(seed * 7 + i as u64, &shape)).collect();
        let ws: Vec<f64> = (0..n).map(|i| ((seed + i as u64) % 9) as f64 - 4.0).collect();
        let run = |order: &[usize]| {
            let mut tape = Tape::new();
            let inputs: Vec<_> = order.iter().map(|&i| tape.constant(xs[i].clone())).collect();
            let logits: Vec<_> = order.iter().map(|&i| tape.constant(Tensor::scalar(ws[i]))).collect();
            let y = tape.gated_weighted_sum(&inputs, &logits).unwrap();
            tape.value(y).clone()
        };
        let base: Vec<usize> = (0..n).collect();
        let mut rotated = base.clone();
        rotated.rotate_left(rot % n);
        let a = run(&base);
        let b = run(&rotated);
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
        // direct definition
        for (i, v) in a.data().iter().enumerate() {
            let want: f64 = (0..n).map(|j| sigmoid(ws[j]) * xs[j].data()[i]).sum();
            prop_assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_matches_direct_formula(seed in 0u64..1000, rows in 1usize..5, k in 2usize..8, s in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = Tensor::randn(&[rows, k], 3.0, &mut rng);
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..k)).collect();
        let mut tape = Tape::new();
        let l = tape.leaf(logits.clone(), true);
        let loss = tape.softmax_cross_entropy(l, &labels, s).unwrap();
        let got = tape.value(loss).data()[0];
        let mut want = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = &logits.data()[r * k..(r + 1) * k];
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            for (c, v) in row.iter().enumerate() {
                let p = v.exp() / z;
                let target = s / k as f64 + if c == label { 1.0 - s } else { 0.0 };
                want -= target * p.ln();
            }
        }
        want /= rows as f64;
        prop_assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        let probs = softmax_rows(&logits);
        for row in probs.data().chunks(k) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table_round_trip_after_mutation(seed in 0u64..500, ops in 0usize..8) {
        let mut g = population(seed, 1).remove(0);
        let cfg = MutationConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..ops {
            if let Ok(next) = apply_node_op(&g, *NODE_OPS.choose(&mut rng).unwrap(), &cfg, &mut rng) {
                g = next;
            }
        }
        let text = encode_table(&g);
        let back = decode_table(&text).unwrap();
        prop_assert_eq!(encode_table(&back), text);
        prop_assert_eq!(back.num_edges(), g.num_edges());
        for level in 1..=4 {
            prop_assert_eq!(back.channel_sum(level), g.channel_sum(level));
        }
        let dot = export_dot(&g);
        prop_assert_eq!(dot.matches("->").count(), g.num_edges() + g.nodes_at_level(4).len());
    }

    #[test]
    fn children_stay_valid(seed in 0u64..300, guided in any::<bool>()) {
        let parent = population(seed, 1).remove(0);
        let strategy = if guided { Strategy::Guided } else { Strategy::Standard };
        let (child, ops) = make_child(&parent, strategy, &MutationConfig::default(), &mut round_rng(seed, 3));
        prop_assert!(validate_graph(&child).is_ok());
        prop_assert!(ops.len() <= 4);
        prop_assert_eq!(child.budget(), parent.budget());
    }

    #[test]
    fn accuracy_is_bounded(seed in 0u64..1000, n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = Tensor::randn(&[n, 8], 1.0, &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..8)).collect();
        let acc = accuracy_of(&scores, &labels);
        prop_assert!((0.0..=1.0).contains(&acc.top1));
        prop_assert!(acc.top1 <= acc.top5 && acc.top5 <= 1.0);
        prop_assert!((0.0..=2.0).contains(&acc.fitness()));
    }
}

#[test]
fn random_scores_over_ten_classes_have_fitness_near_point_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let scores = Tensor::uniform(&[n, 10], 0.0, 1.0, &mut rng);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..10)).collect();
    let acc = accuracy_of(&scores, &labels);
    // top-1 ~ Bernoulli(0.1), top-5 ~ Bernoulli(0.5)
    let sd = (0.1f64 * 0.9 / n as f64).sqrt() + (0.25 / n as f64).sqrt();
    assert!((acc.fitness() - 0.6).abs() < 4.0 * sd, "{acc:?}");
}

#[test]
fn perfect_and_hopeless_classifiers() {
    let labels = vec![0, 3, 7];
    let perfect = Tensor::from_fn(&[3, 8], |i| if i % 8 == labels[i / 8] { 1.0 } else { 0.0 });
    assert_eq!(accuracy_of(&perfect, &labels).fitness(), 2.0);
    let hopeless = Tensor::from_fn(&[3, 8], |i| if i % 8 == labels[i / 8] { -1.0 } else { (i % 8) as f64 });
    assert_eq!(accuracy_of(&hopeless, &labels).fitness(), 0.0);
}

#[test]
fn tournament_winner_matches_expected_order_statistic() {
    let f: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
    let order: Vec<u64> = (0..20).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let wins: f64 = (0..2000).map(|_| f[tournament_select(&f, &order, 5, &mut rng)]).sum::<f64>() / 2000.0;
    // the max of 5 distinct draws from 1..=20 averages 5 * 21 / 6 = 17.5, so from 0..20 it is 16.5
    assert!((wins - 1.65).abs() < 0.05, "{wins}");
}
