use fmbench_core::adaptors::{
    adaptor_fit, adaptor_predict, adaptor_predict_detailed, probe_loss_and_grad, AdaptorError,
    AdaptorSpec, AdaptorStrategy, ProbeObjective,
};
use fmbench_core::model::{
    MaskGrid, PatchFeature, Prediction, ReferenceLabel, Representation, TaskDefinition,
};
use fmbench_core::{load_task_registry, TaskId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn task(n: u8) -> TaskDefinition {
    load_task_registry().get(TaskId::new(n).unwrap()).clone()
}

fn spec(strategy: AdaptorStrategy, k: usize) -> AdaptorSpec {
    let mut s = AdaptorSpec::new(strategy);
    s.hyperparams.k = k;
    s
}

fn labeled(features: &[Vec<f64>], labels: &[i64]) -> Vec<(Representation, ReferenceLabel)> {
    features
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (f, &l))| {
            (
                Representation::case_level(format!("fs{i}"), f.clone()),
                ReferenceLabel::ClassLabel { label: l },
            )
        })
        .collect()
}

fn eval(features: &[Vec<f64>]) -> Vec<Representation> {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| Representation::case_level(format!("ev{i}"), f.clone()))
        .collect()
}

fn random_features(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect()
}

#[test]
fn knn_stores_every_few_shot_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_features(&mut rng, 48, 8);
    let y: Vec<i64> = (0..48).map(|i| i % 6).collect();
    let fitted = adaptor_fit(&spec(AdaptorStrategy::Knn, 5), &labeled(&x, &y), &task(1)).unwrap();
    assert_eq!(fitted.stored_samples(), Some(48));
    let json = serde_json::to_value(&fitted).unwrap();
    let stored: Vec<Vec<f64>> = serde_json::from_value(json["model"]["features"].clone()).unwrap();
    assert_eq!(stored, x);
}

#[test]
fn knn_vote_enumeration() {
    // Neighbors at distance 1..5 carry labels 2,2,2,0,1; the rest are far away.
    let mut x: Vec<Vec<f64>> = (1..=5).map(|d| vec![d as f64]).collect();
    let mut y = vec![2, 2, 2, 0, 1];
    for i in 0..4 {
        x.push(vec![100.0 + i as f64]);
        y.push(5);
    }
    let fitted = adaptor_fit(&spec(AdaptorStrategy::Knn, 5), &labeled(&x, &y), &task(1)).unwrap();
    let out = adaptor_predict_detailed(&fitted, &eval(&[vec![0.0]]), &task(1)).unwrap();
    assert_eq!(out[0].prediction, Prediction::ClassLabel { label: 2 });
    let probs = out[0].class_probabilities.clone().unwrap();
    let expected = [0.2, 0.2, 0.6, 0.0, 0.0, 0.0];
    assert_eq!(probs.len(), expected.len());
    for (p, e) in probs.iter().zip(expected) {
        assert!((p - e).abs() < 1e-12);
    }
}

#[test]
fn knn_vote_tie_goes_to_smallest_label() {
    let x = vec![vec![1.0], vec![2.0], vec![50.0]];
    let fitted = adaptor_fit(
        &spec(AdaptorStrategy::Knn, 2),
        &labeled(&x, &[4, 1, 0]),
        &task(1),
    )
    .unwrap();
    let preds = adaptor_predict(&fitted, &eval(&[vec![0.0]]), &task(1)).unwrap();
    assert_eq!(preds[0], Prediction::ClassLabel { label: 1 });
}

#[test]
fn exact_match_with_k1_returns_that_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_features(&mut rng, 20, 4);
    let y: Vec<i64> = (0..20).map(|i| (i * 7 % 6) as i64).collect();
    let fitted = adaptor_fit(&spec(AdaptorStrategy::Knn, 1), &labeled(&x, &y), &task(1)).unwrap();
    let preds = adaptor_predict(&fitted, &eval(&x), &task(1)).unwrap();
    for (p, &l) in preds.iter().zip(&y) {
        assert_eq!(*p, Prediction::ClassLabel { label: l });
    }
}

fn two_clusters(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<i64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = (i % 2) as i64;
        let center = if label == 0 { -2.0 } else { 2.0 };
        x.push((0..6).map(|_| center + rng.gen_range(-1.0..1.0)).collect());
        y.push(label);
    }
    (x, y)
}

#[test]
fn two_cluster_accuracy_for_every_classifier() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = two_clusters(&mut rng, 24);
    let (xe, ye) = two_clusters(&mut rng, 200);
    let t = task(4);
    for strategy in [
        AdaptorStrategy::Knn,
        AdaptorStrategy::NearestCentroid,
        AdaptorStrategy::LinearProbe,
    ] {
        let fitted = adaptor_fit(&spec(strategy, 5), &labeled(&x, &y), &t).unwrap();
        let preds = adaptor_predict(&fitted, &eval(&xe), &t).unwrap();
        let correct = preds
            .iter()
            .zip(&ye)
            .filter(|(p, &l)| **p == Prediction::ClassLabel { label: l })
            .count();
        assert!(
            correct as f64 / ye.len() as f64 > 0.9,
            "{strategy:?}: {correct}"
        );
    }
}

#[test]
fn probe_loss_strictly_decreases_on_separable_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (x, y) = two_clusters(&mut rng, 16);
    let fitted = adaptor_fit(
        &spec(AdaptorStrategy::LinearProbe, 5),
        &labeled(&x, &y),
        &task(2),
    )
    .unwrap();
    let curve = fitted.loss_curve().unwrap();
    assert_eq!(curve.len(), 200);
    assert!((curve[0] - 2f64.ln()).abs() < 1e-12);
    for w in curve.windows(2) {
        assert!(w[1] < w[0], "{} !< {}", w[1], w[0]);
    }
}

#[test]
fn patch_strategy_rejects_case_level_input() {
    let x = [vec![0.0, 1.0], vec![1.0, 0.0]];
    let few: Vec<_> = x
        .iter()
        .enumerate()
        .map(|(i, f)| {
            (
                Representation::case_level(format!("c{i}"), f.clone()),
                ReferenceLabel::Mask {
                    mask: MaskGrid::filled(vec![4, 4], vec![1.0, 1.0], 0).unwrap(),
                },
            )
        })
        .collect();
    let err = adaptor_fit(
        &spec(AdaptorStrategy::PatchKnnSegmentation, 1),
        &few,
        &task(9),
    )
    .unwrap_err();
    assert!(matches!(err, AdaptorError::IncompatibleRepresentation(_)));
    assert!(err.to_string().contains("incompatible representation kind"));
}

#[test]
fn k_larger_than_few_shot_is_rejected() {
    let x = vec![vec![0.0], vec![1.0]];
    let err = adaptor_fit(
        &spec(AdaptorStrategy::Knn, 3),
        &labeled(&x, &[0, 1]),
        &task(1),
    )
    .unwrap_err();
    assert!(matches!(
        err,
        AdaptorError::KTooLarge { k: 3, available: 2 }
    ));
}

#[test]
fn dimension_mismatch_at_predict() {
    let x = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let fitted = adaptor_fit(
        &spec(AdaptorStrategy::Knn, 1),
        &labeled(&x, &[0, 1]),
        &task(1),
    )
    .unwrap();
    let err = adaptor_predict(&fitted, &eval(&[vec![0.0]]), &task(1)).unwrap_err();
    assert!(matches!(
        err,
        AdaptorError::DimensionMismatch {
            expected: 2,
            got: 1
        }
    ));
}

#[test]
fn binary_task_outputs_neighbor_fraction() {
    let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
    let fitted = adaptor_fit(
        &spec(AdaptorStrategy::Knn, 4),
        &labeled(&x, &[1, 0, 1, 1, 0, 0]),
        &task(2),
    )
    .unwrap();
    let preds = adaptor_predict(&fitted, &eval(&[vec![0.0]]), &task(2)).unwrap();
    assert_eq!(preds[0], Prediction::Probability { value: 0.75 });
}

#[test]
fn survival_weighs_censored_neighbors_by_half() {
    let t3 = task(3);
    let rows = [
        (0.0, true, 2.0),
        (1.0, false, 6.0),
        (2.0, true, 4.0),
        (40.0, true, 100.0),
    ];
    let few: Vec<_> = rows
        .iter()
        .enumerate()
        .map(|(i, &(f, event, time))| {
            (
                Representation::case_level(format!("s{i}"), vec![f]),
                ReferenceLabel::Survival {
                    event,
                    time_years: time,
                },
            )
        })
        .collect();
    let fitted = adaptor_fit(&spec(AdaptorStrategy::Knn, 3), &few, &t3).unwrap();
    let preds = adaptor_predict(&fitted, &eval(&[vec![0.5]]), &t3).unwrap();
    let expected = (2.0 + 0.5 * 6.0 + 4.0) / 2.5;
    match preds[0] {
        Prediction::Continuous { value } => assert!((value - expected).abs() < 1e-12),
        ref p => panic!("{p:?}"),
    }
}

#[test]
fn regression_uses_inverse_distance_weights() {
    let t17 = task(17);
    let few: Vec<_> = [(0.0, 10.0), (3.0, 40.0), (10.0, 1000.0)]
        .iter()
        .enumerate()
        .map(|(i, &(f, v))| {
            (
                Representation::case_level(format!("r{i}"), vec![f]),
                ReferenceLabel::Continuous { value: v },
            )
        })
        .collect();
    let fitted = adaptor_fit(&spec(AdaptorStrategy::Knn, 2), &few, &t17).unwrap();
    let preds = adaptor_predict(&fitted, &eval(&[vec![1.0]]), &t17).unwrap();
    // Standardization rescales both distances by the same factor, so the
    // weights stay in the ratio 2 : 1.
    let expected = (2.0 * 10.0 + 40.0) / 3.0;
    match preds[0] {
        Prediction::Continuous { value } => assert!((value - expected).abs() < 1e-6, "{value}"),
        ref p => panic!("{p:?}"),
    }
}

#[test]
fn patch_segmentation_paints_footprints() {
    let patch = |c: [usize; 2], f: f64| PatchFeature {
        coord: c.to_vec(),
        size: vec![2, 2],
        spacing: vec![1.0, 1.0],
        features: vec![f],
    };
    let mut mask = MaskGrid::filled(vec![4, 4], vec![1.0, 1.0], 0).unwrap();
    for r in 0..2 {
        for c in 2..4 {
            mask.set(&[r, c], 3);
        }
    }
    let rep = Representation::patch_level(
        "fs",
        vec![4, 4],
        vec![
            patch([0, 0], 0.0),
            patch([0, 2], 10.0),
            patch([2, 0], 0.0),
            patch([2, 2], 0.5),
        ],
    );
    let t9 = task(9);
    let fitted = adaptor_fit(
        &spec(AdaptorStrategy::PatchKnnSegmentation, 1),
        &[(rep, ReferenceLabel::Mask { mask: mask.clone() })],
        &t9,
    )
    .unwrap();
    assert_eq!(fitted.stored_samples(), Some(4));
    let query = Representation::patch_level(
        "ev",
        vec![4, 4],
        vec![patch([0, 0], 9.0), patch([0, 2], 0.2), patch([1, 1], 9.5)],
    );
    let preds = adaptor_predict(&fitted, &[query], &t9).unwrap();
    let Prediction::Mask { mask: out } = &preds[0] else {
        panic!()
    };
    let expected: Vec<i32> = vec![3, 3, 0, 0, 3, 3, 3, 0, 0, 3, 3, 0, 0, 0, 0, 0];
    assert_eq!(out.data(), expected.as_slice());
}

#[test]
fn patch_detection_emits_local_maxima() {
    let patch = |c: [usize; 2], f: f64| PatchFeature {
        coord: c.to_vec(),
        size: vec![4, 4],
        spacing: vec![1.0, 1.0],
        features: vec![f],
    };
    let grid: Vec<[usize; 2]> = (0..3)
        .flat_map(|r| (0..3).map(move |c| [r * 4, c * 4]))
        .collect();
    let few_rep = Representation::patch_level(
        "fs",
        vec![12, 12],
        grid.iter()
            .enumerate()
            .map(|(i, &c)| patch(c, if i == 4 { 1.0 } else { 0.0 }))
            .collect(),
    );
    let refs = ReferenceLabel::Points {
        coords: vec![vec![5.0, 6.0]],
    };
    let t5 = task(5);
    let fitted = adaptor_fit(
        &spec(AdaptorStrategy::PatchKnnDetection, 1),
        &[(few_rep, refs)],
        &t5,
    )
    .unwrap();
    let query = Representation::patch_level(
        "ev",
        vec![12, 12],
        grid.iter()
            .enumerate()
            .map(|(i, &c)| patch(c, if i == 0 || i == 1 { 0.9 } else { 0.1 }))
            .collect(),
    );
    let preds = adaptor_predict(&fitted, &[query], &t5).unwrap();
    let Prediction::PointSet { points } = &preds[0] else {
        panic!()
    };
    // Patches 0 and 1 are adjacent plateau peaks; the lower index survives.
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].coord, vec![1.5, 1.5]);
    assert_eq!(points[0].confidence, 1.0);
}

#[test]
fn knn_resolves_to_patch_strategy_for_dense_tasks() {
    let knn = AdaptorSpec::new(AdaptorStrategy::Knn);
    assert_eq!(
        knn.resolve_for(&task(9)).strategy,
        AdaptorStrategy::PatchKnnSegmentation
    );
    assert_eq!(
        knn.resolve_for(&task(6)).strategy,
        AdaptorStrategy::PatchKnnDetection
    );
    assert_eq!(knn.resolve_for(&task(1)).strategy, AdaptorStrategy::Knn);
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt())
        .max(1e-12);
    diff / scale
}

/// Central finite differences of the probe loss, one coordinate at a time.
fn numeric_gradient(
    objective: ProbeObjective,
    params: &[f64],
    xs: &[Vec<f64>],
    ys: &[f64],
    l2: f64,
) -> Vec<f64> {
    let h = 1e-5;
    (0..params.len())
        .map(|i| {
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let (lp, _) = probe_loss_and_grad(objective, &plus, xs, ys, l2);
            let (lm, _) = probe_loss_and_grad(objective, &minus, xs, ys, l2);
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn probe_gradient_matches_finite_differences(seed in any::<u64>(), classes in 2usize..5, affine in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..8);
        let dim = rng.gen_range(1..5);
        let xs = random_features(&mut rng, n, dim);
        let objective = if affine { ProbeObjective::Affine } else { ProbeObjective::Softmax { classes } };
        let ys: Vec<f64> = (0..n)
            .map(|_| if affine { rng.gen_range(-5.0..5.0) } else { rng.gen_range(0..classes) as f64 })
            .collect();
        let params: Vec<f64> = (0..objective.param_count(dim)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l2 = rng.gen_range(0.0..0.1);
        let (_, grad) = probe_loss_and_grad(objective, &params, &xs, &ys, l2);
        let fd = numeric_gradient(objective, &params, &xs, &ys, l2);
        prop_assert!(relative_error(&grad, &fd) < 1e-5);
    }

    #[test]
    fn knn_with_full_k_is_the_majority_class(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..20);
        let x = random_features(&mut rng, n, 3);
        let y: Vec<i64> = (0..n).map(|_| rng.gen_range(0..6)).collect();
        let mut counts = [0usize; 6];
        for &l in &y { counts[l as usize] += 1; }
        let majority = (0..6).fold(0, |best, c| if counts[c] > counts[best] { c } else { best }) as i64;
        let fitted = adaptor_fit(&spec(AdaptorStrategy::Knn, n), &labeled(&x, &y), &task(1)).unwrap();
        let queries = random_features(&mut rng, 10, 3);
        for p in adaptor_predict(&fitted, &eval(&queries), &task(1)).unwrap() {
            prop_assert_eq!(p, Prediction::ClassLabel { label: majority });
        }
    }

    #[test]
    fn knn_neighbors_ignore_positive_scaling(seed in any::<u64>(), scale in 0.001f64..1000.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_features(&mut rng, 15, 4);
        let y: Vec<i64> = (0..15).map(|_| rng.gen_range(0..6)).collect();
        let q = random_features(&mut rng, 5, 4);
        let scaled = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect()
        };
        let a = adaptor_fit(&spec(AdaptorStrategy::Knn, 5), &labeled(&x, &y), &task(1)).unwrap();
        let b = adaptor_fit(&spec(AdaptorStrategy::Knn, 5), &labeled(&scaled(&x), &y), &task(1)).unwrap();
        for (r1, r2) in eval(&q).iter().zip(eval(&scaled(&q)).iter()) {
            prop_assert_eq!(a.neighbors(r1).unwrap(), b.neighbors(r2).unwrap());
        }
        prop_assert_eq!(
            adaptor_predict(&a, &eval(&q), &task(1)).unwrap(),
            adaptor_predict(&b, &eval(&scaled(&q)), &task(1)).unwrap()
        );
    }

    #[test]
    fn predictions_do_not_depend_on_other_eval_cases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_features(&mut rng, 12, 3);
        let y: Vec<i64> = (0..12).map(|_| rng.gen_range(0..2)).collect();
        let q = random_features(&mut rng, 6, 3);
        for strategy in [AdaptorStrategy::Knn, AdaptorStrategy::NearestCentroid, AdaptorStrategy::LinearProbe] {
            let fitted = adaptor_fit(&spec(strategy, 3), &labeled(&x, &y), &task(2)).unwrap();
            let all = adaptor_predict(&fitted, &eval(&q), &task(2)).unwrap();
            let mut reversed_reps = eval(&q);
            reversed_reps.reverse();
            let mut reversed = adaptor_predict(&fitted, &reversed_reps, &task(2)).unwrap();
            reversed.reverse();
            prop_assert_eq!(&all, &reversed);
            let single = adaptor_predict(&fitted, &eval(&q)[2..3], &task(2)).unwrap();
            prop_assert_eq!(&single[0], &all[2]);
        }
    }
}
