use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use refractory::classify::{fit_classifier, ClassifierMethod, ClassifierSpec};
use refractory::cluster::{fit_clusters, ClusterConfig, ClusterMethod};
use refractory::data::{generated_code, GeneratorConfig};
use refractory::eval::{adjusted_mutual_info, adjusted_rand, roc_auc, stratified_folds};
use refractory::pipeline::synthetic_dataset;

fn labeling(max_label: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..40).prop_flat_map(move |n| {
        (
            prop::collection::vec(0..max_label, n),
            prop::collection::vec(0..max_label, n),
        )
    })
}

fn blobs(seed: u64, per: usize, centers: &[[f64; 2]]) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = per * centers.len();
    let mut x = Array2::zeros((n, 2));
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % centers.len();
        for j in 0..2 {
            x[[i, j]] = centers[c][j] + 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        truth.push(c);
    }
    (x, truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_symmetric_and_relabel_invariant((a, b) in labeling(4), shift in 1usize..5) {
        let ab = adjusted_rand(&a, &b).unwrap();
        prop_assert!((ab - adjusted_rand(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        let relabeled: Vec<usize> = a.iter().map(|l| (l + shift) * 3).collect();
        prop_assert!((ab - adjusted_rand(&relabeled, &b).unwrap()).abs() < 1e-12);
        let mi = adjusted_mutual_info(&a, &b).unwrap();
        prop_assert!((mi - adjusted_mutual_info(&b, &a).unwrap()).abs() < 1e-10);
        prop_assert!((mi - adjusted_mutual_info(&relabeled, &b).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn auc_of_negated_scores_complements(n in 2usize..60, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let total = roc_auc(&scores, &labels).unwrap() + roc_auc(&neg, &labels).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn folds_partition_and_stratify(n_case in 7usize..40, n_control in 7usize..40, k in 2usize..8, seed in any::<u64>()) {
        let y: Vec<bool> = (0..n_case + n_control).map(|i| i < n_case).collect();
        let folds = stratified_folds(&y, k, seed).unwrap();
        prop_assert_eq!(folds.len(), y.len());
        prop_assert!(folds.iter().all(|&f| f < k));
        for class in [true, false] {
            let counts: Vec<usize> = (0..k)
                .map(|f| (0..y.len()).filter(|&i| folds[i] == f && y[i] == class).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
        prop_assert_eq!(folds.clone(), stratified_folds(&y, k, seed).unwrap());
    }

    #[test]
    fn kmeans_inertia_never_rises(seed in any::<u64>(), n in 5usize..60, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let mut cfg = ClusterConfig::new(ClusterMethod::Kmeans);
        cfg.n_clusters = k.min(n);
        cfg.restarts = 1;
        cfg.seed = seed;
        let a = fit_clusters(&cfg, &x).unwrap();
        prop_assert!(a.trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(a.objective <= a.trace[0] + 1e-9);
        prop_assert!(a.labels.iter().all(|&l| l < cfg.n_clusters));
    }

    #[test]
    fn gmm_likelihood_never_falls(seed in any::<u64>(), n in 10usize..60, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let mut cfg = ClusterConfig::new(ClusterMethod::Gmm);
        cfg.n_clusters = k;
        cfg.seed = seed;
        let a = fit_clusters(&cfg, &x).unwrap();
        prop_assert!(a.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{:?}", a.trace);
    }

    #[test]
    fn duplicate_rows_share_labels(seed in any::<u64>(), n in 4usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let x = ndarray::concatenate(Axis(0), &[base.view(), base.view()]).unwrap();
        for method in [ClusterMethod::Kmeans, ClusterMethod::Agglomerative] {
            let mut cfg = ClusterConfig::new(method);
            cfg.n_clusters = 3;
            cfg.seed = seed;
            let a = fit_clusters(&cfg, &x).unwrap();
            for i in 0..n {
                prop_assert_eq!(a.labels[i], a.labels[i + n]);
            }
        }
    }

    #[test]
    fn tree_accuracy_monotone_in_depth(seed in any::<u64>(), n in 10usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        y[0] = true;
        y[1] = false;
        let mut last = 0.0;
        for depth in 0..6 {
            let mut spec = ClassifierSpec::new(ClassifierMethod::Tree);
            spec.max_depth = depth;
            let m = fit_classifier(&spec, &x, &y).unwrap();
            prop_assert!(m.tree().unwrap().depth() <= depth);
            let p = m.predict(&x).unwrap();
            let acc = p.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / n as f64;
            prop_assert!(acc >= last);
            last = acc;
        }
    }

    #[test]
    fn logreg_converges_to_small_gradient(seed in any::<u64>(), n in 10usize..80, d in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        let mut y: Vec<bool> = (0..n).map(|i| x[[i, 0]] + rng.sample::<f64, _>(StandardNormal) > 0.0).collect();
        y[0] = true;
        y[1] = false;
        let m = fit_classifier(&ClassifierSpec::new(ClassifierMethod::Logreg), &x, &y).unwrap();
        prop_assert!(m.logreg().unwrap().gradient_norm <= 1e-5);
    }

    #[test]
    fn gbdt_first_stage_strictly_improves(seed in any::<u64>(), n in 10usize..60, depth in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        y[0] = true;
        y[1] = false;
        let mut spec = ClassifierSpec::new(ClassifierMethod::Gbdt);
        spec.max_depth = depth;
        spec.n_stages = 5;
        let m = fit_classifier(&spec, &x, &y).unwrap();
        let trace = &m.gbdt().unwrap().deviance_trace;
        prop_assert!(trace[1] < trace[0]);
        for p in m.predict_proba(&x).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn clusterings_invariant_to_row_order() {
    let (x, _) = blobs(1, 15, &[[0.0, 0.0], [12.0, 0.0], [0.0, 12.0]]);
    let n = x.nrows();
    let perm: Vec<usize> = (0..n).map(|i| (i * 17 + 5) % n).collect();
    let xp = x.select(Axis(0), &perm);
    for method in ClusterMethod::ALL {
        let mut cfg = ClusterConfig::new(method);
        cfg.n_clusters = 3;
        let a = fit_clusters(&cfg, &x).unwrap();
        let b = fit_clusters(&cfg, &xp).unwrap();
        let a_perm: Vec<usize> = perm.iter().map(|&i| a.labels[i]).collect();
        assert_eq!(adjusted_rand(&a_perm, &b.labels).unwrap(), 1.0, "{method}");
    }
}

#[test]
fn random_labelings_score_near_zero() {
    let mut total = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<usize> = (0..200).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<usize> = (0..200).map(|_| rng.random_range(0..2)).collect();
        total += adjusted_rand(&a, &b).unwrap();
    }
    assert!((total / 100.0).abs() <= 0.05);
}

#[test]
fn importance_concentrates_on_signal_codes() {
    for seed in 0..10u64 {
        let cfg = GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        };
        let ds = synthetic_dataset(&cfg).unwrap();
        let mut spec = ClassifierSpec::new(ClassifierMethod::Gbdt);
        spec.n_stages = 10;
        spec.max_depth = 3;
        let model = fit_classifier(&spec, &ds.x, &ds.y).unwrap();
        let weights = model.feature_importance().unwrap().weights;
        let names = ds.features.vocabulary().names();
        let signal: Vec<String> = (0..cfg.n_signal_codes)
            .map(|j| {
                let (kind, code) = generated_code(j, cfg.n_signal_codes);
                format!("{kind}:{code}")
            })
            .collect();
        let mass = |pick: &dyn Fn(&str) -> bool| -> f64 {
            names.iter().zip(&weights).filter(|(n, _)| pick(n)).map(|(_, w)| w).sum()
        };
        let signal_mass = mass(&|n| signal.iter().any(|s| s == n));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let others: Vec<&String> = names.iter().filter(|n| !signal.contains(n)).collect();
        let chosen: Vec<&String> = rand::seq::index::sample(&mut rng, others.len(), signal.len())
            .into_iter()
            .map(|i| others[i])
            .collect();
        let random_mass = mass(&|n| chosen.iter().any(|c| c.as_str() == n));
        assert!(signal_mass > random_mass, "seed {seed}: {signal_mass} vs {random_mass}");
    }
}
