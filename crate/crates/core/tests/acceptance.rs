//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see the lines for passing
//! tests).
//!
//! Data-dependent criteria read MNIST (and USPS, when present) from the
//! directory named by `TOPOCLASS_DATA`, defaulting to `data/` at the
//! workspace root; see the README for how to fetch the files. Tests share
//! a lock so timing-sensitive measurements never overlap heavy compute.

use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use topoclass_core::cubical::build_complex;
use topoclass_core::harness::{
    run_experiment, ExperimentConfig, ExperimentData, FoldReport, Variant,
};
use topoclass_core::imageio::{load_idx, GrayImage, LabeledImageSet};
use topoclass_core::landscape::{
    featurize_batch, landscape, landscape_gradient, triangle_transform, LandscapeFeature,
    LandscapeParams,
};
use topoclass_core::neuralnet::{
    batch_gradients, batch_loss, init_model, train, ModelParams, ModelSpec, TrainConfig, TrainSet,
};
use topoclass_core::persistence::{betti_curve, betti_oracle, compute_diagram, PersistencePoint};
use topoclass_core::rng::SplitMix64;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    // keep draining the suite even if an earlier criterion failed
    SERIAL
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn data_dir() -> PathBuf {
    match std::env::var_os("TOPOCLASS_DATA") {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

struct Dataset {
    train: LabeledImageSet,
    test: LabeledImageSet,
}

fn load_split(name: &str) -> Result<Dataset, String> {
    let dir = data_dir().join(name);
    let exists = dir.join("train-images-idx3-ubyte").is_file();
    if !exists {
        return Err(format!(
            "dataset not found at {} (see the README's data section)",
            dir.display()
        ));
    }
    let load = |images: &str, labels: &str| {
        load_idx(&dir.join(images), &dir.join(labels)).map_err(|e| e.to_string())
    };
    Ok(Dataset {
        train: load("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?,
        test: load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?,
    })
}

fn mnist() -> &'static Dataset {
    static MNIST: OnceLock<Dataset> = OnceLock::new();
    MNIST.get_or_init(|| match load_split("mnist") {
        Ok(d) => d,
        Err(e) => panic!("MNIST unavailable: {e}; run scripts/fetch-mnist.sh"),
    })
}

fn mnist_params() -> LandscapeParams {
    LandscapeParams::over_unit_range(3, 50).unwrap()
}

/// Landscape features of the full MNIST test split, shared by the paired
/// experiment criteria.
fn mnist_test_features() -> &'static [LandscapeFeature] {
    static FEATURES: OnceLock<Vec<LandscapeFeature>> = OnceLock::new();
    FEATURES.get_or_init(|| featurize_batch(mnist().test.images(), &mnist_params(), 2))
}

struct PairedRuns {
    baseline: FoldReport,
    topo: FoldReport,
    ensemble: FoldReport,
}

/// The shared n=100, 10-fold paired experiment on MNIST: a pixel-only
/// baseline, its jointly trained topological counterpart, and the
/// softmax-sum ensemble, all from one base seed so folds are paired.
fn paired_runs() -> &'static PairedRuns {
    static RUNS: OnceLock<PairedRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let data = ExperimentData {
            train: &mnist().train,
            test: &mnist().test,
            test_features: Some(mnist_test_features()),
        };
        let config = |variant| ExperimentConfig {
            landscape: mnist_params(),
            sizes: vec![100],
            folds: 10,
            variant,
            train: TrainConfig::adam(1e-3, 32, 60, 0),
            base_seed: 17,
            workers: 2,
            out_dir: None,
        };
        let run = |variant| {
            run_experiment(&data, &config(variant))
                .expect("experiment runs")
                .remove(0)
        };
        PairedRuns {
            baseline: run(Variant::Baseline),
            topo: run(Variant::Topo),
            ensemble: run(Variant::Ensemble),
        }
    })
}

fn random_image(h: usize, w: usize, rng: &mut SplitMix64) -> GrayImage {
    let px = (0..h * w)
        .map(|_| rng.next_below(256) as f64 / 255.0)
        .collect();
    GrayImage::new(h, w, px).unwrap()
}

#[test]
fn c1_oracle_equivalence() {
    let _guard = serial();
    let start = Instant::now();
    let thresholds: Vec<f64> = (0..33).map(|i| i as f64 / 32.0).collect();
    let mut rng = SplitMix64::new(0xC1);
    let mut checked = 0usize;
    for _ in 0..200 {
        let img = random_image(12, 12, &mut rng);
        let diagram = compute_diagram(&build_complex(&img));
        let curve0 = betti_curve(&diagram, 0, &thresholds).unwrap();
        let curve1 = betti_curve(&diagram, 1, &thresholds).unwrap();
        for (i, &t) in thresholds.iter().enumerate() {
            let (b0, b1) = betti_oracle(&img, t).unwrap();
            assert_eq!(
                (curve0[i], curve1[i]),
                (b0, b1),
                "ACCEPTANCE C1 (oracle equivalence): FAIL at threshold {t}"
            );
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "ACCEPTANCE C1 (oracle equivalence): FAIL, took {elapsed:.1?} (budget 30s)"
    );
    println!(
        "ACCEPTANCE C1 (oracle equivalence): PASS — {checked} image/threshold pairs matched exactly in {elapsed:.2?}"
    );
}

#[test]
fn c2_digit_topology_ground_truth() {
    let _guard = serial();
    let per_class = 500usize;
    let train = &mnist().train;
    let mut counts: Vec<Vec<usize>> = vec![Vec::new(); 10];
    for (img, &label) in train.images().iter().zip(train.labels()) {
        if counts[label].len() < per_class {
            let d = compute_diagram(&build_complex(img));
            counts[label].push(d.d1.iter().filter(|p| p.persistence() > 0.3).count());
        }
        if counts.iter().all(|c| c.len() >= per_class) {
            break;
        }
    }
    let rate = |class: usize, holes: usize| {
        counts[class].iter().filter(|&&c| c == holes).count() as f64 / per_class as f64
    };
    let (eight_two, zero_one, one_none) = (rate(8, 2), rate(0, 1), rate(1, 0));
    assert!(
        eight_two >= 0.60,
        "ACCEPTANCE C2 (digit topology): FAIL, class 8 two-hole rate {eight_two:.3} < 0.60"
    );
    assert!(
        zero_one >= 0.60,
        "ACCEPTANCE C2 (digit topology): FAIL, class 0 one-hole rate {zero_one:.3} < 0.60"
    );
    assert!(
        one_none >= 0.80,
        "ACCEPTANCE C2 (digit topology): FAIL, class 1 no-hole rate {one_none:.3} < 0.80"
    );
    println!(
        "ACCEPTANCE C2 (digit topology): PASS — class 8 two holes {eight_two:.3}, class 0 one hole {zero_one:.3}, class 1 no holes {one_none:.3} over {per_class}/class"
    );
}

fn random_points(rng: &mut SplitMix64, max_points: usize) -> Vec<PersistencePoint> {
    let n = rng.next_below(max_points as u64 + 1) as usize;
    (0..n)
        .map(|_| {
            let a = rng.next_f64();
            let b = rng.next_f64();
            PersistencePoint {
                birth: a.min(b),
                death: a.max(b),
                dim: 0,
                essential: false,
            }
        })
        .collect()
}

#[test]
fn c3_landscape_property_suite() {
    let _guard = serial();
    let cases = 1000usize;
    let mut rng = SplitMix64::new(0xC3);

    // order and non-negativity
    for _ in 0..cases {
        let k = 1 + rng.next_below(4) as usize;
        let q = 2 + rng.next_below(19) as usize;
        let params = LandscapeParams::over_unit_range(k, q).unwrap();
        let points = random_points(&mut rng, 8);
        let out = landscape(&points, &params);
        for n in 0..q {
            for l in 0..k {
                let v = out[l * q + n];
                assert!(
                    v >= 0.0,
                    "ACCEPTANCE C3 (landscape properties): FAIL, negative value"
                );
                if l + 1 < k {
                    assert!(
                        v >= out[(l + 1) * q + n],
                        "ACCEPTANCE C3 (landscape properties): FAIL, order violated"
                    );
                }
            }
        }
    }

    // 1-Lipschitz across adjacent bins
    for _ in 0..cases {
        let k = 1 + rng.next_below(3) as usize;
        let q = 2 + rng.next_below(19) as usize;
        let params = LandscapeParams::over_unit_range(k, q).unwrap();
        let points = random_points(&mut rng, 8);
        let out = landscape(&points, &params);
        let step = 1.0 / (q - 1) as f64;
        for l in 0..k {
            for n in 0..q - 1 {
                assert!(
                    (out[l * q + n + 1] - out[l * q + n]).abs() <= step + 1e-12,
                    "ACCEPTANCE C3 (landscape properties): FAIL, Lipschitz violated"
                );
            }
        }
    }

    // permutation invariance
    for _ in 0..cases {
        let params = LandscapeParams::over_unit_range(2, 9).unwrap();
        let mut points = random_points(&mut rng, 8);
        let out = landscape(&points, &params);
        // deterministic shuffle of the multiset
        for i in (1..points.len()).rev() {
            let j = rng.next_below(i as u64 + 1) as usize;
            points.swap(i, j);
        }
        assert_eq!(
            landscape(&points, &params),
            out,
            "ACCEPTANCE C3 (landscape properties): FAIL, permutation changed output"
        );
    }

    // brute-force equivalence for small multisets
    for _ in 0..cases {
        let k = 1 + rng.next_below(3) as usize;
        let q = 2 + rng.next_below(7) as usize;
        let params = LandscapeParams::over_unit_range(k, q).unwrap();
        let points = random_points(&mut rng, 6);
        let got = landscape(&points, &params);
        for n in 0..q {
            let t = params.bin(n);
            let mut vals: Vec<f64> = points.iter().map(|p| triangle_transform(p, t)).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            for l in 0..k {
                let expected = vals.get(l).copied().unwrap_or(0.0);
                assert_eq!(
                    got[l * q + n],
                    expected,
                    "ACCEPTANCE C3 (landscape properties): FAIL, brute force disagrees"
                );
            }
        }
    }

    println!(
        "ACCEPTANCE C3 (landscape properties): PASS — 4 x {cases} randomized cases, zero failures"
    );
}

/// Signs of every ReLU input under a train-mode forward pass, recomputed
/// through the public layer API. Central differences are only valid where
/// no ReLU input changes sign between the two perturbed evaluations; the
/// gradient suite uses this to recognize (and exclude) kink crossings.
fn relu_sign_pattern(model: &ModelParams, data: &TrainSet) -> Vec<bool> {
    let mut pattern = Vec::new();
    if let Some(ls) = &model.landscape {
        let features = data.features.as_ref().unwrap();
        let v0s: Vec<Vec<f64>> = features.iter().map(|f| f.v0.clone()).collect();
        let v1s: Vec<Vec<f64>> = features.iter().map(|f| f.v1.clone()).collect();
        let (b0, _) = ls.bn0.forward_train(&ls.linear0.forward_batch(&v0s));
        let (b1, _) = ls.bn1.forward_train(&ls.linear1.forward_batch(&v1s));
        pattern.extend(b0.iter().flatten().map(|&v| v > 0.0));
        pattern.extend(b1.iter().flatten().map(|&v| v > 0.0));
    }
    if let Some(px) = &model.pixel {
        let za = px.linear_a.forward_batch(data.pixels.as_ref().unwrap());
        pattern.extend(za.iter().flatten().map(|&v| v > 0.0));
        let ha: Vec<Vec<f64>> = za
            .iter()
            .map(|row| row.iter().map(|&v| v.max(0.0)).collect())
            .collect();
        let zb = px.linear_b.forward_batch(&ha);
        pattern.extend(zb.iter().flatten().map(|&v| v > 0.0));
    }
    pattern
}

#[test]
fn c4_gradient_suite() {
    let _guard = serial();
    let configs = 50usize;
    let mut kink_crossings = 0usize;

    // network gradients: every parameter of a joint model vs central
    // finite differences on a 4-sample batch
    let mut rng = SplitMix64::new(0xC4);
    for config_idx in 0..configs {
        let in0 = 3 + rng.next_below(5) as usize;
        let in1 = 3 + rng.next_below(5) as usize;
        let px = 5 + rng.next_below(6) as usize;
        let classes = 2 + rng.next_below(3) as usize;
        let spec = ModelSpec {
            class_count: classes,
            landscape_input: Some((in0, in1)),
            pixel_input: Some(px),
        };
        let mut model = init_model(&spec, rng.next_u64()).unwrap();
        let n = 4usize;
        let data = TrainSet {
            features: Some(
                (0..n)
                    .map(|_| LandscapeFeature {
                        v0: (0..in0).map(|_| rng.next_f64()).collect(),
                        v1: (0..in1).map(|_| rng.next_f64()).collect(),
                    })
                    .collect(),
            ),
            pixels: Some(
                (0..n)
                    .map(|_| (0..px).map(|_| rng.next_f64()).collect())
                    .collect(),
            ),
            labels: (0..n).map(|i| i % classes).collect(),
        };
        let indices: Vec<usize> = (0..n).collect();
        let (_, grads) = batch_gradients(&model, &data, &indices).unwrap();
        let grad_tensors: Vec<Vec<f64>> = grads.tensors().into_iter().cloned().collect();
        let base_pattern = relu_sign_pattern(&model, &data);
        let h = 1e-5;
        for (ti, grad) in grad_tensors.iter().enumerate() {
            for (wi, &an) in grad.iter().enumerate() {
                let original = model.param_tensors_mut()[ti][wi];
                model.param_tensors_mut()[ti][wi] = original + h;
                let plus = batch_loss(&model, &data, &indices).unwrap();
                model.param_tensors_mut()[ti][wi] = original - h;
                let minus = batch_loss(&model, &data, &indices).unwrap();
                model.param_tensors_mut()[ti][wi] = original;
                let fd = (plus - minus) / (2.0 * h);
                let scale = an.abs().max(fd.abs()).max(1e-6);
                if (an - fd).abs() < 1e-8 || (an - fd).abs() / scale < 1e-4 {
                    continue;
                }
                // the difference quotient is meaningless if the
                // perturbation stepped across a ReLU kink; recheck the
                // sign patterns only in this rare case
                model.param_tensors_mut()[ti][wi] = original + h;
                let pattern_plus = relu_sign_pattern(&model, &data);
                model.param_tensors_mut()[ti][wi] = original - h;
                let pattern_minus = relu_sign_pattern(&model, &data);
                model.param_tensors_mut()[ti][wi] = original;
                if pattern_plus != base_pattern || pattern_minus != base_pattern {
                    kink_crossings += 1;
                    continue;
                }
                panic!(
                    "ACCEPTANCE C4 (gradients): FAIL, network config {config_idx} tensor {ti} weight {wi}: analytic {an} vs fd {fd}"
                );
            }
        }
    }
    assert!(
        kink_crossings < 100,
        "ACCEPTANCE C4 (gradients): FAIL, {kink_crossings} kink crossings is far more than perturbation geometry explains"
    );

    // landscape gradients at non-degenerate configurations
    let mut rng = SplitMix64::new(0xC4C4);
    let mut checked = 0usize;
    while checked < configs {
        let params = LandscapeParams::over_unit_range(2, 7).unwrap();
        let points = random_points(&mut rng, 5);
        if points.is_empty() {
            continue;
        }
        let degenerate = (0..params.q()).any(|n| {
            let t = params.bin(n);
            let mut vals: Vec<f64> = points.iter().map(|p| triangle_transform(p, t)).collect();
            let near_kink = points.iter().any(|p| {
                let x = (p.birth + p.death) / 2.0;
                let y = (p.death - p.birth) / 2.0;
                (t - x).abs() < 1e-4 || ((t - x).abs() - y).abs() < 1e-4
            });
            vals.sort_by(|a, b| b.total_cmp(a));
            let near_tie = vals
                .windows(2)
                .any(|w| w[0] > 0.0 && (w[0] - w[1]).abs() < 1e-4);
            near_kink || near_tie
        });
        if degenerate {
            continue;
        }
        let upstream: Vec<f64> = (0..params.len()).map(|_| rng.next_f64() - 0.5).collect();
        let analytic = landscape_gradient(&points, &params, &upstream);
        let objective = |pts: &[PersistencePoint]| -> f64 {
            landscape(pts, &params)
                .iter()
                .zip(&upstream)
                .map(|(v, u)| v * u)
                .sum()
        };
        let h = 1e-6;
        for (i, g) in analytic.iter().enumerate() {
            for (coord, an) in [(0usize, g.0), (1, g.1)] {
                let mut plus = points.clone();
                let mut minus = points.clone();
                if coord == 0 {
                    plus[i].birth += h;
                    minus[i].birth -= h;
                } else {
                    plus[i].death += h;
                    minus[i].death -= h;
                }
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let scale = an.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (an - fd).abs() < 1e-9 || (an - fd).abs() / scale < 1e-6,
                    "ACCEPTANCE C4 (gradients): FAIL, landscape config {checked} point {i}: analytic {an} vs fd {fd}"
                );
            }
        }
        checked += 1;
    }

    println!(
        "ACCEPTANCE C4 (gradients): PASS — {configs} network configs (every parameter, rel err < 1e-4; {kink_crossings} ReLU kink crossings excluded) and {configs} landscape configs (rel err < 1e-6)"
    );
}

#[test]
fn c5_landscape_network_usps_accuracy() {
    let _guard = serial();
    let usps = match load_split("usps") {
        Ok(d) => d,
        Err(e) => panic!(
            "ACCEPTANCE C5 (landscape network on USPS): FAIL — {e}; convert the dataset with scripts/usps-to-idx.py"
        ),
    };
    let start = Instant::now();
    let params = LandscapeParams::over_unit_range(2, 50).unwrap();
    let train_features = featurize_batch(usps.train.images(), &params, 2);
    let test_features = featurize_batch(usps.test.images(), &params, 2);

    let spec = ModelSpec {
        class_count: usps.train.class_count(),
        landscape_input: Some((params.len(), params.len())),
        pixel_input: None,
    };
    let mut model = init_model(&spec, 17).unwrap();
    let data = TrainSet {
        features: Some(train_features),
        pixels: None,
        labels: usps.train.labels().to_vec(),
    };
    train(&mut model, &data, &TrainConfig::landscape_recipe(40, 17)).unwrap();

    let predictions =
        topoclass_core::neuralnet::predict(&model, Some(&test_features), None).unwrap();
    let correct = predictions
        .iter()
        .zip(usps.test.labels())
        .filter(|(p, l)| p == l)
        .count();
    let accuracy = correct as f64 / usps.test.len() as f64;
    assert!(
        (0.40..=0.60).contains(&accuracy),
        "ACCEPTANCE C5 (landscape network on USPS): FAIL, accuracy {accuracy:.4} outside [0.40, 0.60]"
    );
    println!(
        "ACCEPTANCE C5 (landscape network on USPS): PASS — accuracy {accuracy:.4} in [0.40, 0.60] ({:.1?})",
        start.elapsed()
    );
}

/// Auxiliary check, not a numbered criterion: the standalone
/// landscape-network recipe used by C5 reaches clearly non-trivial
/// accuracy when pointed at MNIST. Fully deterministic, so the measured
/// value is exactly reproducible.
#[test]
fn aux_landscape_recipe_is_nontrivial_on_mnist() {
    let _guard = serial();
    let train_sub = mnist().train.subsample(5000, 99).unwrap();
    let test_sub = mnist().test.subsample(4000, 98).unwrap();
    let params = mnist_params();
    let train_features = featurize_batch(train_sub.images(), &params, 2);
    let test_features = featurize_batch(test_sub.images(), &params, 2);
    let spec = ModelSpec {
        class_count: train_sub.class_count(),
        landscape_input: Some((params.len(), params.len())),
        pixel_input: None,
    };
    let mut model = init_model(&spec, 17).unwrap();
    let data = TrainSet {
        features: Some(train_features),
        pixels: None,
        labels: train_sub.labels().to_vec(),
    };
    train(&mut model, &data, &TrainConfig::landscape_recipe(40, 17)).unwrap();
    let predictions =
        topoclass_core::neuralnet::predict(&model, Some(&test_features), None).unwrap();
    let correct = predictions
        .iter()
        .zip(test_sub.labels())
        .filter(|(p, l)| p == l)
        .count();
    let accuracy = correct as f64 / test_sub.len() as f64;
    assert!(
        accuracy >= 0.30,
        "AUX (landscape recipe on MNIST): FAIL, accuracy {accuracy:.4} below 0.30"
    );
    println!(
        "AUX (landscape recipe on MNIST): PASS — standalone landscape network at {accuracy:.4}"
    );
}

#[test]
fn c6_small_sample_topo_trend() {
    let _guard = serial();
    let runs = paired_runs();
    assert_eq!(
        (runs.baseline.completed_folds, runs.topo.completed_folds),
        (10, 10),
        "ACCEPTANCE C6 (small-sample trend): FAIL, a fold did not complete"
    );
    let diffs: Vec<f64> = runs
        .topo
        .accuracies
        .iter()
        .zip(&runs.baseline.accuracies)
        .map(|(t, b)| t - b)
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(
        mean > 0.0,
        "ACCEPTANCE C6 (small-sample trend): FAIL, mean paired difference {:.4} pts not positive (per-fold {:?})",
        mean * 100.0,
        diffs
    );
    println!(
        "ACCEPTANCE C6 (small-sample trend): PASS — mean paired gain {:+.2} pts over 10 folds (baseline {:.4}, topo {:.4})",
        mean * 100.0,
        runs.baseline.mean_accuracy,
        runs.topo.mean_accuracy
    );
}

#[test]
fn c7_ensemble_never_harms() {
    let _guard = serial();
    let runs = paired_runs();
    assert_eq!(
        (runs.baseline.completed_folds, runs.ensemble.completed_folds),
        (10, 10),
        "ACCEPTANCE C7 (ensemble safety): FAIL, a fold did not complete"
    );
    let safe = runs
        .ensemble
        .accuracies
        .iter()
        .zip(&runs.baseline.accuracies)
        .filter(|(e, b)| **e >= **b - 0.005)
        .count();
    assert!(
        safe >= 9,
        "ACCEPTANCE C7 (ensemble safety): FAIL, only {safe}/10 folds within 0.5 pts of the backbone"
    );
    println!(
        "ACCEPTANCE C7 (ensemble safety): PASS — {safe}/10 folds at or above backbone - 0.5 pts (backbone {:.4}, ensemble {:.4})",
        runs.baseline.mean_accuracy,
        runs.ensemble.mean_accuracy
    );
}

/// Procedural two-class set for the determinism check.
fn synthetic_set(len: usize, seed: u64) -> LabeledImageSet {
    let mut rng = SplitMix64::new(seed);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..len {
        images.push(random_image(8, 8, &mut rng));
        labels.push(i % 3);
    }
    LabeledImageSet::new(images, labels, 3).unwrap()
}

#[test]
fn c8_experiment_determinism() {
    let _guard = serial();
    let train = synthetic_set(40, 1);
    let test = synthetic_set(24, 2);
    let data = ExperimentData {
        train: &train,
        test: &test,
        test_features: None,
    };
    let run = |dir: &std::path::Path| {
        let cfg = ExperimentConfig {
            landscape: LandscapeParams::over_unit_range(2, 8).unwrap(),
            sizes: vec![10, 16],
            folds: 2,
            variant: Variant::Topo,
            train: TrainConfig::adam(1e-3, 8, 3, 0),
            base_seed: 5,
            workers: 2,
            out_dir: Some(dir.to_path_buf()),
        };
        run_experiment(&data, &cfg).unwrap();
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run(dir_a.path());
    run(dir_b.path());
    let mut compared = 0usize;
    for name in [
        "report_topo_10.json",
        "report_topo_16.json",
        "folds_topo.csv",
    ] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(
            a, b,
            "ACCEPTANCE C8 (determinism): FAIL, {name} differs between identical runs"
        );
        compared += 1;
    }
    println!(
        "ACCEPTANCE C8 (determinism): PASS — {compared} report files byte-identical across reruns"
    );
}

#[test]
fn c9_featurize_performance() {
    let _guard = serial();
    let images = &mnist().train.images()[..1000];
    let params = mnist_params();

    // warm-up pass so allocator state is comparable
    let _ = featurize_batch(&images[..100], &params, 1);

    let best_of = |workers: usize| -> f64 {
        (0..2)
            .map(|_| {
                let t0 = Instant::now();
                let out = featurize_batch(images, &params, workers);
                assert_eq!(out.len(), 1000);
                t0.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };

    let serial_time = best_of(1);
    assert!(
        serial_time < 10.0,
        "ACCEPTANCE C9 (performance): FAIL, 1000 images took {serial_time:.2}s single-threaded (budget 10s)"
    );

    // "near-linear to 4 workers" pinned as 60% parallel efficiency
    // relative to the cores actually available (capped at 4)
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let parallel_time = best_of(4);
    let speedup = serial_time / parallel_time;
    let required = 0.6 * (cores.min(4) as f64);
    assert!(
        speedup >= required,
        "ACCEPTANCE C9 (performance): FAIL, speedup {speedup:.2} with 4 workers below {required:.2} ({cores} cores available)"
    );
    println!(
        "ACCEPTANCE C9 (performance): PASS — 1000 images in {serial_time:.2}s single-threaded; 4-worker speedup {speedup:.2} (required {required:.2} on {cores} cores)"
    );
}
