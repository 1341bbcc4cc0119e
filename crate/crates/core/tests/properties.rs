use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use upliftrank::baselines::{fit_baseline, fit_flipped_label, BaselineKind};
use upliftrank::data::{split_train_test, Category, UpliftInstance};
use upliftrank::eval::{auuc, paired_t_test, ValueFunctionSpec};
use upliftrank::experiment::{run_on_dataset, ExperimentConfig};
use upliftrank::gbrt::GbrtConfig;
use upliftrank::lambdamart::{train, LambdaConfig};
use upliftrank::simulation::{simulate, Scenario};
use upliftrank::{Partition, RankMetric, RankedDataset, RelevanceScheme, UpliftDataset};

fn quick(n_trees: usize) -> GbrtConfig {
    GbrtConfig {
        n_trees,
        learning_rate: 0.1,
        ..GbrtConfig::default()
    }
}

fn ideal_scores(ds: &UpliftDataset) -> Vec<f64> {
    ds.instances()
        .iter()
        .map(|i| match i.category() {
            Category::TR => 3.0,
            Category::CNR => 2.0,
            Category::TNR => 1.0,
            Category::CR => 0.0,
        })
        .collect()
}

fn joint_auuc(ds: &UpliftDataset, scores: Vec<f64>) -> f64 {
    let ranked = RankedDataset::new(ds, scores, Partition::Joint).unwrap();
    auuc(&ranked, ValueFunctionSpec::UPLIFT_JOINT_RELATIVE).unwrap().auuc
}

#[test]
fn training_never_ends_below_its_first_round() {
    let config = LambdaConfig {
        metric: RankMetric::Pcg,
        gbrt: GbrtConfig {
            n_trees: 500,
            learning_rate: 0.01,
            ..GbrtConfig::default()
        },
        ..LambdaConfig::default()
    };
    for seed in 0..10 {
        for scenario in Scenario::ALL {
            let sim = simulate(&scenario.spec(100, seed)).unwrap();
            let ds = &sim.dataset;
            let trained = train(ds, RelevanceScheme::Rel, Partition::Joint, &config).unwrap();
            let rows = ds.features();
            let first = joint_auuc(ds, trained.ensemble.predict_with_trees(&rows, 1).unwrap());
            let last = joint_auuc(ds, trained.ensemble.predict(&rows).unwrap());
            assert!(last >= first, "{scenario} seed {seed}: {last} < {first}");
        }
    }
}

#[test]
fn monotone_score_transform_keeps_auuc() {
    let sim = simulate(&Scenario::Balanced.spec(300, 2)).unwrap();
    let transformed: Vec<f64> = sim.scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
    for spec in ValueFunctionSpec::ALL {
        let a = auuc(&RankedDataset::new(&sim.dataset, sim.scores.clone(), spec.rank_mode()).unwrap(), spec).unwrap();
        let b = auuc(&RankedDataset::new(&sim.dataset, transformed.clone(), spec.rank_mode()).unwrap(), spec).unwrap();
        assert_eq!(a.auuc, b.auuc, "{spec}");
    }
}

#[test]
fn pcg_optimal_ordering_is_auuc_optimal_on_small_sets() {
    // The category ordering TR, zeros, CR maximises both objectives.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let n = rng.gen_range(2..=8);
        let mut inst: Vec<UpliftInstance> = (0..n)
            .map(|_| UpliftInstance::new(vec![], rng.gen_bool(0.5), rng.gen_bool(0.5)))
            .collect();
        inst[0].treated = true;
        inst[1].treated = false;
        let ds = UpliftDataset::new(inst).unwrap();
        let best = joint_auuc(&ds, ideal_scores(&ds));
        for _ in 0..20 {
            let random: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            assert!(joint_auuc(&ds, random) <= best + 1e-12);
        }
    }
}

#[test]
fn flipped_label_approaches_ideal_when_features_reveal_category() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inst: Vec<UpliftInstance> = (0..400)
        .map(|_| {
            let t = rng.gen_bool(0.5);
            let y = rng.gen_bool(0.3);
            let c = Category::of(y, t).index() as f64;
            UpliftInstance::new(vec![c, rng.gen()], y, t)
        })
        .collect();
    let ds = UpliftDataset::new(inst).unwrap();
    let scores = fit_flipped_label(&ds, &quick(50)).unwrap().score(&ds).unwrap();
    let (mut good, mut bad) = (0.0, 0.0);
    let (mut n_good, mut n_bad) = (0.0, 0.0);
    for (i, s) in ds.instances().iter().zip(&scores) {
        if matches!(i.category(), Category::TR | Category::CNR) {
            good += s;
            n_good += 1.0;
        } else {
            bad += s;
            n_bad += 1.0;
        }
    }
    assert!(good / n_good > bad / n_bad);
    let sep = |s: Vec<f64>| {
        let r = RankedDataset::new(&ds, s, Partition::Separate).unwrap();
        auuc(&r, ValueFunctionSpec::UPLIFT_SEPARATE_RELATIVE).unwrap().auuc
    };
    let ideal = sep(ideal_scores(&ds));
    let got = sep(scores);
    assert!((ideal - got).abs() < 0.02, "{got} vs ideal {ideal}");
}

#[test]
fn group_models_ignore_training_row_order() {
    let sim = simulate(&Scenario::Balanced.spec(150, 4)).unwrap();
    let mut rows = sim.dataset.instances().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in (1..rows.len()).rev() {
        rows.swap(i, rng.gen_range(0..=i));
    }
    let shuffled = UpliftDataset::new(rows).unwrap();
    for kind in [BaselineKind::TwoModel, BaselineKind::DummyTreatment] {
        let a = fit_baseline(kind, &sim.dataset, &quick(20)).unwrap().score(&sim.dataset).unwrap();
        let b = fit_baseline(kind, &shuffled, &quick(20)).unwrap().score(&sim.dataset).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{kind:?}");
        }
    }
}

#[test]
fn t_test_is_symmetric_in_p() {
    let a = [0.031, 0.029, 0.034, 0.030, 0.027];
    let b = [0.028, 0.030, 0.029, 0.026, 0.027];
    let ab = paired_t_test(&a, &b, 0.05).unwrap();
    let ba = paired_t_test(&b, &a, 0.05).unwrap();
    assert_eq!(ab.p_value, ba.p_value);
    assert_eq!(ab.statistic, -ba.statistic);
}

#[test]
fn simulated_experiment_stays_under_ideal_bound() {
    let config = ExperimentConfig::from_json(
        r#"{
            "data": {"source": "simulated", "scenario": "balanced", "base_n": 600, "seed": 3},
            "models": [
                {"name": "flipped", "kind": "flipped-label"},
                {"name": "pcg", "kind": "lambdamart", "metric": "pcg", "relevance": "rel", "setting": "joint"}
            ],
            "repeats": 3,
            "reference": "flipped",
            "gbrt": {"n_trees": 60, "learning_rate": 0.1}
        }"#,
    )
    .unwrap();
    let data = simulate(&Scenario::Balanced.spec(600, 3)).unwrap().dataset;
    let report = run_on_dataset(&config, &data).unwrap();
    for spec in [ValueFunctionSpec::UPLIFT_SEPARATE_RELATIVE, ValueFunctionSpec::UPLIFT_JOINT_RELATIVE] {
        let ideal: f64 = (0..3)
            .map(|r| {
                let (_, test) = split_train_test(&data, 0.5, r).unwrap();
                let ranked = RankedDataset::new(&test, ideal_scores(&test), spec.rank_mode()).unwrap();
                auuc(&ranked, spec).unwrap().auuc
            })
            .sum::<f64>()
            / 3.0;
        for model in ["flipped", "pcg"] {
            let mean = report.row(model, spec).unwrap().mean.unwrap();
            assert!(mean > 0.0 && mean <= ideal, "{model} {spec}: {mean} vs ideal {ideal}");
        }
    }
}

#[test]
fn cutoff_one_matches_full_auuc_in_report() {
    let config = ExperimentConfig::from_json(
        r#"{
            "data": {"source": "simulated", "scenario": "control-heavy", "base_n": 200},
            "models": [{"name": "two", "kind": "two-model"}],
            "specs": ["qini-joint-absolute", "uplift-separate-absolute", "uplift-joint-relative"],
            "cutoffs": [0.5, 1.0],
            "repeats": 2,
            "gbrt": {"n_trees": 10, "learning_rate": 0.1}
        }"#,
    )
    .unwrap();
    let data = simulate(&Scenario::ControlHeavy.spec(200, 0)).unwrap().dataset;
    let report = run_on_dataset(&config, &data).unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        assert_eq!(row.cutoffs[1].mean, row.mean.unwrap());
    }
}
