//! Property tests for the invariants of each module.

use std::collections::BTreeMap;

use cpshift::conformal::{
    aci_run, aps_set, calibrate_aps, calibrate_cqr, predict_interval_cqr, PredictionSet, ACI_ALPHA_MAX,
    ACI_ALPHA_MIN,
};
use cpshift::diagnostics::{concentration_index, find_protective_features, jaccard_stability, label_entropy};
use cpshift::harness::{run_schedules, run_seed_ensemble, Cadence};
use cpshift::importance::{importance_dynamics, ImportanceMethod, ImportanceProfile};
use cpshift::learner::{ModelSpec, ProbabilityMatrix};
use cpshift::stats::{correlation, permutation_p, wilcoxon_signed_rank, CorrelationKind, TestMethod};
use cpshift::tabular::{
    generate_scenario, CategoricalColumn, Column, ConcentrationMode, EntropyLevel, FeatureTable, PeriodLayout,
    ShiftScenario, TemporalSplit,
};
use cpshift::verdict::{decide_inputs, DecisionInputs, Status};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn prob_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn prob_matrix(k: usize, n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (
        prop::collection::vec(prob_row(k), n),
        prop::collection::vec(0..k, n),
    )
}

fn categorical(values: &[u8]) -> Column {
    Column::Categorical(CategoricalColumn::from_strings(values.iter().map(|v| format!("v{v}"))))
}

fn profile(values: &[f64]) -> ImportanceProfile {
    let map: BTreeMap<String, f64> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (format!("f{i}"), v))
        .collect();
    ImportanceProfile::new(ImportanceMethod::External, "val", 1, map).unwrap()
}

fn inputs(entropy: f64, top: f64, jac: f64, conc: f64, knife: bool) -> DecisionInputs {
    DecisionInputs {
        label_entropy_bits: entropy,
        top_class_share: top,
        mean_top5_jaccard: jac,
        concentration: conc,
        protective_features: Vec::new(),
        knife_edge: knife,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_every_row(ts in prop::collection::vec(0i64..12, 1..60), a in 0i64..12, w in 1i64..6) {
        let n = ts.len();
        let t = FeatureTable::new(
            vec![("y".into(), Column::Numeric(vec![0.0; n]))],
            "y",
            "ts",
            ts.clone(),
        )
        .unwrap();
        let split = TemporalSplit::new(a, a + w).unwrap();
        let [tr, va, te] = split.partition(&t);
        prop_assert_eq!(tr.len() + va.len() + te.len(), n);
        prop_assert!(tr.iter().all(|&r| ts[r] < a));
        prop_assert!(va.iter().all(|&r| ts[r] >= a && ts[r] < a + w));
        prop_assert!(te.iter().all(|&r| ts[r] >= a + w));
    }

    #[test]
    fn aps_sets_are_nested_and_non_empty(row in prob_row(6), t1 in 0.0f64..1.2, t2 in 0.0f64..1.2) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let small = aps_set(&row, lo);
        let large = aps_set(&row, hi);
        prop_assert!(!small.is_empty());
        prop_assert!(small.len() <= large.len());
        prop_assert_eq!(&large[..small.len()], &small[..]);
    }

    #[test]
    fn aps_threshold_grows_as_alpha_shrinks((rows, labels) in prob_matrix(4, 30), a in 0.01f64..0.5, b in 0.01f64..0.5) {
        let m = ProbabilityMatrix::from_rows(&rows).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let strict = calibrate_aps(&m, &labels, lo).unwrap();
        let loose = calibrate_aps(&m, &labels, hi).unwrap();
        prop_assert!(strict.threshold >= loose.threshold);
        prop_assert!(strict.q >= loose.q);
    }

    #[test]
    fn cqr_intervals_are_ordered(
        preds in prop::collection::vec((-10.0f64..10.0, 0.0f64..5.0), 5..40),
        ys in prop::collection::vec(-20.0f64..20.0, 40),
        alpha in 0.05f64..0.5,
    ) {
        let pairs: Vec<(f64, f64)> = preds.iter().map(|&(c, w)| (c - w, c + w)).collect();
        let ys = &ys[..pairs.len()];
        let cal = calibrate_cqr(&pairs, ys, alpha).unwrap();
        for &p in &pairs {
            match predict_interval_cqr(p, &cal).unwrap() {
                PredictionSet::Interval { lo, hi } => prop_assert!(lo <= hi),
                other => prop_assert!(false, "unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn aci_alpha_stays_in_bounds(
        (rows, labels) in prob_matrix(5, 60),
        alpha in 0.01f64..0.5,
        gamma in 0.0f64..2.0,
    ) {
        let m = ProbabilityMatrix::from_rows(&rows).unwrap();
        let cal = calibrate_aps(&m.select(&(0..30).collect::<Vec<_>>()), &labels[..30], alpha).unwrap();
        let stream = m.select(&(30..60).collect::<Vec<_>>());
        let out = aci_run(&stream, &labels[30..], alpha, gamma, &cal).unwrap();
        prop_assert_eq!(out.alpha_trace.len(), 30);
        prop_assert!(out.alpha_trace.iter().all(|a| (ACI_ALPHA_MIN..=ACI_ALPHA_MAX).contains(a)));
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(a in prop::collection::vec(0u8..10, 1..30), b in prop::collection::vec(0u8..10, 1..30)) {
        let (ca, cb) = (categorical(&a), categorical(&b));
        let ab = jaccard_stability(&ca, &cb).unwrap();
        prop_assert_eq!(ab, jaccard_stability(&cb, &ca).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn entropy_is_bounded(labels in prop::collection::vec(0u8..12, 1..80)) {
        let col = categorical(&labels);
        let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
        let h = label_entropy(&col).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (distinct as f64).log2() + 1e-12);
    }

    #[test]
    fn concentration_is_bounded_and_scale_free(v in prop::collection::vec(0.01f64..100.0, 1..12), s in 0.01f64..1000.0) {
        let c = concentration_index(&v).unwrap();
        let d = v.len() as f64;
        prop_assert!(c >= 1.0 / d - 1e-12 && c <= 1.0 + 1e-12);
        let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
        prop_assert!((concentration_index(&scaled).unwrap() - c).abs() < 1e-12);
    }

    #[test]
    fn protective_features_meet_thresholds(
        j in prop::collection::vec(0.0f64..1.0, 2..8),
        w in prop::collection::vec(0.01f64..1.0, 8),
    ) {
        let w = &w[..j.len()];
        let total: f64 = w.iter().sum();
        let names: Vec<String> = (0..j.len()).map(|i| format!("f{i}")).collect();
        let jm: BTreeMap<String, f64> = names.iter().cloned().zip(j.iter().copied()).collect();
        let sm: BTreeMap<String, f64> = names.iter().cloned().zip(w.iter().map(|x| x / total)).collect();
        let out = find_protective_features(&jm, &sm);
        for p in &out {
            prop_assert!(p.jaccard > 0.5 && p.share > 0.15);
        }
        prop_assert!(out.windows(2).all(|p| p[0].share >= p[1].share));
    }

    #[test]
    fn dynamics_of_identical_profiles_is_identity(v in prop::collection::vec(0.01f64..10.0, 1..10)) {
        let p = profile(&v);
        let report = importance_dynamics(&p, &p).unwrap();
        for row in &report.rows {
            prop_assert!((row.ratio - 1.0).abs() < 1e-12);
            prop_assert_eq!(row.rank_change, 0);
        }
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        x in prop::collection::vec(-5.0f64..5.0, 4..20),
        y in prop::collection::vec(-5.0f64..5.0, 20),
    ) {
        let y = &y[..x.len()];
        if let Ok(r) = correlation(CorrelationKind::Spearman, &x, y) {
            let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
            let r2 = correlation(CorrelationKind::Spearman, &tx, &ty).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn pearson_ignores_positive_affine_transforms(
        x in prop::collection::vec(-5.0f64..5.0, 3..20),
        y in prop::collection::vec(-5.0f64..5.0, 20),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
    ) {
        let y = &y[..x.len()];
        if let Ok(r) = correlation(CorrelationKind::Pearson, &x, y) {
            let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r2 = correlation(CorrelationKind::Pearson, &tx, y).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_permutation_p_is_seed_free(x in prop::collection::vec(0.0f64..1.0, 3..8), y in prop::collection::vec(0.0f64..1.0, 8), s1: u64, s2: u64) {
        let y = &y[..x.len()];
        if let Ok(p1) = permutation_p(&x, y, CorrelationKind::Spearman, 100, s1) {
            prop_assert_eq!(p1, permutation_p(&x, y, CorrelationKind::Spearman, 100, s2).unwrap());
        }
    }

    #[test]
    fn wilcoxon_statistic_is_bounded(d in prop::collection::vec(-3.0f64..3.0, 1..30)) {
        let a = vec![0.0; d.len()];
        if let Ok(r) = wilcoxon_signed_rank(&d, &a) {
            let n = r.n_effective as f64;
            prop_assert!(r.statistic >= 0.0 && r.statistic <= n * (n + 1.0) / 4.0);
            prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        }
    }

    #[test]
    fn verdict_is_monotone_in_concentration(
        entropy in 0.0f64..5.0,
        top in 0.0f64..1.0,
        jac in 0.0f64..1.0,
        c1 in 0.0f64..1.0,
        c2 in 0.0f64..1.0,
        knife: bool,
    ) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let v_lo = decide_inputs(&inputs(entropy, top, jac, lo, knife)).unwrap();
        let v_hi = decide_inputs(&inputs(entropy, top, jac, hi, knife)).unwrap();
        prop_assert!(!v_lo.triggered_rules.is_empty() && !v_hi.triggered_rules.is_empty());
        if !v_lo.status.is_robust() {
            prop_assert!(!v_hi.status.is_robust());
        }
        if matches!(v_hi.status, Status::Vulnerable | Status::CatastrophicExpected) {
            prop_assert_eq!(v_hi.recommendation, cpshift::verdict::Recommendation::QuarterlyRetrain);
        }
    }
}

/// Normal approximation with continuity and tie correction, for the
/// exact-versus-asymptotic agreement check.
fn wilcoxon_normal_p(d: &[f64]) -> f64 {
    let mut nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let ranks = cpshift::stats::average_ranks(&abs);
    let w_plus: f64 = nz.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = nz.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie = 0.0;
    let mut i = 0;
    while i < abs.len() {
        let j = abs[i..].iter().take_while(|v| **v == abs[i]).count();
        let t = j as f64;
        tie += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie / 48.0;
    let w = w_plus.min(n * (n + 1.0) / 2.0 - w_plus);
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * (1.0 - Normal::standard().cdf(z))).min(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wilcoxon_exact_matches_normal_for_large_n(d in prop::collection::vec(0.01f64..3.0, 20..=25), signs in prop::collection::vec(any::<bool>(), 25)) {
        let d: Vec<f64> = d.iter().zip(&signs).map(|(v, s)| if *s { *v } else { -*v }).collect();
        let zeros = vec![0.0; d.len()];
        let r = wilcoxon_signed_rank(&d, &zeros).unwrap();
        prop_assert_eq!(r.method, TestMethod::Exact);
        prop_assert!((r.p_value - wilcoxon_normal_p(&d)).abs() < 0.02, "exact {} normal {}", r.p_value, wilcoxon_normal_p(&d));
    }
}

fn small_scenario(seed: u64) -> ShiftScenario {
    ShiftScenario {
        n_features: 4,
        n_classes: 3,
        id_feature_turnover: 1.0,
        concentration_mode: ConcentrationMode::SingleDominant,
        entropy_level: EntropyLevel::High,
        n_train: 300,
        n_val: 150,
        n_test: 150,
        seed,
        periods: PeriodLayout::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ensemble_ignores_seed_order(seeds in Just((1u64..=6).collect::<Vec<_>>()).prop_shuffle(), scenario_seed in 0u64..50) {
        let spec = small_scenario(scenario_seed);
        let (table, split) = generate_scenario(&spec).unwrap();
        let sorted: Vec<u64> = (1..=6).collect();
        let a = run_seed_ensemble(&table, &split, &ModelSpec::Frequency, 0.1, &sorted).unwrap();
        let b = run_seed_ensemble(&table, &split, &ModelSpec::Frequency, 0.1, &seeds).unwrap();
        prop_assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn retrain_count_follows_cadence(scenario_seed in 0u64..50, horizon in 3usize..7) {
        let mut spec = small_scenario(scenario_seed);
        spec.periods = PeriodLayout { train: 3, val: 3, test: 3 };
        let (table, _) = generate_scenario(&spec).unwrap();
        let rows = run_schedules(&table, &Cadence::ALL, horizon, &ModelSpec::Frequency, 0.1, 1).unwrap();
        let count = |c: Cadence| rows.iter().find(|r| r.cadence == c).unwrap().retrain_count;
        prop_assert_eq!(count(Cadence::None), 0);
        prop_assert!(count(Cadence::Monthly) >= count(Cadence::Quarterly));
        prop_assert!(count(Cadence::Quarterly) >= count(Cadence::Biannual));
        prop_assert!(rows.iter().all(|r| r.trace.len() == horizon));
    }
}
