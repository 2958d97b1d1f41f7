use std::collections::BTreeSet;

use lab_imprecision::data::split;
use lab_imprecision::domain::{
    label_of, Analyte, Dataset, FeatureVector, LabSeries, LabelClass, PatientRecord, Provenance,
    ReferenceRange, Sex, StaticAttributes,
};
use lab_imprecision::harness::ExperimentConfig;
use lab_imprecision::metrics::{
    correct_set, delta_y, divergence_of_correct, propagation_ratio, PairedPrediction,
};
use lab_imprecision::perturb::{perturb_series, perturb_value, PerturbationSpec, Sign, SignPolicy};
use lab_imprecision::realfmt::real;
use proptest::prelude::*;

fn label_strategy(n: usize) -> impl Strategy<Value = Vec<(String, LabelClass)>> {
    prop::collection::vec(0usize..3, n).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, k)| (format!("p{i}"), LabelClass::ALL[k]))
            .collect()
    })
}

fn triple() -> impl Strategy<Value = [Vec<(String, LabelClass)>; 3]> {
    (1usize..=25).prop_flat_map(|n| [label_strategy(n), label_strategy(n), label_strategy(n)])
}

fn series(id: &str, values: &[[f64; 4]]) -> LabSeries {
    LabSeries {
        patient_id: id.into(),
        statics: StaticAttributes {
            sex: Sex::Male,
            age_years: 45.5,
        },
        visits: values
            .iter()
            .map(|v| FeatureVector::from_array(*v))
            .collect(),
        visit_days: (0..values.len() as u32).map(|i| i * 30).collect(),
    }
}

fn positive() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))
}

fn sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]
}

proptest! {
    #[test]
    fn labels_partition_the_line(v in -10.0f64..10.0, low in 0.01f64..3.0, width in 0.01f64..5.0) {
        let r = ReferenceRange::new(Analyte::Tsh, low, low + width).unwrap();
        let l = label_of(v, &r).unwrap();
        prop_assert_eq!(l == LabelClass::Low, v < r.low);
        prop_assert_eq!(l == LabelClass::High, v > r.high);
        prop_assert_eq!(l == LabelClass::Normal, r.low <= v && v <= r.high);
    }

    #[test]
    fn labels_are_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let r = ReferenceRange::tsh_default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(label_of(lo, &r).unwrap() <= label_of(hi, &r).unwrap());
    }

    #[test]
    fn perturbation_is_bounded_and_directed(x in positive(), dx in 0.0f64..0.9, s in sign()) {
        let xp = perturb_value(x, dx, s).unwrap();
        prop_assert!(xp > 0.0);
        prop_assert!((xp - x).abs() <= dx * x + 2.0 * f64::EPSILON * x);
        match s {
            Sign::Plus => prop_assert!(xp >= x),
            Sign::Minus => prop_assert!(xp <= x),
        }
        prop_assert_eq!(perturb_value(x, 0.0, s).unwrap(), x);
    }

    #[test]
    fn opposite_shifts_compose_to_one_minus_square(x in positive(), dx in 0.0f64..0.9) {
        let y = perturb_value(perturb_value(x, dx, Sign::Plus).unwrap(), dx, Sign::Minus).unwrap();
        let expected = x * (1.0 - dx * dx);
        prop_assert!((y - expected).abs() <= 4.0 * f64::EPSILON * x);
    }

    #[test]
    fn series_perturbation_respects_mask_and_seed(
        values in prop::collection::vec([positive(), positive(), positive(), positive()], 7),
        dx in 0.0f64..0.5,
        seed in any::<u32>(),
        mask in prop::sample::subsequence(Analyte::ALL.to_vec(), 1..=4),
    ) {
        let s = series("q", &values);
        let spec = PerturbationSpec { delta_x: dx, sign_policy: SignPolicy::RandomPerValue, features: mask.clone(), seed: seed as u64 };
        let a = perturb_series(&s, &spec).unwrap();
        prop_assert_eq!(&a, &perturb_series(&s, &spec).unwrap());
        prop_assert_eq!(a.statics, s.statics);
        prop_assert_eq!(&a.visit_days, &s.visit_days);
        for (va, vs) in a.visits.iter().zip(&s.visits) {
            for an in Analyte::ALL {
                let rel = (va.get(an) - vs.get(an)) / vs.get(an);
                if mask.contains(&an) {
                    prop_assert!((rel.abs() - dx).abs() <= 4.0 * f64::EPSILON);
                } else {
                    prop_assert_eq!(va.get(an), vs.get(an));
                }
            }
        }
    }

    #[test]
    fn divergence_identities([truth, a, b] in triple()) {
        let n = truth.len();
        let ca = correct_set(&a, &truth).unwrap();
        let cb = correct_set(&b, &truth).unwrap();
        let d = divergence_of_correct(&ca, &cb, n).unwrap();
        prop_assert_eq!(d.count_gain, cb.len() as i64 - ca.len() as i64);
        prop_assert!(d.count_gain.unsigned_abs() as usize <= d.count_inconsistent);
        prop_assert_eq!((d.count_inconsistent as i64 - d.count_gain).rem_euclid(2), 0);
        prop_assert!(d.n_minus_p.is_disjoint(&d.p_minus_n));
        prop_assert_eq!(d.delta_accuracy, d.count_gain as f64 / n as f64);

        let r = divergence_of_correct(&cb, &ca, n).unwrap();
        prop_assert_eq!(r.count_gain, -d.count_gain);
        prop_assert_eq!(&r.n_minus_p, &d.p_minus_n);
        let same = divergence_of_correct(&ca, &ca, n).unwrap();
        prop_assert_eq!(same.count_inconsistent, 0);
    }

    #[test]
    fn uniform_output_shift_gives_its_ratio(
        ys in prop::collection::vec(0.01f64..20.0, 1..30),
        k in 0.0f64..12.0,
        dx in 0.001f64..0.2,
    ) {
        let r = ReferenceRange::tsh_default();
        let pairs: Vec<PairedPrediction> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| PairedPrediction::new(format!("p{i}"), y, y * (1.0 + k * dx), y, &r).unwrap())
            .collect();
        let p = propagation_ratio(&pairs, dx).unwrap();
        prop_assert!((p.mean - k).abs() <= 1e-9 * (1.0 + k));
        prop_assert!((p.median - k).abs() <= 1e-9 * (1.0 + k));
        prop_assert_eq!(p.guarded, 0);
        prop_assert!(delta_y(ys[0], ys[0]) == Some(0.0));
    }

    #[test]
    fn split_is_a_partition(n in 1usize..60, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let records: Vec<PatientRecord> = (0..n)
            .map(|i| PatientRecord { series: series(&format!("id{i:03}"), &[[1.0, 2.0, 3.0, 4.0]; 7]), target_tsh: 1.0, target_trab: 1.0 })
            .collect();
        let data = Dataset::new(records, Provenance::Synthetic, None).unwrap();
        let train_n = (frac * n as f64) as usize;
        let (train, test) = split(&data, train_n, seed).unwrap();
        prop_assert_eq!(train.len(), train_n);
        prop_assert_eq!(test.len(), n - train_n);
        let a: BTreeSet<&str> = train.ids().collect();
        let b: BTreeSet<&str> = test.ids().collect();
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(a.union(&b).count(), n);
        let (train2, _) = split(&data, train_n, seed).unwrap();
        prop_assert_eq!(train, train2);
    }

    #[test]
    fn real_format_is_stable(x in prop::num::f64::NORMAL) {
        let s = real(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs());
        prop_assert_eq!(real(back), s);
    }

    #[test]
    fn config_round_trips(
        seed in 0u64..=i64::MAX as u64,
        runs in 1usize..50,
        deltas in prop::collection::btree_set(0u32..1000, 1..8),
        epochs in 1usize..500,
    ) {
        let mut cfg = ExperimentConfig::ci_profile();
        cfg.master_seed = seed;
        cfg.runs = runs;
        cfg.sweep_deltas = deltas.into_iter().map(|d| d as f64 / 1000.0).collect();
        cfg.train.epochs = epochs;
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
