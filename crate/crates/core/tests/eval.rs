use nalgebra::Vector3;
use proptest::prelude::*;
use trajbench_core::dmp::{DmpConfig, DmpModel};
use trajbench_core::eval::{
    aggregate, endpoint_distance, inter_human_variance, oscillation_metric, param_count,
    relaxed_time_success, rms_distance, CaseRecord, EvalReport, ModelKind, Scenario,
};
use trajbench_core::gmm::mixture_param_count;
use trajbench_core::seds::seds_param_count;
use trajbench_core::traj::Action;
use trajbench_core::{Error, Trajectory};

fn traj(points: Vec<[f64; 3]>) -> Trajectory {
    Trajectory::new(points.into_iter().map(Vector3::from).collect(), 0.01).unwrap()
}

fn points(n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), n)
}

/// Median by rank counting, no sorting.
fn rank_median(v: &[f64]) -> f64 {
    let n = v.len();
    let kth = |k: usize| {
        *v.iter()
            .find(|x| {
                let below = v.iter().filter(|y| y < x).count();
                let equal = v.iter().filter(|y| y == x).count();
                below <= k && k < below + equal
            })
            .unwrap()
    };
    if n % 2 == 1 {
        kth(n / 2)
    } else {
        0.5 * (kth(n / 2 - 1) + kth(n / 2))
    }
}

#[test]
fn identical_trajectories_have_zero_distance() {
    let a = traj(vec![[0.0, 0.1, 0.2], [0.3, 0.2, 0.1], [0.5, 0.5, 0.5]]);
    assert_eq!(rms_distance(&a, &a).unwrap(), 0.0);
    assert_eq!(
        inter_human_variance(&[a.clone(), a.clone(), a.clone()]).unwrap(),
        0.0
    );
    assert_eq!(endpoint_distance(&a, &a), 0.0);
}

#[test]
fn longer_trajectory_is_resampled() {
    let short = Trajectory::from_fn(11, 0.1, |t| Vector3::new(t, 0.0, 0.0)).unwrap();
    let long = Trajectory::from_fn(101, 0.01, |t| Vector3::new(t, 0.0, 0.0)).unwrap();
    assert!(rms_distance(&short, &long).unwrap() < 1e-12);
    assert!(rms_distance(&long, &short).unwrap() < 1e-12);
}

#[test]
fn two_identical_and_one_offset_repetition() {
    let delta = 0.012;
    let base = Trajectory::from_fn(80, 0.01, |t| Vector3::new(t, t * t, 0.1)).unwrap();
    let shifted = base.translated(Vector3::new(0.0, delta, 0.0));
    let d = inter_human_variance(&[base.clone(), base.clone(), shifted.clone()]).unwrap();
    assert!((d - 2.0 / 3.0 * delta).abs() < 1e-12);
    let d2 = inter_human_variance(&[shifted, base.clone(), base]).unwrap();
    assert!((d - d2).abs() < 1e-15);
}

#[test]
fn single_repetition_rejected() {
    let a = traj(vec![[0.0; 3], [1.0, 0.0, 0.0]]);
    assert!(matches!(
        inter_human_variance(&[a]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn worked_relaxed_time_case() {
    assert!(!relaxed_time_success(1.28, 0.74));
    assert!(relaxed_time_success(1.0, 1.0));
    assert!(relaxed_time_success(1.38 * 0.5, 0.5));
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

fn along_x(speed: &[f64]) -> Vec<Vector3<f64>> {
    speed.iter().map(|s| Vector3::new(*s, 0.0, 0.0)).collect()
}

#[test]
fn bell_profile_is_smooth() {
    let v = along_x(&hann(120));
    for k in 2..=11 {
        assert!(oscillation_metric(&v, k, 1.2).unwrap() < 0.05);
    }
}

#[test]
fn rippled_profile_is_not_smooth() {
    let n = 120;
    for k in 3..=11 {
        let s: Vec<f64> = hann(n)
            .iter()
            .enumerate()
            .map(|(i, b)| {
                b + 0.3 * 0.5 * (2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64).sin()
            })
            .collect();
        let r = oscillation_metric(&along_x(&s), k, 1.2).unwrap();
        assert!(r > 0.2, "K={k}: {r}");
    }
}

#[test]
fn unresolvable_cycles_are_undefined() {
    let v = along_x(&hann(10));
    assert!(matches!(
        oscillation_metric(&v, 5, 0.1),
        Err(Error::UndefinedMetric(_))
    ));
    assert!(oscillation_metric(&v, 4, 0.1).is_ok());
}

#[test]
fn param_counts_match_closed_forms() {
    assert_eq!(param_count(ModelKind::Dmp, 11, 1), 33);
    assert_eq!(param_count(ModelKind::TbGmr, 3, 1), 44);
    assert_eq!(param_count(ModelKind::Seds, 3, 1), 87);
    assert_eq!(param_count(ModelKind::Dmp, 6, 36), 648);
    for k in 1..=20 {
        assert_eq!(param_count(ModelKind::Dmp, k, 1), 3 * k);
        assert_eq!(param_count(ModelKind::Dmp, k, 6), 18 * k);
        assert_eq!(param_count(ModelKind::Dmp, k, 36), 108 * k);
        assert_eq!(param_count(ModelKind::TbGmr, k, 1), 15 * k - 1);
        assert_eq!(param_count(ModelKind::TpGmm, k, 1), 29 * k - 1);
        assert_eq!(param_count(ModelKind::Seds, k, 1), 29 * k);
        // independent paths through the model types
        assert_eq!(
            param_count(ModelKind::TbGmr, k, 1),
            mixture_param_count(k, 4, 1)
        );
        assert_eq!(
            param_count(ModelKind::TpGmm, k, 1),
            mixture_param_count(k, 4, 2)
        );
        assert_eq!(param_count(ModelKind::Seds, k, 1), seds_param_count(k));
        if k >= 2 {
            let m = DmpModel::zero(
                &DmpConfig::new(k),
                Vector3::zeros(),
                Vector3::x(),
                1.0,
                0.01,
            )
            .unwrap();
            assert_eq!(param_count(ModelKind::Dmp, k, 1), m.param_count());
        }
    }
}

fn record(model: ModelKind, k: usize, case: &str, d: Option<f64>, success: bool) -> CaseRecord {
    CaseRecord {
        model,
        k,
        scenario: Scenario::Reconstruction,
        action: Action::Push,
        participant: "p1".into(),
        case: case.into(),
        fitted: success,
        success,
        d,
        d_e: d.map(|v| v / 2.0),
        d_h: None,
        dur_ratio: Some(1.0),
        params: 3 * k,
        note: None,
    }
}

#[test]
fn report_csv_and_summaries() {
    let r = EvalReport::new(vec![
        record(ModelKind::Seds, 3, "b", None, false),
        record(ModelKind::Dmp, 3, "b", Some(0.002), true),
        record(ModelKind::Dmp, 3, "a", Some(0.001), true),
        record(ModelKind::Seds, 3, "a", Some(0.004), true),
    ]);
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), r.records.len() + 1);
    assert!(csv.starts_with("model,K,scenario,action,d_mm,de_mm,dur_ratio,success\n"));
    assert!(csv.contains("DMP,3,reconstruction,push,1.000000,0.500000,1.000000,true"));
    assert!(csv.contains("SEDS,3,reconstruction,push,,,1.000000,false"));
    let s = r.summaries();
    let seds = s.iter().find(|g| g.model == ModelKind::Seds).unwrap();
    assert_eq!((seds.cases, seds.successes), (2, 1));
    assert_eq!(seds.d.unwrap().median, 0.004);
    let back = EvalReport::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn report_order_is_canonical() {
    let recs = vec![
        record(ModelKind::Dmp, 6, "z", Some(0.1), true),
        record(ModelKind::Dmp, 3, "y", Some(0.2), true),
        record(ModelKind::TpGmm, 3, "x", Some(0.3), true),
    ];
    let mut rev = recs.clone();
    rev.reverse();
    assert_eq!(
        EvalReport::new(recs).to_csv(),
        EvalReport::new(rev).to_csv()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rms_matches_direct_summation(a in points(25), b in points(25)) {
        let (ta, tb) = (traj(a.clone()), traj(b.clone()));
        let mut sum = 0.0;
        for i in 0..25 {
            for c in 0..3 {
                sum += (a[i][c] - b[i][c]).powi(2);
            }
        }
        let oracle = (sum / 25.0).sqrt();
        prop_assert!((rms_distance(&ta, &tb).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn rms_is_symmetric_and_triangular(a in points(12), b in points(12), c in points(12)) {
        let (ta, tb, tc) = (traj(a), traj(b), traj(c));
        let ab = rms_distance(&ta, &tb).unwrap();
        prop_assert_eq!(ab, rms_distance(&tb, &ta).unwrap());
        let ac = rms_distance(&ta, &tc).unwrap();
        let cb = rms_distance(&tc, &tb).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn metrics_are_translation_invariant(a in points(15), b in points(15), off in prop::array::uniform3(-5.0f64..5.0)) {
        let (ta, tb) = (traj(a), traj(b));
        let o = Vector3::from(off);
        let (sa, sb) = (ta.translated(o), tb.translated(o));
        prop_assert!((rms_distance(&ta, &tb).unwrap() - rms_distance(&sa, &sb).unwrap()).abs() < 1e-9);
        prop_assert!((endpoint_distance(&ta, &tb) - endpoint_distance(&sa, &sb)).abs() < 1e-9);
        let h0 = inter_human_variance(&[ta.clone(), tb.clone()]).unwrap();
        let h1 = inter_human_variance(&[sa, sb]).unwrap();
        prop_assert!((h0 - h1).abs() < 1e-9);
    }

    #[test]
    fn inter_human_variance_is_permutation_invariant(a in points(10), b in points(10), c in points(10)) {
        let (ta, tb, tc) = (traj(a), traj(b), traj(c));
        let x = inter_human_variance(&[ta.clone(), tb.clone(), tc.clone()]).unwrap();
        let y = inter_human_variance(&[tc, ta, tb]).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn oscillation_is_scale_invariant(noise in prop::collection::vec(-0.2f64..0.2, 60), scale in 0.01f64..100.0, k in 2usize..12) {
        let s: Vec<f64> = hann(60).iter().zip(&noise).map(|(h, n)| h + n).collect();
        let v = along_x(&s);
        let scaled: Vec<Vector3<f64>> = v.iter().map(|x| x * scale).collect();
        let r0 = oscillation_metric(&v, k, 0.6).unwrap();
        let r1 = oscillation_metric(&scaled, k, 0.6).unwrap();
        prop_assert!((r0 - r1).abs() <= 1e-9 * (1.0 + r0));
    }

    #[test]
    fn aggregate_matches_rank_oracle(v in prop::collection::vec(-100.0f64..100.0, 1..40)) {
        let a = aggregate(&v).unwrap();
        prop_assert_eq!(a.median, rank_median(&v));
        let dev: Vec<f64> = v.iter().map(|x| (x - a.median).abs()).collect();
        prop_assert_eq!(a.mad, rank_median(&dev));
        prop_assert!(a.q1 <= a.median && a.median <= a.q3);
    }

    #[test]
    fn mad_zero_iff_constant(v in prop::collection::vec(-3i32..3, 1..12)) {
        let f: Vec<f64> = v.iter().map(|x| *x as f64).collect();
        let all_equal = f.iter().all(|x| *x == f[0]);
        let a = aggregate(&f).unwrap();
        // MAD is zero for constant input; for non-constant input it is zero only
        // when more than half the values coincide with the median
        if all_equal {
            prop_assert_eq!(a.mad, 0.0);
        }
        let at_median = f.iter().filter(|x| **x == a.median).count();
        if a.mad == 0.0 {
            prop_assert!(2 * at_median >= f.len());
        }
    }
}
