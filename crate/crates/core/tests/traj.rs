use std::f64::consts::PI;

use nalgebra::Vector3;
use proptest::prelude::*;
use trajbench_core::traj::{
    load_dataset, lowpass_filter, min_jerk_trajectory, save_dataset, synth_generate, Action,
    GridPos, Provenance, SynthConfig,
};
use trajbench_core::{FrameTransform, Trajectory};

#[test]
fn min_jerk_velocity_matches_closed_form() {
    let (s, e, dur) = (
        Vector3::new(0.1, -0.2, 0.0),
        Vector3::new(0.4, 0.1, 0.2),
        0.8,
    );
    let t = min_jerk_trajectory(s, e, dur, 0.001).unwrap();
    assert_eq!(t.len(), 801);
    assert_eq!(t.start(), s);
    assert!((t.end() - e).norm() < 1e-15);
    let v = t.differentiate();
    for i in (1..800).step_by(37) {
        let u = i as f64 * 0.001 / dur;
        let speed = 30.0 * u * u * (1.0 - u) * (1.0 - u) / dur;
        let want = (e - s) * speed;
        // central differences are second order in dt
        assert!((v[i] - want).norm() < 1e-5, "sample {i}");
    }
    // peak speed 1.875 |e - s| / T at mid-movement
    let peak = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!((peak - 1.875 * (e - s).norm() / dur).abs() < 1e-5);
}

#[test]
fn resample_matches_direct_interpolation() {
    let t = Trajectory::from_fn(101, 0.01, |x| Vector3::new(x.sin(), x * x, 1.0 - x)).unwrap();
    let r = t.resample(37).unwrap();
    assert_eq!(r.len(), 37);
    assert!((r.duration() - t.duration()).abs() < 1e-15);
    for (i, p) in r.positions().iter().enumerate() {
        let time = i as f64 * r.dt();
        let k = ((time / 0.01).floor() as usize).min(99);
        let w = time / 0.01 - k as f64;
        let want = t.positions()[k] * (1.0 - w) + t.positions()[k + 1] * w;
        assert!((p - want).norm() < 1e-12, "sample {i}");
    }
}

fn sine(freq: f64) -> Trajectory {
    Trajectory::from_fn(801, 0.01, |t| {
        Vector3::new((2.0 * PI * freq * t).sin(), 0.0, 0.0)
    })
    .unwrap()
}

/// RMS amplitude away from the pinned ends.
fn interior_rms(t: &Trajectory) -> f64 {
    let p = &t.positions()[150..650];
    (p.iter().map(|v| v.x * v.x).sum::<f64>() / p.len() as f64).sqrt()
}

#[test]
fn lowpass_passes_slow_and_blocks_fast_motion() {
    let slow = sine(1.0);
    let kept = interior_rms(&lowpass_filter(&slow, 3.0).unwrap()) / interior_rms(&slow);
    assert!((1.0 - kept).abs() < 0.05, "1 Hz gain {kept}");
    let fast = sine(10.0);
    let left = interior_rms(&lowpass_filter(&fast, 3.0).unwrap()) / interior_rms(&fast);
    assert!(left < 0.1, "10 Hz gain {left}");
}

#[test]
fn dataset_round_trip() {
    let set = synth_generate(&SynthConfig {
        actions: vec![Action::Push, Action::TakeDown],
        targets: vec![GridPos::new(1, 1), GridPos::new(7, 2)],
        repetitions: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&set, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert!(matches!(back.provenance, Provenance::Loaded));
    assert_eq!(back.len(), set.len());
    for (a, b) in set.records.iter().zip(&back.records) {
        assert_eq!(a.key(), b.key());
        assert_eq!(a.trajectory.len(), b.trajectory.len());
        for (p, q) in a
            .trajectory
            .positions()
            .iter()
            .zip(b.trajectory.positions())
        {
            assert_eq!(p, q);
        }
    }
}

#[test]
fn missing_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_dataset(dir.path().join("nope")).is_err());
}

fn arb_traj() -> impl Strategy<Value = Trajectory> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..60).prop_map(|v| {
        Trajectory::new(
            v.into_iter()
                .map(|(x, y, z)| Vector3::new(x, y, z))
                .collect(),
            0.01,
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn resample_keeps_endpoints_and_duration(t in arb_traj(), n in 2usize..200) {
        let r = t.resample(n).unwrap();
        prop_assert_eq!(r.len(), n);
        prop_assert_eq!(r.start(), t.start());
        prop_assert_eq!(r.end(), t.end());
        prop_assert!((r.duration() - t.duration()).abs() < 1e-12);
    }

    #[test]
    fn resample_stays_in_bounding_box(t in arb_traj(), n in 2usize..200) {
        let r = t.resample(n).unwrap();
        for axis in 0..3 {
            let lo = t.positions().iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
            let hi = t.positions().iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
            for p in r.positions() {
                prop_assert!(p[axis] >= lo - 1e-12 && p[axis] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn frame_inverse_undoes_transform(t in arb_traj(), angle in -PI..PI, bx in -1.0f64..1.0, by in -1.0f64..1.0) {
        let f = FrameTransform::about_z(angle, Vector3::new(bx, by, 0.3));
        let back = t.transform(&f).transform(&f.inverse());
        for (p, q) in back.positions().iter().zip(t.positions()) {
            prop_assert!((p - q).norm() < 1e-12);
        }
        let id = f.compose(&f.inverse());
        prop_assert!((id.rotation() - FrameTransform::identity().rotation()).amax() < 1e-12);
        prop_assert!(id.translation().norm() < 1e-12);
    }

    #[test]
    fn filter_pins_endpoints(t in arb_traj().prop_filter("long enough", |t| t.len() >= 20)) {
        let f = lowpass_filter(&t, 3.0).unwrap();
        prop_assert_eq!(f.len(), t.len());
        prop_assert!((f.start() - t.start()).norm() < 1e-12);
        prop_assert!((f.end() - t.end()).norm() < 1e-12);
    }

    #[test]
    fn translation_commutes_with_resample(t in arb_traj(), n in 2usize..100, dx in -1.0f64..1.0) {
        let off = Vector3::new(dx, -dx, 0.5 * dx);
        let a = t.translated(off).resample(n).unwrap();
        let b = t.resample(n).unwrap().translated(off);
        for (p, q) in a.positions().iter().zip(b.positions()) {
            prop_assert!((p - q).norm() < 1e-12);
        }
    }
}
