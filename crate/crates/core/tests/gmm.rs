use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use trajbench_core::gmm::{
    em_fit, frame_params_from_endpoints, gmr_condition, mixture_param_count, tbgmr_encode,
    tbgmr_reconstruct, tpgmm_combine, tpgmm_fit, tpgmm_generalize, EmInit, EmOptions, Gaussian,
    Gmm, TaskParams, TpGmm,
};
use trajbench_core::traj::{synth_generate, Action, GridPos, SynthConfig};
use trajbench_core::{FrameTransform, Trajectory};

fn rms(a: &Trajectory, b: &Trajectory) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (a.resample(n).unwrap(), b.resample(n).unwrap());
    let s: f64 = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(p, q)| (p - q).norm_squared())
        .sum();
    (s / n as f64).sqrt()
}

fn random_pd(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &m * m.transpose() * scale + DMatrix::identity(d, d) * (0.1 * scale);
    (&s + s.transpose()) * 0.5
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn single_component_is_sample_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<DVector<f64>> = (0..200)
        .map(|_| {
            DVector::from_fn(3, |i, _| {
                (i as f64 + 1.0) * rng.sample::<f64, _>(StandardNormal)
            })
        })
        .collect();
    let eps = 1e-3;
    let fit = em_fit(&data, &EmOptions::new(1, eps)).unwrap();
    let n = data.len() as f64;
    let mean = data.iter().fold(DVector::zeros(3), |a, x| a + x) / n;
    let cov = data.iter().fold(DMatrix::zeros(3, 3), |a, x| {
        a + (x - &mean) * (x - &mean).transpose()
    }) / n
        + DMatrix::identity(3, 3) * eps;
    let c = &fit.gmm.components()[0];
    assert!((c.mu() - mean).amax() < 1e-9);
    assert!((c.sigma() - cov).amax() < 1e-9);
}

#[test]
fn separates_two_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let centers = [
        DVector::from_vec(vec![0.0, 0.0]),
        DVector::from_vec(vec![5.0, 5.0]),
    ];
    // 4000 samples keep the sampling error of each cluster mean near 2e-3
    let data: Vec<DVector<f64>> = (0..4000)
        .map(|i| {
            let c = &centers[i % 2];
            c + DVector::from_fn(2, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal))
        })
        .collect();
    let fit = em_fit(&data, &EmOptions::new(2, 1e-6).with_seed(3)).unwrap();
    for c in &centers {
        let best = fit
            .gmm
            .components()
            .iter()
            .map(|g| (g.mu() - c).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.01, "closest mean {best} from {c}");
    }
}

#[test]
fn log_likelihood_monotone_without_regularization() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data: Vec<DVector<f64>> = (0..300)
        .map(|i| {
            let shift = [0.0, 2.0, 4.5][i % 3];
            DVector::from_fn(2, |j, _| {
                shift * (j as f64 + 1.0) + rng.sample::<f64, _>(StandardNormal)
            })
        })
        .collect();
    for seed in 0..5 {
        let fit = em_fit(&data, &EmOptions::new(3, 0.0).with_seed(seed)).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-10 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }
}

/// Conditional moments of `p(y | x)` by dense quadrature over `y`.
fn grid_conditional(gmm: &Gmm, x: f64) -> (f64, f64) {
    let (lo, hi, n) = (-30.0, 30.0, 300_001);
    let h = (hi - lo) / (n - 1) as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let y = lo + i as f64 * h;
        let p = DVector::from_vec(vec![x, y]);
        let dens: f64 = gmm
            .weights()
            .iter()
            .zip(gmm.components())
            .map(|(w, g)| w * g.log_pdf(&p).exp())
            .sum();
        z += dens;
        m1 += dens * y;
        m2 += dens * y * y;
    }
    let mean = m1 / z;
    (mean, m2 / z - mean * mean)
}

fn random_mixture(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Gmm {
    let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let last = 1.0 - w[..k - 1].iter().sum::<f64>();
    w[k - 1] = last;
    let comps = (0..k)
        .map(|_| {
            let mu = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            Gaussian::new(mu, random_pd(rng, d, 0.5)).unwrap()
        })
        .collect();
    Gmm::new(w, comps).unwrap()
}

#[test]
fn gmr_matches_grid_oracle_single_gaussian() {
    // with one component the moment-matched answer is exact
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let gmm = random_mixture(&mut rng, 1, 2);
        let x = rng.random_range(-1.5..1.5);
        let (m, s) = gmr_condition(&gmm, &[0], &[1], &DVector::from_vec(vec![x])).unwrap();
        let (gm, gv) = grid_conditional(&gmm, x);
        assert!((m[0] - gm).abs() < 1e-3);
        assert!((s[(0, 0)] - gv).abs() < 1e-3 * gv);
    }
}

#[test]
fn gmr_matches_grid_oracle_mixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let k = rng.random_range(1..=3);
        let gmm = random_mixture(&mut rng, k, 2);
        let x = rng.random_range(-1.5..1.5);
        let (m, s) = gmr_condition(&gmm, &[0], &[1], &DVector::from_vec(vec![x])).unwrap();
        let (gm, gv) = grid_conditional(&gmm, x);
        assert!(
            (m[0] - gm).abs() < 1e-3 * gm.abs().max(1.0),
            "mean {} vs {gm}",
            m[0]
        );
        assert!(
            (s[(0, 0)] - gv).abs() < 1e-3 * gv,
            "var {} vs {gv}",
            s[(0, 0)]
        );
    }
}

proptest! {
    #[test]
    fn gmr_covariance_is_psd(seed in 0u64..1000, x0 in -3.0f64..3.0, x1 in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gmm = random_mixture(&mut rng, 3, 4);
        let (_, s) = gmr_condition(&gmm, &[0, 1], &[2, 3], &DVector::from_vec(vec![x0, x1])).unwrap();
        prop_assert!(s.symmetric_eigenvalues().min() > -1e-12);
    }
}

#[test]
fn parameter_counts() {
    assert_eq!(mixture_param_count(3, 4, 1), 44);
    assert_eq!(mixture_param_count(6, 4, 2), 173);
    for k in 1..=20 {
        assert_eq!(mixture_param_count(k, 4, 1), 15 * k - 1);
        assert_eq!(mixture_param_count(k, 4, 2), 29 * k - 1);
    }
}

fn synth(actions: Vec<Action>) -> Vec<Trajectory> {
    synth_generate(&SynthConfig {
        actions,
        ..SynthConfig::default()
    })
    .unwrap()
    .records
    .into_iter()
    .map(|r| r.trajectory)
    .collect()
}

#[test]
fn tbgmr_reconstructs_synthetic_demo() {
    let demos = synth(vec![Action::PutOnTop]);
    let g = tbgmr_encode(&demos[0], 6, 1e-5).unwrap();
    assert_eq!(g.param_count(), 89);
    let r = tbgmr_reconstruct(&g, &demos[0].timestamps()).unwrap();
    assert_eq!(r.trajectory.len(), demos[0].len());
    assert!(
        rms(&r.trajectory, &demos[0]) < 5e-3,
        "rms {}",
        rms(&r.trajectory, &demos[0])
    );
    for c in &r.covariances {
        assert!(c.symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn tbgmr_k11_median_error_scale() {
    let demos = synth(Action::ALL.to_vec());
    let errs: Vec<f64> = demos
        .iter()
        .map(|d| {
            let g = tbgmr_encode(d, 11, 1e-6).unwrap();
            rms(
                &tbgmr_reconstruct(&g, &d.timestamps()).unwrap().trajectory,
                d,
            )
        })
        .collect();
    assert!(median(errs.clone()) < 3e-3, "median {}", median(errs));
}

#[test]
fn single_frame_tpgmm_is_plain_em() {
    let demos = synth(vec![Action::Hide]);
    let demos = &demos[..3];
    let params: Vec<TaskParams> = demos
        .iter()
        .map(|_| TaskParams::new(vec![FrameTransform::identity()]).unwrap())
        .collect();
    let tp = tpgmm_fit(demos, &params, 4, 1e-4).unwrap();
    let pooled: Vec<DVector<f64>> = demos
        .iter()
        .flat_map(|d| {
            let n = d.len();
            d.positions().iter().enumerate().map(move |(i, p)| {
                DVector::from_vec(vec![i as f64 / (n - 1) as f64, p.x, p.y, p.z])
            })
        })
        .collect();
    let plain = em_fit(
        &pooled,
        &EmOptions::new(4, 1e-4).with_init(EmInit::TimeBins),
    )
    .unwrap();
    let single = tp.model.frame_gmm(0).unwrap();
    for (a, b) in single.weights().iter().zip(plain.gmm.weights()) {
        assert!((a - b).abs() < 1e-9);
    }
    for (a, b) in single.components().iter().zip(plain.gmm.components()) {
        assert!((a.mu() - b.mu()).amax() < 1e-9);
        assert!((a.sigma() - b.sigma()).amax() < 1e-9);
    }
}

fn random_frame(rng: &mut ChaCha8Rng) -> FrameTransform {
    FrameTransform::about_z(
        rng.random_range(-3.0..3.0),
        Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ),
    )
}

#[test]
fn identical_frames_scale_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let p = rng.random_range(1..=4);
        let g = Gaussian::new(
            DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)),
            random_pd(&mut rng, 4, 0.1),
        )
        .unwrap();
        let f = random_frame(&mut rng);
        let model = TpGmm::new(vec![1.0], vec![vec![g.clone()]; p]).unwrap();
        let params = TaskParams::new(vec![f; p]).unwrap();
        let combined = tpgmm_combine(&model, &params).unwrap();
        let (a, b) = params.block(0);
        let single = g.transform(&a, &b).unwrap();
        let prec_c = combined.components()[0]
            .sigma()
            .clone()
            .try_inverse()
            .unwrap();
        let prec_s = single.sigma().clone().try_inverse().unwrap();
        let scale = prec_s.amax();
        assert!((prec_c - prec_s * p as f64).amax() < 1e-10 * scale);
        assert!((combined.components()[0].mu() - single.mu()).amax() < 1e-10);
        if p == 1 {
            assert!((combined.components()[0].sigma() - single.sigma()).amax() < 1e-12);
        }
    }
}

#[test]
fn combined_precision_is_sum_of_frame_precisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let frames: Vec<Vec<Gaussian>> = (0..2)
            .map(|_| {
                vec![Gaussian::new(
                    DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)),
                    random_pd(&mut rng, 4, 0.2),
                )
                .unwrap()]
            })
            .collect();
        let params = TaskParams::new(vec![random_frame(&mut rng), random_frame(&mut rng)]).unwrap();
        let model = TpGmm::new(vec![1.0], frames.clone()).unwrap();
        let combined = tpgmm_combine(&model, &params).unwrap();
        let mut sum = DMatrix::zeros(4, 4);
        let mut info = DVector::zeros(4);
        for (j, f) in frames.iter().enumerate() {
            let (a, b) = params.block(j);
            let s = &a * f[0].sigma() * a.transpose();
            let p = s.try_inverse().unwrap();
            info += &p * (&a * f[0].mu() + b);
            sum += p;
        }
        let prec = combined.components()[0]
            .sigma()
            .clone()
            .try_inverse()
            .unwrap();
        assert!((&prec - &sum).amax() < 1e-10 * sum.amax());
        let mu = sum.try_inverse().unwrap() * info;
        assert!((combined.components()[0].mu() - mu).amax() < 1e-10);
    }
}

fn triplet_demos(action: Action, cols: [(i32, i32); 2]) -> (Vec<Trajectory>, Vec<TaskParams>) {
    let set = synth_generate(&SynthConfig {
        actions: vec![action],
        targets: cols.iter().map(|&(c, r)| GridPos::new(c, r)).collect(),
        ..SynthConfig::default()
    })
    .unwrap();
    let demos: Vec<Trajectory> = set.records.into_iter().map(|r| r.trajectory).collect();
    let params = demos
        .iter()
        .map(|d| frame_params_from_endpoints(d.start(), d.end()).unwrap())
        .collect();
    (demos, params)
}

#[test]
fn tpgmm_round_trip_on_six_demos() {
    let (demos, params) = triplet_demos(Action::PickAndPlace, [(1, 0), (1, 1)]);
    assert_eq!(demos.len(), 6);
    let fit = tpgmm_fit(&demos, &params, 6, 1e-6).unwrap();
    assert_eq!(fit.model.param_count(), 173);
    let combined = tpgmm_combine(&fit.model, &params[0]).unwrap();
    for c in combined.components() {
        assert!(c.min_eigenvalue() > 0.0);
    }
    let d = &demos[0];
    let n = d.len();
    let phase: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let rec = tbgmr_reconstruct(&combined, &phase).unwrap();
    assert!(
        rms(&rec.trajectory, d) < 1e-2,
        "rms {}",
        rms(&rec.trajectory, d)
    );
}

#[test]
fn tpgmm_generalize_to_training_endpoints() {
    let (demos, params) = triplet_demos(Action::PickAndPlace, [(1, 0), (1, 1)]);
    let fit = tpgmm_fit(&demos, &params, 6, 1e-6).unwrap();
    let d = &demos[0];
    let out = tpgmm_generalize(&fit.model, d.start(), d.end(), &d.timestamps()).unwrap();
    assert_eq!(out.len(), d.len());
    // spread between repetitions of the same movement
    let spread =
        (rms(&demos[0], &demos[1]) + rms(&demos[0], &demos[2]) + rms(&demos[1], &demos[2])) / 3.0;
    assert!(
        rms(&out, d) < spread,
        "rms {} vs spread {spread}",
        rms(&out, d)
    );
}

#[test]
fn mixture_json_round_trip() {
    let (demos, params) = triplet_demos(Action::Push, [(1, 0), (1, 1)]);
    let fit = tpgmm_fit(&demos, &params, 3, 1e-5).unwrap();
    let s = serde_json::to_string(&fit.model).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["P"], 2);
    assert_eq!(v["frames"].as_array().unwrap().len(), 2);
    let back: TpGmm = serde_json::from_str(&s).unwrap();
    assert_eq!(back.k(), 3);
    for (a, b) in back
        .frames()
        .iter()
        .flatten()
        .zip(fit.model.frames().iter().flatten())
    {
        assert_eq!(a.mu(), b.mu());
    }
}
