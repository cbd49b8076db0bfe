//! Synthetic stand-in for recorded hand trajectories.
//!
//! Every movement is a minimum-jerk point-to-point profile between two grid
//! positions, with an action-specific vertical lift and per-repetition
//! smooth perturbations.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{DemoRecord, DemoSet, Provenance};
use super::grid::{Action, GridPos, BOWL_EXCLUDED};
use super::trajectory::{Trajectory, DEFAULT_DT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub actions: Vec<Action>,
    /// Grid targets (the position other than `S` visited by each movement).
    pub targets: Vec<GridPos>,
    pub participants: usize,
    pub repetitions: u32,
    /// Standard deviation of endpoint and shape perturbations, in meters.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            actions: Action::ALL.to_vec(),
            targets: vec![
                GridPos::new(1, 0),
                GridPos::new(1, 1),
                GridPos::new(1, 2),
                GridPos::new(4, 2),
                GridPos::new(7, 1),
            ],
            participants: 1,
            repetitions: 3,
            noise: 0.005,
            seed: 0,
        }
    }
}

/// Height profile parameters of one action, in meters.
#[derive(Debug, Clone, Copy)]
struct Shape {
    /// Hand height at the grid target relative to the table.
    target_height: f64,
    /// Extra height of the mid-movement lift.
    lift: f64,
}

fn action_shape(action: Action) -> Shape {
    match action {
        Action::PickAndPlace => Shape {
            target_height: 0.0,
            lift: 0.08,
        },
        Action::PutOnTop | Action::TakeDown => Shape {
            target_height: 0.06,
            lift: 0.05,
        },
        Action::PutInside | Action::TakeOut => Shape {
            target_height: 0.03,
            lift: 0.09,
        },
        Action::Hide | Action::Uncover => Shape {
            target_height: 0.0,
            lift: 0.10,
        },
        Action::Push | Action::Pull => Shape {
            target_height: 0.0,
            lift: 0.0,
        },
    }
}

/// Minimum-jerk position fraction `10 s^3 - 15 s^4 + 6 s^5`.
pub fn min_jerk_fraction(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Smooth lift bump `64 s^3 (1 - s)^3`, peaking at 1 for `s = 0.5`.
fn lift_bump(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    let q = s * (1.0 - s);
    64.0 * q * q * q
}

/// Straight minimum-jerk movement sampled at `dt` over `duration` seconds.
pub fn min_jerk_trajectory(
    start: Vector3<f64>,
    end: Vector3<f64>,
    duration: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(duration > 0.0) {
        return Err(Error::invalid("duration must be positive"));
    }
    let n = (duration / dt).round() as usize + 1;
    let total = (n - 1) as f64 * dt;
    Trajectory::from_fn(n.max(2), dt, |t| {
        start + (end - start) * min_jerk_fraction(t / total)
    })
}

/// Nominal movement duration for a displacement of `dist` meters.
fn nominal_duration(dist: f64) -> f64 {
    0.55 + 1.0 * dist
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Per-participant style factors, independent of the noise level.
#[derive(Debug, Clone, Copy)]
struct Style {
    lift_scale: f64,
    speed_scale: f64,
}

fn participant_style(seed: u64, participant: usize) -> Style {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0xA11CE, participant as u64]));
    Style {
        lift_scale: 1.0 + 0.1 * gaussian(&mut rng).clamp(-2.0, 2.0),
        speed_scale: 1.0 + 0.08 * gaussian(&mut rng).clamp(-2.0, 2.0),
    }
}

fn participant_name(p: usize) -> String {
    format!("p{:02}", p + 1)
}

/// Generates `R` repetitions for every (action, target, participant) tuple.
///
/// Each tuple draws from its own seed-derived stream, so the output does not
/// depend on iteration order.
pub fn synth_generate(config: &SynthConfig) -> Result<DemoSet> {
    if config.actions.is_empty() {
        return Err(Error::invalid(
            "synthetic dataset needs at least one action",
        ));
    }
    if !(config.noise >= 0.0 && config.noise.is_finite()) {
        return Err(Error::invalid("noise level must be >= 0"));
    }
    if config.repetitions < 1 {
        return Err(Error::invalid("repetitions must be >= 1"));
    }
    if let Some(t) = config.targets.iter().find(|t| !t.is_target()) {
        return Err(Error::invalid(format!("{t} is not a grid target")));
    }
    let mut records = Vec::new();
    for &action in &config.actions {
        for &target in &config.targets {
            if action.uses_bowl() && BOWL_EXCLUDED.contains(&target) {
                continue;
            }
            for participant in 0..config.participants {
                let style = participant_style(config.seed, participant);
                let seed = derive_seed(&[
                    config.seed,
                    action as u64,
                    target.col as u64,
                    target.row as u64,
                    participant as u64,
                ]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for rep in 1..=config.repetitions {
                    let trajectory = synth_movement(action, target, style, config.noise, &mut rng)?;
                    let (start, end) = action.endpoints(target);
                    records.push(DemoRecord {
                        trajectory,
                        action,
                        participant: participant_name(participant),
                        start,
                        target: end,
                        repetition: rep,
                    });
                }
            }
        }
    }
    Ok(DemoSet {
        records,
        provenance: Provenance::Synthetic,
    })
}

fn synth_movement(
    action: Action,
    target: GridPos,
    style: Style,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let shape = action_shape(action);
    let target_point = target.to_metric() + Vector3::new(0.0, 0.0, shape.target_height);
    let s_point = Vector3::zeros();
    let (mut start, mut end) = if action.is_reverse() {
        (target_point, s_point)
    } else {
        (s_point, target_point)
    };
    let flat = action.is_flat();
    // Draw every variate even at zero noise so the stream layout is fixed.
    let mut jitter = |scale: f64, vertical: bool| {
        let g = gaussian(rng);
        if vertical && flat {
            0.0
        } else {
            scale * g
        }
    };
    for p in [&mut start, &mut end] {
        p.x += jitter(noise, false);
        p.y += jitter(noise, false);
        p.z += jitter(noise, true);
    }
    let mut wiggle = [[0.0; 3]; 2];
    for mode in wiggle.iter_mut() {
        for (axis, c) in mode.iter_mut().enumerate() {
            *c = jitter(noise, axis == 2);
        }
    }
    let lift = shape.lift * style.lift_scale * (1.0 + 4.0 * jitter(noise, true)).max(0.5);
    let time_factor = (1.0 + 6.0 * jitter(noise, false)).clamp(0.85, 1.15);

    let dist = (end - start).norm();
    let duration = nominal_duration(dist) * style.speed_scale * time_factor;
    let n = ((duration / DEFAULT_DT).round() as usize + 1).max(2);
    let total = (n - 1) as f64 * DEFAULT_DT;
    Trajectory::from_fn(n, DEFAULT_DT, |t| {
        let s = t / total;
        let mut p = start + (end - start) * min_jerk_fraction(s);
        if !flat {
            p.z += lift * lift_bump(s);
        }
        let (s1, s2) = (
            (std::f64::consts::PI * s).sin(),
            (2.0 * std::f64::consts::PI * s).sin(),
        );
        for axis in 0..3 {
            p[axis] += wiggle[0][axis] * s1 + wiggle[1][axis] * s2;
        }
        p
    })
}
