//! Shared fixtures for the criterion benchmarks.

use trajbench_core::traj::{synth_generate, Action, GridPos, SynthConfig};
use trajbench_core::DemoRecord;

/// Three noisy repetitions of each of two neighbouring pick-and-place targets.
pub fn pick_and_place_demos(seed: u64) -> Vec<DemoRecord> {
    let cfg = SynthConfig {
        actions: vec![Action::PickAndPlace],
        targets: vec![GridPos::new(1, 0), GridPos::new(1, 1)],
        seed,
        ..SynthConfig::default()
    };
    synth_generate(&cfg)
        .expect("valid synthetic config")
        .records
}
