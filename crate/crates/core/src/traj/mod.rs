//! Trajectory data model, filtering, datasets and the synthetic generator.

mod dataset;
mod filter;
mod grid;
mod synth;
mod trajectory;

pub use dataset::{
    load_dataset, load_trajectory_csv, save_dataset, save_trajectory_csv, DemoRecord, DemoSet,
    Provenance, MANIFEST_NAME,
};
pub use filter::lowpass_filter;
pub use grid::{Action, GridPos, BOWL_EXCLUDED, GRID_SPACING, GRID_TARGETS};
pub use synth::{min_jerk_fraction, min_jerk_trajectory, synth_generate, SynthConfig};
pub use trajectory::{FrameTransform, Trajectory, DEFAULT_DT};
