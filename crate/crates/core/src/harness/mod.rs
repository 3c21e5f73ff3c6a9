//! Experiment driver: configs, presets, seeded runs, trajectory logging,
//! k sweeps and the bundled reproduction recipes.

pub mod config;
pub mod output;
pub mod presets;
pub mod quadratics;
pub mod replicate;
pub mod run;
pub mod sweep;

pub use config::{ProblemSpec, RunConfig, Source, TrackerSpec, Wrapper};
pub use output::write_run;
pub use presets::{preset, problem_preset};
pub use replicate::{replicate, Manifest, RECIPES};
pub use run::{
    median, run, run_many, run_seeds, Row, RunMetadata, RunOutput, Series, Trajectory, CSV_HEADER,
};
pub use sweep::{sweep_k, SweepTable};
