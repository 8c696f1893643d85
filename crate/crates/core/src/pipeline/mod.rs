//! Run descriptions, file formats, connectome preprocessing and the
//! experiment drivers used by the command-line tool.

pub mod config;
pub mod connectome;
pub mod experiments;
pub mod io;

pub use config::{ExperimentConfig, FrequencySpec};
pub use connectome::{preprocess_connectome, synthetic_connectome, Connectome, SyntheticSpec};
pub use experiments::{
    brain_experiment, practical_sweep, run_example, BrainConfig, BrainOutputs, ExampleId, Scenario,
};
