//! Experiment driver, metrics and file I/O.

pub mod experiments;
pub mod io;
pub mod metrics;

pub use experiments::{
    default_gammas, detect_sequence, energy_polar, roc_sweep, run_frames, track_directions, tuning_response,
    tuning_sweep, RocSweep, TuningMetric, TuningStimulus, TuningVar,
};
pub use metrics::{tpr_at_fpr, tpr_fpr, weber_contrast, DetectionCounts, RocPoint};
