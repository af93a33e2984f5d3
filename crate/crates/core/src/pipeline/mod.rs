//! Experiment-level analyses built from the lower modules: multi-field Zeeman
//! extraction of (g, f0, J_ex), spatial scans and seeded end-to-end runs.
//!
//! Analyses only ever see the commanded field B_set; tip field and magnet
//! hysteresis stay hidden inside the instrument model.

mod config;
mod roundtrip;
mod spatial;
mod zeeman;

pub use config::{
    AnalysisConfig, Envelope, Envelopes, ExperimentConfig, FieldSweep, NoiseConfig, SpatialConfig,
    SpatialGrid, Weighting,
};
pub use roundtrip::{
    roundtrip_experiment, synthesize_series, CalibrationSummary, Check, Conventions, ExperimentReport, Provenance,
    StageRecord, StageStatus,
};
pub use spatial::{spatial_scan, SpatialPoint};
pub use zeeman::{peak_row, zeeman_analysis, zeeman_from_peaks, Excluded, PeakRow, ZeemanResult};
