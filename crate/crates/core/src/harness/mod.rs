//! Training x inference strategy grids: configuration, execution and
//! reports. A "trained model" is a backend endpoint; nothing is trained here.

mod config;
mod matrix;
mod report;

pub use config::{BackendSpec, RunConfig, ScriptSource};
pub use matrix::{
    run_inference, run_matrix, Cell, CellManifest, DataManifest, InferenceManifest, Inputs, MatrixResult,
};
pub use report::{
    best_inference, emit_report, emit_run_artifacts, render_table, ReportFormat, RunRecord, METRIC_NAMES,
};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PARTIAL: i32 = 3;
    pub const TOTAL: i32 = 4;
}
