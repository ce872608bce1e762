//! Configuration files, result tables and field snapshots.

pub mod config;
pub mod output;
pub mod snapshot;

pub use config::{parse_config, parse_unresolved, ConfigError, ExperimentKind, RunConfig};
pub use output::{fmt_f64, write_atomic, CsvTable, RunDir};
pub use snapshot::{read_snapshot, write_snapshot, FieldSnapshot, SnapshotError};
