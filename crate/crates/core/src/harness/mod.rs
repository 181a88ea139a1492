//! Configuration, sessions, parameter sweeps and reports.

pub mod config;
pub mod session;
pub mod sweep;

pub use config::{DemandSpec, SessionConfig};
pub use session::{random_valid_demand, report_json, run_session, run_session_full, SessionReport, SessionRun};
pub use sweep::{parse_csv, rates_row, sweep, to_csv, verify_row, SweepRow, CSV_HEADER};
