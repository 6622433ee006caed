//! Evaluation: temporal PSD, Q-Q data, extreme-day counts and report files.

mod metrics;
mod psd;
mod report;
pub mod svg;

pub use metrics::{daily_percentile, daily_totals, extreme_day_count, qq_data, ExtremeCount, QqData};
pub use psd::{mean_periodogram, temporal_psd, temporal_psd_cells, PsdCurve};
pub use report::{emit_report, EvalReport};

/// Default daily threshold for extreme precipitation, mm/day.
pub const EXTREME_THRESHOLD_MM: f64 = 20.0;
/// Default PSD segment length in steps.
pub const PSD_SEGMENT: usize = 256;
