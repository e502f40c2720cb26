//! Metrics, ablation sweeps and the command-line front end.

pub mod cli;
mod configfile;
mod metrics;
mod sweep;

pub use configfile::{apply_config_text, read_config_file};
pub use metrics::{compute_metrics, evaluate_video, video_confusion, ConfusionMatrix, MetricsReport};
pub use sweep::{run_sweep, GridPoint, SweepAxis, SweepRow};
