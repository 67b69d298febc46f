//! Metrics, trace replay, threshold sweeps and latency benchmarks.

pub mod bench;
pub mod events;
pub mod metrics;
pub mod replay;
pub mod sweep;

pub use bench::{run_bench, BenchConfig, BenchReport};
pub use events::{match_events, onsets_from_flags, quiescent_mask, EventConfig, EventMatch, Onset, QuiescentSpec};
pub use metrics::{Confusion, EvalReport, EventCounts};
pub use replay::{replay, replay_sim_run, Detection, ReplayConfig, ReplayOutput, SimReplay};
pub use sweep::{sweep, LabeledTrace, SweepGrid, SweepRow};
