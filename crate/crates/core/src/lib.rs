//! Planning-then-populating simulator for long autoregressive sequences.
//!
//! * [`layout`]: segment layouts, chaining modes and the global timeline.
//! * [`toygen`]: a synthetic generator whose drift is known in closed form.
//! * [`drift`]: behaviour-cloning regret and autoregressive-vs-planned drift.
//! * [`pipeline`]: the planning/populating task graph.
//! * [`scheduler`]: multi-worker list scheduling, optimal oracle, memory and Gantt output.

pub mod drift;
pub mod layout;
pub mod pipeline;
pub mod scheduler;
pub mod toygen;

pub use layout::{ChainingMode, GlobalFrameIndex, LayoutError, MacroLayout, SegmentLayout, TimelineMap};
pub use pipeline::{build_dag, critical_path, validate_dag, CostModel, TaskGraph, TaskId, TaskKind, TaskNode};
pub use scheduler::{
    brute_force_schedule, gantt_export, list_schedule, memory_profile, segment_latencies, speedup_curve, Schedule,
    ScheduleEntry, ScheduleError, SchedulerPolicy,
};
pub use toygen::{GroundTruth, LatentFrame, NoiseModel, ToyGenerator};
