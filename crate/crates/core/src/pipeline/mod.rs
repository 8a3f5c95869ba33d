//! End-to-end orchestration: run configuration, the tracking loop and the
//! command implementations behind the `raytrack` binary.

mod commands;
mod config;
mod tracker;

pub use commands::{
    ablation_csv, amq_flip_ablation, cmd_ablate, cmd_bench, cmd_eval, cmd_generate, cmd_track,
    evaluate, evaluate_frames, flip_trace, read_status, read_timing_fps, write_outputs, AblationAxis, AblationRow,
    BenchReport, EvalPaths, FlipRow, DEFAULT_FPS_TARGET, FLIP_FRAMES, REPORT_CSV, REPORT_JSON,
    STATUS_FILE, TIMING_FILE, TRACE_FILE,
};
pub use config::{AmqConfig, Config, M3dConfig, Modalities, Modality, RpfConfig, RunConfig};
pub use tracker::{
    track_sequence, FrameResult, FrameSource, FrameStatus, StageTimes, TrackOutput, Tracker,
};
