//! Frame-level feature machinery: image pyramids, sparse pyramidal
//! Lucas–Kanade flow, feature seeding and event accumulation.

mod events;
mod frame;
mod lk;
mod pyramid;
mod seeds;

pub use events::{accumulate_events, Event, EventBatch};
pub use frame::{timestamp_from_pgm_name, timestamped_pgm_name, GrayFrame};
pub use lk::{forward_backward_check, lk_track, LkParams, TrackStatus, TrackedPointSet};
pub use pyramid::{build_pyramid, Pyramid};
pub use seeds::{binomial_blur, gradient_magnitude, refine_to_peaks, seed_points};
