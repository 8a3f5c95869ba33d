use crate::error::{Error, Result};
use crate::vision::{Event, EventBatch, GrayFrame};

/// Intensities are floored here before taking logarithms.
const LOG_FLOOR: f64 = 1e-3;

/// Idealized event sensor between two frames: each pixel fires
/// `⌊|Δ log I| / threshold⌋` events of the change's sign, spread evenly over
/// the interval `(prev.t, next.t]`.
pub fn synthesize_events(prev: &GrayFrame, next: &GrayFrame, threshold: f64) -> Result<EventBatch> {
    if !prev.same_geometry(next) {
        return Err(Error::GeometryMismatch("event frames differ in size".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("event threshold {threshold}")));
    }
    let (w, h) = (prev.width(), prev.height());
    if w > u16::MAX as usize + 1 || h > u16::MAX as usize + 1 {
        return Err(Error::InvalidParameter(format!("{w}x{h} sensor too large for events")));
    }
    let dt = next.timestamp - prev.timestamp;
    let log = |v: f32| (v as f64).max(LOG_FLOOR).ln();
    let mut events = Vec::new();
    for (i, (&a, &b)) in prev.pixels().iter().zip(next.pixels()).enumerate() {
        let delta = log(b) - log(a);
        // slack for values that went through f32 storage
        let k = (delta.abs() / threshold + 1e-6).floor() as usize;
        if k == 0 {
            continue;
        }
        let polarity = if delta > 0.0 { 1 } else { -1 };
        let (x, y) = ((i % w) as u16, (i / w) as u16);
        for m in 1..=k {
            events.push(Event {
                x,
                y,
                t: prev.timestamp + dt * m as f64 / k as f64,
                polarity,
            });
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    EventBatch::new(events, w, h)
}
