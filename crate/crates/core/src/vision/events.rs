use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vision::GrayFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: f64,
    pub polarity: i8,
}

/// Time-ordered events from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    events: Vec<Event>,
    width: usize,
    height: usize,
}

impl EventBatch {
    pub fn new(events: Vec<Event>, width: usize, height: usize) -> Result<Self> {
        if events.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidParameter("events are not time-sorted".into()));
        }
        if let Some(e) = events
            .iter()
            .find(|e| e.x as usize >= width || e.y as usize >= height)
        {
            return Err(Error::InvalidParameter(format!(
                "event at ({}, {}) outside {width}x{height} sensor",
                e.x, e.y
            )));
        }
        if let Some(e) = events.iter().find(|e| e.polarity != 1 && e.polarity != -1) {
            return Err(Error::InvalidParameter(format!("polarity {}", e.polarity)));
        }
        Ok(Self {
            events,
            width,
            height,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            events: Vec::new(),
            width,
            height,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// CSV with header `x,y,t,p`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(16 * self.events.len() + 8);
        s.push_str("x,y,t,p\n");
        for e in &self.events {
            writeln!(s, "{},{},{},{}", e.x, e.y, e.t, e.polarity).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str, width: usize, height: usize, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("x,y,t,p") => {}
            other => {
                return Err(Error::parse(path, format!("bad event header {other:?}")));
            }
        }
        let mut events = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::parse(path, format!("line {}: {line:?}", n + 2));
            let mut f = line.split(',');
            let mut field = || f.next().ok_or_else(bad);
            let x = field()?.trim().parse().map_err(|_| bad())?;
            let y = field()?.trim().parse().map_err(|_| bad())?;
            let t = field()?.trim().parse().map_err(|_| bad())?;
            let polarity = field()?.trim().parse().map_err(|_| bad())?;
            events.push(Event { x, y, t, polarity });
        }
        Self::new(events, width, height).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path, width: usize, height: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, width, height, path)
    }
}

/// Counts events with `t ∈ (at − window, at]` per pixel, ignoring polarity,
/// and scales by the 99th percentile of the nonzero counts (clipped to 1).
pub fn accumulate_events(batch: &EventBatch, window: f64, at: f64) -> GrayFrame {
    let (w, h) = (batch.width(), batch.height());
    let mut counts = vec![0u32; w * h];
    let lo = at - window;
    let events = batch.events();
    let start = events.partition_point(|e| e.t <= lo);
    for e in events[start..].iter().take_while(|e| e.t <= at) {
        counts[e.y as usize * w + e.x as usize] += 1;
    }
    let mut nonzero: Vec<u32> = counts.iter().copied().filter(|&c| c > 0).collect();
    if nonzero.is_empty() {
        return GrayFrame::filled(w, h, 0.0, at);
    }
    nonzero.sort_unstable();
    let rank = ((0.99 * nonzero.len() as f64).ceil() as usize).clamp(1, nonzero.len());
    let scale = nonzero[rank - 1] as f32;
    GrayFrame::from_fn(w, h, at, |x, y| (counts[y * w + x] as f32 / scale).min(1.0))
}
