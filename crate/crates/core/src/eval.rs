//! Tracking metrics: ADD/ADD-S, translation and rotation errors, orientation
//! switches, center reprojection rate, and their per-speed-bin aggregation.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{geodesic_angle, project, CameraIntrinsics, Pose, Rotation};
use crate::object::ObjectModel;

/// Speed bins by projected pixel velocity: below 45 px/s, below 180 px/s, and above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedBin {
    Regular,
    Medium,
    Faster,
}

impl SpeedBin {
    pub const ALL: [SpeedBin; 3] = [SpeedBin::Regular, SpeedBin::Medium, SpeedBin::Faster];
    pub const MEDIUM_FROM: f64 = 45.0;
    pub const FASTER_FROM: f64 = 180.0;

    pub fn from_velocity(v: f64) -> Self {
        if v < Self::MEDIUM_FROM {
            SpeedBin::Regular
        } else if v < Self::FASTER_FROM {
            SpeedBin::Medium
        } else {
            SpeedBin::Faster
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpeedBin::Regular => "regular",
            SpeedBin::Medium => "medium",
            SpeedBin::Faster => "faster",
        }
    }
}

impl fmt::Display for SpeedBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpeedBin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown speed bin {s:?}")))
    }
}

/// Mean distance between corresponding model points under the two poses.
pub fn add(pred: &Pose, gt: &Pose, model: &ObjectModel) -> Result<f64> {
    if model.is_empty() {
        return Err(Error::EmptyModel);
    }
    let total: f64 = model
        .points()
        .iter()
        .map(|x| (pred.transform(x) - gt.transform(x)).norm())
        .sum();
    Ok(total / model.len() as f64)
}

/// ADD against the closest symmetric equivalent of `pred`.
pub fn add_s(pred: &Pose, gt: &Pose, model: &ObjectModel) -> Result<f64> {
    let mut best = f64::INFINITY;
    for g in model.symmetry_group() {
        let p = Pose::new(pred.rotation * *g, pred.center);
        best = best.min(add(&p, gt, model)?);
    }
    Ok(best)
}

/// Geodesic angle to the closest symmetric equivalent, in radians.
pub fn rotation_error(pred: &Rotation, gt: &Rotation, symmetry: &[Rotation]) -> f64 {
    if symmetry.is_empty() {
        return geodesic_angle(pred, gt);
    }
    symmetry
        .iter()
        .map(|g| geodesic_angle(&(pred * g), gt))
        .fold(f64::INFINITY, f64::min)
}

/// Share of distances strictly below `fraction · diameter`.
pub fn recall_at(distances: &[f64], diameter: f64, fraction: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(diameter > 0.0) {
        return Err(Error::InvalidParameter(format!("diameter {diameter}")));
    }
    let limit = fraction * diameter;
    let hits = distances.iter().filter(|&&d| d < limit).count();
    Ok(hits as f64 / distances.len() as f64)
}

/// Per-frame switch events of a hysteresis automaton over errors in
/// degrees: it fires when the error reaches `enter` while armed, and re-arms
/// once the error drops below `exit`. The sequence starts armed.
pub fn switch_events(errors_deg: &[f64], enter: f64, exit: f64) -> Vec<bool> {
    let mut armed = true;
    errors_deg
        .iter()
        .map(|&e| {
            if armed && e >= enter {
                armed = false;
                true
            } else {
                if e < exit {
                    armed = true;
                }
                false
            }
        })
        .collect()
}

pub fn switch_count(
    preds: &[Rotation],
    gts: &[Rotation],
    symmetry: &[Rotation],
    enter: f64,
    exit: f64,
) -> Result<usize> {
    if preds.len() != gts.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} predictions for {} ground-truth rotations",
            preds.len(),
            gts.len()
        )));
    }
    let errors: Vec<f64> = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| rotation_error(p, g, symmetry).to_degrees())
        .collect();
    Ok(switch_events(&errors, enter, exit).iter().filter(|&&s| s).count())
}

fn center_within(pred: &Pose, gt: &Pose, k: &CameraIntrinsics, tol: f64) -> bool {
    match (project(k, &pred.center), project(k, &gt.center)) {
        (Ok(a), Ok(b)) => (a.u - b.u).hypot(a.v - b.v) <= tol,
        _ => false,
    }
}

/// Share of frames whose projected centers lie within `tol` pixels.
pub fn proj_at(preds: &[Pose], gts: &[Pose], k: &CameraIntrinsics, tol: f64) -> Result<f64> {
    if preds.len() != gts.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} predictions for {} ground-truth poses",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptySequence);
    }
    let hits = preds
        .iter()
        .zip(gts)
        .filter(|(p, g)| center_within(p, g, k, tol))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub pred: Pose,
    pub gt: Pose,
    pub bin: SpeedBin,
    pub lost: bool,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stdev: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat {
            mean,
            stdev: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    pub frames: usize,
    pub lost_frames: usize,
    pub add_recall_01d: f64,
    pub adds_recall_01d: f64,
    pub e_p: Stat,
    pub e_r: Stat,
    pub switch_count: usize,
    pub proj5_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BinTable {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regular: Option<BinMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub medium: Option<BinMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub faster: Option<BinMetrics>,
}

impl BinTable {
    pub fn get(&self, bin: SpeedBin) -> Option<&BinMetrics> {
        match bin {
            SpeedBin::Regular => self.regular.as_ref(),
            SpeedBin::Medium => self.medium.as_ref(),
            SpeedBin::Faster => self.faster.as_ref(),
        }
    }

    fn slot(&mut self, bin: SpeedBin) -> &mut Option<BinMetrics> {
        match bin {
            SpeedBin::Regular => &mut self.regular,
            SpeedBin::Medium => &mut self.medium,
            SpeedBin::Faster => &mut self.faster,
        }
    }
}

/// Metrics over a whole run and per populated speed bin. `e_p` is in
/// centimeters, `e_r` in degrees (symmetry-reduced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: BinMetrics,
    pub bins: BinTable,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fps: Option<f64>,
}

pub const SWITCH_ENTER_DEG: f64 = 90.0;
pub const SWITCH_EXIT_DEG: f64 = 45.0;
pub const PROJ_TOLERANCE_PX: f64 = 5.0;
pub const RECALL_FRACTION: f64 = 0.1;

struct PerFrame {
    add: f64,
    adds: f64,
    e_p: f64,
    e_r: f64,
    switch: bool,
    proj: bool,
    lost: bool,
}

fn summarize(rows: &[&PerFrame], diameter: f64) -> Result<BinMetrics> {
    let pick = |f: fn(&PerFrame) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let adds = pick(|r| r.add);
    let addss = pick(|r| r.adds);
    Ok(BinMetrics {
        frames: rows.len(),
        lost_frames: rows.iter().filter(|r| r.lost).count(),
        add_recall_01d: recall_at(&adds, diameter, RECALL_FRACTION)?,
        adds_recall_01d: recall_at(&addss, diameter, RECALL_FRACTION)?,
        e_p: Stat::of(&pick(|r| r.e_p)),
        e_r: Stat::of(&pick(|r| r.e_r)),
        switch_count: rows.iter().filter(|r| r.switch).count(),
        proj5_rate: rows.iter().filter(|r| r.proj).count() as f64 / rows.len() as f64,
    })
}

/// Aggregates per-frame records. Switch events are attributed to the bin of
/// the frame where they fire; bins without frames are left out.
pub fn aggregate(
    records: &[FrameRecord],
    model: &ObjectModel,
    k: &CameraIntrinsics,
    fps: Option<f64>,
) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        rows.push(PerFrame {
            add: add(&r.pred, &r.gt, model)?,
            adds: add_s(&r.pred, &r.gt, model)?,
            e_p: 100.0 * (r.pred.center - r.gt.center).norm(),
            e_r: rotation_error(&r.pred.rotation, &r.gt.rotation, model.symmetry_group())
                .to_degrees(),
            switch: false,
            proj: center_within(&r.pred, &r.gt, k, PROJ_TOLERANCE_PX),
            lost: r.lost,
        });
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.e_r).collect();
    for (row, s) in rows
        .iter_mut()
        .zip(switch_events(&errors, SWITCH_ENTER_DEG, SWITCH_EXIT_DEG))
    {
        row.switch = s;
    }
    let d = model.diameter();
    let all: Vec<&PerFrame> = rows.iter().collect();
    let mut bins = BinTable::default();
    for bin in SpeedBin::ALL {
        let members: Vec<&PerFrame> = rows
            .iter()
            .zip(records)
            .filter(|(_, r)| r.bin == bin)
            .map(|(row, _)| row)
            .collect();
        if !members.is_empty() {
            *bins.slot(bin) = Some(summarize(&members, d)?);
        }
    }
    Ok(MetricsReport {
        overall: summarize(&all, d)?,
        bins,
        fps,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("report JSON: {e}")))
    }

    /// Flat `bin,metric,mean,stdev` table; counts and rates leave `stdev` empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,metric,mean,stdev\n");
        let mut emit = |name: &str, m: &BinMetrics| {
            writeln!(s, "{name},frames,{},", m.frames).unwrap();
            writeln!(s, "{name},lost_frames,{},", m.lost_frames).unwrap();
            writeln!(s, "{name},add_recall_01d,{},", m.add_recall_01d).unwrap();
            writeln!(s, "{name},adds_recall_01d,{},", m.adds_recall_01d).unwrap();
            writeln!(s, "{name},e_p_cm,{},{}", m.e_p.mean, m.e_p.stdev).unwrap();
            writeln!(s, "{name},e_r_deg,{},{}", m.e_r.mean, m.e_r.stdev).unwrap();
            writeln!(s, "{name},switch_count,{},", m.switch_count).unwrap();
            writeln!(s, "{name},proj5_rate,{},", m.proj5_rate).unwrap();
        };
        for bin in SpeedBin::ALL {
            if let Some(m) = self.bins.get(bin) {
                emit(bin.name(), m);
            }
        }
        emit("overall", &self.overall);
        if let Some(fps) = self.fps {
            writeln!(s, "overall,fps,{fps},").unwrap();
        }
        s
    }
}
