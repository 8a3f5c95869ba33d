//! The `generate`, `track`, `eval`, `ablate` and `bench` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::error::{Error, Result};
use crate::eval::{aggregate, switch_count, BinMetrics, FrameRecord, MetricsReport, Stat};
use crate::eval::{rotation_error, SWITCH_ENTER_DEG, SWITCH_EXIT_DEG};
use crate::geom::{euler_to_rotation, EulerAngles, Pose, Rotation};
use crate::pipeline::config::RunConfig;
use crate::pipeline::tracker::{track_sequence, FrameSource, FrameStatus, StageTimes, TrackOutput};
use crate::pose_queue::filter_trace;
use crate::ray_filter::Distribution;
use crate::geom::StereoRig;
use crate::object::ObjectModel;
use crate::sim::{
    read_poses, write_dataset, write_poses, Dataset, FrameObservation, ManifestEntry, SceneConfig,
};

pub const TRACE_FILE: &str = "trace.txt";
pub const STATUS_FILE: &str = "status.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
/// Frame rate `bench` must sustain.
pub const DEFAULT_FPS_TARGET: f64 = 45.0;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_generate(cfg: &SceneConfig, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    write_dataset(cfg, out_dir)
}

/// Tracks the configured dataset and writes the trace, per-frame status and
/// timing log into `run.out`.
pub fn cmd_track(run: &RunConfig) -> Result<TrackOutput> {
    run.validate()?;
    let ds = Dataset::open(&run.dataset)?;
    create_out(&run.out)?;
    let out = track_sequence(run, &ds, &ds.rig, &ds.model)?;
    write_outputs(&run.out, &out)?;
    Ok(out)
}

pub fn write_outputs(dir: &Path, out: &TrackOutput) -> Result<()> {
    write_poses(&dir.join(TRACE_FILE), &out.poses())?;
    write(&dir.join(STATUS_FILE), &out.status_csv())?;
    write(&dir.join(TIMING_FILE), &out.timing_csv())
}

/// Lost flags from a `status.csv`.
pub fn read_status(path: &Path) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lost = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let status: FrameStatus = line
            .split(',')
            .nth(1)
            .ok_or_else(|| Error::parse(path, format!("line {}: missing status", n + 1)))?
            .parse()
            .map_err(|e: Error| Error::parse(path, format!("line {}: {e}", n + 1)))?;
        lost.push(status == FrameStatus::Lost);
    }
    Ok(lost)
}

/// Frames per second from a timing log: frames over the summed frame times.
pub fn read_timing_fps(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut frames, mut total_ms) = (0usize, 0.0);
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let ms: f64 = line
            .rsplit(',')
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(path, format!("line {}: bad total", n + 1)))?;
        frames += 1;
        total_ms += ms;
    }
    if frames == 0 || !(total_ms > 0.0) {
        return Err(Error::parse(path, "no timed frames"));
    }
    Ok(frames as f64 / (total_ms / 1e3))
}

/// Scores predicted poses against a dataset's ground truth and speed bins.
pub fn evaluate(
    ds: &Dataset,
    preds: &[Pose],
    lost: Option<&[bool]>,
    fps: Option<f64>,
) -> Result<MetricsReport> {
    if preds.len() != ds.len() {
        return Err(Error::LengthMismatch {
            trace: preds.len(),
            dataset: ds.len(),
        });
    }
    if let Some(l) = lost {
        if l.len() != preds.len() {
            return Err(Error::LengthMismatch {
                trace: l.len(),
                dataset: ds.len(),
            });
        }
    }
    let records: Vec<FrameRecord> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| FrameRecord {
            pred: *p,
            gt: ds.poses[i],
            bin: ds.manifest[i].bin,
            lost: lost.is_some_and(|l| l[i]),
        })
        .collect();
    let report = aggregate(&records, &ds.model, &ds.rig.left, fps)?;
    check_report(&report)?;
    Ok(report)
}

/// [`evaluate`] for a run over frames held in memory, with lost flags and
/// frame rate taken from the run itself.
pub fn evaluate_frames(
    frames: &[FrameObservation],
    out: &TrackOutput,
    rig: &StereoRig,
    model: &ObjectModel,
) -> Result<MetricsReport> {
    if out.frames.len() != frames.len() {
        return Err(Error::LengthMismatch {
            trace: out.frames.len(),
            dataset: frames.len(),
        });
    }
    let records: Vec<FrameRecord> = frames
        .iter()
        .zip(&out.frames)
        .map(|(f, r)| FrameRecord {
            pred: r.pose,
            gt: f.gt_pose,
            bin: f.manifest_entry().bin,
            lost: r.status == FrameStatus::Lost,
        })
        .collect();
    let report = aggregate(&records, model, &rig.left, Some(out.fps()))?;
    check_report(&report)?;
    Ok(report)
}

fn check_bin(m: &BinMetrics) -> Result<()> {
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    let stat_ok = |s: &Stat| s.mean.is_finite() && s.stdev.is_finite() && s.stdev >= 0.0;
    if !unit(m.add_recall_01d) || !unit(m.adds_recall_01d) || !unit(m.proj5_rate) {
        return Err(Error::Invariant(format!("rate outside [0, 1] in {m:?}")));
    }
    if m.adds_recall_01d + 1e-12 < m.add_recall_01d {
        return Err(Error::Invariant("ADD-S recall below ADD recall".into()));
    }
    if !stat_ok(&m.e_p) || !stat_ok(&m.e_r) || m.lost_frames > m.frames {
        return Err(Error::Invariant(format!("malformed statistics in {m:?}")));
    }
    Ok(())
}

fn check_report(r: &MetricsReport) -> Result<()> {
    check_bin(&r.overall)?;
    let mut frames = 0;
    for bin in crate::eval::SpeedBin::ALL {
        if let Some(m) = r.bins.get(bin) {
            check_bin(m)?;
            frames += m.frames;
        }
    }
    if frames != r.overall.frames {
        return Err(Error::Invariant(format!(
            "bins hold {frames} frames, overall {}",
            r.overall.frames
        )));
    }
    Ok(())
}

/// Where `cmd_eval` reads and writes.
#[derive(Debug, Clone)]
pub struct EvalPaths {
    pub dataset: PathBuf,
    pub trace: PathBuf,
    /// Lost flags; frames count as tracked when absent.
    pub status: Option<PathBuf>,
    /// Adds an `fps` field to the report when given.
    pub timing: Option<PathBuf>,
    pub out: PathBuf,
}

impl EvalPaths {
    /// Trace and status from a `track` output directory.
    pub fn from_track_dir(dataset: &Path, track_dir: &Path, out: &Path) -> Self {
        let status = track_dir.join(STATUS_FILE);
        Self {
            dataset: dataset.to_path_buf(),
            trace: track_dir.join(TRACE_FILE),
            status: status.exists().then_some(status),
            timing: None,
            out: out.to_path_buf(),
        }
    }
}

/// Writes `report.json` and `report.csv`.
pub fn cmd_eval(paths: &EvalPaths) -> Result<MetricsReport> {
    let ds = Dataset::open(&paths.dataset)?;
    let preds = read_poses(&paths.trace)?;
    let lost = paths.status.as_deref().map(read_status).transpose()?;
    let fps = paths.timing.as_deref().map(read_timing_fps).transpose()?;
    let report = evaluate(&ds, &preds, lost.as_deref(), fps)?;
    create_out(&paths.out)?;
    write(&paths.out.join(REPORT_JSON), &report.to_json())?;
    write(&paths.out.join(REPORT_CSV), &report.to_csv())?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    AmqN,
    Distribution,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amq_n" => Ok(AblationAxis::AmqN),
            "distribution" => Ok(AblationAxis::Distribution),
            _ => Err(Error::InvalidParameter(format!("unknown ablation axis {s:?}"))),
        }
    }
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::AmqN => "amq_n",
            AblationAxis::Distribution => "distribution",
        }
    }

    /// One run configuration per setting, labelled.
    pub fn settings(self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        match self {
            AblationAxis::AmqN => (0..=4)
                .map(|n| {
                    let mut c = base.clone();
                    c.amq.n = n;
                    (n.to_string(), c)
                })
                .collect(),
            AblationAxis::Distribution => Distribution::ALL
                .into_iter()
                .map(|d| {
                    let mut c = base.clone();
                    c.rpf.distribution = d;
                    (d.name().to_string(), c)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub setting: String,
    pub metrics: BinMetrics,
}

pub fn ablation_csv(axis: AblationAxis, rows: &[AblationRow]) -> String {
    let mut s = format!(
        "{},frames,lost_frames,add_recall_01d,adds_recall_01d,e_p_mean,e_r_mean,switch,proj5\n",
        axis.name()
    );
    for r in rows {
        let m = &r.metrics;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.setting,
            m.frames,
            m.lost_frames,
            m.add_recall_01d,
            m.adds_recall_01d,
            m.e_p.mean,
            m.e_r.mean,
            m.switch_count,
            m.proj5_rate
        )
        .unwrap();
    }
    s
}

/// Runs the pipeline once per setting of `axis` over the dataset and writes
/// `ablation_<axis>.csv` into `base.out`.
pub fn cmd_ablate(base: &RunConfig, axis: AblationAxis) -> Result<Vec<AblationRow>> {
    base.validate()?;
    let ds = Dataset::open(&base.dataset)?;
    let mut rows = Vec::new();
    for (setting, cfg) in axis.settings(base) {
        let out = track_sequence(&cfg, &ds, &ds.rig, &ds.model)?;
        let lost = out.lost_flags();
        let report = evaluate(&ds, &out.poses(), Some(&lost), None)?;
        rows.push(AblationRow {
            setting,
            metrics: report.overall,
        });
    }
    create_out(&base.out)?;
    write(
        &base.out.join(format!("ablation_{}.csv", axis.name())),
        &ablation_csv(axis, &rows),
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub frames: usize,
    pub fps: f64,
    /// Mean seconds per frame for each stage.
    pub mean: StageTimes,
    pub target: f64,
}

impl BenchReport {
    pub fn from_output(out: &TrackOutput, target: f64) -> Self {
        let n = out.frames.len().max(1) as f64;
        let t = out.stage_totals();
        let v = t.values().map(|x| x / n);
        Self {
            frames: out.frames.len(),
            fps: out.fps(),
            mean: StageTimes {
                io: v[0],
                vision: v[1],
                m3d: v[2],
                amq: v[3],
                sample: v[4],
                score: v[5],
                refine: v[6],
                total: v[7],
            },
            target,
        }
    }

    pub fn passed(&self) -> bool {
        self.fps >= self.target
    }

    /// Stage with the largest mean time, excluding the total.
    pub fn dominant_stage(&self) -> &'static str {
        let v = self.mean.values();
        let k = (0..7).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
        StageTimes::NAMES[k]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "frames {}", self.frames).unwrap();
        let v = self.mean.values();
        for (name, x) in StageTimes::NAMES.iter().zip(v) {
            let share = 100.0 * x / v[7].max(1e-12);
            writeln!(s, "{name:>7} {:8.3} ms {share:5.1}%", x * 1e3).unwrap();
        }
        writeln!(s, "dominant stage {}", self.dominant_stage()).unwrap();
        writeln!(
            s,
            "fps {:.1} (target {}) {}",
            self.fps,
            self.target,
            if self.passed() { "PASS" } else { "FAIL" }
        )
        .unwrap();
        s
    }
}

/// End-to-end throughput of `track` on a sequence, including frame loading.
pub fn cmd_bench<S: FrameSource + ?Sized>(
    run: &RunConfig,
    src: &S,
    rig: &crate::geom::StereoRig,
    model: &crate::object::ObjectModel,
    target: f64,
) -> Result<(TrackOutput, BenchReport)> {
    let out = track_sequence(run, src, rig, model)?;
    let report = BenchReport::from_output(&out, target);
    Ok((out, report))
}

/// One row of the pose-queue flip ablation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipRow {
    pub n: usize,
    pub switch: usize,
    /// Mean rotation error in degrees.
    pub e_r: f64,
}

/// Frames at which the flip trace is rotated by 180°.
pub const FLIP_FRAMES: [usize; 5] = [40, 95, 150, 205, 260];

/// Ground truth and raw per-frame estimates for the flip ablation: a slowly
/// drifting orientation observed with 1° Euler noise, with single-frame 180°
/// flips about the camera axis at [`FLIP_FRAMES`].
pub fn flip_trace(frames: usize, seed: u64) -> (Vec<Rotation>, Vec<Rotation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1f64.to_radians()).unwrap();
    let mut gt = Vec::with_capacity(frames);
    let mut raw = Vec::with_capacity(frames);
    for i in 0..frames {
        let e = EulerAngles::new(0.3, -0.2, 0.5 + 1e-4 * i as f64);
        let truth = euler_to_rotation(&e);
        let noisy = euler_to_rotation(&EulerAngles::new(
            e.roll + noise.sample(&mut rng),
            e.pitch + noise.sample(&mut rng),
            e.yaw + noise.sample(&mut rng),
        ));
        let est = if FLIP_FRAMES.contains(&i) {
            Rotation::rz(std::f64::consts::PI) * noisy
        } else {
            noisy
        };
        gt.push(truth);
        raw.push(est);
    }
    (gt, raw)
}

/// Filters the flip trace with queue capacities 0 to 4 and reports the
/// switch count and mean rotation error of each. No symmetry reduction
/// applies, so a flip counts as a 180° error.
pub fn amq_flip_ablation(frames: usize, alpha: f64, seed: u64) -> Result<Vec<FlipRow>> {
    let (gt, raw) = flip_trace(frames, seed);
    (0..=4)
        .map(|n| {
            let filtered = filter_trace(&raw, n, alpha)?;
            let switch = switch_count(&filtered, &gt, &[], SWITCH_ENTER_DEG, SWITCH_EXIT_DEG)?;
            let e_r = filtered
                .iter()
                .zip(&gt)
                .map(|(p, g)| rotation_error(p, g, &[]).to_degrees())
                .sum::<f64>()
                / frames as f64;
            Ok(FlipRow { n, switch, e_r })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_ablation_shape() {
        let rows = amq_flip_ablation(300, 0.5, 1).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0].switch, 5);
    }

    #[test]
    fn ablation_settings() {
        let base = RunConfig::default();
        assert_eq!(AblationAxis::AmqN.settings(&base).len(), 5);
        let d = AblationAxis::Distribution.settings(&base);
        assert_eq!(d.len(), 4);
        assert_eq!(d[1].0, "gaussian");
    }
}
