//! Sequence generation and the on-disk dataset layout:
//!
//! ```text
//! manifest              idx,t,bin,v per frame
//! poses.txt             12 values per frame, row-major [R | t]
//! frames/{L,R}_%06d.pgm
//! events/{L,R}_%06d.csv
//! model.txt
//! rig.txt               key = value camera parameters
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::SpeedBin;
use crate::geom::{CameraIntrinsics, Eye, Pose, StereoRig};
use crate::object::ObjectModel;
use crate::sim::render::{render_frame, Background};
use crate::sim::{pixel_velocity, synthesize_events, trajectory_pose, SceneConfig};
use crate::vision::{EventBatch, GrayFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub index: usize,
    pub timestamp: f64,
    pub left: GrayFrame,
    pub right: GrayFrame,
    /// Events since the previous frame; empty for the first frame.
    pub left_events: EventBatch,
    pub right_events: EventBatch,
    pub gt_pose: Pose,
    pub pixel_velocity: f64,
    /// The object fell outside at least one eye's image.
    pub empty_render: bool,
}

impl FrameObservation {
    pub fn frame(&self, eye: Eye) -> &GrayFrame {
        match eye {
            Eye::Left => &self.left,
            Eye::Right => &self.right,
        }
    }

    pub fn events(&self, eye: Eye) -> &EventBatch {
        match eye {
            Eye::Left => &self.left_events,
            Eye::Right => &self.right_events,
        }
    }

    pub fn manifest_entry(&self) -> ManifestEntry {
        ManifestEntry {
            idx: self.index,
            t: self.timestamp,
            bin: SpeedBin::from_velocity(self.pixel_velocity),
            v: self.pixel_velocity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifestEntry {
    pub idx: usize,
    pub t: f64,
    pub bin: SpeedBin,
    pub v: f64,
}

/// Renders a scene frame by frame, carrying the previous frames for event synthesis.
pub struct Generator {
    cfg: SceneConfig,
    background: Background,
    previous: Option<(GrayFrame, GrayFrame)>,
    next: usize,
}

impl Generator {
    pub fn new(cfg: SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let background = Background::for_scene(&cfg);
        Ok(Self {
            cfg,
            background,
            previous: None,
            next: 0,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.cfg.frame_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn render(&mut self, index: usize) -> Result<FrameObservation> {
        let t = self.cfg.timestamp(index);
        let gt_pose = trajectory_pose(&self.cfg, t)?;
        let left = render_frame(&self.cfg, &self.background, &gt_pose, Eye::Left, index)?;
        let right = render_frame(&self.cfg, &self.background, &gt_pose, Eye::Right, index)?;
        let (w, h) = (left.frame.width(), left.frame.height());
        let th = self.cfg.event_threshold;
        let (left_events, right_events) = match &self.previous {
            Some((pl, pr)) => (
                synthesize_events(pl, &left.frame, th)?,
                synthesize_events(pr, &right.frame, th)?,
            ),
            None => (EventBatch::empty(w, h), EventBatch::empty(w, h)),
        };
        self.previous = Some((left.frame.clone(), right.frame.clone()));
        Ok(FrameObservation {
            index,
            timestamp: t,
            left: left.frame,
            right: right.frame,
            left_events,
            right_events,
            gt_pose,
            pixel_velocity: pixel_velocity(&self.cfg, t)?,
            empty_render: left.empty || right.empty,
        })
    }
}

impl Iterator for Generator {
    type Item = Result<FrameObservation>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.len() {
            return None;
        }
        let i = self.next;
        self.next += 1;
        Some(self.render(i))
    }
}

/// Renders the whole sequence in memory. Long sequences are better streamed
/// through [`Generator`] or [`write_dataset`].
pub fn generate(cfg: &SceneConfig) -> Result<(Vec<FrameObservation>, Vec<ManifestEntry>)> {
    let frames: Vec<FrameObservation> = Generator::new(cfg.clone())?.collect::<Result<_>>()?;
    let manifest = frames.iter().map(FrameObservation::manifest_entry).collect();
    Ok((frames, manifest))
}

fn frame_path(dir: &Path, eye: Eye, index: usize) -> PathBuf {
    dir.join("frames").join(format!("{}_{index:06}.pgm", eye.tag()))
}

fn events_path(dir: &Path, eye: Eye, index: usize) -> PathBuf {
    dir.join("events").join(format!("{}_{index:06}.csv", eye.tag()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        return Ok(());
    }
    fs::create_dir(path).map_err(|e| Error::io(path, e))
}

/// Streams the scene to `dir`. The directory itself may be created but its
/// parent must exist. Returns the manifest.
pub fn write_dataset(cfg: &SceneConfig, dir: &Path) -> Result<Vec<ManifestEntry>> {
    let generator = Generator::new(cfg.clone())?;
    ensure_dir(dir)?;
    ensure_dir(&dir.join("frames"))?;
    ensure_dir(&dir.join("events"))?;
    cfg.model.save(&dir.join("model.txt"))?;
    write(&dir.join("rig.txt"), &rig_to_text(&cfg.rig))?;
    let mut manifest = Vec::with_capacity(generator.len());
    let mut poses = Vec::with_capacity(generator.len());
    for obs in generator {
        let obs = obs?;
        for eye in Eye::BOTH {
            obs.frame(eye).save_pgm(&frame_path(dir, eye, obs.index))?;
            obs.events(eye).save_csv(&events_path(dir, eye, obs.index))?;
        }
        manifest.push(obs.manifest_entry());
        poses.push(obs.gt_pose);
    }
    write(&dir.join("manifest"), &manifest_to_text(&manifest))?;
    write_poses(&dir.join("poses.txt"), &poses)?;
    Ok(manifest)
}

pub fn manifest_to_text(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("idx,t,bin,v\n");
    for e in entries {
        writeln!(s, "{},{},{},{}", e.idx, e.t, e.bin, e.v).unwrap();
    }
    s
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("idx,t,bin,v") {
        return Err(Error::parse(path, "missing idx,t,bin,v header"));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::parse(path, format!("line {}: {line:?}", n + 2));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let entry = ManifestEntry {
            idx: f[0].parse().map_err(|_| bad())?,
            t: f[1].parse().map_err(|_| bad())?,
            bin: f[2].parse().map_err(|_| bad())?,
            v: f[3].parse().map_err(|_| bad())?,
        };
        if entry.idx != out.len() {
            return Err(Error::parse(path, format!("frame {} out of order", entry.idx)));
        }
        out.push(entry);
    }
    Ok(out)
}

/// One pose per line: 12 space-separated values, row-major `[R | t]`.
pub fn poses_to_text(poses: &[Pose]) -> String {
    let mut s = String::new();
    for p in poses {
        let v = p.to_row_major();
        let line: Vec<String> = v.iter().map(|x| (x + 0.0).to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    write(path, &poses_to_text(poses))
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::parse(path, format!("line {}: {msg}", n + 1));
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        let arr: [f64; 12] = vals
            .try_into()
            .map_err(|v: Vec<f64>| bad(format!("expected 12 values, got {}", v.len())))?;
        out.push(Pose::from_row_major(&arr).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

pub fn rig_to_text(rig: &StereoRig) -> String {
    let mut s = String::new();
    for (eye, k) in [("left", &rig.left), ("right", &rig.right)] {
        writeln!(s, "{eye}.width = {}", k.width).unwrap();
        writeln!(s, "{eye}.height = {}", k.height).unwrap();
        writeln!(s, "{eye}.fx = {}", k.fx).unwrap();
        writeln!(s, "{eye}.fy = {}", k.fy).unwrap();
        writeln!(s, "{eye}.cx = {}", k.cx).unwrap();
        writeln!(s, "{eye}.cy = {}", k.cy).unwrap();
    }
    writeln!(s, "baseline = {}", rig.baseline).unwrap();
    s
}

pub fn rig_from_text(text: &str, path: &Path) -> Result<StereoRig> {
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, format!("expected key = value, got {line:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| -> Result<f64> {
        map.get(key)
            .ok_or_else(|| Error::parse(path, format!("missing {key}")))?
            .parse()
            .map_err(|_| Error::parse(path, format!("bad value for {key}")))
    };
    let eye = |e: &str| -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(
            get(&format!("{e}.fx"))?,
            get(&format!("{e}.fy"))?,
            get(&format!("{e}.cx"))?,
            get(&format!("{e}.cy"))?,
            get(&format!("{e}.width"))? as usize,
            get(&format!("{e}.height"))? as usize,
        )
    };
    StereoRig::new(eye("left")?, eye("right")?, get("baseline")?)
}

/// A dataset directory opened for reading. Frames are loaded on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub rig: StereoRig,
    pub model: ObjectModel,
    pub manifest: Vec<ManifestEntry>,
    pub poses: Vec<Pose>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            ));
        }
        let rig_path = dir.join("rig.txt");
        let rig = rig_from_text(&read(&rig_path)?, &rig_path)?;
        let model = ObjectModel::load(&dir.join("model.txt"))?;
        let manifest = read_manifest(&dir.join("manifest"))?;
        let poses = read_poses(&dir.join("poses.txt"))?;
        if manifest.is_empty() {
            return Err(Error::EmptySequence);
        }
        if poses.len() != manifest.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} poses for {} manifest entries",
                poses.len(),
                manifest.len()
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            rig,
            model,
            manifest,
            poses,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    pub fn frame(&self, index: usize, eye: Eye) -> Result<GrayFrame> {
        let f = GrayFrame::load_pgm(&frame_path(&self.dir, eye, index), self.manifest[index].t)?;
        let k = self.rig.intrinsics(eye);
        if f.width() != k.width || f.height() != k.height {
            return Err(Error::GeometryMismatch(format!(
                "frame {index} is {}x{}, rig expects {}x{}",
                f.width(),
                f.height(),
                k.width,
                k.height
            )));
        }
        Ok(f)
    }

    pub fn events(&self, index: usize, eye: Eye) -> Result<EventBatch> {
        let k = self.rig.intrinsics(eye);
        EventBatch::load_csv(&events_path(&self.dir, eye, index), k.width, k.height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SceneKind;

    fn short(kind: SceneKind) -> SceneConfig {
        let mut cfg = SceneConfig::preset(kind, 1);
        cfg.duration = 0.2;
        cfg
    }

    #[test]
    fn frame_count() {
        let mut cfg = short(SceneKind::Pendulum);
        cfg.duration = 1.0;
        assert_eq!(Generator::new(cfg).unwrap().len(), 30);
    }

    #[test]
    fn in_memory_sequence() {
        let (frames, manifest) = generate(&short(SceneKind::Pendulum)).unwrap();
        assert_eq!(frames.len(), 6);
        assert_eq!(manifest.len(), 6);
        assert!(frames[0].left_events.is_empty());
        assert!(!frames[1].left_events.is_empty());
        assert!(frames.iter().all(|f| !f.empty_render));
        let (again, _) = generate(&short(SceneKind::Pendulum)).unwrap();
        assert_eq!(frames, again);
    }

    #[test]
    fn dataset_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("ds");
        let cfg = short(SceneKind::Spin);
        let manifest = write_dataset(&cfg, &dir).unwrap();
        let ds = Dataset::open(&dir).unwrap();
        assert_eq!(ds.manifest, manifest);
        assert_eq!(ds.rig, cfg.rig);
        assert_eq!(ds.len(), 6);
        let f = ds.frame(3, Eye::Right).unwrap();
        assert_eq!(f.timestamp, manifest[3].t);
        let gt = trajectory_pose(&cfg, manifest[3].t).unwrap();
        assert!((ds.poses[3].center - gt.center).norm() < 1e-12);
        assert!(!ds.events(2, Eye::Left).unwrap().is_empty());
    }

    #[test]
    fn missing_parent_names_path() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("no/such/dir");
        match write_dataset(&short(SceneKind::Pendulum), &dir) {
            Err(Error::Io { path, .. }) => assert_eq!(path, dir),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let cfg = short(SceneKind::Pendulum);
        write_dataset(&cfg, dir).unwrap();
        fs::write(dir.join("manifest"), "idx,t,bin,v\n").unwrap();
        fs::write(dir.join("poses.txt"), "").unwrap();
        assert!(matches!(Dataset::open(dir), Err(Error::EmptySequence)));
    }
}
