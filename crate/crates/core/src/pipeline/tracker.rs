//! The per-frame loop: features and center, pivot rotation, ray filter.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::center::{absorb_adjacent, labels_csv, segment, track_center_with, ClusterResult};
use crate::error::{Error, Result};
use crate::geom::{Eye, Pose, Rotation, StereoRig, Vec3};
use crate::object::ObjectModel;
use crate::pipeline::config::{Modality, RunConfig};
use crate::pose_queue::PoseQueue;
use crate::ray_filter::{
    make_hypotheses, ray_through, refine, render_points, sample_depths, score_hypotheses, select_top1,
    SamplerConfig, StereoObservations,
};
use crate::sim::{Dataset, FrameObservation};
use crate::vision::{
    accumulate_events, binomial_blur, build_pyramid, lk_track, refine_to_peaks, seed_points, EventBatch, GrayFrame, Pyramid,
    TrackedPointSet,
};

/// Pixels added around the previous pose's footprint when gating.
const GATE_MARGIN: f64 = 4.0;

/// Random access to a stereo sequence.
/// Half-width of the window used to snap observations to feature peaks.
const PEAK_RADIUS: usize = 2;

pub trait FrameSource {
    fn len(&self) -> usize;
    fn timestamp(&self, index: usize) -> f64;
    fn frame(&self, index: usize, eye: Eye) -> Result<GrayFrame>;
    fn events(&self, index: usize, eye: Eye) -> Result<EventBatch>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FrameSource for Dataset {
    fn len(&self) -> usize {
        Dataset::len(self)
    }

    fn timestamp(&self, index: usize) -> f64 {
        self.manifest[index].t
    }

    fn frame(&self, index: usize, eye: Eye) -> Result<GrayFrame> {
        Dataset::frame(self, index, eye)
    }

    fn events(&self, index: usize, eye: Eye) -> Result<EventBatch> {
        Dataset::events(self, index, eye)
    }
}

impl FrameSource for [FrameObservation] {
    fn len(&self) -> usize {
        <[FrameObservation]>::len(self)
    }

    fn timestamp(&self, index: usize) -> f64 {
        self[index].timestamp
    }

    fn frame(&self, index: usize, eye: Eye) -> Result<GrayFrame> {
        Ok(self[index].frame(eye).clone())
    }

    fn events(&self, index: usize, eye: Eye) -> Result<EventBatch> {
        Ok(self[index].events(eye).clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    Ok,
    /// No moving cluster in some eye; the previous pose is kept.
    Held,
    /// A stage failed; the previous pose is carried forward.
    Lost,
}

impl fmt::Display for FrameStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameStatus::Ok => "ok",
            FrameStatus::Held => "held",
            FrameStatus::Lost => "lost",
        })
    }
}

impl std::str::FromStr for FrameStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(FrameStatus::Ok),
            "held" => Ok(FrameStatus::Held),
            "lost" => Ok(FrameStatus::Lost),
            _ => Err(Error::InvalidParameter(format!("unknown frame status {s:?}"))),
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub io: f64,
    pub vision: f64,
    pub m3d: f64,
    pub amq: f64,
    pub sample: f64,
    pub score: f64,
    pub refine: f64,
    pub total: f64,
}

impl StageTimes {
    pub const NAMES: [&'static str; 8] =
        ["io", "vision", "m3d", "amq", "sample", "score", "refine", "total"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.io,
            self.vision,
            self.m3d,
            self.amq,
            self.sample,
            self.score,
            self.refine,
            self.total,
        ]
    }

    fn add(&mut self, o: &StageTimes) {
        self.io += o.io;
        self.vision += o.vision;
        self.m3d += o.m3d;
        self.amq += o.amq;
        self.sample += o.sample;
        self.score += o.score;
        self.refine += o.refine;
        self.total += o.total;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub index: usize,
    pub pose: Pose,
    pub status: FrameStatus,
    /// Depth of the selected hypothesis, NaN unless the ray filter ran.
    pub depth: f64,
    pub score: f64,
    pub message: Option<String>,
    pub timing: StageTimes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub frames: Vec<FrameResult>,
    /// Wall-clock seconds for the whole loop.
    pub wall_time: f64,
}

impl TrackOutput {
    pub fn poses(&self) -> Vec<Pose> {
        self.frames.iter().map(|f| f.pose).collect()
    }

    pub fn lost_flags(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.status == FrameStatus::Lost).collect()
    }

    pub fn fps(&self) -> f64 {
        self.frames.len() as f64 / self.wall_time.max(1e-12)
    }

    pub fn stage_totals(&self) -> StageTimes {
        let mut t = StageTimes::default();
        for f in &self.frames {
            t.add(&f.timing);
        }
        t
    }

    /// `frame,status,depth,score`; deterministic for a fixed run.
    pub fn status_csv(&self) -> String {
        let mut s = String::from("frame,status,depth,score\n");
        for f in &self.frames {
            s.push_str(&format!("{},{},{},{}\n", f.index, f.status, f.depth, f.score));
        }
        s
    }

    /// Per-frame stage times in milliseconds.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("frame");
        for n in StageTimes::NAMES {
            s.push_str(&format!(",{n}_ms"));
        }
        s.push('\n');
        for f in &self.frames {
            s.push_str(&f.index.to_string());
            for v in f.timing.values() {
                s.push_str(&format!(",{:.4}", v * 1e3));
            }
            s.push('\n');
        }
        s
    }
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }

    /// Seconds since the last lap.
    fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let dt = (now - self.0).as_secs_f64();
        self.0 = now;
        dt
    }
}

/// Debug artifacts for one frame.
#[derive(Default)]
struct Debug {
    labels: Vec<(Eye, String)>,
    hypotheses: Option<String>,
    queue: Option<String>,
}

/// Tracks a sequence frame by frame. Stateful across frames through the pose
/// queue and the last accepted pose.
pub struct Tracker<'a> {
    cfg: &'a RunConfig,
    rig: &'a StereoRig,
    model: &'a ObjectModel,
    queue: PoseQueue,
    last: Option<Pose>,
    pyramids: HashMap<usize, [Pyramid; 2]>,
    beta: f64,
}

impl<'a> Tracker<'a> {
    pub fn new(cfg: &'a RunConfig, rig: &'a StereoRig, model: &'a ObjectModel) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rig,
            model,
            queue: PoseQueue::new(cfg.amq.n, cfg.amq.alpha)?,
            last: None,
            pyramids: HashMap::new(),
            beta: cfg.rpf.beta.unwrap_or_else(|| model.diameter()),
        })
    }

    fn input_image<S: FrameSource + ?Sized>(&self, src: &S, i: usize, eye: Eye) -> Result<GrayFrame> {
        match self.cfg.modality.eye(eye) {
            Modality::Rgb => src.frame(i, eye),
            Modality::Event => {
                let t = src.timestamp(i);
                let window = self.cfg.m3d.event_window.unwrap_or_else(|| {
                    let other = if i > 0 { src.timestamp(i - 1) } else if src.len() > 1 {
                        2.0 * t - src.timestamp(1)
                    } else {
                        t - 1.0
                    };
                    (t - other).abs().max(1e-9)
                });
                Ok(accumulate_events(&src.events(i, eye)?, window, t))
            }
        }
    }

    fn pyramids_for<S: FrameSource + ?Sized>(&mut self, src: &S, i: usize) -> Result<()> {
        if self.pyramids.contains_key(&i) {
            return Ok(());
        }
        let levels = self.cfg.m3d.pyramid_levels;
        let l = build_pyramid(&self.input_image(src, i, Eye::Left)?, levels)?;
        let r = build_pyramid(&self.input_image(src, i, Eye::Right)?, levels)?;
        self.pyramids.insert(i, [l, r]);
        Ok(())
    }

    /// Per-eye flow for frame `i` against its partner frame: the previous
    /// one, or the next one for the first frame.
    fn flows(&self, i: usize, partner: usize) -> Result<([TrackedPointSet; 2], [GrayFrame; 2])> {
        let cur = &self.pyramids[&i];
        let other = &self.pyramids[&partner];
        let m = &self.cfg.m3d;
        let blurred = [binomial_blur(cur[0].base()), binomial_blur(cur[1].base())];
        let track = |k: usize| {
            let seeds = seed_points(&blurred[k], m.grid, m.min_gradient);
            lk_track(&cur[k], &other[k], &seeds, &m.lk)
        };
        Ok(([track(0)?, track(1)?], blurred))
    }

    /// Cluster members moved onto the intensity peaks they sit beside.
    fn peaks(&self, blurred: &GrayFrame, tracked: &TrackedPointSet, cluster: &ClusterResult) -> Vec<[f64; 2]> {
        let raw: Vec<[f64; 2]> = cluster.members.iter().map(|&j| tracked.points[j]).collect();
        refine_to_peaks(blurred, &raw, PEAK_RADIUS)
    }

    /// Without a moving cluster, the object is taken to be the tracked points
    /// inside the footprint of the previous pose: the bounding box of its
    /// projected visible points, grown by the splat margin.
    fn gate_by_pose(&self, tracked: &TrackedPointSet, last: &Pose, eye: Eye) -> Option<ClusterResult> {
        let pts = render_points(self.model, last, self.rig, eye, 0);
        if pts.is_empty() {
            return None;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &pts {
            x0 = x0.min(p[0] - GATE_MARGIN);
            y0 = y0.min(p[1] - GATE_MARGIN);
            x1 = x1.max(p[0] + GATE_MARGIN);
            y1 = y1.max(p[1] + GATE_MARGIN);
        }
        let members: Vec<usize> = tracked
            .tracked_indices()
            .into_iter()
            .filter(|&i| {
                let [u, v] = tracked.points[i];
                (x0..=x1).contains(&u) && (y0..=y1).contains(&v)
            })
            .collect();
        if members.len() < 3 {
            return None;
        }
        let n = members.len() as f64;
        let cx = members.iter().map(|&i| tracked.points[i][0]).sum::<f64>() / n;
        let cy = members.iter().map(|&i| tracked.points[i][1]).sum::<f64>() / n;
        let mut labels: Vec<Option<usize>> =
            (0..tracked.len()).map(|i| tracked.is_tracked(i).then_some(1)).collect();
        for &i in &members {
            labels[i] = Some(0);
        }
        Some(ClusterResult {
            labels,
            dominant: 0,
            members,
            centroid_2d: [cx, cy],
            low_confidence: true,
        })
    }

    /// Runs one frame. Failures inside the stages become `Lost` results;
    /// only input errors (unreadable frames) propagate.
    pub fn step<S: FrameSource + ?Sized>(&mut self, src: &S, i: usize) -> Result<FrameResult> {
        let mut debug = Debug::default();
        let result = self.step_inner(src, i, &mut debug)?;
        if self.cfg.dump_debug {
            write_debug(&self.cfg.out, i, &debug)?;
        }
        Ok(result)
    }

    fn step_inner<S: FrameSource + ?Sized>(
        &mut self,
        src: &S,
        i: usize,
        debug: &mut Debug,
    ) -> Result<FrameResult> {
        let start = Instant::now();
        let mut timer = Timer::start();
        let mut timing = StageTimes::default();
        let partner = if i > 0 {
            Some(i - 1)
        } else if src.len() > 1 {
            Some(1)
        } else {
            None
        };
        self.pyramids_for(src, i)?;
        if let Some(p) = partner {
            self.pyramids_for(src, p)?;
        }
        self.pyramids.retain(|&k, _| k + 1 >= i && k <= i + 1);
        timing.io = timer.lap();

        let outcome = self.estimate(i, partner, &mut timer, &mut timing, debug);
        let carried = self.last.unwrap_or_else(|| Pose::new(Rotation::identity(), Vec3::zeros()));
        let result = match outcome {
            Ok(Estimate::Pose { pose, depth, score }) => {
                self.queue.enqueue(i, pose);
                self.last = Some(pose);
                FrameResult {
                    index: i,
                    pose,
                    status: FrameStatus::Ok,
                    depth,
                    score,
                    message: None,
                    timing,
                }
            }
            Ok(Estimate::Held) => FrameResult {
                index: i,
                pose: carried,
                status: FrameStatus::Held,
                depth: f64::NAN,
                score: f64::NAN,
                message: None,
                timing,
            },
            Err(e) => FrameResult {
                index: i,
                pose: carried,
                status: FrameStatus::Lost,
                depth: f64::NAN,
                score: f64::NAN,
                message: Some(e.to_string()),
                timing,
            },
        };
        if self.cfg.dump_debug {
            debug.queue = Some(self.queue.dump());
        }
        let mut result = result;
        result.timing.total = start.elapsed().as_secs_f64();
        Ok(result)
    }

    fn estimate(
        &mut self,
        i: usize,
        partner: Option<usize>,
        timer: &mut Timer,
        timing: &mut StageTimes,
        debug: &mut Debug,
    ) -> Result<Estimate> {
        let partner = partner.ok_or(Error::InsufficientPoints { needed: 2, got: 1 })?;
        let (flows, blurred) = self.flows(i, partner)?;
        timing.vision = timer.lap();

        let m = &self.cfg.m3d;
        let clusters: Vec<ClusterResult> = flows
            .iter()
            .map(|f| {
                let c = segment(f, &m.consistency, m.eps_static)?;
                Ok(absorb_adjacent(&c, f, m.eps_static, m.absorb_radius))
            })
            .collect::<Result<_>>()?;
        if self.cfg.dump_debug {
            for (k, eye) in Eye::BOTH.into_iter().enumerate() {
                debug.labels.push((eye, labels_csv(&flows[k], &clusters[k])));
            }
        }
        let mut clusters = clusters;
        if let Some(last) = self.last {
            for (k, eye) in Eye::BOTH.into_iter().enumerate() {
                if clusters[k].low_confidence || clusters[k].members.len() < m.min_cluster {
                    match self.gate_by_pose(&flows[k], &last, eye) {
                        Some(c) => clusters[k] = c,
                        None => {
                            timing.m3d = timer.lap();
                            return Ok(Estimate::Held);
                        }
                    }
                }
            }
        }
        let center = track_center_with(self.rig, &clusters[0], &clusters[1], m.min_disparity)?;
        let observed = StereoObservations {
            left: self.peaks(&blurred[0], &flows[0], &clusters[0]),
            right: self.peaks(&blurred[1], &flows[1], &clusters[1]),
        };
        timing.m3d = timer.lap();

        let seed = self.last.map(|p| p.rotation);
        let pivot = self.queue.pivot_rotation(&center, i, seed.as_ref())?;
        timing.amq = timer.lap();

        let r = &self.cfg.rpf;
        let (u, v, mut d) = ray_through(&self.rig.left, &center)?;
        if r.depth_noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0xd3b7_0000);
            rng.set_stream(i as u64);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            d += sign * r.depth_noise * self.beta;
        }
        let sampler = SamplerConfig {
            count: r.hypotheses,
            beta: self.beta,
            distribution: r.distribution,
            seed: self.cfg.seed,
        }
        .for_frame(i);
        sampler.validate()?;
        let depths = sample_depths(d, &sampler);
        let mut set = make_hypotheses(&self.rig.left, u, v, &depths, &pivot)?;
        timing.sample = timer.lap();

        score_hypotheses(&mut set, self.model, &observed, self.rig, &r.scorer)?;
        let (_, best) = select_top1(&set)?;
        let best = best.clone();
        if self.cfg.dump_debug {
            debug.hypotheses = Some(set.to_csv());
        }
        timing.score = timer.lap();

        let refined = refine(&best, self.model, &observed, self.rig, &r.refine);
        timing.refine = timer.lap();
        Ok(Estimate::Pose {
            pose: refined.pose,
            depth: best.depth,
            score: best.score,
        })
    }
}

enum Estimate {
    Pose { pose: Pose, depth: f64, score: f64 },
    Held,
}

fn write_debug(out: &Path, i: usize, debug: &Debug) -> Result<()> {
    let dir = out.join("debug");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let write = |name: String, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    for (eye, csv) in &debug.labels {
        write(format!("{i:06}_{}_labels.csv", eye.tag()), csv)?;
    }
    if let Some(h) = &debug.hypotheses {
        write(format!("{i:06}_hypotheses.csv"), h)?;
    }
    if let Some(q) = &debug.queue {
        write(format!("{i:06}_queue.txt"), q)?;
    }
    Ok(())
}

/// Tracks every frame of `src` in order.
pub fn track_sequence<S: FrameSource + ?Sized>(
    cfg: &RunConfig,
    src: &S,
    rig: &StereoRig,
    model: &ObjectModel,
) -> Result<TrackOutput> {
    if src.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut tracker = Tracker::new(cfg, rig, model)?;
    let start = Instant::now();
    let frames = (0..src.len())
        .map(|i| tracker.step(src, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrackOutput {
        frames,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
