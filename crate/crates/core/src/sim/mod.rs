//! Synthetic stereo benchmark: a point-textured cube on fast analytic
//! trajectories, rendered into grayscale frames and event streams with exact
//! ground-truth poses.

mod dataset;
mod events;
mod render;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::SpeedBin;
use crate::geom::{Pose, Rotation, StereoRig, Vec3};
use crate::object::ObjectModel;
use crate::pose_queue::initial_hypothesis;

pub use dataset::{
    generate, manifest_to_text, poses_to_text, read_manifest, read_poses, rig_from_text,
    rig_to_text, write_dataset, write_poses, Dataset, FrameObservation, Generator, ManifestEntry,
};
pub use events::synthesize_events;
pub use render::{render_frame, Background, Degradation, RenderedFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneKind {
    /// Fixed center, fast spin about changing axes with a ramping rate.
    Spin,
    /// Pendulum swing in the image plane.
    Pendulum,
    /// The pendulum with noisy, occluded and partially corrupted images.
    Degraded,
}

impl SceneKind {
    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Spin => "a",
            SceneKind::Pendulum => "b",
            SceneKind::Degraded => "c",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "spin" => Ok(SceneKind::Spin),
            "b" | "pendulum" => Ok(SceneKind::Pendulum),
            "c" | "degraded" => Ok(SceneKind::Degraded),
            _ => Err(Error::InvalidParameter(format!("unknown scene {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinParams {
    pub center: Vec3,
    /// Camera-frame spin axes, cycled every `segment` seconds.
    pub axes: Vec<Vec3>,
    pub segment: f64,
    /// Angular rate at `t = 0` and at the end of the sequence, rad/s.
    pub omega_start: f64,
    pub omega_end: f64,
}

impl Default for SpinParams {
    fn default() -> Self {
        Self {
            center: Vec3::new(0.05, 0.0, 1.0),
            axes: vec![
                Vec3::x(),
                Vec3::y(),
                Vec3::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0),
                Vec3::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0),
            ],
            segment: 2.5,
            omega_start: 2.0,
            omega_end: 14.0,
        }
    }
}

/// `center = pivot + L·(sin θ, −cos θ, 0)` with `θ = θ₀·cos(2πft + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    pub pivot: Vec3,
    pub length: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            pivot: Vec3::new(0.05, 0.25, 1.0),
            length: 0.25,
            amplitude: 0.3,
            frequency: 0.5,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub scene: SceneKind,
    pub duration: f64,
    pub frame_rate: f64,
    /// Log-intensity contrast per synthesized event.
    pub event_threshold: f64,
    pub rig: StereoRig,
    pub model: ObjectModel,
    pub spin: SpinParams,
    pub pendulum: PendulumParams,
    pub degradation: Degradation,
    pub seed: u64,
}

impl SceneConfig {
    /// Standard scene: 640×480 rig with f = 500 px and a 10 cm baseline,
    /// a 10 cm cube with 16 features per face, 30 Hz. The pendulum starts at
    /// the bottom of its swing so the first frames already move.
    pub fn preset(scene: SceneKind, seed: u64) -> Self {
        let pendulum = PendulumParams {
            phase: FRAC_PI_2,
            ..PendulumParams::default()
        };
        Self {
            scene,
            duration: 10.0,
            frame_rate: 30.0,
            event_threshold: 0.15,
            rig: StereoRig::symmetric(640, 480, 500.0, 0.1).expect("default rig"),
            model: ObjectModel::cube(0.1, 16, 7).expect("default cube"),
            spin: SpinParams::default(),
            pendulum,
            degradation: if scene == SceneKind::Degraded {
                Degradation::standard()
            } else {
                Degradation::none()
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        let p = &self.pendulum;
        let s = &self.spin;
        let ok = self.duration > 0.0
            && self.frame_rate > 0.0
            && self.duration.is_finite()
            && self.frame_rate.is_finite()
            && self.event_threshold > 0.0
            && finite(&p.pivot)
            && [p.length, p.amplitude, p.frequency, p.phase].iter().all(|x| x.is_finite())
            && finite(&s.center)
            && !s.axes.is_empty()
            && s.axes.iter().all(|a| finite(a) && a.norm() > 0.0)
            && s.segment > 0.0
            && s.omega_start.is_finite()
            && s.omega_end.is_finite();
        if !ok {
            return Err(Error::InvalidParameter("invalid scene configuration".into()));
        }
        self.degradation.validate()
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }

    pub fn timestamp(&self, index: usize) -> f64 {
        index as f64 / self.frame_rate
    }

    fn omega(&self, t: f64) -> f64 {
        let s = &self.spin;
        s.omega_start + (s.omega_end - s.omega_start) * t / self.duration
    }

    /// Spin angle accumulated since `t = 0`.
    fn spin_angle(&self, t: f64) -> f64 {
        let s = &self.spin;
        s.omega_start * t + 0.5 * (s.omega_end - s.omega_start) * t * t / self.duration
    }

    fn axis(&self, segment: usize) -> Vec3 {
        self.spin.axes[segment % self.spin.axes.len()].normalize()
    }

    fn theta(&self, t: f64) -> (f64, f64) {
        let p = &self.pendulum;
        let w = 2.0 * PI * p.frequency;
        let arg = w * t + p.phase;
        (p.amplitude * arg.cos(), -p.amplitude * w * arg.sin())
    }

    fn pendulum_center(&self, theta: f64) -> Vec3 {
        let p = &self.pendulum;
        p.pivot + p.length * Vec3::new(theta.sin(), -theta.cos(), 0.0)
    }

    fn start_center(&self) -> Vec3 {
        match self.scene {
            SceneKind::Spin => self.spin.center,
            _ => self.pendulum_center(self.theta(0.0).0),
        }
    }

    /// Linear velocity of the center and angular velocity, both camera frame.
    pub fn velocity(&self, t: f64) -> (Vec3, Vec3) {
        match self.scene {
            SceneKind::Spin => {
                let segment = (t / self.spin.segment).floor() as usize;
                (Vec3::zeros(), self.omega(t) * self.axis(segment))
            }
            SceneKind::Pendulum | SceneKind::Degraded => {
                let (theta, rate) = self.theta(t);
                let l = self.pendulum.length;
                let v = l * rate * Vec3::new(theta.cos(), theta.sin(), 0.0);
                (v, rate * Vec3::z())
            }
        }
    }
}

/// Ground-truth pose at time `t`. The object starts facing the camera from
/// its initial center and then follows the scene's motion.
pub fn trajectory_pose(cfg: &SceneConfig, t: f64) -> Result<Pose> {
    if !(0.0..=cfg.duration).contains(&t) {
        return Err(Error::OutOfRange {
            t,
            duration: cfg.duration,
        });
    }
    let base = initial_hypothesis(&cfg.start_center())?;
    match cfg.scene {
        SceneKind::Spin => {
            let seg_len = cfg.spin.segment;
            let last = (t / seg_len).floor() as usize;
            let mut r = base;
            for k in 0..=last {
                let t0 = k as f64 * seg_len;
                let t1 = ((k + 1) as f64 * seg_len).min(t);
                if t1 <= t0 {
                    break;
                }
                let angle = cfg.spin_angle(t1) - cfg.spin_angle(t0);
                r = Rotation::from_axis_angle(&cfg.axis(k), angle) * r;
            }
            Ok(Pose::new(r, cfg.spin.center))
        }
        SceneKind::Pendulum | SceneKind::Degraded => {
            let (theta, _) = cfg.theta(t);
            let (theta0, _) = cfg.theta(0.0);
            Ok(Pose::new(
                Rotation::rz(theta - theta0) * base,
                cfg.pendulum_center(theta),
            ))
        }
    }
}

/// Mean image-plane speed (px/s) of the model points in the left eye.
/// Points spread evenly over a unit sphere (Fibonacci lattice).
fn sphere_directions(n: usize) -> impl Iterator<Item = Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

const VELOCITY_PROBES: usize = 256;

/// Mean left-eye image speed (px/s) of a sphere of probe points with the
/// model's RMS radius, carried by the object's motion at time `t`. Using a
/// sphere instead of the model points keeps the value independent of the
/// object's orientation, so it tracks the motion's speed alone.
pub fn pixel_velocity(cfg: &SceneConfig, t: f64) -> Result<f64> {
    let pose = trajectory_pose(cfg, t)?;
    let (v, w) = cfg.velocity(t);
    let k = &cfg.rig.left;
    let pts = cfg.model.points();
    let radius = (pts.iter().map(|p| p.norm_squared()).sum::<f64>() / pts.len() as f64).sqrt();
    let total: f64 = sphere_directions(VELOCITY_PROBES)
        .map(|d| {
            let r = radius * d;
            let p = pose.center + r;
            let dp = v + w.cross(&r);
            let du = k.fx * (dp.x * p.z - p.x * dp.z) / (p.z * p.z);
            let dv = k.fy * (dp.y * p.z - p.y * dp.z) / (p.z * p.z);
            du.hypot(dv)
        })
        .sum();
    Ok(total / VELOCITY_PROBES as f64)
}

pub fn speed_bin(cfg: &SceneConfig, t: f64) -> Result<SpeedBin> {
    Ok(SpeedBin::from_velocity(pixel_velocity(cfg, t)?))
}
