//! Run configuration and its `section.key = value` text format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::center::ConsistencyParams;
use crate::error::{Error, Result};
use crate::geom::{Eye, DEFAULT_MIN_DISPARITY};
use crate::ray_filter::{Distribution, RefineConfig, ScorerConfig};
use crate::sim::{SceneConfig, SceneKind};
use crate::vision::LkParams;

/// Input signal of one eye.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    /// Intensity frames.
    Rgb,
    /// Event accumulation frames.
    Event,
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(Modality::Rgb),
            "event" => Ok(Modality::Event),
            _ => Err(Error::InvalidParameter(format!("unknown modality {s:?}"))),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Rgb => "rgb",
            Modality::Event => "event",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modalities {
    pub left: Modality,
    pub right: Modality,
}

impl Modalities {
    pub fn uniform(m: Modality) -> Self {
        Self { left: m, right: m }
    }

    pub fn eye(&self, eye: Eye) -> Modality {
        match eye {
            Eye::Left => self.left,
            Eye::Right => self.right,
        }
    }
}

/// `rgb`, `event`, or `mixed` (intensity left, events right).
impl FromStr for Modalities {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Self {
                left: Modality::Rgb,
                right: Modality::Event,
            }),
            other => Ok(Self::uniform(other.parse()?)),
        }
    }
}

impl Default for Modalities {
    fn default() -> Self {
        Self::uniform(Modality::Rgb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmqConfig {
    pub n: usize,
    pub alpha: f64,
}

impl Default for AmqConfig {
    fn default() -> Self {
        Self { n: 4, alpha: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M3dConfig {
    pub consistency: ConsistencyParams,
    /// Median flow (px) under which a cluster counts as background.
    pub eps_static: f64,
    pub lk: LkParams,
    pub pyramid_levels: usize,
    /// Seeding cell size in pixels.
    pub grid: usize,
    /// Gradient floor for seeds, measured on the binomially smoothed frame.
    pub min_gradient: f32,
    pub min_disparity: f64,
    /// Smaller dominant clusters are treated like a static scene.
    pub min_cluster: usize,
    /// Moving clusters within this many pixels of the dominant one join it.
    pub absorb_radius: f64,
    /// Accumulation window for event input; the frame interval when unset.
    pub event_window: Option<f64>,
}

impl Default for M3dConfig {
    fn default() -> Self {
        Self {
            consistency: ConsistencyParams::default(),
            eps_static: 0.5,
            lk: LkParams::default(),
            pyramid_levels: 3,
            grid: 8,
            min_gradient: 0.1,
            min_disparity: DEFAULT_MIN_DISPARITY,
            absorb_radius: 16.0,
            min_cluster: 8,
            event_window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpfConfig {
    pub hypotheses: usize,
    /// Depth perturbation scale; the model diameter when unset.
    pub beta: Option<f64>,
    pub distribution: Distribution,
    pub scorer: ScorerConfig,
    pub refine: RefineConfig,
    /// Offset of ±`depth_noise`·β (random sign per frame) added to the
    /// triangulated depth before sampling. Zero disables it.
    pub depth_noise: f64,
}

impl Default for RpfConfig {
    fn default() -> Self {
        Self {
            hypotheses: 64,
            beta: None,
            distribution: Distribution::Uniform,
            scorer: ScorerConfig::default(),
            refine: RefineConfig::default(),
            depth_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub modality: Modalities,
    pub amq: AmqConfig,
    pub m3d: M3dConfig,
    pub rpf: RpfConfig,
    pub seed: u64,
    pub dump_debug: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset"),
            out: PathBuf::from("out"),
            modality: Modalities::default(),
            amq: AmqConfig::default(),
            m3d: M3dConfig::default(),
            rpf: RpfConfig::default(),
            seed: 0,
            dump_debug: false,
        }
    }
}

impl RunConfig {
    /// Parameter ranges only; paths are checked when a command opens them.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        let a = &self.amq;
        if !(a.alpha > 0.0 && a.alpha <= 1.0) {
            return bad("amq.alpha must lie in (0, 1]");
        }
        let m = &self.m3d;
        if !(m.consistency.lambda >= 0.0 && m.consistency.tau > 0.0) {
            return bad("m3d.lambda must be >= 0 and m3d.tau > 0");
        }
        if !(m.eps_static >= 0.0) || m.grid == 0 || m.pyramid_levels == 0 {
            return bad("m3d.eps_static, m3d.grid and m3d.lk_levels out of range");
        }
        if m.lk.window < 3 || m.lk.window % 2 == 0 {
            return bad("m3d.lk_window must be odd and >= 3");
        }
        if let Some(w) = m.event_window {
            if !(w > 0.0) {
                return bad("m3d.event_window must be positive");
            }
        }
        let r = &self.rpf;
        if r.hypotheses == 0 {
            return bad("rpf.hypotheses must be >= 1");
        }
        if let Some(b) = r.beta {
            if !(b > 0.0 && b.is_finite()) {
                return bad("rpf.beta must be positive");
            }
        }
        if !(r.depth_noise >= 0.0 && r.depth_noise.is_finite()) {
            return bad("rpf.depth_noise must be >= 0");
        }
        r.scorer.validate()
    }
}

/// Everything a config file can set: the tracking run and the scene used by
/// `generate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub run: RunConfig,
    pub scene: SceneConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            scene: SceneConfig::preset(SceneKind::Pendulum, 0),
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value {v:?} for {key}")))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    /// Parses `section.key = value` lines; `#` starts a comment. Unknown keys
    /// are rejected. `scene.kind` resets the scene to that kind's preset
    /// before the other scene keys apply, wherever it appears.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected key = value", n + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = Config::default();
        if let Some((_, kind)) = pairs.iter().rev().find(|(k, _)| k == "scene.kind") {
            cfg.scene = SceneConfig::preset(value("scene.kind", kind)?, 0);
        }
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.scene.seed = cfg.run.seed;
        cfg.run.validate()?;
        cfg.scene.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let r = &mut self.run;
        let s = &mut self.scene;
        match key {
            "run.dataset" => r.dataset = PathBuf::from(v),
            "run.out" => r.out = PathBuf::from(v),
            "run.seed" => r.seed = value(key, v)?,
            "run.modality" => r.modality = value(key, v)?,
            "run.dump_debug" => r.dump_debug = value(key, v)?,
            "modality.left" => r.modality.left = value(key, v)?,
            "modality.right" => r.modality.right = value(key, v)?,
            "amq.n" => r.amq.n = value(key, v)?,
            "amq.alpha" => r.amq.alpha = value(key, v)?,
            "m3d.lambda" => r.m3d.consistency.lambda = value(key, v)?,
            "m3d.tau" => r.m3d.consistency.tau = value(key, v)?,
            "m3d.eps_static" => r.m3d.eps_static = value(key, v)?,
            "m3d.lk_window" => r.m3d.lk.window = value(key, v)?,
            "m3d.lk_levels" => r.m3d.pyramid_levels = value(key, v)?,
            "m3d.lk_iterations" => r.m3d.lk.iterations = value(key, v)?,
            "m3d.lk_min_eigen" => r.m3d.lk.min_eigen = value(key, v)?,
            "m3d.grid" => r.m3d.grid = value(key, v)?,
            "m3d.min_gradient" => r.m3d.min_gradient = value(key, v)?,
            "m3d.min_disparity" => r.m3d.min_disparity = value(key, v)?,
            "m3d.min_cluster" => r.m3d.min_cluster = value(key, v)?,
            "m3d.absorb_radius" => r.m3d.absorb_radius = value(key, v)?,
            "m3d.event_window" => r.m3d.event_window = Some(value(key, v)?),
            "rpf.hypotheses" => r.rpf.hypotheses = value(key, v)?,
            "rpf.beta" => r.rpf.beta = Some(value(key, v)?),
            "rpf.distribution" => r.rpf.distribution = value(key, v)?,
            "rpf.temperature" => r.rpf.scorer.temperature = value(key, v)?,
            "rpf.cutoff" => {
                r.rpf.scorer.cutoff = value(key, v)?;
                r.rpf.refine.cutoff = r.rpf.scorer.cutoff;
            }
            "rpf.model_points" => r.rpf.scorer.model_points = value(key, v)?,
            "rpf.refine_iterations" => r.rpf.refine.iterations = value(key, v)?,
            "rpf.depth_noise" => r.rpf.depth_noise = value(key, v)?,
            "scene.kind" => {}
            "scene.duration" => s.duration = value(key, v)?,
            "scene.frame_rate" => s.frame_rate = value(key, v)?,
            "scene.event_threshold" => s.event_threshold = value(key, v)?,
            "scene.noise_sigma" => s.degradation.noise_sigma = value(key, v)?,
            "scene.occlusion" => s.degradation.occlusion_fraction = value(key, v)?,
            "scene.replace" => s.degradation.replace_fraction = value(key, v)?,
            _ => return Err(Error::InvalidParameter(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg.run.amq.n, 4);
        assert_eq!(cfg.run.rpf.hypotheses, 64);
        assert_eq!(cfg.scene.scene, SceneKind::Pendulum);
    }

    #[test]
    fn keys_and_comments() {
        let cfg = Config::parse(
            "# run\namq.n = 2\nrpf.distribution = laplace  # trailing\n\
             run.modality = mixed\nscene.duration = 2\nscene.kind = c\nrun.seed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.run.amq.n, 2);
        assert_eq!(cfg.run.rpf.distribution, Distribution::Laplace);
        assert_eq!(cfg.run.modality.right, Modality::Event);
        assert_eq!(cfg.scene.scene, SceneKind::Degraded);
        assert_eq!(cfg.scene.duration, 2.0);
        assert!(!cfg.scene.degradation.is_none());
        assert_eq!(cfg.scene.seed, 9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("amq.n = four").is_err());
        assert!(Config::parse("amq.q = 1").is_err());
        assert!(Config::parse("amq.alpha = 0").is_err());
        assert!(Config::parse("just words").is_err());
        assert!(Config::parse("m3d.lk_window = 4").is_err());
    }
}
