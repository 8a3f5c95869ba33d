use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::error::{Error, Result};
use crate::geom::{Eye, Pose};
use crate::sim::SceneConfig;
use crate::vision::GrayFrame;

const BACKGROUND_LEVEL: f32 = 0.5;
const DOT_LEVEL: f32 = 1.0;
const SPECKLE_LEVEL: f32 = 0.0;
/// Splat footprint radius in pixels.
const SPLAT_RADIUS: f64 = 2.0;
/// Background pixels per static speckle.
const SPECKLE_SPACING: usize = 1000;

/// Observation-channel corruption applied per frame and eye.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degradation {
    /// Standard deviation of additive Gaussian pixel noise.
    pub noise_sigma: f64,
    /// Largest share of the object's bounding box hidden by the occluder.
    pub occlusion_fraction: f64,
    /// Share of object pixels replaced by uniform random values.
    pub replace_fraction: f64,
}

impl Degradation {
    pub fn none() -> Self {
        Self {
            noise_sigma: 0.0,
            occlusion_fraction: 0.0,
            replace_fraction: 0.0,
        }
    }

    pub fn standard() -> Self {
        Self {
            noise_sigma: 0.05,
            occlusion_fraction: 0.25,
            replace_fraction: 0.05,
        }
    }

    pub fn is_none(&self) -> bool {
        *self == Self::none()
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite())
            || !unit(self.occlusion_fraction)
            || !unit(self.replace_fraction)
        {
            return Err(Error::InvalidParameter(format!("degradation {self:?}")));
        }
        Ok(())
    }
}

/// Static backdrop seen by both eyes: mid-gray with a faint texture and
/// sparse dark speckles far enough away to have no disparity.
#[derive(Debug, Clone, PartialEq)]
pub struct Background(GrayFrame);

impl Background {
    pub fn for_scene(cfg: &SceneConfig) -> Self {
        let (w, h) = (cfg.rig.left.width, cfg.rig.left.height);
        let mut frame = GrayFrame::from_fn(w, h, 0.0, |x, y| {
            let (x, y) = (x as f32, y as f32);
            BACKGROUND_LEVEL
                + 0.01 * (0.031 * x + 0.4).sin() * (0.027 * y).cos()
                + 0.01 * (0.019 * (x + y)).sin()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_bac6);
        for _ in 0..(w * h / SPECKLE_SPACING) {
            let u = rng.random_range(0.0..w as f64);
            let v = rng.random_range(0.0..h as f64);
            splat(&mut frame, u, v, SPECKLE_LEVEL, None);
        }
        Background(frame)
    }

    pub fn frame(&self) -> &GrayFrame {
        &self.0
    }
}

/// Blends a bilinear (tensor tent) footprint centered at `(u, v)` toward
/// `level`, recording touched pixels in `mask`.
fn splat(frame: &mut GrayFrame, u: f64, v: f64, level: f32, mut mask: Option<&mut [bool]>) {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let r = SPLAT_RADIUS;
    let x0 = (u - r).floor() as isize;
    let y0 = (v - r).floor() as isize;
    let x1 = (u + r).ceil() as isize;
    let y1 = (v + r).ceil() as isize;
    let px = frame.pixels_mut();
    for y in y0.max(0)..=y1.min(h - 1) {
        let wy = 1.0 - (y as f64 - v).abs() / r;
        if wy <= 0.0 {
            continue;
        }
        for x in x0.max(0)..=x1.min(w - 1) {
            let wx = 1.0 - (x as f64 - u).abs() / r;
            if wx <= 0.0 {
                continue;
            }
            let i = (y * w + x) as usize;
            let a = (wx * wy) as f32;
            px[i] += a * (level - px[i]);
            if let Some(m) = mask.as_deref_mut() {
                m[i] = true;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub frame: GrayFrame,
    /// No part of the object landed in the image.
    pub empty: bool,
}

fn frame_rng(seed: u64, frame_index: usize, eye: Eye) -> ChaCha8Rng {
    let eye_salt = match eye {
        Eye::Left => 0x4c,
        Eye::Right => 0x52,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((frame_index as u64) << 8) | eye_salt);
    rng
}

/// Renders the visible model points of `pose` as bright splats over the
/// background, far to near, then applies the scene's degradation.
pub fn render_frame(
    cfg: &SceneConfig,
    background: &Background,
    pose: &Pose,
    eye: Eye,
    frame_index: usize,
) -> Result<RenderedFrame> {
    let mut frame = background.frame().clone();
    frame.timestamp = cfg.timestamp(frame_index);
    let k = cfg.rig.intrinsics(eye);
    let visible = cfg.model.visibility(pose, &cfg.rig.eye_origin(eye));
    let mut splats: Vec<(f64, f64, f64)> = cfg
        .model
        .points()
        .iter()
        .zip(visible)
        .filter(|(_, v)| *v)
        .filter_map(|(x, _)| {
            let p = cfg.rig.project(eye, &pose.transform(x)).ok()?;
            let margin = SPLAT_RADIUS;
            let inside = p.u > -margin
                && p.v > -margin
                && p.u < k.width as f64 + margin
                && p.v < k.height as f64 + margin;
            inside.then_some((p.depth, p.u, p.v))
        })
        .collect();
    let empty = splats.is_empty();
    splats.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut mask = vec![false; frame.width() * frame.height()];
    for &(_, u, v) in &splats {
        splat(&mut frame, u, v, DOT_LEVEL, Some(&mut mask));
    }
    let d = &cfg.degradation;
    if !d.is_none() {
        let mut rng = frame_rng(cfg.seed, frame_index, eye);
        degrade(&mut frame, &splats, &mask, d, &mut rng)?;
    }
    Ok(RenderedFrame { frame, empty })
}

fn degrade(
    frame: &mut GrayFrame,
    splats: &[(f64, f64, f64)],
    mask: &[bool],
    d: &Degradation,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (w, h) = (frame.width(), frame.height());
    if !splats.is_empty() && d.occlusion_fraction > 0.0 {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(_, u, v) in splats {
            x0 = x0.min(u - SPLAT_RADIUS);
            y0 = y0.min(v - SPLAT_RADIUS);
            x1 = x1.max(u + SPLAT_RADIUS);
            y1 = y1.max(v + SPLAT_RADIUS);
        }
        let (bw, bh) = (x1 - x0, y1 - y0);
        let area = rng.random_range(0.0..=1.0) * d.occlusion_fraction * bw * bh;
        let aspect: f64 = rng.random_range(0.5..2.0);
        let ow = (area * aspect).sqrt().min(bw);
        let oh = (area / ow.max(1e-9)).min(bh);
        let ox = x0 + rng.random_range(0.0..=1.0) * (bw - ow);
        let oy = y0 + rng.random_range(0.0..=1.0) * (bh - oh);
        let px = frame.pixels_mut();
        let (cx0, cy0) = (ox.ceil().max(0.0) as usize, oy.ceil().max(0.0) as usize);
        let cx1 = ((ox + ow).floor().max(0.0) as usize).min(w);
        let cy1 = ((oy + oh).floor().max(0.0) as usize).min(h);
        for y in cy0..cy1 {
            for x in cx0..cx1 {
                px[y * w + x] = BACKGROUND_LEVEL;
            }
        }
    }
    if d.replace_fraction > 0.0 {
        let object: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let count = (d.replace_fraction * object.len() as f64).floor() as usize;
        let px = frame.pixels_mut();
        for i in rand::seq::index::sample(rng, object.len(), count) {
            px[object[i]] = rng.random_range(0.0..=1.0);
        }
    }
    if d.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, d.noise_sigma as f32)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for p in frame.pixels_mut() {
            *p = (*p + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Rotation, Vec3};
    use crate::sim::{trajectory_pose, SceneKind};

    fn scene(kind: SceneKind) -> (SceneConfig, Background) {
        let cfg = SceneConfig::preset(kind, 3);
        let bg = Background::for_scene(&cfg);
        (cfg, bg)
    }

    #[test]
    fn behind_camera_is_empty() {
        let (cfg, bg) = scene(SceneKind::Pendulum);
        let pose = Pose::new(Rotation::identity(), Vec3::new(0.0, 0.0, -1.0));
        let r = render_frame(&cfg, &bg, &pose, Eye::Left, 0).unwrap();
        assert!(r.empty);
        assert_eq!(r.frame.pixels(), bg.frame().pixels());
    }

    #[test]
    fn deterministic() {
        for kind in [SceneKind::Pendulum, SceneKind::Degraded] {
            let (cfg, bg) = scene(kind);
            let pose = trajectory_pose(&cfg, 0.4).unwrap();
            let a = render_frame(&cfg, &bg, &pose, Eye::Right, 12).unwrap();
            let b = render_frame(&cfg, &bg, &pose, Eye::Right, 12).unwrap();
            assert_eq!(a, b);
            assert!(!a.empty);
        }
    }

    #[test]
    fn splat_centroid_is_the_projection() {
        let mut f = GrayFrame::filled(40, 40, BACKGROUND_LEVEL, 0.0);
        let (u, v) = (17.3, 21.8);
        splat(&mut f, u, v, DOT_LEVEL, None);
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for y in 0..40 {
            for x in 0..40 {
                let a = (f.get(x, y) - BACKGROUND_LEVEL) as f64;
                sw += a;
                sx += a * x as f64;
                sy += a * y as f64;
            }
        }
        assert!((sx / sw - u).abs() < 1e-4 && (sy / sw - v).abs() < 1e-4);
    }

    #[test]
    fn degradation_stays_in_range_and_changes_pixels() {
        let (cfg, bg) = scene(SceneKind::Degraded);
        let pose = trajectory_pose(&cfg, 1.0).unwrap();
        let r = render_frame(&cfg, &bg, &pose, Eye::Left, 30).unwrap();
        let mut clean_cfg = cfg.clone();
        clean_cfg.degradation = Degradation::none();
        let clean = render_frame(&clean_cfg, &bg, &pose, Eye::Left, 30).unwrap();
        assert!(r.frame.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        let diff = r
            .frame
            .pixels()
            .iter()
            .zip(clean.frame.pixels())
            .filter(|(a, b)| a != b)
            .count();
        assert!(diff > r.frame.pixels().len() / 2);
        let other = render_frame(&cfg, &bg, &pose, Eye::Left, 31).unwrap();
        assert_ne!(other.frame.pixels(), r.frame.pixels());
    }
}
