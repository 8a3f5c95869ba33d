use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Eye, Pose, StereoRig};
use crate::object::ObjectModel;
use crate::ray_filter::HypothesisSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorerConfig {
    /// Softmax temperature in pixels of reprojection error.
    pub temperature: f64,
    /// Nearest-neighbour distances are truncated here, in pixels.
    pub cutoff: f64,
    /// Upper bound on model points rendered per hypothesis; 0 renders all.
    pub model_points: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            temperature: 5.0,
            cutoff: 20.0,
            model_points: 256,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !(self.cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scorer needs positive temperature and cutoff, got {} and {}",
                self.temperature, self.cutoff
            )));
        }
        Ok(())
    }
}

/// Observed object feature positions in each eye, in pixels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StereoObservations {
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
}

impl StereoObservations {
    pub fn eye(&self, eye: Eye) -> &[[f64; 2]] {
        match eye {
            Eye::Left => &self.left,
            Eye::Right => &self.right,
        }
    }
}

/// Projects the model points visible from `eye` that land inside its image.
/// `max_points` thins the model with a fixed stride (0 keeps all).
pub fn render_points(
    model: &ObjectModel,
    pose: &Pose,
    rig: &StereoRig,
    eye: Eye,
    max_points: usize,
) -> Vec<[f64; 2]> {
    let stride = if max_points == 0 {
        1
    } else {
        model.len().div_ceil(max_points).max(1)
    };
    let k = rig.intrinsics(eye);
    let visible = model.visibility(pose, &rig.eye_origin(eye));
    model
        .points()
        .iter()
        .zip(visible)
        .step_by(stride)
        .filter(|(_, vis)| *vis)
        .filter_map(|(x, _)| {
            let p = rig.project(eye, &pose.transform(x)).ok()?;
            k.contains(p.u, p.v).then_some([p.u, p.v])
        })
        .collect()
}

fn mean_truncated_nn(from: &[[f64; 2]], to: &[[f64; 2]], cutoff: f64) -> f64 {
    let c2 = cutoff * cutoff;
    let total: f64 = from
        .iter()
        .map(|a| {
            let mut best = c2;
            for b in to {
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                if d2 < best {
                    best = d2;
                }
            }
            best.sqrt()
        })
        .sum();
    total / from.len() as f64
}

/// Symmetric chamfer distance with each nearest-neighbour term truncated at
/// `cutoff`; an empty side scores the full cutoff.
pub fn chamfer_error(rendered: &[[f64; 2]], observed: &[[f64; 2]], cutoff: f64) -> f64 {
    if rendered.is_empty() || observed.is_empty() {
        return cutoff;
    }
    0.5 * (mean_truncated_nn(observed, rendered, cutoff)
        + mean_truncated_nn(rendered, observed, cutoff))
}

/// Scores every hypothesis by its eye-averaged chamfer error and turns the
/// errors into softmax weights at temperature `T`.
pub fn score_hypotheses(
    set: &mut HypothesisSet,
    model: &ObjectModel,
    observed: &StereoObservations,
    rig: &StereoRig,
    cfg: &ScorerConfig,
) -> Result<()> {
    cfg.validate()?;
    for eye in Eye::BOTH {
        let got = observed.eye(eye).len();
        if got < 3 {
            return Err(Error::InsufficientObservations { needed: 3, got });
        }
    }
    if set.is_empty() {
        return Err(Error::InvalidParameter("empty hypothesis set".into()));
    }
    let errors: Vec<f64> = set
        .hypotheses
        .par_iter()
        .map(|h| {
            let pose = Pose::new(h.rotation, h.center);
            let total: f64 = Eye::BOTH
                .iter()
                .map(|&eye| {
                    let rendered = render_points(model, &pose, rig, eye, cfg.model_points);
                    chamfer_error(&rendered, observed.eye(eye), cfg.cutoff)
                })
                .sum();
            total / 2.0
        })
        .collect();
    let scores = softmax_neg(&errors, cfg.temperature);
    for (h, s) in set.hypotheses.iter_mut().zip(scores) {
        h.score = s;
    }
    set.errors = Some(errors);
    Ok(())
}

/// `softmax(−e / T)`, shifted by the minimum error for stability.
pub(crate) fn softmax_neg(errors: &[f64], temperature: f64) -> Vec<f64> {
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = errors
        .iter()
        .map(|e| (-(e - min) / temperature).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}
