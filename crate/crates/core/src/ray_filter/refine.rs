use std::collections::BTreeSet;

use nalgebra::{Matrix6, SymmetricEigen, Vector6};

use crate::geom::{skew, Eye, Pose, Rotation, StereoRig, Vec3};
use crate::object::ObjectModel;
use crate::ray_filter::{RayHypothesis, StereoObservations};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub iterations: usize,
    /// Observations farther than this (pixels) from every model point are ignored.
    pub cutoff: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            cutoff: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub pose: Pose,
    /// The problem was rank deficient; `pose` is the input hypothesis.
    pub degenerate: bool,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub accepted_steps: usize,
}

struct EyeData<'a> {
    eye: Eye,
    observed: &'a [[f64; 2]],
}

/// Visible model points as `(model index, camera-frame position, pixel)`.
fn visible_points(
    model: &ObjectModel,
    pose: &Pose,
    rig: &StereoRig,
    eye: Eye,
) -> Vec<(usize, Vec3, [f64; 2])> {
    let vis = model.visibility(pose, &rig.eye_origin(eye));
    model
        .points()
        .iter()
        .zip(vis)
        .enumerate()
        .filter(|(_, (_, v))| *v)
        .filter_map(|(i, (x, _))| {
            let p = pose.transform(x);
            let q = rig.project(eye, &p).ok()?;
            Some((i, p, [q.u, q.v]))
        })
        .collect()
}

fn nearest(points: &[(usize, Vec3, [f64; 2])], o: &[f64; 2]) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, (_, _, q))| (i, (q[0] - o[0]).powi(2) + (q[1] - o[1]).powi(2)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Sum of squared observation-to-model distances, each capped at `cutoff²`.
fn cost(eyes: &[EyeData], model: &ObjectModel, pose: &Pose, rig: &StereoRig, cutoff: f64) -> f64 {
    let c2 = cutoff * cutoff;
    eyes.iter()
        .map(|e| {
            let pts = visible_points(model, pose, rig, e.eye);
            e.observed
                .iter()
                .map(|o| nearest(&pts, o).map_or(c2, |(_, d2)| d2.min(c2)))
                .sum::<f64>()
        })
        .sum()
}

fn collinear(points: &[[f64; 2]]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = 0.5 * (sxx + syy);
    let min_eig = tr - ((0.5 * (sxx - syy)).powi(2) + sxy * sxy).sqrt();
    min_eig <= 1e-9 * tr.max(1e-12)
}

/// Normal equations of the current nearest-point associations, or `None`
/// when fewer than three distinct model points are matched or the system is
/// rank deficient.
fn normal_equations(
    eyes: &[EyeData],
    model: &ObjectModel,
    pose: &Pose,
    rig: &StereoRig,
    cutoff: f64,
) -> Option<(Matrix6<f64>, Vector6<f64>)> {
    let c2 = cutoff * cutoff;
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    let mut matched = BTreeSet::new();
    for e in eyes {
        let pts = visible_points(model, pose, rig, e.eye);
        let k = rig.intrinsics(e.eye);
        let origin = rig.eye_origin(e.eye);
        for o in e.observed {
            let Some((i, d2)) = nearest(&pts, o) else { continue };
            if d2 >= c2 {
                continue;
            }
            let (index, p, uv) = &pts[i];
            matched.insert(*index);
            let q = p - origin;
            let (iz, iz2) = (1.0 / q.z, 1.0 / (q.z * q.z));
            let du = Vec3::new(k.fx * iz, 0.0, -k.fx * q.x * iz2);
            let dv = Vec3::new(0.0, k.fy * iz, -k.fy * q.y * iz2);
            // left-multiplied rotation increment about the object center
            let dq_dw = -skew(&(p - pose.center));
            for (grad, r) in [(du, uv[0] - o[0]), (dv, uv[1] - o[1])] {
                let jw = dq_dw.transpose() * grad;
                let j = Vector6::new(jw.x, jw.y, jw.z, grad.x, grad.y, grad.z);
                h += j * j.transpose();
                g += j * r;
            }
        }
    }
    if matched.len() < 3 {
        return None;
    }
    let eig = SymmetricEigen::new(h).eigenvalues;
    let max = eig.max();
    if !(max > 0.0) || eig.min() <= 1e-12 * max {
        return None;
    }
    Some((h, g))
}

/// Gauss-Newton over rotation and translation increments, minimizing the
/// truncated observation-to-model reprojection error of `best` in both eyes.
/// Steps that would raise the error are halved, then abandoned.
pub fn refine(
    best: &RayHypothesis,
    model: &ObjectModel,
    observed: &StereoObservations,
    rig: &StereoRig,
    cfg: &RefineConfig,
) -> Refinement {
    let start = Pose::new(best.rotation, best.center);
    let eyes: Vec<EyeData> = Eye::BOTH
        .iter()
        .map(|&eye| EyeData {
            eye,
            observed: observed.eye(eye),
        })
        .filter(|e| !collinear(e.observed))
        .collect();
    let degenerate = |c: f64| Refinement {
        pose: start,
        degenerate: true,
        initial_cost: c,
        final_cost: c,
        accepted_steps: 0,
    };
    if eyes.is_empty() {
        return degenerate(f64::NAN);
    }
    let initial_cost = cost(&eyes, model, &start, rig, cfg.cutoff);
    let mut pose = start;
    let mut current = initial_cost;
    let mut accepted = 0;
    for it in 0..cfg.iterations {
        let Some((h, g)) = normal_equations(&eyes, model, &pose, rig, cfg.cutoff) else {
            if it == 0 {
                return degenerate(initial_cost);
            }
            break;
        };
        let Some(delta) = h.cholesky().map(|c| -c.solve(&g)) else {
            if it == 0 {
                return degenerate(initial_cost);
            }
            break;
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..4 {
            let d = delta * scale;
            let w = Vec3::new(d[0], d[1], d[2]);
            let t = Vec3::new(d[3], d[4], d[5]);
            let candidate = Pose::new(Rotation::exp(&w) * pose.rotation, pose.center + t);
            let c = cost(&eyes, model, &candidate, rig, cfg.cutoff);
            if c <= current {
                improved = c < current;
                pose = candidate;
                current = c;
                accepted += 1;
                break;
            }
            scale *= 0.5;
        }
        if !improved || delta.norm() < 1e-10 {
            break;
        }
    }
    Refinement {
        pose,
        degenerate: false,
        initial_cost,
        final_cost: current,
        accepted_steps: accepted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::add;
    use crate::ray_filter::render_points;

    fn setup() -> (StereoRig, ObjectModel, Pose, StereoObservations) {
        let rig = StereoRig::symmetric(640, 480, 500.0, 0.1).unwrap();
        let model = ObjectModel::cube(0.1, 12, 3).unwrap();
        let pose = Pose::new(Rotation::rx(0.4) * Rotation::ry(0.6), Vec3::new(0.05, -0.03, 1.0));
        let obs = StereoObservations {
            left: render_points(&model, &pose, &rig, Eye::Left, 0),
            right: render_points(&model, &pose, &rig, Eye::Right, 0),
        };
        (rig, model, pose, obs)
    }

    fn hyp(pose: &Pose) -> RayHypothesis {
        RayHypothesis {
            center: pose.center,
            rotation: pose.rotation,
            depth: pose.center.z,
            score: 1.0,
        }
    }

    #[test]
    fn ground_truth_is_a_fixed_point() {
        let (rig, model, pose, obs) = setup();
        let r = refine(&hyp(&pose), &model, &obs, &rig, &RefineConfig::default());
        assert!(!r.degenerate);
        assert!((r.pose.center - pose.center).norm() < 1e-6);
        assert!(crate::geom::geodesic_angle(&r.pose.rotation, &pose.rotation) < 1e-6);
    }

    #[test]
    fn recovers_offset_along_ray() {
        let (rig, model, pose, obs) = setup();
        let mut start = pose;
        start.center *= 1.0 + 0.2 * model.diameter() / pose.center.norm();
        let r = refine(&hyp(&start), &model, &obs, &rig, &RefineConfig::default());
        assert!(r.final_cost <= r.initial_cost);
        let err = add(&r.pose, &pose, &model).unwrap();
        assert!(err < 0.05 * model.diameter(), "{err}");
    }

    #[test]
    fn collinear_observations_are_degenerate() {
        let (rig, model, pose, _) = setup();
        let obs = StereoObservations {
            left: vec![[300.0, 200.0], [310.0, 210.0], [320.0, 220.0]],
            right: vec![[280.0, 200.0], [290.0, 210.0], [300.0, 220.0]],
        };
        let mut start = pose;
        start.center.x += 0.01;
        let r = refine(&hyp(&start), &model, &obs, &rig, &RefineConfig::default());
        assert!(r.degenerate);
        assert_eq!(r.pose, start);
    }
}
