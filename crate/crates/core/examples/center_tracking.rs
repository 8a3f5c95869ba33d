//! Clusters a synthetic flow field and triangulates the object center.

use raytrack::center::{segment, track_center, ConsistencyParams};
use raytrack::vision::TrackedPointSet;
use raytrack::{Eye, StereoRig, Vec3};

/// Static background grid plus a patch of object points moving by `motion`.
fn flow(rig: &StereoRig, eye: Eye, center: &Vec3, motion: [f64; 2]) -> raytrack::Result<TrackedPointSet> {
    let c = rig.project(eye, center)?;
    let mut points = Vec::new();
    let mut disp = Vec::new();
    for gy in 0..12 {
        for gx in 0..16 {
            points.push([20.0 + 40.0 * gx as f64, 20.0 + 40.0 * gy as f64]);
            disp.push([0.0, 0.0]);
        }
    }
    for k in 0..25 {
        points.push([c.u - 12.0 + 6.0 * (k % 5) as f64, c.v - 12.0 + 6.0 * (k / 5) as f64]);
        disp.push(motion);
    }
    TrackedPointSet::from_parts(points, disp, 640, 480)
}

fn main() -> raytrack::Result<()> {
    let rig = StereoRig::symmetric(640, 480, 500.0, 0.12)?;
    let truth = Vec3::new(0.04, 0.01, 0.8);
    let params = ConsistencyParams::default();
    let left = segment(&flow(&rig, Eye::Left, &truth, [4.0, 1.0])?, &params, 0.5)?;
    let right = segment(&flow(&rig, Eye::Right, &truth, [4.0, 1.0])?, &params, 0.5)?;
    println!("left cluster {} points, right cluster {} points", left.members.len(), right.members.len());
    let c = track_center(&rig, &left, &right)?;
    println!("center {:.4} {:.4} {:.4}, error {:.2} mm", c.x, c.y, c.z, (c - truth).norm() * 1e3);
    Ok(())
}
