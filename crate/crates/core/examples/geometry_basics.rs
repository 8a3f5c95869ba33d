//! Euler round trips, projection and stereo triangulation.

use raytrack::geom::{euler_to_rotation, geodesic_angle, rotation_to_euler, triangulate};
use raytrack::{EulerAngles, Eye, Rotation, StereoRig, Vec3};

fn main() -> raytrack::Result<()> {
    let e = EulerAngles::new(0.3, -0.8, 2.5);
    let r = euler_to_rotation(&e);
    let back = rotation_to_euler(&r);
    println!("euler {e:?} -> {back:?}");
    println!("angle to Rz(2.5): {:.4} rad", geodesic_angle(&r, &Rotation::rz(2.5)));

    let rig = StereoRig::symmetric(640, 480, 500.0, 0.12)?;
    let p = Vec3::new(0.05, -0.02, 0.9);
    let l = rig.project(Eye::Left, &p)?;
    let rr = rig.project(Eye::Right, &p)?;
    println!("left ({:.2}, {:.2}) right ({:.2}, {:.2}) disparity {:.2} px", l.u, l.v, rr.u, rr.v, l.u - rr.u);
    let t = triangulate(&rig, [l.u, l.v], [rr.u, rr.v])?;
    println!("triangulated {:.6} {:.6} {:.6}, error {:.1e} m", t.x, t.y, t.z, (t - p).norm());
    Ok(())
}
