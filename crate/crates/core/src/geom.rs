//! Rigid-body and pinhole camera geometry.
//!
//! Rotations use the roll-pitch-yaw convention `R = Rz(yaw) · Ry(pitch) · Rx(roll)`
//! throughout the crate. Cameras are pinhole with no distortion; stereo rigs
//! are rectified, the right eye sitting `baseline` meters along +x of the left.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Disparities below this many pixels are rejected by [`triangulate`].
pub const DEFAULT_MIN_DISPARITY: f64 = 0.5;

/// Below this cosine of pitch the Euler decomposition takes the gimbal-lock branch.
const GIMBAL_EPS: f64 = 1e-12;

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps `m` after checking orthonormality and unit determinant within `1e-9`.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let ortho = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if !ortho.is_finite() || ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "not a rotation matrix (orthogonality residual {ortho:.3e}, det {det})"
            )));
        }
        Ok(Rotation(m))
    }

    /// Projects an arbitrary matrix onto SO(3) using its SVD.
    pub fn orthonormalize(m: Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Rotation(r)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn rx(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation(Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn ry(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation(Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rz(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::exp(&(axis * (angle / n)))
    }

    /// Rodrigues exponential of a rotation vector.
    pub fn exp(w: &Vec3) -> Self {
        let theta = w.norm();
        let k = skew(w);
        let (a, b) = if theta < 1e-8 {
            (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
        } else {
            (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
        };
        Rotation(Mat3::identity() + k * a + k * k * b)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        geodesic_angle(&Self::identity(), self)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

pub fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    /// Checks `pitch ∈ [−π/2, π/2]` and `roll, yaw ∈ (−π, π]`.
    pub fn is_canonical(&self) -> bool {
        let in_half_open = |a: f64| a > -PI && a <= PI;
        self.pitch.abs() <= FRAC_PI_2 && in_half_open(self.roll) && in_half_open(self.yaw)
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

pub fn euler_to_rotation(e: &EulerAngles) -> Rotation {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    Rotation(Mat3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    ))
}

/// Inverse of [`euler_to_rotation`]. At gimbal lock (`|pitch| = π/2`) roll is
/// pinned to zero and yaw carries the remaining free angle.
pub fn rotation_to_euler(r: &Rotation) -> EulerAngles {
    let m = &r.0;
    let s = (-m[(2, 0)]).clamp(-1.0, 1.0);
    let cos_pitch = (m[(2, 1)].powi(2) + m[(2, 2)].powi(2)).sqrt();
    if cos_pitch <= GIMBAL_EPS {
        let pitch = FRAC_PI_2.copysign(s);
        let yaw = wrap_angle((-m[(0, 1)]).atan2(m[(1, 1)]));
        return EulerAngles::new(0.0, pitch, yaw);
    }
    let pitch = s.atan2(cos_pitch);
    let roll = wrap_angle(m[(2, 1)].atan2(m[(2, 2)]));
    let yaw = wrap_angle(m[(1, 0)].atan2(m[(0, 0)]));
    EulerAngles::new(roll, pitch, yaw)
}

/// Angle of the relative rotation `aᵀb`, in `[0, π]`.
pub fn geodesic_angle(a: &Rotation, b: &Rotation) -> f64 {
    let rel = a.0.transpose() * b.0;
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // atan2 keeps precision near 0 and π where acos alone does not
    let sin = 0.5
        * Vec3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        )
        .norm();
    let angle = sin.atan2(cos);
    if cos < -0.99 {
        // near π the skew part vanishes, fall back to acos
        return cos.acos();
    }
    angle.clamp(0.0, PI)
}

/// Object-to-camera rigid transform. `center` is the object origin in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub center: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, center: Vec3) -> Self {
        Self { rotation, center }
    }

    pub fn transform(&self, x: &Vec3) -> Vec3 {
        self.rotation.apply(x) + self.center
    }

    /// Row-major `[R | t]`.
    pub fn to_row_major(&self) -> [f64; 12] {
        let m = self.rotation.matrix();
        let c = &self.center;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            c.x,
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            c.y,
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
            c.z,
        ]
    }

    /// Parses a row-major `[R | t]`. The rotation block is re-projected onto
    /// SO(3) after a loose sanity check so that text round-trips stay valid.
    pub fn from_row_major(v: &[f64; 12]) -> Result<Self> {
        let m = Mat3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let residual = (m.transpose() * m - Mat3::identity()).norm();
        if !residual.is_finite() || residual > 1e-4 || m.determinant() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "pose rotation block is not a rotation (residual {residual:.3e})"
            )));
        }
        Ok(Pose::new(Rotation::orthonormalize(m), Vec3::new(v[3], v[7], v[11])))
    }
}

/// Pixel coordinates plus depth along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

/// `[u·d, v·d, d]ᵀ = K·c`.
pub fn project(k: &CameraIntrinsics, c: &Vec3) -> Result<Projection> {
    if !(c.z > 0.0) {
        return Err(Error::DegenerateDepth(c.z));
    }
    Ok(Projection {
        u: k.fx * c.x / c.z + k.cx,
        v: k.fy * c.y / c.z + k.cy,
        depth: c.z,
    })
}

/// `depth · K⁻¹ · [u, v, 1]ᵀ`.
pub fn back_project(k: &CameraIntrinsics, u: f64, v: f64, depth: f64) -> Result<Vec3> {
    if !(depth > 0.0) {
        return Err(Error::DegenerateDepth(depth));
    }
    Ok(Vec3::new(
        (u - k.cx) / k.fx * depth,
        (v - k.cy) / k.fy * depth,
        depth,
    ))
}

/// Which camera of a stereo rig.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    pub const BOTH: [Eye; 2] = [Eye::Left, Eye::Right];

    pub fn tag(self) -> &'static str {
        match self {
            Eye::Left => "L",
            Eye::Right => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub left: CameraIntrinsics,
    pub right: CameraIntrinsics,
    pub baseline: f64,
}

impl StereoRig {
    pub fn new(left: CameraIntrinsics, right: CameraIntrinsics, baseline: f64) -> Result<Self> {
        left.validate()?;
        right.validate()?;
        if !(baseline > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "baseline must be positive, got {baseline}"
            )));
        }
        Ok(Self {
            left,
            right,
            baseline,
        })
    }

    /// Identical eyes with square pixels and the principal point at the image center.
    pub fn symmetric(width: usize, height: usize, focal: f64, baseline: f64) -> Result<Self> {
        let k = CameraIntrinsics::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
        )?;
        Self::new(k, k, baseline)
    }

    pub fn intrinsics(&self, eye: Eye) -> &CameraIntrinsics {
        match eye {
            Eye::Left => &self.left,
            Eye::Right => &self.right,
        }
    }

    /// Optical center of `eye` in the left camera frame.
    pub fn eye_origin(&self, eye: Eye) -> Vec3 {
        match eye {
            Eye::Left => Vec3::zeros(),
            Eye::Right => Vec3::new(self.baseline, 0.0, 0.0),
        }
    }

    /// Expresses a left-camera-frame point in the frame of `eye`.
    pub fn to_eye(&self, eye: Eye, p: &Vec3) -> Vec3 {
        p - self.eye_origin(eye)
    }

    pub fn project(&self, eye: Eye, p: &Vec3) -> Result<Projection> {
        project(self.intrinsics(eye), &self.to_eye(eye, p))
    }
}

/// Rectified stereo triangulation of a left/right pixel pair, rejecting
/// disparities below [`DEFAULT_MIN_DISPARITY`].
pub fn triangulate(rig: &StereoRig, left: [f64; 2], right: [f64; 2]) -> Result<Vec3> {
    triangulate_with(rig, left, right, DEFAULT_MIN_DISPARITY)
}

pub fn triangulate_with(
    rig: &StereoRig,
    left: [f64; 2],
    right: [f64; 2],
    min_disparity: f64,
) -> Result<Vec3> {
    let d = left[0] - right[0];
    if !(d > 0.0) {
        return Err(Error::NonPositiveDisparity(d));
    }
    if d < min_disparity {
        return Err(Error::DisparityTooSmall {
            disparity: d,
            min: min_disparity,
        });
    }
    let k = &rig.left;
    let s = rig.baseline / d;
    Ok(Vec3::new(s * (left[0] - k.cx), s * (left[1] - k.cy), s * k.fx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn euler_identity_and_quarter_yaw() {
        let r = euler_to_rotation(&EulerAngles::new(0.0, 0.0, 0.0));
        assert!((r.matrix() - Mat3::identity()).norm() < 1e-15);
        let r = euler_to_rotation(&EulerAngles::new(0.0, 0.0, FRAC_PI_2));
        let x = r.apply(&Vec3::x());
        assert!((x - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn euler_matches_elementary_product() {
        // multiply the three elementary matrices by hand
        let (a, b, c) = (0.1f64, 0.2f64, 0.3f64);
        let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos());
        let ry = Mat3::new(b.cos(), 0.0, b.sin(), 0.0, 1.0, 0.0, -b.sin(), 0.0, b.cos());
        let rz = Mat3::new(c.cos(), -c.sin(), 0.0, c.sin(), c.cos(), 0.0, 0.0, 0.0, 1.0);
        let expected = rz * ry * rx;
        let r = euler_to_rotation(&EulerAngles::new(a, b, c));
        assert!((r.matrix() - expected).norm() < 1e-15);
        let e = rotation_to_euler(&r);
        assert!((e.roll - a).abs() < 1e-12);
        assert!((e.pitch - b).abs() < 1e-12);
        assert!((e.yaw - c).abs() < 1e-12);
    }

    #[test]
    fn euler_of_identity_is_zero() {
        let e = rotation_to_euler(&Rotation::identity());
        assert_eq!((e.roll, e.pitch, e.yaw), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gimbal_lock_pins_roll() {
        for (roll, yaw) in [(0.4, 0.1), (-1.0, 2.0), (0.0, -0.7)] {
            let r = euler_to_rotation(&EulerAngles::new(roll, FRAC_PI_2, yaw));
            let e = rotation_to_euler(&r);
            assert_eq!(e.roll, 0.0);
            assert_eq!(e.pitch, FRAC_PI_2);
            assert!((wrap_angle(e.yaw - (yaw - roll))).abs() < 1e-12);
            let back = euler_to_rotation(&e);
            assert!((back.matrix() - r.matrix()).norm() < 1e-12);

            let r = euler_to_rotation(&EulerAngles::new(roll, -FRAC_PI_2, yaw));
            let e = rotation_to_euler(&r);
            assert_eq!(e.roll, 0.0);
            assert_eq!(e.pitch, -FRAC_PI_2);
            assert!((wrap_angle(e.yaw - (yaw + roll))).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_output_is_canonical() {
        let e = rotation_to_euler(&Rotation::rz(PI));
        assert!(e.is_canonical());
        assert_eq!(e.yaw, PI);
    }

    #[test]
    fn projection_examples() {
        let k = k100();
        let p = project(&k, &Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (320.0, 240.0, 2.0));
        let p = project(&k, &Vec3::new(0.5, 0.0, 1.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (370.0, 240.0, 1.0));
        assert!(matches!(
            project(&k, &Vec3::new(0.0, 0.0, 0.0)),
            Err(Error::DegenerateDepth(_))
        ));
    }

    #[test]
    fn back_projection_examples() {
        let k = k100();
        assert_eq!(back_project(&k, 320.0, 240.0, 2.0).unwrap(), Vec3::new(0.0, 0.0, 2.0));
        assert_eq!(back_project(&k, 370.0, 240.0, 1.0).unwrap(), Vec3::new(0.5, 0.0, 1.0));
        assert!(back_project(&k, 1.0, 1.0, 0.0).is_err());
        assert!(back_project(&k, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn triangulation_examples() {
        let k = CameraIntrinsics::new(100.0, 100.0, 0.0, 0.0, 640, 480).unwrap();
        let rig = StereoRig::new(k, k, 0.1).unwrap();
        let c = triangulate(&rig, [10.0, 0.0], [0.0, 0.0]).unwrap();
        assert!((c - Vec3::new(0.1, 0.0, 1.0)).norm() < 1e-15);
        assert!(matches!(
            triangulate(&rig, [5.0, 3.0], [5.0, 3.0]),
            Err(Error::NonPositiveDisparity(_))
        ));
        assert!(matches!(
            triangulate(&rig, [5.2, 3.0], [5.0, 3.0]),
            Err(Error::DisparityTooSmall { .. })
        ));
        assert!(triangulate_with(&rig, [5.2, 3.0], [5.0, 3.0], 0.1).is_ok());
    }

    #[test]
    fn triangulation_inverts_stereo_projection() {
        let rig = StereoRig::symmetric(640, 480, 500.0, 0.1).unwrap();
        let c = Vec3::new(0.13, -0.07, 1.4);
        let l = rig.project(Eye::Left, &c).unwrap();
        let r = rig.project(Eye::Right, &c).unwrap();
        let t = triangulate(&rig, [l.u, l.v], [r.u, r.v]).unwrap();
        assert!((t - c).norm() < 1e-9);
    }

    #[test]
    fn geodesic_examples() {
        let r = euler_to_rotation(&EulerAngles::new(0.3, -0.2, 1.1));
        assert_eq!(geodesic_angle(&r, &r), 0.0);
        let q = geodesic_angle(&Rotation::identity(), &Rotation::rz(FRAC_PI_2));
        assert!((q - FRAC_PI_2).abs() < 1e-15);
        let a = geodesic_angle(&Rotation::identity(), &(Rotation::rx(0.3) * Rotation::ry(0.0)));
        assert!((a - 0.3).abs() < 1e-15);
        let h = geodesic_angle(&Rotation::identity(), &Rotation::rx(PI));
        assert!((h - PI).abs() < 1e-12);
    }

    #[test]
    fn rotation_validation() {
        assert!(Rotation::from_matrix(Mat3::identity() * 2.0).is_err());
        assert!(Rotation::from_matrix(-Mat3::identity()).is_err());
        assert!(Rotation::from_matrix(*Rotation::rz(0.3).matrix()).is_ok());
    }

    #[test]
    fn exp_matches_axis_rotations() {
        let r = Rotation::exp(&Vec3::new(0.0, 0.0, 0.7));
        assert!((r.matrix() - Rotation::rz(0.7).matrix()).norm() < 1e-15);
        let r = Rotation::from_axis_angle(&Vec3::new(2.0, 0.0, 0.0), -0.4);
        assert!((r.matrix() - Rotation::rx(-0.4).matrix()).norm() < 1e-15);
    }

    #[test]
    fn pose_row_major_round_trip() {
        let p = Pose::new(
            euler_to_rotation(&EulerAngles::new(0.1, 0.5, -2.0)),
            Vec3::new(0.1, -0.2, 1.5),
        );
        let q = Pose::from_row_major(&p.to_row_major()).unwrap();
        assert!((q.rotation.matrix() - p.rotation.matrix()).norm() < 1e-14);
        assert_eq!(q.center, p.center);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 - 4.0 * PI) - 0.5).abs() < 1e-12);
    }
}
