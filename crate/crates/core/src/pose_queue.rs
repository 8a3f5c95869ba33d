//! Pose memory queue: a short FIFO of recent poses whose orientations are
//! blended in Euler space into the pivot rotation for the next frame.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{euler_to_rotation, rotation_to_euler, wrap_angle, EulerAngles, Pose, Rotation, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct QueueEntry {
    pub frame: usize,
    pub pose: Pose,
}

/// Newest-first pose history holding at most `capacity` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseQueue {
    capacity: usize,
    alpha: f64,
    entries: VecDeque<QueueEntry>,
}

impl Default for PoseQueue {
    fn default() -> Self {
        Self::new(4, 0.5).unwrap()
    }
}

impl PoseQueue {
    /// `capacity = 0` disables the history.
    pub fn new(capacity: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
        }
        Ok(Self {
            capacity,
            alpha,
            entries: VecDeque::with_capacity(capacity + 1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries, newest first.
    pub fn entries(&self) -> impl Iterator<Item = &QueueEntry> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn enqueue(&mut self, frame: usize, pose: Pose) {
        if self.capacity == 0 {
            return;
        }
        self.entries.push_front(QueueEntry { frame, pose });
        self.entries.truncate(self.capacity);
    }

    /// Pivot rotation for `frame_index`. Frame 0, or a missing seed, starts
    /// from the look-at hypothesis for `center`. Otherwise the seed is blended
    /// with the history newest to oldest, each step keeping weight `α` on the
    /// running estimate.
    pub fn pivot_rotation(
        &self,
        center: &Vec3,
        frame_index: usize,
        seed: Option<&Rotation>,
    ) -> Result<Rotation> {
        let seed = match seed {
            Some(s) if frame_index > 0 => s,
            _ => return initial_hypothesis(center),
        };
        let depth = frame_index.min(self.entries.len());
        if depth == 0 {
            return Ok(*seed);
        }
        let mut acc = rotation_to_euler(seed);
        for entry in self.entries.iter().take(depth) {
            acc = blend_euler(&acc, &rotation_to_euler(&entry.pose.rotation), self.alpha);
        }
        Ok(euler_to_rotation(&acc))
    }

    /// Debug dump, one line per entry: `frame,roll,pitch,yaw,cx,cy,cz`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            // adding zero folds -0.0 into 0.0
            let a = rotation_to_euler(&e.pose.rotation);
            let a = [a.roll + 0.0, a.pitch + 0.0, a.yaw + 0.0];
            let c = e.pose.center.map(|v| v + 0.0);
            writeln!(s, "{},{},{},{},{},{},{}", e.frame, a[0], a[1], a[2], c.x, c.y, c.z)
                .unwrap();
        }
        s
    }
}

/// `α·a + (1−α)·b` per component, taken along the shorter arc.
pub fn blend_euler(a: &EulerAngles, b: &EulerAngles, alpha: f64) -> EulerAngles {
    let mix = |x: f64, y: f64| wrap_angle(x + (1.0 - alpha) * wrap_angle(y - x));
    EulerAngles {
        roll: mix(a.roll, b.roll),
        pitch: mix(a.pitch, b.pitch),
        yaw: mix(a.yaw, b.yaw),
    }
}

/// Rotation whose z-axis points from the camera origin at `c`, with its
/// x-axis kept horizontal (no roll about the line of sight).
pub fn initial_hypothesis(c: &Vec3) -> Result<Rotation> {
    if !(c.z > 0.0) || !c.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateDepth(c.z));
    }
    let heading = c.x.atan2(c.z);
    let elevation = c.y.atan2(c.x.hypot(c.z));
    Ok(Rotation::ry(heading) * Rotation::rx(-elevation))
}

/// Runs the queue as a causal filter over a sequence of raw orientation
/// estimates: each raw estimate seeds the blend against the previously
/// filtered outputs, and the output is pushed back into the queue.
pub fn filter_trace(raw: &[Rotation], capacity: usize, alpha: f64) -> Result<Vec<Rotation>> {
    let mut queue = PoseQueue::new(capacity, alpha)?;
    let mut out = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        let filtered = if i == 0 {
            *r
        } else {
            queue.pivot_rotation(&Vec3::z(), i, Some(r))?
        };
        queue.enqueue(i, Pose::new(filtered, Vec3::zeros()));
        out.push(filtered);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::geodesic_angle;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn pose(r: Rotation) -> Pose {
        Pose::new(r, Vec3::new(0.0, 0.0, 1.0))
    }

    fn queue_of(rs: &[Rotation], alpha: f64) -> PoseQueue {
        let mut q = PoseQueue::new(rs.len().max(1), alpha).unwrap();
        // enqueue oldest first so that `rs` ends up newest first
        for (i, r) in rs.iter().enumerate().rev() {
            q.enqueue(i, pose(*r));
        }
        q
    }

    #[test]
    fn look_at_hypothesis() {
        let r = initial_hypothesis(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(geodesic_angle(&r, &Rotation::identity()) < 1e-15);
        // a quarter-turn heading about the camera's vertical axis
        let r = initial_hypothesis(&Vec3::new(1.0, 0.0, 1.0)).unwrap();
        assert!(geodesic_angle(&r, &Rotation::ry(FRAC_PI_4)) < 1e-12);
        let z = r.apply(&Vec3::z());
        assert!((z - Vec3::new(1.0, 0.0, 1.0).normalize()).norm() < 1e-12);
        assert!(matches!(
            initial_hypothesis(&Vec3::new(0.0, 0.0, -1.0)),
            Err(Error::DegenerateDepth(_))
        ));
    }

    #[test]
    fn look_at_axis_points_at_center() {
        let c = Vec3::new(-0.3, 0.4, 1.7);
        let r = initial_hypothesis(&c).unwrap();
        assert!((r.apply(&Vec3::z()) - c.normalize()).norm() < 1e-12);
        assert!(r.apply(&Vec3::x()).y.abs() < 1e-12);
    }

    #[test]
    fn empty_queue_frame_zero() {
        let q = PoseQueue::default();
        let r = q.pivot_rotation(&Vec3::new(0.0, 0.0, 1.0), 0, None).unwrap();
        assert!(geodesic_angle(&r, &Rotation::identity()) < 1e-15);
    }

    #[test]
    fn alpha_one_keeps_seed() {
        let q = queue_of(&[Rotation::rz(0.2)], 1.0);
        let seed = Rotation::rx(0.4);
        let r = q.pivot_rotation(&Vec3::z(), 5, Some(&seed)).unwrap();
        assert!(geodesic_angle(&r, &seed) < 1e-12);
    }

    #[test]
    fn constant_history_fixed_point() {
        let r = Rotation::rz(0.2);
        let q = queue_of(&vec![r; 4], 0.5);
        let out = q.pivot_rotation(&Vec3::z(), 10, Some(&r)).unwrap();
        assert!((out.matrix() - r.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn hand_unrolled_blend() {
        let q = queue_of(&[Rotation::rz(0.1), Rotation::rz(0.3)], 0.5);
        let out = q.pivot_rotation(&Vec3::z(), 7, Some(&Rotation::rz(0.0))).unwrap();
        let yaw = rotation_to_euler(&out).yaw;
        let expected = 0.5 * (0.5 * 0.0 + 0.5 * 0.1) + 0.5 * 0.3;
        assert!((yaw - expected).abs() < 1e-12);
        assert!((yaw - 0.175).abs() < 1e-12);
    }

    #[test]
    fn history_limited_by_frame_index() {
        let q = queue_of(&[Rotation::rz(0.1), Rotation::rz(0.3)], 0.5);
        let out = q.pivot_rotation(&Vec3::z(), 1, Some(&Rotation::rz(0.0))).unwrap();
        assert!((rotation_to_euler(&out).yaw - 0.05).abs() < 1e-12);
    }

    #[test]
    fn blend_crosses_seam_on_short_arc() {
        let a = EulerAngles::new(0.0, 0.0, PI - 0.1);
        let b = EulerAngles::new(0.0, 0.0, -PI + 0.1);
        let m = blend_euler(&a, &b, 0.5);
        assert!((m.yaw.abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn fifo_semantics() {
        let mut q = PoseQueue::new(2, 0.5).unwrap();
        q.enqueue(0, pose(Rotation::rz(0.1)));
        q.enqueue(1, pose(Rotation::rz(0.2)));
        q.enqueue(2, pose(Rotation::rz(0.3)));
        let frames: Vec<usize> = q.entries().map(|e| e.frame).collect();
        assert_eq!(frames, vec![2, 1]);

        let mut q = PoseQueue::new(0, 0.5).unwrap();
        q.enqueue(0, pose(Rotation::identity()));
        assert!(q.is_empty());
        assert!(PoseQueue::new(4, 0.0).is_err());
        assert!(PoseQueue::new(4, 1.5).is_err());
    }

    #[test]
    fn single_flip_outvoted() {
        let truth = Rotation::rx(0.2) * Rotation::ry(-0.3);
        let flip = Rotation::rz(PI) * truth;
        let q = queue_of(&vec![truth; 4], 0.5);
        for n in 2..=4 {
            let mut qn = q.clone();
            qn.capacity = n;
            qn.entries.truncate(n);
            let out = qn.pivot_rotation(&Vec3::z(), 10, Some(&flip)).unwrap();
            assert!(geodesic_angle(&out, &truth) < geodesic_angle(&flip, &truth));
        }
    }

    #[test]
    fn dump_lines() {
        let mut q = PoseQueue::new(2, 0.5).unwrap();
        q.enqueue(3, Pose::new(Rotation::identity(), Vec3::new(0.0, 0.5, 1.0)));
        assert_eq!(q.dump(), "3,0,0,0,0,0.5,1\n");
    }

    #[test]
    fn filter_trace_passthrough_without_history() {
        let raw: Vec<Rotation> = (0..5).map(|i| Rotation::rz(0.1 * i as f64)).collect();
        let out = filter_trace(&raw, 0, 0.5).unwrap();
        for (a, b) in raw.iter().zip(&out) {
            assert!(geodesic_angle(a, b) < 1e-12);
        }
    }
}
