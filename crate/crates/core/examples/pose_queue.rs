//! Adaptive motion queue: blending a noisy orientation stream and
//! suppressing a 180 degree flip.

use raytrack::geom::geodesic_angle;
use raytrack::pipeline::amq_flip_ablation;
use raytrack::pose_queue::PoseQueue;
use raytrack::{Pose, Rotation, Vec3};

fn main() -> raytrack::Result<()> {
    let center = Vec3::new(0.0, 0.0, 1.0);
    let mut queue = PoseQueue::new(4, 0.5)?;
    let truth = Rotation::rz(0.7);
    // frame 0 has no history and starts from the look-at hypothesis
    for i in 0..8 {
        let noisy = truth * Rotation::rx(if i % 2 == 0 { 0.08 } else { -0.08 });
        let pivot = queue.pivot_rotation(&center, i, Some(&noisy))?;
        println!(
            "frame {i}: raw error {:.2} deg, pivot error {:.2} deg",
            geodesic_angle(&noisy, &truth).to_degrees(),
            geodesic_angle(&pivot, &truth).to_degrees()
        );
        queue.enqueue(i, Pose::new(noisy, center));
    }
    for row in amq_flip_ablation(300, 0.5, 4)? {
        println!("N={} switches {} mean e_r {:.2} deg", row.n, row.switch, row.e_r);
    }
    Ok(())
}
