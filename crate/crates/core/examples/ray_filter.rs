//! Samples depth hypotheses along the ray through a noisy center estimate
//! and picks the one whose rendering best matches the observations.

use raytrack::ray_filter::{
    make_hypotheses, ray_through, render_points, sample_depths, score_hypotheses, select_top1, Distribution,
    SamplerConfig, ScorerConfig, StereoObservations,
};
use raytrack::{Eye, ObjectModel, Pose, Rotation, StereoRig, Vec3};

fn main() -> raytrack::Result<()> {
    let rig = StereoRig::symmetric(640, 480, 500.0, 0.12)?;
    let model = ObjectModel::cube(0.08, 16, 1)?;
    let truth = Pose::new(Rotation::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.6), Vec3::new(0.03, -0.02, 0.9));
    let observed = StereoObservations {
        left: render_points(&model, &truth, &rig, Eye::Left, 0),
        right: render_points(&model, &truth, &rig, Eye::Right, 0),
    };
    let (u, v, z) = ray_through(&rig.left, &truth.center)?;
    let beta = model.diameter();
    let guess = z + 0.6 * beta;
    for distribution in [Distribution::Uniform, Distribution::Gaussian] {
        let sampler = SamplerConfig { count: 64, beta, distribution, seed: 2 };
        let depths = sample_depths(guess, &sampler);
        let mut set = make_hypotheses(&rig.left, u, v, &depths, &truth.rotation)?;
        score_hypotheses(&mut set, &model, &observed, &rig, &ScorerConfig::default())?;
        let (_, best) = select_top1(&set)?;
        println!(
            "{distribution:?}: start {:.1} mm off, best hypothesis {:.1} mm off",
            (guess - z) * 1e3,
            (best.depth - z) * 1e3
        );
    }
    Ok(())
}
