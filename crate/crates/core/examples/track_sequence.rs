//! Tracks an in-memory pendulum scene and scores the result.

use raytrack::pipeline::{evaluate_frames, track_sequence, RunConfig};
use raytrack::sim::{generate, SceneConfig, SceneKind};

fn main() -> raytrack::Result<()> {
    let mut scene = SceneConfig::preset(SceneKind::Pendulum, 1);
    scene.duration = 2.0;
    let (frames, _) = generate(&scene)?;
    let out = track_sequence(&RunConfig::default(), frames.as_slice(), &scene.rig, &scene.model)?;
    for f in out.frames.iter().step_by(10) {
        let c = f.pose.center;
        println!("frame {:>2} {:?} center ({:.3}, {:.3}, {:.3})", f.index, f.status, c.x, c.y, c.z);
    }
    let report = evaluate_frames(&frames, &out, &scene.rig, &scene.model)?;
    let o = &report.overall;
    println!(
        "ADD {:.3} ADD-S {:.3} e_p {:.2} cm e_r {:.2} deg at {:.1} fps",
        o.add_recall_01d, o.adds_recall_01d, o.e_p.mean, o.e_r.mean, out.fps()
    );
    Ok(())
}
