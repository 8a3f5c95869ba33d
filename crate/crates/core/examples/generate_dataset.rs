//! Writes a short scene to disk and reads it back.

use raytrack::sim::{write_dataset, Dataset, SceneConfig, SceneKind};

fn main() -> raytrack::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("raytrack_example_dataset").display().to_string());
    let mut scene = SceneConfig::preset(SceneKind::Spin, 1);
    scene.duration = 1.0;
    let manifest = write_dataset(&scene, dir.as_ref())?;
    let ds = Dataset::open(dir.as_ref())?;
    println!("wrote {} frames to {dir}", manifest.len());
    for e in manifest.iter().step_by(10) {
        println!("frame {:>3} t={:.3} {:>7.1} px/s {}", e.idx, e.t, e.v, e.bin.name());
    }
    println!("reloaded {} poses, model of {} points", ds.poses.len(), ds.model.points().len());
    Ok(())
}
