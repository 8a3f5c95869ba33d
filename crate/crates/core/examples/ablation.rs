//! Sweeps the queue length and the depth distribution on a generated scene.

use raytrack::pipeline::{ablation_csv, cmd_ablate, AblationAxis, RunConfig};
use raytrack::sim::{write_dataset, SceneConfig, SceneKind};

fn main() -> raytrack::Result<()> {
    let dir = tempfile_dir();
    let mut scene = SceneConfig::preset(SceneKind::Pendulum, 2);
    scene.duration = 1.0;
    write_dataset(&scene, &dir.join("ds"))?;
    let mut run = RunConfig::default();
    run.dataset = dir.join("ds");
    run.out = dir.join("ablation");
    for axis in [AblationAxis::AmqN, AblationAxis::Distribution] {
        let rows = cmd_ablate(&run, axis)?;
        print!("{}", ablation_csv(axis, &rows));
    }
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("raytrack_ablation_{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create temp dir");
    dir
}
