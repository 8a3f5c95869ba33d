//! Pyramidal Lucas-Kanade on a translated texture.

use raytrack::vision::{build_pyramid, lk_track, seed_points, GrayFrame, LkParams};

fn texture(x: f64, y: f64) -> f32 {
    let v = 0.5
        + 0.18 * (0.21 * x + 0.05 * y).sin()
        + 0.14 * (0.13 * y - 0.07 * x).cos()
        + 0.08 * (0.37 * x + 0.29 * y).sin()
        + 0.05 * (0.47 * y + 0.03 * x).cos();
    v as f32
}

fn main() -> raytrack::Result<()> {
    let (dx, dy) = (5.0, -3.0);
    let a = GrayFrame::from_fn(320, 240, 0.0, |x, y| texture(x as f64, y as f64));
    let b = GrayFrame::from_fn(320, 240, 1.0 / 30.0, |x, y| texture(x as f64 - dx, y as f64 - dy));
    let seeds = seed_points(&a, 16, 0.0);
    let t = lk_track(&build_pyramid(&a, 3)?, &build_pyramid(&b, 3)?, &seeds, &LkParams::default())?;
    let idx = t.tracked_indices();
    let mean = idx.iter().fold([0.0; 2], |m, &i| {
        [m[0] + t.displacements[i][0] / idx.len() as f64, m[1] + t.displacements[i][1] / idx.len() as f64]
    });
    println!("{} of {} seeds tracked", idx.len(), seeds.len());
    println!("mean flow ({:.3}, {:.3}), true ({dx}, {dy})", mean[0], mean[1]);
    Ok(())
}
