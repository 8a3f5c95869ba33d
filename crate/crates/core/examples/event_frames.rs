//! Synthesizes events between two rendered frames and accumulates them
//! into an event image.

use raytrack::sim::{generate, synthesize_events, SceneConfig, SceneKind};
use raytrack::vision::accumulate_events;

fn main() -> raytrack::Result<()> {
    let mut scene = SceneConfig::preset(SceneKind::Pendulum, 3);
    scene.duration = 0.2;
    let (frames, _) = generate(&scene)?;
    let (a, b) = (&frames[2], &frames[3]);
    let batch = synthesize_events(&a.left, &b.left, 0.15)?;
    println!("{} events between t={:.3} and t={:.3}", batch.len(), a.timestamp, b.timestamp);
    let on = batch.events().iter().filter(|e| e.polarity > 0).count();
    println!("{on} on, {} off", batch.len() - on);
    let img = accumulate_events(&batch, b.timestamp - a.timestamp, b.timestamp);
    let lit = img.pixels().iter().filter(|&&p| p > 0.0).count();
    println!("event image {}x{}, {lit} active pixels", img.width(), img.height());
    Ok(())
}
