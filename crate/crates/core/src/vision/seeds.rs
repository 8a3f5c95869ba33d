use crate::vision::GrayFrame;

/// Central-difference gradient magnitude with replicated borders.
pub fn gradient_magnitude(frame: &GrayFrame) -> Vec<f32> {
    let (w, h) = (frame.width(), frame.height());
    let px = frame.pixels();
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            let gx = 0.5 * (px[y * w + right] - px[y * w + left]);
            let gy = 0.5 * (px[down * w + x] - px[up * w + x]);
            out[y * w + x] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Separable `[1 2 1] / 4` smoothing in both directions, replicated borders.
pub fn binomial_blur(frame: &GrayFrame) -> GrayFrame {
    let (w, h) = (frame.width(), frame.height());
    let px = frame.pixels();
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &px[y * w..(y + 1) * w];
        for x in 0..w {
            let l = row[x.saturating_sub(1)];
            let r = row[(x + 1).min(w - 1)];
            tmp[y * w + x] = 0.25 * (l + 2.0 * row[x] + r);
        }
    }
    GrayFrame::from_fn(w, h, frame.timestamp, |x, y| {
        let up = tmp[y.saturating_sub(1) * w + x];
        let down = tmp[(y + 1).min(h - 1) * w + x];
        0.25 * (up + 2.0 * tmp[y * w + x] + down)
    })
}

/// One feature per `grid_step × grid_step` cell, placed on the cell's
/// strongest-gradient pixel (first in row-major order on ties) and kept only
/// when that gradient reaches `min_gradient`. Cells are visited row-major.
pub fn seed_points(frame: &GrayFrame, grid_step: usize, min_gradient: f32) -> Vec<[f64; 2]> {
    let step = grid_step.max(1);
    let (w, h) = (frame.width(), frame.height());
    let mag = gradient_magnitude(frame);
    let mut seeds = Vec::new();
    for cy in (0..h).step_by(step) {
        for cx in (0..w).step_by(step) {
            let mut best = (f32::NEG_INFINITY, 0usize, 0usize);
            for y in cy..(cy + step).min(h) {
                let row = &mag[y * w..(y + 1) * w];
                for (x, &m) in row.iter().enumerate().take((cx + step).min(w)).skip(cx) {
                    if m > best.0 {
                        best = (m, x, y);
                    }
                }
            }
            if best.0 >= min_gradient {
                seeds.push([best.1 as f64, best.2 as f64]);
            }
        }
    }
    seeds
}

/// Moves each point to the brightness centroid of its `(2r+1)²` window,
/// weighting pixels by how far they rise above the window mean, for up to
/// three mean-shift steps. Points on flat windows stay put.
pub fn refine_to_peaks(frame: &GrayFrame, points: &[[f64; 2]], radius: usize) -> Vec<[f64; 2]> {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let r = radius as isize;
    points
        .iter()
        .map(|&p| {
            let mut q = p;
            for _ in 0..3 {
                let (cx, cy) = (q[0].round() as isize, q[1].round() as isize);
                let (x0, x1) = ((cx - r).max(0), (cx + r).min(w - 1));
                let (y0, y1) = ((cy - r).max(0), (cy + r).min(h - 1));
                if x0 > x1 || y0 > y1 {
                    break;
                }
                let mut sum = 0.0f64;
                let mut count = 0.0f64;
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        sum += frame.get(x as usize, y as usize) as f64;
                        count += 1.0;
                    }
                }
                let mean = sum / count;
                let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let a = frame.get(x as usize, y as usize) as f64 - mean;
                        if a > 0.0 {
                            sw += a;
                            sx += a * x as f64;
                            sy += a * y as f64;
                        }
                    }
                }
                if sw <= 1e-9 {
                    break;
                }
                let next = [sx / sw, sy / sw];
                let step = (next[0] - q[0]).hypot(next[1] - q[1]);
                q = next;
                if step < 0.05 {
                    break;
                }
            }
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_has_no_seeds() {
        let f = GrayFrame::filled(64, 48, 0.3, 0.0);
        assert!(seed_points(&f, 8, 1e-6).is_empty());
    }

    #[test]
    fn single_bright_pixel() {
        let f = GrayFrame::from_fn(11, 11, 0.0, |x, y| if (x, y) == (5, 5) { 1.0 } else { 0.0 });
        let seeds = seed_points(&f, 11, 0.1);
        // four 4-neighbours tie at 0.5; the first in row-major order wins
        assert_eq!(seeds, vec![[5.0, 4.0]]);
        let mag = gradient_magnitude(&f);
        assert_eq!(mag[4 * 11 + 5], 0.5);
        assert_eq!(mag[5 * 11 + 5], 0.0);
    }

    #[test]
    fn grid_bound() {
        let f = GrayFrame::from_fn(640, 480, 0.0, |x, y| {
            (0.5 + 0.4 * ((x as f32) * 0.7).sin() * ((y as f32) * 0.3).cos()).clamp(0.0, 1.0)
        });
        let seeds = seed_points(&f, 16, 0.01);
        assert!(seeds.len() <= 40 * 30);
        assert!(seeds.len() > 1000);
    }

    #[test]
    fn deterministic() {
        let f = GrayFrame::from_fn(50, 40, 0.0, |x, y| ((x * 7 + y * 13) % 11) as f32 / 10.0);
        assert_eq!(seed_points(&f, 5, 0.05), seed_points(&f, 5, 0.05));
    }

    #[test]
    fn blur_preserves_constants_and_mass() {
        let f = GrayFrame::filled(9, 7, 0.3, 1.5);
        let b = binomial_blur(&f);
        assert!(b.pixels().iter().all(|&p| (p - 0.3).abs() < 1e-7));
        assert_eq!(b.timestamp, 1.5);
        let g = GrayFrame::from_fn(9, 9, 0.0, |x, y| if (x, y) == (4, 4) { 1.0 } else { 0.0 });
        let b = binomial_blur(&g);
        assert_eq!(b.get(4, 4), 0.25);
        assert_eq!(b.get(3, 4), 0.125);
        assert_eq!(b.get(3, 3), 0.0625);
        let total: f32 = b.pixels().iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn peaks_move_to_blob_centers() {
        // symmetric 3x3 blob centered at (10, 12)
        let f = GrayFrame::from_fn(24, 24, 0.0, |x, y| {
            let (dx, dy) = (x as f32 - 10.0, y as f32 - 12.0);
            if dx.abs() <= 1.0 && dy.abs() <= 1.0 {
                1.0 - 0.3 * (dx.abs() + dy.abs())
            } else {
                0.2
            }
        });
        let out = refine_to_peaks(&f, &[[11.0, 13.0], [3.0, 3.0]], 3);
        assert!((out[0][0] - 10.0).abs() < 1e-9 && (out[0][1] - 12.0).abs() < 1e-9);
        assert_eq!(out[1], [3.0, 3.0]);
    }
}
