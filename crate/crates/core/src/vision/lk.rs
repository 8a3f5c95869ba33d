//! Sparse pyramidal Lucas–Kanade tracking.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vision::{GrayFrame, Pyramid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkParams {
    /// Integration window side in pixels (odd, ≥ 3).
    pub window: usize,
    /// Maximum Gauss-Newton iterations per pyramid level.
    pub iterations: usize,
    /// Minimum eigenvalue of the window-averaged structure tensor.
    pub min_eigen: f64,
    /// Update norm (pixels) below which a level is considered converged.
    pub epsilon: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            window: 15,
            iterations: 10,
            min_eigen: 1e-4,
            epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tracked,
    Lost,
}

/// Points at time `t`, their displacements to `t + 1` and per-point status.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPointSet {
    pub points: Vec<[f64; 2]>,
    pub displacements: Vec<[f64; 2]>,
    pub status: Vec<TrackStatus>,
    pub width: usize,
    pub height: usize,
}

impl TrackedPointSet {
    /// A set where every point is tracked with the given displacement.
    pub fn from_parts(
        points: Vec<[f64; 2]>,
        displacements: Vec<[f64; 2]>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if points.len() != displacements.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} points but {} displacements",
                points.len(),
                displacements.len()
            )));
        }
        let status = vec![TrackStatus::Tracked; points.len()];
        Ok(Self {
            points,
            displacements,
            status,
            width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_tracked(&self, i: usize) -> bool {
        self.status[i] == TrackStatus::Tracked
    }

    pub fn tracked_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_tracked(i)).collect()
    }

    pub fn tracked_count(&self) -> usize {
        self.status
            .iter()
            .filter(|s| **s == TrackStatus::Tracked)
            .count()
    }

    /// `p / (W, H)`.
    pub fn normalized(&self, i: usize) -> [f64; 2] {
        [
            self.points[i][0] / self.width as f64,
            self.points[i][1] / self.height as f64,
        ]
    }

    /// Position at `t + 1`.
    pub fn destination(&self, i: usize) -> [f64; 2] {
        [
            self.points[i][0] + self.displacements[i][0],
            self.points[i][1] + self.displacements[i][1],
        ]
    }

    /// Swaps the roles of `t` and `t + 1`: points move to their destinations
    /// and displacements flip sign.
    pub fn reversed(&self) -> Self {
        let points = (0..self.len()).map(|i| self.destination(i)).collect();
        let displacements = self.displacements.iter().map(|d| [-d[0], -d[1]]).collect();
        Self {
            points,
            displacements,
            status: self.status.clone(),
            width: self.width,
            height: self.height,
        }
    }
}

/// Tracks `points` from `prev` into `next`.
pub fn lk_track(
    prev: &Pyramid,
    next: &Pyramid,
    points: &[[f64; 2]],
    params: &LkParams,
) -> Result<TrackedPointSet> {
    if !prev.same_geometry(next) {
        return Err(Error::GeometryMismatch(
            "previous and next pyramids differ in geometry".into(),
        ));
    }
    if params.window < 3 || params.window % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "LK window must be odd and at least 3, got {}",
            params.window
        )));
    }
    let base = prev.base();
    let results: Vec<Option<[f64; 2]>> = points
        .par_iter()
        .map(|p| track_one(prev, next, *p, params))
        .collect();
    let mut displacements = Vec::with_capacity(points.len());
    let mut status = Vec::with_capacity(points.len());
    for r in results {
        match r {
            Some(d) => {
                displacements.push(d);
                status.push(TrackStatus::Tracked);
            }
            None => {
                displacements.push([0.0, 0.0]);
                status.push(TrackStatus::Lost);
            }
        }
    }
    Ok(TrackedPointSet {
        points: points.to_vec(),
        displacements,
        status,
        width: base.width(),
        height: base.height(),
    })
}

/// Re-tracks the destinations of `forward` from `next` back into `prev` and
/// marks points lost whose round trip misses the start by more than
/// `max_error` pixels. Windows straddling two motions rarely survive this.
pub fn forward_backward_check(
    forward: &TrackedPointSet,
    prev: &Pyramid,
    next: &Pyramid,
    params: &LkParams,
    max_error: f64,
) -> Result<TrackedPointSet> {
    let idx = forward.tracked_indices();
    let dest: Vec<[f64; 2]> = idx.iter().map(|&i| forward.destination(i)).collect();
    let back = lk_track(next, prev, &dest, params)?;
    let mut out = forward.clone();
    for (k, &i) in idx.iter().enumerate() {
        let d = forward.displacements[i];
        let b = back.displacements[k];
        let err = (d[0] + b[0]).hypot(d[1] + b[1]);
        if !back.is_tracked(k) || !(err <= max_error) {
            out.status[i] = TrackStatus::Lost;
            out.displacements[i] = [0.0, 0.0];
        }
    }
    Ok(out)
}

fn inside(frame: &GrayFrame, x: f64, y: f64) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (frame.width() - 1) as f64 && y <= (frame.height() - 1) as f64
}

fn track_one(prev: &Pyramid, next: &Pyramid, p: [f64; 2], params: &LkParams) -> Option<[f64; 2]> {
    let base = prev.base();
    if !inside(base, p[0], p[1]) {
        return None;
    }
    let half = (params.window / 2) as isize;
    let side = params.window;
    let ext = side + 2;
    let n = (side * side) as f64;
    let mut patch = vec![0.0f32; ext * ext];
    let mut warped = vec![0.0f32; side * side];
    let mut ix = vec![0.0f32; side * side];
    let mut iy = vec![0.0f32; side * side];
    let mut guess = [0.0f64; 2];
    let max_level = prev.depth() - 1;
    let max_disp = (params.window << max_level) as f64;

    for level in (0..=max_level).rev() {
        let scale = 1.0 / (1u32 << level) as f64;
        let (px, py) = (p[0] * scale, p[1] * scale);
        let img_i = prev.level(level);
        let img_j = next.level(level);

        sample_patch(img_i, px, py, half + 1, &mut patch);
        let (mut gxx, mut gxy, mut gyy) = (0.0f64, 0.0f64, 0.0f64);
        for r in 0..side {
            for c in 0..side {
                let at = (r + 1) * ext + (c + 1);
                let dx = 0.5 * (patch[at + 1] - patch[at - 1]);
                let dy = 0.5 * (patch[at + ext] - patch[at - ext]);
                ix[r * side + c] = dx;
                iy[r * side + c] = dy;
                gxx += (dx * dx) as f64;
                gxy += (dx * dy) as f64;
                gyy += (dy * dy) as f64;
            }
        }
        let tr = 0.5 * (gxx + gyy);
        let min_eig = tr - ((0.5 * (gxx - gyy)).powi(2) + gxy * gxy).sqrt();
        let det = gxx * gyy - gxy * gxy;
        let textured = min_eig / n >= params.min_eigen && det > 0.0;
        if !textured && level == 0 {
            return None;
        }

        // coarse levels without enough texture just pass the guess down
        let mut v = [0.0f64; 2];
        let iterations = if textured { params.iterations } else { 0 };
        for _ in 0..iterations {
            let qx = px + guess[0] + v[0];
            let qy = py + guess[1] + v[1];
            if !qx.is_finite() || !qy.is_finite() {
                return None;
            }
            sample_patch(img_j, qx, qy, half, &mut warped);
            let (mut bx, mut by) = (0.0f64, 0.0f64);
            for r in 0..side {
                for c in 0..side {
                    let k = r * side + c;
                    let diff = patch[(r + 1) * ext + (c + 1)] - warped[k];
                    bx += (diff * ix[k]) as f64;
                    by += (diff * iy[k]) as f64;
                }
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            v[0] += ex;
            v[1] += ey;
            if ex * ex + ey * ey < params.epsilon * params.epsilon {
                break;
            }
        }
        if level > 0 {
            guess = [2.0 * (guess[0] + v[0]), 2.0 * (guess[1] + v[1])];
        } else {
            guess = [guess[0] + v[0], guess[1] + v[1]];
        }
        if !(guess[0].abs() <= max_disp && guess[1].abs() <= max_disp) {
            return None;
        }
    }
    if !inside(base, p[0] + guess[0], p[1] + guess[1]) {
        return None;
    }
    Some(guess)
}

/// Samples a `(2·half+1)²` patch centered at `(cx, cy)` with one set of
/// bilinear weights shared by every pixel of the patch.
fn sample_patch(img: &GrayFrame, cx: f64, cy: f64, half: isize, out: &mut [f32]) {
    let side = (2 * half + 1) as usize;
    debug_assert_eq!(out.len(), side * side);
    let x0 = cx.floor();
    let y0 = cy.floor();
    let ax = (cx - x0) as f32;
    let ay = (cy - y0) as f32;
    let (w00, w01, w10, w11) = (
        (1.0 - ax) * (1.0 - ay),
        ax * (1.0 - ay),
        (1.0 - ax) * ay,
        ax * ay,
    );
    let xs = x0 as isize - half;
    let ys = y0 as isize - half;
    let w = img.width() as isize;
    let h = img.height() as isize;
    let px = img.pixels();
    if xs >= 0 && ys >= 0 && xs + (side as isize) < w && ys + (side as isize) < h {
        let stride = w as usize;
        for r in 0..side {
            let row0 = (ys as usize + r) * stride + xs as usize;
            let row1 = row0 + stride;
            let dst = &mut out[r * side..(r + 1) * side];
            for (c, d) in dst.iter_mut().enumerate() {
                *d = w00 * px[row0 + c]
                    + w01 * px[row0 + c + 1]
                    + w10 * px[row1 + c]
                    + w11 * px[row1 + c + 1];
            }
        }
    } else {
        for r in 0..side as isize {
            for c in 0..side as isize {
                let (x, y) = (xs + c, ys + r);
                out[(r as usize) * side + c as usize] = w00 * img.get_clamped(x, y)
                    + w01 * img.get_clamped(x + 1, y)
                    + w10 * img.get_clamped(x, y + 1)
                    + w11 * img.get_clamped(x + 1, y + 1);
            }
        }
    }
}
