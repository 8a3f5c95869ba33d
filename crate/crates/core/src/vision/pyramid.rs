use crate::error::{Error, Result};
use crate::vision::GrayFrame;

/// Coarse-to-fine image pyramid; level 0 is the source frame.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<GrayFrame>,
}

impl Pyramid {
    pub fn levels(&self) -> &[GrayFrame] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &GrayFrame {
        &self.levels[i]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn base(&self) -> &GrayFrame {
        &self.levels[0]
    }

    pub fn same_geometry(&self, other: &Pyramid) -> bool {
        self.depth() == other.depth()
            && self
                .levels
                .iter()
                .zip(&other.levels)
                .all(|(a, b)| a.same_geometry(b))
    }
}

/// Builds `levels` levels by repeated 2×2 box filtering and decimation.
/// Odd dimensions round up, replicating the last row/column.
///
/// The coarsest level must keep at least 2 pixels per side, so the frame
/// needs `2^levels` pixels in each dimension.
pub fn build_pyramid(frame: &GrayFrame, levels: usize) -> Result<Pyramid> {
    let min_side = frame.width().min(frame.height());
    if levels == 0 || levels >= usize::BITS as usize || min_side < (1usize << levels) {
        return Err(Error::PyramidTooDeep {
            width: frame.width(),
            height: frame.height(),
            levels,
        });
    }
    let mut out = Vec::with_capacity(levels);
    out.push(frame.clone());
    for _ in 1..levels {
        let prev = out.last().unwrap();
        out.push(downsample(prev));
    }
    Ok(Pyramid { levels: out })
}

fn downsample(src: &GrayFrame) -> GrayFrame {
    let w = src.width().div_ceil(2);
    let h = src.height().div_ceil(2);
    let (sw, sh) = (src.width(), src.height());
    let px = src.pixels();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = 2 * y;
        let y1 = (y0 + 1).min(sh - 1);
        let r0 = &px[y0 * sw..(y0 + 1) * sw];
        let r1 = &px[y1 * sw..(y1 + 1) * sw];
        for x in 0..w {
            let x0 = 2 * x;
            let x1 = (x0 + 1).min(sw - 1);
            data.push(0.25 * (r0[x0] + r0[x1] + r1[x0] + r1[x1]));
        }
    }
    GrayFrame::from_fn(w, h, src.timestamp, |x, y| data[y * w + x])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_stays_constant() {
        let f = GrayFrame::filled(37, 29, 0.5, 0.0);
        let p = build_pyramid(&f, 3).unwrap();
        assert_eq!(p.depth(), 3);
        for level in p.levels() {
            assert!(level.pixels().iter().all(|&v| v == 0.5));
        }
        assert_eq!((p.level(1).width(), p.level(1).height()), (19, 15));
        assert_eq!((p.level(2).width(), p.level(2).height()), (10, 8));
    }

    #[test]
    fn too_deep_rejected() {
        let f = GrayFrame::filled(8, 8, 0.5, 0.0);
        assert!(matches!(build_pyramid(&f, 4), Err(Error::PyramidTooDeep { .. })));
        assert!(build_pyramid(&f, 3).is_ok());
        assert!(build_pyramid(&f, 0).is_err());
    }

    #[test]
    fn checkerboard_averages_to_half() {
        let f = GrayFrame::from_fn(16, 12, 0.0, |x, y| ((x + y) % 2) as f32);
        let p = build_pyramid(&f, 2).unwrap();
        assert!(p.level(1).pixels().iter().all(|&v| v == 0.5));
    }
}
