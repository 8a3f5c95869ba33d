use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
    pub timestamp: f64,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>, timestamp: f64) -> Result<Self> {
        if width == 0 || height == 0 || width * height != pixels.len() {
            return Err(Error::GeometryMismatch(format!(
                "{width}x{height} frame with {} pixels",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32, timestamp: f64) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            pixels: vec![value.clamp(0.0, 1.0); width * height],
            timestamp,
        }
    }

    /// Builds a frame from a per-pixel function; values are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        timestamp: f64,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            pixels,
            timestamp,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    /// Pixel value with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample with border clamping.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let ax = (x - x0) as f32;
        let ay = (y - y0) as f32;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let a = self.get_clamped(xi, yi);
        let b = self.get_clamped(xi + 1, yi);
        let c = self.get_clamped(xi, yi + 1);
        let d = self.get_clamped(xi + 1, yi + 1);
        (1.0 - ay) * ((1.0 - ax) * a + ax * b) + ay * ((1.0 - ax) * c + ax * d)
    }

    pub fn same_geometry(&self, other: &GrayFrame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Encodes as binary PGM (P5, 8-bit).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&p| (p * 255.0).round() as u8));
        out
    }

    pub fn from_pgm(bytes: &[u8], timestamp: f64, path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(bytes);
        let mut header = Vec::new();
        // magic, width, height, maxval; comments start with '#'
        while header.len() < 4 {
            let mut line = String::new();
            if reader
                .read_line(&mut line)
                .map_err(|e| Error::io(path, e))?
                == 0
            {
                return Err(Error::parse(path, "truncated PGM header"));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        if header[0] != "P5" {
            return Err(Error::parse(path, format!("unsupported PGM magic {}", header[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, format!("bad PGM header field {s:?}")))
        };
        let (width, height, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval != 255 {
            return Err(Error::parse(path, "only 8-bit PGM is supported"));
        }
        let mut data = Vec::with_capacity(width * height);
        reader
            .read_to_end(&mut data)
            .map_err(|e| Error::io(path, e))?;
        if data.len() != width * height {
            return Err(Error::parse(
                path,
                format!("expected {} pixel bytes, found {}", width * height, data.len()),
            ));
        }
        let pixels = data.into_iter().map(|b| b as f32 / 255.0).collect();
        Self::new(width, height, pixels, timestamp)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn load_pgm(path: &Path, timestamp: f64) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm(&bytes, timestamp, path)
    }
}

/// File name carrying the frame timestamp, e.g. `cam_t0001.250000.pgm`.
pub fn timestamped_pgm_name(prefix: &str, timestamp: f64) -> String {
    format!("{prefix}_t{timestamp:011.6}.pgm")
}

/// Recovers the timestamp from a name produced by [`timestamped_pgm_name`].
pub fn timestamp_from_pgm_name(name: &str) -> Option<f64> {
    let stem = name.strip_suffix(".pgm")?;
    let (_, t) = stem.rsplit_once("_t")?;
    t.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry_and_range() {
        assert!(GrayFrame::new(2, 2, vec![0.0; 3], 0.0).is_err());
        assert!(GrayFrame::new(2, 1, vec![0.0, 1.5], 0.0).is_err());
        assert!(GrayFrame::new(2, 1, vec![0.0, f32::NAN], 0.0).is_err());
    }

    #[test]
    fn bilinear_sampling() {
        let f = GrayFrame::new(2, 2, vec![0.0, 1.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(f.sample(0.5, 0.5), 0.5);
        assert_eq!(f.sample(1.0, 0.0), 1.0);
        assert_eq!(f.sample(5.0, -3.0), 1.0);
    }

    #[test]
    fn pgm_round_trip_is_quantized() {
        let f = GrayFrame::from_fn(5, 3, 1.5, |x, y| (x + y) as f32 / 7.0);
        let bytes = f.to_pgm();
        let g = GrayFrame::from_pgm(&bytes, 1.5, Path::new("x.pgm")).unwrap();
        assert_eq!(g.width(), 5);
        for (a, b) in f.pixels().iter().zip(g.pixels()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
        // re-encoding a decoded frame is lossless
        assert_eq!(g.to_pgm(), bytes);
    }

    #[test]
    fn timestamp_in_name() {
        let n = timestamped_pgm_name("left", 12.5);
        assert_eq!(timestamp_from_pgm_name(&n), Some(12.5));
        assert_eq!(timestamp_from_pgm_name("junk.pgm"), None);
    }
}
