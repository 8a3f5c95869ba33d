//! Ray pose filter: hypotheses are sampled along the camera ray through the
//! estimated center, scored against the observed features, reduced to the
//! best one and refined.

mod attention;
mod refine;
mod sampling;
mod scoring;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{back_project, project, CameraIntrinsics, Rotation, Vec3};

pub use attention::attention_shapecheck;
pub use refine::{refine, RefineConfig, Refinement};
pub use sampling::{sample_depths, Distribution, SamplerConfig, MIN_DEPTH};
pub use scoring::{chamfer_error, render_points, score_hypotheses, ScorerConfig, StereoObservations};

#[derive(Debug, Clone, PartialEq)]
pub struct RayHypothesis {
    pub center: Vec3,
    pub rotation: Rotation,
    pub depth: f64,
    pub score: f64,
}

/// Hypotheses sharing one pivot rotation and one image ray.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    pub hypotheses: Vec<RayHypothesis>,
    /// Per-hypothesis reprojection error, present once scored.
    pub errors: Option<Vec<f64>>,
}

impl HypothesisSet {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn is_scored(&self) -> bool {
        self.errors.is_some()
    }

    /// Debug dump: `j,depth,err,score`; `err` is empty before scoring.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,depth,err,score\n");
        for (j, h) in self.hypotheses.iter().enumerate() {
            let err = self
                .errors
                .as_ref()
                .map(|e| e[j].to_string())
                .unwrap_or_default();
            writeln!(s, "{j},{},{err},{}", h.depth, h.score).unwrap();
        }
        s
    }
}

/// Pixel and depth of `c`; the ray is every back-projection of that pixel.
pub fn ray_through(k: &CameraIntrinsics, c: &Vec3) -> Result<(f64, f64, f64)> {
    let p = project(k, c)?;
    Ok((p.u, p.v, p.depth))
}

/// One hypothesis per depth on the ray through `(u, v)`, all carrying
/// `pivot`, with uniform initial scores.
pub fn make_hypotheses(
    k: &CameraIntrinsics,
    u: f64,
    v: f64,
    depths: &[f64],
    pivot: &Rotation,
) -> Result<HypothesisSet> {
    if depths.is_empty() {
        return Err(Error::InvalidParameter("no depths to build hypotheses from".into()));
    }
    let score = 1.0 / depths.len() as f64;
    let hypotheses = depths
        .iter()
        .map(|&d| {
            Ok(RayHypothesis {
                center: back_project(k, u, v, d)?,
                rotation: *pivot,
                depth: d,
                score,
            })
        })
        .collect::<Result<_>>()?;
    Ok(HypothesisSet {
        hypotheses,
        errors: None,
    })
}

/// Highest-scoring hypothesis; ties go to the smaller depth, then the lower index.
pub fn select_top1(set: &HypothesisSet) -> Result<(usize, &RayHypothesis)> {
    if !set.is_scored() || set.is_empty() {
        return Err(Error::NotScored);
    }
    let mut best = 0;
    for (j, h) in set.hypotheses.iter().enumerate().skip(1) {
        let b = &set.hypotheses[best];
        if h.score > b.score || (h.score == b.score && h.depth < b.depth) {
            best = j;
        }
    }
    Ok((best, &set.hypotheses[best]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn ray_on_axis() {
        let (u, v, d) = ray_through(&k(), &Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!((u, v, d), (320.0, 240.0, 2.0));
        assert!(matches!(
            ray_through(&k(), &Vec3::new(0.0, 0.0, -1.0)),
            Err(Error::DegenerateDepth(_))
        ));
    }

    #[test]
    fn hypotheses_stay_on_ray() {
        let c = Vec3::new(0.12, -0.07, 1.3);
        let (u, v, d) = ray_through(&k(), &c).unwrap();
        let cfg = SamplerConfig {
            beta: 0.17,
            ..SamplerConfig::default()
        };
        let depths = sample_depths(d, &cfg);
        let pivot = Rotation::rx(0.3);
        let set = make_hypotheses(&k(), u, v, &depths, &pivot).unwrap();
        assert!((set.hypotheses[0].center - c).norm() < 1e-12);
        for h in &set.hypotheses {
            let p = project(&k(), &h.center).unwrap();
            assert!((p.u - u).abs() < 1e-9 && (p.v - v).abs() < 1e-9);
            assert!((p.depth - h.depth).abs() < 1e-9);
            assert_eq!(h.rotation, pivot);
        }
        let total: f64 = set.hypotheses.iter().map(|h| h.score).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_depths() {
        let set = make_hypotheses(&k(), 320.0, 240.0, &[1.0, 2.0], &Rotation::identity()).unwrap();
        assert_eq!(set.hypotheses[0].center, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(set.hypotheses[1].center, Vec3::new(0.0, 0.0, 2.0));
        assert!(make_hypotheses(&k(), 320.0, 240.0, &[], &Rotation::identity()).is_err());
    }

    fn scored(depths: &[f64], scores: &[f64]) -> HypothesisSet {
        let mut set = make_hypotheses(&k(), 320.0, 240.0, depths, &Rotation::identity()).unwrap();
        for (h, s) in set.hypotheses.iter_mut().zip(scores) {
            h.score = *s;
        }
        set.errors = Some(vec![0.0; depths.len()]);
        set
    }

    #[test]
    fn top1_rules() {
        let set = scored(&[1.0, 1.1, 1.2], &[0.1, 0.7, 0.2]);
        assert_eq!(select_top1(&set).unwrap().0, 1);
        let set = scored(&[1.2, 0.9, 1.0], &[1.0 / 3.0; 3]);
        assert_eq!(select_top1(&set).unwrap().0, 1);
        let set = scored(&[1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(select_top1(&set).unwrap().0, 0);
        let unscored = make_hypotheses(&k(), 320.0, 240.0, &[1.0], &Rotation::identity()).unwrap();
        assert!(matches!(select_top1(&unscored), Err(Error::NotScored)));
    }

    #[test]
    fn csv_dump() {
        let set = scored(&[1.0, 2.0], &[0.25, 0.75]);
        assert_eq!(set.to_csv(), "j,depth,err,score\n0,1,0,0.25\n1,2,0,0.75\n");
    }
}
