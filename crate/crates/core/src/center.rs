//! Object center tracking: motion-consistency clustering of tracked features
//! in each eye, dominant-cluster selection and stereo triangulation.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{triangulate_with, StereoRig, Vec3, DEFAULT_MIN_DISPARITY};
use crate::vision::TrackedPointSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyParams {
    /// Weight of the normalized position against the displacement.
    pub lambda: f64,
    /// Maximum z-space distance for two points to be consistent.
    pub tau: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            lambda: 0.3,
            tau: 1.0,
        }
    }
}

/// Symmetric boolean relation over the tracked points of a set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyMatrix {
    /// Point index (into the tracked set) of each row.
    members: Vec<usize>,
    data: Vec<bool>,
}

impl ConsistencyMatrix {
    /// Wraps a square row-major relation whose rows are points `0..n`.
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::GeometryMismatch("consistency matrix is not square".into()));
        }
        Ok(Self {
            members: (0..n).collect(),
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.len() + j]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.len()).all(|i| self.get(i, i))
    }
}

/// Per-dimension z-score; dimensions without spread map to zero.
fn zscore_columns(features: &mut [[f64; 4]]) {
    let n = features.len() as f64;
    for d in 0..4 {
        let mean = features.iter().map(|f| f[d]).sum::<f64>() / n;
        let var = features.iter().map(|f| (f[d] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let degenerate = std <= 1e-12 * mean.abs().max(1.0);
        for f in features.iter_mut() {
            f[d] = if degenerate { 0.0 } else { (f[d] - mean) / std };
        }
    }
}

/// Pairwise consistency of the tracked points of `tracked`: two points agree
/// when their z-scored `[Δp, λ·p̂]` vectors lie within `τ` of each other.
pub fn consistency_matrix(
    tracked: &TrackedPointSet,
    params: &ConsistencyParams,
) -> Result<ConsistencyMatrix> {
    if !(params.lambda >= 0.0) || !(params.tau > 0.0) {
        return Err(Error::InvalidParameter(format!("{params:?}")));
    }
    let members = tracked.tracked_indices();
    if members.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: members.len(),
        });
    }
    let mut features: Vec<[f64; 4]> = members
        .iter()
        .map(|&i| {
            let d = tracked.displacements[i];
            let p = tracked.normalized(i);
            [d[0], d[1], params.lambda * p[0], params.lambda * p[1]]
        })
        .collect();
    zscore_columns(&mut features);
    let n = members.len();
    let tau2 = params.tau * params.tau;
    let mut data = vec![false; n * n];
    for i in 0..n {
        data[i * n + i] = true;
        for j in i + 1..n {
            let (a, b) = (&features[i], &features[j]);
            let d2: f64 = (0..4).map(|k| (a[k] - b[k]).powi(2)).sum();
            let c = d2 <= tau2;
            data[i * n + j] = c;
            data[j * n + i] = c;
        }
    }
    Ok(ConsistencyMatrix { members, data })
}

/// Connected components of the consistency graph, as lists of point indices.
/// Components are ordered (and labeled) by their smallest member.
pub fn cluster(consistency: &ConsistencyMatrix) -> Vec<Vec<usize>> {
    let n = consistency.len();
    let mut label = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    let mut stack = Vec::new();
    for root in 0..n {
        if label[root] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut comp = Vec::new();
        label[root] = id;
        stack.push(root);
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                if label[j] == usize::MAX && consistency.get(i, j) {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        clusters.push(comp.into_iter().map(|i| consistency.members[i]).collect());
    }
    clusters
}

/// Outcome of dominant-cluster selection in one eye.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// Cluster id per point of the tracked set; `None` for lost points.
    pub labels: Vec<Option<usize>>,
    pub dominant: usize,
    /// Point indices of the dominant cluster.
    pub members: Vec<usize>,
    pub centroid_2d: [f64; 2],
    /// Every cluster was static; the dominant one is a fallback.
    pub low_confidence: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Picks the object cluster: clusters whose median displacement is below
/// `eps_static` pixels are background; among the rest the largest wins, then
/// the faster, then the lower label. With no moving cluster the largest
/// overall is returned and flagged low-confidence.
pub fn select_dominant(
    clusters: &[Vec<usize>],
    tracked: &TrackedPointSet,
    eps_static: f64,
) -> Result<ClusterResult> {
    if clusters.is_empty() || clusters.iter().any(|c| c.is_empty()) {
        return Err(Error::InsufficientPoints {
            needed: 1,
            got: 0,
        });
    }
    let mag = |i: usize| {
        let d = tracked.displacements[i];
        d[0].hypot(d[1])
    };
    struct Stats {
        size: usize,
        mean: f64,
        moving: bool,
    }
    let stats: Vec<Stats> = clusters
        .iter()
        .map(|c| {
            let mut m: Vec<f64> = c.iter().map(|&i| mag(i)).collect();
            let mean = m.iter().sum::<f64>() / m.len() as f64;
            Stats {
                size: c.len(),
                mean,
                moving: median(&mut m) >= eps_static,
            }
        })
        .collect();
    let better = |a: usize, b: usize| {
        let (sa, sb) = (&stats[a], &stats[b]);
        sa.size > sb.size || (sa.size == sb.size && sa.mean > sb.mean)
    };
    let pick = |candidates: &mut dyn Iterator<Item = usize>| {
        let mut best: Option<usize> = None;
        for k in candidates {
            best = match best {
                Some(b) if !better(k, b) => Some(b),
                _ => Some(k),
            };
        }
        best
    };
    let moving = pick(&mut (0..clusters.len()).filter(|&k| stats[k].moving));
    let (dominant, low_confidence) = match moving {
        Some(k) => (k, false),
        None => (pick(&mut (0..clusters.len())).unwrap(), true),
    };
    let members = clusters[dominant].clone();
    let mut centroid = [0.0, 0.0];
    for &i in &members {
        centroid[0] += tracked.points[i][0];
        centroid[1] += tracked.points[i][1];
    }
    centroid[0] /= members.len() as f64;
    centroid[1] /= members.len() as f64;
    let mut labels = vec![None; tracked.len()];
    for (k, c) in clusters.iter().enumerate() {
        for &i in c {
            labels[i] = Some(k);
        }
    }
    Ok(ClusterResult {
        labels,
        dominant,
        members,
        centroid_2d: centroid,
        low_confidence,
    })
}

/// Grows the dominant cluster with every other moving cluster that comes
/// within `radius` pixels of it, repeatedly, so an object whose flow field
/// splits into several components is taken whole. Low-confidence results are
/// returned unchanged.
pub fn absorb_adjacent(
    result: &ClusterResult,
    tracked: &TrackedPointSet,
    eps_static: f64,
    radius: f64,
) -> ClusterResult {
    if result.low_confidence {
        return result.clone();
    }
    let k = result.labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, l) in result.labels.iter().enumerate() {
        if let Some(l) = l {
            clusters[*l].push(i);
        }
    }
    let moving: Vec<bool> = clusters
        .iter()
        .map(|c| {
            let mut m: Vec<f64> = c
                .iter()
                .map(|&i| tracked.displacements[i][0].hypot(tracked.displacements[i][1]))
                .collect();
            !m.is_empty() && median(&mut m) >= eps_static
        })
        .collect();
    let r2 = radius * radius;
    let near = |a: &[usize], b: &[usize]| {
        a.iter().any(|&i| {
            b.iter().any(|&j| {
                let (p, q) = (tracked.points[i], tracked.points[j]);
                (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= r2
            })
        })
    };
    let mut taken = vec![false; k];
    taken[result.dominant] = true;
    let mut members = clusters[result.dominant].clone();
    loop {
        let mut grew = false;
        for c in 0..k {
            if !taken[c] && moving[c] && near(&clusters[c], &members) {
                taken[c] = true;
                members.extend_from_slice(&clusters[c]);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    members.sort_unstable();
    let n = members.len() as f64;
    let centroid = [
        members.iter().map(|&i| tracked.points[i][0]).sum::<f64>() / n,
        members.iter().map(|&i| tracked.points[i][1]).sum::<f64>() / n,
    ];
    ClusterResult {
        members,
        centroid_2d: centroid,
        ..result.clone()
    }
}

/// Consistency, clustering and dominant selection for one eye.
pub fn segment(
    tracked: &TrackedPointSet,
    params: &ConsistencyParams,
    eps_static: f64,
) -> Result<ClusterResult> {
    let m = consistency_matrix(tracked, params)?;
    let clusters = cluster(&m);
    select_dominant(&clusters, tracked, eps_static)
}

/// Triangulates the object center from the two dominant-cluster centroids.
pub fn track_center(rig: &StereoRig, left: &ClusterResult, right: &ClusterResult) -> Result<Vec3> {
    track_center_with(rig, left, right, DEFAULT_MIN_DISPARITY)
}

pub fn track_center_with(
    rig: &StereoRig,
    left: &ClusterResult,
    right: &ClusterResult,
    min_disparity: f64,
) -> Result<Vec3> {
    triangulate_with(rig, left.centroid_2d, right.centroid_2d, min_disparity)
}

/// Debug dump: `point_id,label,du,dv`, label `-1` for lost points.
pub fn labels_csv(tracked: &TrackedPointSet, result: &ClusterResult) -> String {
    let mut s = String::from("point_id,label,du,dv\n");
    for (i, label) in result.labels.iter().enumerate() {
        let d = tracked.displacements[i];
        let l = label.map_or(-1, |l| l as i64);
        writeln!(s, "{i},{l},{},{}", d[0], d[1]).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Eye;
    use crate::vision::TrackStatus;

    fn set(points: Vec<[f64; 2]>, disp: Vec<[f64; 2]>) -> TrackedPointSet {
        TrackedPointSet::from_parts(points, disp, 640, 480).unwrap()
    }

    #[test]
    fn identical_points_fully_consistent() {
        let t = set(vec![[10.0, 20.0]; 5], vec![[1.5, -0.5]; 5]);
        let m = consistency_matrix(&t, &ConsistencyParams::default()).unwrap();
        assert!((0..5).all(|i| (0..5).all(|j| m.get(i, j))));
    }

    #[test]
    fn two_point_distance_by_hand() {
        // every dimension differs, so each z-scores to ±1 and the distance is 2·√4 = 4
        let t = set(vec![[10.0, 20.0], [30.0, 50.0]], vec![[1.0, 0.0], [3.0, 2.0]]);
        let mut p = ConsistencyParams { lambda: 0.3, tau: 3.99 };
        assert!(!consistency_matrix(&t, &p).unwrap().get(0, 1));
        p.tau = 4.0;
        assert!(consistency_matrix(&t, &p).unwrap().get(0, 1));
        // two dimensions without spread contribute nothing: distance 2·√2
        let t = set(vec![[10.0, 20.0], [10.0, 20.0]], vec![[1.0, 0.0], [3.0, 2.0]]);
        p.tau = 2.0 * 2f64.sqrt() - 1e-9;
        assert!(!consistency_matrix(&t, &p).unwrap().get(0, 1));
        p.tau = 2.0 * 2f64.sqrt() + 1e-9;
        assert!(consistency_matrix(&t, &p).unwrap().get(0, 1));
    }

    #[test]
    fn too_few_points() {
        let mut t = set(vec![[1.0, 1.0], [2.0, 2.0]], vec![[0.0, 0.0]; 2]);
        t.status[1] = TrackStatus::Lost;
        assert!(matches!(
            consistency_matrix(&t, &ConsistencyParams::default()),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn lost_points_are_skipped() {
        let mut t = set(vec![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]], vec![[0.0, 0.0]; 3]);
        t.status[1] = TrackStatus::Lost;
        let m = consistency_matrix(&t, &ConsistencyParams::default()).unwrap();
        assert_eq!(m.members(), &[0, 2]);
        let r = segment(&t, &ConsistencyParams::default(), 0.5).unwrap();
        assert_eq!(r.labels[1], None);
    }

    #[test]
    fn cluster_trivial_matrices() {
        let ones = ConsistencyMatrix::from_rows(vec![vec![true; 4]; 4]).unwrap();
        assert_eq!(cluster(&ones), vec![vec![0, 1, 2, 3]]);
        let eye = ConsistencyMatrix::from_rows(
            (0..3).map(|i| (0..3).map(|j| i == j).collect()).collect(),
        )
        .unwrap();
        assert_eq!(cluster(&eye), vec![vec![0], vec![1], vec![2]]);
        let blocks = ConsistencyMatrix::from_rows(
            (0..5)
                .map(|i| (0..5).map(|j| (i % 2) == (j % 2)).collect())
                .collect(),
        )
        .unwrap();
        assert_eq!(cluster(&blocks), vec![vec![0, 2, 4], vec![1, 3]]);
    }

    #[test]
    fn moving_cluster_beats_static() {
        let t = set(
            vec![[0.0, 0.0], [1.0, 0.0], [100.0, 0.0], [101.0, 0.0]],
            vec![[5.0, 0.0], [5.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        );
        let r = select_dominant(&[vec![0, 1], vec![2, 3]], &t, 0.5).unwrap();
        assert_eq!(r.dominant, 0);
        assert!(!r.low_confidence);
        assert_eq!(r.centroid_2d, [0.5, 0.0]);
    }

    #[test]
    fn larger_moving_cluster_wins() {
        let n = 40;
        let points: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, 0.0]).collect();
        let disp = vec![[3.0, 1.0]; n];
        let t = set(points, disp);
        let small: Vec<usize> = (0..10).collect();
        let big: Vec<usize> = (10..40).collect();
        let r = select_dominant(&[small, big], &t, 0.5).unwrap();
        assert_eq!(r.dominant, 1);
        assert_eq!(r.members.len(), 30);
    }

    #[test]
    fn all_static_falls_back() {
        let t = set(vec![[0.0, 0.0]; 5], vec![[0.1, 0.0]; 5]);
        let r = select_dominant(&[vec![0], vec![1, 2, 3], vec![4]], &t, 0.5).unwrap();
        assert_eq!(r.dominant, 1);
        assert!(r.low_confidence);
    }

    #[test]
    fn equal_size_tie_prefers_faster_then_lower_label() {
        let t = set(vec![[0.0, 0.0]; 4], vec![[1.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 0.0]]);
        let r = select_dominant(&[vec![0, 1], vec![2, 3]], &t, 0.5).unwrap();
        assert_eq!(r.dominant, 1);
        let t = set(vec![[0.0, 0.0]; 4], vec![[1.0, 0.0]; 4]);
        let r = select_dominant(&[vec![0, 1], vec![2, 3]], &t, 0.5).unwrap();
        assert_eq!(r.dominant, 0);
    }

    #[test]
    fn center_from_stereo_centroids() {
        let rig = StereoRig::symmetric(640, 480, 500.0, 0.1).unwrap();
        let c = Vec3::new(0.05, 0.02, 1.2);
        let l = rig.project(Eye::Left, &c).unwrap();
        let r = rig.project(Eye::Right, &c).unwrap();
        let mk = |u: f64, v: f64| ClusterResult {
            labels: vec![],
            dominant: 0,
            members: vec![],
            centroid_2d: [u, v],
            low_confidence: false,
        };
        let got = track_center(&rig, &mk(l.u, l.v), &mk(r.u, r.v)).unwrap();
        assert!((got - c).norm() < 1e-9);
        assert!(matches!(
            track_center(&rig, &mk(l.u, l.v), &mk(l.u, l.v)),
            Err(Error::NonPositiveDisparity(_))
        ));
    }

    #[test]
    fn depth_error_from_half_pixel_disparity_error() {
        // dZ ≈ Z² / (b·f) · dd = 1 / 50 · 1 px = 2 cm for ±0.5 px on each centroid
        let rig = StereoRig::symmetric(640, 480, 500.0, 0.1).unwrap();
        let c = Vec3::new(0.0, 0.0, 1.0);
        let l = rig.project(Eye::Left, &c).unwrap();
        let r = rig.project(Eye::Right, &c).unwrap();
        for (dl, dr) in [(0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)] {
            let got = triangulate_with(&rig, [l.u + dl, l.v], [r.u + dr, r.v], 0.5).unwrap();
            assert!((got.z - 1.0).abs() <= 0.021, "{}", got.z);
        }
    }

    #[test]
    fn labels_dump_format() {
        let t = set(vec![[4.0, 4.0], [4.0, 4.0]], vec![[1.0, 2.0], [1.0, 2.0]]);
        let r = segment(&t, &ConsistencyParams::default(), 0.5).unwrap();
        let csv = labels_csv(&t, &r);
        assert_eq!(csv, "point_id,label,du,dv\n0,0,1,2\n1,0,1,2\n");
    }

    #[test]
    fn absorb_joins_adjacent_moving_clusters_only() {
        let points = vec![[10.0, 10.0], [12.0, 10.0], [14.0, 10.0], [80.0, 80.0], [13.0, 11.0]];
        let disp = vec![[3.0, 0.0], [3.0, 0.0], [5.0, 0.0], [4.0, 0.0], [0.0, 0.0]];
        let t = TrackedPointSet::from_parts(points, disp, 100, 100).unwrap();
        let clusters = vec![vec![0, 1], vec![2], vec![3], vec![4]];
        let r = select_dominant(&clusters, &t, 0.5).unwrap();
        assert_eq!(r.members, vec![0, 1]);
        let grown = absorb_adjacent(&r, &t, 0.5, 3.0);
        assert_eq!(grown.members, vec![0, 1, 2]);
        assert_eq!(grown.centroid_2d, [12.0, 10.0]);
        assert_eq!(grown.labels, r.labels);
    }
}
