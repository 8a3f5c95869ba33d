//! Point-sampled object models and their text file format.
//!
//! ```text
//! points <n> diameter <d>
//! x y z            (n lines)
//! symmetry <k>     (optional)
//! r00 r01 ... r22  (k lines, row-major)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Pose, Rotation, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    points: Vec<Vec3>,
    diameter: f64,
    centroid: Vec3,
    symmetry_group: Vec<Rotation>,
}

impl ObjectModel {
    /// Builds a model, computing its diameter. An empty `symmetry_group`
    /// means the object is asymmetric.
    pub fn new(points: Vec<Vec3>, symmetry_group: Vec<Rotation>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyModel);
        }
        let symmetry_group = if symmetry_group.is_empty() {
            vec![Rotation::identity()]
        } else {
            symmetry_group
        };
        if !symmetry_group
            .iter()
            .any(|g| (g.matrix() - Mat3::identity()).norm() < 1e-9)
        {
            return Err(Error::InvalidParameter(
                "symmetry group must contain the identity".into(),
            ));
        }
        let diameter = max_pairwise_distance(&points);
        let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
        Ok(Self {
            points,
            diameter,
            centroid,
            symmetry_group,
        })
    }

    /// Axis-aligned cube of edge `side` centered at the origin: its 8 corners
    /// plus `per_face` well-spread random points on each face, with the
    /// 24-element rotation group.
    pub fn cube(side: f64, per_face: usize, seed: u64) -> Result<Self> {
        if !(side > 0.0) {
            return Err(Error::InvalidParameter(format!("cube side {side}")));
        }
        let h = side / 2.0;
        let mut points = Vec::new();
        for sx in [-h, h] {
            for sy in [-h, h] {
                for sz in [-h, h] {
                    points.push(Vec3::new(sx, sy, sz));
                }
            }
        }
        let spacing = 0.7 * side / ((per_face as f64).sqrt() + 1.0);
        let margin = 0.08 * side;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut placed = 0;
                let mut attempts = 0;
                while placed < per_face && attempts < 5000 {
                    attempts += 1;
                    let mut p = Vec3::zeros();
                    p[axis] = sign * h;
                    p[(axis + 1) % 3] = rng.random_range(-h + margin..h - margin);
                    p[(axis + 2) % 3] = rng.random_range(-h + margin..h - margin);
                    if points.iter().all(|q| (q - p).norm() >= spacing) {
                        points.push(p);
                        placed += 1;
                    }
                }
            }
        }
        Self::new(points, cube_symmetry_group())
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    pub fn symmetry_group(&self) -> &[Rotation] {
        &self.symmetry_group
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry_group.len() > 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same geometry without symmetries.
    pub fn without_symmetry(&self) -> Self {
        Self {
            symmetry_group: vec![Rotation::identity()],
            ..self.clone()
        }
    }

    /// Marks points whose outward direction (from the model centroid) faces a
    /// camera centered at `eye_origin`. Exact for convex, centrally star-shaped
    /// objects such as the cube.
    pub fn visibility(&self, pose: &Pose, eye_origin: &Vec3) -> Vec<bool> {
        let c = pose.transform(&self.centroid);
        self.points
            .iter()
            .map(|x| {
                let p = pose.transform(x);
                let normal = p - c;
                normal.norm_squared() == 0.0 || normal.dot(&(eye_origin - p)) > 1e-12
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "points {} diameter {}", self.points.len(), self.diameter).unwrap();
        for p in &self.points {
            writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
        }
        if self.is_symmetric() {
            writeln!(s, "symmetry {}", self.symmetry_group.len()).unwrap();
            for g in &self.symmetry_group {
                let m = g.matrix();
                let row: Vec<String> = (0..3)
                    .flat_map(|r| (0..3).map(move |c| (r, c)))
                    .map(|(r, c)| m[(r, c)].to_string())
                    .collect();
                writeln!(s, "{}", row.join(" ")).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let err = |msg: String| Error::parse(path, msg);
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| err(format!("unexpected end of file, expected {what}")))
        };
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| err(format!("bad number {t:?}")))
        };
        if next("points")? != "points" {
            return Err(err("missing `points` header".into()));
        }
        let n: usize = next("count")?
            .parse()
            .map_err(|_| err("bad point count".into()))?;
        if next("diameter")? != "diameter" {
            return Err(err("missing `diameter` header".into()));
        }
        let diameter = num(next("diameter value")?)?;
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let x = num(next("x")?)?;
            let y = num(next("y")?)?;
            let z = num(next("z")?)?;
            points.push(Vec3::new(x, y, z));
        }
        let mut group = Vec::new();
        if let Ok(tag) = next("symmetry") {
            if tag != "symmetry" {
                return Err(err(format!("unexpected token {tag:?}")));
            }
            let k: usize = next("symmetry count")?
                .parse()
                .map_err(|_| err("bad symmetry count".into()))?;
            for _ in 0..k {
                let mut v = [0.0; 9];
                for slot in v.iter_mut() {
                    *slot = num(next("matrix entry")?)?;
                }
                let m = Mat3::from_row_slice(&v);
                group.push(Rotation::from_matrix(m).map_err(|e| err(e.to_string()))?);
            }
        }
        let model = Self::new(points, group).map_err(|e| err(e.to_string()))?;
        if (model.diameter - diameter).abs() > 1e-6 {
            return Err(err(format!(
                "declared diameter {diameter} disagrees with point set ({})",
                model.diameter
            )));
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn max_pairwise_distance(points: &[Vec3]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}

/// The 24 proper rotations mapping the cube onto itself: signed permutation
/// matrices with determinant +1.
pub fn cube_symmetry_group() -> Vec<Rotation> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut group = Vec::with_capacity(24);
    for perm in PERMS {
        for signs in 0..8u32 {
            let mut m = Mat3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                m[(row, col)] = if signs & (1 << row) != 0 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                group.push(Rotation::from_matrix_unchecked(m));
            }
        }
    }
    group
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::geodesic_angle;

    #[test]
    fn cube_group_has_24_distinct_rotations() {
        let g = cube_symmetry_group();
        assert_eq!(g.len(), 24);
        for (i, a) in g.iter().enumerate() {
            assert!(Rotation::from_matrix(*a.matrix()).is_ok());
            for b in &g[i + 1..] {
                assert!(geodesic_angle(a, b) > 0.1);
            }
        }
        // closed under composition
        for a in &g {
            for b in &g {
                let ab = a * b;
                assert!(g.iter().any(|c| geodesic_angle(c, &ab) < 1e-12));
            }
        }
    }

    #[test]
    fn cube_diameter_is_space_diagonal() {
        let m = ObjectModel::cube(0.1, 9, 7).unwrap();
        assert!((m.diameter() - 0.1 * 3f64.sqrt()).abs() < 1e-12);
        assert!(m.len() > 8 + 6 * 6);
        assert!(m.centroid().norm() < 0.01);
    }

    #[test]
    fn empty_model_rejected() {
        assert!(matches!(ObjectModel::new(vec![], vec![]), Err(Error::EmptyModel)));
    }

    #[test]
    fn group_without_identity_rejected() {
        let r = ObjectModel::new(vec![Vec3::x()], vec![Rotation::rz(1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = ObjectModel::cube(0.08, 5, 3).unwrap();
        let back = ObjectModel::from_text(&m.to_text(), Path::new("m.txt")).unwrap();
        assert_eq!(back, m);
        let plain = m.without_symmetry();
        let back = ObjectModel::from_text(&plain.to_text(), Path::new("m.txt")).unwrap();
        assert_eq!(back.symmetry_group().len(), 1);
    }

    #[test]
    fn diameter_mismatch_rejected() {
        let text = "points 2 diameter 5\n0 0 0\n1 0 0\n";
        assert!(ObjectModel::from_text(text, Path::new("m.txt")).is_err());
        let text = "points 2 diameter 1\n0 0 0\n1 0 0\n";
        assert!(ObjectModel::from_text(text, Path::new("m.txt")).is_ok());
    }

    #[test]
    fn front_face_visible_back_face_hidden() {
        let m = ObjectModel::cube(0.1, 4, 1).unwrap();
        let pose = Pose::new(Rotation::identity(), Vec3::new(0.0, 0.0, 1.0));
        let vis = m.visibility(&pose, &Vec3::zeros());
        for (p, v) in m.points().iter().zip(&vis) {
            if p.z < -0.049 && p.x.abs() < 0.045 && p.y.abs() < 0.045 {
                assert!(*v, "front face point {p:?} hidden");
            }
            if p.z > 0.049 {
                assert!(!*v, "back face point {p:?} visible");
            }
        }
    }
}
