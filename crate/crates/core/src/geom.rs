//! Small geometric primitives shared by the mesh, learning and surfacing code.

use std::collections::HashMap;

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

pub fn v3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.insert(p);
        }
        b
    }

    pub fn insert(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.extent().norm()
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb {
            min: self.min - Vec3::repeat(r),
            max: self.max + Vec3::repeat(r),
        }
    }
}

/// Uniform scale followed by translation: `p -> s * p + t`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Similarity {
    pub s: f64,
    pub t: Vec3,
}

impl Default for Similarity {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        s: 1.0,
        t: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn new(s: f64, t: Vec3) -> Self {
        Self { s, t }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.s + self.t
    }

    pub fn inverse(&self) -> Similarity {
        Similarity {
            s: 1.0 / self.s,
            t: -self.t / self.s,
        }
    }

    /// `other` after `self`.
    pub fn then(&self, other: &Similarity) -> Similarity {
        Similarity {
            s: other.s * self.s,
            t: self.t * other.s + other.t,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.s > 0.0 && self.s.is_finite() && self.t.iter().all(|c| c.is_finite())
    }
}

pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Open or closed polyline.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polyline {
    pub points: Vec<Vec3>,
    pub closed: bool,
}

impl Polyline {
    pub fn new(points: Vec<Vec3>, closed: bool) -> Self {
        Self { points, closed }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        let n = self.points.len();
        let count = match n {
            0 => 0,
            1 => 1,
            _ if self.closed => n,
            _ => n - 1,
        };
        (0..count).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }
}

/// A collection of segments with a bucket grid for fast radius queries.
#[derive(Clone, Debug)]
pub struct SegmentSet {
    segs: Vec<(Vec3, Vec3)>,
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl SegmentSet {
    /// `cell` should be close to the query radius used with [`Self::within`].
    pub fn new(lines: &[Polyline], cell: f64) -> Self {
        let segs: Vec<_> = lines.iter().flat_map(|l| l.segments()).collect();
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, (a, b)) in segs.iter().enumerate() {
            let lo = key(&a.inf(b), cell);
            let hi = key(&a.sup(b), cell);
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        buckets.entry([x, y, z]).or_default().push(i as u32);
                    }
                }
            }
        }
        Self { segs, cell, buckets }
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    /// Exact distance to the nearest segment (infinity when empty).
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.segs
            .iter()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether some segment lies strictly closer than `r`.
    pub fn within(&self, p: &Vec3, r: f64) -> bool {
        if r > self.cell {
            return self.distance(p) < r;
        }
        let k = key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in ids {
                            let (a, b) = &self.segs[i as usize];
                            if point_segment_distance(p, a, b) < r {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

fn key(p: &Vec3, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}
