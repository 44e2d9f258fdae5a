use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Similarity, Vec3};
use crate::meshkit::mesh::TriMesh;

/// Oriented surface samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub source_face: Vec<usize>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }

    pub fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            normals: idx.iter().map(|&i| self.normals[i]).collect(),
            source_face: idx.iter().map(|&i| self.source_face[i]).collect(),
        }
    }

    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> PointCloud {
        let idx: Vec<_> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.select(&idx)
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        self.normals.extend_from_slice(&other.normals);
        self.source_face.extend_from_slice(&other.source_face);
    }

    /// `p -> s p + t`; normals are unchanged by a uniform positive scale.
    pub fn transformed(&self, xf: &Similarity) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| xf.apply(p)).collect(),
            normals: self.normals.clone(),
            source_face: self.source_face.clone(),
        }
    }

    /// Exactly `n` points: a random subset when there are enough, otherwise
    /// drawn with replacement.
    pub fn resample(&self, n: usize, rng: &mut impl Rng) -> Result<PointCloud> {
        if self.is_empty() {
            return Err(Error::Empty("point cloud to resample"));
        }
        let idx: Vec<usize> = if self.len() >= n {
            rand::seq::index::sample(rng, self.len(), n).into_vec()
        } else {
            (0..n).map(|_| rng.random_range(0..self.len())).collect()
        };
        Ok(self.select(&idx))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Uniform,
    PoissonDisk,
}

/// Target minimum spacing for `n` Poisson-disk samples over `area`.
pub fn poisson_radius(area: f64, n: usize) -> f64 {
    (area / (n as f64 * 2.0 * 3f64.sqrt())).sqrt()
}

pub fn sample_surface(mesh: &TriMesh, n: usize, mode: SampleMode, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Ok(PointCloud::default());
    }
    let area = mesh.total_area();
    if area <= 0.0 || !area.is_finite() {
        return Err(Error::Degenerate("mesh has no surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        SampleMode::Uniform => Ok(uniform(mesh, n, &mut rng)),
        SampleMode::PoissonDisk => Ok(poisson_disk(mesh, n, area, &mut rng)),
    }
}

/// Area-proportional samples. Face selection is stratified over the area
/// CDF, so per-face counts stay within one of their expectation; the output
/// order is shuffled.
fn uniform(mesh: &TriMesh, n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for f in 0..mesh.triangles.len() {
        acc += mesh.face_area(f);
        cdf.push(acc);
    }
    let mut out = PointCloud::default();
    for k in 0..n {
        let u = (k as f64 + rng.random::<f64>()) / n as f64 * acc;
        let f = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        push_in_face(mesh, f, rng, &mut out);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    out.select(&order)
}

fn push_in_face(mesh: &TriMesh, f: usize, rng: &mut impl Rng, out: &mut PointCloud) {
    let [a, b, c] = mesh.triangles[f];
    let (a, b, c) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    out.points.push(a + (b - a) * u + (c - a) * v);
    out.normals.push(mesh.face_normal(f));
    out.source_face.push(f);
}

/// Dart throwing over a dense uniform pool at the target radius, followed
/// by greedy elimination of the most crowded samples down to exactly `n`.
fn poisson_disk(mesh: &TriMesh, n: usize, area: f64, rng: &mut ChaCha8Rng) -> PointCloud {
    let r = poisson_radius(area, n);
    let pool = uniform(mesh, 12 * n, rng);
    let mut grid = HashGrid::new(r);
    let mut accepted: Vec<usize> = Vec::new();
    for i in 0..pool.len() {
        let p = &pool.points[i];
        if grid.nearest(p, r, &pool.points).is_none() {
            grid.insert(p, i);
            accepted.push(i);
        }
    }
    if accepted.len() < n {
        // Too few darts landed; fill with the pool points farthest from the
        // current set.
        let mut taken = vec![false; pool.len()];
        for &i in &accepted {
            taken[i] = true;
        }
        let mut rest: Vec<usize> = (0..pool.len()).filter(|&i| !taken[i]).collect();
        while accepted.len() < n && !rest.is_empty() {
            let (k, _) = rest
                .iter()
                .enumerate()
                .map(|(k, &i)| {
                    let d = accepted
                        .iter()
                        .map(|&j| (pool.points[i] - pool.points[j]).norm_squared())
                        .fold(f64::INFINITY, f64::min);
                    (k, d)
                })
                .fold((0, -1.0), |b, x| if x.1 > b.1 { x } else { b });
            let i = rest.swap_remove(k);
            accepted.push(i);
        }
        return pool.select(&accepted);
    }
    eliminate(&pool.points, &mut accepted, n, r);
    pool.select(&accepted)
}

/// Repeatedly removes a point of the closest remaining pair.
fn eliminate(points: &[Vec3], ids: &mut Vec<usize>, n: usize, r: f64) {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
        }
    }

    let mut grid = HashGrid::new(r);
    for &i in ids.iter() {
        grid.insert(&points[i], i);
    }
    let mut alive: HashMap<usize, bool> = ids.iter().map(|&i| (i, true)).collect();
    let nn = |grid: &HashGrid, i: usize| grid.nearest_excluding(&points[i], i, points);
    let mut heap: BinaryHeap<Item> = ids.iter().map(|&i| Item(nn(&grid, i), i)).collect();
    let mut remaining = ids.len();
    while remaining > n {
        let Some(Item(d, i)) = heap.pop() else { break };
        if !alive[&i] {
            continue;
        }
        let cur = nn(&grid, i);
        if cur > d {
            heap.push(Item(cur, i));
            continue;
        }
        alive.insert(i, false);
        grid.remove(&points[i], i);
        remaining -= 1;
    }
    ids.retain(|i| alive[i]);
}

/// Spatial hash over point indices with cell size `h`.
struct HashGrid {
    h: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl HashGrid {
    fn new(h: f64) -> Self {
        Self {
            h,
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: &Vec3) -> [i64; 3] {
        [
            (p.x / self.h).floor() as i64,
            (p.y / self.h).floor() as i64,
            (p.z / self.h).floor() as i64,
        ]
    }

    fn insert(&mut self, p: &Vec3, i: usize) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(i);
    }

    fn remove(&mut self, p: &Vec3, i: usize) {
        let k = self.key(p);
        if let Some(c) = self.cells.get_mut(&k) {
            c.retain(|&j| j != i);
        }
    }

    /// Some index strictly closer than `r <= h`.
    fn nearest(&self, p: &Vec3, r: f64, pts: &[Vec3]) -> Option<usize> {
        let k = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(c) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&j) = c.iter().find(|&&j| (pts[j] - p).norm() < r) {
                            return Some(j);
                        }
                    }
                }
            }
        }
        None
    }

    /// Distance from `p` to the nearest stored point other than `skip`,
    /// searching rings of cells outward.
    fn nearest_excluding(&self, p: &Vec3, skip: usize, pts: &[Vec3]) -> f64 {
        let k = self.key(p);
        let mut best = f64::INFINITY;
        for ring in 0i64..64 {
            if best <= (ring - 1).max(0) as f64 * self.h {
                break;
            }
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        if let Some(c) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &j in c {
                                if j != skip {
                                    best = best.min((pts[j] - p).norm());
                                }
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Centers a cloud at its centroid and scales its bounding-box diagonal to
/// one. Returns the normalized cloud and the map back to input coordinates.
pub fn normalize_cloud(cloud: &PointCloud) -> Result<(PointCloud, Similarity)> {
    if cloud.is_empty() {
        return Err(Error::Empty("point cloud to normalize"));
    }
    let fwd = normalizing_transform(&cloud.points)?;
    Ok((cloud.transformed(&fwd), fwd.inverse()))
}

/// The transform that moves the centroid of `points` to the origin and
/// scales the bounding-box diagonal to one.
pub fn normalizing_transform(points: &[Vec3]) -> Result<Similarity> {
    let c = points.iter().sum::<Vec3>() / points.len() as f64;
    let d = Aabb::from_points(points).diagonal();
    if d <= 0.0 || !d.is_finite() {
        return Err(Error::Degenerate("point set has zero diameter".into()));
    }
    let s = 1.0 / d;
    Ok(Similarity::new(s, -c * s))
}
