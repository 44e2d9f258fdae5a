use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::meshkit::mesh::TriMesh;

/// Placement of a regular grid: cell `(i, j, k)` spans
/// `origin + [i, i+1) * cell` along each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub res: [usize; 3],
    pub origin: Vec3,
    pub cell: f64,
}

impl GridSpec {
    /// Cubic cells fitted around `bbox`, centered, with at least `margin`
    /// empty cells on every side.
    pub fn fit(bbox: &Aabb, res: [usize; 3], margin: usize) -> Self {
        let e = bbox.extent();
        let cell = (0..3)
            .map(|a| e[a] / (res[a].saturating_sub(2 * margin).max(1)) as f64)
            .fold(0.0, f64::max)
            .max(1e-9);
        let c = bbox.center();
        let origin = Vec3::from_fn(|a, _| c[a] - 0.5 * res[a] as f64 * cell);
        Self { res, origin, cell }
    }

    pub fn cube(res: usize, bbox: &Aabb, margin: usize) -> Self {
        Self::fit(bbox, [res; 3], margin)
    }

    pub fn len(&self) -> usize {
        self.res[0] * self.res[1] * self.res[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.res[0] * (j + self.res[1] * k)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.res[0];
        let j = (idx / self.res[0]) % self.res[1];
        let k = idx / (self.res[0] * self.res[1]);
        [i, j, k]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell
    }

    pub fn center_of(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.center(i, j, k)
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: &Vec3) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let x = ((p[a] - self.origin[a]) / self.cell).floor();
            if x < 0.0 || x >= self.res[a] as f64 {
                return None;
            }
            c[a] = x as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    pub fn bounds(&self) -> Aabb {
        Aabb {
            min: self.origin,
            max: self.origin + Vec3::new(self.res[0] as f64, self.res[1] as f64, self.res[2] as f64) * self.cell,
        }
    }
}

/// One bit per cell, inside = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    bits: Vec<u64>,
}

impl OccupancyGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            bits: vec![0; spec.len().div_ceil(64)],
            spec,
        }
    }

    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn set(&mut self, idx: usize, on: bool) {
        if on {
            self.bits[idx / 64] |= 1 << (idx % 64);
        } else {
            self.bits[idx / 64] &= !(1 << (idx % 64));
        }
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> bool {
        self.get(self.spec.index(i, j, k))
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.spec.len()).filter(|&i| self.get(i))
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.spec != o.spec {
            return Err(Error::invalid("grids are not aligned"));
        }
        Ok(())
    }

    pub fn union(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(Self {
            spec: self.spec,
            bits: self.bits.iter().zip(&o.bits).map(|(a, b)| a | b).collect(),
        })
    }

    pub fn intersection(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(Self {
            spec: self.spec,
            bits: self.bits.iter().zip(&o.bits).map(|(a, b)| a & b).collect(),
        })
    }

    pub fn difference(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(Self {
            spec: self.spec,
            bits: self.bits.iter().zip(&o.bits).map(|(a, b)| a & !b).collect(),
        })
    }

    /// Whether every set cell of `self` is set in `o`.
    pub fn is_subset(&self, o: &Self) -> bool {
        self.spec == o.spec && self.bits.iter().zip(&o.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.spec.len();
        let mut out = Vec::with_capacity(28 + n.div_ceil(8));
        for r in self.spec.res {
            out.extend_from_slice(&(r as u32).to_le_bytes());
        }
        for a in 0..3 {
            out.extend_from_slice(&(self.spec.origin[a] as f32).to_le_bytes());
        }
        out.extend_from_slice(&(self.spec.cell as f32).to_le_bytes());
        let mut body = vec![0u8; n.div_ceil(8)];
        for i in self.iter_set() {
            body[i / 8] |= 1 << (i % 8);
        }
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 28 {
            return Err(Error::invalid("occupancy grid header truncated"));
        }
        let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
        let res = [u(0), u(4), u(8)];
        let spec = GridSpec {
            res,
            origin: Vec3::new(f(12), f(16), f(20)),
            cell: f(24),
        };
        let n = spec.len();
        let body = &bytes[28..];
        if body.len() != n.div_ceil(8) {
            return Err(Error::invalid(format!(
                "occupancy grid body has {} bytes, expected {}",
                body.len(),
                n.div_ceil(8)
            )));
        }
        let mut g = Self::empty(spec);
        for i in 0..n {
            if body[i / 8] >> (i % 8) & 1 == 1 {
                g.set(i, true);
            }
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

/// 6-connected morphological dilation applied `steps` times.
pub fn dilate(grid: &OccupancyGrid, steps: usize) -> OccupancyGrid {
    let mut cur = grid.clone();
    let [rx, ry, rz] = grid.spec.res;
    for _ in 0..steps {
        let mut next = cur.clone();
        for idx in cur.iter_set().collect::<Vec<_>>() {
            let [i, j, k] = grid.spec.coords(idx);
            let mut mark = |i: usize, j: usize, k: usize| next.set(grid.spec.index(i, j, k), true);
            if i > 0 {
                mark(i - 1, j, k);
            }
            if i + 1 < rx {
                mark(i + 1, j, k);
            }
            if j > 0 {
                mark(i, j - 1, k);
            }
            if j + 1 < ry {
                mark(i, j + 1, k);
            }
            if k > 0 {
                mark(i, j, k - 1);
            }
            if k + 1 < rz {
                mark(i, j, k + 1);
            }
        }
        cur = next;
    }
    cur
}

/// Axis-ray parity classifier over a set of closed meshes. A point is
/// inside a mesh when at least two of the three axis rays through it cross
/// the mesh an odd number of times below it; it is inside the set when it
/// is inside any member.
pub struct InsideTester {
    meshes: Vec<MeshRays>,
}

struct MeshRays {
    axes: [AxisBins; 3],
}

/// Triangles projected along one axis, binned on a 2D grid.
struct AxisBins {
    axis: usize,
    tris: Vec<ProjTri>,
    min: [f64; 2],
    size: [f64; 2],
    n: usize,
    bins: Vec<Vec<u32>>,
}

struct ProjTri {
    p: [[f64; 2]; 3],
    // Plane: coordinate along the axis = c0 + cu * u + cv * v.
    c0: f64,
    cu: f64,
    cv: f64,
}

impl InsideTester {
    pub fn new(meshes: &[&TriMesh]) -> Self {
        Self {
            meshes: meshes.iter().map(|m| MeshRays::new(m)).collect(),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.meshes.iter().any(|m| m.contains(p))
    }

    /// Per-mesh membership.
    pub fn contains_in(&self, mesh: usize, p: &Vec3) -> bool {
        self.meshes[mesh].contains(p)
    }

    pub fn num_meshes(&self) -> usize {
        self.meshes.len()
    }

    /// Occupancy of the cell centers of `spec`.
    pub fn voxelize(&self, spec: &GridSpec) -> OccupancyGrid {
        let mut out = OccupancyGrid::empty(*spec);
        let mut votes = vec![0u8; spec.len()];
        for m in &self.meshes {
            votes.iter_mut().for_each(|v| *v = 0);
            for bins in &m.axes {
                let a = bins.axis;
                let (ua, va) = ((a + 1) % 3, (a + 2) % 3);
                for j in 0..spec.res[va] {
                    for i in 0..spec.res[ua] {
                        let mut c = [0usize; 3];
                        c[ua] = i;
                        c[va] = j;
                        let ctr = spec.center(c[0], c[1], c[2]);
                        let hits = bins.hits(ctr[ua], ctr[va]);
                        if hits.is_empty() {
                            continue;
                        }
                        let mut h = 0;
                        for k in 0..spec.res[a] {
                            c[a] = k;
                            let x = spec.origin[a] + (k as f64 + 0.5) * spec.cell;
                            while h < hits.len() && hits[h] < x {
                                h += 1;
                            }
                            if h % 2 == 1 {
                                votes[spec.index(c[0], c[1], c[2])] += 1;
                            }
                        }
                    }
                }
            }
            for (idx, &v) in votes.iter().enumerate() {
                if v >= 2 {
                    out.set(idx, true);
                }
            }
        }
        out
    }
}

impl MeshRays {
    fn new(mesh: &TriMesh) -> Self {
        Self {
            axes: [0, 1, 2].map(|a| AxisBins::new(mesh, a)),
        }
    }

    fn contains(&self, p: &Vec3) -> bool {
        let votes = self
            .axes
            .iter()
            .filter(|b| {
                let a = b.axis;
                let (u, v) = (p[(a + 1) % 3], p[(a + 2) % 3]);
                b.hits(u, v).iter().filter(|&&x| x < p[a]).count() % 2 == 1
            })
            .count();
        votes >= 2
    }
}

impl AxisBins {
    fn new(mesh: &TriMesh, axis: usize) -> Self {
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut tris = Vec::new();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for t in &mesh.triangles {
            let q = t.map(|i| mesh.vertices[i]);
            let n = (q[1] - q[0]).cross(&(q[2] - q[0]));
            if n[axis] == 0.0 {
                continue;
            }
            let p = q.map(|x| [x[ua], x[va]]);
            for x in &p {
                for d in 0..2 {
                    lo[d] = lo[d].min(x[d]);
                    hi[d] = hi[d].max(x[d]);
                }
            }
            let cu = -n[ua] / n[axis];
            let cv = -n[va] / n[axis];
            let c0 = q[0][axis] - cu * q[0][ua] - cv * q[0][va];
            tris.push(ProjTri { p, c0, cu, cv });
        }
        let n = ((tris.len() as f64).sqrt() as usize).clamp(1, 256);
        let size = [
            ((hi[0] - lo[0]) / n as f64).max(1e-12),
            ((hi[1] - lo[1]) / n as f64).max(1e-12),
        ];
        let mut bins = vec![Vec::new(); n * n];
        for (ti, t) in tris.iter().enumerate() {
            let (mut b0, mut b1) = ([usize::MAX; 2], [0usize; 2]);
            for x in &t.p {
                for d in 0..2 {
                    let c = (((x[d] - lo[d]) / size[d]).floor().max(0.0) as usize).min(n - 1);
                    b0[d] = b0[d].min(c);
                    b1[d] = b1[d].max(c);
                }
            }
            for by in b0[1]..=b1[1] {
                for bx in b0[0]..=b1[0] {
                    bins[by * n + bx].push(ti as u32);
                }
            }
        }
        Self {
            axis,
            tris,
            min: lo,
            size,
            n,
            bins,
        }
    }

    /// Sorted crossing coordinates of the axis line through `(u, v)`.
    fn hits(&self, u: f64, v: f64) -> Vec<f64> {
        if self.tris.is_empty() {
            return Vec::new();
        }
        let bx = ((u - self.min[0]) / self.size[0]).floor();
        let by = ((v - self.min[1]) / self.size[1]).floor();
        if bx < 0.0 || by < 0.0 || bx >= self.n as f64 || by >= self.n as f64 {
            // Points on the far edge of the bounds still belong to the last bin.
            let on_edge = |x: f64, lo: f64, s: f64| x >= lo && x <= lo + s * self.n as f64;
            if !(on_edge(u, self.min[0], self.size[0]) && on_edge(v, self.min[1], self.size[1])) {
                return Vec::new();
            }
        }
        let bx = (bx.max(0.0) as usize).min(self.n - 1);
        let by = (by.max(0.0) as usize).min(self.n - 1);
        let mut out: Vec<f64> = self.bins[by * self.n + bx]
            .iter()
            .map(|&i| &self.tris[i as usize])
            .filter(|t| covers(&t.p, [u, v]))
            .map(|t| t.c0 + t.cu * u + t.cv * v)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Edge function evaluated with the endpoints in a canonical order, so a
/// shared edge gives bitwise-opposite values for its two triangles.
fn edge(p: [f64; 2], q: [f64; 2], x: [f64; 2]) -> f64 {
    let orient = |p: [f64; 2], q: [f64; 2]| (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
    if (p[0], p[1]) <= (q[0], q[1]) {
        orient(p, q)
    } else {
        -orient(q, p)
    }
}

/// Point-in-triangle with the top-left fill rule, after orienting the
/// projected triangle counter-clockwise.
fn covers(tri: &[[f64; 2]; 3], x: [f64; 2]) -> bool {
    let [a, mut b, mut c] = *tri;
    let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if area == 0.0 {
        return false;
    }
    if area < 0.0 {
        std::mem::swap(&mut b, &mut c);
    }
    for (p, q) in [(a, b), (b, c), (c, a)] {
        let w = edge(p, q, x);
        if w < 0.0 {
            return false;
        }
        if w == 0.0 {
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let top_left = dy < 0.0 || (dy == 0.0 && dx < 0.0);
            if !top_left {
                return false;
            }
        }
    }
    true
}

/// Ray-parity occupancy of `mesh` on a grid fitted to its bounding box with
/// a one-cell margin.
pub fn voxel_occupancy(mesh: &TriMesh, res: [usize; 3]) -> OccupancyGrid {
    let bbox = if mesh.is_empty() {
        Aabb {
            min: Vec3::repeat(-0.5),
            max: Vec3::repeat(0.5),
        }
    } else {
        mesh.used_bbox()
    };
    let spec = GridSpec::fit(&bbox, res, 1);
    InsideTester::new(&[mesh]).voxelize(&spec)
}
