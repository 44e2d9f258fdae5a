//! Misaligned single-part fixtures with analytic sigmoid fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::ParamStore;
use crate::error::Result;
use crate::geom::{v3, Similarity, Vec3};
use crate::refine::{RefinePart, SigmoidField};
use crate::scalar::Real;

pub const SHARPNESS: f64 = 300.0;

/// A part, the field it should sit on, and its displaced start.
#[derive(Clone, Debug)]
pub struct RefineFixture<T> {
    pub name: String,
    pub store: ParamStore<T>,
    pub field: SigmoidField,
    pub parts: Vec<RefinePart>,
    pub truth: Vec<Similarity>,
    pub init: Vec<Similarity>,
}

impl<T: Real> RefineFixture<T> {
    pub fn translation_error(&self, transforms: &[Similarity]) -> f64 {
        transforms
            .iter()
            .zip(&self.truth)
            .map(|(a, b)| (a.t - b.t).norm())
            .sum()
    }
}

fn frame(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    (u, n.cross(&u))
}

/// Disc of radius `r` in the plane through the origin with normal `n`.
fn disc(n: Vec3, r: f64, count: usize, rng: &mut ChaCha8Rng) -> RefinePart {
    let (u, v) = frame(&n);
    let mut part = RefinePart {
        points: Vec::new(),
        normals: Vec::new(),
        dist: Vec::new(),
    };
    for _ in 0..count {
        let rho = r * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        part.points.push(u * (rho * a.cos()) + v * (rho * a.sin()));
        part.normals.push(n);
        part.dist.push(rho);
    }
    part
}

/// Cap of a sphere of radius `r` about the origin, within `angle` of `axis`.
fn cap(axis: Vec3, r: f64, angle: f64, count: usize, rng: &mut ChaCha8Rng) -> RefinePart {
    let (u, v) = frame(&axis);
    let mut part = RefinePart {
        points: Vec::new(),
        normals: Vec::new(),
        dist: Vec::new(),
    };
    let zmin = angle.cos();
    for _ in 0..count {
        let z = rng.random_range(zmin..1.0);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let q = (1.0 - z * z).sqrt();
        let d = (u * (q * a.cos()) + v * (q * a.sin()) + axis * z).normalize();
        part.points.push(d * r);
        part.normals.push(d);
        part.dist.push(r * z.acos());
    }
    part
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let p = v3(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = p.norm();
        if n > 0.1 && n <= 1.0 {
            return p / n;
        }
    }
}

/// One translatable plane patch sitting `offset` outside a fixed
/// half-space along `+x`.
pub fn convex_fixture<T: Real>(offset: f64) -> Result<RefineFixture<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::new();
    let n = Vec3::x();
    let t = v3(0.1, -0.05, 0.2);
    let field = SigmoidField::half_space(&mut store, n, n.dot(&t), SHARPNESS)?;
    let truth = Similarity::new(1.0, t);
    Ok(RefineFixture {
        name: "convex half-space".into(),
        store,
        field,
        parts: vec![disc(n, 0.1, 256, &mut rng)],
        truth: vec![truth],
        init: vec![Similarity::new(1.0, t + n * offset)],
    })
}

/// Ten single-part fixtures: plane patches on half-spaces and spherical
/// caps on balls, displaced by at most 0.05 with a normal component of at
/// least 0.02.
pub fn misaligned_set<T: Real>() -> Result<Vec<RefineFixture<T>>> {
    let mut out = Vec::new();
    for i in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i);
        let mut store = ParamStore::new();
        let t = v3(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        );
        let n = random_unit(&mut rng);
        let (u, _) = frame(&n);
        let along = rng.random_range(0.02..0.045) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let across = rng.random_range(0.0..0.02);
        let offset = n * along + u * across;
        let (name, field, part) = if i % 2 == 0 {
            let f = SigmoidField::half_space(&mut store, n, n.dot(&t), SHARPNESS)?;
            ("half-space", f, disc(n, 0.1, 256, &mut rng))
        } else {
            let r = rng.random_range(0.15..0.3);
            let f = SigmoidField::ball(&mut store, t, r, SHARPNESS)?;
            ("ball", f, cap(n, r, 0.5, 256, &mut rng))
        };
        debug_assert!(offset.norm() <= 0.05);
        out.push(RefineFixture {
            name: format!("{name} {i}"),
            store,
            field,
            parts: vec![part],
            truth: vec![Similarity::new(1.0, t)],
            init: vec![Similarity::new(1.0, t + offset)],
        });
    }
    Ok(out)
}
