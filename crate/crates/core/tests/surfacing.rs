use std::collections::HashMap;
use std::f64::consts::PI;

use coalesce::geom::{v3, Aabb, Vec3};
use coalesce::meshkit::mesh::undirected;
use coalesce::meshkit::{boundary_loops, shapes, GridSpec, TriMesh};
use coalesce::surfacing::{
    bridge_loops, harmonic_deform, loop_correspondence, marching_cubes, poisson_blend, remove_redundant, stitch,
    LoopCorrespondence, ScalarField, ISO,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_grid(res: usize) -> GridSpec {
    GridSpec::cube(res, &Aabb::from_points(&[v3(-0.5, -0.5, -0.5), v3(0.5, 0.5, 0.5)]), 0)
}

fn sphere_field(res: usize, r: f64) -> ScalarField {
    ScalarField::from_fn(unit_grid(res), |p| 0.5 + (r - p.norm()))
}

/// Largest and smallest corner value of the grid cube containing `p`.
fn local_delta(f: &ScalarField, p: &Vec3) -> f64 {
    let s = &f.spec;
    let first = s.center(0, 0, 0);
    let base: [usize; 3] =
        std::array::from_fn(|a| (((p[a] - first[a]) / s.cell).floor().max(0.0) as usize).min(s.res[a] - 2));
    let vals: Vec<f64> = (0..8)
        .map(|c| f.node(base[0] + (c & 1), base[1] + ((c >> 1) & 1), base[2] + (c >> 2)))
        .collect();
    vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn sphere_is_closed_with_correct_area() {
    let r = 0.35;
    let f = sphere_field(64, r);
    let m = marching_cubes(&f, ISO);
    assert_eq!(m.boundary_edge_count(), 0);
    assert!(m.non_manifold_edges().is_empty());
    assert_eq!(m.euler_characteristic(), 2);
    let exact = 4.0 * PI * r * r;
    assert!(
        (m.total_area() - exact).abs() <= 0.03 * exact,
        "area {}",
        m.total_area()
    );
    for p in &m.vertices {
        let d = local_delta(&f, p);
        assert!((f.trilinear(p) - ISO).abs() <= 0.5 * d + 1e-12);
    }
    for t in 0..m.triangles.len() {
        assert!(m.face_normal(t).dot(&m.face_centroid(t)) > 0.0);
    }
}

#[test]
fn empty_field_gives_empty_mesh() {
    let f = ScalarField::from_fn(unit_grid(16), |_| 0.0);
    let m = marching_cubes(&f, ISO);
    assert!(m.is_empty() && m.vertices.is_empty());
}

#[test]
fn annulus_rim_is_recovered() {
    let segments = 96;
    let part = shapes::annulus(0.5, 0.8, segments, 6);
    let joint = shapes::annulus(0.2, 0.5, segments, 6);
    let rim: Vec<usize> = (6 * segments..7 * segments).collect();
    let loops = boundary_loops(&part).unwrap();
    let inner = loops
        .iter()
        .find(|l| (part.vertices[l.vertex_ids[0]].norm() - 0.5).abs() < 1e-9)
        .unwrap();
    let pts: Vec<Vec3> = inner.vertex_ids.iter().map(|&v| part.vertices[v]).collect();
    let nrm: Vec<Vec3> = inner.vertex_ids.iter().map(|&v| part.normals[v]).collect();
    let nb = joint.vertex_neighbors();
    let c = loop_correspondence(&pts, &nrm, &joint, &nb);
    assert!(c.matched);
    let hit = rim.iter().filter(|v| c.joint_loop.contains(v)).count();
    assert!(hit as f64 >= 0.95 * rim.len() as f64, "{hit}/{}", rim.len());
    assert_eq!(loop_correspondence(&pts, &nrm, &joint, &nb), c);
}

#[test]
fn aligned_normal_wins_the_tie() {
    let n = v3(0., 0., 1.);
    let c = LoopCorrespondence {
        part_points: vec![v3(-1., 0., 0.), v3(1., 0., 0.)],
        part_normals: vec![-n, n],
        joint_loop: Vec::new(),
        matched: false,
    };
    assert_eq!(c.nearest_part_vertex(&Vec3::zeros(), &n), 1);
    assert_eq!(c.nearest_part_vertex(&Vec3::zeros(), &-n), 0);
}

fn laplacian_residual(mesh: &TriMesh, out: &TriMesh, fixed: &[usize]) -> (f64, f64) {
    let nb = mesh.vertex_neighbors();
    let d: Vec<Vec3> = out.vertices.iter().zip(&mesh.vertices).map(|(a, b)| a - b).collect();
    let (mut res, mut b) = (0.0, 0.0);
    for v in 0..mesh.vertices.len() {
        if fixed.contains(&v) {
            continue;
        }
        let mut lhs = d[v] * nb[v].len() as f64;
        let mut rhs = Vec3::zeros();
        for &u in &nb[v] {
            if fixed.contains(&u) {
                rhs += d[u];
            } else {
                lhs -= d[u];
            }
        }
        res += (lhs - rhs).norm_squared();
        b += rhs.norm_squared();
    }
    (res.sqrt(), b.sqrt())
}

#[test]
fn harmonic_solve_residual_on_random_fixtures() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = shapes::icosphere(Vec3::zeros(), 1.0, 3);
        let fixed: Vec<usize> = (0..m.vertices.len()).filter(|_| rng.random::<f64>() < 0.1).collect();
        let c: Vec<(usize, Vec3)> = fixed
            .iter()
            .map(|&v| (v, m.vertices[v] + v3(rng.random(), rng.random(), rng.random()) * 0.1))
            .collect();
        let (out, stats) = harmonic_deform(&m, &c).unwrap();
        assert!(stats.relative_residual <= 1e-8);
        let (res, b) = laplacian_residual(&m, &out, &fixed);
        assert!(res <= 1e-8 * b * 3f64.sqrt(), "{res} vs {b}");
    }
}

#[test]
fn strip_blend_is_linear() {
    let m = shapes::strip(1.0, 0.2, 50, 10);
    let c: Vec<(usize, Vec3)> = (0..m.vertices.len())
        .filter(|&v| m.vertices[v].x == 0.0 || m.vertices[v].x == 1.0)
        .map(|v| {
            let p = m.vertices[v];
            (v, if p.x == 1.0 { p + v3(0., 0., 0.1) } else { p })
        })
        .collect();
    let (out, _) = harmonic_deform(&m, &c).unwrap();
    for (a, b) in out.vertices.iter().zip(&m.vertices) {
        assert!((a.z - 0.1 * b.x).abs() <= 1e-4);
    }
}

fn loop_of(part: &TriMesh, joint: &TriMesh, pick: impl Fn(&Vec3) -> bool) -> LoopCorrespondence {
    let l = boundary_loops(part)
        .unwrap()
        .into_iter()
        .find(|l| pick(&part.vertices[l.vertex_ids[0]]))
        .unwrap();
    let pts: Vec<Vec3> = l.vertex_ids.iter().map(|&v| part.vertices[v]).collect();
    let nrm: Vec<Vec3> = l.vertex_ids.iter().map(|&v| part.normals[v]).collect();
    loop_correspondence(&pts, &nrm, joint, &joint.vertex_neighbors())
}

#[test]
fn overlapping_ring_is_removed() {
    // Part: tube z in [0, 1]; joint: tube z in [0.8, 1.4] sharing rings.
    let part = shapes::open_cylinder(0.3, 0.0, 1.0, 24, 10);
    let mut joint = shapes::open_cylinder(0.3, 0.8, 1.4, 24, 6);
    let ball = shapes::icosphere(v3(3., 0., 0.), 0.2, 1);
    joint.append(&ball);
    let c = loop_of(&part, &joint, |p| p.z > 0.5);
    assert!(c.matched);
    assert!(c.joint_loop.iter().all(|&v| (joint.vertices[v].z - 1.0).abs() < 1e-9));
    let out = remove_redundant(&joint, std::slice::from_ref(&c));
    let removed = joint.triangles.len() - out.triangles.len();
    assert_eq!(removed, 2 * 24 * 2);
    assert!(out
        .triangles
        .iter()
        .flatten()
        .all(|&v| out.vertices[v].z >= 1.0 - 1e-9 || out.vertices[v].x > 2.0));
    assert_eq!(remove_redundant(&joint, &[]), joint);
    // Blending snaps the joint loop onto the part loop.
    let (blended, _) = poisson_blend(&out, &[c.clone()]).unwrap();
    for &t in &c.joint_loop {
        assert!(c.part_points.iter().any(|p| (p - blended.vertices[t]).norm() < 1e-12));
    }
}

proptest! {
    #[test]
    fn bridge_covers_each_loop_edge_once(na in 3usize..20, nb in 3usize..20, dz in 0.0f64..0.5, rot in 0.0f64..6.3) {
        let ring = |n: usize, r: f64, z: f64, phase: f64| -> Vec<Vec3> {
            (0..n).map(|k| {
                let t = phase + 2.0 * PI * k as f64 / n as f64;
                v3(r * t.cos(), r * t.sin(), z)
            }).collect()
        };
        let a = ring(na, 1.0, 0.0, 0.0);
        let b = ring(nb, 0.8, dz, rot);
        let tris = bridge_loops(&a, &b).unwrap();
        prop_assert_eq!(tris.len(), na + nb);
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &tris {
            for k in 0..3 {
                prop_assert!(t[k] < na + nb);
                *count.entry(undirected(t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        for i in 0..na {
            prop_assert_eq!(count[&undirected(i, (i + 1) % na)], 1);
        }
        for j in 0..nb {
            prop_assert_eq!(count[&undirected(na + j, na + (j + 1) % nb)], 1);
        }
    }

    #[test]
    fn zero_boundary_data_is_identity(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = shapes::icosphere(Vec3::zeros(), 1.0, 2);
        let c: Vec<(usize, Vec3)> = (0..m.vertices.len())
            .filter(|_| rng.random::<f64>() < 0.2)
            .map(|v| (v, m.vertices[v]))
            .collect();
        let (out, _) = harmonic_deform(&m, &c).unwrap();
        for (a, b) in out.vertices.iter().zip(&m.vertices) {
            prop_assert!((a - b).norm() <= 1e-9);
        }
    }
}

fn open_box(min: Vec3, max: Vec3, open_x: f64) -> TriMesh {
    let b = shapes::box_mesh(min, max, 0.025);
    let keep: Vec<usize> = (0..b.triangles.len())
        .filter(|&f| (b.face_centroid(f).x - open_x).abs() > 1e-9)
        .collect();
    let mut m = b.submesh(&keep).0;
    m.compute_normals();
    m
}

/// Two boxes open towards each other and a slab field bridging them.
pub fn two_boxes_and_slab() -> (Vec<TriMesh>, ScalarField) {
    let a = open_box(v3(-0.5, -0.2, -0.2), v3(-0.05, 0.2, 0.2), -0.05);
    let b = open_box(v3(0.05, -0.2, -0.2), v3(0.5, 0.2, 0.2), 0.05);
    let spec = unit_grid(64);
    let w = 4.0 * spec.cell;
    let half = v3(0.15, 0.2, 0.2);
    let field = ScalarField::from_fn(spec, |p| {
        let q = p.abs() - half;
        let outside = q.map(|x| x.max(0.0)).norm();
        let sdf = outside + q.max().min(0.0);
        (0.5 - sdf / w).clamp(0.0, 1.0)
    });
    (vec![a, b], field)
}

#[test]
fn two_boxes_and_slab_stitch_watertight() {
    let (parts, field) = two_boxes_and_slab();
    let out = stitch(&parts, &field).unwrap();
    assert!(!out.flags.fallback());
    assert_eq!(out.flags.failed_loops, 0);
    assert_eq!(out.loop_gap(), 0.0);
    assert_eq!(out.mesh.boundary_edge_count(), 0);
    assert!(boundary_loops(&out.mesh).map(|l| l.is_empty()).unwrap_or(false));
    // Two open boxes plus the 0.1-long slab sides between them.
    let expect = 2.0 * (4.0 * 0.45 * 0.4 + 0.4 * 0.4) + 4.0 * 0.4 * 0.1;
    assert!(
        (out.mesh.total_area() - expect).abs() < 0.01 * expect,
        "area {}",
        out.mesh.total_area()
    );
}

#[test]
fn empty_joint_field_returns_parts() {
    let (parts, field) = two_boxes_and_slab();
    let empty = ScalarField::from_fn(field.spec, |_| 0.0);
    let out = stitch(&parts, &empty).unwrap();
    assert!(out.flags.joint_empty);
    let faces: usize = parts.iter().map(|p| p.triangles.len()).sum();
    assert_eq!(out.mesh.triangles.len(), faces);
}
