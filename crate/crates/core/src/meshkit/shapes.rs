//! Procedural meshes used by the synthetic datasets and test fixtures.

use std::f64::consts::PI;

use crate::geom::{v3, Vec3};
use crate::meshkit::mesh::{weld, TriMesh};

/// The 8-vertex, 12-triangle cube `[0,1]^3`.
pub fn unit_cube() -> TriMesh {
    let v = (0..8)
        .map(|i| v3((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let t = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriMesh::from_raw(v, t)
}

/// Appends an `nu x nv` grid of quads spanning `origin + a*u + b*v`,
/// `a, b in [0,1]`, facing `u x v`. `union_jack` alternates the diagonals.
pub fn push_quad_grid(mesh: &mut TriMesh, origin: Vec3, u: Vec3, v: Vec3, nu: usize, nv: usize, union_jack: bool) {
    let base = mesh.vertices.len();
    for j in 0..=nv {
        for i in 0..=nu {
            mesh.vertices
                .push(origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64));
        }
    }
    let id = |i: usize, j: usize| base + j * (nu + 1) + i;
    for j in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if union_jack && (i + j) % 2 == 1 {
                mesh.triangles.push([a, b, d]);
                mesh.triangles.push([b, c, d]);
            } else {
                mesh.triangles.push([a, b, c]);
                mesh.triangles.push([a, c, d]);
            }
        }
    }
}

fn divisions(len: f64, h: f64) -> usize {
    ((len / h).ceil() as usize).max(1)
}

/// Closed axis-aligned box with edges no longer than roughly `h`.
pub fn box_mesh(min: Vec3, max: Vec3, h: f64) -> TriMesh {
    let e = max - min;
    let (nx, ny, nz) = (divisions(e.x, h), divisions(e.y, h), divisions(e.z, h));
    let (ex, ey, ez) = (v3(e.x, 0., 0.), v3(0., e.y, 0.), v3(0., 0., e.z));
    let mut m = TriMesh::default();
    push_quad_grid(&mut m, min, ez, ey, nz, ny, false);
    push_quad_grid(&mut m, min + ex, ey, ez, ny, nz, false);
    push_quad_grid(&mut m, min, ex, ez, nx, nz, false);
    push_quad_grid(&mut m, min + ey, ez, ex, nz, nx, false);
    push_quad_grid(&mut m, min, ey, ex, ny, nx, false);
    push_quad_grid(&mut m, min + ez, ex, ey, nx, ny, false);
    weld(&m, 1e-9 * e.norm())
}

/// Closed orthogonal prism: the cells `(i, j)` of the grid spanned by
/// `xs x ys` for which `inside(i, j)` holds, extruded over `[z0, z1]`.
pub fn orthogonal_prism(
    xs: &[f64],
    ys: &[f64],
    inside: impl Fn(usize, usize) -> bool,
    z0: f64,
    z1: f64,
    h: f64,
) -> TriMesh {
    let (cx, cy) = (xs.len() - 1, ys.len() - 1);
    let cell = |i: isize, j: isize| {
        i >= 0 && j >= 0 && (i as usize) < cx && (j as usize) < cy && inside(i as usize, j as usize)
    };
    let nz = divisions(z1 - z0, h);
    let ez = v3(0., 0., z1 - z0);
    let mut m = TriMesh::default();
    for j in 0..cy {
        for i in 0..cx {
            if !cell(i as isize, j as isize) {
                continue;
            }
            let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[j], ys[j + 1]);
            let (nx, ny) = (divisions(x1 - x0, h), divisions(y1 - y0, h));
            let ex = v3(x1 - x0, 0., 0.);
            let ey = v3(0., y1 - y0, 0.);
            push_quad_grid(&mut m, v3(x0, y0, z0), ey, ex, ny, nx, false);
            push_quad_grid(&mut m, v3(x0, y0, z1), ex, ey, nx, ny, false);
            let (ii, jj) = (i as isize, j as isize);
            if !cell(ii - 1, jj) {
                push_quad_grid(&mut m, v3(x0, y0, z0), ez, ey, nz, ny, false);
            }
            if !cell(ii + 1, jj) {
                push_quad_grid(&mut m, v3(x1, y0, z0), ey, ez, ny, nz, false);
            }
            if !cell(ii, jj - 1) {
                push_quad_grid(&mut m, v3(x0, y0, z0), ex, ez, nx, nz, false);
            }
            if !cell(ii, jj + 1) {
                push_quad_grid(&mut m, v3(x0, y1, z0), ez, ex, nz, nx, false);
            }
        }
    }
    let diag = v3(xs[cx] - xs[0], ys[cy] - ys[0], z1 - z0).norm();
    weld(&m, 1e-9 * diag)
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(center: Vec3, radius: f64, levels: usize) -> TriMesh {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1., g, 0.),
        (1., g, 0.),
        (-1., -g, 0.),
        (1., -g, 0.),
        (0., -1., g),
        (0., 1., g),
        (0., -1., -g),
        (0., 1., -g),
        (g, 0., -1.),
        (g, 0., 1.),
        (-g, 0., -1.),
        (-g, 0., 1.),
    ]
    .iter()
    .map(|&(x, y, z)| v3(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let verts = verts.into_iter().map(|p| center + p * radius).collect();
    TriMesh::from_raw(verts, tris)
}

/// Lateral surface of a cylinder around +z, normals facing away from the axis.
pub fn open_cylinder(radius: f64, z0: f64, z1: f64, segments: usize, rings: usize) -> TriMesh {
    let mut m = TriMesh::default();
    for j in 0..=rings {
        let z = z0 + (z1 - z0) * j as f64 / rings as f64;
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            m.vertices.push(v3(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let id = |i: usize, j: usize| j * segments + i % segments;
    for j in 0..rings {
        for i in 0..segments {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            m.triangles.push([a, b, c]);
            m.triangles.push([a, c, d]);
        }
    }
    m.compute_normals();
    m
}

/// Flat ring in the plane `z = 0`, facing +z.
pub fn annulus(r0: f64, r1: f64, segments: usize, rings: usize) -> TriMesh {
    let mut m = TriMesh::default();
    for j in 0..=rings {
        let r = r0 + (r1 - r0) * j as f64 / rings as f64;
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            m.vertices.push(v3(r * a.cos(), r * a.sin(), 0.0));
        }
    }
    let id = |i: usize, j: usize| j * segments + i % segments;
    for j in 0..rings {
        for i in 0..segments {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            m.triangles.push([a, c, b]);
            m.triangles.push([a, d, c]);
        }
    }
    m.compute_normals();
    m
}

/// Closed solid cylinder around +y with capped ends.
pub fn closed_cylinder(radius: f64, y0: f64, y1: f64, h: f64) -> TriMesh {
    let segments = divisions(2.0 * PI * radius, h).max(8);
    let rings = divisions(y1 - y0, h);
    let caps = divisions(radius, h);
    let mut m = TriMesh::default();
    let ring = |r: f64, y: f64, i: usize| {
        let a = 2.0 * PI * i as f64 / segments as f64;
        v3(r * a.cos(), y, -r * a.sin())
    };
    // Side wall, parameterized so that +angle x +y faces outward.
    let base = m.vertices.len();
    for j in 0..=rings {
        let y = y0 + (y1 - y0) * j as f64 / rings as f64;
        for i in 0..segments {
            m.vertices.push(ring(radius, y, i));
        }
    }
    let id = |i: usize, j: usize| base + j * segments + i % segments;
    for j in 0..rings {
        for i in 0..segments {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            m.triangles.push([a, b, c]);
            m.triangles.push([a, c, d]);
        }
    }
    for (y, up) in [(y0, false), (y1, true)] {
        let center = m.vertices.len();
        m.vertices.push(v3(0., y, 0.));
        let start = m.vertices.len();
        for k in 1..=caps {
            let r = radius * k as f64 / caps as f64;
            for i in 0..segments {
                m.vertices.push(ring(r, y, i));
            }
        }
        let rid = |i: usize, k: usize| start + (k - 1) * segments + i % segments;
        let mut push = |t: [usize; 3]| {
            m.triangles.push(if up { t } else { [t[0], t[2], t[1]] });
        };
        for i in 0..segments {
            push([center, rid(i, 1), rid(i + 1, 1)]);
        }
        for k in 1..caps {
            for i in 0..segments {
                let (a, b, c, d) = (rid(i, k), rid(i, k + 1), rid(i + 1, k + 1), rid(i + 1, k));
                push([a, b, c]);
                push([a, c, d]);
            }
        }
    }
    weld(&m, 1e-9 * radius)
}

/// Flat `[0,lx] x [0,ly]` strip in `z = 0` with alternating diagonals, so
/// that functions linear in x are discrete-harmonic under uniform weights.
pub fn strip(lx: f64, ly: f64, nx: usize, ny: usize) -> TriMesh {
    let mut m = TriMesh::default();
    push_quad_grid(&mut m, Vec3::zeros(), v3(lx, 0., 0.), v3(0., ly, 0.), nx, ny, true);
    m.compute_normals();
    m
}
