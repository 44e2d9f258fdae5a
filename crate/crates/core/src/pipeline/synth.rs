use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::CategoryConfig;
use crate::error::{Error, Result};
use crate::geom::{v3, Aabb, Polyline, Similarity, Vec3};
use crate::meshkit::obj::{obj_string, polyline_string, write_text};
use crate::meshkit::{shapes, ObjData, TriMesh};

/// Target edge length of generated meshes, in normalized units.
pub const MESH_EDGE: f64 = 0.02;
pub const SHAPE_FILE: &str = "shape.obj";
pub const SEAM_FILE: &str = "seams.obj";
pub const SEAM_GROUP: &str = "seam";
pub const DATASET_MANIFEST: &str = "dataset.json";

/// One labeled part (possibly several disjoint closed pieces).
#[derive(Clone, Debug, PartialEq)]
pub struct ShapePart {
    pub label: String,
    pub mesh: TriMesh,
}

/// A segmented shape in its assembled position: centered at the bounding
/// box center with unit bounding-box diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledShape {
    pub id: String,
    pub parts: Vec<ShapePart>,
    /// Curves where parts with different labels meet.
    pub seams: Vec<Polyline>,
}

impl LabeledShape {
    pub fn part(&self, label: &str) -> Option<&ShapePart> {
        self.parts.iter().find(|p| p.label == label)
    }

    /// All parts as one mesh.
    pub fn mesh(&self) -> TriMesh {
        let mut m = TriMesh::default();
        for p in &self.parts {
            m.append(&p.mesh);
        }
        m
    }

    pub fn bbox(&self) -> Aabb {
        self.parts.iter().fold(Aabb::empty(), |b, p| b.union(&p.mesh.bbox()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let parts: Vec<(&str, &TriMesh)> = self.parts.iter().map(|p| (p.label.as_str(), &p.mesh)).collect();
        write_text(&dir.join(SHAPE_FILE), &obj_string(&parts))?;
        write_text(&dir.join(SEAM_FILE), &polyline_string(&[(SEAM_GROUP, &self.seams)]))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let parts = ObjData::read(&dir.join(SHAPE_FILE))?
            .parts()?
            .into_iter()
            .map(|(label, mesh)| ShapePart { label, mesh })
            .collect();
        let seams_path = dir.join(SEAM_FILE);
        let seams = if seams_path.exists() {
            ObjData::read(&seams_path)?.polylines(SEAM_GROUP)
        } else {
            Vec::new()
        };
        Ok(Self { id, parts, seams })
    }
}

/// Contents of `dataset.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub category: String,
    pub seed: u64,
    pub count: usize,
    pub shapes: Vec<String>,
    /// Generator parameters per shape.
    pub params: Vec<BTreeMap<String, f64>>,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(DATASET_MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn shape_dirs(&self, root: &Path) -> Vec<PathBuf> {
        self.shapes.iter().map(|s| root.join(s)).collect()
    }
}

fn box_between(min: Vec3, max: Vec3) -> Aabb {
    Aabb { min, max }
}

/// Closed rectangle where two axis-aligned boxes touch face to face.
pub fn box_contact(a: &Aabb, b: &Aabb, eps: f64) -> Option<Polyline> {
    for k in 0..3 {
        let plane = if (a.max[k] - b.min[k]).abs() <= eps {
            a.max[k]
        } else if (b.max[k] - a.min[k]).abs() <= eps {
            a.min[k]
        } else {
            continue;
        };
        let (u, w) = ((k + 1) % 3, (k + 2) % 3);
        let (u0, u1) = (a.min[u].max(b.min[u]), a.max[u].min(b.max[u]));
        let (w0, w1) = (a.min[w].max(b.min[w]), a.max[w].min(b.max[w]));
        if u1 - u0 <= eps || w1 - w0 <= eps {
            continue;
        }
        let corner = |cu: f64, cw: f64| {
            let mut p = Vec3::zeros();
            p[k] = plane;
            p[u] = cu;
            p[w] = cw;
            p
        };
        return Some(Polyline::new(
            vec![corner(u0, w0), corner(u1, w0), corner(u1, w1), corner(u0, w1)],
            true,
        ));
    }
    None
}

fn normalizer(bbox: &Aabb) -> Similarity {
    let s = 1.0 / bbox.diagonal();
    Similarity::new(s, -bbox.center() * s)
}

fn map_box(b: &Aabb, xf: &Similarity) -> Aabb {
    box_between(xf.apply(&b.min), xf.apply(&b.max))
}

fn map_polyline(l: &Polyline, xf: &Similarity) -> Polyline {
    Polyline::new(l.points.iter().map(|p| xf.apply(p)).collect(), l.closed)
}

/// Box-built chair: seat, four legs, back and, in half of the shapes, two
/// arms. Every part touches the seat; arms also touch the back.
pub fn chairlike(id: &str, rng: &mut impl Rng) -> (LabeledShape, BTreeMap<String, f64>) {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let w = u(0.8, 1.0);
    let d = u(0.8, 1.0);
    let leg_h = u(0.6, 0.8);
    let seat_t = u(0.14, 0.2);
    let back_h = u(0.6, 0.9);
    let back_t = u(0.12, 0.18);
    let leg_s = u(0.12, 0.16);
    let arm_t = u(0.1, 0.14);
    let arm_h = u(0.2, 0.3);
    let arms = u(0.0, 1.0) < 0.5;
    let top = leg_h + seat_t;
    let seat = box_between(v3(-w / 2., leg_h, -d / 2.), v3(w / 2., top, d / 2.));
    let legs: Vec<Aabb> = [(-1., -1.), (1., -1.), (1., 1.), (-1., 1.)]
        .iter()
        .map(|&(sx, sz)| {
            let x0 = if sx < 0.0 { -w / 2. } else { w / 2. - leg_s };
            let z0 = if sz < 0.0 { -d / 2. } else { d / 2. - leg_s };
            box_between(v3(x0, 0., z0), v3(x0 + leg_s, leg_h, z0 + leg_s))
        })
        .collect();
    let back = box_between(v3(-w / 2., top, -d / 2.), v3(w / 2., top + back_h, -d / 2. + back_t));
    let arm_boxes: Vec<Aabb> = if arms {
        vec![
            box_between(
                v3(-w / 2., top, -d / 2. + back_t),
                v3(-w / 2. + arm_t, top + arm_h, d / 2.),
            ),
            box_between(
                v3(w / 2. - arm_t, top, -d / 2. + back_t),
                v3(w / 2., top + arm_h, d / 2.),
            ),
        ]
    } else {
        Vec::new()
    };
    let mut groups: Vec<(&str, Vec<Aabb>)> = vec![("back", vec![back]), ("seat", vec![seat]), ("leg", legs)];
    if arms {
        groups.push(("arm", arm_boxes));
    }
    let all = groups
        .iter()
        .flat_map(|(_, b)| b.iter())
        .fold(Aabb::empty(), |acc, b| acc.union(b));
    let xf = normalizer(&all);
    let groups: Vec<(&str, Vec<Aabb>)> = groups
        .into_iter()
        .map(|(l, bs)| (l, bs.iter().map(|b| map_box(b, &xf)).collect()))
        .collect();
    let mut seams = Vec::new();
    for (gi, (_, a)) in groups.iter().enumerate() {
        for (_, b) in &groups[gi + 1..] {
            for ba in a {
                for bb in b {
                    if let Some(l) = box_contact(ba, bb, 1e-9) {
                        seams.push(l);
                    }
                }
            }
        }
    }
    let parts = groups
        .iter()
        .map(|(label, bs)| {
            let mut mesh = TriMesh::default();
            for b in bs {
                mesh.append(&shapes::box_mesh(b.min, b.max, MESH_EDGE));
            }
            ShapePart {
                label: label.to_string(),
                mesh,
            }
        })
        .collect();
    let params = BTreeMap::from([
        ("width".to_string(), w),
        ("depth".to_string(), d),
        ("leg_height".to_string(), leg_h),
        ("seat_thickness".to_string(), seat_t),
        ("back_height".to_string(), back_h),
        ("back_thickness".to_string(), back_t),
        ("leg_size".to_string(), leg_s),
        ("arm_thickness".to_string(), arm_t),
        ("arm_height".to_string(), arm_h),
        ("arms".to_string(), if arms { 1.0 } else { 0.0 }),
        ("scale".to_string(), xf.s),
    ]);
    (
        LabeledShape {
            id: id.to_string(),
            parts,
            seams,
        },
        params,
    )
}

/// Closed loop on the cylinder `x² + z² = r²` (x > 0) bounding the
/// rectangle `[y0, y1] x [-hz, hz]` seen along x.
fn cylinder_patch_loop(r: f64, y0: f64, y1: f64, hz: f64, per_side: usize) -> Polyline {
    let on = |y: f64, z: f64| v3((r * r - z * z).sqrt(), y, z);
    let mut pts = Vec::new();
    for i in 0..per_side {
        let t = i as f64 / per_side as f64;
        pts.push(on(y0 + (y1 - y0) * t, -hz));
    }
    for i in 0..per_side {
        let t = i as f64 / per_side as f64;
        pts.push(on(y1, -hz + 2.0 * hz * t));
    }
    for i in 0..per_side {
        let t = i as f64 / per_side as f64;
        pts.push(on(y1 - (y1 - y0) * t, hz));
    }
    for i in 0..per_side {
        let t = i as f64 / per_side as f64;
        pts.push(on(y0, hz - 2.0 * hz * t));
    }
    Polyline::new(pts, true)
}

/// Mug: closed cylindrical body around +y and a C-shaped handle of square
/// cross-section whose two bars enter the body wall.
pub fn muglike(id: &str, rng: &mut impl Rng) -> (LabeledShape, BTreeMap<String, f64>) {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let r = u(0.35, 0.45);
    let height = u(0.8, 1.1);
    let t = u(0.1, 0.14);
    let reach = u(0.2, 0.3);
    let y0 = height * u(0.2, 0.3);
    let y1 = height * u(0.7, 0.8);
    let x_in = 0.7 * r;
    let bbox = box_between(v3(-r, 0., -r), v3(r + reach + t, height, r));
    let xf = normalizer(&bbox);
    let s = xf.s;
    let h = MESH_EDGE / s;
    let xs = [x_in, r + reach, r + reach + t];
    let ys = [y0, y0 + t, y1 - t, y1];
    let handle = shapes::orthogonal_prism(&xs, &ys, |i, j| j != 1 || i == 1, -t / 2., t / 2., h);
    let body = shapes::closed_cylinder(r, 0., height, h);
    let per_side = ((t / h).ceil() as usize).max(2);
    let seams = vec![
        cylinder_patch_loop(r, y0, y0 + t, t / 2., per_side),
        cylinder_patch_loop(r, y1 - t, y1, t / 2., per_side),
    ];
    let parts = vec![
        ShapePart {
            label: "body".into(),
            mesh: body.transformed(&xf),
        },
        ShapePart {
            label: "handle".into(),
            mesh: handle.transformed(&xf),
        },
    ];
    let params = BTreeMap::from([
        ("radius".to_string(), r),
        ("height".to_string(), height),
        ("handle_thickness".to_string(), t),
        ("handle_reach".to_string(), reach),
        ("handle_bottom".to_string(), y0),
        ("handle_top".to_string(), y1),
        ("scale".to_string(), s),
    ]);
    (
        LabeledShape {
            id: id.to_string(),
            parts,
            seams: seams.iter().map(|l| map_polyline(l, &xf)).collect(),
        },
        params,
    )
}

/// Seed of shape `i` of a dataset generated with `seed`.
pub fn shape_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn shape_id(i: usize) -> String {
    format!("shape_{i:03}")
}

/// Generates one shape of `category`.
pub fn generate_shape(category: &CategoryConfig, id: &str, seed: u64) -> Result<(LabeledShape, BTreeMap<String, f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match category.name.as_str() {
        "chairlike" => Ok(chairlike(id, &mut rng)),
        "muglike" => Ok(muglike(id, &mut rng)),
        other => Err(Error::Config(format!("no synthetic generator for category `{other}`"))),
    }
}

/// Writes `count` shapes into `out/shape_XXX/` plus `out/dataset.json`.
pub fn generate_synthetic(category: &CategoryConfig, count: usize, seed: u64, out: &Path) -> Result<DatasetManifest> {
    if count == 0 {
        return Err(Error::invalid("dataset count must be at least 1"));
    }
    let mut manifest = DatasetManifest {
        category: category.name.clone(),
        seed,
        count,
        shapes: Vec::new(),
        params: Vec::new(),
    };
    for i in 0..count {
        let id = shape_id(i);
        let (shape, params) = generate_shape(category, &id, shape_seed(seed, i))?;
        shape.save(&out.join(&id))?;
        manifest.shapes.push(id);
        manifest.params.push(params);
    }
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join(DATASET_MANIFEST), &(text + "\n"))?;
    Ok(manifest)
}
