//! ASCII Wavefront OBJ: positions, faces (fan-triangulated), `g`/`usemtl`
//! part labels and `l` polylines.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Polyline, Vec3};
use crate::meshkit::mesh::TriMesh;

/// Parsed OBJ contents. Faces and lines remember the group they appeared in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjData {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub face_group: Vec<usize>,
    pub lines: Vec<Vec<usize>>,
    pub line_group: Vec<usize>,
    /// Group names; index 0 is the implicit default group `""`.
    pub groups: Vec<String>,
}

impl ObjData {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut d = ObjData {
            groups: vec![String::new()],
            ..Default::default()
        };
        let mut group = 0;
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut it = line.split_whitespace();
            let Some(tag) = it.next() else { continue };
            match tag {
                "v" => {
                    let c: Vec<f64> = it
                        .take(3)
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|e| err(ln, format!("bad coordinate `{s}`: {e}")))
                        })
                        .collect::<Result<_>>()?;
                    if c.len() != 3 {
                        return Err(err(ln, "vertex needs three coordinates".into()));
                    }
                    d.vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                "f" | "l" => {
                    let n = d.vertices.len();
                    let idx: Vec<usize> = it
                        .map(|tok| {
                            let first = tok.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|_| err(ln, format!("bad index `{tok}`")))?;
                            let r = if i > 0 { i - 1 } else { n as i64 + i };
                            if r < 0 || r >= n as i64 {
                                return Err(err(ln, format!("index out of range: {i} with {n} vertices")));
                            }
                            Ok(r as usize)
                        })
                        .collect::<Result<_>>()?;
                    if tag == "f" {
                        if idx.len() < 3 {
                            return Err(err(ln, "face needs at least three vertices".into()));
                        }
                        for k in 1..idx.len() - 1 {
                            d.faces.push([idx[0], idx[k], idx[k + 1]]);
                            d.face_group.push(group);
                        }
                    } else {
                        if idx.is_empty() {
                            return Err(err(ln, "line needs at least one vertex".into()));
                        }
                        d.lines.push(idx);
                        d.line_group.push(group);
                    }
                }
                "g" | "o" | "usemtl" => {
                    let name = it.collect::<Vec<_>>().join(" ");
                    group = match d.groups.iter().position(|g| *g == name) {
                        Some(g) => g,
                        None => {
                            d.groups.push(name);
                            d.groups.len() - 1
                        }
                    };
                }
                _ => {}
            }
        }
        Ok(d)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// All faces as one mesh.
    pub fn mesh(&self) -> Result<TriMesh> {
        TriMesh::new(self.vertices.clone(), self.faces.clone())
    }

    /// Non-empty groups in order of first appearance, each as a compacted
    /// mesh.
    pub fn parts(&self) -> Result<Vec<(String, TriMesh)>> {
        let all = TriMesh::from_raw(self.vertices.clone(), self.faces.clone());
        let mut out = Vec::new();
        for (g, name) in self.groups.iter().enumerate() {
            let faces: Vec<usize> = (0..self.faces.len()).filter(|&f| self.face_group[f] == g).collect();
            if faces.is_empty() {
                continue;
            }
            let (mut m, _) = all.submesh(&faces);
            m.drop_degenerate();
            m.compute_normals();
            out.push((name.clone(), m));
        }
        Ok(out)
    }

    /// Polylines of one group. A line whose last index repeats its first is
    /// closed.
    pub fn polylines(&self, group: &str) -> Vec<Polyline> {
        let Some(g) = self.groups.iter().position(|n| n == group) else {
            return Vec::new();
        };
        self.lines
            .iter()
            .zip(&self.line_group)
            .filter(|(_, &lg)| lg == g)
            .map(|(l, _)| {
                let closed = l.len() > 2 && l.first() == l.last();
                let ids = if closed { &l[..l.len() - 1] } else { &l[..] };
                Polyline::new(ids.iter().map(|&i| self.vertices[i]).collect(), closed)
            })
            .collect()
    }
}

pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    let d = ObjData::read(path)?;
    if d.faces.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: "mesh has no faces".into(),
        });
    }
    d.mesh()
}

fn push_vertex(out: &mut String, p: &Vec3) {
    let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
}

/// Serializes labeled meshes; each part gets its own `g` group.
pub fn obj_string(parts: &[(&str, &TriMesh)]) -> String {
    let mut out = String::new();
    let mut base = 1;
    for (label, m) in parts {
        if !label.is_empty() {
            let _ = writeln!(out, "g {label}");
        }
        for p in &m.vertices {
            push_vertex(&mut out, p);
        }
        for t in &m.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base);
        }
        base += m.vertices.len();
    }
    out
}

/// Serializes labeled polylines as `l` records; closed lines repeat their
/// first vertex.
pub fn polyline_string(groups: &[(&str, &[Polyline])]) -> String {
    let mut out = String::new();
    let mut base = 1;
    for (label, lines) in groups {
        let _ = writeln!(out, "g {label}");
        for l in lines.iter() {
            for p in &l.points {
                push_vertex(&mut out, p);
            }
            let mut ids: Vec<String> = (0..l.points.len()).map(|i| (base + i).to_string()).collect();
            if l.closed && !ids.is_empty() {
                ids.push(base.to_string());
            }
            let _ = writeln!(out, "l {}", ids.join(" "));
            base += l.points.len();
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_mesh(path: &Path, mesh: &TriMesh) -> Result<()> {
    write_text(path, &obj_string(&[("", mesh)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::shapes;

    #[test]
    fn cube_round_trip() {
        let cube = shapes::unit_cube();
        let d = ObjData::parse(&obj_string(&[("", &cube)]), "mem").unwrap();
        let back = d.mesh().unwrap();
        assert_eq!(back.vertices.len(), 8);
        assert_eq!(back.triangles, cube.triangles);
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let mut text = String::new();
        for i in 0..8 {
            text += &format!("v {} {} {}\n", i & 1, (i >> 1) & 1, (i >> 2) & 1);
        }
        for q in ["1 3 4 2", "5 6 8 7", "1 2 6 5", "3 7 8 4", "1 5 7 3", "2 4 8 6"] {
            text += &format!("f {q}\n");
        }
        let m = ObjData::parse(&text, "mem").unwrap().mesh().unwrap();
        assert_eq!(m.triangles.len(), 12);
        assert_eq!(m.boundary_edge_count(), 0);
    }

    #[test]
    fn out_of_range_reports_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nv 1 1 1\nv 1 1 0\nv 0 1 1\nv 1 0 1\nf 1 2 9\n";
        let err = ObjData::parse(text, "cube.obj").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("index out of range") && msg.contains("cube.obj:9"),
            "{msg}"
        );
    }

    #[test]
    fn groups_and_lines() {
        let a = shapes::unit_cube();
        let text = obj_string(&[("seat", &a), ("leg", &a)]);
        let d = ObjData::parse(&text, "mem").unwrap();
        let parts = d.parts().unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1].0, "leg");
        assert_eq!(parts[1].1.vertices.len(), 8);
        let line = Polyline::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], true);
        let lt = polyline_string(&[("seat", std::slice::from_ref(&line))]);
        let d = ObjData::parse(&lt, "mem").unwrap();
        assert_eq!(d.polylines("seat"), vec![line]);
    }
}
