use log::{info, warn};

use crate::error::Result;
use crate::meshkit::mesh::weld_topological;
use crate::meshkit::{boundary_loops, TriMesh};
use crate::surfacing::blend::{poisson_blend, remove_redundant, SolveStats};
use crate::surfacing::bridge::bridge_loops;
use crate::surfacing::corr::{loop_correspondence, LoopCorrespondence};
use crate::surfacing::mc::{marching_cubes, ScalarField, ISO};

/// Weld tolerance as a fraction of the output bounding-box diagonal.
pub const WELD_REL: f64 = 1e-6;

/// Conditions under which stitching fell back to a plain union.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StitchFlags {
    /// The field has no iso crossing; output holds the parts only.
    pub joint_empty: bool,
    /// No part loop found a joint loop; output is parts plus raw joint.
    pub all_loops_failed: bool,
    pub failed_loops: usize,
}

impl StitchFlags {
    pub fn fallback(&self) -> bool {
        self.joint_empty || self.all_loops_failed
    }
}

#[derive(Clone, Debug)]
pub struct StitchResult {
    pub mesh: TriMesh,
    pub raw_joint: TriMesh,
    pub blended_joint: TriMesh,
    pub correspondences: Vec<LoopCorrespondence>,
    pub solve: SolveStats,
    pub flags: StitchFlags,
}

impl StitchResult {
    /// Largest distance from a matched joint-loop vertex to the nearest
    /// vertex of its part loop, measured on the blended joint.
    pub fn loop_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for c in self.correspondences.iter().filter(|c| c.matched) {
            for &t in &c.joint_loop {
                let q = self.blended_joint.vertices[t];
                let d = c
                    .part_points
                    .iter()
                    .map(|p| (p - q).norm())
                    .fold(f64::INFINITY, f64::min);
                gap = gap.max(d);
            }
        }
        gap
    }
}

struct PartLoop {
    offset_ids: Vec<usize>,
    corr: LoopCorrespondence,
}

fn weld_tolerance(mesh: &TriMesh) -> f64 {
    WELD_REL * mesh.used_bbox().diagonal()
}

fn union(meshes: &[&TriMesh]) -> TriMesh {
    let mut out = TriMesh::default();
    for m in meshes {
        out.append(m);
    }
    out
}

/// Extracts the joint surface of `field`, matches it to every boundary
/// loop of the (already placed) parts, removes the joint regions inside
/// the parts, blends the joint onto the loops and bridges the remaining
/// gaps. Parts are never modified.
pub fn stitch(parts: &[TriMesh], field: &ScalarField) -> Result<StitchResult> {
    let part_refs: Vec<&TriMesh> = parts.iter().collect();
    let raw_joint = marching_cubes(field, ISO);
    let mut flags = StitchFlags::default();
    if raw_joint.is_empty() {
        warn!("joint field has no iso crossing; returning parts only");
        flags.joint_empty = true;
        let u = union(&part_refs);
        let mesh = weld_topological(&u, weld_tolerance(&u));
        return Ok(StitchResult {
            mesh,
            blended_joint: raw_joint.clone(),
            raw_joint,
            correspondences: Vec::new(),
            solve: SolveStats::default(),
            flags,
        });
    }
    let neighbors = raw_joint.vertex_neighbors();
    let mut loops = Vec::new();
    let mut offset = 0;
    for part in parts {
        for l in boundary_loops(part)? {
            let pts: Vec<_> = l.vertex_ids.iter().map(|&v| part.vertices[v]).collect();
            let nrm: Vec<_> = l.vertex_ids.iter().map(|&v| part.normals[v]).collect();
            let corr = loop_correspondence(&pts, &nrm, &raw_joint, &neighbors);
            if !corr.matched {
                flags.failed_loops += 1;
            }
            loops.push(PartLoop {
                offset_ids: l.vertex_ids.iter().map(|&v| v + offset).collect(),
                corr,
            });
        }
        offset += part.vertices.len();
    }
    let corrs: Vec<LoopCorrespondence> = loops.iter().map(|l| l.corr.clone()).collect();
    if !corrs.iter().any(|c| c.matched) {
        warn!("no part loop matched the joint mesh; returning unblended union");
        flags.all_loops_failed = true;
        let mut refs = part_refs.clone();
        refs.push(&raw_joint);
        let u = union(&refs);
        let mesh = weld_topological(&u, weld_tolerance(&u));
        return Ok(StitchResult {
            mesh,
            blended_joint: raw_joint.clone(),
            raw_joint,
            correspondences: corrs,
            solve: SolveStats::default(),
            flags,
        });
    }
    let trimmed = remove_redundant(&raw_joint, &corrs);
    let (blended, solve) = poisson_blend(&trimmed, &corrs)?;
    let mut all = union(&part_refs);
    let joint_offset = all.append(&blended);
    for l in loops.iter().filter(|l| l.corr.matched) {
        let s: Vec<usize> = l.offset_ids.iter().rev().copied().collect();
        let t: Vec<usize> = l.corr.joint_loop.iter().rev().map(|&v| v + joint_offset).collect();
        let sp: Vec<_> = s.iter().map(|&v| all.vertices[v]).collect();
        let tp: Vec<_> = t.iter().map(|&v| all.vertices[v]).collect();
        for tri in bridge_loops(&sp, &tp)? {
            let map = |k: usize| if k < s.len() { s[k] } else { t[k - s.len()] };
            all.triangles.push([map(tri[0]), map(tri[1]), map(tri[2])]);
        }
    }
    let tol = weld_tolerance(&all);
    let mesh = weld_topological(&all, tol);
    info!(
        "stitched {} loops ({} failed), {} faces, cg {} iterations",
        loops.len() - flags.failed_loops,
        flags.failed_loops,
        mesh.triangles.len(),
        solve.iterations
    );
    Ok(StitchResult {
        mesh,
        raw_joint,
        blended_joint: blended,
        correspondences: corrs,
        solve,
        flags,
    })
}
