use std::path::{Path, PathBuf};

use coalesce::align::CategoryConfig;
use coalesce::geom::{v3, Vec3};
use coalesce::jointsynth::JointPartInput;
use coalesce::meshkit::shapes::strip;
use coalesce::meshkit::{boundary_loops, erode_part, ErosionConfig, GridSpec, InsideTester, TriMesh};
use coalesce::pipeline::models::{add_decoder, new_align, new_joint_encoder, save_checkpoint, KIND_ALIGN, KIND_JOINT};
use coalesce::pipeline::perturb::{sample_similarity, sine_warp_point};
use coalesce::pipeline::synth::generate_shape;
use coalesce::pipeline::{
    assemble_parts, chamfer_meshes, chamfer_points, evaluate_suite, generate_synthetic, perturb_similarity,
    perturb_sine, run_assemble, AssembleRequest, InputPart, LabeledShape, Models, PartSpec, PerturbConfig,
    Perturbation, PipelineConfig, RunManifest, STAGES,
};
use coalesce::surfacing::{stitch, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config(dir: &Path) -> PipelineConfig {
    PipelineConfig {
        decoder_hidden: vec![16, 8],
        refine_iters: 2,
        test_res: 24,
        chamfer_samples: 2048,
        align_checkpoint: dir.join("align.clsc").display().to_string(),
        joint_checkpoint: dir.join("joint.clsc").display().to_string(),
        ..PipelineConfig::default()
    }
}

/// Untrained models saved where `cfg` expects them.
fn save_tiny_models(cfg: &PipelineConfig) {
    let (align, _) = new_align(cfg).unwrap();
    save_checkpoint(&align, KIND_ALIGN, cfg, Path::new(&cfg.align_checkpoint)).unwrap();
    let (mut joint, _) = new_joint_encoder(cfg).unwrap();
    add_decoder(&mut joint, cfg).unwrap();
    save_checkpoint(&joint, KIND_JOINT, cfg, Path::new(&cfg.joint_checkpoint)).unwrap();
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn chair(seed: u64) -> LabeledShape {
    generate_shape(&CategoryConfig::chairlike(), "shape_000", seed)
        .unwrap()
        .0
}

fn chair_with_arms() -> LabeledShape {
    (0..64).map(chair).find(|s| s.part("arm").is_some()).unwrap()
}

#[test]
fn gen_data_is_deterministic_with_one_directory_per_shape() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cat = CategoryConfig::chairlike();
    let m = generate_synthetic(&cat, 8, 5, a.path()).unwrap();
    generate_synthetic(&cat, 8, 5, b.path()).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
    assert_eq!(m.shapes.len(), 8);
    assert!(a.path().join("dataset.json").is_file());
    let dirs: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .collect();
    assert_eq!(dirs.len(), 8);
    let c = tempfile::tempdir().unwrap();
    generate_synthetic(&cat, 8, 6, c.path()).unwrap();
    assert_ne!(files(a.path()), files(c.path()));
}

fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    // Closest point by region tests on the barycentric parameters.
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (p - (a + ab * (d1 / (d1 - d3)))).norm();
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (p - (a + ac * (d2 / (d2 - d6)))).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm()
}

fn mesh_distance(m: &TriMesh, p: &Vec3) -> f64 {
    m.triangles
        .iter()
        .map(|t| point_triangle_distance(p, &m.vertices[t[0]], &m.vertices[t[1]], &m.vertices[t[2]]))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn chair_seams_lie_on_two_parts() {
    for seed in 0..4 {
        let shape = chair(seed);
        assert!(!shape.seams.is_empty());
        for seam in &shape.seams {
            for p in &seam.points {
                let touching = shape
                    .parts
                    .iter()
                    .filter(|part| mesh_distance(&part.mesh, p) <= 1e-9)
                    .count();
                assert!(touching >= 2, "seed {seed}: seam point {p:?} touches {touching} parts");
            }
        }
    }
}

#[test]
fn missing_slot_gets_zero_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (mut store, _) = new_joint_encoder(&cfg).unwrap();
    let model = add_decoder(&mut store, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cloud = |n: usize| -> Vec<Vec3> {
        (0..n)
            .map(|_| v3(rng.random_range(-0.5..0.5), rng.random(), rng.random()))
            .collect()
    };
    let cat = CategoryConfig::chairlike();
    let arm = cat.slot_of("arm").unwrap();
    let (full, near) = (model.encoder.full_points(), model.encoder.near_points());
    let inputs: Vec<Option<JointPartInput>> = (0..cat.slots())
        .map(|s| {
            (s != arm).then(|| JointPartInput {
                cloud: cloud(full),
                near: cloud(near),
            })
        })
        .collect();
    let code = model.code_values(&store, &inputs).unwrap();
    let w = model.encoder.width();
    assert_eq!(code.len(), w * cat.slots());
    assert!(code[arm * w..(arm + 1) * w].iter().all(|&c| c == 0.0));
    assert!(code[..w].iter().any(|&c| c != 0.0));
}

#[test]
fn assembly_completes_without_arms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    save_tiny_models(&cfg);
    let models = Models::from_config(&cfg).unwrap();
    let shape = chair_with_arms();
    let inputs: Vec<InputPart> = ["back", "seat", "leg"]
        .iter()
        .map(|l| InputPart {
            shape: &shape,
            label: l.to_string(),
        })
        .collect();
    let asm = assemble_parts(&cfg, &models, &inputs, true).unwrap();
    assert_eq!(asm.initial.len(), 3);
    assert_eq!(asm.h.len(), cfg.refine_iters + 1);
    assert!(!asm.stitched.mesh.is_empty());
    let twice = vec![
        InputPart {
            shape: &shape,
            label: "seat".into(),
        },
        InputPart {
            shape: &shape,
            label: "seat".into(),
        },
    ];
    assert!(assemble_parts(&cfg, &models, &twice, false).is_err());
}

#[test]
fn missing_checkpoint_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let shape_dir = dir.path().join("shape");
    chair(0).save(&shape_dir).unwrap();
    let req = AssembleRequest {
        config: cfg,
        parts: vec![PartSpec {
            shape: shape_dir,
            label: "seat".into(),
        }],
        refine: false,
        output: dir.path().join("out.obj"),
        manifest: None,
    };
    let err = run_assemble(&req).err().expect("missing checkpoint is an error");
    assert!(err.to_string().contains("does not exist"), "{err}");
    assert!(!req.output.exists());
    assert!(!req.manifest_path().exists());
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    save_tiny_models(&cfg);
    let shape_dir = dir.path().join("shape");
    chair(1).save(&shape_dir).unwrap();
    let parts = ["back", "seat", "leg"]
        .iter()
        .map(|l| format!("{}:{l}", shape_dir.display()).parse().unwrap())
        .collect();
    let req = AssembleRequest {
        config: cfg,
        parts,
        refine: true,
        output: dir.path().join("a.obj"),
        manifest: None,
    };
    let first = run_assemble(&req).unwrap();
    let recorded = RunManifest::load(&req.manifest_path()).unwrap();
    assert_eq!(recorded.output_sha256, first.output_sha256);
    let again = AssembleRequest::replay(&recorded, dir.path().join("b.obj")).unwrap();
    let second = run_assemble(&again).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a.obj")).unwrap(),
        std::fs::read(dir.path().join("b.obj")).unwrap()
    );
    assert_eq!(first.output_sha256, second.output_sha256);
    assert_eq!(first.transforms_refined, second.transforms_refined);
}

#[test]
fn evaluation_report_has_three_ordered_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    save_tiny_models(&cfg);
    let data = dir.path().join("data");
    generate_synthetic(&CategoryConfig::chairlike(), 2, 0, &data).unwrap();
    let models = Models::from_config(&cfg).unwrap();
    let report = evaluate_suite(&cfg, &models, &data, Perturbation::None, Some(1)).unwrap();
    let labels: Vec<&str> = report.rows.iter().map(|r| r.stage.as_str()).collect();
    assert_eq!(labels, STAGES);
    assert_eq!(STAGES, ["before refinement", "after refinement", "after blending"]);
    assert_eq!(report.shapes.len(), 1);
    assert!(report
        .rows
        .iter()
        .all(|r| r.mean_chamfer.is_finite() && r.mean_chamfer >= 0.0));
    assert!(evaluate_suite(&cfg, &models, &data, Perturbation::None, Some(0)).is_err());
}

#[test]
fn chamfer_identity_offset_and_symmetry() {
    let a = strip(1.0, 1.0, 8, 8);
    assert_eq!(chamfer_meshes(&a, &a, 4096, true).unwrap(), 0.0);
    let d = 0.05;
    let mut b = a.clone();
    for v in &mut b.vertices {
        v.z += d;
    }
    let c = chamfer_meshes(&a, &b, 16384, true).unwrap();
    let expected = d * d * 1e3;
    assert!((c - expected).abs() / expected < 0.02, "{c} vs {expected}");
    let rev = chamfer_meshes(&b, &a, 16384, true).unwrap();
    assert!((c - rev).abs() <= 1e-9);
    assert!(chamfer_meshes(&a, &TriMesh::default(), 16, true).is_err());
}

proptest! {
    #[test]
    fn chamfer_is_nonnegative_and_zero_on_identical_sets(
        a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40),
        b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40),
    ) {
        let a: Vec<Vec3> = a.into_iter().map(|(x, y, z)| v3(x, y, z)).collect();
        let b: Vec<Vec3> = b.into_iter().map(|(x, y, z)| v3(x, y, z)).collect();
        prop_assert!(chamfer_points(&a, &b, true).unwrap() >= 0.0);
        prop_assert_eq!(chamfer_points(&a, &a, true).unwrap(), 0.0);
        prop_assert_eq!(chamfer_points(&a, &b, true).unwrap(), chamfer_points(&b, &a, true).unwrap());
    }

    #[test]
    fn sine_with_opposite_amplitudes_restores_vertices(
        x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, a in 0.0f64..0.1, f in -3.2f64..3.2,
    ) {
        let w = 4.0 * std::f64::consts::PI;
        let p = v3(x, y, z);
        let q = sine_warp_point(&sine_warp_point(&p, a, w, f), -a, w, f);
        prop_assert_eq!((q.x, q.z), (p.x, p.z));
        prop_assert!((q.y - p.y).abs() <= 4.0 * f64::EPSILON);
    }
}

#[test]
fn sine_warp_spot_values() {
    let w = 4.0 * std::f64::consts::PI;
    let p = v3(0.0, 0.0, 0.125);
    assert_eq!(sine_warp_point(&p, 0.02, w, 0.0), v3(0.0, 0.02, 0.125));
    let q = v3(0.3, -0.2, 0.7);
    assert_eq!(sine_warp_point(&q, 0.0, w, 1.3), q);
    assert_eq!(sine_warp_point(&v3(0.0, 0.5, 0.0), 0.02, w, 0.0), v3(0.0, 0.5, 0.0));
    let shape = chair(2);
    let zero = PerturbConfig {
        amplitude: 0.0,
        ..PerturbConfig::default()
    };
    let (same, _) = perturb_sine(&shape, &zero, 9);
    for (p, q) in shape.parts.iter().zip(&same.parts) {
        assert_eq!(p.mesh.vertices, q.mesh.vertices);
    }
}

#[test]
fn sine_phase_is_shared_across_parts() {
    let shape = chair(3);
    let cfg = PerturbConfig::default();
    let (warped, phase) = perturb_sine(&shape, &cfg, 17);
    for (p, q) in shape.parts.iter().zip(&warped.parts) {
        for (a, b) in p.mesh.vertices.iter().zip(&q.mesh.vertices) {
            assert_eq!(*b, sine_warp_point(a, cfg.amplitude, cfg.frequency, phase));
        }
    }
    assert_eq!(perturb_sine(&shape, &cfg, 17).1, phase);
}

#[test]
fn similarity_samples_stay_in_range() {
    let cfg = PerturbConfig::default();
    for seed in 0..1000 {
        let x = sample_similarity(&cfg, seed);
        assert!((0.9..=1.1).contains(&x.s), "seed {seed}: {}", x.s);
        assert!(x.t.iter().all(|t| (-0.04..=0.04).contains(t)), "seed {seed}: {:?}", x.t);
    }
    let fixed = PerturbConfig {
        scale_min: 1.0,
        scale_max: 1.0,
        translation: 0.0,
        ..cfg
    };
    let shape = chair(4);
    let (same, xf) = perturb_similarity(&shape, &fixed, 3);
    assert_eq!((xf.s, xf.t), (1.0, v3(0.0, 0.0, 0.0)));
    for (p, q) in shape.parts.iter().zip(&same.parts) {
        assert_eq!(p.mesh.vertices, q.mesh.vertices);
    }
}

#[test]
fn similarity_is_one_transform_for_all_parts() {
    let shape = chair(5);
    let (moved, xf) = perturb_similarity(&shape, &PerturbConfig::default(), 8);
    for (p, q) in shape.parts.iter().zip(&moved.parts) {
        for (a, b) in p.mesh.vertices.iter().zip(&q.mesh.vertices) {
            assert_eq!(*b, xf.apply(a));
        }
    }
}

#[test]
fn mug_stitches_closed_on_ground_truth_occupancy() {
    let cat = CategoryConfig::muglike();
    let shape = generate_shape(&cat, "mug", 0).unwrap().0;
    let diameter = shape.bbox().diagonal();
    let eroded: Vec<TriMesh> = shape
        .parts
        .iter()
        .map(|p| erode_part(&p.mesh, &shape.seams, ErosionConfig { tau: cat.tau }, diameter).unwrap())
        .collect();
    let whole: Vec<&TriMesh> = shape.parts.iter().map(|p| &p.mesh).collect();
    let inside = InsideTester::new(&whole);
    let rim: Vec<Vec3> = eroded
        .iter()
        .flat_map(|m| {
            boundary_loops(m)
                .unwrap()
                .into_iter()
                .flat_map(|l| l.vertex_ids.into_iter().map(|v| m.vertices[v]))
        })
        .collect();
    let spec = GridSpec::cube(64, &shape.bbox(), 2);
    let radius = 2.0 * cat.tau * diameter;
    let field = ScalarField::from_fn(spec, |p| {
        let near = rim.iter().any(|q| (p - q).norm() <= radius);
        if near && inside.contains(p) {
            1.0
        } else {
            0.0
        }
    });
    let out = stitch(&eroded, &field).unwrap();
    assert!(!out.flags.fallback(), "{:?}", out.flags);
    assert_eq!(out.loop_gap(), 0.0);
}
