use coalesce::align::{
    emd_loss, evaluate_alignment, split_counts, train_alignment, AlignNet, AlignPart, AlignSample, AlignTrainConfig,
};
use coalesce::autodiff::ParamStore;
use coalesce::encoders::{PointNetConfig, SaConfig};
use coalesce::geom::{v3, Similarity, Vec3};
use coalesce::meshkit::normalizing_transform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny() -> PointNetConfig {
    PointNetConfig {
        layers: vec![SaConfig::new(8, 0.4, 8, &[16, 32]), SaConfig::global(&[32, 32])],
        points: 64,
    }
}

fn box_points(rng: &mut ChaCha8Rng, n: usize, lo: Vec3, hi: Vec3) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            v3(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
                rng.random_range(lo.z..hi.z),
            )
        })
        .collect()
}

/// Seat slab plus a back panel, normalized per part.
fn sample(seed: u64, emd_total: usize) -> AlignSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes = [
        (v3(-0.4, -0.05, -0.4), v3(0.4, 0.05, 0.4)),
        (v3(-0.4, 0.05, 0.3), v3(0.4, 0.5, 0.4)),
    ];
    let counts = split_counts(emd_total, boxes.len());
    let parts = boxes
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), k)| {
            let pts = box_points(&mut rng, 64, lo, hi);
            let norm = normalizing_transform(&pts).unwrap();
            let cloud: Vec<Vec3> = pts.iter().map(|p| norm.apply(p)).collect();
            Some(AlignPart {
                emd_points: cloud[..k].to_vec(),
                cloud,
                truth: norm.inverse(),
            })
        })
        .collect();
    AlignSample { parts }
}

#[test]
fn zero_initialized_head_predicts_identity() {
    let mut store = ParamStore::<f64>::new();
    let net = AlignNet::new(&mut store, tiny(), 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let s = sample(1, 32);
    let clouds = [Some(s.parts[0].as_ref().unwrap().cloud.as_slice()), None, None];
    let xf = net.predict(&store, &clouds).unwrap();
    assert!(xf.iter().all(|x| *x == Similarity::IDENTITY));
}

#[test]
fn absent_slots_stay_identity_after_training() {
    let mut store = ParamStore::<f32>::new();
    let net = AlignNet::new(&mut store, tiny(), 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut s = sample(2, 32);
    s.parts.push(None);
    let cfg = AlignTrainConfig {
        epochs: 5,
        batch: 1,
        lr: 1e-2,
        seed: 0,
    };
    train_alignment(&mut store, &net, &[s.clone()], cfg).unwrap();
    let xf = net.predict(&store, &s.clouds()).unwrap();
    assert_ne!(xf[0], Similarity::IDENTITY);
    assert_eq!(xf[2], Similarity::IDENTITY);
}

#[test]
fn overfits_one_shape() {
    let mut store = ParamStore::<f32>::new();
    let net = AlignNet::new(&mut store, tiny(), 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let data = vec![sample(4, 128)];
    let cfg = AlignTrainConfig {
        epochs: 200,
        batch: 1,
        lr: 1e-3,
        seed: 0,
    };
    let report = train_alignment(&mut store, &net, &data, cfg).unwrap();
    let first = report.epoch_loss[0];
    let last = evaluate_alignment(&store, &net, &data).unwrap();
    assert_eq!(report.steps, 200);
    assert!(last <= 0.02, "final emd {last}");
    assert!(last <= 0.1 * first, "emd {first} -> {last}");
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let mut store = ParamStore::<f64>::new();
    let net = AlignNet::new(&mut store, tiny(), 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let data = vec![sample(6, 32), sample(7, 32)];
    let cfg = AlignTrainConfig {
        epochs: 3,
        batch: 2,
        lr: 0.0,
        seed: 0,
    };
    let report = train_alignment(&mut store, &net, &data, cfg).unwrap();
    assert!(report.epoch_loss.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    assert!(train_alignment(&mut store, &net, &[], cfg).is_err());
}

#[test]
fn default_training_settings() {
    let d = AlignTrainConfig::default();
    assert_eq!((d.epochs, d.batch, d.lr), (200, 8, 1e-3));
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            v3(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect()
}

fn costs(a: &[Vec3], b: &[Vec3]) -> Vec<Vec<f64>> {
    a.iter().map(|p| b.iter().map(|q| (p - q).norm()).collect()).collect()
}

/// Minimum over all permutations.
fn brute_force(c: &[Vec<f64>]) -> f64 {
    fn go(c: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == c.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..c.len() {
            if !used[j] {
                used[j] = true;
                go(c, row + 1, used, acc + c[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(c, 0, &mut vec![false; c.len()], 0.0, &mut best);
    best
}

/// Minimum-cost perfect matching by successive shortest augmenting paths
/// (Bellman-Ford on the residual bipartite graph).
fn shortest_paths(c: &[Vec<f64>]) -> f64 {
    let n = c.len();
    let mut row_of = vec![usize::MAX; n];
    let mut col_of = vec![usize::MAX; n];
    for _ in 0..n {
        // Nodes 0..n are rows, n..2n columns.
        let mut dist = vec![f64::INFINITY; 2 * n];
        let mut prev = vec![usize::MAX; 2 * n];
        for i in 0..n {
            if col_of[i] == usize::MAX {
                dist[i] = 0.0;
            }
        }
        for _ in 0..2 * n {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_infinite() {
                    continue;
                }
                for j in 0..n {
                    if col_of[i] == j {
                        continue;
                    }
                    let d = dist[i] + c[i][j];
                    if d < dist[n + j] - 1e-15 {
                        dist[n + j] = d;
                        prev[n + j] = i;
                        changed = true;
                    }
                }
            }
            for j in 0..n {
                let i = row_of[j];
                if i != usize::MAX && dist[n + j].is_finite() {
                    let d = dist[n + j] - c[i][j];
                    if d < dist[i] - 1e-15 {
                        dist[i] = d;
                        prev[i] = n + j;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let end = (0..n)
            .filter(|&j| row_of[j] == usize::MAX)
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]))
            .unwrap();
        let mut j = end;
        loop {
            let i = prev[n + j];
            let next = col_of[i];
            col_of[i] = j;
            row_of[j] = i;
            if next == usize::MAX {
                break;
            }
            j = next;
        }
    }
    (0..n).map(|i| c[i][col_of[i]]).sum()
}

#[test]
fn emd_matches_exact_assignment_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=32 {
        for _ in 0..3 {
            let (a, b) = (cloud(&mut rng, n), cloud(&mut rng, n));
            let c = costs(&a, &b);
            let oracle = shortest_paths(&c) / n as f64;
            assert!((emd_loss(&a, &b).unwrap() - oracle).abs() <= 1e-9, "n = {n}");
            if n <= 7 {
                assert!((brute_force(&c) / n as f64 - oracle).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn emd_of_translated_set_is_exactly_the_offset_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a: Vec<Vec3> = (0..32)
        .map(|_| {
            v3(
                rng.random_range(-64..64) as f64 / 128.0,
                rng.random_range(-64..64) as f64 / 128.0,
                rng.random_range(-64..64) as f64 / 128.0,
            )
        })
        .collect();
    let d = v3(0.0, 0.375, 0.5);
    let b: Vec<Vec3> = a.iter().map(|p| p + d).collect();
    assert_eq!(emd_loss(&a, &b).unwrap(), 0.625);
}
