use rand::Rng;

use crate::autodiff::{Activation, Binder, Mlp, ParamStore, Tensor, Var};
use crate::encoders::grouping::{ball_query, farthest_point_sample};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

pub const LEAKY_SLOPE: f64 = 0.02;

/// One set-abstraction layer: `m` patches of up to `n` points within radius
/// `r`, each run through a shared MLP of `widths` and max-pooled. An
/// infinite radius makes the layer global (one patch over all points).
#[derive(Clone, Debug, PartialEq)]
pub struct SaConfig {
    pub m: usize,
    pub r: f64,
    pub n: usize,
    pub widths: Vec<usize>,
}

impl SaConfig {
    pub fn new(m: usize, r: f64, n: usize, widths: &[usize]) -> Self {
        Self {
            m,
            r,
            n,
            widths: widths.to_vec(),
        }
    }

    pub fn global(widths: &[usize]) -> Self {
        Self::new(1, f64::INFINITY, usize::MAX, widths)
    }

    pub fn is_global(&self) -> bool {
        self.r.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.widths.is_empty() || !(self.r > 0.0) {
            return Err(Error::invalid(format!("invalid set abstraction config {self:?}")));
        }
        Ok(())
    }
}

/// Stack of set-abstraction layers ending in a global layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PointNetConfig {
    pub layers: Vec<SaConfig>,
    /// Points fed to the encoder.
    pub points: usize,
}

impl PointNetConfig {
    /// Alignment encoder over a whole normalized part.
    pub fn full_a() -> Self {
        Self {
            layers: vec![
                SaConfig::new(256, 0.2, 128, &[64, 64, 128]),
                SaConfig::new(128, 0.4, 128, &[128, 128, 128]),
                SaConfig::global(&[128, 128, 128]),
            ],
            points: 2048,
        }
    }

    /// Joint-synthesis branch over the whole placed part.
    pub fn full_b() -> Self {
        Self {
            layers: vec![
                SaConfig::new(256, 0.1, 128, &[64, 64, 128]),
                SaConfig::new(128, 0.2, 128, &[128, 128, 128]),
                SaConfig::global(&[128, 128, 128]),
            ],
            points: 2048,
        }
    }

    /// Joint-synthesis branch over the points nearest the joint.
    pub fn full_c() -> Self {
        Self {
            layers: vec![
                SaConfig::new(256, 0.05, 128, &[32, 32, 64]),
                SaConfig::new(128, 0.1, 128, &[64, 64, 128]),
                SaConfig::global(&[128, 128, 128]),
            ],
            points: 512,
        }
    }

    /// Same widths and radii with fewer points, patches and patch members.
    pub fn scaled(&self, points: usize, m: [usize; 2], n: usize) -> Self {
        let mut c = self.clone();
        c.points = points;
        for (l, &mm) in c.layers.iter_mut().zip(&m) {
            l.m = mm;
            l.n = n;
        }
        c
    }

    pub fn desk_a() -> Self {
        Self::full_a().scaled(512, [64, 32], 32)
    }

    pub fn desk_b() -> Self {
        Self::full_b().scaled(512, [64, 32], 32)
    }

    pub fn desk_c() -> Self {
        Self::full_c().scaled(128, [32, 16], 16)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().and_then(|l| l.widths.last().copied()).unwrap_or(0)
    }

    /// `(input, output)` width of every affine layer, in order.
    pub fn layer_shapes(&self) -> Vec<Vec<(usize, usize)>> {
        let mut feat = 0;
        self.layers
            .iter()
            .map(|l| {
                let mut prev = 3 + feat;
                let shapes = l
                    .widths
                    .iter()
                    .map(|&w| {
                        let s = (prev, w);
                        prev = w;
                        s
                    })
                    .collect();
                feat = prev;
                shapes
            })
            .collect()
    }
}

/// Grouping of one cloud for every layer. Depends only on point positions,
/// so it can be computed once and reused across training steps.
#[derive(Clone, Debug)]
pub struct Plan {
    layers: Vec<LayerPlan>,
}

#[derive(Clone, Debug)]
struct LayerPlan {
    m: usize,
    n: usize,
    /// Flattened `m * n` member indices into the previous layer's points.
    members: Vec<usize>,
    /// Member coordinates relative to their patch center, `m * n x 3`.
    local: Vec<f64>,
}

impl Plan {
    pub fn new(cfg: &PointNetConfig, points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("point cloud to encode"));
        }
        // A canonical point order makes every layer independent of input order.
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
        let mut layers = Vec::with_capacity(cfg.layers.len());
        for l in &cfg.layers {
            l.validate()?;
            if l.is_global() {
                let n = pts.len();
                let local = pts.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
                layers.push(LayerPlan {
                    m: 1,
                    n,
                    members: (0..n).collect(),
                    local,
                });
                pts = vec![Vec3::zeros()];
                continue;
            }
            let centers_idx = farthest_point_sample(&pts, l.m)?;
            let centers: Vec<Vec3> = centers_idx.iter().map(|&i| pts[i]).collect();
            let groups = ball_query(&pts, &centers, l.r, l.n);
            let mut members = Vec::with_capacity(l.m * l.n);
            let mut local = Vec::with_capacity(l.m * l.n * 3);
            for (c, g) in centers.iter().zip(&groups) {
                for &i in g {
                    members.push(i);
                    let d = pts[i] - c;
                    local.extend([d.x, d.y, d.z]);
                }
            }
            layers.push(LayerPlan {
                m: l.m,
                n: l.n,
                members,
                local,
            });
            pts = centers;
        }
        Ok(Self { layers })
    }
}

/// Stack of set-abstraction layers with shared per-layer MLPs.
#[derive(Clone, Debug)]
pub struct PointNet {
    pub cfg: PointNetConfig,
    mlps: Vec<Mlp>,
}

impl PointNet {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        prefix: &str,
        cfg: PointNetConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let act = Activation::LeakyRelu(LEAKY_SLOPE);
        let mut mlps = Vec::new();
        for (i, shapes) in cfg.layer_shapes().iter().enumerate() {
            let mut widths = vec![shapes[0].0];
            widths.extend(shapes.iter().map(|s| s.1));
            mlps.push(Mlp::new(store, &format!("{prefix}/sa{i}"), &widths, act, act, rng)?);
        }
        Ok(Self { cfg, mlps })
    }

    /// Rebinds to parameters already present in `store`.
    pub fn attach<T: Real>(store: &ParamStore<T>, prefix: &str, cfg: PointNetConfig) -> Result<Self> {
        let act = Activation::LeakyRelu(LEAKY_SLOPE);
        let mut mlps = Vec::new();
        for (i, shapes) in cfg.layer_shapes().iter().enumerate() {
            let mlp = Mlp::attach(store, &format!("{prefix}/sa{i}"), shapes.len(), act, act)?;
            let want: Vec<usize> = std::iter::once(shapes[0].0).chain(shapes.iter().map(|s| s.1)).collect();
            if mlp.widths() != want {
                return Err(Error::Checkpoint(format!(
                    "{prefix}/sa{i} has widths {:?}, expected {want:?}",
                    mlp.widths()
                )));
            }
            mlps.push(mlp);
        }
        Ok(Self { cfg, mlps })
    }

    pub fn mlps(&self) -> &[Mlp] {
        &self.mlps
    }

    pub fn plan(&self, points: &[Vec3]) -> Result<Plan> {
        Plan::new(&self.cfg, points)
    }

    /// Features after the last layer: `1 x output_width` for a stack ending
    /// in a global layer.
    pub fn forward<T: Real>(&self, bind: &Binder<T>, plan: &Plan) -> Result<Var> {
        self.forward_to(bind, plan, self.mlps.len())
    }

    /// Features after the first `depth` layers, one row per patch.
    pub fn forward_to<T: Real>(&self, bind: &Binder<T>, plan: &Plan, depth: usize) -> Result<Var> {
        let tape = bind.tape;
        let mut feats: Option<Var> = None;
        for (lp, mlp) in plan.layers.iter().zip(&self.mlps).take(depth) {
            let rows = lp.m * lp.n;
            let local = tape.constant(Tensor::new(
                vec![rows, 3],
                lp.local.iter().map(|&x| T::of(x)).collect(),
            )?);
            let input = match feats {
                None => local,
                Some(f) => {
                    let g = tape.gather_rows(f, &lp.members)?;
                    tape.concat(&[local, g], 1)?
                }
            };
            let h = mlp.forward(bind, input)?;
            let h = tape.reshape(h, &[lp.m, lp.n, mlp.output_width()])?;
            feats = Some(tape.max_over_axis(h, 1)?);
        }
        feats.ok_or(Error::Empty("encoder layers"))
    }

    /// Plans and encodes in one call.
    pub fn encode<T: Real>(&self, bind: &Binder<T>, points: &[Vec3]) -> Result<Var> {
        let plan = self.plan(points)?;
        self.forward(bind, &plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Tape, Trainable};
    use crate::geom::v3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                v3(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect()
    }

    fn tiny_cfg() -> PointNetConfig {
        PointNetConfig {
            layers: vec![SaConfig::new(8, 0.4, 6, &[8, 16]), SaConfig::global(&[16, 12])],
            points: 32,
        }
    }

    fn code(net: &PointNet, store: &ParamStore<f64>, pts: &[Vec3]) -> Vec<f64> {
        let tape = Tape::new();
        let bind = Binder::new(&tape, store, Trainable::Nothing);
        let v = net.encode(&bind, pts).unwrap();
        tape.value(v).to_f64_vec()
    }

    #[test]
    fn widths_match_the_reference_tables() {
        let a = PointNetConfig::full_a().layer_shapes();
        assert_eq!(a[0], vec![(3, 64), (64, 64), (64, 128)]);
        assert_eq!(a[1], vec![(131, 128), (128, 128), (128, 128)]);
        assert_eq!(a[2], vec![(131, 128), (128, 128), (128, 128)]);
        let c = PointNetConfig::full_c().layer_shapes();
        assert_eq!(c[0], vec![(3, 32), (32, 32), (32, 64)]);
        assert_eq!(c[1], vec![(67, 64), (64, 64), (64, 128)]);
        assert_eq!(c[2], vec![(131, 128), (128, 128), (128, 128)]);
        assert_eq!(PointNetConfig::full_b().layers[0].r, 0.1);
        assert_eq!(PointNetConfig::full_b().layers[1].r, 0.2);
        for cfg in [
            PointNetConfig::desk_a(),
            PointNetConfig::desk_b(),
            PointNetConfig::desk_c(),
        ] {
            assert_eq!(cfg.output_width(), 128);
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut store = ParamStore::<f64>::new();
        let net = PointNet::new(&mut store, "enc", tiny_cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let pts = cloud(32, 1);
        let mut rev = pts.clone();
        rev.reverse();
        rev.swap(3, 17);
        let (a, b) = (code(&net, &store, &pts), code(&net, &store, &rev));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-5);
        }
    }

    #[test]
    fn duplicated_points_give_identical_patches() {
        let mut store = ParamStore::<f64>::new();
        let cfg = PointNetConfig {
            layers: vec![SaConfig::new(4, 0.3, 5, &[6, 7])],
            points: 10,
        };
        let net = PointNet::new(&mut store, "enc", cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let pts = vec![v3(0.1, 0.2, 0.3); 10];
        let tape = Tape::new();
        let bind = Binder::new(&tape, &store, Trainable::Nothing);
        let v = net.encode(&bind, &pts).unwrap();
        let h = tape.value(v);
        assert_eq!(h.shape(), &[4, 7]);
        for r in 1..4 {
            assert_eq!(h.row(r), h.row(0));
        }
    }

    #[test]
    fn first_layer_is_translation_covariant() {
        let mut store = ParamStore::<f64>::new();
        let net = PointNet::new(&mut store, "enc", tiny_cfg(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let pts = cloud(32, 4);
        let moved: Vec<Vec3> = pts.iter().map(|p| p + v3(0.3, -0.2, 0.7)).collect();
        let first = |pts: &[Vec3]| {
            let tape = Tape::new();
            let bind = Binder::new(&tape, &store, Trainable::Nothing);
            let plan = net.plan(pts).unwrap();
            let v = net.forward_to(&bind, &plan, 1).unwrap();
            tape.value(v).to_f64_vec()
        };
        let (a, b) = (first(&pts), first(&moved));
        assert_eq!(a.len(), 8 * 16);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-5);
        }
    }

    fn leaky(x: f64) -> f64 {
        if x > 0.0 {
            x
        } else {
            LEAKY_SLOPE * x
        }
    }

    /// Direct loop evaluation of one shared MLP on one input row.
    fn naive_mlp(store: &ParamStore<f64>, mlp: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for l in &mlp.layers {
            let w = store.get(l.w);
            let b = store.get(l.b);
            let mut out = vec![0.0; l.fan_out];
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = b.data()[j];
                for (i, hi) in h.iter().enumerate() {
                    acc += hi * w.data()[i * l.fan_out + j];
                }
                *o = leaky(acc);
            }
            h = out;
        }
        h
    }

    #[test]
    fn single_layer_matches_naive_loops() {
        let cfg = PointNetConfig {
            layers: vec![SaConfig::new(8, 0.35, 6, &[16, 16, 24])],
            points: 32,
        };
        let mut store = ParamStore::<f64>::new();
        let net = PointNet::new(&mut store, "enc", cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut pts = cloud(32, 6);
        let tape = Tape::new();
        let bind = Binder::new(&tape, &store, Trainable::Nothing);
        let got = tape.value(net.encode(&bind, &pts).unwrap()).to_f64_vec();

        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
        // Max-min selection from index 0.
        let mut centers = vec![0usize];
        while centers.len() < 8 {
            let far = (0..32)
                .map(|i| {
                    let d = centers
                        .iter()
                        .map(|&c| (pts[i] - pts[c]).norm())
                        .fold(f64::INFINITY, f64::min);
                    (d, i)
                })
                .fold((-1.0, 0), |a, b| if b.0 > a.0 { b } else { a });
            centers.push(far.1);
        }
        let mut want = Vec::new();
        for &c in &centers {
            let mut group: Vec<usize> = (0..32).filter(|&i| (pts[i] - pts[c]).norm() <= 0.35).take(6).collect();
            while group.len() < 6 {
                group.push(group[0]);
            }
            let mut best = vec![f64::NEG_INFINITY; 24];
            for &i in &group {
                let d = pts[i] - pts[c];
                let f = naive_mlp(&store, &net.mlps()[0], &[d.x, d.y, d.z]);
                for (b, v) in best.iter_mut().zip(f) {
                    *b = b.max(v);
                }
            }
            want.extend(best);
        }
        assert_eq!(got.len(), want.len());
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-5, "{x} vs {y}");
        }
    }
}
