//! Point-cloud encoders built from set-abstraction layers.

mod grouping;
mod pointnet;

pub use grouping::{ball_query, farthest_point_sample};
pub use pointnet::{Plan, PointNet, PointNetConfig, SaConfig, LEAKY_SLOPE};

use rand::Rng;

use crate::autodiff::{Binder, ParamStore, Tape, Tensor, Trainable, Var};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

/// Per-part feature vector. Absent parts carry zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct PartCode {
    pub vector: Vec<f64>,
    pub present: bool,
}

impl PartCode {
    pub fn absent(width: usize) -> Self {
        Self {
            vector: vec![0.0; width],
            present: false,
        }
    }
}

/// Indices of the `k` points closest to the segmentation boundary, given
/// per-point boundary distances. Ties keep the lower index.
pub fn near_joint_indices(dist: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn zero_code<T: Real>(tape: &Tape<T>, width: usize) -> Var {
    tape.constant(Tensor::zeros(&[1, width]))
}

fn check_count(points: &[Vec3], want: usize, what: &str) -> Result<()> {
    if points.len() != want {
        return Err(Error::invalid(format!(
            "{what} has {} points, expected {want}",
            points.len()
        )));
    }
    Ok(())
}

/// Shared alignment encoder (parameters under `enc_A/`).
#[derive(Clone, Debug)]
pub struct AlignEncoder {
    pub net: PointNet,
}

impl AlignEncoder {
    pub const PREFIX: &'static str = "enc_A";

    pub fn new<T: Real, R: Rng>(store: &mut ParamStore<T>, cfg: PointNetConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            net: PointNet::new(store, Self::PREFIX, cfg, rng)?,
        })
    }

    pub fn attach<T: Real>(store: &ParamStore<T>, cfg: PointNetConfig) -> Result<Self> {
        Ok(Self {
            net: PointNet::attach(store, Self::PREFIX, cfg)?,
        })
    }

    pub fn width(&self) -> usize {
        self.net.cfg.output_width()
    }

    pub fn plan(&self, cloud: &[Vec3]) -> Result<Plan> {
        check_count(cloud, self.net.cfg.points, "alignment input")?;
        self.net.plan(cloud)
    }

    /// `1 x width` code; zeros for an absent part.
    pub fn forward<T: Real>(&self, bind: &Binder<T>, plan: Option<&Plan>) -> Result<Var> {
        match plan {
            Some(p) => self.net.forward(bind, p),
            None => Ok(zero_code(bind.tape, self.width())),
        }
    }

    pub fn encode<T: Real>(&self, store: &ParamStore<T>, cloud: Option<&[Vec3]>) -> Result<PartCode> {
        let Some(cloud) = cloud else {
            return Ok(PartCode::absent(self.width()));
        };
        let plan = self.plan(cloud)?;
        let tape = Tape::new();
        let bind = Binder::new(&tape, store, Trainable::Nothing);
        let v = self.forward(&bind, Some(&plan))?;
        Ok(PartCode {
            vector: tape.value(v).to_f64_vec(),
            present: true,
        })
    }
}

/// Planned inputs of one part for the two-branch joint encoder.
#[derive(Clone, Debug)]
pub struct JointPlan {
    pub full: Plan,
    pub near: Plan,
}

/// Two-branch joint encoder, one pair of networks per part slot
/// (parameters under `enc_B/<slot>/` and `enc_C/<slot>/`).
#[derive(Clone, Debug)]
pub struct JointEncoder {
    pub slots: Vec<String>,
    pub full: Vec<PointNet>,
    pub near: Vec<PointNet>,
}

impl JointEncoder {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        slots: &[String],
        full_cfg: PointNetConfig,
        near_cfg: PointNetConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut full = Vec::new();
        let mut near = Vec::new();
        for s in slots {
            full.push(PointNet::new(store, &format!("enc_B/{s}"), full_cfg.clone(), rng)?);
            near.push(PointNet::new(store, &format!("enc_C/{s}"), near_cfg.clone(), rng)?);
        }
        Ok(Self {
            slots: slots.to_vec(),
            full,
            near,
        })
    }

    pub fn attach<T: Real>(
        store: &ParamStore<T>,
        slots: &[String],
        full_cfg: PointNetConfig,
        near_cfg: PointNetConfig,
    ) -> Result<Self> {
        let mut full = Vec::new();
        let mut near = Vec::new();
        for s in slots {
            full.push(PointNet::attach(store, &format!("enc_B/{s}"), full_cfg.clone())?);
            near.push(PointNet::attach(store, &format!("enc_C/{s}"), near_cfg.clone())?);
        }
        Ok(Self {
            slots: slots.to_vec(),
            full,
            near,
        })
    }

    pub fn full_points(&self) -> usize {
        self.full.first().map_or(0, |n| n.cfg.points)
    }

    pub fn near_points(&self) -> usize {
        self.near.first().map_or(0, |n| n.cfg.points)
    }

    /// Width of one slot's concatenated code.
    pub fn width(&self) -> usize {
        self.full.first().map_or(0, |n| n.cfg.output_width()) + self.near.first().map_or(0, |n| n.cfg.output_width())
    }

    pub fn plan(&self, slot: usize, cloud: &[Vec3], near_joint: &[Vec3]) -> Result<JointPlan> {
        check_count(cloud, self.full_points(), "joint input")?;
        check_count(near_joint, self.near_points(), "near-joint input")?;
        Ok(JointPlan {
            full: self.full[slot].plan(cloud)?,
            near: self.near[slot].plan(near_joint)?,
        })
    }

    /// `1 x width` code for one slot; zeros for an absent part.
    pub fn forward<T: Real>(&self, bind: &Binder<T>, slot: usize, plan: Option<&JointPlan>) -> Result<Var> {
        if slot >= self.slots.len() {
            return Err(Error::invalid(format!("slot {slot} out of range")));
        }
        match plan {
            Some(p) => {
                let a = self.full[slot].forward(bind, &p.full)?;
                let b = self.near[slot].forward(bind, &p.near)?;
                bind.tape.concat(&[a, b], 1)
            }
            None => Ok(zero_code(bind.tape, self.width())),
        }
    }

    /// All slot codes concatenated into `1 x (slots * width)`.
    pub fn forward_all<T: Real>(&self, bind: &Binder<T>, plans: &[Option<JointPlan>]) -> Result<Var> {
        if plans.len() != self.slots.len() {
            return Err(Error::invalid(format!(
                "{} part plans for {} slots",
                plans.len(),
                self.slots.len()
            )));
        }
        let codes = plans
            .iter()
            .enumerate()
            .map(|(i, p)| self.forward(bind, i, p.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        bind.tape.concat(&codes, 1)
    }

    pub fn encode<T: Real>(
        &self,
        store: &ParamStore<T>,
        slot: usize,
        input: Option<(&[Vec3], &[Vec3])>,
    ) -> Result<PartCode> {
        let Some((cloud, near)) = input else {
            return Ok(PartCode::absent(self.width()));
        };
        let plan = self.plan(slot, cloud, near)?;
        let tape = Tape::new();
        let bind = Binder::new(&tape, store, Trainable::Nothing);
        let v = self.forward(&bind, slot, Some(&plan))?;
        Ok(PartCode {
            vector: tape.value(v).to_f64_vec(),
            present: true,
        })
    }
}
