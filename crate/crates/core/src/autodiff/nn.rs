//! Parameter storage and the dense layers built on the tape.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::Rng;

use crate::autodiff::tape::{Gradients, Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    lookup: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter name `{name}`")));
        }
        self.lookup.insert(name.clone(), self.tensors.len());
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(ParamId(self.tensors.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.lookup.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Ids whose name starts with `prefix`.
    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.names
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.starts_with(prefix))
            .map(|(i, _)| ParamId(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Overwrites values of matching names from `other`; shapes must agree.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<usize> {
        let mut n = 0;
        for (name, t) in other.iter() {
            if let Some(id) = self.id(name) {
                if self.tensors[id.0].shape() != t.shape() {
                    return Err(Error::Shape {
                        op: "load_from",
                        lhs: self.tensors[id.0].shape().to_vec(),
                        rhs: t.shape().to_vec(),
                    });
                }
                self.tensors[id.0] = t.clone();
                n += 1;
            }
        }
        Ok(n)
    }
}

/// Which parameters a forward pass should differentiate.
#[derive(Clone, Debug)]
pub enum Trainable {
    All,
    Nothing,
    Only(Vec<bool>),
}

impl Trainable {
    pub fn prefixes<T: Real>(store: &ParamStore<T>, prefixes: &[&str]) -> Self {
        let mask = store
            .names
            .iter()
            .map(|n| prefixes.iter().any(|p| n.starts_with(p)))
            .collect();
        Trainable::Only(mask)
    }

    fn contains(&self, id: ParamId) -> bool {
        match self {
            Trainable::All => true,
            Trainable::Nothing => false,
            Trainable::Only(mask) => mask.get(id.0).copied().unwrap_or(false),
        }
    }
}

/// Binds store parameters onto a tape lazily, once per parameter.
pub struct Binder<'a, T: Real> {
    pub tape: &'a Tape<T>,
    store: &'a ParamStore<T>,
    bound: RefCell<Vec<Option<Var>>>,
    trainable: Trainable,
}

impl<'a, T: Real> Binder<'a, T> {
    pub fn new(tape: &'a Tape<T>, store: &'a ParamStore<T>, trainable: Trainable) -> Self {
        Self {
            tape,
            store,
            bound: RefCell::new(vec![None; store.len()]),
            trainable,
        }
    }

    pub fn store(&self) -> &ParamStore<T> {
        self.store
    }

    pub fn param(&self, id: ParamId) -> Var {
        if let Some(v) = self.bound.borrow()[id.0] {
            return v;
        }
        let t = self.store.get(id).clone();
        let v = self.tape.leaf(t, self.trainable.contains(id));
        self.bound.borrow_mut()[id.0] = Some(v);
        v
    }

    /// Gradients of the bound trainable parameters, in id order.
    pub fn collect(&self, grads: &mut Gradients<T>) -> Vec<(ParamId, Tensor<T>)> {
        let bound = self.bound.borrow();
        let mut out = Vec::new();
        for (i, v) in bound.iter().enumerate() {
            let Some(v) = v else { continue };
            if !self.trainable.contains(ParamId(i)) {
                continue;
            }
            if let Some(g) = grads.take(*v) {
                out.push((ParamId(i), g));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Real>(self, tape: &Tape<T>, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu(s) => tape.leaky_relu(x, T::of(s)),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Weight initialisation for affine layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    XavierUniform,
    Zeros,
}

/// `x·W + b` with `W: [in, out]`, `b: [1, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<Self> {
        let w = match init {
            Init::XavierUniform => Tensor::xavier_uniform(fan_in, fan_out, rng),
            Init::Zeros => Tensor::zeros(&[fan_in, fan_out]),
        };
        let w = store.add(format!("{name}/w"), w)?;
        let b = store.add(format!("{name}/b"), Tensor::zeros(&[1, fan_out]))?;
        Ok(Self { w, b, fan_in, fan_out })
    }

    /// Re-attaches to parameters already present in `store`.
    pub fn attach<T: Real>(store: &ParamStore<T>, name: &str) -> Result<Self> {
        let lookup = |suffix: &str| {
            store
                .id(&format!("{name}/{suffix}"))
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}/{suffix}`")))
        };
        let (w, b) = (lookup("w")?, lookup("b")?);
        let shape = store.get(w).shape();
        if shape.len() != 2 {
            return Err(Error::Checkpoint(format!("`{name}/w` is not a matrix")));
        }
        Ok(Self {
            w,
            b,
            fan_in: shape[0],
            fan_out: shape[1],
        })
    }

    pub fn forward<T: Real>(&self, bind: &Binder<T>, x: Var) -> Result<Var> {
        let tape = bind.tape;
        let xs = tape.shape(x);
        if xs.len() != 2 || xs[1] != self.fan_in {
            return Err(Error::Shape {
                op: "linear",
                lhs: xs,
                rhs: vec![self.fan_in, self.fan_out],
            });
        }
        let y = tape.matmul(x, bind.param(self.w))?;
        tape.add(y, bind.param(self.b))
    }
}

/// Chain of affine layers, each followed by its activation.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activations: Vec<Activation>,
}

impl Mlp {
    /// `widths[0]` is the input width; one layer per following entry.
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        widths: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("mlp needs at least one layer"));
        }
        let n = widths.len() - 1;
        let mut layers = Vec::with_capacity(n);
        let mut activations = Vec::with_capacity(n);
        for i in 0..n {
            layers.push(Linear::new(
                store,
                &format!("{name}/l{i}"),
                widths[i],
                widths[i + 1],
                Init::XavierUniform,
                rng,
            )?);
            activations.push(if i + 1 == n { last } else { hidden });
        }
        Ok(Self { layers, activations })
    }

    pub fn attach<T: Real>(
        store: &ParamStore<T>,
        name: &str,
        depth: usize,
        hidden: Activation,
        last: Activation,
    ) -> Result<Self> {
        let layers = (0..depth)
            .map(|i| Linear::attach(store, &format!("{name}/l{i}")))
            .collect::<Result<Vec<_>>>()?;
        let activations = (0..depth).map(|i| if i + 1 == depth { last } else { hidden }).collect();
        Ok(Self { layers, activations })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers.first().map_or(0, |l| l.fan_in)];
        w.extend(self.layers.iter().map(|l| l.fan_out));
        w
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    pub fn forward<T: Real>(&self, bind: &Binder<T>, x: Var) -> Result<Var> {
        mlp_forward(bind, &self.layers, &self.activations, x)
    }
}

/// Affine + activation chain.
pub fn mlp_forward<T: Real>(
    bind: &Binder<T>,
    layers: &[Linear],
    activations: &[Activation],
    input: Var,
) -> Result<Var> {
    let mut h = input;
    for (layer, act) in layers.iter().zip(activations) {
        h = layer.forward(bind, h)?;
        h = act.apply(bind.tape, h);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lin = Linear::new(&mut store, "id", 3, 3, Init::Zeros, &mut rng).unwrap();
        let eye = Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        *store.get_mut(lin.w) = eye;
        let tape = Tape::new();
        let bind = Binder::new(&tape, &store, Trainable::Nothing);
        let x = tape.constant(Tensor::new(vec![2, 3], vec![1., -2., 3., 0.5, 0., 7.]).unwrap());
        let y = lin.forward(&bind, x).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());
    }

    #[test]
    fn zero_mlp_with_sigmoid_outputs_half() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::new(
            &mut store,
            "m",
            &[3, 4, 1],
            Activation::LeakyRelu(0.02),
            Activation::Sigmoid,
            &mut rng,
        )
        .unwrap();
        for l in &mlp.layers {
            store.get_mut(l.w).data_mut().fill(0.0);
        }
        let tape = Tape::new();
        let bind = Binder::new(&tape, &store, Trainable::All);
        let x = tape.constant(Tensor::from_f64(&[5, 3], &[0.3; 15]).unwrap());
        let y = mlp.forward(&bind, x).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new(
            &mut store,
            "m",
            &[3, 4],
            Activation::Relu,
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        let tape = Tape::new();
        let bind = Binder::new(&tape, &store, Trainable::All);
        let x = tape.constant(Tensor::zeros(&[2, 5]));
        assert!(matches!(mlp.forward(&bind, x), Err(Error::Shape { op: "linear", .. })));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::<f32>::new();
        store.add("a", Tensor::zeros(&[1])).unwrap();
        assert!(store.add("a", Tensor::zeros(&[1])).is_err());
    }
}
