//! Reverse-mode tape over dense tensors.
//!
//! Every op evaluates eagerly and records how to route the incoming gradient
//! back to its operands. Gradients accumulate additively, so a value used
//! twice receives the sum of both contributions.

use std::cell::RefCell;
use std::rc::Rc;

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    MatMul(Var, Var),
    Concat { inputs: Vec<Var>, axis: usize },
    MaxAxis { input: Var, argmax: Vec<usize> },
    Relu(Var),
    LeakyRelu(Var, T),
    Sigmoid(Var),
    Exp(Var),
    Abs(Var),
    Sqrt(Var),
    Square(Var),
    Mean(Var),
    SumAxis { input: Var, axis: usize },
    GatherRows { input: Var, idx: Vec<usize> },
    Reshape(Var),
    Slice { input: Var, axis: usize, start: usize },
}

struct Node<T> {
    value: Rc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Single-threaded recording of a computation.
pub struct Tape<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one scalar with respect to every recorded value.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` viewed inside `out` (zero along broadcast axes).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + rank - shape.len();
        strides[oi] = if shape[i] == 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Calls `f(out_index, a_index, b_index)` for every output element.
fn broadcast_for_each(out: &[usize], a: &[usize], b: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let n: usize = out.iter().product();
    let na: usize = a.iter().product();
    let nb: usize = b.iter().product();
    if na == n && nb == n {
        (0..n).for_each(|i| f(i, i, i));
        return;
    }
    if na == n && nb == 1 {
        (0..n).for_each(|i| f(i, i, 0));
        return;
    }
    if na == 1 && nb == n {
        (0..n).for_each(|i| f(i, 0, i));
        return;
    }
    let last = *out.last().unwrap_or(&1);
    if na == n && nb == last && b.last() == Some(&last) {
        (0..n).for_each(|i| f(i, i, i % last));
        return;
    }
    let sa = broadcast_strides(a, out);
    let sb = broadcast_strides(b, out);
    let rank = out.len();
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    for i in 0..n {
        f(i, ia, ib);
        for d in (0..rank).rev() {
            idx[d] += 1;
            ia += sa[d];
            ib += sb[d];
            if idx[d] < out[d] {
                break;
            }
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

/// Splits `shape` around `axis` into (outer, len, inner).
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn add_into<T: Real>(slot: &mut Option<Tensor<T>>, shape: &[usize], f: impl FnOnce(&mut [T])) {
    let t = slot.get_or_insert_with(|| Tensor::zeros(shape));
    f(t.data_mut());
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// Trainable input.
    pub fn param(&self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn leaf(&self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.push(t, Op::Leaf, requires_grad)
    }

    fn binary(&self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let out_shape =
            broadcast_shape(va.shape(), vb.shape()).ok_or_else(|| shape_err(name, va.shape(), vb.shape()))?;
        let n = out_shape.iter().product();
        let mut out = vec![T::zero(); n];
        let (da, db) = (va.data(), vb.data());
        broadcast_for_each(&out_shape, va.shape(), vb.shape(), |i, ia, ib| {
            out[i] = f(da[ia], db[ib]);
        });
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(out_shape, out)?, op, rg))
    }

    /// Elementwise sum with broadcasting.
    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&self, a: Var, c: T) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c), self.rg(a))
    }

    pub fn add_scalar(&self, a: Var, c: T) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a), self.rg(a))
    }

    pub fn neg(&self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let out = va.matmul(&vb)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs.first().ok_or(Error::Empty("concat"))?;
        let base = self.shape(*first);
        if axis >= base.len() {
            return Err(shape_err("concat", &base, &[axis]));
        }
        let values: Vec<_> = inputs.iter().map(|&v| self.value(v)).collect();
        let mut total = 0;
        for v in &values {
            let s = v.shape();
            let same = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !same {
                return Err(shape_err("concat", &base, s));
            }
            total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = split_axis(&out_shape, axis);
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for v in &values {
                let len = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * len..(o + 1) * len]);
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Maximum over `axis` (the axis is removed). Ties resolve to the lowest
    /// index, and the backward pass routes gradient only to that element.
    pub fn max_over_axis(&self, a: Var, axis: usize) -> Result<Var> {
        let va = self.value(a);
        let shape = va.shape();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(shape_err("max_over_axis", shape, &[axis]));
        }
        let (outer, len, inner) = split_axis(shape, axis);
        let data = va.data();
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * len * inner;
            let mut best: Vec<T> = data[base..base + inner].to_vec();
            let mut arg: Vec<usize> = (0..inner).map(|j| base + j).collect();
            for l in 1..len {
                let row = base + l * inner;
                for j in 0..inner {
                    let x = data[row + j];
                    if x > best[j] {
                        best[j] = x;
                        arg[j] = row + j;
                    }
                }
            }
            out.extend(best);
            argmax.extend(arg);
        }
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::MaxAxis { input: a, argmax }, rg))
    }

    fn unary(&self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let v = self.value(a).map(f);
        self.push(v, op, self.rg(a))
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(a, |x| if x > T::zero() { x } else { T::zero() }, Op::Relu(a))
    }

    pub fn leaky_relu(&self, a: Var, slope: T) -> Var {
        self.unary(
            a,
            move |x| if x > T::zero() { x } else { x * slope },
            Op::LeakyRelu(a, slope),
        )
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(a, |x| x.exp(), Op::Exp(a))
    }

    pub fn abs(&self, a: Var) -> Var {
        self.unary(a, |x| x.abs(), Op::Abs(a))
    }

    pub fn sqrt(&self, a: Var) -> Var {
        self.unary(a, |x| x.sqrt(), Op::Sqrt(a))
    }

    pub fn square(&self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Mean of all elements, as a one-element tensor.
    pub fn reduce_mean(&self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.is_empty() {
            return Err(Error::Empty("reduce_mean"));
        }
        let n = T::of(va.len() as f64);
        let s: T = va.data().iter().copied().sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mean(a), self.rg(a)))
    }

    /// Sum over `axis` (the axis is removed).
    pub fn sum_axis(&self, a: Var, axis: usize) -> Result<Var> {
        let va = self.value(a);
        let shape = va.shape();
        if axis >= shape.len() {
            return Err(shape_err("sum_axis", shape, &[axis]));
        }
        let (outer, len, inner) = split_axis(shape, axis);
        let data = va.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let row = (o * len + l) * inner;
                for j in 0..inner {
                    out[o * inner + j] += data[row + j];
                }
            }
        }
        let mut out_shape = shape.to_vec();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        Ok(self.push(Tensor::new(out_shape, out)?, Op::SumAxis { input: a, axis }, self.rg(a)))
    }

    /// Selects rows (first axis) by index; repeated indices are allowed.
    pub fn gather_rows(&self, a: Var, idx: &[usize]) -> Result<Var> {
        let va = self.value(a);
        let rows = va.rows();
        let cols = va.cols();
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(shape_err("gather_rows", va.shape(), &[bad]));
        }
        let data = va.data();
        let mut out = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            out.extend_from_slice(&data[i * cols..(i + 1) * cols]);
        }
        let mut shape = va.shape().to_vec();
        if shape.is_empty() {
            shape.push(1);
        }
        shape[0] = idx.len();
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::GatherRows {
                input: a,
                idx: idx.to_vec(),
            },
            self.rg(a),
        ))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = (*self.value(a)).clone().reshape(shape)?;
        Ok(self.push(v, Op::Reshape(a), self.rg(a)))
    }

    /// `len` consecutive entries of `axis` starting at `start`.
    pub fn slice(&self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let va = self.value(a);
        let shape = va.shape();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(shape_err("slice", shape, &[axis, start, len]));
        }
        let (outer, full, inner) = split_axis(shape, axis);
        let data = va.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            out.extend_from_slice(&data[base..base + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Slice { input: a, axis, start },
            self.rg(a),
        ))
    }

    /// Back-propagates from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let lv = &nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(shape_err("backward", lv.shape(), &[1]));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.route(&nodes, node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn route(&self, nodes: &[Node<T>], node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        let needs = |v: Var| nodes[v.0].requires_grad;
        let val = |v: Var| &nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) {
                    -T::one()
                } else {
                    T::one()
                };
                let (sa, sb) = (val(*a).shape().to_vec(), val(*b).shape().to_vec());
                let out = node.value.shape();
                if needs(*a) {
                    add_into(&mut grads[a.0], &sa, |ga| {
                        broadcast_for_each(out, &sa, &sb, |i, ia, _| ga[ia] += gd[i]);
                    });
                }
                if needs(*b) {
                    add_into(&mut grads[b.0], &sb, |gb| {
                        broadcast_for_each(out, &sa, &sb, |i, _, ib| gb[ib] += sign * gd[i]);
                    });
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let (sa, sb) = (va.shape().to_vec(), vb.shape().to_vec());
                let out = node.value.shape();
                if needs(*a) {
                    let db = vb.data();
                    add_into(&mut grads[a.0], &sa, |ga| {
                        broadcast_for_each(out, &sa, &sb, |i, ia, ib| ga[ia] += gd[i] * db[ib]);
                    });
                }
                if needs(*b) {
                    let da = va.data();
                    add_into(&mut grads[b.0], &sb, |gb| {
                        broadcast_for_each(out, &sa, &sb, |i, ia, ib| gb[ib] += gd[i] * da[ia]);
                    });
                }
            }
            Op::Scale(a, c) => {
                let c = *c;
                add_into(&mut grads[a.0], node.value.shape(), |ga| {
                    ga.iter_mut().zip(gd).for_each(|(x, &g)| *x += g * c);
                });
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                let shape = val(*a).shape().to_vec();
                add_into(&mut grads[a.0], &shape, |ga| {
                    ga.iter_mut().zip(gd).for_each(|(x, &g)| *x += g);
                });
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                if needs(*a) {
                    // dA += G · Bᵀ
                    add_into(&mut grads[a.0], va.shape(), |ga| {
                        T::gemm(
                            m,
                            n,
                            k,
                            T::one(),
                            gd,
                            n as isize,
                            1,
                            vb.data(),
                            1,
                            n as isize,
                            T::one(),
                            ga,
                            k as isize,
                            1,
                        );
                    });
                }
                if needs(*b) {
                    // dB += Aᵀ · G
                    add_into(&mut grads[b.0], vb.shape(), |gb| {
                        T::gemm(
                            k,
                            m,
                            n,
                            T::one(),
                            va.data(),
                            1,
                            k as isize,
                            gd,
                            n as isize,
                            1,
                            T::one(),
                            gb,
                            n as isize,
                            1,
                        );
                    });
                }
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for v in inputs {
                    let shape = val(*v).shape().to_vec();
                    let len = shape[*axis];
                    if needs(*v) {
                        add_into(&mut grads[v.0], &shape, |gv| {
                            for o in 0..outer {
                                let src = (o * total + offset) * inner;
                                let dst = o * len * inner;
                                for j in 0..len * inner {
                                    gv[dst + j] += gd[src + j];
                                }
                            }
                        });
                    }
                    offset += len;
                }
            }
            Op::MaxAxis { input, argmax } => {
                let shape = val(*input).shape().to_vec();
                add_into(&mut grads[input.0], &shape, |gi| {
                    for (o, &src) in argmax.iter().enumerate() {
                        gi[src] += gd[o];
                    }
                });
            }
            Op::Relu(a) => {
                let x = val(*a).data();
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    for i in 0..ga.len() {
                        if x[i] > T::zero() {
                            ga[i] += gd[i];
                        }
                    }
                });
            }
            Op::LeakyRelu(a, slope) => {
                let x = val(*a).data();
                let slope = *slope;
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    for i in 0..ga.len() {
                        ga[i] += if x[i] > T::zero() { gd[i] } else { gd[i] * slope };
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * y[i] * (T::one() - y[i]);
                    }
                });
            }
            Op::Exp(a) => {
                let y = node.value.data();
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * y[i];
                    }
                });
            }
            Op::Abs(a) => {
                let x = val(*a).data();
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    for i in 0..ga.len() {
                        if x[i] > T::zero() {
                            ga[i] += gd[i];
                        } else if x[i] < T::zero() {
                            ga[i] -= gd[i];
                        }
                    }
                });
            }
            Op::Sqrt(a) => {
                let y = node.value.data();
                let two = T::of(2.0);
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    for i in 0..ga.len() {
                        if y[i] > T::zero() {
                            ga[i] += gd[i] / (two * y[i]);
                        }
                    }
                });
            }
            Op::Square(a) => {
                let x = val(*a).data();
                let two = T::of(2.0);
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    for i in 0..ga.len() {
                        ga[i] += two * x[i] * gd[i];
                    }
                });
            }
            Op::Mean(a) => {
                let n = T::of(val(*a).len() as f64);
                let g0 = gd[0] / n;
                add_into(&mut grads[a.0], val(*a).shape(), |ga| {
                    ga.iter_mut().for_each(|x| *x += g0);
                });
            }
            Op::SumAxis { input, axis } => {
                let shape = val(*input).shape().to_vec();
                let (outer, len, inner) = split_axis(&shape, *axis);
                add_into(&mut grads[input.0], &shape, |gi| {
                    for o in 0..outer {
                        for l in 0..len {
                            let row = (o * len + l) * inner;
                            for j in 0..inner {
                                gi[row + j] += gd[o * inner + j];
                            }
                        }
                    }
                });
            }
            Op::GatherRows { input, idx } => {
                let vi = val(*input);
                let cols = vi.cols();
                add_into(&mut grads[input.0], vi.shape(), |gi| {
                    for (r, &src) in idx.iter().enumerate() {
                        let (dst, from) = (src * cols, r * cols);
                        for j in 0..cols {
                            gi[dst + j] += gd[from + j];
                        }
                    }
                });
            }
            Op::Slice { input, axis, start } => {
                let shape = val(*input).shape().to_vec();
                let (outer, full, inner) = split_axis(&shape, *axis);
                let len = node.value.shape()[*axis];
                add_into(&mut grads[input.0], &shape, |gi| {
                    for o in 0..outer {
                        let dst = (o * full + start) * inner;
                        let src = o * len * inner;
                        for j in 0..len * inner {
                            gi[dst + j] += gd[src + j];
                        }
                    }
                });
            }
        }
    }
}

/// Overflow-safe logistic function.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
