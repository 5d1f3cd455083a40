//! Reverse-mode automatic differentiation over `f64` tensors.
//!
//! A [`Tape`] records a computation as it runs; [`Tape::backward`] replays it
//! in reverse, accumulating gradients for every recorded node. Values are
//! dynamic-dimensional `ndarray` arrays; scalars are zero-dimensional.
//!
//! The engine is single-threaded by design: the training controller owns one
//! tape per step. Everything is plain `f64` so that analytic gradients can be
//! validated against central finite differences at tight tolerances
//! (see [`gradcheck`]).

mod conv;
pub mod gradcheck;

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::{ArrayD, Axis, IxDyn, Slice};

pub use conv::{conv2d_shape, conv_transpose2d_shape};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

type BackFn = Box<dyn Fn(&ArrayD<f64>) -> Vec<(usize, ArrayD<f64>)>>;

struct Node {
    value: Rc<ArrayD<f64>>,
    parents: Vec<usize>,
    backward: Option<BackFn>,
}

/// A recorded computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<ArrayD<f64>>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; zeros if `v` did not
    /// influence the root.
    pub fn get(&self, v: Var, tape: &Tape) -> ArrayD<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => ArrayD::zeros(tape.value(v).shape()),
        }
    }

    pub fn get_opt(&self, v: Var) -> Option<&ArrayD<f64>> {
        self.grads[v.0].as_ref()
    }
}

pub fn scalar(v: f64) -> ArrayD<f64> {
    ArrayD::from_elem(IxDyn(&[]), v)
}

/// Sum `grad` down to `shape`, undoing an ndarray broadcast.
fn reduce_to_shape(grad: &ArrayD<f64>, shape: &[usize]) -> ArrayD<f64> {
    if grad.shape() == shape {
        return grad.clone();
    }
    let mut g = grad.clone();
    // Broadcasting aligns trailing axes; fold the extra leading axes first.
    while g.ndim() > shape.len() {
        g = g.sum_axis(Axis(0));
    }
    for ax in 0..shape.len() {
        if g.shape()[ax] != shape[ax] {
            debug_assert_eq!(shape[ax], 1, "invalid broadcast reduction");
            let summed = g.sum_axis(Axis(ax)).insert_axis(Axis(ax));
            g = summed;
        }
    }
    g
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: ArrayD<f64>, parents: Vec<usize>, backward: Option<BackFn>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            parents,
            backward,
        });
        Var(nodes.len() - 1)
    }

    /// Record an input. Leaves have no backward function; their gradients are
    /// read from [`Gradients`] after a backward pass.
    pub fn leaf(&self, value: ArrayD<f64>) -> Var {
        self.push(value, vec![], None)
    }

    pub fn leaf_scalar(&self, v: f64) -> Var {
        self.leaf(scalar(v))
    }

    pub fn value(&self, v: Var) -> Rc<ArrayD<f64>> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    /// Value of a zero-dimensional (scalar) node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.ndim(), 0, "scalar_value on non-scalar node");
        val[[]]
    }

    /// Cut the gradient flow: same value, new leaf.
    pub fn detach(&self, v: Var) -> Var {
        self.leaf(self.value(v).as_ref().clone())
    }

    /// Reverse pass from `root` (must be scalar-valued). Returns gradients
    /// for every node that influences it.
    pub fn backward(&self, root: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[root.0].value.ndim(),
            0,
            "backward root must be a scalar"
        );
        let n = nodes.len();
        let mut grads: Vec<Option<ArrayD<f64>>> = vec![None; n];

        // Mark the subgraph that feeds the root.
        let mut needed = vec![false; n];
        needed[root.0] = true;
        for i in (0..=root.0).rev() {
            if needed[i] {
                for &p in &nodes[i].parents {
                    needed[p] = true;
                }
            }
        }

        grads[root.0] = Some(scalar(1.0));
        for i in (0..=root.0).rev() {
            if !needed[i] {
                continue;
            }
            let Some(upstream) = grads[i].take() else {
                continue;
            };
            if let Some(back) = &nodes[i].backward {
                for (pidx, contrib) in back(&upstream) {
                    debug_assert_eq!(
                        contrib.shape(),
                        nodes[pidx].value.shape(),
                        "gradient shape mismatch"
                    );
                    match &mut grads[pidx] {
                        Some(acc) => *acc += &contrib,
                        slot => *slot = Some(contrib),
                    }
                }
            }
            grads[i] = Some(upstream);
        }
        Gradients { grads }
    }

    // ---- elementwise binary ops (rhs broadcastable onto lhs) ----

    pub fn add(&self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let out = &*va + &*vb;
        let (sa, sb) = (va.shape().to_vec(), vb.shape().to_vec());
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                vec![
                    (a.0, reduce_to_shape(g, &sa)),
                    (b.0, reduce_to_shape(g, &sb)),
                ]
            })),
        )
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let out = &*va - &*vb;
        let (sa, sb) = (va.shape().to_vec(), vb.shape().to_vec());
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                vec![
                    (a.0, reduce_to_shape(g, &sa)),
                    (b.0, reduce_to_shape(&(-g), &sb)),
                ]
            })),
        )
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let out = &*va * &*vb;
        let (sa, sb) = (va.shape().to_vec(), vb.shape().to_vec());
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                vec![
                    (a.0, reduce_to_shape(&(g * &*vb), &sa)),
                    (b.0, reduce_to_shape(&(g * &*va), &sb)),
                ]
            })),
        )
    }

    pub fn neg(&self, a: Var) -> Var {
        self.mul_scalar(a, -1.0)
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Var {
        let out = self.value(a).mapv(|v| v + c);
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g| vec![(a.0, g.clone())])),
        )
    }

    pub fn mul_scalar(&self, a: Var, c: f64) -> Var {
        let out = self.value(a).mapv(|v| v * c);
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g| vec![(a.0, g * c)])),
        )
    }

    // ---- elementwise unary ops ----

    fn unary(
        &self,
        a: Var,
        f: impl Fn(f64) -> f64,
        dfd: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var {
        let va = self.value(a);
        let out = va.mapv(&f);
        let out_rc = Rc::new(out);
        let out_for_back = Rc::clone(&out_rc);
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: out_rc,
            parents: vec![a.0],
            backward: Some(Box::new(move |g| {
                let mut contrib = g.clone();
                contrib
                    .iter_mut()
                    .zip(va.iter().zip(out_for_back.iter()))
                    .for_each(|(gi, (&x, &y))| *gi *= dfd(x, y));
                vec![(a.0, contrib)]
            })),
        });
        Var(nodes.len() - 1)
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(a, f64::exp, |_, y| y)
    }

    pub fn ln(&self, a: Var) -> Var {
        self.unary(a, f64::ln, |x, _| 1.0 / x)
    }

    pub fn sqrt(&self, a: Var) -> Var {
        self.unary(a, f64::sqrt, |_, y| 0.5 / y)
    }

    pub fn square(&self, a: Var) -> Var {
        self.unary(a, |x| x * x, |x, _| 2.0 * x)
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(a, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn abs(&self, a: Var) -> Var {
        self.unary(a, f64::abs, |x, _| x.signum())
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(a, stable_sigmoid, |_, y| y * (1.0 - y))
    }

    /// Numerically stable `ln(1 + e^x)`.
    pub fn softplus(&self, a: Var) -> Var {
        self.unary(a, stable_softplus, |x, _| stable_sigmoid(x))
    }

    // ---- reductions ----

    pub fn sum(&self, a: Var) -> Var {
        let va = self.value(a);
        let out = scalar(va.sum());
        let shape = va.shape().to_vec();
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g| {
                vec![(a.0, ArrayD::from_elem(IxDyn(&shape), g[[]]))]
            })),
        )
    }

    pub fn mean(&self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.mul_scalar(s, 1.0 / n)
    }

    /// Sum of squares, then scaled: `c * Σ x²`.
    pub fn sum_sq_scaled(&self, a: Var, c: f64) -> Var {
        let sq = self.square(a);
        let s = self.sum(sq);
        self.mul_scalar(s, c)
    }

    /// Euclidean norm as a scalar node.
    pub fn l2_norm(&self, a: Var) -> Var {
        let sq = self.square(a);
        let s = self.sum(sq);
        self.sqrt(s)
    }

    // ---- shape ops ----

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Var {
        let va = self.value(a);
        assert_eq!(
            va.len(),
            shape.iter().product::<usize>(),
            "reshape element count mismatch"
        );
        let old_shape = va.shape().to_vec();
        let out = va
            .as_ref()
            .clone()
            .into_shape(IxDyn(shape))
            .expect("contiguous reshape");
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g| {
                vec![(
                    a.0,
                    g.clone()
                        .into_shape(IxDyn(&old_shape))
                        .expect("contiguous reshape"),
                )]
            })),
        )
    }

    pub fn slice_axis(&self, a: Var, axis: usize, start: usize, len: usize) -> Var {
        let va = self.value(a);
        let out = va
            .slice_axis(Axis(axis), Slice::from(start..start + len))
            .to_owned();
        let full_shape = va.shape().to_vec();
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g| {
                let mut dz = ArrayD::zeros(IxDyn(&full_shape));
                dz.slice_axis_mut(Axis(axis), Slice::from(start..start + len))
                    .assign(g);
                vec![(a.0, dz)]
            })),
        )
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Var {
        assert!(!parts.is_empty());
        let values: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let views: Vec<_> = values.iter().map(|v| v.view()).collect();
        let out = ndarray::concatenate(Axis(axis), &views).expect("concat shapes");
        let lens: Vec<usize> = values.iter().map(|v| v.shape()[axis]).collect();
        let idxs: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push(
            out,
            idxs.clone(),
            Some(Box::new(move |g| {
                let mut offset = 0;
                idxs.iter()
                    .zip(lens.iter())
                    .map(|(&pi, &len)| {
                        let piece = g
                            .slice_axis(Axis(axis), Slice::from(offset..offset + len))
                            .to_owned();
                        offset += len;
                        (pi, piece)
                    })
                    .collect()
            })),
        )
    }

    // ---- linear algebra ----

    /// 2-D matrix product `[m,k]·[k,n] -> [m,n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let ma = to2(&va);
        let mb = to2(&vb);
        let out = ma.dot(&mb).into_dyn();
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                let gm = to2(g);
                let da = gm.dot(&to2(&vb).t()).into_dyn();
                let db = to2(&va).t().dot(&gm).into_dyn();
                vec![(a.0, da), (b.0, db)]
            })),
        )
    }

    /// `x·wᵀ + bias`: `x [n,f]`, `w [o,f]`, `bias [o]` -> `[n,o]`.
    pub fn linear(&self, x: Var, w: Var, bias: Var) -> Var {
        let vx = self.value(x);
        let vw = self.value(w);
        let vb = self.value(bias);
        let mut out = to2(&vx).dot(&to2(&vw).t());
        let b1 = vb
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .expect("bias must be 1-D");
        out += &b1;
        self.push(
            out.into_dyn(),
            vec![x.0, w.0, bias.0],
            Some(Box::new(move |g| {
                let gm = to2(g);
                let dx = gm.dot(&to2(&vw)).into_dyn();
                let dw = gm.t().dot(&to2(&vx)).into_dyn();
                let db = gm.sum_axis(ndarray::Axis(0)).into_dyn();
                vec![(x.0, dx), (w.0, dw), (bias.0, db)]
            })),
        )
    }

    /// Softmax over the last axis.
    pub fn softmax_lastaxis(&self, a: Var) -> Var {
        let va = self.value(a);
        let last = va.ndim() - 1;
        let mut out = va.as_ref().clone();
        for mut lane in out.lanes_mut(Axis(last)) {
            let m = lane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in lane.iter_mut() {
                *v = (*v - m).exp();
                z += *v;
            }
            for v in lane.iter_mut() {
                *v /= z;
            }
        }
        let out_rc = Rc::new(out);
        let y = Rc::clone(&out_rc);
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: out_rc,
            parents: vec![a.0],
            backward: Some(Box::new(move |g| {
                // dx = y ⊙ (g − Σ(g ⊙ y)) per lane
                let mut dx = g.clone();
                let last = y.ndim() - 1;
                for (mut dlane, ylane) in dx.lanes_mut(Axis(last)).into_iter().zip(y.lanes(Axis(last))) {
                    let dot: f64 = dlane.iter().zip(ylane.iter()).map(|(d, y)| d * y).sum();
                    for (d, &yv) in dlane.iter_mut().zip(ylane.iter()) {
                        *d = yv * (*d - dot);
                    }
                }
                vec![(a.0, dx)]
            })),
        });
        Var(nodes.len() - 1)
    }

    /// Z-score a 1-D vector: `(x − mean) / sqrt(var + eps)`.
    pub fn normalize_vec(&self, a: Var, eps: f64) -> Var {
        let va = self.value(a);
        let n = va.len() as f64;
        let mean = va.sum() / n;
        let var = va.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + eps).sqrt();
        let out = va.mapv(|v| (v - mean) * inv_std);
        let out_rc = Rc::new(out);
        let y = Rc::clone(&out_rc);
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: out_rc,
            parents: vec![a.0],
            backward: Some(Box::new(move |g| {
                // layer-norm backward: dx = inv_std*(g − mean(g) − y*mean(g⊙y))
                let gm = g.sum() / n;
                let gym = g.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
                let mut dx = g.clone();
                dx.iter_mut()
                    .zip(y.iter())
                    .for_each(|(d, &yv)| *d = inv_std * (*d - gm - yv * gym));
                vec![(a.0, dx)]
            })),
        });
        Var(nodes.len() - 1)
    }

    // ---- convolution ops (implementations in conv.rs) ----

    /// 2-D convolution, NCHW layout, zero padding.
    /// `x [n,ci,h,w]`, `w [co,ci,k,k]`, `bias [co]`.
    pub fn conv2d(&self, x: Var, w: Var, bias: Var, stride: usize, pad: usize) -> Var {
        conv::conv2d_op(self, x, w, bias, stride, pad)
    }

    /// Transposed 2-D convolution, NCHW layout.
    /// `x [n,ci,h,w]`, `w [ci,co,k,k]`, `bias [co]`.
    pub fn conv_transpose2d(&self, x: Var, w: Var, bias: Var, stride: usize, pad: usize) -> Var {
        conv::conv_transpose2d_op(self, x, w, bias, stride, pad)
    }

    /// Mean over spatial axes: `[n,c,h,w] -> [n,c]`.
    pub fn global_avg_pool(&self, x: Var) -> Var {
        conv::global_avg_pool_op(self, x)
    }

    pub(crate) fn push_raw(
        &self,
        value: ArrayD<f64>,
        parents: Vec<usize>,
        backward: Option<BackFn>,
    ) -> Var {
        self.push(value, parents, backward)
    }
}

pub(crate) fn to2(a: &ArrayD<f64>) -> ndarray::ArrayView2<'_, f64> {
    a.view()
        .into_dimensionality::<ndarray::Ix2>()
        .expect("expected 2-D array")
}

pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn stable_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Stable log-sum-exp of a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-mean-exp over `n` values on-tape: `ln(1/n Σ exp(xᵢ))` for a 1-D node.
impl Tape {
    pub fn log_mean_exp(&self, xs: Var) -> Var {
        let v = self.value(xs);
        let n = v.len() as f64;
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // ln(Σ exp(x−m)) + m − ln n, built from primitive ops so the
        // backward pass needs no special casing.
        let shifted = self.add_scalar(xs, -m);
        let e = self.exp(shifted);
        let s = self.sum(e);
        let l = self.ln(s);
        self.add_scalar(l, m - n.ln())
    }
}
