//! Network building blocks over the tape: convolution / dense layers with
//! named parameters, and feature-wise affine modulation for injecting latent
//! vectors into convolutional stacks.

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::params::{xavier_uniform, zeros, Block, ParamStore, VarMap};

/// 3x3 (or kxk) convolution layer descriptor; parameters live in the store.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn register(&self, store: &mut ParamStore, block: Block, rng: &mut impl Rng) {
        store.insert(
            format!("{}.w", self.name),
            xavier_uniform(&[self.cout, self.cin, self.kernel, self.kernel], rng),
            block,
        );
        store.insert(format!("{}.b", self.name), zeros(&[self.cout]), block);
    }

    /// Register with zero weights (identity-at-init output heads).
    pub fn register_zeroed(&self, store: &mut ParamStore, block: Block) {
        store.insert(
            format!("{}.w", self.name),
            zeros(&[self.cout, self.cin, self.kernel, self.kernel]),
            block,
        );
        store.insert(format!("{}.b", self.name), zeros(&[self.cout]), block);
    }

    pub fn forward(&self, tape: &Tape, vm: &VarMap, store: &ParamStore, x: Var) -> Var {
        let w = vm.var(store, &format!("{}.w", self.name));
        let b = vm.var(store, &format!("{}.b", self.name));
        tape.conv2d(x, w, b, self.stride, self.pad)
    }
}

/// Transposed convolution (upsampling) layer descriptor.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose2d {
    pub fn register(&self, store: &mut ParamStore, block: Block, rng: &mut impl Rng) {
        store.insert(
            format!("{}.w", self.name),
            xavier_uniform(&[self.cin, self.cout, self.kernel, self.kernel], rng),
            block,
        );
        store.insert(format!("{}.b", self.name), zeros(&[self.cout]), block);
    }

    pub fn forward(&self, tape: &Tape, vm: &VarMap, store: &ParamStore, x: Var) -> Var {
        let w = vm.var(store, &format!("{}.w", self.name));
        let b = vm.var(store, &format!("{}.b", self.name));
        tape.conv_transpose2d(x, w, b, self.stride, self.pad)
    }
}

/// Fully-connected layer descriptor.
#[derive(Debug, Clone)]
pub struct Dense {
    pub name: String,
    pub fin: usize,
    pub fout: usize,
}

impl Dense {
    pub fn new(name: impl Into<String>, fin: usize, fout: usize) -> Self {
        Self {
            name: name.into(),
            fin,
            fout,
        }
    }

    pub fn register(&self, store: &mut ParamStore, block: Block, rng: &mut impl Rng) {
        store.insert(
            format!("{}.w", self.name),
            xavier_uniform(&[self.fout, self.fin], rng),
            block,
        );
        store.insert(format!("{}.b", self.name), zeros(&[self.fout]), block);
    }

    pub fn register_zeroed(&self, store: &mut ParamStore, block: Block) {
        store.insert(format!("{}.w", self.name), zeros(&[self.fout, self.fin]), block);
        store.insert(format!("{}.b", self.name), zeros(&[self.fout]), block);
    }

    pub fn forward(&self, tape: &Tape, vm: &VarMap, store: &ParamStore, x: Var) -> Var {
        let w = vm.var(store, &format!("{}.w", self.name));
        let b = vm.var(store, &format!("{}.b", self.name));
        tape.linear(x, w, b)
    }
}

/// Feature-wise affine modulation: a dense head maps a conditioning vector to
/// per-channel `(scale, shift)`, applied as `x ⊙ (1 + scale) + shift`.
#[derive(Debug, Clone)]
pub struct FilmHead {
    pub head: Dense,
    pub channels: usize,
}

impl FilmHead {
    pub fn new(name: impl Into<String>, cond_dim: usize, channels: usize) -> Self {
        Self {
            head: Dense::new(name, cond_dim, 2 * channels),
            channels,
        }
    }

    /// Zero-initialized: modulation starts as the identity.
    pub fn register(&self, store: &mut ParamStore, block: Block) {
        self.head.register_zeroed(store, block);
    }

    /// `x [n,c,h,w]`, `cond [n,cond_dim]`.
    pub fn modulate(&self, tape: &Tape, vm: &VarMap, store: &ParamStore, x: Var, cond: Var) -> Var {
        let n = tape.value(x).shape()[0];
        let params = self.head.forward(tape, vm, store, cond); // [n, 2c]
        let scale = tape.slice_axis(params, 1, 0, self.channels);
        let shift = tape.slice_axis(params, 1, self.channels, self.channels);
        let scale = tape.reshape(scale, &[n, self.channels, 1, 1]);
        let shift = tape.reshape(shift, &[n, self.channels, 1, 1]);
        let gain = tape.add_scalar(scale, 1.0);
        let scaled = tape.mul(x, gain);
        tape.add(scaled, shift)
    }
}

/// Two dense layers with a tanh between; the workhorse for small heads.
#[derive(Debug, Clone)]
pub struct Mlp2 {
    pub l1: Dense,
    pub l2: Dense,
}

impl Mlp2 {
    pub fn new(name: &str, fin: usize, hidden: usize, fout: usize) -> Self {
        Self {
            l1: Dense::new(format!("{name}.l1"), fin, hidden),
            l2: Dense::new(format!("{name}.l2"), hidden, fout),
        }
    }

    pub fn register(&self, store: &mut ParamStore, block: Block, rng: &mut impl Rng) {
        self.l1.register(store, block, rng);
        self.l2.register(store, block, rng);
    }

    pub fn register_zero_output(&self, store: &mut ParamStore, block: Block, rng: &mut impl Rng) {
        self.l1.register(store, block, rng);
        self.l2.register_zeroed(store, block);
    }

    pub fn forward(&self, tape: &Tape, vm: &VarMap, store: &ParamStore, x: Var) -> Var {
        let h = self.l1.forward(tape, vm, store, x);
        let h = tape.tanh(h);
        self.l2.forward(tape, vm, store, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn film_identity_at_zero_init() {
        let mut store = ParamStore::new();
        let film = FilmHead::new("film", 4, 3);
        film.register(&mut store, Block::Decoder);
        let tape = Tape::new();
        let vm = VarMap::bind(&tape, &store);
        let x = tape.leaf(ndarray::ArrayD::from_shape_fn(
            IxDyn(&[2, 3, 4, 4]),
            |ix| (ix[0] + ix[1] + ix[2] + ix[3]) as f64 * 0.1,
        ));
        let cond = tape.leaf(ndarray::ArrayD::from_elem(IxDyn(&[2, 4]), 0.7));
        let y = film.modulate(&tape, &vm, &store, x, cond);
        assert_eq!(*tape.value(y), *tape.value(x));
    }

    #[test]
    fn dense_zero_init_outputs_bias() {
        let mut store = ParamStore::new();
        let d = Dense::new("head", 3, 2);
        d.register_zeroed(&mut store, Block::Encoder);
        store.get_mut("head.b").as_slice_mut().unwrap()[1] = 5.0;
        let tape = Tape::new();
        let vm = VarMap::bind(&tape, &store);
        let x = tape.leaf(ndarray::ArrayD::from_elem(IxDyn(&[1, 3]), 9.0));
        let y = d.forward(&tape, &vm, &store, x);
        assert_eq!(tape.value(y)[[0, 0]], 0.0);
        assert_eq!(tape.value(y)[[0, 1]], 5.0);
    }
}
