//! Named parameter storage.
//!
//! Parameters live in a flat, insertion-ordered store. Each entry carries a
//! stable name and the optimizer block it belongs to, so the three-stage
//! training loop can update exactly one block at a time and tests can hash
//! the others to prove isolation.

use std::collections::BTreeMap;

use ndarray::{ArrayD, IxDyn};
use rand::Rng;

use crate::autodiff::{Tape, Var};

/// Which coordinate block of the training procedure owns a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Block {
    /// Variational encoder and structured-prior parameters.
    Encoder,
    /// Degradation decoder, restorer, and semantic-translation parameters.
    Decoder,
    /// Intervention and perturbation-strength networks.
    Intervention,
    /// Adversarial critic; updated only by the adversarial objective.
    Critic,
}

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub value: ArrayD<f64>,
    pub block: Block,
}

/// Ordered collection of named parameter arrays.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: ArrayD<f64>, block: Block) {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name}"
        );
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry { name, value, block });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> &ArrayD<f64> {
        let idx = self.index[name];
        &self.entries[idx].value
    }

    pub fn get_mut(&mut self, name: &str) -> &mut ArrayD<f64> {
        let idx = self.index[name];
        &mut self.entries[idx].value
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn block_of(&self, name: &str) -> Block {
        self.entries[self.index[name]].block
    }

    pub fn index_of(&self, name: &str) -> usize {
        self.index[name]
    }

    /// Total number of scalar parameters in a block (diagnostics).
    pub fn block_size(&self, block: Block) -> usize {
        self.entries
            .iter()
            .filter(|e| e.block == block)
            .map(|e| e.value.len())
            .sum()
    }

    /// FNV-1a over the exact parameter bytes of one block; used by the
    /// block-isolation assertions.
    pub fn block_hash(&self, block: Block) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for e in self.entries.iter().filter(|e| e.block == block) {
            for &b in e.name.as_bytes() {
                h = (h ^ u64::from(b)).wrapping_mul(0x1000_0000_01b3);
            }
            for v in e.value.iter() {
                for b in v.to_le_bytes() {
                    h = (h ^ u64::from(b)).wrapping_mul(0x1000_0000_01b3);
                }
            }
        }
        h
    }
}

/// Tape bindings for every parameter in a store, aligned by index.
pub struct VarMap {
    vars: Vec<Var>,
}

impl VarMap {
    /// Insert every parameter as a tape leaf.
    pub fn bind(tape: &Tape, store: &ParamStore) -> Self {
        let vars = store
            .entries
            .iter()
            .map(|e| tape.leaf(e.value.clone()))
            .collect();
        Self { vars }
    }

    pub fn var(&self, store: &ParamStore, name: &str) -> Var {
        self.vars[store.index_of(name)]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Gradient per parameter after a backward pass (zeros when untouched).
    pub fn gradients(
        &self,
        grads: &crate::autodiff::Gradients,
        store: &ParamStore,
    ) -> Vec<ArrayD<f64>> {
        self.vars
            .iter()
            .zip(store.entries.iter())
            .map(|(&v, e)| match grads.get_opt(v) {
                Some(g) => g.clone(),
                None => ArrayD::zeros(IxDyn(e.value.shape())),
            })
            .collect()
    }
}

/// Xavier/Glorot uniform initialization: `U(−a, a)`, `a = √(6/(fan_in+fan_out))`.
pub fn xavier_uniform(shape: &[usize], rng: &mut impl Rng) -> ArrayD<f64> {
    let (fan_in, fan_out) = fans(shape);
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    ArrayD::from_shape_fn(IxDyn(shape), |_| rng.gen_range(-a..a))
}

fn fans(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        0 => (1, 1),
        1 => (shape[0], shape[0]),
        2 => (shape[1], shape[0]),
        // conv weights [out, in, k, k] (or [in, out, k, k] for transposed;
        // the symmetric formula keeps the scale right either way)
        _ => {
            let rf: usize = shape[2..].iter().product();
            (shape[1] * rf, shape[0] * rf)
        }
    }
}

pub fn zeros(shape: &[usize]) -> ArrayD<f64> {
    ArrayD::zeros(IxDyn(shape))
}
