//! Named parameter sets, Adam, and the flat-text checkpoint format.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use super::tensor::{Tensor, TensorError};

/// One learnable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.rows(), value.cols());
        Param { value, grad }
    }
}

/// Ordered, named collection of parameters. Registration order is stable
/// and defines the checkpoint layout.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter and returns its slot index.
    pub fn register(&mut self, name: &str, value: Tensor) -> usize {
        debug_assert!(!self.names.iter().any(|n| n == name), "duplicate parameter name");
        self.names.push(name.to_string());
        self.params.push(Param::new(value));
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn name(&self, slot: usize) -> &str {
        &self.names[slot]
    }

    pub fn value(&self, slot: usize) -> &Tensor {
        &self.params[slot].value
    }

    pub fn value_mut(&mut self, slot: usize) -> &mut Tensor {
        &mut self.params[slot].value
    }

    pub fn grad(&self, slot: usize) -> &Tensor {
        &self.params[slot].grad
    }

    pub fn accumulate_grad(&mut self, slot: usize, g: &Tensor) -> Result<(), TensorError> {
        self.params[slot].grad.add_assign(g)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.names.iter().map(|n| n.as_str()).zip(self.params.iter())
    }

    /// Glorot-uniform initialization: U(-a, a) with a = sqrt(6/(fan_in+fan_out)).
    pub fn register_glorot<R: Rng>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> usize {
        let a = libm::sqrt(6.0 / (rows + cols) as f64);
        let mut t = Tensor::zeros(rows, cols);
        for e in t.data_mut() {
            *e = rng.random_range(-a..a);
        }
        self.register(name, t)
    }

    pub fn register_zeros(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.register(name, Tensor::zeros(rows, cols))
    }

    pub fn register_filled(&mut self, name: &str, rows: usize, cols: usize, v: f64) -> usize {
        let mut t = Tensor::zeros(rows, cols);
        t.fill(v);
        self.register(name, t)
    }
}

/// Adam optimizer over a fixed subset of slots. β₁=0.9, β₂=0.999, ε=1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    slots: Vec<usize>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    pub fn new(params: &ParamSet, slots: Vec<usize>) -> Self {
        let m = slots
            .iter()
            .map(|&s| Tensor::zeros(params.value(s).rows(), params.value(s).cols()))
            .collect();
        let v = slots
            .iter()
            .map(|&s| Tensor::zeros(params.value(s).rows(), params.value(s).cols()))
            .collect();
        Adam { slots, m, v, t: 0 }
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    /// One Adam step over the tracked slots; gradients are zeroed after
    /// the update. Errors out without touching anything on a non-finite
    /// gradient.
    pub fn step(&mut self, params: &mut ParamSet, lr: f64) -> Result<(), TensorError> {
        for &slot in &self.slots {
            if !params.grad(slot).is_finite() {
                return Err(TensorError::NonFinite {
                    op: "adam_step",
                    name: params.name(slot).to_string(),
                });
            }
        }
        self.t += 1;
        let bc1 = 1.0 - libm::pow(BETA1, self.t as f64);
        let bc2 = 1.0 - libm::pow(BETA2, self.t as f64);
        for (i, &slot) in self.slots.iter().enumerate() {
            let n = params.value(slot).data().len();
            for k in 0..n {
                let g = params.grad(slot).data()[k];
                let m = &mut self.m[i].data_mut()[k];
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                let mk = *m;
                let v = &mut self.v[i].data_mut()[k];
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let vk = *v;
                let mhat = mk / bc1;
                let vhat = vk / bc2;
                params.value_mut(slot).data_mut()[k] -= lr * mhat / (libm::sqrt(vhat) + ADAM_EPS);
            }
            params.params[slot].grad.fill(0.0);
        }
        Ok(())
    }
}

/// Errors loading a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("missing or invalid header, expected 'cutter-ckpt v1'")]
    BadHeader,
    #[error("line {line}: malformed parameter record")]
    BadRecord { line: usize },
    #[error("line {line}: invalid number '{token}'")]
    BadNumber { line: usize, token: String },
    #[error("checkpoint parameter '{name}' not present in the model")]
    UnknownParam { name: String },
    #[error("model parameter '{name}' missing from the checkpoint")]
    MissingParam { name: String },
    #[error("parameter '{name}': checkpoint shape {found:?} does not match model shape {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("parameter '{name}' contains a non-finite value")]
    NonFinite { name: String },
}

pub const CHECKPOINT_HEADER: &str = "cutter-ckpt v1";

/// Serializes a parameter set to the versioned flat-text format:
/// a header line, then one `name rows cols v…` line per parameter in
/// registration order. Values use shortest round-trip formatting, so a
/// save/load cycle is bit-exact.
pub fn checkpoint_to_text(params: &ParamSet) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    for (name, p) in params.iter() {
        out.push_str(&format!("{} {} {}", name, p.value.rows(), p.value.cols()));
        for v in p.value.data() {
            out.push_str(&format!(" {}", v));
        }
        out.push('\n');
    }
    out
}

/// Parses checkpoint text into `(name, tensor)` records.
pub fn checkpoint_from_text(text: &str) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CHECKPOINT_HEADER => {}
        _ => return Err(CheckpointError::BadHeader),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let name = tokens
            .next()
            .ok_or(CheckpointError::BadRecord { line: line_no })?;
        let rows: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(CheckpointError::BadRecord { line: line_no })?;
        let cols: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(CheckpointError::BadRecord { line: line_no })?;
        let mut data = Vec::with_capacity(rows * cols);
        for t in tokens {
            let v: f64 = t.parse().map_err(|_| CheckpointError::BadNumber {
                line: line_no,
                token: t.to_string(),
            })?;
            if !v.is_finite() {
                return Err(CheckpointError::NonFinite {
                    name: name.to_string(),
                });
            }
            data.push(v);
        }
        if data.len() != rows * cols {
            return Err(CheckpointError::BadRecord { line: line_no });
        }
        let tensor =
            Tensor::from_vec(rows, cols, data).map_err(|_| CheckpointError::BadRecord { line: line_no })?;
        records.push((name.to_string(), tensor));
    }
    Ok(records)
}

impl ParamSet {
    /// Replaces parameter values from parsed checkpoint records. Every
    /// model parameter must be present with a matching shape, and the
    /// checkpoint may not contain unknown parameters.
    pub fn load_records(&mut self, records: Vec<(String, Tensor)>) -> Result<(), CheckpointError> {
        let mut seen = alloc::vec![false; self.params.len()];
        for (name, tensor) in records {
            let slot = self
                .names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| CheckpointError::UnknownParam { name: name.clone() })?;
            let expected = self.params[slot].value.shape();
            if tensor.shape() != expected {
                return Err(CheckpointError::ShapeMismatch {
                    name,
                    expected,
                    found: tensor.shape(),
                });
            }
            self.params[slot].value = tensor;
            seen[slot] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CheckpointError::MissingParam {
                name: self.names[missing].clone(),
            });
        }
        Ok(())
    }
}
