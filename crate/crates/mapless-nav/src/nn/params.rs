//! Named parameter storage for one network: values, gradients, and Adam
//! moment buffers live in one flat arena so the optimizer, soft updates, and
//! checkpointing are single linear passes. Layers hold index ranges into the
//! arena instead of owning their tensors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone)]
pub struct ParamArena {
    value: Vec<f64>,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    entries: Vec<ParamEntry>,
    step: u64,
}

impl Default for ParamArena {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamArena {
    pub fn new() -> Self {
        ParamArena {
            value: Vec::new(),
            grad: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            entries: Vec::new(),
            step: 0,
        }
    }

    /// Append a named tensor initialized with `init`; returns its offset.
    /// Entry order is insertion order and is part of the checkpoint format.
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, init: Vec<f64>) -> usize {
        let len: usize = shape.iter().product();
        assert_eq!(len, init.len(), "param init length mismatch");
        let offset = self.value.len();
        self.entries.push(ParamEntry {
            name: name.into(),
            offset,
            shape,
        });
        self.value.extend_from_slice(&init);
        self.grad.resize(self.value.len(), 0.0);
        self.m.resize(self.value.len(), 0.0);
        self.v.resize(self.value.len(), 0.0);
        offset
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut [f64] {
        &mut self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// Split borrow used by backward passes: read weights, accumulate grads.
    pub fn value_and_grad_mut(&mut self) -> (&[f64], &mut [f64]) {
        (&self.value, &mut self.grad)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Raw optimizer state access, used only by checkpointing.
    pub fn adam_state(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn restore_adam_state(&mut self, m: Vec<f64>, v: Vec<f64>, step: u64) -> Result<()> {
        if m.len() != self.value.len() || v.len() != self.value.len() {
            return Err(Error::config("optimizer state length mismatch on restore"));
        }
        self.m = m;
        self.v = v;
        self.step = step;
        Ok(())
    }

    fn entry_containing(&self, offset: usize) -> &str {
        self.entries
            .iter()
            .rev()
            .find(|e| e.offset <= offset)
            .map(|e| e.name.as_str())
            .unwrap_or("<none>")
    }

    /// One Adam update with bias correction over every entry, then zero the
    /// gradients and bump the step counter. A non-finite gradient is a hard
    /// error naming the offending parameter.
    pub fn adam_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<()> {
        for (i, g) in self.grad.iter().enumerate() {
            if !g.is_finite() {
                let name = self.entry_containing(i).to_string();
                return Err(Error::numeric(format!(
                    "non-finite gradient in parameter '{name}'"
                )));
            }
        }
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..self.value.len() {
            let g = self.grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            self.value[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        self.grad.fill(0.0);
        Ok(())
    }
}

/// target ← τ·source + (1−τ)·target, elementwise over identically named and
/// shaped entries.
pub fn soft_update(target: &mut ParamArena, source: &ParamArena, tau: f64) -> Result<()> {
    if target.entries != source.entries {
        return Err(Error::config(
            "soft_update: target and source parameter sets differ in names or shapes",
        ));
    }
    if tau == 1.0 {
        // Exact copy; the incremental form below would round (t + (s-t) != s).
        target.value.copy_from_slice(&source.value);
        return Ok(());
    }
    for (t, s) in target.value.iter_mut().zip(&source.value) {
        *t += tau * (*s - *t);
    }
    Ok(())
}
