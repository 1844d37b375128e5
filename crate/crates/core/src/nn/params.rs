use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// Handle to a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a parameter is filled by [`ParamStore::initialize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    Zeros,
    GlorotUniform { fan_in: usize, fan_out: usize },
    Uniform { limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// RMSprop running mean of squared gradients.
    pub accum: Tensor,
    pub init: Init,
}

/// Named trainable tensors with optimizer state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> ParamId {
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.into(),
            value: Tensor::zeros(shape),
            accum: Tensor::zeros(shape),
            init,
        });
        id
    }

    /// Fills every parameter in insertion order from `rng`.
    pub fn initialize<R: Rng>(&mut self, rng: &mut R) {
        for p in &mut self.params {
            match p.init {
                Init::Zeros => p.value.data_mut().fill(0.0),
                Init::GlorotUniform { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
                    for v in p.value.data_mut() {
                        *v = rng.gen_range(-limit..limit);
                    }
                }
                Init::Uniform { limit } => {
                    for v in p.value.data_mut() {
                        *v = rng.gen_range(-limit..limit);
                    }
                }
            }
            p.accum.data_mut().fill(0.0);
        }
        self.step = 0;
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    /// Number of tensors.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Restores values and optimizer state; shapes must match the existing layout.
    pub fn restore(&mut self, name: &str, value: Tensor, accum: Tensor) -> Result<(), NnError> {
        let id = self
            .find(name)
            .ok_or(NnError::UnknownParameter(name.to_owned()))?;
        let slot = &mut self.params[id.0];
        if slot.value.shape() != value.shape() || slot.accum.shape() != accum.shape() {
            return Err(NnError::ShapeMismatch {
                context: "restored parameter",
                expected: slot.value.len(),
                got: value.len(),
            });
        }
        slot.value = value;
        slot.accum = accum;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }
}

/// Gradient buffers mirroring a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store
                .params
                .iter()
                .map(|p| vec![0.0; p.value.len()])
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.grads.iter()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// Index of the first parameter with a NaN or infinite gradient.
    pub fn first_non_finite(&self) -> Option<ParamId> {
        self.grads
            .iter()
            .position(|g| g.iter().any(|v| !v.is_finite()))
            .map(ParamId)
    }
}
