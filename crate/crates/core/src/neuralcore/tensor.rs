use std::collections::HashMap;

use rand::Rng;

use super::NnError;

/// Dense row-major tensor. Values are held as `f64`; `dtype` records the
/// precision used when the tensor is written to a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub dtype: DType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DType {
    F32,
    #[default]
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::F32),
            2 => Some(DType::F64),
            _ => None,
        }
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnError::ShapeMismatch {
                what: "tensor data",
                expected: n,
                got: data.len(),
            });
        }
        Ok(Self {
            shape,
            data,
            dtype: DType::F64,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            dtype: DType::F64,
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
            dtype: DType::F64,
        }
    }

    /// Glorot-style uniform init for rank 2 (and rank 1 treated as `[n, 1]`).
    pub fn glorot<R: Rng>(shape: &[usize], rng: &mut R) -> Self {
        let (fan_out, fan_in) = match shape {
            [r, c] => (*r, *c),
            [n] => (*n, 1),
            _ => (shape.iter().product(), 1),
        };
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        Self {
            shape: shape.to_vec(),
            data,
            dtype: DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameters with one gradient slot each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    names: Vec<String>,
    index: HashMap<String, ParamId>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    has_grads: bool,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId, NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParameter(name.to_string()));
        }
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.grads.push(Tensor::zeros(&value.shape));
        self.values.push(value);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn num_elements(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn has_grads(&self) -> bool {
        self.has_grads
    }

    /// Add `grads` into the gradient slots.
    pub fn accumulate(&mut self, grads: &super::Gradients) {
        for (slot, g) in self.grads.iter_mut().zip(grads.iter()) {
            if let Some(g) = g {
                for (a, b) in slot.data.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
        self.has_grads = true;
    }

    pub fn scale_grads(&mut self, c: f64) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x = 0.0);
        }
        self.has_grads = false;
    }

    /// Copy values from `other` by name; shapes must agree.
    pub fn load_values(&mut self, other: &ParameterStore) -> Result<(), NnError> {
        for (name, id) in &self.index {
            let src = other
                .id(name)
                .ok_or_else(|| NnError::UnknownParameter(name.clone()))?;
            let src = other.get(src);
            let dst = &mut self.values[id.0];
            if src.shape != dst.shape {
                return Err(NnError::ShapeMismatch {
                    what: "loaded parameter",
                    expected: dst.len(),
                    got: src.len(),
                });
            }
            dst.data.clone_from(&src.data);
        }
        if other.len() != self.len() {
            let extra = other
                .names
                .iter()
                .find(|n| !self.index.contains_key(*n))
                .cloned()
                .unwrap_or_default();
            return Err(NnError::UnknownParameter(extra));
        }
        Ok(())
    }
}
