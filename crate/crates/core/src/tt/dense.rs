use nalgebra::DMatrix;

use crate::error::{Result, TtError};

/// Elements allowed in a dense materialization; `TT_DESK_CAP` overrides.
pub const DEFAULT_DESK_CAP: usize = 1 << 20;

pub fn desk_cap() -> usize {
    std::env::var("TT_DESK_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DESK_CAP)
}

pub fn check_desk_cap(modes: &[usize]) -> Result<usize> {
    let cap = desk_cap();
    let mut elements: usize = 1;
    for &n in modes {
        elements = match elements.checked_mul(n) {
            Some(v) if v <= cap => v,
            _ => return Err(TtError::DenseCapExceeded { elements: elements.saturating_mul(n), cap }),
        };
    }
    Ok(elements)
}

/// Full tensor stored in colexicographic order (first index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    modes: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(modes: &[usize]) -> Result<Self> {
        let len = check_desk_cap(modes)?;
        Ok(DenseTensor { modes: modes.to_vec(), data: vec![0.0; len] })
    }

    pub fn from_vec(modes: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = modes.iter().product();
        if len != data.len() {
            return Err(TtError::ShapeMismatch(format!(
                "{} values for modes {:?}",
                data.len(),
                modes
            )));
        }
        Ok(DenseTensor { modes: modes.to_vec(), data })
    }

    pub fn from_fn(modes: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(modes)?;
        let mut idx = vec![0usize; modes.len()];
        for lin in 0..t.data.len() {
            t.data[lin] = f(&idx);
            advance_colex(&mut idx, modes);
        }
        Ok(t)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }
    pub fn order(&self) -> usize {
        self.modes.len()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        colex_linear(idx, &self.modes)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let k = self.linear_index(idx);
        self.data[k] = v;
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &DenseTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sub(&self, other: &DenseTensor) -> DenseTensor {
        DenseTensor {
            modes: self.modes.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &DenseTensor) -> DenseTensor {
        DenseTensor {
            modes: self.modes.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> DenseTensor {
        DenseTensor { modes: self.modes.clone(), data: self.data.iter().map(|a| alpha * a).collect() }
    }

    /// The `mu`-th flattening `Z^{<mu>}`: rows index modes `1..=mu`, columns the rest.
    pub fn flatten(&self, mu: usize) -> Result<DMatrix<f64>> {
        let d = self.order();
        if !(1..d).contains(&mu) {
            return Err(TtError::ModeOutOfRange { mu, max: d.saturating_sub(1) });
        }
        let rows: usize = self.modes[..mu].iter().product();
        let cols: usize = self.modes[mu..].iter().product();
        Ok(DMatrix::from_column_slice(rows, cols, &self.data))
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(m: &DMatrix<f64>, modes: &[usize], mu: usize) -> Result<DenseTensor> {
        let rows: usize = modes[..mu].iter().product();
        let cols: usize = modes[mu..].iter().product();
        if m.shape() != (rows, cols) {
            return Err(TtError::ShapeMismatch(format!(
                "matrix {:?} does not match flattening {}x{}",
                m.shape(),
                rows,
                cols
            )));
        }
        DenseTensor::from_vec(modes, m.as_slice().to_vec())
    }
}

pub(crate) fn colex_linear(idx: &[usize], modes: &[usize]) -> usize {
    let mut lin = 0;
    let mut stride = 1;
    for (&i, &n) in idx.iter().zip(modes) {
        lin += i * stride;
        stride *= n;
    }
    lin
}

pub(crate) fn advance_colex(idx: &mut [usize], modes: &[usize]) {
    for (i, &n) in idx.iter_mut().zip(modes) {
        *i += 1;
        if *i < n {
            return;
        }
        *i = 0;
    }
}
