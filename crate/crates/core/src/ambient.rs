use crate::error::{Result, TtError};
use crate::sparse::SparseTensor;
use crate::tt::{DenseTensor, TtTensor};

/// An element of the ambient space `R^{n_1 x ... x n_d}` in one of the
/// supported storage forms.
#[derive(Clone, Debug)]
pub enum AmbientVector {
    Dense(DenseTensor),
    Sparse(SparseTensor),
    Tt(TtTensor),
}

impl AmbientVector {
    pub fn modes(&self) -> &[usize] {
        match self {
            AmbientVector::Dense(t) => t.modes(),
            AmbientVector::Sparse(t) => t.modes(),
            AmbientVector::Tt(t) => t.modes(),
        }
    }

    pub fn check_modes(&self, modes: &[usize]) -> Result<()> {
        if self.modes() != modes {
            return Err(TtError::ShapeMismatch(format!("ambient modes {:?} vs {:?}", self.modes(), modes)));
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        match self {
            AmbientVector::Dense(t) => Ok(t.clone()),
            AmbientVector::Sparse(t) => t.to_dense(),
            AmbientVector::Tt(t) => t.to_dense(),
        }
    }
}

impl From<DenseTensor> for AmbientVector {
    fn from(t: DenseTensor) -> Self {
        AmbientVector::Dense(t)
    }
}

impl From<SparseTensor> for AmbientVector {
    fn from(t: SparseTensor) -> Self {
        AmbientVector::Sparse(t)
    }
}

impl From<TtTensor> for AmbientVector {
    fn from(t: TtTensor) -> Self {
        AmbientVector::Tt(t)
    }
}
