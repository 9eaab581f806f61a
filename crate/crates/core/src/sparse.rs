//! Sparse tensors on an index set `Omega`, and the `SPT1` file format.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Result, TtError};
use crate::tt::io::{eof, read_f64, read_magic, read_u32, read_u64};
use crate::tt::DenseTensor;

const MAGIC: &[u8; 4] = b"SPT1";

/// Values on a set of distinct multi-indices. The index set is shared
/// between tensors built with [`SparseTensor::with_values`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor {
    modes: Vec<usize>,
    // flat, `d` entries per observation
    indices: Arc<Vec<usize>>,
    values: Vec<f64>,
}

impl SparseTensor {
    /// Validated constructor: indices in bounds and pairwise distinct.
    pub fn new(modes: &[usize], indices: Vec<Vec<usize>>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(TtError::ShapeMismatch(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        let d = modes.len();
        let mut flat = Vec::with_capacity(d * indices.len());
        let mut seen = HashSet::with_capacity(indices.len());
        for idx in &indices {
            if idx.len() != d || idx.iter().zip(modes).any(|(&i, &n)| i >= n) {
                return Err(TtError::IndexOutOfBounds { index: idx.clone(), modes: modes.to_vec() });
            }
            if !seen.insert(idx.as_slice()) {
                return Err(TtError::Sampling(format!("duplicate index {idx:?}")));
            }
            flat.extend_from_slice(idx);
        }
        Ok(SparseTensor { modes: modes.to_vec(), indices: Arc::new(flat), values })
    }

    pub fn empty(modes: &[usize]) -> Self {
        SparseTensor { modes: modes.to_vec(), indices: Arc::new(Vec::new()), values: Vec::new() }
    }

    /// Same index set, new values.
    pub fn with_values(&self, values: Vec<f64>) -> SparseTensor {
        assert_eq!(values.len(), self.values.len(), "value count");
        SparseTensor { modes: self.modes.clone(), indices: Arc::clone(&self.indices), values }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }
    pub fn order(&self) -> usize {
        self.modes.len()
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn index(&self, t: usize) -> &[usize] {
        let d = self.modes.len();
        &self.indices[t * d..(t + 1) * d]
    }
    pub fn flat_indices(&self) -> &[usize] {
        &self.indices
    }
    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        let d = self.modes.len().max(1);
        self.indices.chunks(d).zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        let mut t = DenseTensor::zeros(&self.modes)?;
        for (idx, v) in self.iter() {
            t.set(idx, v);
        }
        Ok(t)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.order() as u32).to_le_bytes())?;
        for &n in &self.modes {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for (idx, v) in self.iter() {
            for &i in idx {
                w.write_all(&(i as u32).to_le_bytes())?;
            }
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<SparseTensor> {
        read_magic(r, MAGIC)?;
        let d = read_u32(r)? as usize;
        if !(1..=4096).contains(&d) {
            return Err(TtError::Format(format!("implausible order {d}")));
        }
        let modes = (0..d).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let nnz = read_u64(r)? as usize;
        let mut indices = Vec::with_capacity(nnz.min(1 << 24));
        let mut values = Vec::with_capacity(nnz.min(1 << 24));
        for _ in 0..nnz {
            let idx = (0..d).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
            indices.push(idx);
            values.push(read_f64(r)?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(eof)? != 0 {
            return Err(TtError::Format("trailing bytes after last record".into()));
        }
        SparseTensor::new(&modes, indices, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SparseTensor> {
        SparseTensor::read(&mut BufReader::new(File::open(path)?))
    }
}
