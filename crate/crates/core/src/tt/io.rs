//! `TTZ1` binary format: magic, `u32 d`, `u32 n[d]`, `u32 r[d+1]`, then the
//! cores as little-endian `f64` in core storage order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Core, Shape, TtTensor};
use crate::error::{Result, TtError};

const MAGIC: &[u8; 4] = b"TTZ1";

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn eof(e: std::io::Error) -> TtError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        TtError::Format("truncated file".into())
    } else {
        TtError::Io(e)
    }
}

pub(crate) fn read_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(eof)?;
    if &m != magic {
        return Err(TtError::Format(format!("bad magic {:?}", String::from_utf8_lossy(&m))));
    }
    Ok(())
}

/// Serializes cores (no orthogonality tag is stored).
pub fn write_cores(w: &mut impl Write, cores: &[Core]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(cores.len() as u32).to_le_bytes())?;
    for c in cores {
        w.write_all(&(c.mode() as u32).to_le_bytes())?;
    }
    w.write_all(&1u32.to_le_bytes())?;
    for c in cores {
        w.write_all(&(c.right() as u32).to_le_bytes())?;
    }
    for c in cores {
        for v in c.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads the raw cores. Only structural consistency is checked here; use
/// [`read_tt`] for a validated tensor.
pub fn read_cores(r: &mut impl Read) -> Result<(Shape, Vec<Core>)> {
    read_magic(r, MAGIC)?;
    let d = read_u32(r)? as usize;
    if !(2..=4096).contains(&d) {
        return Err(TtError::Format(format!("implausible order {d}")));
    }
    let modes = (0..d).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let ranks = (0..=d).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let shape = Shape { modes, ranks };
    shape.validate()?;
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let (l, n, rr) = (shape.ranks[k], shape.modes[k], shape.ranks[k + 1]);
        let len = l * n * rr;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(read_f64(r)?);
        }
        cores.push(Core::from_vec(l, n, rr, data));
    }
    Ok((shape, cores))
}

pub fn write_tt(path: &Path, x: &TtTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cores(&mut w, x.cores())?;
    w.flush()?;
    Ok(())
}

pub fn read_tt(path: &Path) -> Result<TtTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let (_, cores) = read_cores(&mut r)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(TtError::Format("trailing bytes after last core".into()));
    }
    TtTensor::from_cores(cores)
}
