//! Self-describing binary container for model checkpoints.
//!
//! Layout (all integers little-endian):
//!   magic `ATCK` | u32 version | u32 entry count | entries...
//! Each entry: u32 name length | UTF-8 name | u32 rank | u64 dims... |
//! f64 data (raw IEEE-754 bits, so reloading is bit-identical).

use crate::nn::{ParamSet, Tensor};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"ATCK";
const VERSION: u32 = 1;

#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    Format(String),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "checkpoint io error: {e}"),
            CheckpointError::Format(m) => write!(f, "checkpoint format error: {m}"),
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<std::io::Error> for CheckpointError {
    fn from(e: std::io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

/// Serializes a parameter set into the container format.
pub fn write_params<W: Write>(params: &ParamSet, mut w: W) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, tensor) in params.entries() {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a parameter set back from the container format.
pub fn read_params<R: Read>(mut r: R) -> Result<ParamSet, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Format("non-UTF8 parameter name".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(f64::from_bits(read_u64(&mut r)?));
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| CheckpointError::Format(e.to_string()))?;
        params.add(&name, tensor);
    }
    Ok(params)
}

pub fn save_params(params: &ParamSet, path: &Path) -> Result<(), CheckpointError> {
    let file = std::fs::File::create(path)?;
    write_params(params, std::io::BufWriter::new(file))
}

pub fn load_params(path: &Path) -> Result<ParamSet, CheckpointError> {
    let file = std::fs::File::open(path)?;
    read_params(std::io::BufReader::new(file))
}

/// Flattens named parameter sets into one set with `name/param` entries.
pub fn merge_named(sets: &[(String, ParamSet)]) -> ParamSet {
    let mut merged = ParamSet::new();
    for (prefix, set) in sets {
        for (name, tensor) in set.entries() {
            merged.add(&format!("{prefix}/{name}"), tensor.clone());
        }
    }
    merged
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let mut params = ParamSet::new();
        params.add("enc.w", Tensor::from_rows(&[vec![0.1, -2.5e-300], vec![f64::MIN_POSITIVE, 3.0]]).unwrap());
        params.add("dec.b", Tensor::scalar(-0.0));
        let mut buf = Vec::new();
        write_params(&params, &mut buf).unwrap();
        let loaded = read_params(buf.as_slice()).unwrap();
        assert_eq!(params.len(), loaded.len());
        for ((n1, t1), (n2, t2)) in params.entries().zip(loaded.entries()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00".to_vec();
        assert!(matches!(
            read_params(buf.as_slice()),
            Err(CheckpointError::Format(_))
        ));
    }
}
