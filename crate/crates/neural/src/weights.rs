//! PBWT weight files: `"PBWT"`, tensor count (u32), then per tensor
//! `name_len: u16, name, rank: u8, dims: u32 x rank, f32 data`. All integers
//! and floats little-endian.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use pulsebench_core::numerics::Tensor;

use crate::error::{Error, Result};
use crate::graph::ModelGraph;
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"PBWT";

pub type NamedTensors = Vec<(String, Tensor<f32>)>;

pub fn write_weights<W: Write>(mut w: W, tensors: &[(String, Tensor<f32>)]) -> Result<()> {
    w.write_all(MAGIC)?;
    let count =
        u32::try_from(tensors.len()).map_err(|_| Error::Format("too many tensors".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for (name, t) in tensors {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        let rank = u8::try_from(t.rank())
            .map_err(|_| Error::Format(format!("rank of {name} exceeds 255")))?;
        w.write_all(&[rank])?;
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| Error::Format(format!("dimension of {name} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// Tensors in file order. Truncation surfaces as an IO error.
pub fn read_weights<R: Read>(mut r: R) -> Result<NamedTensors> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic, expected PBWT".into()));
    }
    let count = u32::from_le_bytes(read_array(&mut r)?);
    let mut out: NamedTensors = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = read_array::<1, _>(&mut r)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(read_array(&mut r)?) as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if out.iter().any(|(n, _)| *n == name) {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
        out.push((name, Tensor::new(shape, data)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last tensor".into()));
    }
    Ok(out)
}

pub fn save_weights<T: Real>(model: &ModelGraph<T>, path: &Path) -> Result<()> {
    let tensors: NamedTensors = model
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.map(|v| v.as_f64() as f32)))
        .collect();
    write_weights(BufWriter::new(File::create(path)?), &tensors)
}

pub fn load_weights(path: &Path) -> Result<NamedTensors> {
    read_weights(BufReader::new(File::open(path)?))
}

/// Loads a weight file into `model`, checking every name and shape first.
pub fn load_into<T: Real>(model: &mut ModelGraph<T>, path: &Path) -> Result<()> {
    let map: BTreeMap<String, Tensor<T>> = load_weights(path)?
        .into_iter()
        .map(|(n, t)| (n, t.map(|v| T::real(v as f64))))
        .collect();
    model.load_named(&map)
}
