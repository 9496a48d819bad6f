//! Tiny binary tensor file format used for checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TNSR"
//! 4       1     format version, currently 1
//! 5       1     element type, 0 = f32
//! 6       1     number of dimensions
//! 7       1     reserved, 0
//! 8       4*n   dimensions as u32
//! 8+4*n   4*k   row-major f32 payload, k = product of dimensions
//! ```
//!
//! Values are stored as `f32` regardless of the in-memory scalar type, which
//! matches the training precision; an `f64` model round-trips through a
//! checkpoint at `f32` resolution.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;

pub fn write_tnsr<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    if t.ndim() > u8::MAX as usize {
        return Err(Error::invalid("tnsr", format!("{} dimensions do not fit the header", t.ndim())));
    }
    for &d in t.dims() {
        if d > u32::MAX as usize {
            return Err(Error::invalid("tnsr", format!("dimension {d} does not fit in u32")));
        }
    }
    let mut buf = Vec::with_capacity(8 + 4 * t.ndim() + 4 * t.len());
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(DTYPE_F32);
    buf.push(t.ndim() as u8);
    buf.push(0);
    for &d in t.dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        buf.extend_from_slice(&(v.to64() as f32).to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_tnsr(path: &Path) -> Result<Tensor<f32>> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |detail: String| Error::format(path, detail);
    if buf.len() < 8 {
        return Err(fail(format!("{} bytes is too short for a header", buf.len())));
    }
    if &buf[0..4] != MAGIC {
        return Err(fail("bad magic, not a tensor file".into()));
    }
    if buf[4] != VERSION {
        return Err(fail(format!("unsupported version {}", buf[4])));
    }
    if buf[5] != DTYPE_F32 {
        return Err(fail(format!("unsupported element type {}", buf[5])));
    }
    let ndim = buf[6] as usize;
    let body = 8 + 4 * ndim;
    if buf.len() < body {
        return Err(fail("truncated dimension list".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let at = 8 + 4 * i;
        dims.push(u32::from_le_bytes(buf[at..at + 4].try_into().unwrap()) as usize);
    }
    let count: usize = dims.iter().product();
    if buf.len() != body + 4 * count {
        return Err(fail(format!(
            "payload is {} bytes, dims {:?} need {}",
            buf.len() - body,
            dims,
            4 * count
        )));
    }
    let data = buf[body..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::from_vec(&dims, data)
}
