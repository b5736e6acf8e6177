//! `SNNT` tensor files: magic, u8 dtype code, u8 rank, rank × u32 dims,
//! then raw little-endian elements.

use std::path::Path;

use super::{BinaryTensor, Tensor};
use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};

const MAGIC: &[u8; 4] = b"SNNT";

#[derive(Debug, Clone, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
    Binary(BinaryTensor),
}

impl AnyTensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
            AnyTensor::Binary(t) => t.shape(),
        }
    }

    /// Converts to a float tensor of the requested precision.
    pub fn into_float<S: Scalar>(self) -> Tensor<S> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
            AnyTensor::Binary(t) => t.to_tensor(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let (dtype, shape) = match self {
            AnyTensor::F32(t) => (DType::F32, t.shape()),
            AnyTensor::F64(t) => (DType::F64, t.shape()),
            AnyTensor::Binary(t) => (DType::Binary, t.shape()),
        };
        if shape.len() > u8::MAX as usize {
            return Err(Error::invalid("tensor rank exceeds 255"));
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(dtype.code());
        out.push(shape.len() as u8);
        for &d in shape {
            let d = u32::try_from(d).map_err(|_| Error::invalid("dimension exceeds u32"))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        match self {
            AnyTensor::F32(t) => t.data().iter().for_each(|v| v.write_le(&mut out)),
            AnyTensor::F64(t) => t.data().iter().for_each(|v| v.write_le(&mut out)),
            AnyTensor::Binary(t) => out.extend_from_slice(t.data()),
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(MAGIC)?;
        let code_at = r.offset();
        let code = r.u8()?;
        let dtype =
            DType::from_code(code).ok_or_else(|| Error::parse(code_at, format!("unknown dtype code {code}")))?;
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::parse(r.offset(), "element count overflows"))?;
        let tensor = match dtype {
            DType::F32 => AnyTensor::F32(Tensor::new(shape, read_values(&mut r, numel)?)?),
            DType::F64 => AnyTensor::F64(Tensor::new(shape, read_values(&mut r, numel)?)?),
            DType::Binary => {
                let at = r.offset();
                let raw = r.take(numel)?.to_vec();
                if let Some(i) = raw.iter().position(|&b| b > 1) {
                    return Err(Error::parse(at + i, format!("binary element is {}", raw[i])));
                }
                AnyTensor::Binary(BinaryTensor::new(shape, raw)?)
            }
        };
        r.expect_end()?;
        Ok(tensor)
    }
}

fn read_values<S: Scalar>(r: &mut Reader<'_>, numel: usize) -> Result<Vec<S>> {
    let len = numel
        .checked_mul(S::BYTES)
        .ok_or_else(|| Error::parse(r.offset(), "payload size overflows"))?;
    let raw = r.take(len)?;
    Ok(raw.chunks_exact(S::BYTES).map(S::read_le).collect())
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &AnyTensor) -> Result<()> {
    std::fs::write(path, tensor.encode()?)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<AnyTensor> {
    AnyTensor::decode(&std::fs::read(path)?)
}
