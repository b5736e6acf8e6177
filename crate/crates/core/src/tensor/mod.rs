//! Dense row-major tensors. Axis 0 is time whenever a time axis is present.

mod io;
mod ops;

pub use io::{read_tensor, write_tensor, AnyTensor};
pub use ops::{argtopk, channelwise_std, clamp, l0_norm, linf_distance, linf_project, sign, SIGMA_FLOOR};

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} holds {numel} elements but {} were given",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn full(shape: &[usize], value: S) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> S) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..numel).map(f).collect(),
        }
    }

    /// A rank-1 tensor over `values`.
    pub fn vector(values: Vec<S>) -> Self {
        Self {
            shape: vec![values.len()],
            data: values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// Number of elements in one step along axis 0.
    pub fn slice_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Copy of the sub-tensor at index `t` of axis 0.
    pub fn slice(&self, t: usize) -> Tensor<S> {
        let len = self.slice_len();
        Tensor {
            shape: self.shape[1..].to_vec(),
            data: self.data[t * len..(t + 1) * len].to_vec(),
        }
    }

    pub fn slice_data(&self, t: usize) -> &[S] {
        let len = self.slice_len();
        &self.data[t * len..(t + 1) * len]
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(parts: &[Tensor<S>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("cannot stack zero tensors"))?;
        let mut data = Vec::with_capacity(first.numel() * parts.len());
        for p in parts {
            first.check_same_shape(p)?;
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Self { shape, data })
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| cast(v)).collect(),
        }
    }

    /// Index of the largest element; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }
}

/// A tensor whose elements are restricted to {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryTensor {
    shape: Vec<usize>,
    data: Vec<u8>,
}

impl BinaryTensor {
    pub fn new(shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} holds {numel} elements but {} were given",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::invalid(format!("binary tensor element {i} is {}", data[i])));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0; shape.iter().product()],
        }
    }

    /// Accepts a float tensor whose every element is exactly 0 or 1.
    pub fn from_tensor<S: Scalar>(t: &Tensor<S>) -> Result<Self> {
        let mut data = Vec::with_capacity(t.numel());
        for (i, &v) in t.data().iter().enumerate() {
            if v == S::zero() {
                data.push(0);
            } else if v == S::one() {
                data.push(1);
            } else {
                return Err(Error::invalid(format!("element {i} = {v} is not binary")));
            }
        }
        Ok(Self {
            shape: t.shape().to_vec(),
            data,
        })
    }

    pub fn to_tensor<S: Scalar>(&self) -> Tensor<S> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&b| if b == 1 { S::one() } else { S::zero() })
                .collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, i: usize) -> u8 {
        self.data[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.data[i] = v as u8;
    }

    pub fn flip(&mut self, i: usize) {
        self.data[i] ^= 1;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b == 1).count()
    }

    pub fn xor(&self, other: &BinaryTensor) -> Result<BinaryTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(BinaryTensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a ^ b).collect(),
        })
    }

    /// Number of positions where the two tensors differ.
    pub fn hamming(&self, other: &BinaryTensor) -> usize {
        self.data.iter().zip(&other.data).filter(|(a, b)| a != b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_length() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(BinaryTensor::new(vec![2], vec![0, 2]).is_err());
    }

    #[test]
    fn slice_and_stack_round_trip() {
        let t = Tensor::<f64>::from_fn(&[3, 2, 2], |i| i as f64);
        let parts: Vec<_> = (0..3).map(|i| t.slice(i)).collect();
        assert_eq!(Tensor::stack(&parts).unwrap(), t);
        assert_eq!(t.slice_data(1), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        let t = Tensor::vector(vec![1.0f32, 3.0, 3.0]);
        assert_eq!(t.argmax(), 1);
    }

    #[test]
    fn binary_from_tensor_validates() {
        let ok = Tensor::vector(vec![0.0f32, 1.0, 1.0]);
        assert_eq!(BinaryTensor::from_tensor(&ok).unwrap().count_ones(), 2);
        let bad = Tensor::vector(vec![0.5f32]);
        assert!(BinaryTensor::from_tensor(&bad).is_err());
    }
}
