//! Dense real tensors stored in a single flat buffer.
//!
//! Every linearization in this crate is first-index-fastest (column-major):
//! the entry at multi-index `(i_1, .., i_N)` lives at
//! `i_1 + I_1 * (i_2 + I_2 * (i_3 + ..))`. `vec`, `ten`, slice
//! vectorization and the on-disk formats all share this order.

use std::fmt;

use crate::error::{Error, Result};

/// Extents `I_1..I_N` of an order-`N` tensor, `N >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidShape(format!(
                "order must be at least 2, got {}",
                dims.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("extent {pos} is zero")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape("element count overflows".into()))?;
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Strides of the first-index-fastest layout.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = Vec::with_capacity(self.0.len());
        let mut acc = 1;
        for &d in &self.0 {
            strides.push(acc);
            acc *= d;
        }
        strides
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.0.len());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &d) in index.iter().zip(&self.0) {
            debug_assert!(i < d);
            lin += i * stride;
            stride *= d;
        }
        lin
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        self.0
            .iter()
            .map(|&d| {
                let i = lin % d;
                lin /= d;
                i
            })
            .collect()
    }

    /// Advances `index` to the next multi-index in linear order; returns
    /// `false` after wrapping past the last element.
    pub fn increment(&self, index: &mut [usize]) -> bool {
        for (i, &d) in index.iter_mut().zip(&self.0) {
            *i += 1;
            if *i < d {
                return true;
            }
            *i = 0;
        }
        false
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: Shape) -> Self {
        let n = shape.numel();
        DenseTensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        let n = shape.numel();
        DenseTensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape} needs {} entries, got {}",
                shape.numel(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("entry {pos} is {}", data[pos])));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.numel());
        let mut idx = vec![0; shape.order()];
        loop {
            data.push(f(&idx));
            if !shape.increment(&mut idx) {
                break;
            }
        }
        DenseTensor { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.linear_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let lin = self.shape.linear_index(index);
        self.data[lin] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        check_same_shape(self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: Shape) -> Result<DenseTensor> {
        if shape.numel() != self.numel() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        Ok(DenseTensor {
            shape,
            data: self.data.clone(),
        })
    }
}

fn check_same_shape(x: &DenseTensor, y: &DenseTensor) -> Result<()> {
    if x.shape != y.shape {
        return Err(Error::ShapeMismatch(format!("{} vs {}", x.shape, y.shape)));
    }
    Ok(())
}

/// Column-major vectorization.
pub fn vec(x: &DenseTensor) -> Vec<f64> {
    x.data.clone()
}

/// Inverse of [`vec`].
pub fn ten(v: &[f64], shape: &Shape) -> Result<DenseTensor> {
    DenseTensor::from_vec(shape.clone(), v.to_vec())
}

pub fn hadamard(x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    check_same_shape(x, y)?;
    Ok(DenseTensor {
        shape: x.shape.clone(),
        data: x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect(),
    })
}

/// Cyclic mode shift: output has shape `(I_n, .., I_N, I_1, .., I_{n-1})` and
/// `out(i_n, .., i_N, i_1, .., i_{n-1}) = x(i_1, .., i_N)`.
///
/// `mode` is zero-based, so `mode == 0` is the identity.
pub fn tensor_permute(x: &DenseTensor, mode: usize) -> Result<DenseTensor> {
    let order = x.order();
    if mode >= order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    if mode == 0 {
        return Ok(x.clone());
    }
    let dims = x.dims();
    let new_dims: Vec<usize> = (0..order).map(|k| dims[(mode + k) % order]).collect();
    let new_shape = Shape::new(new_dims)?;
    let new_strides = new_shape.strides();
    let mut out = vec![0.0; x.numel()];
    let mut idx = vec![0; order];
    for &v in &x.data {
        let mut lin = 0;
        for (k, &s) in new_strides.iter().enumerate() {
            lin += idx[(mode + k) % order] * s;
        }
        out[lin] = v;
        x.shape.increment(&mut idx);
    }
    Ok(DenseTensor {
        shape: new_shape,
        data: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn shape_rejects_bad_extents() {
        assert!(Shape::new(vec![3]).is_err());
        assert!(Shape::new(vec![3, 0, 2]).is_err());
        assert!(Shape::new(vec![usize::MAX, 3]).is_err());
    }

    #[test]
    fn linear_index_is_first_fastest() {
        let s = shape(&[2, 3, 4]);
        assert_eq!(s.linear_index(&[1, 0, 0]), 1);
        assert_eq!(s.linear_index(&[0, 1, 0]), 2);
        assert_eq!(s.linear_index(&[0, 0, 1]), 6);
        for lin in 0..s.numel() {
            assert_eq!(s.linear_index(&s.multi_index(lin)), lin);
        }
    }

    #[test]
    fn from_vec_rejects_nan_and_length() {
        assert!(DenseTensor::from_vec(shape(&[2, 2]), vec![0.0; 3]).is_err());
        assert!(DenseTensor::from_vec(shape(&[2, 2]), vec![0.0, 1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn permute_identity_and_transpose() {
        let x = DenseTensor::from_fn(shape(&[2, 3]), |i| (i[0] * 10 + i[1]) as f64);
        assert_eq!(tensor_permute(&x, 0).unwrap(), x);
        let t = tensor_permute(&x, 1).unwrap();
        assert_eq!(t.dims(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(t.get(&[j, i]), x.get(&[i, j]));
            }
        }
        assert!(tensor_permute(&x, 2).is_err());
    }

    #[test]
    fn hadamard_with_ones() {
        let x = DenseTensor::from_fn(shape(&[3, 2, 2]), |i| (i[0] + 2 * i[1]) as f64 - 1.5 * i[2] as f64);
        let ones = DenseTensor::filled(shape(&[3, 2, 2]), 1.0);
        assert_eq!(hadamard(&x, &ones).unwrap(), x);
        assert!(hadamard(&x, &DenseTensor::zeros(shape(&[2, 3, 2]))).is_err());
    }
}
