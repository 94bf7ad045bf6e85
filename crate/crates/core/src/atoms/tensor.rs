use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"ATEN";

/// Dense row-major tensor of finite `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!(
                "dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {expected} entries but {} were given",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != m {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::matrix(n, m, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::matrix(n, n, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(rows, cols)` for a rank-2 tensor, or a shape error otherwise.
    pub fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [n, m] => Ok((n, m)),
            _ => Err(Error::Shape(format!(
                "expected a matrix, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape[1] + col]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn transpose(&self) -> Result<Self> {
        let (n, m) = self.matrix_dims()?;
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = self.data[i * m + j];
            }
        }
        Self::matrix(m, n, out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `‖self − other‖_F / ‖other‖_F`, or the absolute error when `other` is zero.
    pub fn relative_error(&self, other: &Tensor) -> f64 {
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = other.frobenius_norm();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    /// Serializes as `ATEN`, u8 rank, u64 dims, then little-endian f64 data.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let rank = u8::try_from(self.shape.len())
            .map_err(|_| Error::Shape(format!("rank {} exceeds 255", self.shape.len())))?;
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&[rank])?;
        for &d in &self.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(5 + 8 * (self.shape.len() + self.data.len()));
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |msg: String| Error::TensorFormat(msg);
        if bytes.len() < 5 {
            return Err(fail(format!("{} bytes is too short for a header", bytes.len())));
        }
        if &bytes[..4] != TENSOR_MAGIC {
            return Err(fail("bad magic".into()));
        }
        let rank = bytes[4] as usize;
        let header = 5 + 8 * rank;
        if bytes.len() < header {
            return Err(fail(format!(
                "truncated header: expected {header} bytes, found {}",
                bytes.len()
            )));
        }
        let shape: Vec<usize> = bytes[5..header]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| fail(format!("shape {shape:?} overflows")))?;
        let expected = count
            .checked_mul(8)
            .and_then(|b| b.checked_add(header))
            .ok_or_else(|| fail(format!("shape {shape:?} overflows")))?;
        if bytes.len() != expected {
            return Err(fail(format!(
                "expected {expected} bytes for shape {shape:?}, found {}",
                bytes.len()
            )));
        }
        let data = bytes[header..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(shape, data)
    }
}
