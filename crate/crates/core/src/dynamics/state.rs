// SPDX-License-Identifier: Apache-2.0

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `cols` state vectors of dimension `dim`, stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBatch {
    dim: usize,
    cols: usize,
    data: Vec<Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl StateBatch {
    pub fn from_data(dim: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || cols == 0 {
            return Err(Error::invalid("state", "needs at least one amplitude and one column"));
        }
        if data.len() != dim * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {dim}×{cols}",
                data.len()
            )));
        }
        Ok(Self { dim, cols, data })
    }

    pub fn from_vector(psi: Vec<Complex64>) -> Result<Self> {
        let dim = psi.len();
        Self::from_data(dim, 1, psi)
    }

    pub fn from_matrix(m: &Array2<Complex64>) -> Result<Self> {
        let (dim, cols) = m.dim();
        let data = m.t().iter().copied().collect();
        Self::from_data(dim, cols, data)
    }

    /// Single basis state `|index⟩` of an `n`-qubit register.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        let mut data = vec![ZERO; dim];
        data[index] = ONE;
        Self::from_data(dim, 1, data)
    }

    /// Basis state from a bit string such as `"0110"` (atom 0 first).
    pub fn from_bitstring(bits: &str) -> Result<Self> {
        let index = parse_bitstring(bits)?;
        Self::basis(bits.len(), index)
    }

    /// Every computational basis state as a column.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut data = vec![ZERO; dim * dim];
        for k in 0..dim {
            data[k * dim + k] = ONE;
        }
        Self::from_data(dim, dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn column(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Columns as the columns of a `dim × cols` matrix.
    pub fn to_matrix(&self) -> Array2<Complex64> {
        Array2::from_shape_fn((self.dim, self.cols), |(r, c)| self.data[c * self.dim + r])
    }

    pub fn norms(&self) -> Vec<f64> {
        self.columns()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }

    /// Errors if any column's norm differs from 1 by more than `tol`.
    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        for (column, norm) in self.norms().into_iter().enumerate() {
            if !((norm - 1.0).abs() <= tol) {
                return Err(Error::NotNormalized { column, norm });
            }
        }
        Ok(())
    }

    /// Probabilities `|ψ_b|²` of one column.
    pub fn probabilities(&self, c: usize) -> Vec<f64> {
        self.column(c).iter().map(|z| z.norm_sqr()).collect()
    }
}

pub fn parse_bitstring(bits: &str) -> Result<usize> {
    if bits.is_empty() || bits.len() > usize::BITS as usize - 1 {
        return Err(Error::invalid("basis state", format!("`{bits}` has an unusable length")));
    }
    bits.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::invalid("basis state", format!("`{bits}` must contain only 0 and 1"))),
    })
}
