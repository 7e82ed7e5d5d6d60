//! Mixed-radix indexing of the q^N configuration space.
//!
//! Basis states of an N-site q-level system are labeled by integers whose
//! base-q digits are the site exponents, site 0 being the least significant
//! digit.  Both the classical master equation and the exact density-matrix
//! evolution use this labeling.

use crate::error::{Error, Result};

/// Hard cap on the exact state-space dimension (classical master equation).
pub(crate) const MAX_MASTER_DIM: usize = 100_000;

/// Hard caps for density-matrix work: sites and dimension.
pub(crate) const MAX_QUANTUM_SITES: usize = 6;
pub(crate) const MAX_QUANTUM_DIM: usize = 729;

#[derive(Debug, Clone)]
pub(crate) struct Space {
    pub q: u8,
    pub n_sites: usize,
    pub dim: usize,
    /// stride[i] = q^i
    stride: Vec<usize>,
}

impl Space {
    pub fn new(q: u8, n_sites: usize, max_dim: usize) -> Result<Self> {
        let qf = q as usize;
        let mut dim = 1usize;
        let mut stride = Vec::with_capacity(n_sites);
        for _ in 0..n_sites {
            stride.push(dim);
            dim = dim.checked_mul(qf).ok_or_else(|| {
                Error::Capacity(format!("state space {q}^{n_sites} overflows usize"))
            })?;
            if dim > max_dim {
                return Err(Error::Capacity(format!(
                    "state space {q}^{n_sites} exceeds the cap of {max_dim} states"
                )));
            }
        }
        Ok(Self {
            q,
            n_sites,
            dim,
            stride,
        })
    }

    /// Site exponent `i` of basis state `idx`.
    #[inline]
    pub fn digit(&self, idx: usize, i: usize) -> u8 {
        ((idx / self.stride[i]) % self.q as usize) as u8
    }

    /// Basis state equal to `idx` with site `i` replaced by exponent `v`.
    #[inline]
    pub fn with_digit(&self, idx: usize, i: usize, v: u8) -> usize {
        let old = self.digit(idx, i) as usize;
        idx - old * self.stride[i] + (v as usize) * self.stride[i]
    }

    /// All site exponents of basis state `idx`.
    pub fn digits(&self, idx: usize) -> Vec<u8> {
        (0..self.n_sites).map(|i| self.digit(idx, i)).collect()
    }
}
