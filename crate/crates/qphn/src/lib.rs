//! Simulation library for classical and dissipative-quantum q-state
//! Potts-Hopfield networks at zero storage load.
//!
//! The crate provides four dynamical backends over one shared model core:
//!
//! * [`classical`] — heat-bath Monte Carlo and the exact classical master
//!   equation on small networks;
//! * [`meanfield`] — the closed collective equations of motion for the
//!   pattern overlaps and the drive-induced coherence variables, with
//!   fixed-point, Jacobian-eigenvalue, and limit-cycle tooling;
//! * [`lindblad`] — exact density-matrix evolution of the dissipative
//!   quantum model on small networks (thermal jump operators plus a
//!   transverse drive Hamiltonian);
//! * [`phase`] — phase classification, hysteresis, Hopf-bifurcation and
//!   limit-cycle scans over the temperature/drive plane.
//!
//! All stochastic components take explicit seeds and are reproducible
//! bit-for-bit across runs.

pub mod classical;
pub mod error;
pub mod lindblad;
pub mod meanfield;
pub mod model;
pub mod phase;
pub(crate) mod space;

pub use error::{Error, Result};

/// Derives an independent, reproducible RNG stream seed from a base seed and
/// up to two grid coordinates (splitmix64 finalizer over the mixed words).
pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
