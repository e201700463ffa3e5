//! Shared inputs for the benchmarks.

use eisen_core::kronecker::{KEKey, Lattice1D};
use eisen_core::BigComplex;
use rug::Float;

pub fn gaussian_key(p: u32, q: u32, s: i32, prec: u32) -> KEKey {
    let lat = Lattice1D::new(BigComplex::one(prec), BigComplex::i(prec)).unwrap();
    let z = BigComplex::from_f64(0.3123, 0.2178, prec);
    KEKey { p, q, z, lat, s: Float::with_val(prec, s), prec }
}
