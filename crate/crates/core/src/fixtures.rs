//! The ℚ(ζ8)/ℚ(i) fixture used by tests, the self-test and the benches.

use crate::extension::{degree_one_primes_over, ExtField, LElem, LIdeal};
use crate::field::{QuadElem, QuadField};
use crate::numerics::BigComplex;

/// L = k(θ), θ² = 2, with integral basis w1 = 1, w2 = (1+i)θ/2 = ζ8.
pub fn zeta8() -> ExtField {
    let k = QuadField::new(-1).unwrap();
    let g = vec![k.elem(-2, 0), k.zero(), k.one()];
    let b = vec![vec![k.one(), k.zero()], vec![k.zero(), k.elem((1, 2), (1, 2))]];
    ExtField::new(k, g, b).unwrap()
}

/// 3 + 2√2, generating the relative-norm-one units ≡ 1 mod 2.
pub fn zeta8_unit(f: &ExtField) -> LElem {
    f.add(&f.from_k(&f.base.elem(3, 0)), &f.scale(&f.theta(), &f.base.elem(2, 0)))
}

pub fn zeta8_conductor(f: &ExtField) -> LIdeal {
    LIdeal::principal(f, &f.from_k(&f.base.elem(2, 0))).unwrap()
}

/// A degree-one prime above the given prime element of O.
pub fn prime_over(f: &ExtField, pi: &QuadElem, index: usize) -> LIdeal {
    let ell = pi.norm().numer().to_u64().unwrap();
    let ell = if ell.is_power_of_two() { 2 } else { smallest_factor(ell) };
    let q = f.base.primes_above(ell).unwrap().into_iter().find(|p| p.ideal.contains(pi)).unwrap();
    degree_one_primes_over(f, &q).unwrap().remove(index).ideal
}

fn smallest_factor(n: u64) -> u64 {
    (2..).find(|d| n % d == 0).unwrap()
}

/// ψ((a)) = ε(a)/a on ideals of ℤ[i] prime to 2, with ε(a) the unit
/// congruent to a modulo 2+2i.
pub fn gaussian_psi(a: &QuadElem, prec: u32) -> BigComplex {
    let k = a.field();
    let m = k.elem(2, 2);
    let units = [k.elem(1, 0), k.elem(0, 1), k.elem(-1, 0), k.elem(0, -1)];
    let u = units.iter().find(|u| (a - u).div(&m).unwrap().is_integral()).expect("argument must be prime to 2");
    &u.embed(prec) / &a.embed(prec)
}
