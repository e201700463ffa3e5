//! The imaginary quadratic field k = Q(√d), its ring of integers O = Z[ω]
//! and (principal) fractional ideals. Only the five norm-Euclidean fields.

use crate::error::{invalid, Error, Result};
use crate::numerics::{unit_round, BigComplex};
use rug::{Float, Integer, Rational};
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};

pub const SUPPORTED_D: [i64; 5] = [-1, -2, -3, -7, -11];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuadField {
    pub d: i64,
}

impl QuadField {
    pub fn new(d: i64) -> Result<Self> {
        if !SUPPORTED_D.contains(&d) {
            return Err(Error::UnsupportedField(d));
        }
        Ok(QuadField { d })
    }

    pub fn disc(&self) -> i64 {
        if self.d.rem_euclid(4) == 1 {
            self.d
        } else {
            4 * self.d
        }
    }

    /// ω² = tω − n
    pub fn omega_trace(&self) -> i64 {
        omega_tn(self.d).0
    }

    pub fn omega_norm(&self) -> i64 {
        omega_tn(self.d).1
    }

    pub fn elem(&self, a: impl Into<Rational>, b: impl Into<Rational>) -> QuadElem {
        QuadElem { d: self.d, a: a.into(), b: b.into() }
    }

    pub fn zero(&self) -> QuadElem {
        self.elem(0, 0)
    }

    pub fn one(&self) -> QuadElem {
        self.elem(1, 0)
    }

    pub fn omega(&self) -> QuadElem {
        self.elem(0, 1)
    }

    /// The unit group of O.
    pub fn units(&self) -> Vec<QuadElem> {
        match self.d {
            -1 => vec![self.elem(1, 0), self.elem(0, 1), self.elem(-1, 0), self.elem(0, -1)],
            // ω = (1+√−3)/2 is a primitive sixth root of unity
            -3 => {
                let w = self.omega();
                let mut out = vec![self.one()];
                for _ in 0..5 {
                    let next = out.last().unwrap() * &w;
                    out.push(next);
                }
                out
            }
            _ => vec![self.elem(1, 0), self.elem(-1, 0)],
        }
    }

    pub fn parse_elem(&self, s: &str) -> Result<QuadElem> {
        parse_quad(self.d, s)
    }

    pub fn omega_embed(&self, prec: u32) -> BigComplex {
        self.omega().embed(prec)
    }

    /// Prime ideals above the rational prime `ell`.
    pub fn primes_above(&self, ell: u64) -> Result<Vec<PrimeIdeal>> {
        if ell < 2 || Integer::from(ell).is_probably_prime(30) == rug::integer::IsPrime::No {
            return invalid(format!("{ell} is not prime"));
        }
        let (t, n) = omega_tn(self.d);
        let roots = roots_mod(t, n, ell);
        let l = self.elem(ell, 0);
        Ok(match roots.len() {
            0 => vec![PrimeIdeal { ideal: QuadIdeal::new(l)?, ell, residue_degree: 2, ram_index: 1 }],
            1 => {
                let g = gcd(&l, &(self.omega() - self.elem(roots[0], 0)));
                vec![PrimeIdeal { ideal: QuadIdeal::new(g)?, ell, residue_degree: 1, ram_index: 2 }]
            }
            _ => roots
                .iter()
                .map(|&r| {
                    let g = gcd(&l, &(self.omega() - self.elem(r, 0)));
                    Ok(PrimeIdeal { ideal: QuadIdeal::new(g)?, ell, residue_degree: 1, ram_index: 1 })
                })
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

fn omega_tn(d: i64) -> (i64, i64) {
    if d.rem_euclid(4) == 1 {
        (1, (1 - d) / 4)
    } else {
        (0, -d)
    }
}

fn roots_mod(t: i64, n: i64, ell: u64) -> Vec<u64> {
    let l = ell as i128;
    let f = |x: i128| (x * x - t as i128 * x + n as i128).rem_euclid(l);
    if ell < 50_000 {
        return (0..ell).filter(|&x| f(x as i128) == 0).collect();
    }
    // odd ell: x = (t ± √(t² − 4n)) / 2
    let disc = ((t * t - 4 * n) as i128).rem_euclid(l) as u64;
    let Some(s) = sqrt_mod(disc, ell) else { return vec![] };
    let inv2 = (ell + 1) / 2;
    let mut r: Vec<u64> = [s, (ell - s) % ell]
        .iter()
        .map(|&v| ((t as i128).rem_euclid(l) as u128 + v as u128) as u64 % ell)
        .map(|v| (v as u128 * inv2 as u128 % ell as u128) as u64)
        .collect();
    r.sort();
    r.dedup();
    r
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u128;
    let mut bb = b as u128 % m as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * bb % m as u128;
        }
        bb = bb * bb % m as u128;
        e >>= 1;
    }
    b = r as u64;
    b
}

/// Tonelli–Shanks.
fn sqrt_mod(a: u64, p: u64) -> Option<u64> {
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    let mut q = p - 1;
    let mut s = 0;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = (tt as u128 * tt as u128 % p as u128) as u64;
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = (b as u128 * b as u128 % p as u128) as u64;
        t = (t as u128 * c as u128 % p as u128) as u64;
        r = (r as u128 * b as u128 % p as u128) as u64;
    }
    Some(r)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeIdeal {
    pub ideal: QuadIdeal,
    pub ell: u64,
    pub residue_degree: u32,
    pub ram_index: u32,
}

/// a + b·ω in the field with discriminant parameter d.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadElem {
    pub d: i64,
    pub a: Rational,
    pub b: Rational,
}

impl QuadElem {
    pub fn field(&self) -> QuadField {
        QuadField { d: self.d }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn is_one(&self) -> bool {
        self.a == 1 && self.b == 0
    }

    pub fn is_rational(&self) -> bool {
        self.b == 0
    }

    pub fn is_integral(&self) -> bool {
        *self.a.denom() == 1 && *self.b.denom() == 1
    }

    pub fn norm(&self) -> Rational {
        let (t, n) = omega_tn(self.d);
        let aa = Rational::from(self.a.square_ref());
        let ab = Rational::from(&self.a * &self.b) * t;
        let bb = Rational::from(self.b.square_ref()) * n;
        aa + ab + bb
    }

    pub fn trace(&self) -> Rational {
        let t = omega_tn(self.d).0;
        Rational::from(&self.a * 2u32) + Rational::from(&self.b * t)
    }

    /// Galois conjugate, which is complex conjugation under the embedding.
    pub fn conj(&self) -> QuadElem {
        let t = omega_tn(self.d).0;
        QuadElem { d: self.d, a: Rational::from(&self.a + Rational::from(&self.b * t)), b: Rational::from(-&self.b) }
    }

    pub fn inv(&self) -> Result<QuadElem> {
        if self.is_zero() {
            return Err(Error::Singular("inverse of zero".into()));
        }
        let n = self.norm();
        let c = self.conj();
        Ok(QuadElem { d: self.d, a: Rational::from(&c.a / &n), b: Rational::from(&c.b / &n) })
    }

    pub fn div(&self, o: &QuadElem) -> Result<QuadElem> {
        Ok(self * &o.inv()?)
    }

    pub fn scale(&self, r: &Rational) -> QuadElem {
        QuadElem { d: self.d, a: Rational::from(&self.a * r), b: Rational::from(&self.b * r) }
    }

    pub fn pow(&self, e: i64) -> Result<QuadElem> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut out = QuadElem { d: self.d, a: Rational::from(1), b: Rational::new() };
        for _ in 0..e.unsigned_abs() {
            out = &out * &base;
        }
        Ok(out)
    }

    /// Least common multiple of the coordinate denominators.
    pub fn denominator(&self) -> Integer {
        Integer::from(self.a.denom().lcm_ref(self.b.denom()))
    }

    pub fn embed(&self, prec: u32) -> BigComplex {
        let wp = prec + 16;
        let (t, _) = omega_tn(self.d);
        let ad = self.d.unsigned_abs();
        // re = a + b t/2, im = b √|d| / (t == 1 ? 2 : 1)
        let re = Rational::from(&self.a + Rational::from(&self.b * t) / 2u32);
        let sq = Float::with_val(wp, ad).sqrt();
        let mut im = Float::with_val(wp, &self.b) * sq;
        if t == 1 {
            im /= 2u32;
        }
        let re = Float::with_val(prec, &re);
        let im = Float::with_val(prec, &im);
        let err = (re.to_f64().abs() + im.to_f64().abs() + 1e-300) * 2.0 * unit_round(prec);
        BigComplex::new(re, im).with_err(err)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        let (t, _) = omega_tn(self.d);
        let b = self.b.to_f64();
        let s = (self.d.unsigned_abs() as f64).sqrt();
        if t == 1 {
            (self.a.to_f64() + b / 2.0, b * s / 2.0)
        } else {
            (self.a.to_f64(), b * s)
        }
    }

    /// Nearest element of O under the norm.
    pub fn round(&self) -> QuadElem {
        let fl = |r: &Rational| Integer::from(r.floor_ref());
        let (a0, b0) = (fl(&self.a), fl(&self.b));
        let mut best: Option<(Rational, QuadElem)> = None;
        for da in 0..2 {
            for db in 0..2 {
                let q = QuadElem { d: self.d, a: Rational::from(Integer::from(&a0 + da)), b: Rational::from(Integer::from(&b0 + db)) };
                let n = (self - &q).norm();
                if best.as_ref().map_or(true, |(bn, _)| n < *bn) {
                    best = Some((n, q));
                }
            }
        }
        best.unwrap().1
    }

    /// Canonical sort key; used to order associates and coset representatives.
    pub fn key_cmp(&self, o: &QuadElem) -> Ordering {
        self.a.cmp(&o.a).then_with(|| self.b.cmp(&o.b))
    }
}

impl fmt::Display for QuadElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b == 0 {
            return write!(f, "{}", self.a);
        }
        if self.a != 0 {
            write!(f, "{}", self.a)?;
            if self.b > 0 {
                write!(f, "+")?;
            }
        }
        if self.b == 1 {
            write!(f, "w")
        } else if self.b == -1 {
            write!(f, "-w")
        } else {
            write!(f, "{}*w", self.b)
        }
    }
}

macro_rules! quad_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&QuadElem> for &QuadElem {
            type Output = QuadElem;
            fn $m(self, o: &QuadElem) -> QuadElem {
                debug_assert_eq!(self.d, o.d, "mixing fields");
                $body(self, o)
            }
        }
        impl $tr<QuadElem> for QuadElem {
            type Output = QuadElem;
            fn $m(self, o: QuadElem) -> QuadElem {
                (&self).$m(&o)
            }
        }
        impl $tr<&QuadElem> for QuadElem {
            type Output = QuadElem;
            fn $m(self, o: &QuadElem) -> QuadElem {
                (&self).$m(o)
            }
        }
    };
}

quad_binop!(Add, add, |x: &QuadElem, y: &QuadElem| QuadElem {
    d: x.d,
    a: Rational::from(&x.a + &y.a),
    b: Rational::from(&x.b + &y.b)
});
quad_binop!(Sub, sub, |x: &QuadElem, y: &QuadElem| QuadElem {
    d: x.d,
    a: Rational::from(&x.a - &y.a),
    b: Rational::from(&x.b - &y.b)
});
quad_binop!(Mul, mul, |x: &QuadElem, y: &QuadElem| {
    let (t, n) = omega_tn(x.d);
    let bb = Rational::from(&x.b * &y.b);
    let a = Rational::from(&x.a * &y.a) - Rational::from(&bb * n);
    let b = Rational::from(&x.a * &y.b) + Rational::from(&x.b * &y.a) + bb * t;
    QuadElem { d: x.d, a, b }
});

impl Neg for &QuadElem {
    type Output = QuadElem;
    fn neg(self) -> QuadElem {
        QuadElem { d: self.d, a: Rational::from(-&self.a), b: Rational::from(-&self.b) }
    }
}

impl Neg for QuadElem {
    type Output = QuadElem;
    fn neg(self) -> QuadElem {
        -&self
    }
}

fn parse_quad(d: i64, s: &str) -> Result<QuadElem> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return invalid("empty field element literal");
    }
    let bad = || Error::Validation(format!("cannot parse field element '{s}' (expected a+b*w)"));
    let mut a = Rational::new();
    let mut b = Rational::new();
    let mut terms = Vec::new();
    let mut cur = String::new();
    for (i, ch) in s.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 && !cur.is_empty() {
            terms.push(std::mem::take(&mut cur));
        }
        cur.push(ch);
    }
    terms.push(cur);
    for t in terms {
        let (sign, body) = match t.strip_prefix('-') {
            Some(r) => (-1, r),
            None => (1, t.strip_prefix('+').unwrap_or(&t)),
        };
        if body.is_empty() {
            return Err(bad());
        }
        // for d = -1, ω = i may also be written as i
        let wsuf = body.strip_suffix('w').or_else(|| if d == -1 { body.strip_suffix('i') } else { None });
        if let Some(coef) = wsuf {
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let c: Rational = if coef.is_empty() { Rational::from(1) } else { coef.parse().map_err(|_| bad())? };
            b += c * sign;
        } else {
            let c: Rational = body.parse().map_err(|_| bad())?;
            a += c * sign;
        }
    }
    Ok(QuadElem { d, a, b })
}

/// Euclidean division a = q b + r with N(r) < N(b).
pub fn div_rem(a: &QuadElem, b: &QuadElem) -> (QuadElem, QuadElem) {
    let q = (a * &b.inv().expect("division by zero")).round();
    let r = a - &(&q * b);
    (q, r)
}

pub fn gcd(a: &QuadElem, b: &QuadElem) -> QuadElem {
    gcd_extended(a, b).expect("gcd of zero pair").0
}

/// (g, u, v) with g = u a + v b a greatest common divisor.
pub fn gcd_extended(a: &QuadElem, b: &QuadElem) -> Result<(QuadElem, QuadElem, QuadElem)> {
    QuadField::new(a.d)?;
    if !a.is_integral() || !b.is_integral() {
        return invalid("gcd needs integral elements");
    }
    if a.is_zero() && b.is_zero() {
        return invalid("gcd(0, 0)");
    }
    let f = a.field();
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (f.one(), f.zero());
    let (mut t0, mut t1) = (f.zero(), f.one());
    while !r1.is_zero() {
        let (q, r) = div_rem(&r0, &r1);
        r0 = std::mem::replace(&mut r1, r);
        let s = &s0 - &(&q * &s1);
        s0 = std::mem::replace(&mut s1, s);
        let t = &t0 - &(&q * &t1);
        t0 = std::mem::replace(&mut t1, t);
    }
    Ok((r0, s0, t0))
}

pub fn is_unit(x: &QuadElem) -> bool {
    x.is_integral() && x.norm() == 1
}

/// Fractional ideal (gen), stored with a canonical generator so that derived
/// equality is equality of ideals.
#[derive(Clone, Debug)]
pub struct QuadIdeal {
    pub gen: QuadElem,
}

impl QuadIdeal {
    pub fn new(gen: QuadElem) -> Result<Self> {
        if gen.is_zero() {
            return invalid("zero ideal");
        }
        let f = gen.field();
        let best = f.units().iter().map(|u| &gen * u).max_by(|x, y| x.key_cmp(y)).unwrap();
        Ok(QuadIdeal { gen: best })
    }

    pub fn unit(f: QuadField) -> Self {
        QuadIdeal { gen: f.one() }
    }

    pub fn field(&self) -> QuadField {
        self.gen.field()
    }

    pub fn norm(&self) -> Rational {
        self.gen.norm()
    }

    pub fn is_integral(&self) -> bool {
        self.gen.is_integral()
    }

    pub fn is_unit_ideal(&self) -> bool {
        is_unit(&self.gen)
    }

    pub fn contains(&self, x: &QuadElem) -> bool {
        x.div(&self.gen).map(|q| q.is_integral()).unwrap_or(false)
    }

    pub fn mul(&self, o: &QuadIdeal) -> QuadIdeal {
        QuadIdeal::new(&self.gen * &o.gen).unwrap()
    }

    pub fn inverse(&self) -> QuadIdeal {
        QuadIdeal::new(self.gen.inv().unwrap()).unwrap()
    }

    pub fn div(&self, o: &QuadIdeal) -> QuadIdeal {
        self.mul(&o.inverse())
    }

    pub fn scale(&self, x: &QuadElem) -> Result<QuadIdeal> {
        QuadIdeal::new(&self.gen * x)
    }

    /// (numerator, denominator) as coprime integral ideals.
    pub fn split(&self) -> (QuadIdeal, QuadIdeal) {
        let m = self.gen.denominator();
        let f = self.field();
        let num = self.gen.scale(&Rational::from(m.clone()));
        let mm = f.elem(m, 0);
        let g = gcd(&num, &mm);
        let n = num.div(&g).unwrap();
        let dn = mm.div(&g).unwrap();
        (QuadIdeal::new(n).unwrap(), QuadIdeal::new(dn).unwrap())
    }

    /// No prime occurs in both ideals (for integral ideals: I + J = O).
    pub fn is_coprime(&self, o: &QuadIdeal) -> bool {
        let (a, b) = self.split();
        let (c, d) = o.split();
        let x = &a.gen * &b.gen;
        let y = &c.gen * &d.gen;
        is_unit(&gcd(&x, &y))
    }

    /// I + J.
    pub fn sum(&self, o: &QuadIdeal) -> QuadIdeal {
        let m = Integer::from(self.gen.denominator().lcm_ref(&o.gen.denominator()));
        let mr = Rational::from(m);
        let g = gcd(&self.gen.scale(&mr), &o.gen.scale(&mr));
        QuadIdeal::new(g.scale(&mr.recip())).unwrap()
    }

    /// I ∩ J.
    pub fn intersect(&self, o: &QuadIdeal) -> QuadIdeal {
        let s = self.sum(o);
        QuadIdeal::new((&self.gen * &o.gen).div(&s.gen).unwrap()).unwrap()
    }

    /// J ⊆ I.
    pub fn divides(&self, o: &QuadIdeal) -> bool {
        self.contains(&o.gen)
    }

    /// Reduce x modulo this ideal to a canonical representative.
    pub fn reduce(&self, x: &QuadElem) -> QuadElem {
        let y = x.div(&self.gen).unwrap();
        // canonical: fractional parts of the coordinates of x/gen in [0, 1)
        let fa = Rational::from(&y.a - Rational::from(y.a.floor_ref()));
        let fb = Rational::from(&y.b - Rational::from(y.b.floor_ref()));
        &QuadElem { d: y.d, a: fa, b: fb } * &self.gen
    }
}

impl PartialEq for QuadIdeal {
    fn eq(&self, o: &Self) -> bool {
        self.gen == o.gen
    }
}

impl Eq for QuadIdeal {}

impl Hash for QuadIdeal {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.gen.hash(h)
    }
}

impl fmt::Display for QuadIdeal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.gen)
    }
}

/// The residue field O/𝔮 of a prime 𝔮, with elements x + yω mod ℓ
/// (y = 0 in the degree-one case, where ω ≡ r).
#[derive(Clone, Debug)]
pub struct ResidueField {
    pub prime: PrimeIdeal,
    d: i64,
    root: Option<u64>,
}

pub type Residue = (u64, u64);

impl ResidueField {
    pub fn new(prime: &PrimeIdeal) -> Result<Self> {
        let f = prime.ideal.field();
        let (t, n) = omega_tn(f.d);
        let root = if prime.residue_degree == 1 {
            let r = roots_mod(t, n, prime.ell)
                .into_iter()
                .find(|&r| prime.ideal.contains(&(f.omega() - f.elem(r, 0))))
                .ok_or_else(|| Error::Validation("no root for degree one prime".into()))?;
            Some(r)
        } else {
            None
        };
        Ok(ResidueField { prime: prime.clone(), d: f.d, root })
    }

    pub fn size(&self) -> u64 {
        self.prime.ell.pow(self.prime.residue_degree)
    }

    fn p(&self) -> u64 {
        self.prime.ell
    }

    fn rat(&self, r: &Rational) -> Option<u64> {
        let p = Integer::from(self.p());
        let den = Integer::from(r.denom() % &p);
        if den == 0 {
            return None;
        }
        let inv = den.invert(&p).ok()?;
        let num = Integer::from(r.numer() % &p);
        let v = Integer::from(num * inv) % &p;
        let v = if v < 0 { v + &p } else { v };
        v.to_u64()
    }

    /// Reduction; None when a denominator is not a unit at 𝔮.
    pub fn reduce(&self, x: &QuadElem) -> Option<Residue> {
        let a = self.rat(&x.a)?;
        let b = self.rat(&x.b)?;
        let p = self.p() as u128;
        Some(match self.root {
            Some(r) => (((a as u128 + b as u128 * r as u128) % p) as u64, 0),
            None => (a, b),
        })
    }

    pub fn lift(&self, x: Residue) -> QuadElem {
        QuadElem { d: self.d, a: Rational::from(x.0), b: Rational::from(x.1) }
    }

    pub fn add(&self, x: Residue, y: Residue) -> Residue {
        let p = self.p();
        ((x.0 + y.0) % p, (x.1 + y.1) % p)
    }

    pub fn neg(&self, x: Residue) -> Residue {
        let p = self.p();
        ((p - x.0) % p, (p - x.1) % p)
    }

    pub fn mul(&self, x: Residue, y: Residue) -> Residue {
        let p = self.p() as u128;
        let (t, n) = omega_tn(self.d);
        let t = t.rem_euclid(p as i64) as u128;
        let n = n.rem_euclid(p as i64) as u128;
        let (x0, x1, y0, y1) = (x.0 as u128, x.1 as u128, y.0 as u128, y.1 as u128);
        let bb = x1 * y1 % p;
        let a = (x0 * y0 % p + p * p - bb * n % p) % p;
        let b = (x0 * y1 % p + x1 * y0 % p + bb * t % p) % p;
        (a as u64, b as u64)
    }

    pub fn is_zero(&self, x: Residue) -> bool {
        x == (0, 0)
    }

    pub fn inv(&self, x: Residue) -> Option<Residue> {
        if self.is_zero(x) {
            return None;
        }
        // x^{q-2}
        let mut e = self.size() - 2;
        let mut base = x;
        let mut r = (1, 0);
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        Some(r)
    }

    pub fn elements(&self) -> Vec<Residue> {
        let p = self.p();
        if self.prime.residue_degree == 1 {
            (0..p).map(|a| (a, 0)).collect()
        } else {
            (0..p).flat_map(|b| (0..p).map(move |a| (a, b))).collect()
        }
    }
}
