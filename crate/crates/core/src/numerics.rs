//! Multiprecision complex values with a scalar error bound, the upper
//! incomplete gamma function and Gaussian tail radii.

use crate::error::{invalid, Error, Result};
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub const MIN_PREC: u32 = 64;
/// Error bounds are carried as `f64`; above this the rounding unit underflows.
pub const MAX_PREC: u32 = 1000;

pub fn check_prec(prec: u32) -> Result<()> {
    if !(MIN_PREC..=MAX_PREC).contains(&prec) {
        return invalid(format!("precision {prec} outside [{MIN_PREC}, {MAX_PREC}]"));
    }
    Ok(())
}

/// 2^{1-prec}
#[inline]
pub fn unit_round(prec: u32) -> f64 {
    2f64.powi(1 - prec as i32)
}

#[inline]
fn up(x: f64) -> f64 {
    if x.is_nan() {
        return f64::INFINITY;
    }
    x * (1.0 + 4.0 * f64::EPSILON) + f64::from_bits(1)
}

#[inline]
fn fabs(x: &Float) -> f64 {
    let v = x.to_f64().abs();
    if v.is_finite() {
        v * (1.0 + f64::EPSILON)
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug)]
pub struct Tolerance {
    pub eps: f64,
    /// Multiplies the truncation radii chosen from eps (1 by default).
    pub radius_scale: f64,
}

impl Tolerance {
    pub fn new(eps: f64, prec: u32) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return invalid(format!("eps must be positive, got {eps}"));
        }
        let floor = 2f64.powi(8 - prec as i32);
        if eps <= floor {
            return invalid(format!("eps {eps:e} not above 2^(8-prec) = {floor:e}"));
        }
        Ok(Tolerance { eps, radius_scale: 1.0 })
    }

    pub fn with_radius_scale(mut self, k: f64) -> Self {
        assert!(k >= 1.0);
        self.radius_scale = k;
        self
    }
}

#[derive(Clone, Debug)]
pub struct BigComplex {
    pub re: Float,
    pub im: Float,
    /// Absolute error bound; may be infinite.
    pub err: f64,
}

impl BigComplex {
    pub fn zero(prec: u32) -> Self {
        BigComplex { re: Float::new(prec), im: Float::new(prec), err: 0.0 }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(1.0, 0.0, prec)
    }

    pub fn i(prec: u32) -> Self {
        Self::from_f64(0.0, 1.0, prec)
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Self {
        BigComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im), err: 0.0 }
    }

    pub fn from_int(n: i64, prec: u32) -> Self {
        BigComplex { re: Float::with_val(prec, n), im: Float::new(prec), err: 0.0 }
    }

    pub fn real(re: Float) -> Self {
        let prec = re.prec();
        BigComplex { re, im: Float::new(prec), err: 0.0 }
    }

    pub fn new(re: Float, im: Float) -> Self {
        let prec = re.prec().max(im.prec());
        let mut z = BigComplex { re, im, err: 0.0 };
        z.re.set_prec(prec);
        z.im.set_prec(prec);
        z
    }

    /// Rounded rational; the rounding is charged to `err`.
    pub fn from_rational(re: &Rational, im: &Rational, prec: u32) -> Self {
        let r = Float::with_val(prec, re);
        let i = Float::with_val(prec, im);
        let err = up((fabs(&r) + fabs(&i)) * unit_round(prec));
        BigComplex { re: r, im: i, err }
    }

    pub fn pi(prec: u32) -> Self {
        let p = Float::with_val(prec, Constant::Pi);
        let err = up(4.0 * unit_round(prec));
        BigComplex { re: p, im: Float::new(prec), err }
    }

    pub fn with_err(mut self, extra: f64) -> Self {
        self.err = up(self.err + extra);
        self
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn set_prec(&mut self, prec: u32) {
        let old = self.prec();
        self.re.set_prec(prec);
        self.im.set_prec(prec);
        if prec < old {
            self.err = up(self.err + self.mag() * unit_round(prec));
        }
    }

    pub fn with_prec(mut self, prec: u32) -> Self {
        self.set_prec(prec);
        self
    }

    /// Upper estimate of |z| as f64.
    pub fn mag(&self) -> f64 {
        let a = fabs(&self.re);
        let b = fabs(&self.im);
        up(a.hypot(b))
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        BigComplex { re: self.re.clone(), im: Float::with_val(self.prec(), -&self.im), err: self.err }
    }

    pub fn mul_i(&self) -> Self {
        BigComplex { re: Float::with_val(self.prec(), -&self.im), im: self.re.clone(), err: self.err }
    }

    pub fn abs2(&self) -> Float {
        let p = self.prec();
        let a = Float::with_val(p, self.re.square_ref());
        let b = Float::with_val(p, self.im.square_ref());
        a + b
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    /// Multiply by an exact power of two.
    pub fn mul_pow2(&self, k: i32) -> Self {
        let mut re = self.re.clone();
        let mut im = self.im.clone();
        re <<= k;
        im <<= k;
        BigComplex { re, im, err: up(self.err * 2f64.powi(k)) }
    }

    pub fn mul_int(&self, n: i64) -> Self {
        let p = self.prec();
        let re = Float::with_val(p, &self.re * n);
        let im = Float::with_val(p, &self.im * n);
        let m = (n as f64).abs();
        let err = up(self.err * m + self.mag() * m * unit_round(p));
        BigComplex { re, im, err }
    }

    /// Multiply by a real scalar carrying its own error bound.
    pub fn mul_real(&self, x: &Float, x_err: f64) -> Self {
        let p = self.prec().max(x.prec());
        let re = Float::with_val(p, &self.re * x);
        let im = Float::with_val(p, &self.im * x);
        let ax = fabs(x);
        let az = self.mag();
        let err = up(az * x_err + ax * self.err + self.err * x_err + 2.0 * ax * az * unit_round(p));
        BigComplex { re, im, err }
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn powi(&self, n: i64) -> Self {
        let p = self.prec();
        if n < 0 {
            return &BigComplex::one(p) / &self.powi(-n);
        }
        let mut result = BigComplex::one(p);
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        result
    }

    pub fn recip(&self) -> Self {
        &BigComplex::one(self.prec()) / self
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let e = Float::with_val(p, self.re.exp_ref());
        let (s, c) = self.im.clone().sin_cos(Float::new(p));
        let re = Float::with_val(p, &e * &c);
        let im = Float::with_val(p, &e * &s);
        let m = fabs(&e);
        let prop = if self.err > 0.0 { m * self.err.exp_m1() * (1.0 + self.err) } else { 0.0 };
        let err = up(prop + 6.0 * m * unit_round(p) * (1.0 + fabs(&self.im)));
        BigComplex { re, im, err }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let p = self.prec();
        let a = self.abs();
        let re = Float::with_val(p, a.ln_ref());
        let im = self.arg();
        let af = fabs(&a);
        let prop = if self.err == 0.0 {
            0.0
        } else if self.err < af {
            self.err / (af - self.err)
        } else {
            f64::INFINITY
        };
        let err = up(prop + 4.0 * (fabs(&re) + 4.0) * unit_round(p));
        BigComplex { re, im, err }
    }

    /// Rounded to f64 pair, for diagnostics.
    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).mag()
    }
}

impl Add<&BigComplex> for &BigComplex {
    type Output = BigComplex;
    fn add(self, o: &BigComplex) -> BigComplex {
        let p = self.prec().max(o.prec());
        let re = Float::with_val(p, &self.re + &o.re);
        let im = Float::with_val(p, &self.im + &o.im);
        let r = BigComplex { re, im, err: 0.0 };
        let err = up(self.err + o.err + r.mag() * unit_round(p));
        BigComplex { err, ..r }
    }
}

impl Sub<&BigComplex> for &BigComplex {
    type Output = BigComplex;
    fn sub(self, o: &BigComplex) -> BigComplex {
        let p = self.prec().max(o.prec());
        let re = Float::with_val(p, &self.re - &o.re);
        let im = Float::with_val(p, &self.im - &o.im);
        let r = BigComplex { re, im, err: 0.0 };
        let err = up(self.err + o.err + r.mag() * unit_round(p));
        BigComplex { err, ..r }
    }
}

impl Mul<&BigComplex> for &BigComplex {
    type Output = BigComplex;
    fn mul(self, o: &BigComplex) -> BigComplex {
        let p = self.prec().max(o.prec());
        let (re, im) = if self.im.is_zero() && o.im.is_zero() {
            (Float::with_val(p, &self.re * &o.re), Float::new(p))
        } else if o.im.is_zero() {
            (Float::with_val(p, &self.re * &o.re), Float::with_val(p, &self.im * &o.re))
        } else if self.im.is_zero() {
            (Float::with_val(p, &self.re * &o.re), Float::with_val(p, &self.re * &o.im))
        } else {
            let ac = Float::with_val(p, &self.re * &o.re);
            let bd = Float::with_val(p, &self.im * &o.im);
            let ad = Float::with_val(p, &self.re * &o.im);
            let bc = Float::with_val(p, &self.im * &o.re);
            (ac - bd, ad + bc)
        };
        let a = self.mag();
        let b = o.mag();
        let err = up(a * o.err + b * self.err + self.err * o.err + 6.0 * a * b * unit_round(p));
        BigComplex { re, im, err }
    }
}

impl Div<&BigComplex> for &BigComplex {
    type Output = BigComplex;
    fn div(self, o: &BigComplex) -> BigComplex {
        let p = self.prec().max(o.prec());
        let (re, im) = if o.im.is_zero() {
            (Float::with_val(p, &self.re / &o.re), Float::with_val(p, &self.im / &o.re))
        } else {
            let n = o.abs2();
            let ac = Float::with_val(p, &self.re * &o.re);
            let bd = Float::with_val(p, &self.im * &o.im);
            let bc = Float::with_val(p, &self.im * &o.re);
            let ad = Float::with_val(p, &self.re * &o.im);
            let re = Float::with_val(p, &(ac + bd) / &n);
            let im = Float::with_val(p, &(bc - ad) / &n);
            (re, im)
        };
        let a = self.mag();
        let bf = o.abs().to_f64() * (1.0 - 4.0 * f64::EPSILON);
        let q = if bf > 0.0 { a / bf } else { f64::INFINITY };
        let prop = if self.err == 0.0 && o.err == 0.0 {
            0.0
        } else if o.err < bf {
            (self.err + q * o.err) / (bf - o.err)
        } else {
            f64::INFINITY
        };
        let err = up(prop + 10.0 * q * unit_round(p));
        BigComplex { re, im, err }
    }
}

impl Neg for &BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        let p = self.prec();
        BigComplex { re: Float::with_val(p, -&self.re), im: Float::with_val(p, -&self.im), err: self.err }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<BigComplex> for BigComplex {
            type Output = BigComplex;
            fn $m(self, o: BigComplex) -> BigComplex {
                (&self).$m(&o)
            }
        }
        impl $tr<&BigComplex> for BigComplex {
            type Output = BigComplex;
            fn $m(self, o: &BigComplex) -> BigComplex {
                (&self).$m(o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);
owned_ops!(Div, div);

impl fmt::Display for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = (self.prec() as f64 * 0.30103) as usize;
        let d = digits.clamp(6, 60);
        write!(f, "{} {} {}i (err {:.2e})", self.re.to_string_radix(10, Some(d)),
            if self.im.is_sign_negative() { "-" } else { "+" },
            Float::with_val(self.prec(), self.im.abs_ref()).to_string_radix(10, Some(d)), self.err)
    }
}

/// Exact `m·2^e` encoding of a float: hex mantissa and decimal exponent.
pub fn float_to_hex(x: &Float) -> String {
    if x.is_zero() {
        return "0".into();
    }
    match x.to_integer_exp() {
        Some((m, e)) => {
            let tz = m.find_one(0).unwrap_or(0);
            let m = m >> tz;
            let e = e + tz as i32;
            format!("{}p{}", m.to_string_radix(16), e)
        }
        None => if x.is_nan() { "nan".into() } else if x.is_sign_negative() { "-inf".into() } else { "inf".into() },
    }
}

pub fn float_from_hex(s: &str, prec: u32) -> Result<Float> {
    match s {
        "0" => return Ok(Float::new(prec)),
        "nan" => return Ok(Float::with_val(prec, rug::float::Special::Nan)),
        "inf" => return Ok(Float::with_val(prec, rug::float::Special::Infinity)),
        "-inf" => return Ok(Float::with_val(prec, rug::float::Special::NegInfinity)),
        _ => {}
    }
    let (m, e) = s.split_once('p').ok_or_else(|| Error::Validation(format!("bad hex float '{s}'")))?;
    let m = Integer::from_str_radix(m, 16).map_err(|_| Error::Validation(format!("bad hex mantissa '{m}'")))?;
    let e: i32 = e.parse().map_err(|_| Error::Validation(format!("bad exponent in '{s}'")))?;
    if m.significant_bits() > prec {
        return invalid(format!("hex float '{s}' needs more than {prec} bits"));
    }
    let mut f = Float::with_val(prec, m);
    f <<= e;
    Ok(f)
}

/// Bernoulli numbers B_0..=B_n with B_1 = -1/2.
pub fn bernoulli_numbers(n: usize) -> Vec<Rational> {
    let mut b = vec![Rational::new(); n + 1];
    b[0] = Rational::from(1);
    for m in 1..=n {
        let mut acc = Rational::new();
        let mut binom = Integer::from(1);
        for k in 0..m {
            acc += Rational::from(&binom) * &b[k];
            binom *= (m + 1 - k) as u32;
            binom /= (k + 1) as u32;
        }
        b[m] = -acc / Rational::from(m as u32 + 1);
    }
    b
}

fn bc_err(v: Float, err: f64) -> BigComplex {
    BigComplex::real(v).with_err(err)
}

/// Upper incomplete gamma Γ(a, x) for real a and x ≥ 0 (x > 0 when a ≤ 0).
pub fn upper_incomplete_gamma(a: &Float, x: &Float, prec: u32) -> Result<BigComplex> {
    check_prec(prec)?;
    if x.is_sign_negative() && !x.is_zero() {
        return invalid("incomplete gamma needs x >= 0");
    }
    if !a.is_finite() || !x.is_finite() {
        return invalid("incomplete gamma needs finite arguments");
    }
    if x.to_f64() > 1e15 {
        return Err(Error::Precision(format!("Γ(a, x) underflows for x = {}", x.to_f64())));
    }
    let af = a.to_f64();
    let guard = 40 + (af.abs().max(1.0).log2().ceil() as u32) * 2;
    let wp = prec + guard;
    let xw = Float::with_val(wp, x);
    let aw = Float::with_val(wp, a);
    let r = if x.is_zero() {
        if af <= 0.0 {
            return invalid("Γ(a, 0) diverges for a <= 0");
        }
        let g = Float::with_val(wp, aw.gamma_ref());
        let e = fabs(&g) * unit_round(wp) * 8.0;
        bc_err(g, e)
    } else if a.is_integer() && af >= 1.0 && af <= 1e5 {
        gamma_int(af as u64, &xw, wp)
    } else if af > 0.0 && xw.to_f64() < af + 1.0 {
        gamma_series_complement(&aw, &xw, wp)
    } else if xw.to_f64() >= 2.0 || af > 0.0 {
        gamma_cf(&aw, &xw, wp)
    } else {
        gamma_small_x_nonpositive(&aw, &xw, wp)
    };
    Ok(r.with_prec(prec))
}

fn gamma_int(n: u64, x: &Float, wp: u32) -> BigComplex {
    // (n-1)! e^{-x} sum_{k<n} x^k/k!
    let mut term = Float::with_val(wp, 1);
    let mut sum = Float::with_val(wp, 1);
    for k in 1..n {
        term *= x;
        term /= k as u32;
        sum += &term;
    }
    let mut fact = Float::with_val(wp, 1);
    for k in 2..n {
        fact *= k as u32;
    }
    let e = Float::with_val(wp, (-x.clone()).exp_ref());
    let v = sum * fact * e;
    let err = fabs(&v) * (2.0 * n as f64 + 8.0 + 2.0 * x.to_f64().abs()) * unit_round(wp);
    bc_err(v, err)
}

/// Γ(a) − γ(a, x) with the lower gamma from its power series.
fn gamma_series_complement(a: &Float, x: &Float, wp: u32) -> BigComplex {
    let g = Float::with_val(wp, a.gamma_ref());
    let low = lower_gamma_series(a, x, wp);
    let v = Float::with_val(wp, &g - &low);
    let err = (fabs(&g) + fabs(&low)) * 64.0 * unit_round(wp);
    bc_err(v, err)
}

fn lower_gamma_series(a: &Float, x: &Float, wp: u32) -> Float {
    // x^a e^{-x} sum x^n / (a (a+1) ... (a+n))
    let mut denom = a.clone();
    let mut term = Float::with_val(wp, 1 / &denom);
    let mut sum = term.clone();
    let eps = Float::with_val(wp, Float::i_exp(1, -(wp as i32) - 4));
    for _ in 0..100_000 {
        denom += 1;
        term *= x;
        term /= &denom;
        sum += &term;
        let rel = Float::with_val(wp, term.abs_ref()) / Float::with_val(wp, sum.abs_ref());
        if rel < eps {
            break;
        }
    }
    let lx = Float::with_val(wp, x.ln_ref());
    let pre = Float::with_val(wp, (lx * a - x).exp_ref());
    sum * pre
}

/// Legendre continued fraction, modified Lentz.
fn gamma_cf(a: &Float, x: &Float, wp: u32) -> BigComplex {
    let tiny = Float::with_val(wp, Float::i_exp(1, -(4 * wp as i32)));
    let eps = Float::with_val(wp, Float::i_exp(1, -(wp as i32) + 2));
    let mut b = Float::with_val(wp, x + 1u32) - a;
    let mut c = Float::with_val(wp, 1 / &tiny);
    let mut d = Float::with_val(wp, 1 / &b);
    let mut h = d.clone();
    let mut iters = 0u64;
    for i in 1..2_000_000u64 {
        iters = i;
        let an = -(Float::with_val(wp, i) * Float::with_val(wp, Float::with_val(wp, i) - a));
        b += 2u32;
        d = Float::with_val(wp, &an * &d) + &b;
        if d.is_zero() {
            d = tiny.clone();
        }
        c = Float::with_val(wp, &an / &c) + &b;
        if c.is_zero() {
            c = tiny.clone();
        }
        d.recip_mut();
        let del = Float::with_val(wp, &d * &c);
        h *= &del;
        let dev = Float::with_val(wp, &del - 1u32).abs();
        if dev < eps {
            break;
        }
    }
    let lx = Float::with_val(wp, x.ln_ref());
    let pre = Float::with_val(wp, (lx * a - x).exp_ref());
    let v = h * pre;
    let err = fabs(&v) * (64.0 + 4.0 * iters as f64) * unit_round(wp);
    bc_err(v, err)
}

fn euler_gamma(wp: u32) -> Float {
    Float::with_val(wp, Constant::Euler)
}

/// E_1(x) = Γ(0, x) by its convergent series, x < 2.
fn e1_series(x: &Float, wp: u32) -> BigComplex {
    let mut sum = Float::new(wp);
    let mut term = Float::with_val(wp, 1);
    let eps = Float::with_val(wp, Float::i_exp(1, -(wp as i32) - 4));
    for k in 1..100_000u32 {
        term *= x;
        term /= k;
        term = -term;
        let t = Float::with_val(wp, &term / k);
        sum += &t;
        if Float::with_val(wp, t.abs_ref()) < eps {
            break;
        }
    }
    let lx = Float::with_val(wp, x.ln_ref());
    let v = -euler_gamma(wp) - lx - sum;
    let err = (fabs(&v) + 8.0) * 64.0 * unit_round(wp);
    bc_err(v, err)
}

/// a <= 0, 0 < x < 2: downward recurrence from a base point in (0, 1] or from E_1.
fn gamma_small_x_nonpositive(a: &Float, x: &Float, wp: u32) -> BigComplex {
    let af = a.to_f64();
    let k = (-af).floor() as i64 + 1;
    let base_a = Float::with_val(wp, a + k);
    let integral = a.is_integer();
    let (mut cur, mut cur_a) = if integral {
        (e1_series(x, wp), Float::with_val(wp, a + (k - 1)))
    } else {
        (gamma_series_complement(&base_a, x, wp), base_a)
    };
    // Γ(b, x) = (Γ(b+1, x) − x^b e^{−x}) / b, stepping b down to a.
    let lx = Float::with_val(wp, x.ln_ref());
    let steps = if integral { k - 1 } else { k };
    for _ in 0..steps {
        cur_a -= 1u32;
        let pw = Float::with_val(wp, (Float::with_val(wp, &lx * &cur_a) - x).exp_ref());
        let pwc = BigComplex::real(pw.clone()).with_err(fabs(&pw) * 16.0 * unit_round(wp));
        let diff = &cur - &pwc;
        let inv = Float::with_val(wp, 1 / &cur_a);
        cur = diff.mul_real(&inv, fabs(&inv) * unit_round(wp));
    }
    cur
}

/// Shape data of a fundamental parallelogram, enough to bound tails of
/// radially decreasing sums over the lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellShape {
    pub covol: f64,
    /// Mean of |y|² over the centred cell.
    pub second_moment: f64,
    /// Largest distance from the cell centre to a vertex.
    pub radius: f64,
}

impl CellShape {
    pub fn from_basis(w1: (f64, f64), w2: (f64, f64)) -> Self {
        let covol = (w1.0 * w2.1 - w1.1 * w2.0).abs();
        let n1 = w1.0 * w1.0 + w1.1 * w1.1;
        let n2 = w2.0 * w2.0 + w2.1 * w2.1;
        let sp = ((w1.0 + w2.0).powi(2) + (w1.1 + w2.1).powi(2)).sqrt();
        let sm = ((w1.0 - w2.0).powi(2) + (w1.1 - w2.1).powi(2)).sqrt();
        CellShape { covol, second_moment: (n1 + n2) / 12.0, radius: sp.max(sm) / 2.0 * (1.0 + 1e-12) }
    }

    /// Square cell of the given area.
    pub fn square(covol: f64) -> Self {
        let side = covol.sqrt();
        Self::from_basis((side, 0.0), (0.0, side))
    }
}

/// R with sum over |λ| > R of |λ|^degree e^{-t|λ|²} below eps.
///
/// Each term is dominated by the Gaussian average over its translated cell
/// (Jensen), which turns the tail into a radial integral outside R − ρ.
pub fn gaussian_tail_radius(t_scale: f64, shape: &CellShape, eps: f64, degree: u32) -> f64 {
    assert!(t_scale > 0.0 && eps > 0.0 && shape.covol > 0.0);
    let mut best: f64 = 0.0;
    for d in 0..=degree {
        let (c, ln_pref) = if d == 0 {
            (t_scale, 0.0)
        } else {
            let c = 0.75 * t_scale;
            let df = d as f64;
            (c, (0.5 * df * (2.0 * df / (t_scale * std::f64::consts::E)).ln()).max(0.0))
        };
        let ln_bound = ln_pref + c * shape.second_moment + (std::f64::consts::PI / (c * shape.covol)).ln() - eps.ln();
        let r = shape.radius + (ln_bound.max(0.0) / c).sqrt();
        best = best.max(r);
    }
    best.max(shape.radius * 1.0001)
}

/// Bound on the same tail sum at a given radius (used by tests and diagnostics).
pub fn gaussian_tail_bound(t_scale: f64, shape: &CellShape, radius: f64, degree: u32) -> f64 {
    if radius <= shape.radius {
        return f64::INFINITY;
    }
    let (c, pref) = if degree == 0 {
        (t_scale, 1.0)
    } else {
        let c = 0.75 * t_scale;
        let df = degree as f64;
        (c, (2.0 * df / (t_scale * std::f64::consts::E)).powf(df / 2.0).max(1.0))
    };
    pref * (c * shape.second_moment).exp() * std::f64::consts::PI / (c * shape.covol)
        * (-c * (radius - shape.radius).powi(2)).exp()
}

/// x^y for real x > 0 at working precision.
pub fn real_pow(x: &Float, y: &Float, prec: u32) -> Float {
    Float::with_val(prec, x.pow(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: f64, p: u32) -> Float {
        Float::with_val(p, x)
    }

    #[test]
    fn gamma_examples() {
        let p = 128;
        let g = upper_incomplete_gamma(&f(1.0, p), &f(2.0, p), p).unwrap();
        assert!((g.re.to_f64() - (-2f64).exp()).abs() < 1e-15);
        let g = upper_incomplete_gamma(&f(3.0, p), &f(0.0, p), p).unwrap();
        assert_eq!(g.re, 2);
        let g = upper_incomplete_gamma(&f(3.0, p), &f(1.0, p), p).unwrap();
        let want = Float::with_val(p, 5) / Float::with_val(p, 1).exp();
        assert!(Float::with_val(p, &g.re - &want).abs() < 1e-35);
    }

    #[test]
    fn gamma_against_mpfr() {
        let p = 200;
        for &(a, x) in &[(0.5, 0.3), (2.5, 7.0), (-1.0, 0.4), (0.0, 1.5), (0.0, 3.0), (-2.5, 0.7), (-3.0, 5.0), (1.0 - 1.5, 9.0), (7.25, 3.0), (12.0, 40.0)] {
            let g = upper_incomplete_gamma(&f(a, p), &f(x, p), p).unwrap();
            let o = Float::with_val(p + 64, f(a, p + 64).gamma_inc_ref(&f(x, p + 64)));
            let d = Float::with_val(p, &g.re - &o).abs().to_f64();
            let scale = o.to_f64().abs().max(1.0);
            assert!(d <= g.err, "a={a} x={x} diff {d:e} err {:e}", g.err);
            assert!(d < scale * 2f64.powi(-(p as i32) + 4), "a={a} x={x} diff {d:e}");
        }
    }

    #[test]
    fn tail_radius_examples() {
        let s = CellShape::square(1.0);
        let r = gaussian_tail_radius(std::f64::consts::PI, &s, 1e-30, 0);
        assert!(r <= 6.0, "{r}");
        let r2 = gaussian_tail_radius(std::f64::consts::PI, &s, 1e-60, 0);
        assert!(r2 >= (60.0 * 10f64.ln() / std::f64::consts::PI).sqrt());
        let r8 = gaussian_tail_radius(std::f64::consts::PI, &s, 1e-30, 8);
        assert!(r8 >= r);
    }

    #[test]
    fn tail_radius_is_honest() {
        // brute-force the discarded shell of Z[i]
        let s = CellShape::square(1.0);
        for &(deg, eps) in &[(0u32, 1e-12), (4, 1e-10), (8, 1e-14)] {
            let r = gaussian_tail_radius(std::f64::consts::PI, &s, eps, deg);
            let mut tail = 0.0;
            let m = (r + 12.0) as i64;
            for a in -m..=m {
                for b in -m..=m {
                    let n = ((a * a + b * b) as f64).sqrt();
                    if n > r {
                        tail += n.powi(deg as i32) * (-std::f64::consts::PI * n * n).exp();
                    }
                }
            }
            assert!(tail < eps, "deg {deg}: tail {tail:e} vs {eps:e}");
        }
    }

    #[test]
    fn hex_round_trip() {
        let x = Float::with_val(256, Float::with_val(256, 2).sqrt_ref()) / 3;
        let s = float_to_hex(&x);
        let y = float_from_hex(&s, 256).unwrap();
        assert_eq!(x, y);
        assert_eq!(float_from_hex(&float_to_hex(&Float::new(64)), 64).unwrap(), 0);
    }

    #[test]
    fn bernoulli_small() {
        let b = bernoulli_numbers(8);
        assert_eq!(b[1], Rational::from((-1, 2)));
        assert_eq!(b[2], Rational::from((1, 6)));
        assert_eq!(b[3], 0);
        assert_eq!(b[4], Rational::from((-1, 30)));
        assert_eq!(b[8], Rational::from((-1, 30)));
    }

    #[test]
    fn error_bound_covers_precision_doubling() {
        let lo = BigComplex::from_f64(0.3, 1.7, 100);
        let hi = BigComplex::from_f64(0.3, 1.7, 300);
        let chain = |z: &BigComplex| {
            let w = (z * z).exp() / (z + &BigComplex::one(z.prec()));
            w.ln() * z.powi(5)
        };
        let a = chain(&lo);
        let b = chain(&hi);
        let d = (&a.clone().with_prec(300) - &b).mag();
        assert!(d <= a.err, "{d:e} > {:e}", a.err);
    }
}
