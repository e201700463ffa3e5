//! Real periods of CM elliptic curves by the AGM, and recognition of
//! computed values as algebraic numbers by LLL.

use crate::error::{invalid, Error, Result};
use crate::numerics::{unit_round, BigComplex};
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

/// y² = x³ + a2 x² + a4 x + a6 with CM by the maximal order of ℚ(√d).
#[derive(Clone, Debug)]
pub struct PeriodSpec {
    pub d: i64,
    pub a2: Rational,
    pub a4: Rational,
    pub a6: Rational,
}

const CURVES: [(i64, [i64; 3], i64); 5] = [
    (-1, [0, -1, 0], 1728),
    (-2, [4, 2, 0], 8000),
    (-3, [0, 0, 1], 0),
    (-7, [0, -35, -98], -3375),
    (-11, [0, -264, -1694], -32768),
];

fn cm_j(d: i64) -> Result<i64> {
    CURVES.iter().find(|c| c.0 == d).map(|c| c.2).ok_or_else(|| Error::UnsupportedField(d))
}

impl PeriodSpec {
    pub fn builtin(d: i64) -> Result<Self> {
        let c = CURVES.iter().find(|c| c.0 == d).ok_or_else(|| Error::UnsupportedField(d))?;
        Ok(PeriodSpec { d, a2: c.1[0].into(), a4: c.1[1].into(), a6: c.1[2].into() })
    }

    /// A user curve, accepted only if its j-invariant is the CM value for d.
    pub fn with_curve(d: i64, a2: Rational, a4: Rational, a6: Rational) -> Result<Self> {
        let j = j_invariant(&a2, &a4, &a6)?;
        let want = cm_j(d)?;
        if j != want {
            return invalid(format!("curve has j = {j}, but CM by the maximal order of Q(sqrt({d})) needs j = {want}"));
        }
        Ok(PeriodSpec { d, a2, a4, a6 })
    }
}

pub fn j_invariant(a2: &Rational, a4: &Rational, a6: &Rational) -> Result<Rational> {
    let b2 = Rational::from(4 * a2);
    let b4 = Rational::from(2 * a4);
    let b6 = Rational::from(4 * a6);
    let b8 = Rational::from(4 * Rational::from(a2 * a6)) - Rational::from(a4 * a4);
    let c4 = Rational::from(&b2 * &b2) - Rational::from(24 * &b4);
    let disc = -Rational::from(&b2 * &b2) * &b8 - Rational::from(8 * Rational::from(b4.clone().pow(3)))
        - Rational::from(27 * Rational::from(&b6 * &b6))
        + Rational::from(9 * Rational::from(&b2 * &b4)) * &b6;
    if disc == 0 {
        return invalid("curve is singular");
    }
    Ok(c4.pow(3) / disc)
}

fn csqrt(z: &BigComplex) -> BigComplex {
    let p = z.prec();
    let r = z.abs();
    let re = Float::with_val(p, (Float::with_val(p, &r + &z.re) / 2u32).max(&Float::new(p)).sqrt());
    let mut im = Float::with_val(p, (Float::with_val(p, &r - &z.re) / 2u32).max(&Float::new(p)).sqrt());
    if z.im.is_sign_negative() {
        im = -im;
    }
    BigComplex::new(re, im)
}

/// Ω = 2π / AGM(√(e1−e2), √(e1−e3)), e1 the largest real root; returns the
/// period, an error bound, and the AGM iteration count.
pub fn cm_period(spec: &PeriodSpec, prec: u32) -> Result<(Float, f64, u32)> {
    crate::numerics::check_prec(prec)?;
    let wp = prec + 32;
    let a2 = Float::with_val(wp, &spec.a2);
    let a4 = Float::with_val(wp, &spec.a4);
    let a6 = Float::with_val(wp, &spec.a6);
    j_invariant(&spec.a2, &spec.a4, &spec.a6)?;
    let f = |x: &Float| -> (Float, Float) {
        let v = Float::with_val(wp, ((x.clone() + &a2) * x + &a4) * x + &a6);
        let d = Float::with_val(wp, (Float::with_val(wp, 3 * x) + Float::with_val(wp, 2 * &a2)) * x + &a4);
        (v, d)
    };
    // Newton from above the Cauchy bound converges monotonically to the largest real root
    let bound = Float::with_val(wp, 1) + a2.clone().abs().max(&a4.clone().abs()).max(&a6.clone().abs());
    let mut x = bound;
    for _ in 0..10 * wp {
        let (v, d) = f(&x);
        let step = Float::with_val(wp, &v / &d);
        x -= &step;
        if step.clone().abs() <= Float::with_val(wp, x.clone().abs() + 1u32) * unit_round(wp) * 16.0 {
            break;
        }
    }
    let e1 = x;
    // x² + b x + c = (cubic)/(x − e1)
    let b = Float::with_val(wp, &a2 + &e1);
    let c = Float::with_val(wp, &a4 + Float::with_val(wp, &e1 * &b));
    let disc = Float::with_val(wp, Float::with_val(wp, &b * &b) - Float::with_val(wp, 4 * &c));
    let half_b = Float::with_val(wp, Float::with_val(wp, -&b) / 2u32);
    let (e2, e3) = if disc >= 0 {
        let s = Float::with_val(wp, disc.sqrt() / 2u32);
        (BigComplex::real(Float::with_val(wp, &half_b + &s)), BigComplex::real(Float::with_val(wp, &half_b - &s)))
    } else {
        let s = Float::with_val(wp, (-disc).sqrt() / 2u32);
        (BigComplex::new(half_b.clone(), s.clone()), BigComplex::new(half_b, -s))
    };
    let e1c = BigComplex::real(e1);
    let mut a = csqrt(&(&e1c - &e2));
    let mut g = csqrt(&(&e1c - &e3));
    let mut iters = 0;
    let close = |a: &BigComplex, g: &BigComplex| {
        let rel = Float::with_val(32, (a - g).abs() / a.abs());
        rel.is_zero() || rel.get_exp().map_or(false, |e| e < 4 - wp as i32)
    };
    while !close(&a, &g) {
        let an = (&a + &g).mul_pow2(-1);
        let mut gn = csqrt(&(&a * &g));
        if (&an - &gn).mag() > (&an + &gn).mag() {
            gn = BigComplex::zero(wp) - &gn;
        }
        a = an;
        g = gn;
        iters += 1;
        if iters > 200 {
            return Err(Error::Precision("AGM did not converge".into()));
        }
    }
    if a.im.clone().abs().to_f64() > a.mag() * 1e-20 {
        return invalid("AGM of the 2-torsion configuration is not real");
    }
    let two_pi = Float::with_val(wp, Constant::Pi) * 2u32;
    let omega = Float::with_val(prec, two_pi / &a.re);
    let err = omega.to_f64().abs() * 2f64.powi(-(prec as i32) + 8);
    Ok((omega, err, iters))
}

/// value · Ω^{−N(q−p)} · π^{Nq}.
pub fn normalize_by_period(value: &BigComplex, n: u32, p: i64, q: i64, omega: &Float, prec: u32) -> Result<BigComplex> {
    if p >= 0 || q < 0 {
        return invalid(format!("weight must satisfy p < 0 ≤ q, got ({p}, {q})"));
    }
    let e_om = -(n as i64) * (q - p);
    let e_pi = n as i64 * q;
    let om = Float::with_val(prec, omega.clone().pow(e_om as i32));
    let pi = Float::with_val(prec, Float::with_val(prec, Constant::Pi).pow(e_pi as i32));
    let s = Float::with_val(prec, om * pi);
    let rel = (e_om.unsigned_abs() + e_pi.unsigned_abs() + 2) as f64 * 4.0 * unit_round(prec);
    let sf = s.to_f64().abs();
    Ok(value.mul_real(&s, sf * rel))
}

/// LLL-reduces the columns of `b` (δ = 3/4 style with δ = 0.99).
pub fn lll(b: &mut [Vec<Integer>], prec: u32) {
    let n = b.len();
    if n == 0 {
        return;
    }
    let dot = |x: &[Float], y: &[Float]| -> Float { x.iter().zip(y).fold(Float::new(prec), |acc, (a, b)| acc + Float::with_val(prec, a * b)) };
    let delta = Float::with_val(prec, 0.99);
    let mut k = 1;
    let mut guard = 0usize;
    while k < n {
        guard += 1;
        if guard > 100_000 {
            break;
        }
        // Gram–Schmidt from scratch; the dimension is small
        let bf: Vec<Vec<Float>> = b.iter().map(|v| v.iter().map(|x| Float::with_val(prec, x)).collect()).collect();
        let mut bs: Vec<Vec<Float>> = Vec::with_capacity(n);
        let mut mu = vec![vec![Float::new(prec); n]; n];
        let mut nrm: Vec<Float> = Vec::with_capacity(n);
        for i in 0..=k {
            let mut v = bf[i].clone();
            for j in 0..i {
                mu[i][j] = Float::with_val(prec, dot(&bf[i], &bs[j]) / &nrm[j]);
                for (vt, bt) in v.iter_mut().zip(&bs[j]) {
                    *vt -= Float::with_val(prec, &mu[i][j] * bt);
                }
            }
            nrm.push(dot(&v, &v));
            bs.push(v);
        }
        // size reduction of b_k
        let mut changed = false;
        for j in (0..k).rev() {
            let r = mu[k][j].clone().round();
            if !r.is_zero() {
                let ri = r.to_integer().unwrap();
                let (head, tail) = b.split_at_mut(k);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= Integer::from(&ri * y);
                }
                for l in 0..j {
                    let t = Float::with_val(prec, &r * &mu[j][l]);
                    mu[k][l] -= t;
                }
                mu[k][j] -= &r;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        let lhs = nrm[k].clone();
        let rhs = Float::with_val(prec, &delta - Float::with_val(prec, &mu[k][k - 1] * &mu[k][k - 1])) * &nrm[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
}

/// Integer polynomial (low → high) of degree ≤ `degree` approximately
/// vanishing at x, from LLL with scale 2^`bits`.
pub fn algdep(x: &BigComplex, degree: usize, bits: u32) -> Vec<Integer> {
    let prec = x.prec().max(bits + 64);
    let scale = Float::with_val(prec, Float::i_exp(1, bits as i32));
    let complex = !x.im.is_zero();
    let mut pw = BigComplex::one(prec);
    let mut basis = Vec::with_capacity(degree + 1);
    for j in 0..=degree {
        let mut v: Vec<Integer> = (0..=degree).map(|i| Integer::from((i == j) as u32)).collect();
        v.push(Float::with_val(prec, &pw.re * &scale).round().to_integer().unwrap());
        if complex {
            v.push(Float::with_val(prec, &pw.im * &scale).round().to_integer().unwrap());
        }
        basis.push(v);
        pw = &pw * x;
    }
    lll(&mut basis, prec + 64);
    let mut best = basis[0][..=degree].to_vec();
    let content = best.iter().fold(Integer::new(), |g, c| g.gcd(c));
    if content > 1 {
        for c in best.iter_mut() {
            *c /= &content;
        }
    }
    while best.len() > 1 && best.last().unwrap().cmp0() == std::cmp::Ordering::Equal {
        best.pop();
    }
    if best.last().map(|c| *c < 0).unwrap_or(false) {
        for c in best.iter_mut() {
            *c = Integer::from(-&*c);
        }
    }
    best
}

pub fn eval_int_poly(poly: &[Integer], x: &BigComplex) -> (BigComplex, f64) {
    let prec = x.prec();
    let mut acc = BigComplex::zero(prec);
    let mut scale = 0.0;
    let xm = x.mag();
    for c in poly.iter().rev() {
        acc = &(&acc * x) + &BigComplex::real(Float::with_val(prec, c));
        scale = scale * xm + c.to_f64().abs();
    }
    (acc, scale)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecognitionResult {
    /// Coefficients, constant term first.
    pub minpoly: Vec<Integer>,
    pub residual: f64,
    pub verified_residual: f64,
    pub height: Integer,
}

impl RecognitionResult {
    pub fn poly_string(&self) -> String {
        let mut parts = Vec::new();
        for (i, c) in self.minpoly.iter().enumerate().rev() {
            if c.cmp0() == std::cmp::Ordering::Equal {
                continue;
            }
            let mon = match i {
                0 => String::new(),
                1 => "x".into(),
                _ => format!("x^{i}"),
            };
            let coef = if i > 0 && *c == 1 {
                String::new()
            } else if i > 0 && *c == -1 {
                "-".into()
            } else if i > 0 {
                format!("{c}*")
            } else {
                c.to_string()
            };
            parts.push(format!("{coef}{mon}"));
        }
        parts.join(" + ").replace("+ -", "- ")
    }
}

/// Bits of precision needed to separate relations of the requested size.
pub fn required_bits(degree: usize, height_bound: &Integer, complex: bool) -> u32 {
    let lh = height_bound.significant_bits().max(1) as f64;
    let k = if complex { 2.0 } else { 1.0 };
    ((degree as f64 + 1.0) * lh / k + 16.0).ceil() as u32
}

/// Tries degrees 1..=degree_bound in turn, stopping with a precision error
/// at the first degree the precision cannot decide; a candidate must have height
/// ≤ height_bound, residual below 2^{−prec/2} (relative), and still vanish
/// to 2^{−prec} when x is recomputed at 2·prec by `recompute`.
pub fn recognize_algebraic(
    x: &BigComplex,
    degree_bound: usize,
    height_bound: &Integer,
    prec_bits: u32,
    recompute: &dyn Fn(u32) -> Result<BigComplex>,
) -> Result<Option<RecognitionResult>> {
    if degree_bound == 0 {
        return invalid("degree bound must be positive");
    }
    let thresh = 2f64.powi(-(prec_bits as i32) / 2);
    if x.err >= thresh {
        return Err(Error::Precision(format!("input error {:.3e} exceeds 2^-{}; raise the precision", x.err, prec_bits / 2)));
    }
    let complex = x.im.clone().abs().to_f64() > thresh;
    let xr = if complex { x.clone() } else { BigComplex::real(x.re.clone()) };
    let bits = prec_bits.saturating_sub(16);
    let mut hi: Option<BigComplex> = None;
    for d in 1..=degree_bound {
        let need = required_bits(d, height_bound, complex);
        if need > prec_bits {
            return Err(Error::Precision(format!(
                "no relation of degree < {d}; excluding degree {d} with height ≤ {height_bound} needs at least {need} bits (have {prec_bits})"
            )));
        }
        let poly = algdep(&xr, d, bits);
        if poly.len() < 2 {
            continue;
        }
        let height = poly.iter().map(|c| c.clone().abs()).max().unwrap();
        if height > *height_bound {
            continue;
        }
        let (v, scale) = eval_int_poly(&poly, &xr);
        let residual = v.mag();
        if residual > thresh * scale.max(1.0) {
            continue;
        }
        if hi.is_none() {
            hi = Some(recompute(2 * prec_bits)?);
        }
        let xh = hi.as_ref().unwrap();
        let (vh, scale_h) = eval_int_poly(&poly, xh);
        let verified = vh.mag();
        if verified > 2f64.powi(-(prec_bits as i32)) * scale_h.max(1.0) {
            continue;
        }
        return Ok(Some(RecognitionResult { minpoly: poly, residual, verified_residual: verified, height }));
    }
    Ok(None)
}
