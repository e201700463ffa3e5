//! Kronecker–Eisenstein series
//!
//!   K^{p,q}(z, Γ, s) = p! Σ_{λ∈Γ} conj(z+λ)^q / ((z+λ)^{p+1} |z+λ|^{2s})
//!
//! and the N-variable products K^{I,J}(z, Λ, 0).
//!
//! `ke_accel` splits the Mellin integral at t = 1 and applies Poisson
//! summation to the small-t half; `ke_direct` sums the series where it is
//! absolutely convergent, row by row in closed form for integral s.

use crate::error::{invalid, Error, Result};
use crate::field::{QuadElem, QuadIdeal};
use crate::lattice::{coset_reps, diag_lattice, KVec, OLattice};
use crate::numerics::{
    bernoulli_numbers, gaussian_tail_bound, gaussian_tail_radius, unit_round, upper_incomplete_gamma, BigComplex, CellShape,
    Tolerance,
};
use dashmap::DashMap;
use rayon::prelude::*;
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// A lattice Z w1 + Z w2 in C with Im(w2/w1) > 0.
#[derive(Clone, Debug)]
pub struct Lattice1D {
    pub w1: BigComplex,
    pub w2: BigComplex,
    pub covol: Float,
}

impl Lattice1D {
    pub fn new(w1: BigComplex, w2: BigComplex) -> Result<Self> {
        let p = w1.prec().max(w2.prec());
        let cross = Float::with_val(p, &w1.re * &w2.im) - Float::with_val(p, &w1.im * &w2.re);
        let (w1, w2, covol) = if cross.is_zero() || !cross.is_finite() {
            return invalid("degenerate lattice basis");
        } else if cross < 0 {
            (w1, -&w2, -cross)
        } else {
            (w1, w2, cross)
        };
        let lat = Lattice1D { w1, w2, covol };
        Ok(lat.reduced())
    }

    /// σ(𝔠) for a fractional ideal, from an exactly reduced Z-basis.
    pub fn from_ideal(ideal: &QuadIdeal, prec: u32) -> Self {
        let (b1, b2) = reduced_ideal_basis(ideal);
        let w1 = b1.embed(prec);
        let w2 = b2.embed(prec);
        let p = prec;
        let cross = Float::with_val(p, &w1.re * &w2.im) - Float::with_val(p, &w1.im * &w2.re);
        Lattice1D { w1, w2, covol: cross }
    }

    pub fn prec(&self) -> u32 {
        self.w1.prec()
    }

    pub fn shape(&self) -> CellShape {
        CellShape::from_basis(self.w1.to_f64(), self.w2.to_f64())
    }

    /// Lagrange reduction with orientation kept.
    pub fn reduced(&self) -> Self {
        let mut w1 = self.w1.clone();
        let mut w2 = self.w2.clone();
        for _ in 0..200 {
            let n1 = w1.abs2().to_f64();
            let n2 = w2.abs2().to_f64();
            if n2 < n1 {
                let t = w1;
                w1 = w2;
                w2 = -&t;
                continue;
            }
            let (a, b) = (w1.to_f64(), w2.to_f64());
            let k = ((a.0 * b.0 + a.1 * b.1) / n1).round();
            if k == 0.0 {
                break;
            }
            w2 = &w2 - &w1.mul_int(k as i64);
        }
        Lattice1D { w1, w2, covol: self.covol.clone() }
    }

    /// Basis μ1, μ2 of the dual lattice for ⟨w, μ⟩ = Re(w·conj μ).
    pub fn dual_basis(&self) -> (BigComplex, BigComplex) {
        // rows (Re w_i, Im w_i); μ_j = column j of the inverse
        let p = self.prec();
        let (a, b, c, d) = (&self.w1.re, &self.w1.im, &self.w2.re, &self.w2.im);
        let det = Float::with_val(p, a * d) - Float::with_val(p, b * c);
        let mu1 = BigComplex::new(Float::with_val(p, d / &det), Float::with_val(p, -c.clone() / &det));
        let mu2 = BigComplex::new(Float::with_val(p, -b.clone() / &det), Float::with_val(p, a / &det));
        let e = (self.w1.err + self.w2.err) * 4.0 / det.to_f64().abs().powi(2) * (self.w1.mag() + self.w2.mag())
            + 8.0 * unit_round(p) * (mu1.mag() + mu2.mag());
        (mu1.with_err(e), mu2.with_err(e))
    }

    /// Lattice points x + a w1 + b w2 with |·| ≤ r, in a fixed order.
    fn points_within(&self, x: &BigComplex, r: f64) -> Vec<BigComplex> {
        let (w1, w2) = (self.w1.to_f64(), self.w2.to_f64());
        let area = self.covol.to_f64();
        let xf = x.to_f64();
        let xa = (xf.0 * xf.0 + xf.1 * xf.1).sqrt();
        let rr = r + xa;
        let b1 = (rr * (w2.0.hypot(w2.1)) / area).ceil() as i64 + 1;
        let b2 = (rr * (w1.0.hypot(w1.1)) / area).ceil() as i64 + 1;
        let mut out = Vec::new();
        for a in -b1..=b1 {
            for b in -b2..=b2 {
                let px = xf.0 + a as f64 * w1.0 + b as f64 * w2.0;
                let py = xf.1 + a as f64 * w1.1 + b as f64 * w2.1;
                if px.hypot(py) <= r * (1.0 + 1e-9) + 1e-12 {
                    out.push(&(x + &self.w1.mul_int(a)) + &self.w2.mul_int(b));
                }
            }
        }
        out
    }

    /// z minus the nearest-ish lattice point (rounded coordinates).
    fn reduce_point(&self, z: &BigComplex) -> BigComplex {
        let (w1, w2) = (self.w1.to_f64(), self.w2.to_f64());
        let zf = z.to_f64();
        let det = w1.0 * w2.1 - w1.1 * w2.0;
        let c1 = (zf.0 * w2.1 - zf.1 * w2.0) / det;
        let c2 = (w1.0 * zf.1 - w1.1 * zf.0) / det;
        let (k1, k2) = (c1.round() as i64, c2.round() as i64);
        &(z - &self.w1.mul_int(k1)) - &self.w2.mul_int(k2)
    }
}

/// Exact Lagrange-reduced Z-basis (b1, b2) of an ideal, Im(b2/b1) > 0.
pub fn reduced_ideal_basis(ideal: &QuadIdeal) -> (QuadElem, QuadElem) {
    let g = ideal.gen.clone();
    let mut b1 = g.clone();
    let mut b2 = &g * &g.field().omega();
    // inner product Re(x conj y) = tr(x ȳ)/2
    let ip = |x: &QuadElem, y: &QuadElem| (x * &y.conj()).trace() / 2u32;
    loop {
        if b2.norm() < b1.norm() {
            let t = b1;
            b1 = b2;
            b2 = -t;
            continue;
        }
        let mu = ip(&b1, &b2) / b1.norm();
        let k = Integer::from(Rational::from(&mu + Rational::from((1, 2))).floor_ref());
        if k == 0 {
            break;
        }
        b2 = &b2 - &b1.scale(&Rational::from(k));
    }
    (b1, b2)
}

#[derive(Clone, Debug)]
pub struct KEKey {
    pub p: u32,
    pub q: u32,
    pub z: BigComplex,
    pub lat: Lattice1D,
    /// Real s only.
    pub s: Float,
    pub prec: u32,
}

impl KEKey {
    pub fn at_zero(p: u32, q: u32, z: BigComplex, lat: Lattice1D, prec: u32) -> Self {
        KEKey { p, q, z, lat, s: Float::new(prec), prec }
    }
}

fn factorial(n: u32, prec: u32) -> Float {
    let mut f = Float::with_val(prec, 1);
    for k in 2..=n {
        f *= k;
    }
    f
}

/// x^e for x real positive (as a BigComplex) and real e.
fn pow_real(x: &BigComplex, e: &Float) -> BigComplex {
    if e.is_integer() && e.to_f64().abs() < 4096.0 {
        return x.powi(e.to_f64() as i64);
    }
    let p = x.prec();
    let lx = Float::with_val(p, x.re.ln_ref());
    let v = Float::with_val(p, (lx * e).exp_ref());
    let xf = x.re.to_f64();
    let rel = e.to_f64().abs() * x.err / xf;
    let err = v.to_f64().abs() * (rel.exp_m1() + 8.0 * unit_round(p) * (1.0 + e.to_f64().abs() * xf.ln().abs()));
    BigComplex::real(v).with_err(err)
}

/// Γ(a, x) at a ball argument: midpoint value plus a derivative bound.
fn gamma_ball(a: &Float, x: &BigComplex, prec: u32) -> Result<BigComplex> {
    let g = upper_incomplete_gamma(a, &x.re, prec)?;
    if x.err == 0.0 {
        return Ok(g);
    }
    let xl = (x.re.to_f64() - x.err).max(1e-300);
    let deriv = ((a.to_f64() - 1.0) * xl.ln() - xl).exp();
    Ok(g.with_err(deriv * x.err * 1.01))
}

fn ln_gaussian_prefactor(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        -700.0
    }
}

/// Analytically continued K^{p,q}(z, Γ, s).
pub fn ke_accel(key: &KEKey, eps: &Tolerance) -> Result<BigComplex> {
    let prec = key.prec;
    let (p, q) = (key.p, key.q);
    let sf = key.s.to_f64();
    let sigma_f = sf + p as f64 + 1.0;
    if sigma_f <= 0.0 {
        return invalid("ke_accel needs s + p + 1 > 0");
    }
    let guard = 24 + (p + q) * 2;
    let wp = prec + guard;
    let lat = key.lat.reduced();
    let lat = Lattice1D {
        w1: lat.w1.clone().with_prec(wp),
        w2: lat.w2.clone().with_prec(wp),
        covol: Float::with_val(wp, &lat.covol),
    };
    let z = lat.reduce_point(&key.z.clone().with_prec(wp));
    let area = lat.covol.to_f64();
    let m = p + q + 1;
    let s = Float::with_val(wp, &key.s);
    let sigma = Float::with_val(wp, &s + (p + 1));
    let pi = BigComplex::pi(wp);
    let pf = pi.re.to_f64();

    // prefactor p!/Γ(σ)
    let gs = Float::with_val(wp, sigma.gamma_ref());
    let pref = Float::with_val(wp, &factorial(p, wp) / &gs);
    let pref_f = pref.to_f64().abs();

    let margin = 2f64.powi(-(prec as i32) / 2);
    let deg = m.saturating_sub(2);

    // part 1: Σ conj(w)^m |w|^{-2σ} Γ(σ, π|w|²/A)
    let c1 = pf / area;
    let shape1 = lat.shape();
    let b1 = pref_f * 2.0 * c1.powf(sigma_f - 1.0);
    let mut r1 = gaussian_tail_radius(c1, &shape1, eps.eps / (4.0 * b1.max(1e-300)), deg);
    r1 = r1.max((2.0 * (sigma_f - 1.0).max(0.0) / c1).sqrt()).max(1.0) * eps.radius_scale;
    let pts = lat.points_within(&z, r1);
    let c1b = (&pi / &BigComplex::real(lat.covol.clone())).with_err(0.0);
    let sigma_ball = sigma.clone();
    let terms1: Vec<Result<BigComplex>> = pts
        .par_iter()
        .map(|w| {
            let n2 = {
                let t = w * &w.conj();
                BigComplex { im: Float::new(wp), ..t }
            };
            if n2.re.to_f64().sqrt() < margin {
                return Err(Error::Singular("z is within the singularity margin of the lattice".into()));
            }
            let x = &c1b * &n2;
            let g = gamma_ball(&sigma_ball, &x, wp)?;
            let inv = pow_real(&n2, &Float::with_val(wp, -&sigma_ball));
            Ok(&(&w.conj().powi(m as i64) * &g) * &inv)
        })
        .collect();
    let mut sum1 = BigComplex::zero(wp);
    for t in terms1 {
        sum1 = &sum1 + &t?;
    }
    let trunc1 = b1 * gaussian_tail_bound(c1, &shape1, r1, deg);

    // part 2: (1/A)(-i)^m π^{m+1} Σ_{μ≠0} conj(μ)^m e^{2πi⟨z,μ⟩} (π²|μ|²)^{σ-m-1} Γ(m+1-σ, πA|μ|²)
    let (mu1, mu2) = lat.dual_basis();
    let dual = Lattice1D { w1: mu1, w2: mu2, covol: Float::with_val(wp, 1 / &lat.covol) };
    let c2 = pf * area;
    let shape2 = dual.shape();
    let a2 = Float::with_val(wp, (m + 1) as f64 - 0.0) - &sigma;
    let a2f = a2.to_f64();
    let ln_b2 = ln_gaussian_prefactor(pref_f) + (m as f64 + 1.0) * pf.ln() - area.ln() + 2f64.ln()
        + (2.0 * sigma_f - 2.0 * m as f64 - 2.0) * pf.ln()
        + (m as f64 - sigma_f) * (pf * area).ln();
    let b2 = ln_b2.exp();
    let mut r2 = gaussian_tail_radius(c2, &shape2, eps.eps / (4.0 * b2.max(1e-300)), deg);
    r2 = r2.max((2.0 * (a2f - 1.0).max(0.0) / c2).sqrt()).max(1e-3) * eps.radius_scale;
    let zero = BigComplex::zero(wp);
    let dual_pts: Vec<BigComplex> = dual
        .points_within(&zero, r2)
        .into_iter()
        .filter(|mu| !(mu.re.is_zero() && mu.im.is_zero()))
        .collect();
    let area_b = BigComplex::real(lat.covol.clone());
    let c2b = &pi * &area_b;
    let pi2 = pi.square();
    let e2 = Float::with_val(wp, &sigma - (m + 1));
    let two_pi = pi.mul_int(2);
    let terms2: Vec<Result<BigComplex>> = dual_pts
        .par_iter()
        .map(|mu| {
            let n2 = {
                let t = mu * &mu.conj();
                BigComplex { im: Float::new(wp), ..t }
            };
            let x = &c2b * &n2;
            let g = gamma_ball(&a2, &x, wp)?;
            let pw = pow_real(&(&pi2 * &n2), &e2);
            // ⟨z, μ⟩ reduced mod 1
            let t = {
                let v = Float::with_val(wp, &z.re * &mu.re) + Float::with_val(wp, &z.im * &mu.im);
                let fl = Float::with_val(wp, v.floor_ref());
                let fr = v - fl;
                let e = z.mag() * mu.err + mu.mag() * z.err + 4.0 * unit_round(wp) * (z.mag() * mu.mag() + 1.0);
                BigComplex::real(fr).with_err(e)
            };
            let ang = &two_pi * &t;
            let phase = BigComplex { re: Float::new(wp), im: ang.re.clone(), err: ang.err }.exp();
            let term = &(&(&mu.conj().powi(m as i64) * &phase) * &pw) * &g;
            Ok(term)
        })
        .collect();
    let mut sum2 = BigComplex::zero(wp);
    for t in terms2 {
        sum2 = &sum2 + &t?;
    }
    let trunc2 = b2 * gaussian_tail_bound(c2, &shape2, r2, deg);
    // (-i)^m π^{m+1} / A
    let mut rot = BigComplex::one(wp);
    for _ in 0..(m % 4) {
        rot = -&rot.mul_i();
    }
    let f2 = &(&rot * &pi.powi(m as i64 + 1)) / &area_b;
    let total = &sum1 + &(&sum2 * &f2);
    let pref_b = BigComplex::real(pref).with_err(pref_f * 16.0 * unit_round(wp));
    let out = (&total * &pref_b).with_err(trunc1 + trunc2);
    Ok(out.with_prec(prec))
}

fn gbinom(n: i64, k: i64) -> Rational {
    if k < 0 {
        return Rational::new();
    }
    let mut r = Rational::from(1);
    for i in 0..k {
        r *= n - i;
        r /= i + 1;
    }
    r
}

/// Eulerian numbers A(n, 0..n): Σ_{r≥1} r^n x^r = x A_n(x) / (1-x)^{n+1}.
fn eulerian(n: usize) -> Vec<Integer> {
    let mut a = vec![Integer::from(1)];
    for k in 1..=n {
        let mut b = vec![Integer::new(); k];
        for (i, c) in a.iter().enumerate() {
            b[i] += Integer::from(c * (i as u32 + 1));
            if i + 1 < k {
                b[i + 1] += Integer::from(c * (k - 1 - i) as u32);
            }
        }
        a = b;
    }
    a
}

/// Σ_m (m + a)^{-k}; k = 1 is the symmetric sum π cot(πa).
fn row_power_sum(k: u32, a: &BigComplex, cache: &[Vec<Float>]) -> BigComplex {
    let wp = a.prec();
    if a.im.is_sign_negative() && !a.im.is_zero() {
        let v = row_power_sum(k, &-a, cache);
        return if k % 2 == 1 { -&v } else { v };
    }
    let two_pi = BigComplex::pi(wp).mul_int(2);
    let qv = (&two_pi * &a.mul_i()).exp();
    let one = BigComplex::one(wp);
    if k == 1 {
        let pi = BigComplex::pi(wp);
        return &(&pi.mul_i() * &(&qv + &one)) / &(&qv - &one);
    }
    // (-2πi)^k / (k-1)! · q A_{k-1}(q) / (1-q)^k
    let coeffs = &cache[k as usize - 1];
    let mut poly = BigComplex::zero(wp);
    for c in coeffs.iter().rev() {
        poly = &(&poly * &qv) + &BigComplex::real(c.clone());
    }
    let lead = (-&two_pi.mul_i()).powi(k as i64);
    let fact = BigComplex::real(factorial(k - 1, wp));
    let den = (&one - &qv).powi(k as i64);
    &(&(&lead / &fact) * &(&qv * &poly)) / &den
}

/// Hurwitz ζ(s, a) for integer s ≥ 2 and 0 < a ≤ 1, Euler–Maclaurin.
pub fn hurwitz_zeta(s: u32, a: &Float, prec: u32) -> BigComplex {
    let wp = prec + 20;
    let mterms = (prec as usize + 20) / 2 + 4;
    let n = mterms + s as usize + 8;
    let bern = bernoulli_numbers(2 * mterms + 2);
    let a = Float::with_val(wp, a);
    let mut sum = Float::new(wp);
    for k in 0..n {
        let t = Float::with_val(wp, &a + k as u32);
        sum += Float::with_val(wp, t.pow(-(s as i32)));
    }
    let an = Float::with_val(wp, &a + n as u32);
    sum += Float::with_val(wp, an.clone().pow(1 - s as i32)) / (s - 1);
    sum += Float::with_val(wp, an.clone().pow(-(s as i32))) / 2u32;
    // Σ B_{2j}/(2j)! · s(s+1)…(s+2j-2) · (a+N)^{-s-2j+1}
    let mut rising = Float::with_val(wp, s);
    let mut fact = Float::with_val(wp, 2);
    let mut last = Float::new(wp);
    for j in 1..=mterms {
        let b = Float::with_val(wp, &bern[2 * j]);
        let t = Float::with_val(wp, &b * &rising) / &fact * Float::with_val(wp, an.clone().pow(-(s as i32) - 2 * j as i32 + 1));
        sum += &t;
        last = t;
        rising *= (s as usize + 2 * j - 1) as u32;
        rising *= (s as usize + 2 * j) as u32;
        fact *= ((2 * j + 1) * (2 * j + 2)) as u32;
    }
    let err = last.to_f64().abs() * 4.0 + sum.to_f64().abs() * (n as f64 + 4.0 * mterms as f64) * unit_round(wp);
    BigComplex::real(sum).with_err(err).with_prec(prec)
}

/// Series value in its range of absolute convergence (2s + p + 1 − q > 2).
pub fn ke_direct(key: &KEKey, eps: &Tolerance) -> Result<BigComplex> {
    let (p, q) = (key.p as i64, key.q as i64);
    let sf = key.s.to_f64();
    let kappa = 2.0 * sf + p as f64 + 1.0 - q as f64;
    if kappa <= 2.0 + 1e-9 {
        return invalid(format!("series does not converge absolutely (2s+p+1-q = {kappa})"));
    }
    if key.s.is_integer() && sf.abs() < 64.0 {
        ke_direct_rows(key, eps)
    } else {
        ke_direct_brute(key, eps)
    }
}

fn ke_direct_rows(key: &KEKey, eps: &Tolerance) -> Result<BigComplex> {
    let prec = key.prec;
    let (p, q) = (key.p as i64, key.q as i64);
    let s = key.s.to_f64() as i64;
    let big_a = p + 1 + s;
    let big_b = s - q;
    let kmax = (big_a.max(big_b) + big_a + big_b) as usize + 2;
    let wp = prec + 32 + 4 * kmax as u32;
    let lat = key.lat.reduced();
    let w1 = lat.w1.clone().with_prec(wp);
    let w2 = lat.w2.clone().with_prec(wp);
    let z = Lattice1D { w1: w1.clone(), w2: w2.clone(), covol: Float::with_val(wp, &lat.covol) }.reduce_point(&key.z.clone().with_prec(wp));
    let margin = 2f64.powi(-(prec as i32) / 2);
    let zz = &z / &w1;
    let tau = &w2 / &w1;
    let h = tau.im.to_f64();
    let y0 = zz.im.to_f64();
    let cache: Vec<Vec<Float>> = (0..=kmax).map(|n| eulerian(n).iter().map(|c| Float::with_val(wp, c)).collect()).collect();
    let alpha_c: Vec<Float> = (0..=big_a).map(|k| Float::with_val(wp, &gbinom(-big_b, big_a - k))).collect();
    let beta_c: Vec<Float> = (0..=big_b.max(0)).map(|k| Float::with_val(wp, &gbinom(-big_a, big_b - k))).collect();

    // rows a_n = zz + nτ; the row whose imaginary part is (numerically) zero
    let t = -y0 / h;
    let n_star = t.round() as i64;
    let zero_row = ((zz.im.to_f64() + n_star as f64 * h).abs() < margin).then_some(n_star);

    let two_pi_i = BigComplex::pi(wp).mul_int(2).mul_i();
    let row_value = |n: i64| -> Result<BigComplex> {
        let a = &zz + &tau.mul_int(n);
        if zero_row == Some(n) {
            let y = a.im.to_f64().abs();
            let ar = BigComplex::real(a.re.clone());
            let fr = ar.re.to_f64() - ar.re.to_f64().round();
            if fr.abs() < margin {
                return Err(Error::Singular("z is within the singularity margin of the lattice".into()));
            }
            let kk = (big_a + big_b) as u32;
            let v = row_power_sum(kk, &ar, &cache);
            let slope = kk as f64 * (4.0 + fr.abs().powf(-(kk as f64) - 1.0));
            return Ok(v.with_err(y * slope));
        }
        let b = a.conj();
        let bma = &b - &a;
        let amb = -&bma;
        let mut row = BigComplex::zero(wp);
        let mut alpha1 = BigComplex::zero(wp);
        for k in 1..=big_a {
            let c = &alpha_c[k as usize];
            if c.is_zero() {
                continue;
            }
            let al = bma.powi(-big_b - big_a + k).mul_real(c, 0.0);
            if k >= 2 {
                row = &row + &(&al * &row_power_sum(k as u32, &a, &cache));
            } else {
                alpha1 = al;
            }
        }
        if big_b > 0 {
            for k in 2..=big_b {
                let c = &beta_c[k as usize];
                if c.is_zero() {
                    continue;
                }
                let be = amb.powi(-big_a - big_b + k).mul_real(c, 0.0);
                row = &row + &(&be * &row_power_sum(k as u32, &b, &cache));
            }
            let f1 = &row_power_sum(1, &a, &cache) - &row_power_sum(1, &b, &cache);
            let sg = if a.im.is_sign_negative() { -&two_pi_i } else { two_pi_i.clone() };
            row = &row + &(&alpha1 * &(&f1 + &sg));
        }
        Ok(row)
    };
    // f64 bound on a row at height y, for the truncation
    let row_bound = |y: f64| -> f64 {
        let y = y.abs();
        let qa = (-2.0 * PI * y).exp();
        if qa >= 0.5 {
            return f64::INFINITY;
        }
        let mut tot = 0.0;
        for k in 1..=big_a {
            let c = alpha_c[k as usize].to_f64().abs();
            tot += c * (2.0 * y).powf((-big_b - big_a + k) as f64) * 2.0 * (2.0 * PI).powi(k as i32) * qa / (1.0 - qa).powi(k as i32);
        }
        for k in 1..=big_b.max(0) {
            let c = beta_c[k as usize].to_f64().abs();
            tot += c * (2.0 * y).powf((-big_a - big_b + k) as f64) * 2.0 * (2.0 * PI).powi(k as i32) * qa / (1.0 - qa).powi(k as i32);
        }
        tot
    };
    let tail_from = |y: f64, dir: f64| -> f64 {
        let mut t = 0.0;
        for j in 1..4000 {
            let b = row_bound(y + dir * j as f64 * h);
            t += b;
            if b < 1e-300 || (b < t * 1e-18 && j > 4) {
                break;
            }
        }
        t
    };
    let pre_mag = {
        let w1m = w1.mag();
        factorial(p as u32, 64).to_f64() * w1m.powf(-(big_b + big_a) as f64)
    };
    let target = eps.eps / (8.0 * pre_mag.max(1e-300));
    let mut total = BigComplex::zero(wp);
    total = &total + &row_value(n_star)?;
    for dir in [1i64, -1] {
        let mut n = n_star;
        loop {
            n += dir;
            total = &total + &row_value(n)?;
            let y = y0 + n as f64 * h;
            if (y.abs() > 2.0 * h) && tail_from(y, dir as f64 * h.signum()) < target {
                break;
            }
            if (n - n_star).abs() > 100_000 {
                return Err(Error::Precision("row summation did not converge".into()));
            }
        }
    }
    // contribution of the non-decaying parts of all rows
    let e = big_a + big_b - 1;
    if big_b > 0 || big_a - 1 <= -big_b {
        let c = gbinom(-big_b, big_a - 1);
        if c != 0 {
            let hf = Float::with_val(wp, &tau.im);
            let ratio = Float::with_val(wp, &zz.im / &hf);
            let f = match zero_row {
                Some(_) => Float::new(wp),
                None => {
                    let fl = Float::with_val(wp, ratio.floor_ref());
                    ratio - fl
                }
            };
            let one = Float::with_val(wp, 1);
            let (fa, fb) = if f.is_zero() { (one.clone(), one) } else { (f.clone(), Float::with_val(wp, 1 - &f)) };
            let z1 = hurwitz_zeta(e as u32, &fa, wp);
            let z2 = hurwitz_zeta(e as u32, &fb, wp);
            let sgn = if e % 2 == 0 { 1 } else { -1 };
            let diff = &z1 - &z2.mul_int(sgn);
            // -2πi · c · (-2i)^{-E} h^{-E}
            let m2i = BigComplex::from_f64(0.0, -2.0, wp);
            let hb = BigComplex::real(hf).with_err(tau.err);
            let coef = &(&(-&two_pi_i).mul_real(&Float::with_val(wp, &c), 0.0) * &m2i.powi(-e)) * &hb.powi(-e);
            total = &total + &(&coef * &diff);
        }
    }
    let pref = &(&w1.conj().powi(-big_b) * &w1.powi(-big_a)) * &BigComplex::real(factorial(p as u32, wp));
    let out = (&pref * &total).with_err(eps.eps / 4.0);
    Ok(out.with_prec(prec))
}

fn ke_direct_brute(key: &KEKey, eps: &Tolerance) -> Result<BigComplex> {
    let prec = key.prec;
    let wp = prec + 32;
    let (p, q) = (key.p, key.q);
    let lat = key.lat.reduced();
    let lat = Lattice1D { w1: lat.w1.with_prec(wp), w2: lat.w2.with_prec(wp), covol: Float::with_val(wp, &lat.covol) };
    let z = lat.reduce_point(&key.z.clone().with_prec(wp));
    let kappa = 2.0 * key.s.to_f64() + p as f64 + 1.0 - q as f64;
    let area = lat.covol.to_f64();
    let rho = lat.shape().radius;
    let pf = factorial(p, 64).to_f64();
    // Σ_{|w|>R} |w|^{-κ} ≤ (2π/A)(T^{2-κ}/(κ-2) + ρ T^{1-κ}/(κ-1)), T = R - 2ρ
    let tail = |r: f64| {
        let t = r - 2.0 * rho;
        if t <= 0.0 {
            return f64::INFINITY;
        }
        pf * 2.0 * PI / area * (t.powf(2.0 - kappa) / (kappa - 2.0) + rho * t.powf(1.0 - kappa) / (kappa - 1.0))
    };
    let mut r = 4.0 * rho + 2.0;
    while tail(r) > eps.eps / 2.0 {
        r *= 1.25;
        if r * r / area > 4.0e6 {
            return Err(Error::Precision(format!("direct summation needs radius beyond {r:.0}")));
        }
    }
    let s = Float::with_val(wp, &key.s);
    let pts = lat.points_within(&z, r);
    let terms: Vec<BigComplex> = pts
        .par_iter()
        .map(|w| {
            let n2 = {
                let t = w * &w.conj();
                BigComplex { im: Float::new(wp), ..t }
            };
            let den = &w.powi(p as i64 + 1) * &pow_real(&n2, &s);
            &w.conj().powi(q as i64) / &den
        })
        .collect();
    let mut sum = BigComplex::zero(wp);
    for t in &terms {
        sum = &sum + t;
    }
    let out = sum.mul_real(&factorial(p, wp), 0.0).with_err(tail(r));
    Ok(out.with_prec(prec))
}

pub type MultiIndex = Vec<u32>;

/// Largest ideal 𝔠 with 𝔠 e_k ⊆ Λ.
pub fn coordinate_ideal(l: &OLattice, k: usize) -> QuadIdeal {
    let f = l.field;
    // move coordinate k first; the first two HNF columns span Λ ∩ k e_k
    let m = 2 * l.n;
    let perm: Vec<usize> = [2 * k, 2 * k + 1].into_iter().chain((0..m).filter(|&i| i / 2 != k)).collect();
    let cols = l.zlat().columns();
    let pc: Vec<Vec<Rational>> = cols.iter().map(|c| perm.iter().map(|&i| c[i].clone()).collect()).collect();
    let z = crate::lattice::ZLattice::from_rational_columns(m, &pc).unwrap();
    let c = z.columns();
    let x1 = f.elem(c[0][0].clone(), c[0][1].clone());
    let x2 = f.elem(c[1][0].clone(), c[1][1].clone());
    let den = Integer::from(x1.denominator().lcm_ref(&x2.denominator()));
    let dr = Rational::from(den);
    let g = crate::field::gcd(&x1.scale(&dr), &x2.scale(&dr));
    QuadIdeal::new(g.scale(&dr.recip())).unwrap()
}

/// K^{I,J}(z, Λ, 0) via the coset decomposition over ⊕ 𝔠_k e_k.
pub fn ke_product(
    z: &[BigComplex],
    l: &OLattice,
    i: &[u32],
    j: &[u32],
    sub_ideals: Option<&[QuadIdeal]>,
    prec: u32,
    eps: &Tolerance,
) -> Result<BigComplex> {
    let n = l.n;
    if z.len() != n || i.len() != n || j.len() != n {
        return invalid("dimension mismatch in ke_product");
    }
    let ideals: Vec<QuadIdeal> = match sub_ideals {
        Some(c) => {
            for (k, ck) in c.iter().enumerate() {
                let mut v: KVec = vec![l.field.zero(); n];
                v[k] = ck.gen.clone();
                let mut vw = v.clone();
                vw[k] = &ck.gen * &l.field.omega();
                if !l.contains(&v) || !l.contains(&vw) {
                    return invalid(format!("sub-ideal {ck} e_{k} is not inside the lattice"));
                }
            }
            c.to_vec()
        }
        None => (0..n).map(|k| coordinate_ideal(l, k)).collect(),
    };
    let sub = diag_lattice(&ideals);
    let reps = coset_reps(&sub, l)?;
    let lats: Vec<Lattice1D> = ideals.iter().map(|c| Lattice1D::from_ideal(c, prec + 16)).collect();
    let terms: Vec<Result<BigComplex>> = reps
        .par_iter()
        .map(|lam| {
            let mut prod = BigComplex::one(prec + 16);
            for k in 0..n {
                let zk = &z[k].clone().with_prec(prec + 16) + &lam[k].embed(prec + 16);
                let key = KEKey::at_zero(i[k], j[k], zk, lats[k].clone(), prec + 16);
                let v = ke_accel(&key, eps).map_err(|e| match e {
                    Error::Singular(_) => Error::GeneralPosition(format!("coordinate {k} meets the lattice hyperplane")),
                    other => other,
                })?;
                prod = &prod * &v;
            }
            Ok(prod)
        })
        .collect();
    let mut sum = BigComplex::zero(prec + 16);
    for t in terms {
        sum = &sum + &t?;
    }
    Ok(sum.with_prec(prec))
}

/// Exact key for memoisation: z reduced modulo the ideal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeExactKey {
    pub p: u32,
    pub q: u32,
    pub z: QuadElem,
    pub ideal: QuadIdeal,
    pub prec: u32,
    pub eps_bits: u64,
}

impl KeExactKey {
    /// Canonical text used as the persistent cache key.
    pub fn canonical(&self) -> String {
        format!(
            "ke/v1/d={}/p={}/q={}/s=0/z={}/lat={}/prec={}/eps={:016x}",
            self.z.d, self.p, self.q, self.z, self.ideal.gen, self.prec, self.eps_bits
        )
    }
}

/// Persistent store for series values (implemented by the CLI cache).
pub trait KeStore: Send + Sync {
    fn get(&self, key: &str) -> Option<BigComplex>;
    fn put(&self, key: &str, value: &BigComplex);
}

/// Evaluates K^{p,q}(z, σ(𝔠), 0) for exact z with an in-memory memo and an
/// optional persistent store.
pub struct Evaluator {
    pub prec: u32,
    pub eps: Tolerance,
    memo: DashMap<KeExactKey, BigComplex>,
    store: Option<Arc<dyn KeStore>>,
    lattices: DashMap<QuadIdeal, Lattice1D>,
    pub evaluations: AtomicU64,
    pub memo_hits: AtomicU64,
    pub store_hits: AtomicU64,
}

impl Evaluator {
    pub fn new(prec: u32, eps: f64) -> Result<Self> {
        crate::numerics::check_prec(prec)?;
        Ok(Evaluator {
            prec,
            eps: Tolerance::new(eps, prec)?,
            memo: DashMap::new(),
            store: None,
            lattices: DashMap::new(),
            evaluations: AtomicU64::new(0),
            memo_hits: AtomicU64::new(0),
            store_hits: AtomicU64::new(0),
        })
    }

    pub fn with_store(mut self, store: Arc<dyn KeStore>) -> Self {
        self.store = Some(store);
        self
    }

    pub fn key(&self, p: u32, q: u32, z: &QuadElem, ideal: &QuadIdeal) -> KeExactKey {
        KeExactKey { p, q, z: ideal.reduce(z), ideal: ideal.clone(), prec: self.prec, eps_bits: self.eps.eps.to_bits() }
    }

    pub fn ke_exact(&self, p: u32, q: u32, z: &QuadElem, ideal: &QuadIdeal) -> Result<BigComplex> {
        let key = self.key(p, q, z, ideal);
        if let Some(v) = self.memo.get(&key) {
            self.memo_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v.clone());
        }
        if let Some(store) = &self.store {
            if let Some(v) = store.get(&key.canonical()) {
                self.store_hits.fetch_add(1, Ordering::Relaxed);
                self.memo.insert(key, v.clone());
                return Ok(v);
            }
        }
        if key.z.is_zero() {
            return Err(Error::GeneralPosition(format!("{z} lies in the lattice {ideal}")));
        }
        let lat = self
            .lattices
            .entry(ideal.clone())
            .or_insert_with(|| Lattice1D::from_ideal(ideal, self.prec + 16))
            .clone();
        let zc = key.z.embed(self.prec + 16);
        let v = ke_accel(&KEKey::at_zero(p, q, zc, lat, self.prec), &self.eps)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if let Some(store) = &self.store {
            store.put(&key.canonical(), &v);
        }
        self.memo.insert(key, v.clone());
        Ok(v)
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }
}

/// π as a float, for callers that want it at the evaluator's precision.
pub fn pi_float(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

pub fn embed_vec(v: &KVec, prec: u32) -> Vec<BigComplex> {
    v.iter().map(|x| x.embed(prec)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::QuadField;

    fn zi(prec: u32) -> Lattice1D {
        Lattice1D::new(BigComplex::one(prec), BigComplex::i(prec)).unwrap()
    }

    fn tol(e: f64, p: u32) -> Tolerance {
        Tolerance::new(e, p).unwrap()
    }

    #[test]
    fn symmetric_zero() {
        let p = 128;
        let key = KEKey::at_zero(2, 0, BigComplex::from_f64(0.5, 0.0, p), zi(p), p);
        let v = ke_accel(&key, &tol(1e-30, p)).unwrap();
        assert!(v.mag() < 1e-30, "{v}");
        let d = ke_direct(&key, &tol(1e-30, p)).unwrap();
        assert!(d.mag() < 1e-30, "{d}");
    }

    #[test]
    fn accel_matches_direct_at_two() {
        let p = 160;
        let z = BigComplex::from_f64(0.3123, 0.2178, p);
        for &(pp, qq) in &[(2, 0), (3, 0), (3, 1), (4, 2), (0, 0), (1, 1)] {
            let key = KEKey { p: pp, q: qq, z: z.clone(), lat: zi(p), s: Float::with_val(p, 2), prec: p };
            let a = ke_accel(&key, &tol(1e-36, p)).unwrap();
            let b = ke_direct(&key, &tol(1e-36, p)).unwrap();
            assert!(a.dist(&b) < 1e-34, "({pp},{qq}): {a} vs {b}");
        }
    }

    #[test]
    fn oblique_lattice() {
        let p = 160;
        let lat = Lattice1D::new(BigComplex::from_f64(1.3, 0.2, p), BigComplex::from_f64(0.4, 1.1, p)).unwrap();
        let z = BigComplex::from_f64(0.3123, 0.2178, p);
        for &(pp, qq, s) in &[(3u32, 1u32, 2i32), (1, 0, 3), (0, 0, 2)] {
            let key = KEKey { p: pp, q: qq, z: z.clone(), lat: lat.clone(), s: Float::with_val(p, s), prec: p };
            let a = ke_accel(&key, &tol(1e-36, p)).unwrap();
            let b = ke_direct(&key, &tol(1e-36, p)).unwrap();
            assert!(a.dist(&b) < 1e-34, "({pp},{qq},{s}): {a} vs {b}");
        }
    }

    #[test]
    fn half_integer_s_brute() {
        let p = 96;
        let z = BigComplex::from_f64(0.21, 0.37, p);
        let key = KEKey { p: 4, q: 0, z, lat: zi(p), s: Float::with_val(p, 2.5), prec: p };
        let a = ke_accel(&key, &tol(1e-20, p)).unwrap();
        let b = ke_direct(&key, &tol(1e-9, p)).unwrap();
        assert!(a.dist(&b) < 2e-9, "{a} vs {b}");
    }

    #[test]
    fn hurwitz_values() {
        let p = 128;
        let z = hurwitz_zeta(2, &Float::with_val(p, 1), p);
        let pi = pi_float(p);
        let want = Float::with_val(p, pi.square_ref()) / 6;
        assert!(Float::with_val(p, &z.re - &want).abs() < 1e-35);
        let h = hurwitz_zeta(3, &Float::with_val(p, 0.5), p);
        // ζ(3, 1/2) = 7 ζ(3)
        let z3 = hurwitz_zeta(3, &Float::with_val(p, 1), p);
        assert!(Float::with_val(p, &h.re - Float::with_val(p, &z3.re * 7)).abs() < 1e-33);
    }

    #[test]
    fn coordinate_ideal_of_lambda() {
        let f = QuadField::new(-1).unwrap();
        let j = QuadIdeal::new(f.elem(1, 1)).unwrap();
        let l = crate::lattice::lambda_of_ideal(&j, 2);
        assert_eq!(coordinate_ideal(&l, 0), j.inverse());
        assert_eq!(coordinate_ideal(&l, 1), QuadIdeal::unit(f));
    }
}
