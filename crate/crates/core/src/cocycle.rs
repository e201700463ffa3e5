//! Generalized Dedekind sums and the smoothed Eisenstein cocycle.
//!
//! Coefficient convention: for A = (γ_1 e_1 | … | γ_N e_1),
//!   P((A^{-1})^T x) = Σ c_I x^I,   Q̄(conj(A) z̄) = Σ d_J z̄^J,
//! and Φ = Σ c_I d_J D_𝔭^{I,J}(v, A, Λ(𝔍)).  The matching action on
//! coefficients is γ·(P, Q̄) = (P(γ^T x), Q̄(conj(γ^{-1}) z̄)).

use crate::error::{invalid, Error, Result};
use crate::field::{QuadElem, QuadField, QuadIdeal};
use rand::Rng;
use crate::kronecker::{ke_product, Evaluator, MultiIndex};
use crate::lattice::{
    apply_matrix, coset_reps, in_gamma0, kmat, lambda_coordinate_ideals, lambda_of_ideal, lies_in_translate, GroupElement, KMat,
    KVec,
};
use crate::numerics::BigComplex;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;

/// Coefficients of an `MPoly`: exact field elements or complex balls.
pub trait Coef: Clone + Send + Sync + fmt::Debug {
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn mul_elem(&self, x: &QuadElem) -> Self;
    fn to_complex(&self, prec: u32) -> BigComplex;
}

impl Coef for QuadElem {
    fn is_zero(&self) -> bool {
        QuadElem::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul_elem(&self, x: &QuadElem) -> Self {
        self * x
    }
    fn to_complex(&self, prec: u32) -> BigComplex {
        self.embed(prec)
    }
}

impl Coef for BigComplex {
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero() && self.err == 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul_elem(&self, x: &QuadElem) -> Self {
        self * &x.embed(self.prec())
    }
    fn to_complex(&self, prec: u32) -> BigComplex {
        self.clone().with_prec(prec)
    }
}

/// Homogeneous polynomial in x_1..x_N (or in the conjugates when
/// `conjugated` is set).
#[derive(Clone, Debug)]
pub struct MPoly<C: Coef> {
    pub n_vars: usize,
    pub degree: u32,
    pub conjugated: bool,
    terms: BTreeMap<MultiIndex, C>,
}

impl<C: Coef> MPoly<C> {
    pub fn new(n_vars: usize, degree: u32, conjugated: bool) -> Self {
        MPoly { n_vars, degree, conjugated, terms: BTreeMap::new() }
    }

    pub fn monomial(exps: MultiIndex, coef: C, conjugated: bool) -> Self {
        let mut p = MPoly::new(exps.len(), exps.iter().sum(), conjugated);
        p.add_term(exps, coef).unwrap();
        p
    }

    pub fn add_term(&mut self, exps: MultiIndex, coef: C) -> Result<()> {
        if exps.len() != self.n_vars {
            return invalid(format!("monomial has {} variables, expected {}", exps.len(), self.n_vars));
        }
        if exps.iter().sum::<u32>() != self.degree {
            return invalid(format!("monomial {exps:?} is not of degree {}", self.degree));
        }
        let v = match self.terms.remove(&exps) {
            Some(old) => old.add(&coef),
            None => coef,
        };
        if !v.is_zero() {
            self.terms.insert(exps, v);
        }
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &MPoly<C>) -> Result<MPoly<C>> {
        if o.n_vars != self.n_vars || o.degree != self.degree || o.conjugated != self.conjugated {
            return invalid("adding polynomials of different shape");
        }
        let mut out = self.clone();
        for (e, c) in o.terms() {
            out.add_term(e.clone(), c.clone())?;
        }
        Ok(out)
    }

    /// x ↦ P(Mx); conjugated polynomials substitute conj(M).
    pub fn matrix_substitute(&self, m: &KMat) -> Result<MPoly<C>> {
        let n = self.n_vars;
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return invalid("substitution matrix has the wrong size");
        }
        let m = if self.conjugated { kmat::conj(m) } else { m.clone() };
        let mut out = MPoly::new(n, self.degree, self.conjugated);
        for (e, c) in self.terms() {
            let mut cur: BTreeMap<MultiIndex, C> = BTreeMap::new();
            cur.insert(vec![0; n], c.clone());
            for (k, &ek) in e.iter().enumerate() {
                for _ in 0..ek {
                    let mut next: BTreeMap<MultiIndex, C> = BTreeMap::new();
                    for (ee, cc) in &cur {
                        for j in 0..n {
                            if m[k][j].is_zero() {
                                continue;
                            }
                            let mut ne = ee.clone();
                            ne[j] += 1;
                            let t = cc.mul_elem(&m[k][j]);
                            let v = match next.remove(&ne) {
                                Some(old) => old.add(&t),
                                None => t,
                            };
                            next.insert(ne, v);
                        }
                    }
                    cur = next;
                }
            }
            for (ee, cc) in cur {
                out.add_term(ee, cc)?;
            }
        }
        Ok(out)
    }
}

impl<C: Coef + fmt::Display> fmt::Display for MPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let var = if self.conjugated { "zb" } else { "x" };
        let parts: Vec<String> = self
            .terms()
            .map(|(e, c)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| if k == 1 { format!("{var}{}", i + 1) } else { format!("{var}{}^{k}", i + 1) })
                    .collect();
                if mono.is_empty() {
                    format!("({c})")
                } else {
                    format!("({c})*{}", mono.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// P ⊗ Q̄ with P holomorphic of degree p and Q̄ conjugated of degree q.
#[derive(Clone, Debug)]
pub struct MPolyPair<C: Coef> {
    pub p: MPoly<C>,
    pub qbar: MPoly<C>,
}

impl<C: Coef> MPolyPair<C> {
    pub fn new(p: MPoly<C>, qbar: MPoly<C>) -> Result<Self> {
        if p.conjugated || !qbar.conjugated {
            return invalid("expected a holomorphic P and a conjugated Q");
        }
        if p.n_vars != qbar.n_vars {
            return invalid("P and Q have different numbers of variables");
        }
        Ok(MPolyPair { p, qbar })
    }

    pub fn n_vars(&self) -> usize {
        self.p.n_vars
    }

    /// γ·(P, Q̄) = (P(γ^T x), Q̄(conj(γ^{-1}) z̄)).
    pub fn act(&self, g: &GroupElement) -> Result<Self> {
        Ok(MPolyPair { p: self.p.matrix_substitute(&kmat::transpose(&g.mat))?, qbar: self.qbar.matrix_substitute(&g.inverse().mat)? })
    }
}

#[derive(Clone, Debug)]
pub struct DedekindKey {
    pub i: MultiIndex,
    pub j: MultiIndex,
    pub z: KVec,
    pub a: KMat,
    pub base: QuadIdeal,
    pub smooth: Option<QuadIdeal>,
}

fn check_endomorphism(a: &KMat, base: &QuadIdeal) -> Result<()> {
    let lam = lambda_of_ideal(base, a.len());
    if !apply_matrix(a, &lam)?.is_sublattice_of(&lam) {
        return invalid(format!("{} does not preserve Λ({base})", kmat::fmt(a)));
    }
    Ok(())
}

/// D^{I,J}(z, A, Λ(𝔍)) for several (I, J) sharing one coset loop.
pub fn dedekind_sums(pairs: &[(MultiIndex, MultiIndex)], z: &KVec, a: &KMat, base: &QuadIdeal, ev: &Evaluator) -> Result<Vec<BigComplex>> {
    let n = z.len();
    let prec = ev.prec;
    if a.len() != n || pairs.iter().any(|(i, j)| i.len() != n || j.len() != n) {
        return invalid("dimension mismatch in Dedekind sum");
    }
    let det = kmat::det(a);
    if det.is_zero() {
        return Ok(vec![BigComplex::zero(prec); pairs.len()]);
    }
    check_endomorphism(a, base)?;
    let lam = lambda_of_ideal(base, n);
    let reps = coset_reps(&apply_matrix(a, &lam)?, &lam)?;
    let ainv = kmat::inverse(a)?;
    let ideals = lambda_coordinate_ideals(base, n);
    let partial: Vec<Result<Vec<BigComplex>>> = reps
        .par_iter()
        .map(|lamv| {
            let shifted: KVec = z.iter().zip(lamv).map(|(x, y)| x + y).collect();
            let w = kmat::mul_vec(&ainv, &shifted);
            for (k, wk) in w.iter().enumerate() {
                if ideals[k].contains(wk) {
                    return Err(Error::GeneralPosition(format!(
                        "coordinate {} of A^-1(z + λ) vanishes modulo {} for λ = ({})",
                        k + 1,
                        ideals[k],
                        lamv.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
                    )));
                }
            }
            pairs
                .iter()
                .map(|(i, j)| {
                    let mut prod = BigComplex::one(prec);
                    for k in 0..n {
                        prod = &prod * &ev.ke_exact(i[k], j[k], &w[k], &ideals[k])?;
                    }
                    Ok(prod)
                })
                .collect()
        })
        .collect();
    let mut sums = vec![BigComplex::zero(prec); pairs.len()];
    for r in partial {
        for (s, t) in sums.iter_mut().zip(r?) {
            *s = &*s + &t;
        }
    }
    let d = det.embed(prec);
    Ok(sums.iter().map(|s| s / &d).collect())
}

/// D_𝔭 = D(Λ(𝔭𝔍)) − N𝔭·D(Λ(𝔍)), for several (I, J).
pub fn dedekind_sums_smoothed(
    pairs: &[(MultiIndex, MultiIndex)],
    z: &KVec,
    a: &KMat,
    p: &QuadIdeal,
    base: &QuadIdeal,
    ev: &Evaluator,
) -> Result<Vec<BigComplex>> {
    if p.is_unit_ideal() || !p.is_integral() {
        return invalid("smoothing ideal must be a proper integral ideal");
    }
    if !p.is_coprime(base) {
        return invalid(format!("{p} is not coprime to {base}"));
    }
    let big = dedekind_sums(pairs, z, a, &p.mul(base), ev)?;
    let small = dedekind_sums(pairs, z, a, base, ev)?;
    let np = p.norm();
    let npi = np.numer().to_i64().ok_or_else(|| Error::Validation("norm too large".into()))?;
    Ok(big.iter().zip(&small).map(|(b, s)| b - &s.mul_int(npi)).collect())
}

pub fn dedekind_sum(key: &DedekindKey, ev: &Evaluator) -> Result<BigComplex> {
    let pairs = vec![(key.i.clone(), key.j.clone())];
    let v = match &key.smooth {
        Some(p) => dedekind_sums_smoothed(&pairs, &key.z, &key.a, p, &key.base, ev)?,
        None => dedekind_sums(&pairs, &key.z, &key.a, &key.base, ev)?,
    };
    Ok(v.into_iter().next().unwrap())
}

/// det A^{-1} K^{I,J}(A^{-1}z, A^{-1}Λ(𝔍)) evaluated on the lattice A^{-1}Λ
/// directly, with no coset expansion over Λ/AΛ.
pub fn dedekind_sum_direct(key: &DedekindKey, ev: &Evaluator) -> Result<BigComplex> {
    let n = key.z.len();
    let prec = ev.prec;
    let det = kmat::det(&key.a);
    if det.is_zero() {
        return Ok(BigComplex::zero(prec));
    }
    let ainv = kmat::inverse(&key.a)?;
    let one = |base: &QuadIdeal| -> Result<BigComplex> {
        check_endomorphism(&key.a, base)?;
        let lat = apply_matrix(&ainv, &lambda_of_ideal(base, n))?;
        let w: Vec<BigComplex> = kmat::mul_vec(&ainv, &key.z).iter().map(|x| x.embed(prec + 16)).collect();
        let v = ke_product(&w, &lat, &key.i, &key.j, None, prec, &ev.eps)?;
        Ok(&v / &det.embed(prec))
    };
    match &key.smooth {
        None => one(&key.base),
        Some(p) => {
            let np = p.norm().numer().to_i64().unwrap();
            Ok(&one(&p.mul(&key.base))? - &one(&key.base)?.mul_int(np))
        }
    }
}

/// Exact general-position test: v ∉ span{γ_i e_1 : i ∈ S} + Λ(𝔭𝔍) for every
/// proper subset S.
pub fn check_general_position(z: &KVec, cols: &[KVec], lat_ideal: &QuadIdeal) -> Result<()> {
    let n = z.len();
    let lat = lambda_of_ideal(lat_ideal, n);
    for mask in 0u32..(1 << n) - 1 {
        let s: Vec<KVec> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| cols[i].clone()).collect();
        if lies_in_translate(z, &s, &lat)? {
            let names: Vec<String> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| format!("γ{} e1", i + 1)).collect();
            return Err(Error::GeneralPosition(format!(
                "z lies in span{{{}}} + Λ({lat_ideal})",
                names.join(", ")
            )));
        }
    }
    Ok(())
}

/// Φ^{p,q}_𝔭(Λ(𝔍))(γ_1, …, γ_N) evaluated at z on P ⊗ Q̄.
pub fn cocycle_eval<C: Coef>(
    z: &KVec,
    gammas: &[GroupElement],
    coeff: &MPolyPair<C>,
    p: &QuadIdeal,
    base: &QuadIdeal,
    ev: &Evaluator,
) -> Result<BigComplex> {
    let n = z.len();
    if gammas.len() != n || coeff.n_vars() != n {
        return invalid(format!("expected {n} group elements and {n}-variable polynomials"));
    }
    for (k, g) in gammas.iter().enumerate() {
        if g.n() != n || !in_gamma0(g, p, base) {
            return invalid(format!("γ{} = {g} is not in Γ0({p}, Λ({base}))", k + 1));
        }
    }
    let cols: Vec<KVec> = gammas.iter().map(|g| g.first_column()).collect();
    let a = kmat::from_columns(&cols);
    if kmat::det(&a).is_zero() {
        return Ok(BigComplex::zero(ev.prec));
    }
    check_general_position(z, &cols, &p.mul(base))?;
    let ainv = kmat::inverse(&a)?;
    let cp = coeff.p.matrix_substitute(&kmat::transpose(&ainv))?;
    let dq = coeff.qbar.matrix_substitute(&a)?;
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    for (i, c) in cp.terms() {
        for (j, d) in dq.terms() {
            pairs.push((i.clone(), j.clone()));
            weights.push(&c.to_complex(ev.prec) * &d.to_complex(ev.prec));
        }
    }
    if pairs.is_empty() {
        return Ok(BigComplex::zero(ev.prec));
    }
    let ds = dedekind_sums_smoothed(&pairs, z, &a, p, base, ev)?;
    let mut total = BigComplex::zero(ev.prec);
    for (w, d) in weights.iter().zip(&ds) {
        total = &total + &(w * d);
    }
    Ok(total)
}

/// |Φ(γz; γγ_1, …, γγ_N)(γ·coeff) − Φ(z; γ_1, …, γ_N)(coeff)|.
pub fn equivariance_residual<C: Coef>(
    z: &KVec,
    gammas: &[GroupElement],
    g: &GroupElement,
    coeff: &MPolyPair<C>,
    p: &QuadIdeal,
    base: &QuadIdeal,
    ev: &Evaluator,
) -> Result<(f64, BigComplex)> {
    let lhs = {
        let gz = kmat::mul_vec(&g.mat, z);
        let gg: Vec<GroupElement> = gammas.iter().map(|x| g.mul(x)).collect();
        cocycle_eval(&gz, &gg, &coeff.act(g)?, p, base, ev)?
    };
    let rhs = cocycle_eval(z, gammas, coeff, p, base, ev)?;
    Ok((lhs.dist(&rhs), rhs))
}

/// |Σ_i (−1)^{i−1} Φ(γ_1, …, γ̂_i, …, γ_{N+1})|.
pub fn cocycle_check_closed<C: Coef>(
    gammas: &[GroupElement],
    z: &KVec,
    coeff: &MPolyPair<C>,
    p: &QuadIdeal,
    base: &QuadIdeal,
    ev: &Evaluator,
) -> Result<(f64, f64)> {
    let n = z.len();
    if gammas.len() != n + 1 {
        return invalid(format!("closedness needs {} group elements", n + 1));
    }
    let mut total = BigComplex::zero(ev.prec);
    let mut scale: f64 = 0.0;
    for i in 0..=n {
        let sub: Vec<GroupElement> = gammas.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, g)| g.clone()).collect();
        let v = cocycle_eval(z, &sub, coeff, p, base, ev)?;
        scale = scale.max(v.mag());
        total = if i % 2 == 0 { &total + &v } else { &total - &v };
    }
    Ok((total.mag(), scale))
}

/// A random pair (P, Q̄) of degrees (p, q) with two small monomials each.
pub fn random_coefficients<R: Rng>(f: QuadField, n: usize, p: u32, q: u32, rng: &mut R) -> MPolyPair<QuadElem> {
    let mut pp = MPoly::new(n, p, false);
    let mut qq = MPoly::new(n, q, true);
    for (poly, deg) in [(&mut pp, p), (&mut qq, q)] {
        for _ in 0..2 {
            let mut e = vec![0; n];
            for _ in 0..deg {
                e[rng.gen_range(0..n)] += 1;
            }
            poly.add_term(e, f.elem(rng.gen_range(-2..3), rng.gen_range(-2..3))).unwrap();
        }
        if poly.is_empty() {
            let mut e = vec![0; n];
            e[0] = deg;
            poly.add_term(e, f.one()).unwrap();
        }
    }
    MPolyPair::new(pp, qq).unwrap()
}

/// A point of k^N with small denominators, unlikely to be special.
pub fn random_point<R: Rng>(f: QuadField, n: usize, rng: &mut R) -> KVec {
    const DENS: [i64; 6] = [3, 5, 7, 11, 13, 17];
    (0..n)
        .map(|_| {
            let da = DENS[rng.gen_range(0..DENS.len())];
            let db = DENS[rng.gen_range(0..DENS.len())];
            f.elem((rng.gen_range(1..da), da), (rng.gen_range(1..db), db))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::random_gamma0;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gi() -> QuadField {
        QuadField::new(-1).unwrap()
    }

    #[test]
    fn substitution_examples() {
        let f = gi();
        let p = MPoly::monomial(vec![2, 0], f.one(), false);
        let id = kmat::identity(f, 2);
        let same = p.matrix_substitute(&id).unwrap();
        assert_eq!(same.terms().map(|(e, _)| e.clone()).collect::<Vec<_>>(), vec![vec![2, 0]]);
        let swap = vec![vec![f.zero(), f.one()], vec![f.one(), f.zero()]];
        let s = p.matrix_substitute(&swap).unwrap();
        let t: Vec<_> = s.terms().collect();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].0, &vec![0, 2]);
        assert!(t[0].1.is_one());
    }

    #[test]
    fn substitution_composes() {
        let f = gi();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut p = MPoly::new(3, 3, rng.gen_bool(0.5));
            for _ in 0..4 {
                let a = rng.gen_range(0..=3u32);
                let b = rng.gen_range(0..=3 - a);
                p.add_term(vec![a, b, 3 - a - b], f.elem(rng.gen_range(-3..4), rng.gen_range(-3..4))).unwrap();
            }
            let rm = |rng: &mut ChaCha8Rng| -> KMat {
                (0..3).map(|_| (0..3).map(|_| f.elem(rng.gen_range(-2..3), rng.gen_range(-2..3))).collect()).collect()
            };
            let (m1, m2) = (rm(&mut rng), rm(&mut rng));
            let lhs = p.matrix_substitute(&kmat::mul(&m1, &m2)).unwrap();
            let rhs = p.matrix_substitute(&m1).unwrap().matrix_substitute(&m2).unwrap();
            let diff = lhs.add(&MPoly { terms: rhs.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(), ..rhs.clone() }).unwrap();
            assert!(diff.is_empty(), "{diff}");
        }
    }

    #[test]
    fn singular_and_identity() {
        let f = gi();
        let ev = Evaluator::new(96, 1e-22).unwrap();
        let o = QuadIdeal::unit(f);
        let z = vec![f.elem((1, 2), 0), f.elem((1, 4), 0)];
        let sing = vec![vec![f.one(), f.one()], vec![f.one(), f.one()]];
        let key = DedekindKey { i: vec![2, 0], j: vec![0, 0], z: z.clone(), a: sing, base: o.clone(), smooth: None };
        assert!(dedekind_sum(&key, &ev).unwrap().mag() < 1e-300);
        let key = DedekindKey { a: kmat::identity(f, 2), ..key };
        let d = dedekind_sum(&key, &ev).unwrap();
        let k1 = ev.ke_exact(2, 0, &z[0], &o).unwrap();
        let k2 = ev.ke_exact(0, 0, &z[1], &o).unwrap();
        assert!(d.dist(&(&k1 * &k2)) < 1e-20);
        assert!(k1.mag() < 1e-20);
    }

    #[test]
    fn coset_route_matches_direct_route() {
        let f = gi();
        let o = QuadIdeal::unit(f);
        let z = vec![f.elem((1, 2), 0), f.elem((1, 4), 0)];
        let a = vec![vec![f.elem(1, 1), f.zero()], vec![f.zero(), f.one()]];
        let key = DedekindKey { i: vec![2, 0], j: vec![0, 0], z: z.clone(), a, base: o.clone(), smooth: None };
        let lo = Evaluator::new(128, 1e-32).unwrap();
        let hi = Evaluator::new(256, 1e-70).unwrap();
        let v1 = dedekind_sum(&key, &lo).unwrap();
        let v2 = dedekind_sum(&key, &hi).unwrap();
        let v3 = dedekind_sum_direct(&key, &lo).unwrap();
        assert!(v1.dist(&v2) < 1e-30, "{v1} {v2}");
        assert!(v1.dist(&v3) < 1e-30, "{v1} {v3}");
        // the two cosets pair z1 with -z1, so this one vanishes
        assert!(v1.mag() < 1e-30);
        let z = vec![f.elem((1, 3), (1, 5)), f.elem((1, 4), 0)];
        let key = DedekindKey { z, ..key };
        let v1 = dedekind_sum(&key, &lo).unwrap();
        let v3 = dedekind_sum_direct(&key, &lo).unwrap();
        assert!(v1.mag() > 1e-3);
        assert!(v1.dist(&v3) < 1e-30, "{v1} {v3}");
        let p = QuadIdeal::new(f.elem(2, 1)).unwrap();
        let key = DedekindKey { smooth: Some(p), ..key };
        let s1 = dedekind_sum(&key, &lo).unwrap();
        let s2 = dedekind_sum_direct(&key, &lo).unwrap();
        assert!(s1.dist(&s2) < 1e-29, "{s1} {s2}");
    }

    fn coeff(f: QuadField, n: usize, p: u32, q: u32, rng: &mut ChaCha8Rng) -> MPolyPair<QuadElem> {
        random_coefficients(f, n, p, q, rng)
    }

    #[test]
    fn equivariance_and_closedness_n2() {
        let f = gi();
        let o = QuadIdeal::unit(f);
        let p = QuadIdeal::new(f.elem(1, 1)).unwrap();
        let ev = Evaluator::new(128, 1e-32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = vec![f.elem((1, 3), (1, 5)), f.elem((2, 7), (1, 3))];
        let mut done = 0;
        for _ in 0..40 {
            if done == 4 {
                break;
            }
            let gs: Vec<GroupElement> = (0..3).map(|_| random_gamma0(f, 2, &p, &o, 2, 1, &mut rng)).collect();
            let c = coeff(f, 2, 1, 1, &mut rng);
            match cocycle_check_closed(&gs, &z, &c, &p, &o, &ev) {
                Ok((r, _)) => {
                    assert!(r < 50.0 * 1e-28, "closedness residual {r}");
                    let g = random_gamma0(f, 2, &p, &o, 2, 1, &mut rng);
                    let (e, _) = equivariance_residual(&z, &gs[..2], &g, &c, &p, &o, &ev).unwrap();
                    assert!(e < 20.0 * 1e-28, "equivariance residual {e}");
                    done += 1;
                }
                Err(Error::GeneralPosition(_)) => continue,
                Err(e) => panic!("{e}"),
            }
        }
        assert_eq!(done, 4);
    }

    #[test]
    fn permutation_sign() {
        let f = gi();
        let o = QuadIdeal::unit(f);
        let p = QuadIdeal::new(f.elem(1, 1)).unwrap();
        let ev = Evaluator::new(128, 1e-32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = vec![f.elem((1, 3), (1, 5)), f.elem((2, 7), (1, 3))];
        let gs: Vec<GroupElement> = (0..2).map(|_| random_gamma0(f, 2, &p, &o, 3, 1, &mut rng)).collect();
        let c = coeff(f, 2, 2, 0, &mut rng);
        let a = cocycle_eval(&z, &gs, &c, &p, &o, &ev).unwrap();
        let b = cocycle_eval(&z, &[gs[1].clone(), gs[0].clone()], &c, &p, &o, &ev).unwrap();
        assert!(a.dist(&-&b) < 1e-27, "{a} {b}");
    }

    #[test]
    fn general_position_is_reported() {
        let f = gi();
        let o = QuadIdeal::unit(f);
        let p = QuadIdeal::new(f.elem(1, 1)).unwrap();
        let ev = Evaluator::new(96, 1e-22).unwrap();
        let id = GroupElement::identity(f, 2);
        let c = coeff(f, 2, 1, 0, &mut ChaCha8Rng::seed_from_u64(1));
        let g = GroupElement::new(vec![vec![f.one(), f.zero()], vec![f.elem(1, 1), f.one()]]).unwrap();
        // second coordinate in O: z lies on span{e1} + Λ
        let z = vec![f.elem((1, 3), 0), f.one()];
        match cocycle_eval(&z, &[id, g], &c, &p, &o, &ev) {
            Err(Error::GeneralPosition(m)) => assert!(m.contains("γ1")),
            other => panic!("{other:?}"),
        }
    }
}
