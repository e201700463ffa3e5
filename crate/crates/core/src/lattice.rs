//! O-lattices in k^N handled through their Z-structure (rank 2N), plus
//! matrices over k, the standard lattices Λ(𝔍) and congruence subgroups.

use crate::error::{invalid, Error, Result};
use crate::euclid::{hnf_columns, snf_left, Mat};
use crate::field::{QuadElem, QuadField, QuadIdeal};
use crate::numerics::BigComplex;
use rand::Rng;
use rug::{Integer, Rational};
use std::fmt;

pub type KVec = Vec<QuadElem>;
pub type KMat = Vec<Vec<QuadElem>>;

/// Hard cap on enumerated coset counts.
pub const MAX_COSETS: u64 = 50_000_000;

pub mod kmat {
    use super::*;

    pub fn identity(f: QuadField, n: usize) -> KMat {
        (0..n).map(|i| (0..n).map(|j| if i == j { f.one() } else { f.zero() }).collect()).collect()
    }

    pub fn zero(f: QuadField, r: usize, c: usize) -> KMat {
        vec![vec![f.zero(); c]; r]
    }

    pub fn mul(a: &KMat, b: &KMat) -> KMat {
        let f = a[0][0].field();
        let mut c = zero(f, a.len(), b[0].len());
        for i in 0..a.len() {
            for l in 0..b.len() {
                if a[i][l].is_zero() {
                    continue;
                }
                for j in 0..b[0].len() {
                    c[i][j] = &c[i][j] + &(&a[i][l] * &b[l][j]);
                }
            }
        }
        c
    }

    pub fn mul_vec(a: &KMat, v: &[QuadElem]) -> KVec {
        a.iter()
            .map(|row| row.iter().zip(v).fold(v[0].field().zero(), |acc, (x, y)| &acc + &(x * y)))
            .collect()
    }

    pub fn transpose(a: &KMat) -> KMat {
        (0..a[0].len()).map(|j| a.iter().map(|row| row[j].clone()).collect()).collect()
    }

    pub fn conj(a: &KMat) -> KMat {
        a.iter().map(|row| row.iter().map(|x| x.conj()).collect()).collect()
    }

    pub fn column(a: &KMat, j: usize) -> KVec {
        a.iter().map(|row| row[j].clone()).collect()
    }

    pub fn from_columns(cols: &[KVec]) -> KMat {
        transpose(&cols.to_vec())
    }

    pub fn det(a: &KMat) -> QuadElem {
        let n = a.len();
        let f = a[0][0].field();
        let mut m = a.clone();
        let mut det = f.one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else { return f.zero() };
            if p != c {
                m.swap(p, c);
                det = -det;
            }
            let piv = m[c][c].clone();
            det = &det * &piv;
            let inv = piv.inv().unwrap();
            for r in c + 1..n {
                if m[r][c].is_zero() {
                    continue;
                }
                let fac = &m[r][c] * &inv;
                for k in c..n {
                    let t = &fac * &m[c][k];
                    m[r][k] = &m[r][k] - &t;
                }
            }
        }
        det
    }

    pub fn inverse(a: &KMat) -> Result<KMat> {
        let n = a.len();
        let f = a[0][0].field();
        let mut m = a.clone();
        let mut inv = identity(f, n);
        for c in 0..n {
            let p = (c..n).find(|&r| !m[r][c].is_zero()).ok_or_else(|| Error::Singular("singular matrix".into()))?;
            m.swap(p, c);
            inv.swap(p, c);
            let pinv = m[c][c].inv()?;
            for k in 0..n {
                m[c][k] = &m[c][k] * &pinv;
                inv[c][k] = &inv[c][k] * &pinv;
            }
            for r in 0..n {
                if r == c || m[r][c].is_zero() {
                    continue;
                }
                let fac = m[r][c].clone();
                for k in 0..n {
                    let t = &fac * &m[c][k];
                    m[r][k] = &m[r][k] - &t;
                    let t = &fac * &inv[c][k];
                    inv[r][k] = &inv[r][k] - &t;
                }
            }
        }
        Ok(inv)
    }

    pub fn embed(a: &KMat, prec: u32) -> Vec<Vec<BigComplex>> {
        a.iter().map(|row| row.iter().map(|x| x.embed(prec)).collect()).collect()
    }

    pub fn is_integral(a: &KMat) -> bool {
        a.iter().all(|r| r.iter().all(|x| x.is_integral()))
    }

    pub fn fmt(a: &KMat) -> String {
        let rows: Vec<String> = a.iter().map(|r| format!("[{}]", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))).collect();
        format!("[{}]", rows.join(", "))
    }
}

/// Coordinates of v ∈ k^n in the Q-basis (e_1, ω e_1, …, e_n, ω e_n).
pub fn to_q(v: &[QuadElem]) -> Vec<Rational> {
    v.iter().flat_map(|x| [x.a.clone(), x.b.clone()]).collect()
}

pub fn from_q(f: QuadField, q: &[Rational]) -> KVec {
    q.chunks(2).map(|c| f.elem(c[0].clone(), c[1].clone())).collect()
}

fn omega_times(v: &[QuadElem]) -> KVec {
    let w = v[0].field().omega();
    v.iter().map(|x| x * &w).collect()
}

/// A full-rank Z-lattice (1/denom)·span(columns of hnf) in Q^m.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ZLattice {
    pub denom: Integer,
    pub hnf: Mat<Integer>,
}

impl ZLattice {
    pub fn dim(&self) -> usize {
        self.hnf.len()
    }

    pub fn from_rational_columns(dim: usize, cols: &[Vec<Rational>]) -> Option<ZLattice> {
        let mut den = Integer::from(1);
        for c in cols {
            for x in c {
                den.lcm_mut(x.denom());
            }
        }
        let dr = Rational::from(den.clone());
        let gens: Mat<Integer> = (0..dim)
            .map(|r| cols.iter().map(|c| Rational::from(&c[r] * &dr).numer().clone()).collect())
            .collect();
        let h = hnf_columns(&gens)?;
        let mut g = den.clone();
        for row in &h {
            for x in row {
                g.gcd_mut(x);
            }
        }
        let (denom, hnf) = if g > 1 {
            (den / &g, h.into_iter().map(|r| r.into_iter().map(|x| x / &g).collect()).collect())
        } else {
            (den, h)
        };
        Some(ZLattice { denom, hnf })
    }

    pub fn columns(&self) -> Vec<Vec<Rational>> {
        let m = self.dim();
        (0..m).map(|j| (0..m).map(|i| Rational::from((self.hnf[i][j].clone(), self.denom.clone()))).collect()).collect()
    }

    /// Integer coordinates of v in the basis, if v lies in the lattice.
    pub fn coords(&self, v: &[Rational]) -> Option<Vec<Integer>> {
        let m = self.dim();
        let mut y: Vec<Rational> = v.iter().map(|x| Rational::from(x * &self.denom)).collect();
        let mut out = vec![Integer::new(); m];
        for i in (0..m).rev() {
            if *y[i].denom() != 1 {
                return None;
            }
            let yi = y[i].numer().clone();
            let (q, r) = yi.div_rem_floor(self.hnf[i][i].clone());
            if r != 0 {
                return None;
            }
            for k in 0..=i {
                y[k] -= Rational::from(&self.hnf[k][i] * &q);
            }
            out[i] = q;
        }
        Some(out)
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        self.coords(v).is_some()
    }

    /// Covolume.
    pub fn det(&self) -> Rational {
        let mut p = Integer::from(1);
        for i in 0..self.dim() {
            p *= &self.hnf[i][i];
        }
        Rational::from((p, Integer::from(rug::ops::Pow::pow(&self.denom, self.dim() as u32))))
    }

    pub fn sum(&self, o: &ZLattice) -> ZLattice {
        let mut cols = self.columns();
        cols.extend(o.columns());
        ZLattice::from_rational_columns(self.dim(), &cols).unwrap()
    }

    /// {y : y·x ∈ Z for all x in the lattice}.
    pub fn dual(&self) -> ZLattice {
        let m = self.dim();
        let b: Vec<Vec<Rational>> = (0..m).map(|i| (0..m).map(|j| Rational::from((self.hnf[i][j].clone(), self.denom.clone()))).collect()).collect();
        let inv = rat_inverse(&b).expect("full rank");
        // dual basis = columns of inv^T, i.e. rows of inv
        ZLattice::from_rational_columns(m, &inv).unwrap()
    }

    pub fn intersect(&self, o: &ZLattice) -> ZLattice {
        self.dual().sum(&o.dual()).dual()
    }

    pub fn is_sublattice_of(&self, o: &ZLattice) -> bool {
        self.columns().iter().all(|c| o.contains(c))
    }
}

fn rat_inverse(a: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a.to_vec();
    let mut inv: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| Rational::from((i == j) as i32)).collect()).collect();
    for c in 0..n {
        let p = (c..n).find(|&r| m[r][c] != 0)?;
        m.swap(p, c);
        inv.swap(p, c);
        let pv = m[c][c].clone();
        for k in 0..n {
            m[c][k] /= &pv;
            inv[c][k] /= &pv;
        }
        for r in 0..n {
            if r == c || m[r][c] == 0 {
                continue;
            }
            let fac = m[r][c].clone();
            for k in 0..n {
                let t = Rational::from(&fac * &m[c][k]);
                m[r][k] -= t;
                let t = Rational::from(&fac * &inv[c][k]);
                inv[r][k] -= t;
            }
        }
    }
    Some(inv)
}

/// Basis of {x : M x = 0} over Q, with its rank deficit.
fn rat_nullspace(rows: &[Vec<Rational>], ncols: usize) -> Vec<Vec<Rational>> {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let mut pivcols = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(p, r);
        let pv = m[r][c].clone();
        for k in 0..ncols {
            m[r][k] /= &pv;
        }
        for i in 0..m.len() {
            if i == r || m[i][c] == 0 {
                continue;
            }
            let fac = m[i][c].clone();
            for k in 0..ncols {
                let t = Rational::from(&fac * &m[r][k]);
                m[i][k] -= t;
            }
        }
        pivcols.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|c| !pivcols.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut x = vec![Rational::new(); ncols];
            x[fc] = Rational::from(1);
            for (i, &pc) in pivcols.iter().enumerate() {
                x[pc] = Rational::from(-&m[i][fc]);
            }
            x
        })
        .collect()
}

/// A rank-n O-lattice in k^n.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OLattice {
    pub field: QuadField,
    pub n: usize,
    pub denom: Integer,
    /// 2n×2n column HNF.
    pub zbasis: Mat<Integer>,
}

impl OLattice {
    pub fn from_generators(field: QuadField, n: usize, gens: &[KVec]) -> Result<OLattice> {
        let mut cols = Vec::with_capacity(2 * gens.len());
        for g in gens {
            if g.len() != n {
                return invalid("generator of wrong length");
            }
            cols.push(to_q(g));
            cols.push(to_q(&omega_times(g)));
        }
        let z = ZLattice::from_rational_columns(2 * n, &cols)
            .ok_or_else(|| Error::Singular("generators do not span k^n".into()))?;
        Ok(OLattice { field, n, denom: z.denom, zbasis: z.hnf })
    }

    /// From a raw Z-basis; checks the HNF is canonical and the span O-stable.
    pub fn from_zbasis(field: QuadField, n: usize, denom: Integer, zbasis: Mat<Integer>) -> Result<OLattice> {
        let z = ZLattice { denom: denom.clone(), hnf: zbasis.clone() };
        let canon = ZLattice::from_rational_columns(2 * n, &z.columns()).ok_or_else(|| Error::Singular("zero determinant".into()))?;
        if canon != z {
            return invalid("zbasis is not in canonical Hermite form");
        }
        let l = OLattice { field, n, denom, zbasis };
        for b in l.basis() {
            if !l.contains(&omega_times(&b)) {
                return invalid("Z-span is not O-stable");
            }
        }
        Ok(l)
    }

    pub fn zlat(&self) -> ZLattice {
        ZLattice { denom: self.denom.clone(), hnf: self.zbasis.clone() }
    }

    /// The 2n Z-basis vectors as elements of k^n.
    pub fn basis(&self) -> Vec<KVec> {
        self.zlat().columns().iter().map(|c| from_q(self.field, c)).collect()
    }

    pub fn contains(&self, v: &[QuadElem]) -> bool {
        self.zlat().contains(&to_q(v))
    }

    pub fn covolume(&self) -> Rational {
        self.zlat().det()
    }

    pub fn is_sublattice_of(&self, sup: &OLattice) -> bool {
        self.zlat().is_sublattice_of(&sup.zlat())
    }

    /// [sup : self] for self ⊆ sup (any pair: ratio of covolumes).
    pub fn index_in(&self, sup: &OLattice) -> Rational {
        self.covolume() / sup.covolume()
    }

    pub fn intersect(&self, o: &OLattice) -> OLattice {
        let z = self.zlat().intersect(&o.zlat());
        OLattice { field: self.field, n: self.n, denom: z.denom, zbasis: z.hnf }
    }

    pub fn sum(&self, o: &OLattice) -> OLattice {
        let z = self.zlat().sum(&o.zlat());
        OLattice { field: self.field, n: self.n, denom: z.denom, zbasis: z.hnf }
    }

    pub fn scale(&self, c: &QuadElem) -> Result<OLattice> {
        if c.is_zero() {
            return Err(Error::Singular("scaling by zero".into()));
        }
        let gens: Vec<KVec> = self.basis().iter().map(|b| b.iter().map(|x| x * c).collect()).collect();
        OLattice::from_generators(self.field, self.n, &gens)
    }

    /// Reduce v modulo the lattice to a canonical representative.
    pub fn reduce(&self, v: &[QuadElem]) -> KVec {
        // peel off integer parts along the triangular basis, from the bottom
        let m = 2 * self.n;
        let mut y: Vec<Rational> = to_q(v).into_iter().map(|x| x * &self.denom).collect();
        for i in (0..m).rev() {
            let piv = Rational::from(self.zbasis[i][i].clone());
            let q = Integer::from(Rational::from(&y[i] / &piv).floor_ref());
            if q != 0 {
                for k in 0..=i {
                    y[k] -= Rational::from(&self.zbasis[k][i] * &q);
                }
            }
        }
        let d = Rational::from(self.denom.clone());
        from_q(self.field, &y.into_iter().map(|x| x / &d).collect::<Vec<_>>())
    }
}

impl fmt::Display for OLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(1/{})·{:?}", self.denom, self.zbasis.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>())
    }
}

/// ⊕ 𝔠_k e_k.
pub fn diag_lattice(ideals: &[QuadIdeal]) -> OLattice {
    let f = ideals[0].field();
    let n = ideals.len();
    let gens: Vec<KVec> = (0..n)
        .map(|k| (0..n).map(|j| if j == k { ideals[k].gen.clone() } else { f.zero() }).collect())
        .collect();
    OLattice::from_generators(f, n, &gens).unwrap()
}

/// Λ(𝔍) = 𝔍^{-1} ⊕ O^{N-1}.
pub fn lambda_of_ideal(i: &QuadIdeal, n: usize) -> OLattice {
    let f = i.field();
    let mut ideals = vec![i.inverse()];
    ideals.extend((1..n).map(|_| QuadIdeal::unit(f)));
    diag_lattice(&ideals)
}

/// The coordinate ideals of Λ(𝔍).
pub fn lambda_coordinate_ideals(i: &QuadIdeal, n: usize) -> Vec<QuadIdeal> {
    let mut out = vec![i.inverse()];
    out.extend((1..n).map(|_| QuadIdeal::unit(i.field())));
    out
}

pub fn apply_matrix(a: &KMat, l: &OLattice) -> Result<OLattice> {
    if kmat::det(a).is_zero() {
        return Err(Error::Singular("singular matrix".into()));
    }
    let gens: Vec<KVec> = l.basis().iter().map(|b| kmat::mul_vec(a, b)).collect();
    OLattice::from_generators(l.field, l.n, &gens)
}

/// Representatives of sup/sub via the Smith form of the inclusion.
pub fn coset_reps(sub: &OLattice, sup: &OLattice) -> Result<Vec<KVec>> {
    let zs = sup.zlat();
    let m = 2 * sup.n;
    let mut t: Mat<Integer> = vec![vec![Integer::new(); m]; m];
    for (j, c) in sub.zlat().columns().iter().enumerate() {
        let x = zs.coords(c).ok_or_else(|| Error::Validation("not a sublattice".into()))?;
        for i in 0..m {
            t[i][j] = x[i].clone();
        }
    }
    let (d, uinv) = snf_left(&t);
    let mut count: u64 = 1;
    for di in &d {
        let v = di.to_u64().ok_or_else(|| Error::Precision("coset count overflow".into()))?;
        count = count.saturating_mul(v);
    }
    if count > MAX_COSETS {
        return Err(Error::Precision(format!("coset count {count} exceeds {MAX_COSETS}")));
    }
    let b = zs.columns();
    // generators C_i = B · U⁻¹ e_i
    let gens: Vec<Vec<Rational>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|r| {
                    let mut acc = Rational::new();
                    for k in 0..m {
                        if uinv[k][i] != 0 {
                            acc += Rational::from(&b[k][r] * &uinv[k][i]);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let active: Vec<(usize, u64)> = d.iter().enumerate().filter(|(_, x)| **x > 1).map(|(i, x)| (i, x.to_u64().unwrap())).collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut ctr = vec![0u64; active.len()];
    loop {
        let mut v = vec![Rational::new(); m];
        for (slot, &(i, _)) in active.iter().enumerate() {
            if ctr[slot] == 0 {
                continue;
            }
            for r in 0..m {
                v[r] += Rational::from(&gens[i][r] * ctr[slot]);
            }
        }
        out.push(from_q(sup.field, &v));
        // odometer, last slot fastest
        let mut k = active.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            ctr[k] += 1;
            if ctr[k] < active[k].1 {
                break;
            }
            ctr[k] = 0;
        }
    }
}

/// Whether v ∈ W + L, W the k-span of `spanning` (a proper subspace).
pub fn lies_in_translate(v: &[QuadElem], spanning: &[KVec], l: &OLattice) -> Result<bool> {
    let m = 2 * l.n;
    let mut rows = Vec::new();
    for s in spanning {
        rows.push(to_q(s));
        rows.push(to_q(&omega_times(s)));
    }
    // functionals vanishing on W
    let p = if rows.is_empty() {
        (0..m).map(|i| (0..m).map(|j| Rational::from((i == j) as i32)).collect()).collect()
    } else {
        rat_nullspace(&rows, m)
    };
    if p.is_empty() {
        return invalid("spanning set spans all of k^N");
    }
    let apply = |x: &[Rational]| -> Vec<Rational> {
        p.iter().map(|row| row.iter().zip(x).fold(Rational::new(), |acc, (a, b)| acc + Rational::from(a * b))).collect()
    };
    let imgs: Vec<Vec<Rational>> = l.zlat().columns().iter().map(|c| apply(c)).collect();
    let zl = ZLattice::from_rational_columns(p.len(), &imgs).expect("image has full rank");
    Ok(zl.contains(&apply(&to_q(v))))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub mat: KMat,
}

impl GroupElement {
    pub fn new(mat: KMat) -> Result<Self> {
        let n = mat.len();
        if n == 0 || mat.iter().any(|r| r.len() != n) {
            return invalid("group element must be square");
        }
        if !kmat::det(&mat).is_one() {
            return invalid(format!("determinant of {} is not 1", kmat::fmt(&mat)));
        }
        Ok(GroupElement { mat })
    }

    pub fn identity(f: QuadField, n: usize) -> Self {
        GroupElement { mat: kmat::identity(f, n) }
    }

    pub fn n(&self) -> usize {
        self.mat.len()
    }

    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        GroupElement { mat: kmat::mul(&self.mat, &o.mat) }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { mat: kmat::inverse(&self.mat).unwrap() }
    }

    pub fn first_column(&self) -> KVec {
        kmat::column(&self.mat, 0)
    }

    pub fn stabilizes(&self, l: &OLattice) -> bool {
        apply_matrix(&self.mat, l).map(|x| &x == l).unwrap_or(false)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", kmat::fmt(&self.mat))
    }
}

/// Γ₀(𝔭, Λ(𝔍)) = Γ(Λ(𝔭𝔍)) ∩ Γ(Λ(𝔍)).
pub fn in_gamma0(g: &GroupElement, p: &QuadIdeal, i: &QuadIdeal) -> bool {
    let n = g.n();
    g.stabilizes(&lambda_of_ideal(i, n)) && g.stabilizes(&lambda_of_ideal(&p.mul(i), n))
}

fn small_o<R: Rng>(f: QuadField, rng: &mut R, bound: i64) -> QuadElem {
    f.elem(rng.gen_range(-bound..=bound), rng.gen_range(-bound..=bound))
}

/// Random element of Γ₀(𝔭, Λ(𝔍)) as a word of `len` elementary matrices and
/// diagonal units.
pub fn random_gamma0<R: Rng>(f: QuadField, n: usize, p: &QuadIdeal, j: &QuadIdeal, len: usize, bound: i64, rng: &mut R) -> GroupElement {
    let jinv = j.inverse().gen;
    let pj = p.mul(j).gen;
    let units = f.units();
    let mut g = kmat::identity(f, n);
    for _ in 0..len {
        let mut e = kmat::identity(f, n);
        let r = rng.gen_range(0..n);
        let mut c = rng.gen_range(0..n);
        if c == r {
            c = (c + 1) % n;
        }
        if rng.gen_range(0..5) == 0 {
            let u = &units[rng.gen_range(0..units.len())];
            e[r][r] = u.clone();
            e[c][c] = u.inv().unwrap();
        } else {
            let t = small_o(f, rng, bound);
            e[r][c] = if r == 0 {
                &t * &jinv
            } else if c == 0 {
                &t * &pj
            } else {
                t
            };
        }
        g = kmat::mul(&g, &e);
    }
    let out = GroupElement { mat: g };
    debug_assert!(in_gamma0(&out, p, j));
    out
}
