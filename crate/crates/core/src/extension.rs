//! A degree-N extension L/k given by exact data, its ideals as O-lattices in
//! the integral-basis coordinates, and the isomorphism α: L → k^N carrying
//! 𝔣𝔞^{-1} and 𝔣(𝔞𝔓)^{-1} onto Λ(𝔍) and Λ(𝔭𝔍).

use crate::error::{invalid, Error, Result};
use crate::euclid::{hnf_columns, snf_left};
use crate::field::{is_unit, PrimeIdeal, QuadElem, QuadField, QuadIdeal, Residue, ResidueField};
use crate::lattice::{apply_matrix, in_gamma0, kmat, lambda_of_ideal, GroupElement, KMat, KVec, OLattice};
use crate::numerics::{unit_round, BigComplex};
use rug::{Integer, Rational};
use std::fmt;

/// Coordinates in the integral basis w_1..w_N.
pub type LElem = KVec;

#[derive(Clone, Debug)]
pub struct ExtField {
    pub base: QuadField,
    pub n: usize,
    /// Coefficients of g, constant term first; monic.
    pub g: Vec<QuadElem>,
    /// Column j holds w_j in the power basis 1, θ, …, θ^{N-1}.
    pub intbasis: KMat,
    intbasis_inv: KMat,
    /// w_i·w_j in the w-basis.
    pub multtable: Vec<Vec<LElem>>,
}

impl ExtField {
    pub fn new(base: QuadField, g: Vec<QuadElem>, intbasis: KMat) -> Result<Self> {
        let n = g.len().saturating_sub(1);
        if n < 2 {
            return invalid("g must have degree at least 2");
        }
        if !g[n].is_one() {
            return invalid("g must be monic");
        }
        if let Some(c) = g.iter().find(|c| !c.is_integral()) {
            return invalid(format!("coefficient {c} of g is not integral"));
        }
        if intbasis.len() != n || intbasis.iter().any(|r| r.len() != n) {
            return invalid(format!("integral basis must be {n}x{n}"));
        }
        let intbasis_inv = kmat::inverse(&intbasis).map_err(|_| Error::Validation("integral basis is singular".into()))?;
        let mut f = ExtField { base, n, g, intbasis, intbasis_inv, multtable: vec![] };
        let cols: Vec<KVec> = (0..n).map(|j| kmat::column(&f.intbasis, j)).collect();
        let mut table = vec![vec![vec![]; n]; n];
        for i in 0..n {
            for j in 0..n {
                let prod = f.power_mul(&cols[i], &cols[j]);
                let w = kmat::mul_vec(&f.intbasis_inv, &prod);
                if let Some(c) = w.iter().find(|c| !c.is_integral()) {
                    return invalid(format!("w{}·w{} has non-integral coordinate {c}: basis does not span a ring", i + 1, j + 1));
                }
                table[i][j] = w;
            }
        }
        f.multtable = table;
        if f.one().iter().any(|c| !c.is_integral()) {
            return invalid("1 is not in the span of the integral basis");
        }
        f.check_irreducible()?;
        Ok(f)
    }

    fn power_mul(&self, a: &[QuadElem], b: &[QuadElem]) -> KVec {
        let n = self.n;
        let mut prod = vec![self.base.zero(); 2 * n - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                prod[i + j] = &prod[i + j] + &(x * y);
            }
        }
        for k in (n..2 * n - 1).rev() {
            let c = prod[k].clone();
            if c.is_zero() {
                continue;
            }
            for j in 0..n {
                prod[k - n + j] = &prod[k - n + j] - &(&c * &self.g[j]);
            }
            prod[k] = self.base.zero();
        }
        prod.truncate(n);
        prod
    }

    pub fn zero(&self) -> LElem {
        vec![self.base.zero(); self.n]
    }

    pub fn one(&self) -> LElem {
        let mut e = vec![self.base.zero(); self.n];
        e[0] = self.base.one();
        kmat::mul_vec(&self.intbasis_inv, &e)
    }

    pub fn theta(&self) -> LElem {
        let mut e = vec![self.base.zero(); self.n];
        e[1] = self.base.one();
        kmat::mul_vec(&self.intbasis_inv, &e)
    }

    pub fn basis_elem(&self, j: usize) -> LElem {
        let mut e = self.zero();
        e[j] = self.base.one();
        e
    }

    pub fn from_k(&self, c: &QuadElem) -> LElem {
        self.scale(&self.one(), c)
    }

    pub fn from_power(&self, coeffs: &[QuadElem]) -> Result<LElem> {
        if coeffs.len() > self.n {
            return invalid("power-basis element has too many coefficients");
        }
        let mut e = coeffs.to_vec();
        e.resize(self.n, self.base.zero());
        Ok(kmat::mul_vec(&self.intbasis_inv, &e))
    }

    pub fn to_power(&self, x: &LElem) -> KVec {
        kmat::mul_vec(&self.intbasis, x)
    }

    pub fn add(&self, x: &LElem, y: &LElem) -> LElem {
        x.iter().zip(y).map(|(a, b)| a + b).collect()
    }

    pub fn sub(&self, x: &LElem, y: &LElem) -> LElem {
        x.iter().zip(y).map(|(a, b)| a - b).collect()
    }

    pub fn scale(&self, x: &LElem, c: &QuadElem) -> LElem {
        x.iter().map(|a| a * c).collect()
    }

    pub fn mul(&self, x: &LElem, y: &LElem) -> LElem {
        let mut out = self.zero();
        for (i, a) in x.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in y.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let ab = a * b;
                for (k, c) in self.multtable[i][j].iter().enumerate() {
                    if !c.is_zero() {
                        out[k] = &out[k] + &(&ab * c);
                    }
                }
            }
        }
        out
    }

    /// Matrix of multiplication by x; column j is x·w_j.
    pub fn mult_matrix(&self, x: &LElem) -> KMat {
        let cols: Vec<KVec> = (0..self.n).map(|j| self.mul(x, &self.basis_elem(j))).collect();
        kmat::from_columns(&cols)
    }

    pub fn rel_norm(&self, x: &LElem) -> QuadElem {
        kmat::det(&self.mult_matrix(x))
    }

    pub fn rel_trace(&self, x: &LElem) -> QuadElem {
        let m = self.mult_matrix(x);
        (0..self.n).fold(self.base.zero(), |acc, i| &acc + &m[i][i])
    }

    pub fn inv(&self, x: &LElem) -> Result<LElem> {
        let m = kmat::inverse(&self.mult_matrix(x)).map_err(|_| Error::Singular("zero has no inverse".into()))?;
        Ok(kmat::mul_vec(&m, &self.one()))
    }

    pub fn pow(&self, x: &LElem, e: i64) -> Result<LElem> {
        let base = if e < 0 { self.inv(x)? } else { x.clone() };
        let mut r = self.one();
        for _ in 0..e.unsigned_abs() {
            r = self.mul(&r, &base);
        }
        Ok(r)
    }

    pub fn is_integral(&self, x: &LElem) -> bool {
        x.iter().all(|c| c.is_integral())
    }

    pub fn is_zero(&self, x: &LElem) -> bool {
        x.iter().all(|c| c.is_zero())
    }

    /// g has no monic factor over O of degree ≤ N/2 (numerical search for
    /// candidate factors, each candidate decided exactly).
    fn check_irreducible(&self) -> Result<()> {
        let roots = self.roots(128)?;
        let n = self.n;
        for size in 1..=n / 2 {
            for subset in subsets(n, size) {
                // Π (x - r) over the subset, coefficients rounded into O
                let mut poly = vec![BigComplex::one(128)];
                for &i in &subset {
                    let mut next = vec![BigComplex::zero(128); poly.len() + 1];
                    for (k, c) in poly.iter().enumerate() {
                        next[k + 1] = &next[k + 1] + c;
                        next[k] = &next[k] - &(c * &roots[i]);
                    }
                    poly = next;
                }
                let cand: Option<Vec<QuadElem>> = poly.iter().map(|c| nearest_integer(self.base, c)).collect();
                if let Some(h) = cand {
                    if poly_divides(&h, &self.g) {
                        return invalid(format!(
                            "g is reducible over k: factor with coefficients [{}]",
                            h.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Roots of σ(g), sorted by real then imaginary part.
    pub fn roots(&self, prec: u32) -> Result<Vec<BigComplex>> {
        let n = self.n;
        let lo = 64;
        let gc: Vec<BigComplex> = self.g.iter().map(|c| c.embed(prec + 32)).collect();
        let eval = |x: &BigComplex, p: u32| -> (BigComplex, BigComplex) {
            let mut v = BigComplex::zero(p);
            let mut d = BigComplex::zero(p);
            for c in gc.iter().rev() {
                d = &(&d * x) + &v;
                v = &(&v * x) + &c.clone().with_prec(p);
            }
            (v, d)
        };
        // Durand–Kerner at low precision
        let seed = BigComplex::from_f64(0.4, 0.9, lo);
        let mut r: Vec<BigComplex> = (0..n).map(|i| seed.powi(i as i64 + 1)).collect();
        for _ in 0..500 {
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let (v, _) = eval(&r[i], lo);
                let mut den = BigComplex::one(lo);
                for j in 0..n {
                    if j != i {
                        den = &den * &(&r[i] - &r[j]);
                    }
                }
                let step = &v / &den;
                moved = moved.max(step.mag());
                r[i] = (&r[i] - &step).with_err(0.0);
                r[i].err = 0.0;
            }
            if moved < 1e-15 {
                break;
            }
        }
        // Newton polish
        let wp = prec + 32;
        let mut out = Vec::with_capacity(n);
        for x0 in &r {
            let mut x = x0.clone().with_prec(wp);
            x.err = 0.0;
            let mut bound = f64::INFINITY;
            for _ in 0..200 {
                let (v, d) = eval(&x, wp);
                let step = &v / &d;
                x = &x - &step;
                x.err = 0.0;
                bound = 2.0 * step.mag();
                if step.mag() <= x.mag().max(1.0) * 2f64.powi(-(wp as i32) + 8) {
                    break;
                }
            }
            out.push(x.with_err(bound + x0.mag() * 4.0 * unit_round(prec)).with_prec(prec));
        }
        out.sort_by(|a, b| {
            let (ar, ai) = a.to_f64();
            let (br, bi) = b.to_f64();
            ar.partial_cmp(&br).unwrap().then(ai.partial_cmp(&bi).unwrap())
        });
        let sep = 2f64.powi(-(prec as i32) / 2);
        for i in 0..n {
            for j in i + 1..n {
                if out[i].dist(&out[j]) < sep {
                    return Err(Error::Precision(format!("roots {i} and {j} of g are not separated at {prec} bits")));
                }
            }
        }
        Ok(out)
    }

    pub fn embeddings(&self, prec: u32) -> Result<Vec<Embedding>> {
        let roots = self.roots(prec)?;
        Ok(roots
            .into_iter()
            .map(|theta| {
                let pw: Vec<BigComplex> = (0..self.n).map(|k| theta.powi(k as i64)).collect();
                let wvals = (0..self.n)
                    .map(|j| {
                        (0..self.n).fold(BigComplex::zero(prec), |acc, k| &acc + &(&self.intbasis[k][j].embed(prec) * &pw[k]))
                    })
                    .collect();
                Embedding { theta, wvals }
            })
            .collect())
    }

    /// Parses "c0 + c1*t + …"-free input: a list of k-literals in the w-basis.
    pub fn elem_from_strs(&self, coords: &[&str]) -> Result<LElem> {
        if coords.len() != self.n {
            return invalid(format!("expected {} coordinates", self.n));
        }
        coords.iter().map(|s| self.base.parse_elem(s)).collect()
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

fn nearest_integer(f: QuadField, c: &BigComplex) -> Option<QuadElem> {
    let (re, im) = c.to_f64();
    if !re.is_finite() || !im.is_finite() || re.abs() > 1e12 || im.abs() > 1e12 {
        return None;
    }
    // x = a + b ω with σ(ω) = omega_embed
    let w = f.omega_embed(64).to_f64();
    let b = (im / w.1).round();
    let a = (re - b * w.0).round();
    Some(f.elem(Integer::from(a as i64), Integer::from(b as i64)))
}

/// Exact test that the monic h divides the monic g (coefficients low → high).
fn poly_divides(h: &[QuadElem], g: &[QuadElem]) -> bool {
    let mut r = g.to_vec();
    let dh = h.len() - 1;
    while r.len() > dh {
        let c = r.last().unwrap().clone();
        let shift = r.len() - 1 - dh;
        for (k, hk) in h.iter().enumerate() {
            r[shift + k] = &r[shift + k] - &(&c * hk);
        }
        r.pop();
    }
    r.iter().all(|c| c.is_zero())
}

#[derive(Clone, Debug)]
pub struct Embedding {
    pub theta: BigComplex,
    wvals: Vec<BigComplex>,
}

impl Embedding {
    pub fn eval(&self, x: &LElem) -> BigComplex {
        let p = self.theta.prec();
        x.iter().zip(&self.wvals).fold(BigComplex::zero(p), |acc, (c, w)| &acc + &(&c.embed(p) * w))
    }
}

/// An O_L-ideal as the O-lattice of its coordinates in the w-basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LIdeal {
    pub lat: OLattice,
}

impl LIdeal {
    pub fn unit(f: &ExtField) -> Self {
        let gens: Vec<KVec> = (0..f.n).map(|j| f.basis_elem(j)).collect();
        LIdeal { lat: OLattice::from_generators(f.base, f.n, &gens).unwrap() }
    }

    pub fn principal(f: &ExtField, x: &LElem) -> Result<Self> {
        Self::from_generators(f, &[x.clone()])
    }

    /// The ideal generated by the given elements.
    pub fn from_generators(f: &ExtField, gens: &[LElem]) -> Result<Self> {
        let mut all = Vec::new();
        for g in gens {
            for j in 0..f.n {
                all.push(f.mul(g, &f.basis_elem(j)));
            }
        }
        Ok(LIdeal { lat: OLattice::from_generators(f.base, f.n, &all)? })
    }

    /// From an O-basis (columns), checking O_L-stability.
    pub fn from_basis(f: &ExtField, cols: &[LElem]) -> Result<Self> {
        let lat = OLattice::from_generators(f.base, f.n, cols)?;
        let id = LIdeal { lat };
        for b in id.o_basis() {
            for j in 0..f.n {
                if !id.contains(&f.mul(&b, &f.basis_elem(j))) {
                    return invalid("lattice is not stable under multiplication by O_L");
                }
            }
        }
        Ok(id)
    }

    pub fn contains(&self, x: &LElem) -> bool {
        self.lat.contains(x)
    }

    /// O-basis via the Hermite form over O.
    pub fn o_basis(&self) -> Vec<LElem> {
        let f = self.lat.field;
        let n = self.lat.n;
        let cols: Vec<KVec> = self.lat.basis();
        let den = Rational::from(self.lat.denom.clone());
        let m: Vec<Vec<QuadElem>> = (0..n).map(|r| cols.iter().map(|c| c[r].scale(&den)).collect()).collect();
        let h = hnf_columns(&m).expect("full rank");
        let inv = den.recip();
        (0..n).map(|j| (0..n).map(|r| h[r][j].scale(&inv)).collect()).collect::<Vec<KVec>>().into_iter().map(|v| {
            let _ = f;
            v
        }).collect()
    }

    pub fn mul(&self, f: &ExtField, o: &LIdeal) -> LIdeal {
        let a = self.o_basis();
        let b = o.o_basis();
        let gens: Vec<LElem> = a.iter().flat_map(|x| b.iter().map(move |y| (x, y))).map(|(x, y)| f.mul(x, y)).collect();
        LIdeal { lat: OLattice::from_generators(f.base, f.n, &gens).unwrap() }
    }

    /// {x : x𝔟 ⊆ O_L} = ∩_j b_j^{-1} O_L.
    pub fn inverse(&self, f: &ExtField) -> LIdeal {
        let mut acc: Option<OLattice> = None;
        for b in self.o_basis() {
            let bi = f.inv(&b).unwrap();
            let l = LIdeal::principal(f, &bi).unwrap().lat;
            acc = Some(match acc {
                None => l,
                Some(a) => a.intersect(&l),
            });
        }
        LIdeal { lat: acc.unwrap() }
    }

    pub fn sum(&self, o: &LIdeal) -> LIdeal {
        LIdeal { lat: self.lat.sum(&o.lat) }
    }

    pub fn intersect(&self, o: &LIdeal) -> LIdeal {
        LIdeal { lat: self.lat.intersect(&o.lat) }
    }

    pub fn scale(&self, f: &ExtField, x: &LElem) -> LIdeal {
        let gens: Vec<LElem> = self.o_basis().iter().map(|b| f.mul(x, b)).collect();
        LIdeal { lat: OLattice::from_generators(f.base, f.n, &gens).unwrap() }
    }

    pub fn is_integral(&self, f: &ExtField) -> bool {
        self.lat.is_sublattice_of(&LIdeal::unit(f).lat)
    }

    pub fn is_unit_ideal(&self, f: &ExtField) -> bool {
        self.lat == LIdeal::unit(f).lat
    }

    pub fn is_coprime(&self, f: &ExtField, o: &LIdeal) -> bool {
        self.sum(o).is_unit_ideal(f)
    }

    /// Absolute norm [O_L : 𝔟] (a positive rational for fractional ideals).
    pub fn norm(&self, f: &ExtField) -> Rational {
        self.lat.index_in(&LIdeal::unit(f).lat)
    }

    /// n(𝔟) as an ideal of O.
    pub fn rel_norm(&self) -> QuadIdeal {
        let basis = self.o_basis();
        QuadIdeal::new(kmat::det(&kmat::from_columns(&basis))).unwrap()
    }
}

impl fmt::Display for LIdeal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.o_basis().iter().map(|v| format!("[{}]", v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "))).collect();
        write!(f, "<{}>", parts.join(", "))
    }
}

/// α as exact matrices: `mat` sends w-coordinates to k^N, `inv` is its
/// inverse (columns α_j = α^{-1}(e_j)).
#[derive(Clone, Debug)]
pub struct AlphaMap {
    pub mat: KMat,
    pub inv: KMat,
    /// Generator of 𝔭 = n(𝔓).
    pub p_ideal: QuadIdeal,
    pub j_ideal: QuadIdeal,
}

impl AlphaMap {
    pub fn apply(&self, x: &LElem) -> KVec {
        kmat::mul_vec(&self.mat, x)
    }

    pub fn unapply(&self, v: &KVec) -> LElem {
        kmat::mul_vec(&self.inv, v)
    }

    pub fn transport(&self, b: &LIdeal) -> OLattice {
        apply_matrix(&self.mat, &b.lat).unwrap()
    }

    /// det(σ_i(α_j)).
    pub fn detsig(&self, emb: &[Embedding]) -> BigComplex {
        let n = self.mat.len();
        let m: Vec<Vec<BigComplex>> = (0..n).map(|i| (0..n).map(|j| emb[i].eval(&kmat::column(&self.inv, j))).collect()).collect();
        complex_det(&m)
    }

    /// The matrix (σ_i(α_j)).
    pub fn sigma_matrix(&self, emb: &[Embedding]) -> Vec<Vec<BigComplex>> {
        let n = self.mat.len();
        (0..n).map(|i| (0..n).map(|j| emb[i].eval(&kmat::column(&self.inv, j))).collect()).collect()
    }

    /// α' = g∘α.
    pub fn conjugate(&self, g: &GroupElement) -> AlphaMap {
        AlphaMap { mat: kmat::mul(&g.mat, &self.mat), inv: kmat::mul(&self.inv, &g.inverse().mat), ..self.clone() }
    }

    /// The L41 equalities, checked exactly.
    pub fn verify(&self, f: &ExtField, ff: &LIdeal, a: &LIdeal, p: &LIdeal) -> Result<()> {
        let n = f.n;
        let m = ff.mul(f, &a.inverse(f));
        let mp = ff.mul(f, &a.mul(f, p).inverse(f));
        if self.transport(&m) != lambda_of_ideal(&self.j_ideal, n) {
            return invalid("α(𝔣𝔞^-1) is not Λ(𝔍)");
        }
        if self.transport(&mp) != lambda_of_ideal(&self.p_ideal.mul(&self.j_ideal), n) {
            return invalid("α(𝔣(𝔞𝔓)^-1) is not Λ(𝔭𝔍)");
        }
        Ok(())
    }
}

pub fn complex_det(m: &[Vec<BigComplex>]) -> BigComplex {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = BigComplex::zero(m[0][0].prec());
    for j in 0..n {
        let minor: Vec<Vec<BigComplex>> = (1..n).map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c].clone()).collect()).collect();
        let t = &m[0][j] * &complex_det(&minor);
        acc = if j % 2 == 0 { &acc + &t } else { &acc - &t };
    }
    acc
}

/// Constructs α with α(𝔣𝔞^{-1}) = Λ(𝔍) and α(𝔣(𝔞𝔓)^{-1}) = Λ(𝔭𝔍).
pub fn make_alpha(f: &ExtField, ff: &LIdeal, a: &LIdeal, p: &LIdeal, j_ideal: &QuadIdeal) -> Result<AlphaMap> {
    let n = f.n;
    if !ff.is_coprime(f, a) || !ff.is_coprime(f, p) || !a.is_coprime(f, p) {
        return invalid("𝔣, 𝔞 and 𝔓 must be pairwise coprime");
    }
    let pn = p.rel_norm();
    let np = pn.norm();
    if pn.is_unit_ideal() || !np.is_integer() || !is_prime(np.numer()) {
        return invalid(format!("n(𝔓) = {pn} must be a prime of prime norm"));
    }
    let m = ff.mul(f, &a.inverse(f));
    let mp = ff.mul(f, &a.mul(f, p).inverse(f));
    let bp = kmat::from_columns(&mp.o_basis());
    let b = kmat::from_columns(&m.o_basis());
    let t = kmat::mul(&kmat::inverse(&bp)?, &b);
    if !kmat::is_integral(&t) {
        return invalid("𝔣𝔞^-1 is not inside 𝔣(𝔞𝔓)^-1");
    }
    let (diag, uinv) = snf_left(&t);
    let c = kmat::mul(&bp, &uinv);
    let nonunit: Vec<usize> = (0..n).filter(|&i| !is_unit(&diag[i])).collect();
    if nonunit.len() != 1 || QuadIdeal::new(diag[nonunit[0]].clone())? != pn {
        return invalid(format!(
            "elementary divisors [{}] are not (𝔭^-1, 1, …, 1)",
            diag.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        ));
    }
    let js = nonunit[0];
    let pi = diag[js].clone();
    let cj = |j: usize| kmat::column(&c, j);
    // α^{-1}(e_1) = c·π·c_{j*}, α^{-1}(e_j) = d_j c_j for the rest
    let jgen = j_ideal.gen.clone();
    let mut cols = vec![f.scale(&cj(js), &(&pi * &jgen))];
    for j in (0..n).filter(|&j| j != js) {
        cols.push(f.scale(&cj(j), &diag[j]));
    }
    let inv = kmat::from_columns(&cols);
    let mat = kmat::inverse(&inv)?;
    let alpha = AlphaMap { mat, inv, p_ideal: pn, j_ideal: j_ideal.clone() };
    alpha.verify(f, ff, a, p)?;
    Ok(alpha)
}

fn is_prime(n: &Integer) -> bool {
    n.is_probably_prime(30) != rug::integer::IsPrime::No
}

/// U = α ∘ (mult by u) ∘ α^{-1}, with its postconditions.
pub fn unit_matrix(f: &ExtField, u: &LElem, alpha: &AlphaMap) -> Result<GroupElement> {
    let m = kmat::mul(&kmat::mul(&alpha.mat, &f.mult_matrix(u)), &alpha.inv);
    let g = GroupElement::new(m).map_err(|e| Error::Validation(format!("unit matrix: {e}")))?;
    if !in_gamma0(&g, &alpha.p_ideal, &alpha.j_ideal) {
        return invalid(format!("unit matrix {g} is not in Γ0(𝔭, Λ(𝔍))"));
    }
    let v0 = alpha.apply(&f.one());
    let diff: KVec = kmat::mul_vec(&g.mat, &v0).iter().zip(&v0).map(|(x, y)| x - y).collect();
    if !lambda_of_ideal(&alpha.j_ideal, f.n).contains(&diff) {
        return invalid("unit matrix does not fix v0 modulo Λ(𝔍)");
    }
    Ok(g)
}

#[derive(Clone, Debug, Default)]
pub struct UnitReport {
    pub lines: Vec<String>,
    pub ok: bool,
}

/// Exact checks on each unit (integral unit, ≡ 1 mod 𝔣, norm 1, not
/// torsion) and a numerical rank check of the log-embedding matrix.
pub fn validate_units(f: &ExtField, units: &[LElem], ff: &LIdeal, emb: &[Embedding]) -> UnitReport {
    let mut rep = UnitReport { lines: vec![], ok: true };
    let n = f.n;
    if units.len() != n - 1 {
        rep.ok = false;
        rep.lines.push(format!("expected {} units, got {}", n - 1, units.len()));
        return rep;
    }
    for (k, u) in units.iter().enumerate() {
        let name = format!("u{}", k + 1);
        let nu = f.rel_norm(u);
        if !f.is_integral(u) || !is_unit(&nu) {
            rep.ok = false;
            rep.lines.push(format!("{name}: not a unit of O_L (norm {nu})"));
            continue;
        }
        if !nu.is_one() {
            rep.ok = false;
            rep.lines.push(format!("{name}: relative norm is {nu}, not 1"));
        }
        if !ff.contains(&f.sub(u, &f.one())) {
            rep.ok = false;
            rep.lines.push(format!("{name}: not congruent to 1 modulo 𝔣"));
        }
        let torsion = emb.iter().all(|s| (s.eval(u).abs().to_f64() - 1.0).abs() < 1e-20);
        if torsion {
            rep.ok = false;
            rep.lines.push(format!("{name}: torsion (all conjugates have absolute value 1)"));
        }
    }
    if rep.ok {
        let logs = log_matrix(units, emb);
        let det = real_det(&logs);
        if det.abs() < 1e-12 {
            rep.ok = false;
            rep.lines.push("units are multiplicatively dependent (log matrix has rank < N-1)".into());
        } else {
            rep.lines.push(format!("regulator-type determinant {det:.6e}"));
        }
    }
    rep
}

fn log_matrix(units: &[LElem], emb: &[Embedding]) -> Vec<Vec<f64>> {
    let m = units.len();
    (0..m).map(|i| (0..m).map(|j| emb[i].eval(&units[j]).abs().to_f64().ln()).collect()).collect()
}

fn real_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let mut a = m.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap()).unwrap();
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let t = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= t * a[c][k];
            }
        }
    }
    det
}

/// Orientation sign of the unit fundamental domain: sign det(−log|σ_i(u_j)|)
/// over the first N−1 embeddings.
pub fn orientation(units: &[LElem], emb: &[Embedding]) -> i32 {
    let m = log_matrix(units, emb);
    let neg: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
    if real_det(&neg) > 0.0 {
        1
    } else {
        -1
    }
}

/// A prime of O_L of residue degree one over the prime `below` of O.
#[derive(Clone, Debug)]
pub struct LPrime {
    pub ideal: LIdeal,
    pub below: PrimeIdeal,
    pub norm: u64,
    /// Images of w_1..w_N in O/𝔮.
    pub images: Vec<Residue>,
}

/// Degree-one primes of O_L above 𝔮, from roots of g modulo 𝔮.
pub fn degree_one_primes_over(f: &ExtField, q: &PrimeIdeal) -> Result<Vec<LPrime>> {
    let rf = ResidueField::new(q)?;
    let gr: Option<Vec<Residue>> = f.g.iter().map(|c| rf.reduce(c)).collect();
    let gr = gr.ok_or_else(|| Error::Validation("g does not reduce modulo the prime".into()))?;
    let bred: Option<Vec<Vec<Residue>>> = f.intbasis.iter().map(|row| row.iter().map(|c| rf.reduce(c)).collect()).collect();
    let Some(bred) = bred else {
        // integral basis has denominators at 𝔮; not handled by the root method
        return Ok(vec![]);
    };
    let mut out: Vec<LPrime> = Vec::new();
    for r in rf.elements() {
        let mut v = (0, 0);
        for c in gr.iter().rev() {
            v = rf.add(rf.mul(v, r), *c);
        }
        if !rf.is_zero(v) {
            continue;
        }
        // s_j = Σ_k B_kj r^k
        let mut pw = vec![(1u64, 0u64)];
        for k in 1..f.n {
            pw.push(rf.mul(pw[k - 1], r));
        }
        let s: Vec<Residue> = (0..f.n)
            .map(|j| (0..f.n).fold((0, 0), |acc, k| rf.add(acc, rf.mul(bred[k][j], pw[k]))))
            .collect();
        // ring homomorphism check against the multiplication table
        let mut hom = true;
        for i in 0..f.n {
            for j in 0..f.n {
                let lhs = rf.mul(s[i], s[j]);
                let rhs = f.multtable[i][j].iter().zip(&s).fold((0, 0), |acc, (c, sk)| rf.add(acc, rf.mul(rf.reduce(c).unwrap(), *sk)));
                if lhs != rhs {
                    hom = false;
                }
            }
        }
        if !hom {
            continue;
        }
        let j0 = (0..f.n).find(|&j| !rf.is_zero(s[j])).unwrap();
        let inv0 = rf.inv(s[j0]).unwrap();
        let mut gens: Vec<LElem> = (0..f.n).map(|j| f.scale(&f.basis_elem(j), &q.ideal.gen)).collect();
        for j in (0..f.n).filter(|&j| j != j0) {
            let t = rf.lift(rf.mul(s[j], inv0));
            let mut e = f.basis_elem(j);
            e[j0] = -t;
            gens.push(e);
        }
        let lat = OLattice::from_generators(f.base, f.n, &gens)?;
        let ideal = LIdeal { lat };
        if out.iter().any(|p| p.ideal == ideal) {
            continue;
        }
        out.push(LPrime { ideal, below: q.clone(), norm: rf.size(), images: s });
    }
    Ok(out)
}

/// All degree-one primes over rational primes ℓ ≤ bound, by increasing norm.
pub fn degree_one_primes_up_to(f: &ExtField, bound: u64) -> Result<Vec<LPrime>> {
    let mut out = Vec::new();
    let mut ell = Integer::from(2);
    while ell <= bound {
        let l = ell.to_u64().unwrap();
        for q in f.base.primes_above(l)? {
            out.extend(degree_one_primes_over(f, &q)?);
        }
        ell = ell.next_prime();
    }
    out.sort_by_key(|p| p.norm);
    Ok(out)
}

/// Greedy conjugation of α by elementary matrices of Γ0(𝔭, Λ(𝔍)) to shrink
/// Σ_σ |N det A_σ|, which controls the coset counts of the Dedekind sums.
pub fn reduce_alpha(f: &ExtField, alpha: &AlphaMap, units: &[LElem]) -> Result<AlphaMap> {
    let n = f.n;
    let base = f.base;
    let cost = |al: &AlphaMap| -> Result<Rational> {
        let us: Vec<GroupElement> = units.iter().map(|u| unit_matrix(f, u, al)).collect::<Result<_>>()?;
        let mut total = Rational::new();
        for (sigma, _) in permutations(n - 1) {
            let tuple = unit_tuple(&us, &sigma, n);
            let cols: Vec<KVec> = tuple.iter().map(|g| g.first_column()).collect();
            total += kmat::det(&kmat::from_columns(&cols)).norm();
        }
        Ok(total)
    };
    let jinv = alpha.j_ideal.inverse().gen;
    let pj = alpha.p_ideal.mul(&alpha.j_ideal).gen;
    let mut small = Vec::new();
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            if (a, b) != (0, 0) {
                small.push(base.elem(a, b));
            }
        }
    }
    let mut best = alpha.clone();
    let mut best_cost = cost(&best)?;
    for _ in 0..200 {
        let mut improved: Option<(Rational, AlphaMap)> = None;
        for r in 0..n {
            for c in 0..n {
                if r == c {
                    continue;
                }
                let scale = if r == 0 {
                    jinv.clone()
                } else if c == 0 {
                    pj.clone()
                } else {
                    base.one()
                };
                for t in &small {
                    let mut m = kmat::identity(base, n);
                    m[r][c] = t * &scale;
                    let g = GroupElement::new(m)?;
                    let cand = best.conjugate(&g);
                    let cc = cost(&cand)?;
                    if cc < *improved.as_ref().map(|x| &x.0).unwrap_or(&best_cost) {
                        improved = Some((cc, cand));
                    }
                }
            }
        }
        match improved {
            Some((c, a)) => {
                best_cost = c;
                best = a;
            }
            None => break,
        }
    }
    Ok(best)
}

/// Permutations of 0..m with their signs, in lexicographic order.
pub fn permutations(m: usize) -> Vec<(Vec<usize>, i32)> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    fn go(k: usize, cur: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, i32)>) {
        if k == cur.len() {
            out.push((cur.clone(), perm_sign(cur)));
            return;
        }
        for i in k..cur.len() {
            cur[k..=i].rotate_right(1);
            go(k + 1, cur, out);
            cur[k..=i].rotate_left(1);
        }
    }
    go(0, &mut cur, &mut out);
    out
}

fn perm_sign(p: &[usize]) -> i32 {
    let mut s = 1;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// (1, U_{σ(1)}, U_{σ(1)}U_{σ(2)}, …).
pub fn unit_tuple(us: &[GroupElement], sigma: &[usize], n: usize) -> Vec<GroupElement> {
    let f = us.first().map(|g| g.mat[0][0].field()).unwrap_or_else(|| QuadField::new(-1).unwrap());
    let mut out = vec![GroupElement::identity(f, n)];
    for &s in sigma {
        let next = out.last().unwrap().mul(&us[s]);
        out.push(next);
    }
    out
}
