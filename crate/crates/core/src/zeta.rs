//! Smoothed partial zeta values at s = 0 as finite sums of cocycle values,
//! and the critical L-values assembled from them.

use crate::cocycle::{cocycle_eval, MPoly, MPolyPair};
use crate::error::{invalid, Error, Result};
use crate::extension::{
    degree_one_primes_up_to, make_alpha, orientation, permutations, reduce_alpha, unit_matrix, unit_tuple, validate_units, AlphaMap,
    Embedding, ExtField, LElem, LIdeal,
};
use crate::field::QuadIdeal;
use crate::kronecker::Evaluator;
use crate::lattice::{coset_reps, lambda_of_ideal, lies_in_translate, GroupElement, KVec};
use crate::numerics::BigComplex;
use rayon::prelude::*;
use rug::Integer;

#[derive(Clone, Debug)]
pub struct ZetaJob {
    pub field: ExtField,
    pub f: LIdeal,
    pub a: LIdeal,
    pub p: u32,
    pub q: u32,
    pub units: Vec<LElem>,
    pub unit_index: u64,
    /// Order of n(U(𝔣)).
    pub norm_order: u64,
    pub big_p: LIdeal,
    pub p_tilde: LIdeal,
    pub alpha: AlphaMap,
    pub prec: u32,
    pub eps: f64,
}

impl ZetaJob {
    /// Validates the data and builds a reduced α for (𝔣, 𝔞, 𝔓).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        field: ExtField,
        f: LIdeal,
        a: LIdeal,
        (p, q): (u32, u32),
        units: Vec<LElem>,
        unit_index: u64,
        norm_order: u64,
        (big_p, p_tilde): (LIdeal, LIdeal),
        prec: u32,
        eps: f64,
    ) -> Result<Self> {
        if unit_index == 0 || norm_order == 0 {
            return invalid("unit_index and norm_order must be positive");
        }
        if (p + q + 1) as u64 % norm_order != 0 {
            return invalid(format!("p+q+1 = {} is not divisible by the order {norm_order} of n(U(𝔣))", p + q + 1));
        }
        if !f.is_integral(&field) || !a.is_integral(&field) {
            return invalid("𝔣 and 𝔞 must be integral");
        }
        if !f.is_coprime(&field, &a) {
            return invalid("𝔞 is not coprime to 𝔣");
        }
        for (name, pr) in [("𝔓", &big_p), ("𝔓~", &p_tilde)] {
            if !is_degree_one_prime(&field, pr) {
                return invalid(format!("{name} = {pr} is not a prime of residue degree one over k"));
            }
            if !pr.is_coprime(&field, &f) || !pr.is_coprime(&field, &a) {
                return invalid(format!("{name} is not coprime to 𝔣𝔞"));
            }
        }
        if big_p == p_tilde {
            return invalid("𝔓 and 𝔓~ must be distinct");
        }
        let emb = field.embeddings(prec + 32)?;
        let rep = validate_units(&field, &units, &f, &emb);
        if !rep.ok {
            return invalid(format!("unit check failed: {}", rep.lines.join("; ")));
        }
        for u in &units {
            let nu = field.rel_norm(u);
            if !nu.pow(norm_order as i64)?.is_one() {
                return invalid(format!("n({}) = {nu} has order not dividing {norm_order}", fmt_elem(u)));
            }
        }
        let alpha = build_alpha(&field, &f, &a, &big_p, &units)?;
        Ok(ZetaJob { field, f, a, p, q, units, unit_index, norm_order, big_p, p_tilde, alpha, prec, eps })
    }

    /// The same job for another 𝔞 (α is rebuilt).
    pub fn with_a(&self, a: LIdeal) -> Result<Self> {
        ZetaJob::new(
            self.field.clone(),
            self.f.clone(),
            a,
            (self.p, self.q),
            self.units.clone(),
            self.unit_index,
            self.norm_order,
            (self.big_p.clone(), self.p_tilde.clone()),
            self.prec,
            self.eps,
        )
    }

    pub fn with_p_tilde(&self, p_tilde: LIdeal) -> Result<Self> {
        ZetaJob::new(
            self.field.clone(),
            self.f.clone(),
            self.a.clone(),
            (self.p, self.q),
            self.units.clone(),
            self.unit_index,
            self.norm_order,
            (self.big_p.clone(), p_tilde),
            self.prec,
            self.eps,
        )
    }

    pub fn with_units(&self, units: Vec<LElem>) -> Result<Self> {
        ZetaJob::new(
            self.field.clone(),
            self.f.clone(),
            self.a.clone(),
            (self.p, self.q),
            units,
            self.unit_index,
            self.norm_order,
            (self.big_p.clone(), self.p_tilde.clone()),
            self.prec,
            self.eps,
        )
    }
}

fn fmt_elem(x: &LElem) -> String {
    format!("[{}]", x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "))
}

/// Prime ideal of O_L whose norm down to k is a prime of O.
pub fn is_degree_one_prime(f: &ExtField, pr: &LIdeal) -> bool {
    if !pr.is_integral(f) || pr.is_unit_ideal(f) {
        return false;
    }
    let down = pr.rel_norm();
    if !is_prime_ideal(f, &down) {
        return false;
    }
    // index [O_L : 𝔓] equals N𝔭 exactly when O_L/𝔓 is the residue field of 𝔭
    pr.norm(f) == down.norm()
}

fn is_prime_ideal(f: &ExtField, q: &QuadIdeal) -> bool {
    let n = q.norm();
    if !n.is_integer() || *n.numer() <= 1 {
        return false;
    }
    let n = n.numer().clone();
    let ell = if n.is_probably_prime(30) != rug::integer::IsPrime::No {
        n.clone()
    } else {
        let r = n.clone().sqrt();
        if Integer::from(&r * &r) != n || r.is_probably_prime(30) == rug::integer::IsPrime::No {
            return false;
        }
        r
    };
    let Some(l) = ell.to_u64() else { return false };
    f.base.primes_above(l).map(|ps| ps.iter().any(|p| &p.ideal == q)).unwrap_or(false)
}

/// α from the lemma's construction, conjugated to shrink the unit matrices.
pub fn build_alpha(field: &ExtField, f: &LIdeal, a: &LIdeal, big_p: &LIdeal, units: &[LElem]) -> Result<AlphaMap> {
    let alpha = make_alpha(field, f, a, big_p, &QuadIdeal::unit(field.base))?;
    let red = reduce_alpha(field, &alpha, units)?;
    red.verify(field, f, a, big_p)?;
    Ok(red)
}

fn complex_inverse(m: &[Vec<BigComplex>]) -> Result<Vec<Vec<BigComplex>>> {
    let n = m.len();
    let prec = m[0][0].prec();
    let mut a: Vec<Vec<BigComplex>> = m.to_vec();
    let mut inv: Vec<Vec<BigComplex>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { BigComplex::one(prec) } else { BigComplex::zero(prec) }).collect()).collect();
    let scale = m.iter().flatten().map(|x| x.mag()).fold(0.0, f64::max);
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].mag().partial_cmp(&a[y][c].mag()).unwrap()).unwrap();
        let pm = a[piv][c].mag();
        if pm <= scale * 2f64.powi(-(prec as i32) / 2) || pm <= a[piv][c].err * 1e6 {
            return Err(Error::Precision("embedding matrix (σ_i(α_j)) is ill-conditioned".into()));
        }
        a.swap(c, piv);
        inv.swap(c, piv);
        let r = a[c][c].recip();
        for j in 0..n {
            a[c][j] = &a[c][j] * &r;
            inv[c][j] = &inv[c][j] * &r;
        }
        for i in 0..n {
            if i == c {
                continue;
            }
            let t = a[i][c].clone();
            for j in 0..n {
                a[i][j] = &a[i][j] - &(&t * &a[c][j]);
                inv[i][j] = &inv[i][j] - &(&t * &inv[c][j]);
            }
        }
    }
    Ok(inv)
}

fn poly_mul(x: &MPoly<BigComplex>, y: &MPoly<BigComplex>) -> MPoly<BigComplex> {
    let mut out = MPoly::new(x.n_vars, x.degree + y.degree, x.conjugated);
    for (e1, c1) in x.terms() {
        for (e2, c2) in y.terms() {
            let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
            out.add_term(e, c1 * c2).unwrap();
        }
    }
    out
}

fn poly_pow(x: &MPoly<BigComplex>, k: u32, prec: u32) -> MPoly<BigComplex> {
    let mut r = MPoly::monomial(vec![0; x.n_vars], BigComplex::one(prec), x.conjugated);
    for _ in 0..k {
        r = poly_mul(&r, x);
    }
    r
}

/// P_α^{p,q} = p!^{-N} P_α^p ⊗ Q̄_α^q with P_α = Π_i Σ_k (M^{-1})_{ki} x_k and
/// Q̄_α = Π_i Σ_j conj(M_ij) z̄_j, M = (σ_i(α_j)).
pub fn build_p_alpha(p: u32, q: u32, alpha: &AlphaMap, emb: &[Embedding]) -> Result<MPolyPair<BigComplex>> {
    let m = alpha.sigma_matrix(emb);
    let n = m.len();
    let prec = m[0][0].prec();
    let minv = complex_inverse(&m)?;
    let mut pa = MPoly::monomial(vec![0; n], BigComplex::one(prec), false);
    let mut qa = MPoly::monomial(vec![0; n], BigComplex::one(prec), true);
    for i in 0..n {
        let mut lin = MPoly::new(n, 1, false);
        let mut lin_bar = MPoly::new(n, 1, true);
        for k in 0..n {
            let mut e = vec![0; n];
            e[k] = 1;
            lin.add_term(e.clone(), minv[k][i].clone())?;
            lin_bar.add_term(e, m[i][k].conj())?;
        }
        pa = poly_mul(&pa, &lin);
        qa = poly_mul(&qa, &lin_bar);
    }
    let mut pp = poly_pow(&pa, p, prec);
    let fact: Integer = Integer::factorial(p).into();
    let scale = BigComplex::from_int(1, prec) / &BigComplex::real(rug::Float::with_val(prec, rug::ops::Pow::pow(fact, n as u32)));
    let mut scaled = MPoly::new(n, pp.degree, false);
    for (e, c) in pp.terms() {
        scaled.add_term(e.clone(), c * &scale)?;
    }
    pp = scaled;
    MPolyPair::new(pp, poly_pow(&qa, q, prec))
}

/// One general-position condition: whether v_0 + α(x) lies in
/// span{u_{σ,j} e_1 : j ∈ subset} + Λ(𝔭𝔍).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub sigma: Vec<usize>,
    pub x: LElem,
    pub subset: Vec<usize>,
    pub in_translate: bool,
}

/// Nonzero representatives of 𝔓~^{-1}𝔣/𝔣, in w-coordinates.
pub fn smoothing_reps(field: &ExtField, f: &LIdeal, p_tilde: &LIdeal) -> Result<Vec<LElem>> {
    let sup = f.mul(field, &p_tilde.inverse(field));
    let reps = coset_reps(&f.lat, &sup.lat)?;
    let expected = p_tilde.norm(field);
    if Integer::from(reps.len()) != *expected.numer() || !expected.is_integer() {
        return invalid(format!("found {} coset representatives, expected N𝔓~ = {expected}", reps.len()));
    }
    if !field.is_zero(&reps[0]) {
        return invalid("first coset representative is not zero");
    }
    Ok(reps[1..].to_vec())
}

fn unit_matrices(field: &ExtField, units: &[LElem], alpha: &AlphaMap) -> Result<Vec<GroupElement>> {
    units.iter().map(|u| unit_matrix(field, u, alpha)).collect()
}

/// Every condition needed for 𝔓~, evaluated exactly.
pub fn general_position_certificates(
    field: &ExtField,
    f: &LIdeal,
    alpha: &AlphaMap,
    units: &[LElem],
    p_tilde: &LIdeal,
) -> Result<Vec<Certificate>> {
    let n = field.n;
    let us = unit_matrices(field, units, alpha)?;
    let reps = smoothing_reps(field, f, p_tilde)?;
    let lat = lambda_of_ideal(&alpha.p_ideal.mul(&alpha.j_ideal), n);
    let v0 = alpha.apply(&field.one());
    let mut out = Vec::new();
    for (sigma, _) in permutations(n - 1) {
        let cols: Vec<KVec> = unit_tuple(&us, &sigma, n).iter().map(|g| g.first_column()).collect();
        for x in &reps {
            let z: KVec = v0.iter().zip(alpha.apply(x)).map(|(a, b)| a + &b).collect();
            for mask in 0u32..(1 << n) - 1 {
                let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                let span: Vec<KVec> = subset.iter().map(|&i| cols[i].clone()).collect();
                let hit = lies_in_translate(&z, &span, &lat)?;
                out.push(Certificate { sigma: sigma.clone(), x: x.clone(), subset, in_translate: hit });
            }
        }
    }
    Ok(out)
}

/// Recomputes each certificate entry and compares.
pub fn verify_certificates(field: &ExtField, alpha: &AlphaMap, units: &[LElem], certs: &[Certificate]) -> Result<bool> {
    let n = field.n;
    let us = unit_matrices(field, units, alpha)?;
    let lat = lambda_of_ideal(&alpha.p_ideal.mul(&alpha.j_ideal), n);
    let v0 = alpha.apply(&field.one());
    for c in certs {
        let cols: Vec<KVec> = unit_tuple(&us, &c.sigma, n).iter().map(|g| g.first_column()).collect();
        let z: KVec = v0.iter().zip(alpha.apply(&c.x)).map(|(a, b)| a + &b).collect();
        let span: Vec<KVec> = c.subset.iter().map(|&i| cols[i].clone()).collect();
        if lies_in_translate(&z, &span, &lat)? != c.in_translate {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug)]
pub struct PrimeSelection {
    pub big_p: LIdeal,
    pub p_tilde: LIdeal,
    pub alpha: AlphaMap,
    pub certificates: Vec<Certificate>,
}

/// Searches degree-one primes by increasing norm: 𝔓 with n(𝔓) of prime norm,
/// then the first 𝔓~ whose general-position certificates all come out false.
pub fn select_primes(field: &ExtField, f: &LIdeal, a: &LIdeal, units: &[LElem], search_bound: u64) -> Result<PrimeSelection> {
    let cands = degree_one_primes_up_to(field, search_bound)?;
    let ok = |pr: &LIdeal| pr.is_coprime(field, f) && pr.is_coprime(field, a);
    let mut chosen = None;
    for c in &cands {
        let np = c.ideal.rel_norm().norm();
        if !ok(&c.ideal) || !np.is_integer() || np.numer().is_probably_prime(30) == rug::integer::IsPrime::No {
            continue;
        }
        if let Ok(alpha) = build_alpha(field, f, a, &c.ideal, units) {
            chosen = Some((c.ideal.clone(), alpha));
            break;
        }
    }
    let Some((big_p, alpha)) = chosen else {
        return Err(Error::SearchExhausted(format!("no admissible 𝔓 among degree-one primes over ℓ ≤ {search_bound}")));
    };
    for c in &cands {
        if !ok(&c.ideal) || c.ideal == big_p || !c.ideal.is_coprime(field, &big_p) {
            continue;
        }
        let certs = general_position_certificates(field, f, &alpha, units, &c.ideal)?;
        if certs.iter().all(|x| !x.in_translate) {
            return Ok(PrimeSelection { big_p, p_tilde: c.ideal.clone(), alpha, certificates: certs });
        }
    }
    Err(Error::SearchExhausted(format!("no 𝔓~ in general position among degree-one primes over ℓ ≤ {search_bound}")))
}

#[derive(Clone, Debug)]
pub struct ZetaTerm {
    pub sigma: Vec<usize>,
    pub x: LElem,
    pub value: BigComplex,
}

#[derive(Clone, Debug)]
pub struct ZetaResult {
    pub value: BigComplex,
    pub detsig: BigComplex,
    pub orientation: i32,
    pub terms: Vec<ZetaTerm>,
}

/// ζ^{p,q}_{𝔣,𝔓,𝔓~}(𝔞, 0) as ε·[U(𝔣):U(𝔣)′]^{-1} det(σ_i(α_j))^{-1}
/// Σ_σ sgn(σ) Σ_x Φ(v_0 + α(x); u_σ)(P_α^{p,q}).
pub fn partial_zeta_smoothed(job: &ZetaJob, ev: &Evaluator) -> Result<ZetaResult> {
    let field = &job.field;
    let n = field.n;
    let prec = ev.prec;
    let emb = field.embeddings(prec + 32)?;
    let alpha = &job.alpha;
    let detsig = alpha.detsig(&emb);
    let coeff = build_p_alpha(job.p, job.q, alpha, &emb)?;
    let us = unit_matrices(field, &job.units, alpha)?;
    let reps = smoothing_reps(field, &job.f, &job.p_tilde)?;
    let v0 = alpha.apply(&field.one());
    let eps_or = orientation(&job.units, &emb);
    let perms = permutations(n - 1);
    let items: Vec<(usize, &LElem)> = (0..perms.len()).flat_map(|s| reps.iter().map(move |x| (s, x))).collect();
    let values: Vec<Result<BigComplex>> = items
        .par_iter()
        .map(|(s, x)| {
            let tuple = unit_tuple(&us, &perms[*s].0, n);
            let z: KVec = v0.iter().zip(alpha.apply(x)).map(|(a, b)| a + &b).collect();
            cocycle_eval(&z, &tuple, &coeff, &alpha.p_ideal, &alpha.j_ideal, ev)
        })
        .collect();
    let mut total = BigComplex::zero(prec);
    let mut terms = Vec::with_capacity(items.len());
    for ((s, x), v) in items.iter().zip(values) {
        let v = v?;
        total = if perms[*s].1 > 0 { &total + &v } else { &total - &v };
        terms.push(ZetaTerm { sigma: perms[*s].0.clone(), x: (*x).clone(), value: v });
    }
    let denom = detsig.clone().with_prec(prec).mul_int(job.unit_index as i64);
    let value = (&total / &denom).mul_int(eps_or as i64);
    Ok(ZetaResult { value, detsig: detsig.with_prec(prec), orientation: eps_or, terms })
}

/// Exponents (p′, q′) = (−p−1, q) of the partial zetas for an L-value of
/// weight (p, q), p < 0 ≤ q.
pub fn zeta_exponents(p: i64, q: i64) -> Result<(u32, u32)> {
    if p >= 0 || q < 0 {
        return invalid(format!("L-value weight must satisfy p < 0 ≤ q, got ({p}, {q})"));
    }
    Ok(((-p - 1) as u32, q as u32))
}

#[derive(Clone, Debug)]
pub struct LValueJob {
    pub jobs: Vec<ZetaJob>,
    /// φ(𝔞_j𝔓𝔓~) for each job.
    pub char_values: Vec<BigComplex>,
    pub phi_p: BigComplex,
    pub phi_p_tilde: BigComplex,
    pub norm_p: u64,
    pub norm_p_tilde: u64,
}

#[derive(Clone, Debug)]
pub struct LValueResult {
    pub raw: BigComplex,
    pub l0: BigComplex,
    pub zetas: Vec<ZetaResult>,
}

pub fn l_value(job: &LValueJob, ev: &Evaluator) -> Result<LValueResult> {
    if job.jobs.is_empty() || job.jobs.len() != job.char_values.len() {
        return invalid("need one character value per representative");
    }
    let prec = ev.prec;
    let e1 = &BigComplex::one(prec) - &job.phi_p.mul_int(job.norm_p as i64);
    let e2 = &BigComplex::one(prec) - &job.phi_p_tilde;
    for (name, e) in [("L_𝔓(φN)", &e1), ("L_𝔓~(φ)", &e2)] {
        if e.mag() <= e.err.max(2f64.powi(-(prec as i32) / 2)) {
            return invalid(format!("Euler factor {name} vanishes at s=0; choose other smoothing primes"));
        }
    }
    let mut raw = BigComplex::zero(prec);
    let mut zetas = Vec::new();
    for (zj, c) in job.jobs.iter().zip(&job.char_values) {
        let z = partial_zeta_smoothed(zj, ev)?;
        raw = &raw + &(c * &z.value);
        zetas.push(z);
    }
    let l0 = &raw / &(&e1 * &e2);
    Ok(LValueResult { raw, l0, zetas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    fn fixture_job(prec: u32) -> ZetaJob {
        let f = zeta8();
        let k = f.base;
        let big_p = prime_over(&f, &k.elem(4, 1), 0);
        let pt = prime_over(&f, &k.elem(3, 0), 0);
        let u = zeta8_unit(&f);
        ZetaJob::new(f.clone(), zeta8_conductor(&f), LIdeal::unit(&f), (0, 0), vec![u], 2, 1, (big_p, pt), prec, 1e-30).unwrap()
    }

    #[test]
    fn trivial_weight_coefficients() {
        let job = fixture_job(128);
        let emb = job.field.embeddings(128).unwrap();
        let c = build_p_alpha(0, 0, &job.alpha, &emb).unwrap();
        assert_eq!(c.p.len(), 1);
        assert_eq!(c.qbar.len(), 1);
    }

    #[test]
    fn q_alpha_is_conjugate_norm() {
        let job = fixture_job(128);
        let f = &job.field;
        let emb = f.embeddings(128).unwrap();
        let c = build_p_alpha(0, 1, &job.alpha, &emb).unwrap();
        let k = f.base;
        for (a, b) in [(1, 2), (3, -1), (-2, 5)] {
            let x = vec![k.elem(a, b), k.elem(b, 1)];
            let v = job.alpha.apply(&x);
            let vc: Vec<BigComplex> = v.iter().map(|t| t.embed(128).conj()).collect();
            let mut s = BigComplex::zero(128);
            for (e, co) in c.qbar.terms() {
                let mut t = co.clone();
                for (i, &ei) in e.iter().enumerate() {
                    t = &t * &vc[i].powi(ei as i64);
                }
                s = &s + &t;
            }
            let nx = f.rel_norm(&x).embed(128).conj();
            assert!(s.dist(&nx) < 1e-30, "{s:?} vs {nx:?}");
        }
    }

    #[test]
    fn certificates_for_fixture() {
        let job = fixture_job(128);
        let certs = general_position_certificates(&job.field, &job.f, &job.alpha, &job.units, &job.p_tilde).unwrap();
        assert_eq!(certs.len(), 8 * 3);
        assert!(certs.iter().all(|c| !c.in_translate));
        assert!(verify_certificates(&job.field, &job.alpha, &job.units, &certs).unwrap());
    }

    #[test]
    fn prime_search_finds_fixture_primes() {
        let f = zeta8();
        let sel = select_primes(&f, &zeta8_conductor(&f), &LIdeal::unit(&f), &[zeta8_unit(&f)], 40).unwrap();
        assert_eq!(sel.big_p.norm(&f), 17);
        assert_eq!(sel.p_tilde.norm(&f), 9);
        assert!(sel.certificates.iter().all(|c| !c.in_translate));
    }

    #[test]
    fn fixture_l_value() {
        let prec = 128;
        let job = fixture_job(prec);
        let ev = Evaluator::new(prec, 1e-30).unwrap();
        let k = job.field.base;
        let phi_p = gaussian_psi(&k.elem(4, 1), prec);
        let phi_pt = gaussian_psi(&k.elem(3, 0), prec);
        let lj = LValueJob {
            jobs: vec![job],
            char_values: vec![&phi_p * &phi_pt],
            phi_p,
            phi_p_tilde: phi_pt,
            norm_p: 17,
            norm_p_tilde: 9,
        };
        let r = l_value(&lj, &ev).unwrap();
        let oracle = BigComplex::from_f64(0.607_686_314_229_973_3, 0.0, prec);
        assert!(r.l0.dist(&oracle) < 1e-15, "{:?}", r.l0.to_f64());
    }

    #[test]
    fn fixture_l_value_weight_two() {
        // φ = ψ²∘n has weight (−2, 0); oracle from L(ψ²)L(ψ²χ) summed as K^{1,0} series
        let prec = 128;
        let base = fixture_job(prec);
        let (pe, qe) = zeta_exponents(-2, 0).unwrap();
        let job = ZetaJob::new(
            base.field.clone(),
            base.f.clone(),
            base.a.clone(),
            (pe, qe),
            base.units.clone(),
            2,
            1,
            (base.big_p.clone(), base.p_tilde.clone()),
            prec,
            1e-30,
        )
        .unwrap();
        let ev = Evaluator::new(prec, 1e-30).unwrap();
        let k = job.field.base;
        let phi_p = gaussian_psi(&k.elem(4, 1), prec).square();
        let phi_pt = gaussian_psi(&k.elem(3, 0), prec).square();
        let lj = LValueJob {
            jobs: vec![job],
            char_values: vec![&phi_p * &phi_pt],
            phi_p,
            phi_p_tilde: phi_pt,
            norm_p: 17,
            norm_p_tilde: 9,
        };
        let r = l_value(&lj, &ev).unwrap();
        let oracle = BigComplex::from_f64(1.044_489_082_349_746_1, 0.0, prec);
        assert!(r.l0.dist(&oracle) < 1e-14, "{:?}", r.l0.to_f64());
    }

    #[test]
    fn invariance_suite() {
        let prec = 128;
        let job = fixture_job(prec);
        let ev = Evaluator::new(prec, 1e-30).unwrap();
        let f = job.field.clone();
        let k = f.base;
        let z = |j: &ZetaJob| partial_zeta_smoothed(j, &ev).unwrap().value;
        let base = z(&job);

        // units u^{-1} and −u
        let u = job.units[0].clone();
        let uinv = f.inv(&u).unwrap();
        let neg = f.scale(&u, &k.elem(-1, 0));
        for alt in [uinv, neg] {
            let v = z(&job.with_units(vec![alt]).unwrap());
            assert!(v.dist(&base) < 1e-25, "{:?} {:?}", v.to_f64(), base.to_f64());
        }

        // 𝔞 ↦ λ𝔞 with λ ≡ 1 mod 𝔣 scales by n(λ)
        let lam = f.add(&f.one(), &f.scale(&f.theta(), &k.elem(2, 0)));
        let a2 = LIdeal::principal(&f, &lam).unwrap();
        let v = z(&job.with_a(a2).unwrap());
        let nl = f.rel_norm(&lam).embed(prec);
        assert!(v.dist(&(&nl * &base)) < 1e-25, "{:?} {:?}", v.to_f64(), base.to_f64());

        // two smoothing primes
        let pt = job.p_tilde.clone();
        let pt2 = crate::fixtures::prime_over(&f, &k.elem(3, 0), 1);
        let j2 = job.with_p_tilde(pt2.clone()).unwrap();
        let lhs = &base + &z(&j2.with_a(pt.clone()).unwrap());
        let rhs = &z(&j2) + &z(&job.with_a(pt2).unwrap());
        assert!(lhs.dist(&rhs) < 1e-25, "{:?} {:?}", lhs.to_f64(), rhs.to_f64());
    }
}
