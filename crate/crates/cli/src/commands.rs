use crate::config::{self, Job, Source};
use eisen_core::cocycle::{
    cocycle_check_closed, dedekind_sum, dedekind_sum_direct, equivariance_residual, random_coefficients, random_point, DedekindKey,
};
use eisen_core::extension::{ExtField, LElem, LIdeal};
use eisen_core::field::{QuadElem, QuadField, QuadIdeal};
use eisen_core::kronecker::{ke_accel, Evaluator, KEKey, KeStore, Lattice1D};
use eisen_core::lattice::{kmat, random_gamma0, GroupElement, KMat};
use eisen_core::numerics::float_to_hex;
use eisen_core::recognize::{cm_period, normalize_by_period, recognize_algebraic, PeriodSpec, RecognitionResult};
use eisen_core::zeta::{
    l_value, partial_zeta_smoothed, select_primes, verify_certificates, zeta_exponents, Certificate, LValueJob, ZetaJob,
    ZetaResult,
};
use eisen_core::{BigComplex, Error, Result, Tolerance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::{Float, Integer};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::sync::Arc;

pub const DEFAULT_PREC: u32 = 128;
pub const DEFAULT_EPS: f64 = 1e-30;

/// Settings shared by all commands.
#[derive(Clone)]
pub struct Globals {
    pub prec: Option<u32>,
    pub eps: Option<f64>,
    pub seed: u64,
    pub verbose_terms: bool,
    pub store: Option<Arc<dyn KeStore>>,
}

impl Globals {
    fn prec_eps(&self, job: Option<&Job>) -> (u32, f64) {
        let prec = self.prec.or(job.and_then(|j| j.prec)).unwrap_or(DEFAULT_PREC);
        let eps = self.eps.or(job.and_then(|j| j.eps)).unwrap_or_else(|| default_eps(prec));
        (prec, eps)
    }

    fn evaluator(&self, prec: u32, eps: f64) -> Result<Evaluator> {
        let ev = Evaluator::new(prec, eps)?;
        Ok(match &self.store {
            Some(s) => ev.with_store(s.clone()),
            None => ev,
        })
    }
}

/// eps defaults to 2^{-(prec-24)}, clamped to DEFAULT_EPS at the default precision.
pub fn default_eps(prec: u32) -> f64 {
    if prec == DEFAULT_PREC {
        DEFAULT_EPS
    } else {
        2f64.powi(24 - prec as i32)
    }
}

pub fn complex_json(z: &BigComplex) -> Value {
    let digits = ((z.prec() as f64) * 0.30103).floor() as usize;
    json!({
        "re": z.re.to_string_radix(10, Some(digits.max(6))),
        "im": z.im.to_string_radix(10, Some(digits.max(6))),
        "re_hex": float_to_hex(&z.re),
        "im_hex": float_to_hex(&z.im),
        "err_abs": z.err,
    })
}

fn elem_json(x: &QuadElem) -> Value {
    Value::String(x.to_string())
}

fn vec_json(v: &[QuadElem]) -> Value {
    Value::Array(v.iter().map(elem_json).collect())
}

fn mat_json(m: &KMat) -> Value {
    Value::Array(m.iter().map(|r| vec_json(r)).collect())
}

fn ideal_json(f: &ExtField, i: &LIdeal) -> Value {
    json!({
        "o_basis": Value::Array(i.o_basis().iter().map(|b| vec_json(b)).collect()),
        "norm": i.norm(f).to_string(),
        "rel_norm": elem_json(&i.rel_norm().gen),
    })
}

fn parse_vec(k: QuadField, s: &str) -> Result<Vec<QuadElem>> {
    s.split(',').map(|t| k.parse_elem(t)).collect()
}

fn parse_index(s: &str) -> Result<Vec<u32>> {
    s.split(',').map(|t| t.trim().parse::<u32>().map_err(|_| Error::Validation(format!("bad exponent '{t}' in '{s}'")))).collect()
}

/// Rows separated by ';', entries by ','.
fn parse_mat(k: QuadField, s: &str) -> Result<KMat> {
    let m: KMat = s.split(';').map(|r| parse_vec(k, r)).collect::<Result<_>>()?;
    if m.iter().any(|r| r.len() != m.len()) {
        return Err(Error::Validation(format!("matrix '{s}' is not square")));
    }
    Ok(m)
}

pub struct KeArgs {
    pub d: i64,
    pub p: u32,
    pub q: u32,
    pub z: String,
    pub lattice: String,
    pub s: f64,
}

pub fn cmd_ke(g: &Globals, a: &KeArgs) -> Result<Value> {
    let k = QuadField::new(a.d)?;
    let (prec, eps) = g.prec_eps(None);
    let z = k.parse_elem(&a.z)?;
    let ideal = QuadIdeal::new(k.parse_elem(&a.lattice)?)?;
    let value = if a.s == 0.0 {
        g.evaluator(prec, eps)?.ke_exact(a.p, a.q, &z, &ideal)?
    } else {
        let lat = Lattice1D::from_ideal(&ideal, prec + 16);
        let zc = ideal.reduce(&z);
        if zc.is_zero() {
            return Err(Error::GeneralPosition(format!("{z} lies in the lattice {ideal}")));
        }
        let mut key = KEKey::at_zero(a.p, a.q, zc.embed(prec + 16), lat, prec);
        key.s = Float::with_val(prec, a.s);
        ke_accel(&key, &Tolerance::new(eps, prec)?)?
    };
    Ok(json!({
        "command": "ke",
        "inputs": {"d": a.d, "p": a.p, "q": a.q, "z": elem_json(&z), "lattice": elem_json(&ideal.gen), "s": a.s, "prec": prec, "eps": eps},
        "value": complex_json(&value),
    }))
}

pub struct DsumArgs {
    pub d: i64,
    pub i: String,
    pub j: String,
    pub z: String,
    pub a: String,
    pub base: String,
    pub smooth: Option<String>,
    pub direct: bool,
}

pub fn cmd_dsum(g: &Globals, a: &DsumArgs) -> Result<Value> {
    let k = QuadField::new(a.d)?;
    let (prec, eps) = g.prec_eps(None);
    let key = DedekindKey {
        i: parse_index(&a.i)?,
        j: parse_index(&a.j)?,
        z: parse_vec(k, &a.z)?,
        a: parse_mat(k, &a.a)?,
        base: QuadIdeal::new(k.parse_elem(&a.base)?)?,
        smooth: a.smooth.as_ref().map(|s| k.parse_elem(s).and_then(QuadIdeal::new)).transpose()?,
    };
    let n = key.z.len();
    if key.a.len() != n || key.i.len() != n || key.j.len() != n {
        return Err(Error::Validation("I, J, z and A must have matching dimensions".into()));
    }
    let ev = g.evaluator(prec, eps)?;
    let v = dedekind_sum(&key, &ev)?;
    let mut out = json!({
        "command": "dsum",
        "inputs": {
            "d": a.d, "I": key.i, "J": key.j, "z": vec_json(&key.z), "A": mat_json(&key.a),
            "base": elem_json(&key.base.gen), "smooth": key.smooth.as_ref().map(|s| elem_json(&s.gen)),
            "prec": prec, "eps": eps,
        },
        "value": complex_json(&v),
    });
    if a.direct {
        let w = dedekind_sum_direct(&key, &ev)?;
        out["direct"] = complex_json(&w);
        out["path_difference"] = json!(v.dist(&w));
    }
    Ok(out)
}

pub struct CocycleArgs {
    pub n: usize,
    pub d: i64,
    pub p_ideal: String,
    pub tuples: usize,
    pub p: u32,
    pub q: u32,
    pub tol: f64,
}

/// Norm of det(γ_1 e_1 | … | γ_N e_1), zero when the columns are dependent.
fn column_det_norm(gs: &[GroupElement]) -> rug::Rational {
    let cols: Vec<_> = gs.iter().map(|g| g.first_column()).collect();
    kmat::det(&kmat::from_columns(&cols)).norm()
}

/// Largest N(det A) accepted for a random tuple; the cost of one evaluation
/// grows linearly with it.
const MAX_DET_NORM: u32 = 40;

/// One random tuple: γ_1..γ_{N+1} and h in Γ0(𝔭), with every N-subset of the
/// γ's (and h times the first N) having independent first columns.
fn random_tuple(k: QuadField, n: usize, pid: &QuadIdeal, rng: &mut ChaCha8Rng) -> (Vec<GroupElement>, GroupElement) {
    let o = QuadIdeal::unit(k);
    let ok = |gs: &[GroupElement]| {
        let d = column_det_norm(gs);
        d != 0 && d <= MAX_DET_NORM
    };
    loop {
        let gs: Vec<GroupElement> = (0..=n).map(|_| random_gamma0(k, n, pid, &o, 2 * n, 1, rng)).collect();
        let h = random_gamma0(k, n, pid, &o, 2 * n, 1, rng);
        let subsets_ok = (0..=n).all(|i| {
            let sub: Vec<GroupElement> = gs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()).collect();
            ok(&sub)
        });
        let moved: Vec<GroupElement> = gs[..n].iter().map(|g| h.mul(g)).collect();
        if subsets_ok && ok(&moved) {
            return (gs, h);
        }
    }
}

/// Residuals of closedness and equivariance on random tuples in Γ0(𝔭), as
/// (closedness, equivariance, largest |Φ| seen).
pub fn cocycle_residuals(
    k: QuadField,
    n: usize,
    pid: &QuadIdeal,
    (p, q): (u32, u32),
    tuples: usize,
    seed: u64,
    ev: &Evaluator,
) -> Result<Vec<(f64, f64, f64)>> {
    let o = QuadIdeal::unit(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < tuples {
        attempts += 1;
        if attempts > 20 * tuples + 20 {
            return Err(Error::SearchExhausted(format!("only {} of {tuples} random tuples were in general position", out.len())));
        }
        let (gs, h) = random_tuple(k, n, pid, &mut rng);
        let z = random_point(k, n, &mut rng);
        let c = random_coefficients(k, n, p, q, &mut rng);
        let closed = match cocycle_check_closed(&gs, &z, &c, pid, &o, ev) {
            Ok(r) => r,
            Err(Error::GeneralPosition(_)) => continue,
            Err(e) => return Err(e),
        };
        let equiv = match equivariance_residual(&z, &gs[..n], &h, &c, pid, &o, ev) {
            Ok(r) => r,
            Err(Error::GeneralPosition(_)) => continue,
            Err(e) => return Err(e),
        };
        out.push((closed.0, equiv.0, closed.1.max(equiv.1.mag())));
    }
    Ok(out)
}

pub fn cmd_cocycle_test(g: &Globals, a: &CocycleArgs) -> Result<(Value, bool)> {
    let k = QuadField::new(a.d)?;
    let (prec, eps) = g.prec_eps(None);
    if a.n < 2 {
        return Err(Error::Validation("N must be at least 2".into()));
    }
    let pid = QuadIdeal::new(k.parse_elem(&a.p_ideal)?)?;
    let ev = g.evaluator(prec, eps)?;
    let res = cocycle_residuals(k, a.n, &pid, (a.p, a.q), a.tuples, g.seed, &ev)?;
    let closed = res.iter().map(|r| r.0).fold(0.0, f64::max);
    let equiv = res.iter().map(|r| r.1).fold(0.0, f64::max);
    let pass = closed < a.tol && equiv < a.tol;
    Ok((
        json!({
            "command": "cocycle-test",
            "inputs": {"n": a.n, "d": a.d, "p_ideal": elem_json(&pid.gen), "tuples": a.tuples, "p": a.p, "q": a.q, "seed": g.seed, "prec": prec, "eps": eps},
            "closedness_residual": closed,
            "equivariance_residual": equiv,
            "smallest_value_scale": res.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
            "tolerance": a.tol,
            "pass": pass,
        }),
        pass,
    ))
}

fn inputs_hash(text: &str, prec: u32, eps: f64) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(format!("\nprec={prec}\neps={eps:e}\n").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cert_json(c: &Certificate) -> Value {
    json!({"sigma": c.sigma, "x": vec_json(&c.x), "subset": c.subset, "in_translate": c.in_translate})
}

struct Prepared {
    job: ZetaJob,
    certificates: Vec<Certificate>,
    selected: bool,
}

fn prepare(job: &Job, a: &LIdeal, exps: (u32, u32), prec: u32, eps: f64) -> Result<Prepared> {
    let f = &job.field;
    let (big_p, p_tilde, certs, selected) = match (&job.big_p, &job.p_tilde) {
        (Some(p), Some(t)) => (p.clone(), t.clone(), None, false),
        _ => {
            let sel = select_primes(f, &job.f, a, &job.units, job.search_bound)?;
            let p = job.big_p.clone().unwrap_or(sel.big_p);
            let t = job.p_tilde.clone().unwrap_or(sel.p_tilde);
            (p, t, None, true)
        }
    };
    let zj = ZetaJob::new(
        f.clone(),
        job.f.clone(),
        a.clone(),
        exps,
        job.units.clone(),
        job.unit_index,
        job.norm_order,
        (big_p, p_tilde),
        prec,
        eps,
    )?;
    let certificates = match certs {
        Some(c) => c,
        None => eisen_core::zeta::general_position_certificates(f, &zj.f, &zj.alpha, &zj.units, &zj.p_tilde)?,
    };
    if let Some(bad) = certificates.iter().find(|c| c.in_translate) {
        return Err(Error::GeneralPosition(format!(
            "v0 + α(x) lies in span of u_σ e1 over subset {:?} + Λ(𝔭𝔍) for σ = {:?}, x = {}",
            bad.subset,
            bad.sigma,
            vec_json(&bad.x)
        )));
    }
    if !verify_certificates(f, &zj.alpha, &zj.units, &certificates)? {
        return Err(Error::GeneralPosition("certificates do not re-verify".into()));
    }
    Ok(Prepared { job: zj, certificates, selected })
}

fn zeta_json(g: &Globals, f: &ExtField, p: &Prepared, r: &ZetaResult) -> Value {
    let mut v = json!({
        "a": ideal_json(f, &p.job.a),
        "P": ideal_json(f, &p.job.big_p),
        "Ptilde": ideal_json(f, &p.job.p_tilde),
        "primes_selected_automatically": p.selected,
        "alpha": mat_json(&p.job.alpha.mat),
        "v0": vec_json(&p.job.alpha.apply(&f.one())),
        "certificates": Value::Array(p.certificates.iter().map(cert_json).collect()),
        "detsig": complex_json(&r.detsig),
        "orientation": r.orientation,
        "value": complex_json(&r.value),
    });
    if g.verbose_terms {
        v["terms"] = Value::Array(
            r.terms.iter().map(|t| json!({"sigma": t.sigma, "x": vec_json(&t.x), "value": complex_json(&t.value)})).collect(),
        );
    }
    v
}

pub fn load_job(path: &str) -> Result<(String, Job)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("{path}: {e}")))?;
    let job = config::load(&Source { name: path, text: &text })?;
    Ok((text, job))
}

pub fn cmd_zeta(g: &Globals, text: &str, job: &Job) -> Result<Value> {
    let (prec, eps) = g.prec_eps(Some(job));
    let exps = job.exponents.ok_or_else(|| Error::Validation("[exponents] p, q are required for zeta".into()))?;
    let ev = g.evaluator(prec, eps)?;
    let p = prepare(job, &job.a, exps, prec, eps)?;
    let r = partial_zeta_smoothed(&p.job, &ev)?;
    Ok(json!({
        "command": "zeta",
        "inputs_hash": inputs_hash(text, prec, eps),
        "inputs": {"d": job.field.base.d, "n": job.field.n, "p": exps.0, "q": exps.1, "prec": prec, "eps": eps,
                   "f": ideal_json(&job.field, &job.f), "unit_index": job.unit_index},
        "result": zeta_json(g, &job.field, &p, &r),
    }))
}

struct LRun {
    preps: Vec<Prepared>,
    res: eisen_core::zeta::LValueResult,
    phi_p: BigComplex,
    phi_pt: BigComplex,
}

fn run_lvalue(g: &Globals, job: &Job, prec: u32, eps: f64) -> Result<LRun> {
    let (wp, wq) = job.weight.ok_or_else(|| Error::Validation("[lvalue] weight is required".into()))?;
    let chi = job.character.as_ref().ok_or_else(|| Error::Validation("[character] is required for lvalue".into()))?;
    let exps = zeta_exponents(wp, wq)?;
    let f = &job.field;
    let ev = g.evaluator(prec, eps)?;
    // one pair of primes for all representatives
    let first = prepare(job, &job.reps[0], exps, prec, eps)?;
    let mut fixed = Job { big_p: Some(first.job.big_p.clone()), p_tilde: Some(first.job.p_tilde.clone()), ..clone_job(job) };
    fixed.reps = job.reps.clone();
    let mut preps = vec![first];
    for a in &job.reps[1..] {
        preps.push(prepare(&fixed, a, exps, prec, eps)?);
    }
    let big_p = &preps[0].job.big_p;
    let p_tilde = &preps[0].job.p_tilde;
    let phi = |i: &LIdeal| chi.eval(&i.rel_norm().gen, prec);
    let phi_p = phi(big_p)?;
    let phi_pt = phi(p_tilde)?;
    let char_values: Vec<BigComplex> =
        preps.iter().map(|p| phi(&p.job.a.mul(f, big_p).mul(f, p_tilde))).collect::<Result<_>>()?;
    let lj = LValueJob {
        jobs: preps.iter().map(|p| p.job.clone()).collect(),
        char_values,
        phi_p: phi_p.clone(),
        phi_p_tilde: phi_pt.clone(),
        norm_p: big_p.norm(f).numer().to_u64().unwrap(),
        norm_p_tilde: p_tilde.norm(f).numer().to_u64().unwrap(),
    };
    let res = l_value(&lj, &ev)?;
    Ok(LRun { preps, res, phi_p, phi_pt })
}

fn clone_job(j: &Job) -> Job {
    Job {
        field: j.field.clone(),
        f: j.f.clone(),
        a: j.a.clone(),
        big_p: j.big_p.clone(),
        p_tilde: j.p_tilde.clone(),
        search_bound: j.search_bound,
        reps: j.reps.clone(),
        units: j.units.clone(),
        unit_index: j.unit_index,
        norm_order: j.norm_order,
        exponents: j.exponents,
        weight: j.weight,
        character: j.character.clone(),
        prec: j.prec,
        eps: j.eps,
        curve: j.curve.clone(),
        recognize: j.recognize.clone(),
        cache: j.cache.clone(),
    }
}

fn period_spec(job: &Job) -> Result<PeriodSpec> {
    match &job.curve {
        Some([a2, a4, a6]) => PeriodSpec::with_curve(job.field.base.d, a2.clone(), a4.clone(), a6.clone()),
        None => PeriodSpec::builtin(job.field.base.d),
    }
}

fn recognition_json(r: &Option<RecognitionResult>) -> Value {
    match r {
        Some(r) => json!({
            "found": true,
            "minpoly": r.minpoly.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "minpoly_text": r.poly_string(),
            "height": r.height.to_string(),
            "residual": r.residual,
            "verified_residual": r.verified_residual,
        }),
        None => json!({"found": false}),
    }
}

pub fn cmd_lvalue(g: &Globals, text: &str, job: &Job) -> Result<Value> {
    let (prec, eps) = g.prec_eps(Some(job));
    let run = run_lvalue(g, job, prec, eps)?;
    let f = &job.field;
    let (wp, wq) = job.weight.unwrap();
    let n = f.n as u32;
    let spec = period_spec(job)?;
    let (omega, omega_err, _) = cm_period(&spec, prec)?;
    let normalized = normalize_by_period(&run.res.l0, n, wp, wq, &omega, prec)?;
    let mut out = json!({
        "command": "lvalue",
        "inputs_hash": inputs_hash(text, prec, eps),
        "inputs": {"d": f.base.d, "n": f.n, "weight": [wp, wq], "prec": prec, "eps": eps, "representatives": job.reps.len()},
        "zetas": Value::Array(run.preps.iter().zip(&run.res.zetas).map(|(p, z)| zeta_json(g, f, p, z)).collect()),
        "phi_P": complex_json(&run.phi_p),
        "phi_Ptilde": complex_json(&run.phi_pt),
        "raw_sum": complex_json(&run.res.raw),
        "L0": complex_json(&run.res.l0),
        "omega": {"value": omega.to_string_radix(10, Some((prec as f64 * 0.30103) as usize)), "hex": float_to_hex(&omega), "err_abs": omega_err},
        "normalized": complex_json(&normalized),
    });
    if let Some((degree, height, verify)) = &job.recognize {
        let recompute = |p2: u32| -> Result<BigComplex> {
            if !verify {
                return Err(Error::Precision("re-verification disabled".into()));
            }
            let e2 = default_eps(p2);
            let r2 = run_lvalue(g, job, p2, e2)?;
            let (om2, _, _) = cm_period(&spec, p2)?;
            normalize_by_period(&r2.res.l0, n, wp, wq, &om2, p2)
        };
        let rec = recognize_algebraic(&normalized, *degree, height, prec, &recompute);
        out["recognition"] = match rec {
            Ok(r) => recognition_json(&r),
            Err(Error::Precision(m)) if !verify => json!({"found": false, "note": m}),
            Err(e) => return Err(e),
        };
    }
    Ok(out)
}

pub struct RecognizeArgs {
    pub re: String,
    pub im: Option<String>,
    pub degree: usize,
    pub height: String,
}

/// Bits carried by a decimal literal: its significant digits times log2(10).
fn literal_bits(s: &str) -> u32 {
    let mant = s.trim().trim_start_matches(['+', '-']).split(['e', 'E']).next().unwrap_or("");
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let sig = digits.trim_start_matches('0').len().max(1);
    (sig as f64 * std::f64::consts::LOG2_10).floor() as u32
}

/// The literal is known to ~2^{-bits}; recognition runs at half of that so the
/// 2·prec re-check still sees the literal's full accuracy.
pub fn cmd_recognize(g: &Globals, a: &RecognizeArgs) -> Result<Value> {
    let (requested, _) = g.prec_eps(None);
    let height: Integer = a.height.parse().map_err(|_| Error::Validation(format!("bad height '{}'", a.height)))?;
    let avail = literal_bits(&a.re).min(a.im.as_deref().map(literal_bits).unwrap_or(u32::MAX));
    let prec = requested.min(avail / 2);
    if prec < 32 {
        return Err(Error::Precision(format!("the literal carries only {avail} bits")));
    }
    let parse = |s: &str, p: u32| -> Result<Float> {
        Float::parse(s).map(|v| Float::with_val(p, v)).map_err(|_| Error::Validation(format!("bad decimal literal '{s}'")))
    };
    let value = |p: u32| -> Result<BigComplex> {
        let re = parse(&a.re, p)?;
        let im = match &a.im {
            Some(s) => parse(s, p)?,
            None => Float::new(p),
        };
        let mut z = BigComplex::new(re, im);
        z.err = 2f64.powi(-(avail as i32)) * z.mag().max(1.0);
        Ok(z)
    };
    let x = value(prec)?;
    let r = recognize_algebraic(&x, a.degree, &height, prec, &value)?;
    Ok(json!({
        "command": "recognize",
        "inputs": {"re": a.re, "im": a.im, "degree": a.degree, "height": height.to_string(), "prec": requested},
        "working_prec": prec,
        "recognition": recognition_json(&r),
    }))
}

/// The ℚ(ζ8) fixture as a job.
pub fn fixture_job() -> Job {
    use eisen_core::fixtures::*;
    let f = zeta8();
    let units = vec![zeta8_unit(&f)];
    let cond = zeta8_conductor(&f);
    let one = LIdeal::unit(&f);
    Job {
        f: cond,
        a: one.clone(),
        big_p: None,
        p_tilde: None,
        search_bound: 40,
        reps: vec![one],
        units,
        unit_index: 2,
        norm_order: 1,
        exponents: Some((0, 0)),
        weight: Some((-1, 0)),
        character: Some(
            config::FiniteCharacter::parse(
                f.base,
                "2+2*i",
                &[("1", "1"), ("i", "i"), ("-1", "-1"), ("-i", "-i")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
                -1,
                0,
            )
            .unwrap(),
        ),
        prec: None,
        eps: None,
        curve: None,
        recognize: None,
        cache: None,
        field: f,
    }
}

/// Known value of L0 for the fixture (weight (−1, 0)), from the factorization
/// L(ψ∘n) = L(ψ)L(ψχ) evaluated as 1-variable series.
pub const FIXTURE_L0: f64 = 0.607_686_314_229_973_3;

pub fn cmd_selftest(g: &Globals) -> (Value, bool) {
    let mut checks: Vec<Value> = Vec::new();
    let mut all = true;
    let mut record = |name: &str, r: Result<(bool, String)>| {
        let (ok, detail) = match r {
            Ok(x) => x,
            Err(e) => (false, e.to_string()),
        };
        all &= ok;
        checks.push(json!({"name": name, "pass": ok, "detail": detail}));
    };
    let prec = 128;
    let eps = 1e-30;
    let k = QuadField::new(-1).unwrap();
    record("ke symmetry zero", (|| {
        let ev = Evaluator::new(prec, eps)?;
        let v = ev.ke_exact(2, 0, &k.elem((1, 2), 0), &QuadIdeal::unit(k))?;
        Ok((v.mag() < 1e-28, format!("|K^(2,0)(1/2)| = {:.3e}", v.mag())))
    })());
    record("ke dual path", (|| {
        let lat = Lattice1D::from_ideal(&QuadIdeal::unit(k), prec + 16);
        let mut key = KEKey::at_zero(3, 1, BigComplex::from_f64(0.3, 0.2, prec + 16), lat, prec);
        key.s = Float::with_val(prec, 2);
        let t = Tolerance::new(eps, prec)?;
        let a = ke_accel(&key, &t)?;
        let b = eisen_core::kronecker::ke_direct(&key, &t)?;
        Ok((a.dist(&b) < 1e-25, format!("|accel - direct| = {:.3e}", a.dist(&b))))
    })());
    record("cocycle identities N=2", (|| {
        let ev = Evaluator::new(prec, eps)?;
        let pid = QuadIdeal::new(k.elem(1, 1))?;
        let r = cocycle_residuals(k, 2, &pid, (1, 0), 2, g.seed, &ev)?;
        let m = r.iter().map(|x| x.0.max(x.1)).fold(0.0, f64::max);
        Ok((m < 1e-20, format!("max residual {m:.3e}")))
    })());
    record("extension exact layer", (|| {
        let job = fixture_job();
        let f = &job.field;
        let sel = select_primes(f, &job.f, &job.a, &job.units, 40)?;
        let u = eisen_core::extension::unit_matrix(f, &job.units[0], &sel.alpha)?;
        let det_ok = kmat::det(&u.mat).is_one();
        let ok = det_ok && sel.big_p.norm(f) == 17 && sel.p_tilde.norm(f) == 9;
        Ok((ok, format!("N𝔓 = {}, N𝔓~ = {}, det U = 1: {det_ok}", sel.big_p.norm(f), sel.p_tilde.norm(f))))
    })());
    record("fixture L-value", (|| {
        let job = fixture_job();
        let gg = Globals { prec: Some(prec), eps: Some(eps), ..g.clone() };
        let run = run_lvalue(&gg, &job, prec, eps)?;
        let d = run.res.l0.dist(&BigComplex::from_f64(FIXTURE_L0, 0.0, prec));
        Ok((d < 1e-14, format!("L0 = {:.17}, |L0 - oracle| = {d:.3e}", run.res.l0.to_f64().0)))
    })());
    record("recognition", (|| {
        let x = |p: u32| Ok(BigComplex::real(Float::with_val(p, Float::with_val(p, 2).sqrt() / 64u32)));
        let r = recognize_algebraic(&x(256)?, 4, &Integer::from(1_000_000), 256, &x)?;
        let ok = r.as_ref().map(|r| r.poly_string() == "2048*x^2 - 1").unwrap_or(false);
        Ok((ok, r.map(|r| r.poly_string()).unwrap_or_else(|| "not found".into())))
    })());
    (json!({"command": "selftest", "checks": checks, "pass": all}), all)
}

/// Units of a job in w-coordinates, as JSON (used in error reports).
pub fn units_json(units: &[LElem]) -> Value {
    Value::Array(units.iter().map(|u| vec_json(u)).collect())
}
