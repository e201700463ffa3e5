//! TOML job files. Every arithmetic input is an exact literal; semantic
//! errors are reported against the line of the offending key.

use eisen_core::extension::{validate_units, ExtField, LElem, LIdeal};
use eisen_core::field::{QuadElem, QuadField};
use eisen_core::lattice::KMat;
use eisen_core::{BigComplex, Error, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use toml::Spanned;

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub field: RawField,
    pub extension: RawExtension,
    pub ideals: RawIdeals,
    pub units: RawUnits,
    pub exponents: Option<RawExponents>,
    pub lvalue: Option<RawLValue>,
    pub character: Option<RawCharacter>,
    pub numerics: Option<RawNumerics>,
    pub period: Option<RawPeriod>,
    pub recognize: Option<RawRecognize>,
    pub cache: Option<RawCache>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawField {
    pub d: Spanned<i64>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawExtension {
    pub g: Spanned<Vec<String>>,
    pub intbasis: Spanned<Vec<Vec<String>>>,
    pub multtable: Option<Spanned<Vec<Vec<Vec<String>>>>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawIdeals {
    pub f: Spanned<Vec<Vec<String>>>,
    pub a: Spanned<Vec<Vec<String>>>,
    #[serde(rename = "P")]
    pub big_p: Option<Spanned<Vec<Vec<String>>>>,
    #[serde(rename = "Ptilde")]
    pub p_tilde: Option<Spanned<Vec<Vec<String>>>>,
    pub search_bound: Option<u64>,
    /// Ray-class representatives for L-values (declared complete).
    pub reps: Option<Spanned<Vec<Vec<Vec<String>>>>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawUnits {
    pub u: Spanned<Vec<Vec<String>>>,
    pub unit_index: Spanned<u64>,
    pub norm_order: Option<Spanned<u64>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawExponents {
    pub p: u32,
    pub q: u32,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawLValue {
    pub weight: Spanned<(i64, i64)>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawCharacter {
    pub modulus: Spanned<String>,
    pub values: Spanned<BTreeMap<String, String>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawNumerics {
    pub prec: Option<u32>,
    pub eps: Option<Spanned<String>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawPeriod {
    pub curve: Spanned<Vec<String>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawRecognize {
    pub degree: usize,
    pub height: Spanned<String>,
    #[serde(default)]
    pub verify: bool,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawCache {
    pub path: String,
}

pub struct Source<'a> {
    pub name: &'a str,
    pub text: &'a str,
}

impl Source<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    pub fn err<T>(&self, span: std::ops::Range<usize>, msg: impl std::fmt::Display) -> Result<T> {
        Err(Error::Validation(format!("{}:{}: {msg}", self.name, self.line(span.start))))
    }

    fn wrap<T>(&self, span: std::ops::Range<usize>, r: Result<T>) -> Result<T> {
        r.map_err(|e| Error::Validation(format!("{}:{}: {}", self.name, self.line(span.start), strip(&e))))
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

pub fn parse_raw(src: &Source) -> Result<RawConfig> {
    toml::from_str(src.text).map_err(|e| {
        let line = e.span().map(|s| src.line(s.start)).unwrap_or(0);
        Error::Validation(format!("{}:{}: {}", src.name, line, e.message()))
    })
}

/// The validated arithmetic content of a job file.
pub struct Job {
    pub field: ExtField,
    pub f: LIdeal,
    pub a: LIdeal,
    pub big_p: Option<LIdeal>,
    pub p_tilde: Option<LIdeal>,
    pub search_bound: u64,
    pub reps: Vec<LIdeal>,
    pub units: Vec<LElem>,
    pub unit_index: u64,
    pub norm_order: u64,
    pub exponents: Option<(u32, u32)>,
    pub weight: Option<(i64, i64)>,
    pub character: Option<FiniteCharacter>,
    pub prec: Option<u32>,
    pub eps: Option<f64>,
    pub curve: Option<[rug::Rational; 3]>,
    pub recognize: Option<(usize, rug::Integer, bool)>,
    pub cache: Option<String>,
}

fn elems(k: QuadField, v: &[String]) -> Result<Vec<QuadElem>> {
    v.iter().map(|s| k.parse_elem(s)).collect()
}

fn ideal(src: &Source, f: &ExtField, raw: &Spanned<Vec<Vec<String>>>, name: &str) -> Result<LIdeal> {
    let span = raw.span();
    let gens: Vec<LElem> = src.wrap(span.clone(), raw.get_ref().iter().map(|g| elems(f.base, g)).collect())?;
    if gens.is_empty() || gens.iter().any(|g| g.len() != f.n) {
        return src.err(span, format!("{name}: each generator needs {} coordinates", f.n));
    }
    if gens.iter().all(|g| f.is_zero(g)) {
        return src.err(span, format!("{name}: the zero ideal is not allowed"));
    }
    src.wrap(span, LIdeal::from_generators(f, &gens))
}

pub fn load(src: &Source) -> Result<Job> {
    let raw = parse_raw(src)?;
    let d = *raw.field.d.get_ref();
    let k = src.wrap(raw.field.d.span(), QuadField::new(d))?;
    let ext = &raw.extension;
    let g = src.wrap(ext.g.span(), elems(k, ext.g.get_ref()))?;
    let ib: KMat = src.wrap(ext.intbasis.span(), ext.intbasis.get_ref().iter().map(|r| elems(k, r)).collect())?;
    let field = src.wrap(ext.intbasis.span(), ExtField::new(k, g, ib))?;
    if let Some(mt) = &ext.multtable {
        let n = field.n;
        let t = mt.get_ref();
        if t.len() != n || t.iter().any(|r| r.len() != n) {
            return src.err(mt.span(), format!("multtable needs {n} rows of {n} entries (w_i·w_j)"));
        }
        for (i, j) in (0..n).flat_map(|i| (0..n).map(move |j| (i, j))) {
            let v = src.wrap(mt.span(), elems(k, &t[i][j]))?;
            if v != field.multtable[i][j] {
                return src.err(mt.span(), format!("multtable entry w{}·w{} disagrees with the product computed from g and intbasis", i + 1, j + 1));
            }
        }
    }
    let ids = &raw.ideals;
    let f = ideal(src, &field, &ids.f, "f")?;
    let a = ideal(src, &field, &ids.a, "a")?;
    let big_p = ids.big_p.as_ref().map(|x| ideal(src, &field, x, "P")).transpose()?;
    let p_tilde = ids.p_tilde.as_ref().map(|x| ideal(src, &field, x, "Ptilde")).transpose()?;
    let reps = match &ids.reps {
        Some(r) => {
            let mut out = Vec::new();
            for gens in r.get_ref() {
                let sp = Spanned::new(r.span(), gens.clone());
                out.push(ideal(src, &field, &sp, "reps")?);
            }
            out
        }
        None => vec![a.clone()],
    };
    let units: Vec<LElem> = src.wrap(raw.units.u.span(), raw.units.u.get_ref().iter().map(|u| elems(k, u)).collect())?;
    if units.iter().any(|u| u.len() != field.n) {
        return src.err(raw.units.u.span(), format!("each unit needs {} coordinates", field.n));
    }
    let emb = src.wrap(ext.g.span(), field.embeddings(128))?;
    let rep = validate_units(&field, &units, &f, &emb);
    if !rep.ok {
        return src.err(raw.units.u.span(), rep.lines.join("; "));
    }
    let unit_index = *raw.units.unit_index.get_ref();
    if unit_index == 0 {
        return src.err(raw.units.unit_index.span(), "unit_index must be positive");
    }
    let norm_order = raw.units.norm_order.as_ref().map(|x| *x.get_ref()).unwrap_or(1);
    let weight = raw.lvalue.as_ref().map(|l| *l.weight.get_ref());
    if let (Some(l), Some((p, q))) = (&raw.lvalue, weight) {
        if p >= 0 || q < 0 {
            return src.err(l.weight.span(), format!("weight must satisfy p < 0 ≤ q, got ({p}, {q})"));
        }
    }
    let character = match &raw.character {
        Some(c) => {
            let (p, q) = weight.unwrap_or((0, 0));
            Some(src.wrap(c.values.span(), FiniteCharacter::parse(k, c.modulus.get_ref(), c.values.get_ref(), p, q))?)
        }
        None => None,
    };
    let eps = match raw.numerics.as_ref().and_then(|n| n.eps.as_ref()) {
        Some(e) => match e.get_ref().parse::<f64>() {
            Ok(v) if v > 0.0 => Some(v),
            _ => return src.err(e.span(), format!("eps must be a positive number, got '{}'", e.get_ref())),
        },
        None => None,
    };
    let curve = match &raw.period {
        Some(p) => {
            let c = p.curve.get_ref();
            if c.len() != 3 {
                return src.err(p.curve.span(), "curve = [a2, a4, a6]");
            }
            let mut out: Vec<rug::Rational> = Vec::new();
            for s in c {
                match s.parse::<rug::Rational>() {
                    Ok(r) => out.push(r),
                    Err(_) => return src.err(p.curve.span(), format!("'{s}' is not a rational literal")),
                }
            }
            Some([out[0].clone(), out[1].clone(), out[2].clone()])
        }
        None => None,
    };
    let recognize = match &raw.recognize {
        Some(r) => match r.height.get_ref().parse::<rug::Integer>() {
            Ok(h) if h > 0 => Some((r.degree, h, r.verify)),
            _ => return src.err(r.height.span(), "height must be a positive integer literal"),
        },
        None => None,
    };
    Ok(Job {
        field,
        f,
        a,
        big_p,
        p_tilde,
        search_bound: ids.search_bound.unwrap_or(100),
        reps,
        units,
        unit_index,
        norm_order,
        exponents: raw.exponents.as_ref().map(|e| (e.p, e.q)),
        weight,
        character,
        prec: raw.numerics.as_ref().and_then(|n| n.prec),
        eps,
        curve,
        recognize,
        cache: raw.cache.as_ref().map(|c| c.path.clone()),
    })
}

/// ψ((g)) = χ(g mod 𝔪)·g^p·conj(g)^q for a finite character χ given by a
/// table of residues.
#[derive(Clone, Debug)]
pub struct FiniteCharacter {
    pub modulus: QuadElem,
    pub table: Vec<(QuadElem, QuadElem)>,
    pub p: i64,
    pub q: i64,
}

impl FiniteCharacter {
    pub fn parse(k: QuadField, modulus: &str, values: &BTreeMap<String, String>, p: i64, q: i64) -> Result<Self> {
        let m = k.parse_elem(modulus)?;
        if m.is_zero() || !m.is_integral() {
            return Err(Error::Validation("character modulus must be a nonzero integer of k".into()));
        }
        let mut table = Vec::new();
        for (r, v) in values {
            let r = k.parse_elem(r)?;
            let v = k.parse_elem(v)?;
            if v.norm() != 1 {
                return Err(Error::Validation(format!("character value {v} does not have absolute value 1")));
            }
            if table.iter().any(|(s, _): &(QuadElem, QuadElem)| (&r - s).div(&m).map(|x| x.is_integral()).unwrap_or(false)) {
                return Err(Error::Validation(format!("residue {r} listed twice modulo {m}")));
            }
            table.push((r, v));
        }
        let c = FiniteCharacter { modulus: m, table, p, q };
        for u in k.units() {
            let Some(x) = c.finite_part(&u) else {
                return Err(Error::Validation(format!("character table has no value for the unit {u}")));
            };
            let val = &(&x * &u.pow(p)?) * &u.conj().pow(q)?;
            if !val.is_one() {
                return Err(Error::Validation(format!("character is not trivial on the unit {u}, so it is not defined on ideals")));
            }
        }
        Ok(c)
    }

    fn finite_part(&self, g: &QuadElem) -> Option<QuadElem> {
        self.table
            .iter()
            .find(|(r, _)| (g - r).div(&self.modulus).map(|x| x.is_integral()).unwrap_or(false))
            .map(|(_, v)| v.clone())
    }

    /// ψ((g)); g must be prime to the modulus.
    pub fn eval(&self, g: &QuadElem, prec: u32) -> Result<BigComplex> {
        let x = self
            .finite_part(g)
            .ok_or_else(|| Error::Validation(format!("no character value for {g} modulo {}", self.modulus)))?;
        let v = &(&x * &g.pow(self.p)?) * &g.conj().pow(self.q)?;
        Ok(v.embed(prec))
    }
}
