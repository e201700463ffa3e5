use eisen_core::cocycle::{cocycle_eval, random_coefficients, random_point, MPolyPair};
use eisen_core::field::{QuadElem, QuadField, QuadIdeal, SUPPORTED_D};
use eisen_core::kronecker::{ke_accel, ke_direct, Evaluator, KEKey, Lattice1D};
use eisen_core::lattice::{apply_matrix, coset_reps, kmat, lambda_of_ideal, random_gamma0, GroupElement, KMat, OLattice};
use eisen_core::numerics::upper_incomplete_gamma;
use eisen_core::recognize::{cm_period, recognize_algebraic, PeriodSpec};
use eisen_core::{BigComplex, Error, Tolerance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::{Float, Integer};

fn field() -> impl Strategy<Value = QuadField> {
    prop::sample::select(SUPPORTED_D.to_vec()).prop_map(|d| QuadField::new(d).unwrap())
}

fn elem(k: QuadField, h: i64) -> impl Strategy<Value = QuadElem> {
    (-h..=h, -h..=h, 1i64..=6, 1i64..=6).prop_map(move |(a, b, da, db)| k.elem((a, da), (b, db)))
}

fn int_elem(k: QuadField, h: i64) -> impl Strategy<Value = QuadElem> {
    (-h..=h, -h..=h).prop_map(move |(a, b)| k.elem(a, b))
}

fn nonzero_int(k: QuadField, h: i64) -> impl Strategy<Value = QuadElem> {
    int_elem(k, h).prop_filter("nonzero", |x| !x.is_zero())
}

fn int_matrix(k: QuadField, n: usize) -> impl Strategy<Value = KMat> {
    prop::collection::vec(prop::collection::vec(int_elem(k, 2), n), n)
        .prop_filter("small nonzero determinant", |m| {
            let d = kmat::det(m);
            !d.is_zero() && d.norm() <= 20
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_recurrence(a in 0.05f64..40.0, x in 0.01f64..50.0) {
        let prec = 128;
        let af = Float::with_val(prec, a);
        let xf = Float::with_val(prec, x);
        let g0 = upper_incomplete_gamma(&af, &xf, prec).unwrap();
        let g1 = upper_incomplete_gamma(&Float::with_val(prec, &af + 1u32), &xf, prec).unwrap();
        let extra = Float::with_val(prec, Float::with_val(prec, xf.ln_ref()) * &af - &xf).exp();
        let rhs = g0.re.clone() * &af + &extra;
        let rel = Float::with_val(prec, &g1.re - &rhs).abs() / rhs.abs();
        prop_assert!(rel.to_f64() < 2f64.powi(8 - prec as i32), "a={a} x={x} rel={rel}");
    }

    #[test]
    fn embedding_is_multiplicative((k, x, y) in field().prop_flat_map(|k| (Just(k), elem(k, 1_000_000), elem(k, 1_000_000)))) {
        let prec = 160;
        let lhs = (&x * &y).embed(prec);
        let rhs = &x.embed(prec) * &y.embed(prec);
        let scale = lhs.mag().max(1.0);
        prop_assert!(lhs.dist(&rhs) <= 4.0 * 2f64.powi(4 - prec as i32) * scale, "{k:?}");
    }

    #[test]
    fn ideal_norm_is_multiplicative((_k, x, y) in field().prop_flat_map(|k| (Just(k), nonzero_int(k, 40), nonzero_int(k, 40)))) {
        let (i, j) = (QuadIdeal::new(x).unwrap(), QuadIdeal::new(y).unwrap());
        prop_assert_eq!(i.mul(&j).norm(), i.norm() * j.norm());
        prop_assert_eq!(i.mul(&j.inverse()).norm(), i.norm() / j.norm());
    }

    #[test]
    fn lattice_form_is_canonical((k, m, u) in field().prop_flat_map(|k| (Just(k), int_matrix(k, 2), int_matrix(k, 2)))) {
        // columns of m, and of m·u for unimodular-or-not u together with m's own columns
        let cols: Vec<Vec<QuadElem>> = (0..2).map(|j| kmat::column(&m, j)).collect();
        let mu = kmat::mul(&m, &u);
        let mut more: Vec<Vec<QuadElem>> = (0..2).map(|j| kmat::column(&mu, j)).collect();
        more.extend(cols.iter().rev().cloned());
        let a = OLattice::from_generators(k, 2, &cols).unwrap();
        let b = OLattice::from_generators(k, 2, &more).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn index_is_multiplicative((k, a, b) in field().prop_flat_map(|k| (Just(k), int_matrix(k, 2), int_matrix(k, 2)))) {
        let l = lambda_of_ideal(&QuadIdeal::unit(k), 2);
        let al = apply_matrix(&a, &l).unwrap();
        let abl = apply_matrix(&kmat::mul(&a, &b), &l).unwrap();
        prop_assert_eq!(abl.index_in(&l), al.index_in(&l) * abl.index_in(&al));
    }

    #[test]
    fn coset_reps_are_incongruent((k, a) in field().prop_flat_map(|k| (Just(k), int_matrix(k, 2)))) {
        let l = lambda_of_ideal(&QuadIdeal::unit(k), 2);
        let sub = apply_matrix(&a, &l).unwrap();
        let reps = coset_reps(&sub, &l).unwrap();
        prop_assert_eq!(Integer::from(reps.len()), sub.index_in(&l).numer().clone());
        for (i, r) in reps.iter().enumerate() {
            prop_assert!(l.contains(r));
            for s in &reps[..i] {
                let d: Vec<QuadElem> = r.iter().zip(s).map(|(x, y)| x - y).collect();
                prop_assert!(!sub.contains(&d));
            }
        }
    }
}

#[test]
fn prime_norms_multiply_to_ell_squared() {
    for d in SUPPORTED_D {
        let k = QuadField::new(d).unwrap();
        for ell in (2u64..=1000).filter(|n| (2..*n).take_while(|p| p * p <= *n).all(|p| n % p != 0)) {
            let ps = k.primes_above(ell).unwrap();
            let total = ps.iter().fold(Integer::from(1), |acc, p| {
                let nm = p.ideal.norm().numer().clone();
                acc * rug::ops::Pow::pow(nm, p.ram_index)
            });
            assert_eq!(total, ell * ell, "d={d} ell={ell}");
        }
    }
}

fn lat(k: QuadField, prec: u32) -> Lattice1D {
    Lattice1D::from_ideal(&QuadIdeal::unit(k), prec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ke_unit_covariance(d in prop::sample::select(vec![-1i64, -3]), p in 0u32..4, q in 0u32..3, x in 0.05f64..0.95, y in 0.05f64..0.45) {
        // c a generator of the unit group: c·O = O, so K(cz) = conj(c)^q c^{-(p+1)} K(z)
        let prec = 128;
        let k = QuadField::new(d).unwrap();
        let c = k.omega();
        let t = Tolerance::new(1e-30, prec).unwrap();
        let z = BigComplex::from_f64(x, y, prec);
        let cz = &c.embed(prec) * &z;
        let a = ke_accel(&KEKey::at_zero(p, q, z, lat(k, prec), prec), &t).unwrap();
        let b = ke_accel(&KEKey::at_zero(p, q, cz, lat(k, prec), prec), &t).unwrap();
        let ce = c.embed(prec);
        let factor = &ce.conj().powi(q as i64) * &ce.powi(-(p as i64) - 1);
        prop_assert!(b.dist(&(&factor * &a)) < 1e-27, "{b} vs {}", &factor * &a);
    }

    #[test]
    fn ke_translation(p in 0u32..4, q in 0u32..3, x in 0.05f64..0.95, y in 0.05f64..0.95, m in -3i64..3, n in -3i64..3) {
        let prec = 128;
        let k = QuadField::new(-2).unwrap();
        let t = Tolerance::new(1e-30, prec).unwrap();
        let z = BigComplex::from_f64(x, y, prec);
        let shift = k.elem(m, n).embed(prec);
        let a = ke_accel(&KEKey::at_zero(p, q, z.clone(), lat(k, prec), prec), &t).unwrap();
        let b = ke_accel(&KEKey::at_zero(p, q, &z + &shift, lat(k, prec), prec), &t).unwrap();
        prop_assert!(a.dist(&b) < 1e-27);
    }

    #[test]
    fn ke_continuation_in_s(p in 0u32..4, q in 0u32..2, x in 0.05f64..0.95, y in 0.05f64..0.95) {
        let prec = 128;
        let k = QuadField::new(-1).unwrap();
        let t = Tolerance::new(1e-30, prec).unwrap();
        let z = BigComplex::from_f64(x, y, prec);
        for s in [2.0, 3.0] {
            let key = KEKey { p, q, z: z.clone(), lat: lat(k, prec), s: Float::with_val(prec, s), prec };
            let a = ke_accel(&key, &t).unwrap();
            let b = ke_direct(&key, &t).unwrap();
            prop_assert!(a.dist(&b) < 1e-28, "s={s}");
        }
        let key = KEKey { p, q, z, lat: lat(k, 96), s: Float::with_val(96, 2.5), prec: 96 };
        let a = ke_accel(&key, &Tolerance::new(1e-20, 96).unwrap()).unwrap();
        let b = ke_direct(&key, &Tolerance::new(1e-8, 96).unwrap()).unwrap();
        prop_assert!(a.dist(&b) < 2e-8);
    }
}

fn nonsingular_tuple(k: QuadField, n: usize, pid: &QuadIdeal, rng: &mut ChaCha8Rng) -> Vec<GroupElement> {
    let o = QuadIdeal::unit(k);
    loop {
        let gs: Vec<GroupElement> = (0..n).map(|_| random_gamma0(k, n, pid, &o, 2 * n, 1, rng)).collect();
        let cols: Vec<_> = gs.iter().map(|g| g.first_column()).collect();
        if !kmat::det(&kmat::from_columns(&cols)).is_zero() {
            return gs;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn cocycle_is_additive_in_coefficients(seed in 0u64..1000) {
        let k = QuadField::new(-1).unwrap();
        let pid = QuadIdeal::new(k.elem(1, 1)).unwrap();
        let o = QuadIdeal::unit(k);
        let ev = Evaluator::new(128, 1e-30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gs = nonsingular_tuple(k, 2, &pid, &mut rng);
        let z = random_point(k, 2, &mut rng);
        let c1 = random_coefficients(k, 2, 1, 1, &mut rng);
        let c2 = random_coefficients(k, 2, 1, 1, &mut rng);
        let sum = MPolyPair::new(c1.p.add(&c2.p).unwrap(), c1.qbar.clone()).unwrap();
        let c2q = MPolyPair::new(c2.p.clone(), c1.qbar.clone()).unwrap();
        let eval = |c: &MPolyPair<QuadElem>| cocycle_eval(&z, &gs, c, &pid, &o, &ev);
        match (eval(&sum), eval(&c1), eval(&c2q)) {
            (Ok(s), Ok(a), Ok(b)) => prop_assert!(s.dist(&(&a + &b)) < 1e-25),
            (Err(Error::GeneralPosition(_)), _, _) => {}
            (r, _, _) => prop_assert!(false, "{:?}", r.err()),
        }
    }
}

#[test]
fn agm_iterations_are_logarithmic() {
    for d in SUPPORTED_D {
        for prec in [128u32, 256, 512, 1000] {
            let (_, _, it) = cm_period(&PeriodSpec::builtin(d).unwrap(), prec).unwrap();
            assert!(it as f64 <= (prec as f64).log2() + 10.0, "d={d} prec={prec}: {it}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadratic_irrationals_are_recognized(a in 1i64..50, b in -60i64..60, c in -60i64..60) {
        let disc = b * b - 4 * a * c;
        let r = (disc.unsigned_abs() as f64).sqrt() as i64;
        prop_assume!(disc != 0 && r * r != disc.abs());
        let g = Integer::from(a).gcd(&Integer::from(b)).gcd(&Integer::from(c));
        prop_assume!(g == 1);
        let root = |p: u32| {
            let s = Float::with_val(p, disc.abs()).sqrt();
            let den = Float::with_val(p, 2 * a);
            let v = if disc > 0 {
                BigComplex::real(Float::with_val(p, s - b) / &den)
            } else {
                BigComplex::new(Float::with_val(p, -b) / &den, s / &den)
            };
            Ok(v)
        };
        let prec = 192;
        let found = recognize_algebraic(&root(prec).unwrap(), 4, &Integer::from(10_000), prec, &root).unwrap().unwrap();
        let mut want = vec![Integer::from(c), Integer::from(b), Integer::from(a)];
        if found.minpoly[2] < 0 {
            want.iter_mut().for_each(|x| *x = -x.clone());
        }
        prop_assert_eq!(&found.minpoly, &want);
        prop_assert!(found.verified_residual < 2f64.powi(-(prec as i32) / 4));
    }
}
