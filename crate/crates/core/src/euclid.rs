//! Hermite and Smith normal forms over a Euclidean ring (Z or O), acting on
//! column-generator matrices stored row-major.

use crate::field::{gcd_extended, QuadElem, QuadIdeal};
use rug::Integer;
use std::fmt::Debug;

pub trait ERing: Clone + PartialEq + Debug {
    /// Zero/one in the same ring as `self` (needed for O, which carries d).
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn size(&self) -> Integer;
    fn quo_rem(&self, o: &Self) -> (Self, Self);
    /// (g, s, t) with g = s·self + t·o.
    fn xgcd(&self, o: &Self) -> (Self, Self, Self);
    /// Unit u with u·self the canonical associate.
    fn normalizing_unit(&self) -> Self;
    /// Canonical representative of self modulo m ≠ 0.
    fn reduce_mod(&self, m: &Self) -> Self;
    fn divides(&self, o: &Self) -> bool {
        o.quo_rem(self).1.is_zero()
    }
}

impl ERing for Integer {
    fn zero_like(&self) -> Self {
        Integer::new()
    }
    fn one_like(&self) -> Self {
        Integer::from(1)
    }
    fn is_zero(&self) -> bool {
        self.cmp0() == std::cmp::Ordering::Equal
    }
    fn add(&self, o: &Self) -> Self {
        Integer::from(self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Integer::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Integer::from(self * o)
    }
    fn neg(&self) -> Self {
        Integer::from(-self)
    }
    fn size(&self) -> Integer {
        Integer::from(self.abs_ref())
    }
    fn quo_rem(&self, o: &Self) -> (Self, Self) {
        let (q, r) = <(Integer, Integer)>::from(self.div_rem_floor_ref(o));
        (q, r)
    }
    fn xgcd(&self, o: &Self) -> (Self, Self, Self) {
        let (g, s, t) = <(Integer, Integer, Integer)>::from(self.gcd_cofactors_ref(o));
        (g, s, t)
    }
    fn normalizing_unit(&self) -> Self {
        if *self < 0 {
            Integer::from(-1)
        } else {
            Integer::from(1)
        }
    }
    fn reduce_mod(&self, m: &Self) -> Self {
        let m = Integer::from(m.abs_ref());
        let mut r = Integer::from(self % &m);
        if r < 0 {
            r += &m;
        }
        r
    }
}

impl ERing for QuadElem {
    fn zero_like(&self) -> Self {
        self.field().zero()
    }
    fn one_like(&self) -> Self {
        self.field().one()
    }
    fn is_zero(&self) -> bool {
        QuadElem::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn size(&self) -> Integer {
        self.norm().numer().clone()
    }
    fn quo_rem(&self, o: &Self) -> (Self, Self) {
        crate::field::div_rem(self, o)
    }
    fn xgcd(&self, o: &Self) -> (Self, Self, Self) {
        gcd_extended(self, o).expect("xgcd over O")
    }
    fn normalizing_unit(&self) -> Self {
        if QuadElem::is_zero(self) {
            return self.one_like();
        }
        let units = self.field().units();
        units.into_iter().max_by(|u, v| (u * self).key_cmp(&(v * self))).unwrap()
    }
    fn reduce_mod(&self, m: &Self) -> Self {
        QuadIdeal::new(m.clone()).expect("nonzero modulus").reduce(self)
    }
}

pub type Mat<T> = Vec<Vec<T>>;

fn col_combo<T: ERing>(h: &mut Mat<T>, a: usize, b: usize, m: [&T; 4]) {
    // (col_a, col_b) <- (m0 col_a + m1 col_b, m2 col_a + m3 col_b)
    for row in h.iter_mut() {
        let xa = row[a].clone();
        let xb = row[b].clone();
        row[a] = m[0].mul(&xa).add(&m[1].mul(&xb));
        row[b] = m[2].mul(&xa).add(&m[3].mul(&xb));
    }
}

/// Column HNF of a full-row-rank generator matrix (rows × gens): returns the
/// square upper-triangular basis with canonical pivots and reduced entries
/// to the right of each pivot. None if the rank is deficient.
pub fn hnf_columns<T: ERing>(gens: &Mat<T>) -> Option<Mat<T>> {
    let m = gens.len();
    if m == 0 {
        return Some(vec![]);
    }
    let k = gens[0].len();
    let mut h = gens.clone();
    let mut free: Vec<usize> = (0..k).collect();
    let mut pivots = vec![0usize; m];
    for i in (0..m).rev() {
        // gather the row-i entries of the free columns into one pivot column
        let nz: Vec<usize> = free.iter().copied().filter(|&c| !h[i][c].is_zero()).collect();
        if nz.is_empty() {
            return None;
        }
        let piv = nz[0];
        for &c in &nz[1..] {
            let a = h[i][piv].clone();
            let b = h[i][c].clone();
            if b.is_zero() {
                continue;
            }
            let (g, s, t) = a.xgcd(&b);
            let (ag, _) = a.quo_rem(&g);
            let (bg, _) = b.quo_rem(&g);
            let nbg = bg.neg();
            col_combo(&mut h, piv, c, [&s, &t, &nbg, &ag]);
        }
        let u = h[i][piv].normalizing_unit();
        for row in h.iter_mut() {
            row[piv] = row[piv].mul(&u);
        }
        pivots[i] = piv;
        free.retain(|&c| c != piv);
    }
    let mut out: Mat<T> = (0..m).map(|r| pivots.iter().map(|&c| h[r][c].clone()).collect()).collect();
    for j in 1..m {
        for i in (0..j).rev() {
            let p = out[i][i].clone();
            let red = out[i][j].reduce_mod(&p);
            let diff = out[i][j].sub(&red);
            let (q, r) = diff.quo_rem(&p);
            debug_assert!(r.is_zero());
            if !q.is_zero() {
                for row in 0..=i {
                    let t = out[row][i].mul(&q);
                    out[row][j] = out[row][j].sub(&t);
                }
            }
        }
    }
    Some(out)
}

/// Smith form of a square nonsingular matrix: returns the diagonal and U⁻¹
/// where U·T·V = diag, so the columns of B·U⁻¹ realize the elementary
/// divisors for a module with basis B and submodule basis B·T.
pub fn snf_left<T: ERing>(t: &Mat<T>) -> (Vec<T>, Mat<T>) {
    let n = t.len();
    let mut a = t.clone();
    let z = a[0][0].zero_like();
    let o = a[0][0].one_like();
    let mut uinv: Mat<T> = (0..n).map(|i| (0..n).map(|j| if i == j { o.clone() } else { z.clone() }).collect()).collect();
    for s in 0..n {
        loop {
            // smallest nonzero in the trailing block
            let mut best: Option<(Integer, usize, usize)> = None;
            for i in s..n {
                for j in s..n {
                    if !a[i][j].is_zero() {
                        let sz = a[i][j].size();
                        if best.as_ref().map_or(true, |b| sz < b.0) {
                            best = Some((sz, i, j));
                        }
                    }
                }
            }
            let Some((_, pi, pj)) = best else { break };
            if pi != s {
                a.swap(pi, s);
                for row in uinv.iter_mut() {
                    row.swap(pi, s);
                }
            }
            if pj != s {
                for row in a.iter_mut() {
                    row.swap(pj, s);
                }
            }
            let mut clean = true;
            for i in s + 1..n {
                if a[i][s].is_zero() {
                    continue;
                }
                let (q, r) = a[i][s].quo_rem(&a[s][s]);
                for j in s..n {
                    let v = a[s][j].mul(&q);
                    a[i][j] = a[i][j].sub(&v);
                }
                // col_s += q col_i in U⁻¹
                for row in uinv.iter_mut() {
                    let v = row[i].mul(&q);
                    row[s] = row[s].add(&v);
                }
                if !r.is_zero() {
                    clean = false;
                }
            }
            for j in s + 1..n {
                if a[s][j].is_zero() {
                    continue;
                }
                let (q, r) = a[s][j].quo_rem(&a[s][s]);
                for row in a.iter_mut().skip(s) {
                    let v = row[s].mul(&q);
                    row[j] = row[j].sub(&v);
                }
                if !r.is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            // divisibility of the trailing block
            let mut bad = None;
            'outer: for i in s + 1..n {
                for j in s + 1..n {
                    if !a[s][s].divides(&a[i][j]) {
                        bad = Some(i);
                        break 'outer;
                    }
                }
            }
            match bad {
                Some(i) => {
                    // row_s += row_i ; U⁻¹: col_i -= col_s
                    for j in s..n {
                        let v = a[i][j].clone();
                        a[s][j] = a[s][j].add(&v);
                    }
                    for row in uinv.iter_mut() {
                        let v = row[s].clone();
                        row[i] = row[i].sub(&v);
                    }
                }
                None => break,
            }
        }
        if !a[s][s].is_zero() {
            let u = a[s][s].normalizing_unit();
            if u != o {
                // row_s *= u ; U⁻¹: col_s *= u⁻¹
                let (uinv_unit, _) = o.quo_rem(&u);
                for j in s..n {
                    a[s][j] = a[s][j].mul(&u);
                }
                for row in uinv.iter_mut() {
                    row[s] = row[s].mul(&uinv_unit);
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i].clone()).collect(), uinv)
}

pub fn mat_mul<T: ERing>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let z = a[0][0].zero_like();
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut c = vec![vec![z; m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                let v = a[i][l].mul(&b[l][j]);
                c[i][j] = c[i][j].add(&v);
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::QuadField;

    fn im(rows: &[&[i64]]) -> Mat<Integer> {
        rows.iter().map(|r| r.iter().map(|&x| Integer::from(x)).collect()).collect()
    }

    #[test]
    fn hnf_is_canonical() {
        let a = im(&[&[2, 4, 1], &[0, 6, 3]]);
        let b = im(&[&[1, 2, 3], &[3, 0, 3]]);
        let ha = hnf_columns(&a).unwrap();
        assert_eq!(ha, hnf_columns(&im(&[&[1, 2, 4, 6], &[3, 0, 6, 6]])).unwrap());
        assert!(ha[1][0] == 0 && ha[0][0] > 0 && ha[1][1] > 0);
        let hb = hnf_columns(&b).unwrap();
        assert!(hb[0][1] >= 0 && hb[0][1] < hb[0][0]);
        assert!(hnf_columns(&im(&[&[1, 2], &[2, 4]])).is_none());
    }

    #[test]
    fn snf_diag() {
        let t = im(&[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]);
        let (d, uinv) = snf_left(&t);
        assert_eq!(d, vec![Integer::from(2), Integer::from(6), Integer::from(12)]);
        // U⁻¹ is unimodular
        let det = {
            let m = &uinv;
            let f = |i: usize, j: usize| m[i][j].clone();
            f(0, 0) * (f(1, 1) * f(2, 2) - f(1, 2) * f(2, 1)) - f(0, 1) * (f(1, 0) * f(2, 2) - f(1, 2) * f(2, 0))
                + f(0, 2) * (f(1, 0) * f(2, 1) - f(1, 1) * f(2, 0))
        };
        assert_eq!(det.abs(), 1);
    }

    #[test]
    fn hnf_over_gaussian_integers() {
        let f = QuadField::new(-1).unwrap();
        let gens = vec![vec![f.elem(2, 0), f.elem(1, 1)], vec![f.elem(0, 0), f.elem(3, 0)]];
        let h = hnf_columns(&gens).unwrap();
        assert!(h[1][0].is_zero());
        // det = 2·3 up to units, and the lattice contains (1+i, 3)
        assert_eq!((&h[0][0] * &h[1][1]).norm(), 36);
    }
}
