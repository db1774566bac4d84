//! Dense linear algebra over a prime field, plus dual-number evaluation of
//! polynomials (value and differential at a jet point in one pass).

use std::collections::HashMap;

use crate::error::{McmError, Result};
use crate::polyring::{MultiPoly, PrimeField, Ring};

/// Rank of a dense matrix by in-place Gaussian elimination with fixed pivot order.
pub fn rank(f: &PrimeField, m: &mut [Vec<u64>]) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, p);
        let inv = f.inv(m[r][c]).expect("nonzero pivot");
        for i in r + 1..rows {
            if m[i][c] == 0 {
                continue;
            }
            let factor = f.mul(&m[i][c], &inv);
            for k in c..cols {
                let t = f.mul(&factor, &m[r][k]);
                m[i][k] = f.sub(&m[i][k], &t);
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

pub fn rank_of(f: &PrimeField, m: &[Vec<u64>]) -> usize {
    let mut copy = m.to_vec();
    rank(f, &mut copy)
}

/// Determinant of a square matrix by elimination.
pub fn det(f: &PrimeField, m: &[Vec<u64>]) -> Result<u64> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(McmError::ShapeError(format!("determinant of a non-square {n}-row matrix")));
    }
    let mut a = m.to_vec();
    let mut d = f.one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| a[i][c] != 0) else {
            return Ok(0);
        };
        if p != c {
            a.swap(p, c);
            d = f.neg(&d);
        }
        d = f.mul(&d, &a[c][c]);
        let inv = f.inv(a[c][c]).expect("nonzero pivot");
        for i in c + 1..n {
            if a[i][c] == 0 {
                continue;
            }
            let factor = f.mul(&a[i][c], &inv);
            for k in c..n {
                let t = f.mul(&factor, &a[c][k]);
                a[i][k] = f.sub(&a[i][k], &t);
            }
        }
    }
    Ok(d)
}

/// Solves `[[a, b], [c, d]] x = rhs`; `None` when singular.
pub fn solve2(f: &PrimeField, m: [[u64; 2]; 2], rhs: [u64; 2]) -> Option<[u64; 2]> {
    let det = f.sub(&f.mul(&m[0][0], &m[1][1]), &f.mul(&m[0][1], &m[1][0]));
    let inv = f.inv(det)?;
    let x0 = f.sub(&f.mul(&m[1][1], &rhs[0]), &f.mul(&m[0][1], &rhs[1]));
    let x1 = f.sub(&f.mul(&m[0][0], &rhs[1]), &f.mul(&m[1][0], &rhs[0]));
    Some([f.mul(&x0, &inv), f.mul(&x1, &inv)])
}

/// Value `P(z)` and differential `dP|_z(ξ)` of a plain polynomial, computed
/// with dual numbers so no coordinate is ever inverted.
pub struct DualEvaluator<'a> {
    f: &'a PrimeField,
    z: &'a [u64],
    xi: &'a [u64],
    cache: HashMap<(usize, u32), (u64, u64)>,
}

impl<'a> DualEvaluator<'a> {
    pub fn new(f: &'a PrimeField, z: &'a [u64], xi: &'a [u64]) -> Self {
        DualEvaluator { f, z, xi, cache: HashMap::new() }
    }

    /// `(z_k^e, e·z_k^{e-1}·ξ_k)`.
    pub fn power(&mut self, k: usize, e: u32) -> (u64, u64) {
        let (f, z, xi) = (self.f, self.z, self.xi);
        *self.cache.entry((k, e)).or_insert_with(|| {
            if e == 0 {
                return (f.one(), 0);
            }
            let below = f.pow(&z[k], (e - 1) as u64);
            let val = f.mul(&below, &z[k]);
            let der = f.mul(&f.mul(&f.from_u64(e as u64), &below), &xi[k]);
            (val, der)
        })
    }

    /// Dual value of a monomial given by its exponent vector.
    pub fn monomial(&mut self, exps: &[u32]) -> (u64, u64) {
        let f = self.f;
        let mut acc = (f.one(), 0u64);
        for (k, &e) in exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let p = self.power(k, e);
            acc = dual_mul(f, acc, p);
        }
        acc
    }

    pub fn poly(&mut self, p: &MultiPoly<PrimeField>) -> (u64, u64) {
        let f = self.f;
        let n = self.z.len();
        let mut total = (0u64, 0u64);
        for (m, c) in p.terms() {
            let (v, d) = self.monomial(&m.0[..n]);
            total.0 = f.add(&total.0, &f.mul(c, &v));
            total.1 = f.add(&total.1, &f.mul(c, &d));
        }
        total
    }
}

pub fn dual_mul(f: &PrimeField, a: (u64, u64), b: (u64, u64)) -> (u64, u64) {
    (f.mul(&a.0, &b.0), f.add(&f.mul(&a.1, &b.0), &f.mul(&a.0, &b.1)))
}
