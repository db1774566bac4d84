//! Sparse multivariate polynomials over a [`Ring`], optionally graded by a
//! second block of commuting differential variables `dz_0..dz_N`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::ring::Ring;
use crate::error::{McmError, Result};

/// Exponent vector. In graded arity the first `n_z` entries belong to
/// `z_0..z_{n_z-1}` and the remaining `n_z` to `dz_0..dz_{n_z-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize, e: u32) -> Self {
        let mut v = vec![0; nvars];
        v[i] = e;
        Monomial(v)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `other / self`, assuming divisibility.
    pub fn quotient_of(&self, other: &Monomial) -> Monomial {
        Monomial(other.0.iter().zip(&self.0).map(|(a, b)| a - b).collect())
    }
}

impl Ord for Monomial {
    /// Graded lexicographic order with `z_0 > … > z_N > dz_0 > … > dz_N`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Variable layout of a polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arity {
    pub n_z: usize,
    pub graded: bool,
}

impl Arity {
    pub fn plain(n_z: usize) -> Self {
        Arity { n_z, graded: false }
    }

    pub fn graded(n_z: usize) -> Self {
        Arity { n_z, graded: true }
    }

    pub fn nvars(&self) -> usize {
        if self.graded {
            2 * self.n_z
        } else {
            self.n_z
        }
    }
}

/// Homogeneity status of a polynomial in the `z` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    Zero,
    Degree(u64),
    Mixed,
}

/// Which arithmetic operation [`ring_arithmetic`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Mul,
    ExactDivide,
}

/// Sparse polynomial: terms sorted strictly decreasing, no zero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly<R: Ring> {
    ring: R,
    arity: Arity,
    terms: Vec<(Monomial, R::Elem)>,
}

impl<R: Ring> MultiPoly<R> {
    pub fn zero(ring: R, arity: Arity) -> Self {
        MultiPoly { ring, arity, terms: Vec::new() }
    }

    pub fn constant(ring: R, arity: Arity, c: R::Elem) -> Self {
        Self::monomial(ring, arity, Monomial::one(arity.nvars()), c)
    }

    pub fn one(ring: R, arity: Arity) -> Self {
        let c = ring.one();
        Self::constant(ring, arity, c)
    }

    pub fn monomial(ring: R, arity: Arity, m: Monomial, c: R::Elem) -> Self {
        assert_eq!(m.0.len(), arity.nvars(), "monomial length must match arity");
        let terms = if ring.is_zero(&c) { vec![] } else { vec![(m, c)] };
        MultiPoly { ring, arity, terms }
    }

    /// The variable `z_i`.
    pub fn z(ring: R, arity: Arity, i: usize) -> Self {
        let one = ring.one();
        Self::monomial(ring, arity, Monomial::var(arity.nvars(), i, 1), one)
    }

    /// The differential variable `dz_i` (graded arity only).
    pub fn dz(ring: R, arity: Arity, i: usize) -> Self {
        assert!(arity.graded, "dz requires graded arity");
        let one = ring.one();
        Self::monomial(ring, arity, Monomial::var(arity.nvars(), arity.n_z + i, 1), one)
    }

    /// Builds a polynomial from arbitrary terms, combining duplicates.
    pub fn from_terms<I>(ring: R, arity: Arity, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, R::Elem)>,
    {
        let mut acc: BTreeMap<Monomial, R::Elem> = BTreeMap::new();
        for (m, c) in terms {
            assert_eq!(m.0.len(), arity.nvars(), "monomial length must match arity");
            match acc.get_mut(&m) {
                Some(v) => *v = ring.add(v, &c),
                None => {
                    acc.insert(m, c);
                }
            }
        }
        let terms = acc
            .into_iter()
            .rev()
            .filter(|(_, c)| !ring.is_zero(c))
            .collect();
        MultiPoly { ring, arity, terms }
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn terms(&self) -> &[(Monomial, R::Elem)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading_term(&self) -> Option<&(Monomial, R::Elem)> {
        self.terms.first()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.ring != other.ring {
            return Err(McmError::RingMismatch(format!(
                "{:?} vs {:?}",
                self.ring.descriptor(),
                other.ring.descriptor()
            )));
        }
        if self.arity != other.arity {
            return Err(McmError::ArityError(format!(
                "{:?} vs {:?}",
                self.arity, other.arity
            )));
        }
        Ok(())
    }

    fn merge(&self, other: &Self, negate_other: bool) -> Self {
        let r = &self.ring;
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let oth = |c: &R::Elem| if negate_other { r.neg(c) } else { c.clone() };
        while i < self.terms.len() && j < other.terms.len() {
            let (ma, ca) = &self.terms[i];
            let (mb, cb) = &other.terms[j];
            match ma.cmp(mb) {
                Ordering::Greater => {
                    out.push((ma.clone(), ca.clone()));
                    i += 1;
                }
                Ordering::Less => {
                    out.push((mb.clone(), oth(cb)));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = if negate_other { r.sub(ca, cb) } else { r.add(ca, cb) };
                    if !r.is_zero(&c) {
                        out.push((ma.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(self.terms[i..].iter().cloned());
        out.extend(other.terms[j..].iter().map(|(m, c)| (m.clone(), oth(c))));
        MultiPoly { ring: self.ring.clone(), arity: self.arity, terms: out }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.merge(other, false))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.merge(other, true))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let r = &self.ring;
        let mut acc: BTreeMap<Monomial, R::Elem> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let c = r.mul(ca, cb);
                match acc.get_mut(&m) {
                    Some(v) => *v = r.add(v, &c),
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        let terms = acc.into_iter().rev().filter(|(_, c)| !r.is_zero(c)).collect();
        Ok(MultiPoly { ring: self.ring.clone(), arity: self.arity, terms })
    }

    pub fn neg(&self) -> Self {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), self.ring.neg(c))).collect();
        MultiPoly { ring: self.ring.clone(), arity: self.arity, terms }
    }

    pub fn scale(&self, c: &R::Elem) -> Self {
        let r = &self.ring;
        let terms = self
            .terms
            .iter()
            .map(|(m, a)| (m.clone(), r.mul(a, c)))
            .filter(|(_, a)| !r.is_zero(a))
            .collect();
        MultiPoly { ring: self.ring.clone(), arity: self.arity, terms }
    }

    /// Multiplies by a monomial; the term order is preserved.
    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        let terms = self.terms.iter().map(|(a, c)| (a.mul(m), c.clone())).collect();
        MultiPoly { ring: self.ring.clone(), arity: self.arity, terms }
    }

    /// Multiplies by `z_i^e`.
    pub fn mul_var_pow(&self, i: usize, e: u32) -> Self {
        self.mul_monomial(&Monomial::var(self.arity.nvars(), i, e))
    }

    /// Exact division by a monomial.
    pub fn div_monomial(&self, m: &Monomial) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (a, c) in &self.terms {
            if !m.divides(a) {
                return Err(McmError::DivisionNotExact);
            }
            terms.push((m.quotient_of(a), c.clone()));
        }
        Ok(MultiPoly { ring: self.ring.clone(), arity: self.arity, terms })
    }

    /// Exact division by `z_i^e`.
    pub fn div_var_pow(&self, i: usize, e: u32) -> Result<Self> {
        self.div_monomial(&Monomial::var(self.arity.nvars(), i, e))
    }

    /// Exact division by an arbitrary nonzero polynomial.
    pub fn exact_divide(&self, b: &Self) -> Result<Self> {
        self.check_compatible(b)?;
        let (lm_b, lc_b) = b.leading_term().ok_or(McmError::DivisionNotExact)?.clone();
        if b.len() == 1 {
            let r = &self.ring;
            let mut terms = Vec::with_capacity(self.terms.len());
            for (a, c) in &self.terms {
                if !lm_b.divides(a) {
                    return Err(McmError::DivisionNotExact);
                }
                let q = r.exact_div(c, &lc_b).ok_or(McmError::DivisionNotExact)?;
                terms.push((lm_b.quotient_of(a), q));
            }
            return Ok(MultiPoly { ring: self.ring.clone(), arity: self.arity, terms });
        }
        let mut rem = self.clone();
        let mut quot = Vec::new();
        while let Some((lm, lc)) = rem.leading_term().cloned() {
            if !lm_b.divides(&lm) {
                return Err(McmError::DivisionNotExact);
            }
            let qc = self.ring.exact_div(&lc, &lc_b).ok_or(McmError::DivisionNotExact)?;
            let qm = lm_b.quotient_of(&lm);
            let step = b.mul_monomial(&qm).scale(&qc);
            rem = rem.merge(&step, true);
            quot.push((qm, qc));
        }
        Ok(MultiPoly { ring: self.ring.clone(), arity: self.arity, terms: quot })
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.ring.clone(), self.arity);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Degree of a monomial in the `z` block.
    pub fn z_degree_of(&self, m: &Monomial) -> u64 {
        m.0[..self.arity.n_z].iter().map(|&e| e as u64).sum()
    }

    /// Degree of a monomial in the `dz` block (zero in plain arity).
    pub fn dz_degree_of(&self, m: &Monomial) -> u64 {
        if self.arity.graded {
            m.0[self.arity.n_z..].iter().map(|&e| e as u64).sum()
        } else {
            0
        }
    }

    /// Homogeneity with respect to the `z` block.
    pub fn homogeneity(&self) -> Homogeneity {
        let mut it = self.terms.iter().map(|(m, _)| self.z_degree_of(m));
        match it.next() {
            None => Homogeneity::Zero,
            Some(d) => {
                if it.all(|e| e == d) {
                    Homogeneity::Degree(d)
                } else {
                    Homogeneity::Mixed
                }
            }
        }
    }

    pub fn is_homogeneous_of(&self, g: u64) -> bool {
        matches!(self.homogeneity(), Homogeneity::Zero)
            || self.homogeneity() == Homogeneity::Degree(g)
    }

    /// Evaluates at `z` (and `dz := xi` when graded).
    pub fn evaluate(&self, z: &[R::Elem], xi: Option<&[R::Elem]>) -> Result<R::Elem> {
        let n = self.arity.n_z;
        if z.len() != n {
            return Err(McmError::ArityError(format!("point has {} coordinates, expected {n}", z.len())));
        }
        let needs_xi = self.arity.graded && self.terms.iter().any(|(m, _)| self.dz_degree_of(m) > 0);
        if let Some(x) = xi {
            if x.len() != n {
                return Err(McmError::ArityError(format!("direction has {} coordinates, expected {n}", x.len())));
            }
        } else if needs_xi {
            return Err(McmError::ArityError("a tangent direction is required".into()));
        }
        let r = &self.ring;
        let mut cache: BTreeMap<(usize, u32), R::Elem> = BTreeMap::new();
        let mut total = r.zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for (k, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let p = cache.entry((k, e)).or_insert_with(|| {
                    let base = if k < n { &z[k] } else { &xi.expect("checked")[k - n] };
                    r.pow(base, e as u64)
                });
                v = r.mul(&v, p);
            }
            total = r.add(&total, &v);
        }
        Ok(total)
    }

    /// Re-embeds a plain polynomial in graded arity (no `dz` factors).
    pub fn to_graded(&self) -> Self {
        if self.arity.graded {
            return self.clone();
        }
        let n = self.arity.n_z;
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut e = m.0.clone();
                e.resize(2 * n, 0);
                (Monomial(e), c.clone())
            })
            .collect();
        MultiPoly { ring: self.ring.clone(), arity: Arity::graded(n), terms }
    }

    /// Drops the `dz` block of a graded polynomial whose `dz`-degree is zero.
    pub fn to_plain(&self) -> Result<Self> {
        if !self.arity.graded {
            return Ok(self.clone());
        }
        let n = self.arity.n_z;
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            if self.dz_degree_of(m) != 0 {
                return Err(McmError::InvalidGrade("polynomial involves dz variables".into()));
            }
            terms.push((Monomial(m.0[..n].to_vec()), c.clone()));
        }
        Ok(MultiPoly { ring: self.ring.clone(), arity: Arity::plain(n), terms })
    }

    /// Partial derivative with respect to `z_i` (plain arity).
    pub fn partial(&self, i: usize) -> Self {
        let r = &self.ring;
        let terms: Vec<_> = self
            .terms
            .iter()
            .filter(|(m, _)| m.0[i] > 0)
            .map(|(m, c)| {
                let mut e = m.0.clone();
                let k = e[i];
                e[i] -= 1;
                (Monomial(e), r.mul(c, &r.from_u64(k as u64)))
            })
            .collect();
        Self::from_terms(self.ring.clone(), self.arity, terms)
    }
}

/// Checked arithmetic entry point.
pub fn ring_arithmetic<R: Ring>(a: &MultiPoly<R>, b: &MultiPoly<R>, op: ArithOp) -> Result<MultiPoly<R>> {
    match op {
        ArithOp::Add => a.try_add(b),
        ArithOp::Mul => a.try_mul(b),
        ArithOp::ExactDivide => a.exact_divide(b),
    }
}

impl<R: Ring> Add for &MultiPoly<R> {
    type Output = MultiPoly<R>;
    fn add(self, rhs: Self) -> MultiPoly<R> {
        self.try_add(rhs).expect("incompatible operands")
    }
}

impl<R: Ring> Sub for &MultiPoly<R> {
    type Output = MultiPoly<R>;
    fn sub(self, rhs: Self) -> MultiPoly<R> {
        self.try_sub(rhs).expect("incompatible operands")
    }
}

impl<R: Ring> Mul for &MultiPoly<R> {
    type Output = MultiPoly<R>;
    fn mul(self, rhs: Self) -> MultiPoly<R> {
        self.try_mul(rhs).expect("incompatible operands")
    }
}

impl<R: Ring> Neg for &MultiPoly<R> {
    type Output = MultiPoly<R>;
    fn neg(self) -> MultiPoly<R> {
        MultiPoly::neg(self)
    }
}
