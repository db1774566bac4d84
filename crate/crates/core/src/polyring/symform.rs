//! Symmetric differential forms: graded polynomials of uniform `dz`-degree.

use super::poly::{Arity, Homogeneity, Monomial, MultiPoly};
use super::ring::Ring;
use crate::error::{McmError, Result};

/// A polynomial in `(z, dz)` whose monomials all have `dz`-degree `form_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymForm<R: Ring> {
    poly: MultiPoly<R>,
    form_degree: u32,
}

impl<R: Ring> SymForm<R> {
    pub fn new(poly: MultiPoly<R>, form_degree: u32) -> Result<Self> {
        let poly = poly.to_graded();
        if let Some((m, _)) = poly
            .terms()
            .iter()
            .find(|(m, _)| poly.dz_degree_of(m) != form_degree as u64)
        {
            return Err(McmError::InvalidGrade(format!(
                "monomial {:?} has dz-degree {} instead of {form_degree}",
                m.0,
                poly.dz_degree_of(m)
            )));
        }
        Ok(SymForm { poly, form_degree })
    }

    pub fn zero(ring: R, n_z: usize, form_degree: u32) -> Self {
        SymForm { poly: MultiPoly::zero(ring, Arity::graded(n_z)), form_degree }
    }

    /// A function viewed as a form of degree zero.
    pub fn from_plain(p: &MultiPoly<R>) -> Self {
        SymForm { poly: p.to_graded(), form_degree: 0 }
    }

    pub fn poly(&self) -> &MultiPoly<R> {
        &self.poly
    }

    pub fn into_poly(self) -> MultiPoly<R> {
        self.poly
    }

    pub fn form_degree(&self) -> u32 {
        self.form_degree
    }

    pub fn n_z(&self) -> usize {
        self.poly.arity().n_z
    }

    pub fn ring(&self) -> &R {
        self.poly.ring()
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_degree(other)?;
        Ok(SymForm { poly: self.poly.try_add(&other.poly)?, form_degree: self.form_degree })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.same_degree(other)?;
        Ok(SymForm { poly: self.poly.try_sub(&other.poly)?, form_degree: self.form_degree })
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        Ok(SymForm {
            poly: self.poly.try_mul(&other.poly)?,
            form_degree: self.form_degree + other.form_degree,
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        self.try_add(other).expect("incompatible forms")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.try_sub(other).expect("incompatible forms")
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.try_mul(other).expect("incompatible forms")
    }

    pub fn neg(&self) -> Self {
        SymForm { poly: self.poly.neg(), form_degree: self.form_degree }
    }

    pub fn scale(&self, c: &R::Elem) -> Self {
        SymForm { poly: self.poly.scale(c), form_degree: self.form_degree }
    }

    /// Multiplies by a function (a polynomial in `z` only).
    pub fn mul_plain(&self, f: &MultiPoly<R>) -> Self {
        SymForm { poly: &self.poly * &f.to_graded(), form_degree: self.form_degree }
    }

    /// Multiplies by `z_i^e`.
    pub fn mul_z_pow(&self, i: usize, e: u32) -> Self {
        SymForm { poly: self.poly.mul_var_pow(i, e), form_degree: self.form_degree }
    }

    /// Exact division by a `z`-monomial.
    pub fn div_z_monomial(&self, zexp: &[u32]) -> Result<Self> {
        let mut e = zexp.to_vec();
        e.resize(2 * self.n_z(), 0);
        Ok(SymForm { poly: self.poly.div_monomial(&Monomial(e))?, form_degree: self.form_degree })
    }

    /// Evaluates at `(z, xi)`; `xi` is required when the degree is positive.
    pub fn evaluate(&self, z: &[R::Elem], xi: Option<&[R::Elem]>) -> Result<R::Elem> {
        if self.form_degree > 0 && xi.is_none() {
            return Err(McmError::ArityError("a tangent direction is required".into()));
        }
        self.poly.evaluate(z, xi)
    }

    /// Homogeneity in the `z` block.
    pub fn homogeneity(&self) -> Homogeneity {
        self.poly.homogeneity()
    }

    fn same_degree(&self, other: &Self) -> Result<()> {
        if self.form_degree != other.form_degree {
            return Err(McmError::InvalidGrade(format!(
                "form degrees {} and {} differ",
                self.form_degree, other.form_degree
            )));
        }
        Ok(())
    }

    /// Substitutes `dz_j := z_j`, returning a function.
    pub fn contract_with_position(&self) -> MultiPoly<R> {
        let n = self.n_z();
        let terms = self.poly.terms().iter().map(|(m, c)| {
            let e: Vec<u32> = (0..n).map(|j| m.0[j] + m.0[n + j]).collect();
            (Monomial(e), c.clone())
        });
        MultiPoly::from_terms(self.poly.ring().clone(), Arity::plain(n), terms)
    }
}

/// The formal differential `dP = Σ ∂P/∂z_j dz_j` of a function.
pub fn formal_differential<R: Ring>(p: &MultiPoly<R>) -> Result<SymForm<R>> {
    if p.arity().graded {
        return Err(McmError::InvalidGrade("formal differential expects a function of z only".into()));
    }
    let n = p.arity().n_z;
    let r = p.ring();
    let mut terms = Vec::new();
    for (m, c) in p.terms() {
        for j in 0..n {
            let k = m.0[j];
            if k == 0 {
                continue;
            }
            let mut e = Vec::with_capacity(2 * n);
            e.extend_from_slice(&m.0);
            e[j] -= 1;
            e.resize(2 * n, 0);
            e[n + j] = 1;
            terms.push((Monomial(e), r.mul(c, &r.from_u64(k as u64))));
        }
    }
    let poly = MultiPoly::from_terms(r.clone(), Arity::graded(n), terms);
    Ok(SymForm { poly, form_degree: 1 })
}

/// `dP(z)[z] - g·P` for a homogeneous `P` of degree `g`; zero by Euler's identity.
pub fn euler_residual<R: Ring>(p: &MultiPoly<R>) -> Result<MultiPoly<R>> {
    let g = match p.homogeneity() {
        Homogeneity::Zero => return Ok(p.clone()),
        Homogeneity::Degree(g) => g,
        Homogeneity::Mixed => return Err(McmError::NotHomogeneous),
    };
    let dp = formal_differential(p)?;
    let contracted = dp.contract_with_position();
    Ok(&contracted - &p.scale(&p.ring().from_u64(g)))
}
