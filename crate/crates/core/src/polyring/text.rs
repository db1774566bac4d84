//! Canonical text form: `coeff*z0^a*dz1^b` terms joined by `+` (or `-`).

use super::poly::{Arity, Monomial, MultiPoly};
use super::ring::Ring;
use crate::error::{McmError, Result};

fn fmt_monomial(m: &Monomial, arity: Arity) -> String {
    let mut parts = Vec::new();
    for (k, &e) in m.0.iter().enumerate() {
        if e == 0 {
            continue;
        }
        let name = if k < arity.n_z {
            format!("z{k}")
        } else {
            format!("dz{}", k - arity.n_z)
        };
        parts.push(if e == 1 { name } else { format!("{name}^{e}") });
    }
    parts.join("*")
}

impl<R: Ring> MultiPoly<R> {
    /// Serializes in decreasing graded-lex order.
    pub fn to_text(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let r = self.ring();
        let mut out = String::new();
        for (idx, (m, c)) in self.terms().iter().enumerate() {
            let mono = fmt_monomial(m, self.arity());
            let coeff = r.fmt_elem(c);
            let (neg, mag) = match coeff.strip_prefix('-') {
                Some(rest) => (true, rest.to_string()),
                None => (false, coeff),
            };
            if idx > 0 {
                out.push(if neg { '-' } else { '+' });
            } else if neg {
                out.push('-');
            }
            if mono.is_empty() {
                out.push_str(&mag);
            } else if mag == "1" {
                out.push_str(&mono);
            } else {
                out.push_str(&mag);
                out.push('*');
                out.push_str(&mono);
            }
        }
        out
    }

    /// Parses the text form produced by [`MultiPoly::to_text`] (and looser
    /// variants: explicit `^1`, coefficients anywhere in a product, spaces).
    pub fn parse(ring: R, arity: Arity, text: &str) -> Result<Self> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(McmError::Parse("empty polynomial".into()));
        }
        let bytes: Vec<char> = s.chars().collect();
        let mut terms_src: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        for (i, &ch) in bytes.iter().enumerate() {
            let boundary = (ch == '+' || ch == '-')
                && i > 0
                && !matches!(bytes[i - 1], '+' | '-' | '^' | '*' | '/');
            if boundary {
                terms_src.push((neg, std::mem::take(&mut cur)));
                neg = ch == '-';
            } else if (ch == '+' || ch == '-') && cur.is_empty() {
                if ch == '-' {
                    neg = !neg;
                }
            } else {
                cur.push(ch);
            }
        }
        terms_src.push((neg, cur));

        let nvars = arity.nvars();
        let mut terms = Vec::new();
        for (neg, src) in terms_src {
            if src.is_empty() {
                return Err(McmError::Parse(format!("empty term in `{text}`")));
            }
            let mut coeff = ring.one();
            let mut exps = vec![0u32; nvars];
            for factor in src.split('*') {
                let (base, exp) = match factor.split_once('^') {
                    Some((b, e)) => (
                        b,
                        e.parse::<u32>()
                            .map_err(|_| McmError::Parse(format!("bad exponent in `{factor}`")))?,
                    ),
                    None => (factor, 1),
                };
                let var = if let Some(idx) = base.strip_prefix("dz") {
                    if !arity.graded {
                        return Err(McmError::Parse(format!("`{base}` needs graded arity")));
                    }
                    Some(arity.n_z + parse_index(idx, arity.n_z, base)?)
                } else if let Some(idx) = base.strip_prefix('z') {
                    Some(parse_index(idx, arity.n_z, base)?)
                } else {
                    None
                };
                match var {
                    Some(k) => exps[k] += exp,
                    None => {
                        let c = ring.parse_elem(base)?;
                        coeff = ring.mul(&coeff, &ring.pow(&c, exp as u64));
                    }
                }
            }
            if neg {
                coeff = ring.neg(&coeff);
            }
            terms.push((Monomial(exps), coeff));
        }
        Ok(MultiPoly::from_terms(ring, arity, terms))
    }
}

fn parse_index(idx: &str, n: usize, base: &str) -> Result<usize> {
    let k: usize = idx
        .parse()
        .map_err(|_| McmError::Parse(format!("bad variable `{base}`")))?;
    if k >= n {
        return Err(McmError::ArityError(format!("variable `{base}` out of range (n_z = {n})")));
    }
    Ok(k)
}
