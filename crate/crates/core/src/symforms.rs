//! Equation/differential matrices, determinantal twisted symmetric forms and
//! the exact identities they satisfy (gluing, descent, homogeneity, chart
//! transitions), plus the pointed sampler producing systems through a jet.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{McmError, Result};
use crate::hypersurfaces::{all_rewrites, monomials_of_degree, moving_shapes, FermatSystem, HypersurfaceSystem, SystemOptions};
use crate::linalg::{det, dual_mul, solve2, DualEvaluator};
use crate::mcm_schedule::{check_vanishing, subsets, twist_degree, twist_from_profile, McmSchedule, Selection};
use crate::polyring::{formal_differential, Arity, Monomial, MultiPoly, PrimeField, Ring, SymForm};
use crate::rng::{derive_seed, par_chunks, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Entries `Ã = G·z_j` and `B = z_j dG + λ_j G dz_j`.
    C,
    /// Entries `G·z_j^{λ_j}` and their differentials.
    K,
}

/// Value rows followed by differential rows, one column per coordinate of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct FormMatrix<R: Ring> {
    pub kind: MatrixKind,
    pub selection: Selection,
    pub vars: Vec<usize>,
    pub lambdas: Vec<u32>,
    pub rows: Vec<Vec<SymForm<R>>>,
    pub n_value_rows: usize,
}

fn c_value<R: Ring>(g: &MultiPoly<R>, v: usize) -> SymForm<R> {
    SymForm::from_plain(&g.mul_var_pow(v, 1))
}

fn c_diff<R: Ring>(g: &MultiPoly<R>, v: usize, lambda: u32) -> Result<SymForm<R>> {
    let n = g.arity().n_z;
    let dg = formal_differential(g)?.mul_z_pow(v, 1);
    let dz = SymForm::new(MultiPoly::dz(g.ring().clone(), Arity::graded(n), v), 1)?;
    let lam = g.ring().from_u64(lambda as u64);
    Ok(dg.add(&dz.mul_plain(g).scale(&lam)))
}

/// Builds the matrix of `kind` for the rows in `selection`.
pub fn build_matrix<R: Ring>(fs: &FermatSystem<R>, kind: MatrixKind, selection: &Selection) -> Result<FormMatrix<R>> {
    selection.check_indices(fs.n_equations())?;
    let mut rows = Vec::new();
    for &i in &selection.rows {
        rows.push(
            (0..fs.n_columns())
                .map(|k| {
                    let (g, v, l) = (&fs.blocks[i][k], fs.vars[k], fs.lambdas[k]);
                    match kind {
                        MatrixKind::C => c_value(g, v),
                        MatrixKind::K => SymForm::from_plain(&g.mul_var_pow(v, l)),
                    }
                })
                .collect(),
        );
    }
    for &i in &selection.diffs {
        rows.push(
            (0..fs.n_columns())
                .map(|k| {
                    let (g, v, l) = (&fs.blocks[i][k], fs.vars[k], fs.lambdas[k]);
                    match kind {
                        MatrixKind::C => c_diff(g, v, l),
                        MatrixKind::K => formal_differential(&g.mul_var_pow(v, l)),
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(FormMatrix {
        kind,
        selection: selection.clone(),
        vars: fs.vars.clone(),
        lambdas: fs.lambdas.clone(),
        rows,
        n_value_rows: selection.rows.len(),
    })
}

/// `K_j = C_j · z_j^{λ_j − 1}` as exact identities of forms, for every entry.
pub fn column_proportionality<R: Ring>(fs: &FermatSystem<R>, selection: &Selection) -> Result<bool> {
    let c = build_matrix(fs, MatrixKind::C, selection)?;
    let k = build_matrix(fs, MatrixKind::K, selection)?;
    Ok(c.rows.iter().zip(&k.rows).all(|(rc, rk)| {
        rc.iter()
            .zip(rk)
            .enumerate()
            .all(|(j, (a, b))| a.mul_z_pow(c.vars[j], c.lambdas[j] - 1) == *b)
    }))
}

/// Determinant by cofactor expansion in the commutative algebra of forms.
pub fn det_forms<R: Ring>(rows: &[Vec<SymForm<R>>]) -> Result<SymForm<R>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(McmError::ShapeError(format!("determinant of a non-square {n}-row matrix")));
    }
    if n == 0 {
        return Err(McmError::ShapeError("empty determinant".into()));
    }
    fn rec<R: Ring>(rows: &[Vec<SymForm<R>>], cols: &[usize]) -> SymForm<R> {
        let row = &rows[0];
        if rows.len() == 1 {
            return row[cols[0]].clone();
        }
        let mut acc: Option<SymForm<R>> = None;
        for (idx, &c) in cols.iter().enumerate() {
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let mut term = row[c].mul(&rec(&rows[1..], &rest));
            if idx % 2 == 1 {
                term = term.neg();
            }
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term),
            });
        }
        acc.expect("nonempty")
    }
    Ok(rec(rows, &(0..n).collect::<Vec<_>>()))
}

/// A form `numer / z^denom` with a monomial denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalForm<R: Ring> {
    pub numer: SymForm<R>,
    pub denom: Vec<u32>,
}

impl<R: Ring> RationalForm<R> {
    /// Cross-multiplied equality test (no rational functions needed).
    pub fn same_as(&self, other: &Self) -> bool {
        let n = self.numer.n_z();
        let mut a = self.numer.clone();
        let mut b = other.numer.clone();
        for j in 0..n {
            a = a.mul_z_pow(j, other.denom[j]);
            b = b.mul_z_pow(j, self.denom[j]);
        }
        a == b
    }
}

/// `ω̂_j = (−1)^j det(M̂_j) / z^{…}`: for `C` the denominator is `z_j^{λ_j−1}`,
/// for `K` it is `Π_k z_k^{λ_k−1}`.
pub fn omega_hat<R: Ring>(m: &FormMatrix<R>, col: usize) -> Result<RationalForm<R>> {
    let cols = m.vars.len();
    if m.rows.len() + 1 != cols || col >= cols {
        return Err(McmError::ShapeError(format!(
            "{} rows and {cols} columns do not give a square minor",
            m.rows.len()
        )));
    }
    let minor: Vec<Vec<SymForm<R>>> = m
        .rows
        .iter()
        .map(|r| r.iter().enumerate().filter(|(k, _)| *k != col).map(|(_, e)| e.clone()).collect())
        .collect();
    let mut numer = det_forms(&minor)?;
    if col % 2 == 1 {
        numer = numer.neg();
    }
    let n = numer.n_z();
    let mut denom = vec![0u32; n];
    match m.kind {
        MatrixKind::C => denom[m.vars[col]] += m.lambdas[col] - 1,
        MatrixKind::K => {
            for (k, &v) in m.vars.iter().enumerate() {
                denom[v] += m.lambdas[k] - 1;
            }
        }
    }
    Ok(RationalForm { numer, denom })
}

/// A point `z` with a tangent direction `ξ`, over a prime field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JetPoint {
    pub z: Vec<u64>,
    pub xi: Vec<u64>,
}

impl JetPoint {
    /// Whether `ξ ∉ K·z` (rank of the 2-row matrix `[z; ξ]` is 2).
    pub fn is_independent(&self, f: &PrimeField) -> bool {
        let n = self.z.len();
        (0..n).any(|a| {
            (a + 1..n).any(|b| f.sub(&f.mul(&self.z[a], &self.xi[b]), &f.mul(&self.z[b], &self.xi[a])) != 0)
        })
    }

    pub fn nonzero_mask(&self) -> Vec<bool> {
        self.z.iter().map(|&x| x != 0).collect()
    }

    pub fn scaled(&self, f: &PrimeField, t: u64) -> JetPoint {
        JetPoint { z: self.z.iter().map(|x| f.mul(x, &t)).collect(), xi: self.xi.iter().map(|x| f.mul(x, &t)).collect() }
    }

    pub fn shifted(&self, f: &PrimeField, t: u64) -> JetPoint {
        JetPoint {
            z: self.z.clone(),
            xi: self.xi.iter().zip(&self.z).map(|(x, z)| f.add(x, &f.mul(z, &t))).collect(),
        }
    }
}

/// `base^e` for a possibly negative exponent (base must be nonzero if `e < 0`).
pub fn pow_signed(f: &PrimeField, base: u64, e: &BigInt) -> u64 {
    let m = BigInt::from(f.q() - 1);
    if e.is_negative() {
        let inv = f.inv(base).expect("nonzero base");
        let k = (-e).mod_floor(&m).to_u64().expect("reduced");
        f.pow(&inv, k)
    } else if base == 0 {
        if e.is_positive() { 0 } else { 1 }
    } else {
        f.pow(&base, e.mod_floor(&m).to_u64().expect("reduced"))
    }
}

/// A Fermat-type system evaluated at a jet: dual values `(G(z), dG|_z(ξ))` of every block.
#[derive(Debug, Clone)]
pub struct EvaluatedSystem<'a> {
    pub f: PrimeField,
    pub fs: &'a FermatSystem<PrimeField>,
    pub jet: JetPoint,
    g: Vec<Vec<(u64, u64)>>,
}

impl<'a> EvaluatedSystem<'a> {
    pub fn new(f: PrimeField, fs: &'a FermatSystem<PrimeField>, jet: &JetPoint) -> Self {
        let mut ev = DualEvaluator::new(&f, &jet.z, &jet.xi);
        let g = fs.blocks.iter().map(|row| row.iter().map(|b| ev.poly(b)).collect()).collect();
        EvaluatedSystem { f, fs, jet: jet.clone(), g }
    }

    fn zv(&self, k: usize) -> (u64, u64) {
        let v = self.fs.vars[k];
        (self.jet.z[v], self.jet.xi[v])
    }

    /// Entry of the `C` matrix: value row (`diff = false`) or differential row.
    pub fn c_entry(&self, i: usize, k: usize, diff: bool) -> u64 {
        let f = &self.f;
        let (g, dg) = self.g[i][k];
        let (z, xi) = self.zv(k);
        if diff {
            let lam = f.from_u64(self.fs.lambdas[k] as u64);
            f.add(&f.mul(&z, &dg), &f.mul(&f.mul(&lam, &g), &xi))
        } else {
            f.mul(&g, &z)
        }
    }

    /// Entry of the `K` matrix.
    pub fn k_entry(&self, i: usize, k: usize, diff: bool) -> u64 {
        let f = &self.f;
        let (z, xi) = self.zv(k);
        let l = self.fs.lambdas[k];
        let below = f.pow(&z, (l - 1) as u64);
        let p = (f.mul(&below, &z), f.mul(&f.mul(&f.from_u64(l as u64), &below), &xi));
        let e = dual_mul(f, self.g[i][k], p);
        if diff { e.1 } else { e.0 }
    }

    pub fn matrix(&self, kind: MatrixKind, sel: &Selection) -> Vec<Vec<u64>> {
        let cols = self.fs.n_columns();
        let entry = |i, k, d| match kind {
            MatrixKind::C => self.c_entry(i, k, d),
            MatrixKind::K => self.k_entry(i, k, d),
        };
        let mut out: Vec<Vec<u64>> = sel.rows.iter().map(|&i| (0..cols).map(|k| entry(i, k, false)).collect()).collect();
        out.extend(sel.diffs.iter().map(|&i| (0..cols).map(|k| entry(i, k, true)).collect::<Vec<_>>()));
        out
    }

    /// `(−1)^j det(Ĉ_j)`, the numerator of `ω̂_j`.
    pub fn signed_minor(&self, sel: &Selection, col: usize) -> Result<u64> {
        let m = self.matrix(MatrixKind::C, sel);
        let d = det(&self.f, &delete_column(&m, col))?;
        Ok(if col % 2 == 1 { self.f.neg(&d) } else { d })
    }

    /// `ω̂_j(z, ξ)`; requires `z_{var_j} ≠ 0`.
    pub fn omega_hat(&self, sel: &Selection, col: usize) -> Result<u64> {
        let (z, _) = self.zv(col);
        let inv = self
            .f
            .inv(z)
            .ok_or_else(|| McmError::InvalidJet(format!("coordinate {} vanishes", self.fs.vars[col])))?;
        let num = self.signed_minor(sel, col)?;
        Ok(self.f.mul(&num, &self.f.pow(&inv, (self.fs.lambdas[col] - 1) as u64)))
    }

    /// Dehomogenized matrix in chart `chart` (closed form of the differential rows).
    pub fn chart_matrix(&self, sel: &Selection, chart: usize) -> Result<Vec<Vec<u64>>> {
        let f = &self.f;
        let (zc, xc) = self.zv(chart);
        let inv = f.inv(zc).ok_or_else(|| McmError::InvalidJet("chart coordinate vanishes".into()))?;
        let cols = self.fs.n_columns();
        let scale = |i: usize, k: usize| {
            let e = self.fs.degrees[i] + 1 - self.fs.lambdas[k] as u64;
            f.pow(&inv, e)
        };
        let mut out = Vec::new();
        for &i in &sel.rows {
            out.push((0..cols).map(|k| f.mul(&self.c_entry(i, k, false), &scale(i, k))).collect());
        }
        for &i in &sel.diffs {
            let di = f.from_u64(self.fs.degrees[i]);
            out.push(
                (0..cols)
                    .map(|k| {
                        let s = scale(i, k);
                        let b = f.mul(&self.c_entry(i, k, true), &s);
                        let a = f.mul(&self.c_entry(i, k, false), &s);
                        f.sub(&b, &f.mul(&f.mul(&di, &f.mul(&xc, &inv)), &a))
                    })
                    .collect(),
            );
        }
        Ok(out)
    }

    /// Differential rows in chart `chart` computed directly from the
    /// dehomogenized equation `Σ (G)_j · w_k^{λ_k}`, `w_k = z_k / z_j`.
    pub fn chart_diff_rows_direct(&self, sel: &Selection, chart: usize) -> Result<Vec<Vec<u64>>> {
        let f = &self.f;
        let (zc, xc) = self.zv(chart);
        let inv = f.inv(zc).ok_or_else(|| McmError::InvalidJet("chart coordinate vanishes".into()))?;
        let cols = self.fs.n_columns();
        let mut out = Vec::new();
        for &i in &sel.diffs {
            out.push(
                (0..cols)
                    .map(|k| {
                        let (g, dg) = self.g[i][k];
                        let (zk, xk) = self.zv(k);
                        let deg_g = self.fs.degrees[i] - self.fs.lambdas[k] as u64;
                        let s = f.pow(&inv, deg_g);
                        let gj = f.mul(&g, &s);
                        let dgj = f.sub(&f.mul(&dg, &s), &f.mul(&f.mul(&f.from_u64(deg_g), &gj), &f.mul(&xc, &inv)));
                        let w = f.mul(&zk, &inv);
                        let dw = f.sub(&f.mul(&xk, &inv), &f.mul(&f.mul(&zk, &xc), &f.mul(&inv, &inv)));
                        let lam = f.from_u64(self.fs.lambdas[k] as u64);
                        f.add(&f.mul(&w, &dgj), &f.mul(&f.mul(&lam, &gj), &dw))
                    })
                    .collect(),
            );
        }
        Ok(out)
    }
}

pub fn delete_column(m: &[Vec<u64>], col: usize) -> Vec<Vec<u64>> {
    m.iter()
        .map(|r| r.iter().enumerate().filter(|(k, _)| *k != col).map(|(_, &x)| x).collect())
        .collect()
}

/// Result of one identity check over a batch of samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub samples: u64,
    pub failures: u64,
    pub first_witness: Option<String>,
}

impl CheckReport {
    pub fn new(check: &str) -> Self {
        CheckReport { check: check.into(), samples: 0, failures: 0, first_witness: None }
    }

    pub fn record(&mut self, witness: Option<String>) {
        self.samples += 1;
        if let Some(w) = witness {
            self.failures += 1;
            if self.first_witness.is_none() {
                self.first_witness = Some(w);
            }
        }
    }

    pub fn merge(&mut self, other: &CheckReport) {
        self.samples += other.samples;
        self.failures += other.failures;
        if self.first_witness.is_none() {
            self.first_witness.clone_from(&other.first_witness);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.samples > 0
    }
}

fn nonzero_columns(ev: &EvaluatedSystem) -> Vec<usize> {
    (0..ev.fs.n_columns()).filter(|&k| ev.jet.z[ev.fs.vars[k]] != 0).collect()
}

/// Pairwise gluing `(−1)^{b} det(Ĉ_b) z_a^{λ_a−1} = (−1)^{a} det(Ĉ_a) z_b^{λ_b−1}`.
pub fn gluing_at(ev: &EvaluatedSystem, sel: &Selection) -> Result<Option<String>> {
    let f = &ev.f;
    let cols = nonzero_columns(ev);
    let minors: Vec<u64> = (0..ev.fs.n_columns()).map(|k| ev.signed_minor(sel, k)).collect::<Result<_>>()?;
    for (x, &a) in cols.iter().enumerate() {
        for &b in &cols[x + 1..] {
            let za = ev.jet.z[ev.fs.vars[a]];
            let zb = ev.jet.z[ev.fs.vars[b]];
            let lhs = f.mul(&minors[b], &f.pow(&za, (ev.fs.lambdas[a] - 1) as u64));
            let rhs = f.mul(&minors[a], &f.pow(&zb, (ev.fs.lambdas[b] - 1) as u64));
            if lhs != rhs {
                return Ok(Some(format!("columns ({a},{b}) at {:?}", ev.jet)));
            }
        }
    }
    Ok(None)
}

/// `ω̂(z, ξ + t z) = ω̂(z, ξ)` for each `t`.
pub fn descent_at(ev: &EvaluatedSystem, sel: &Selection, ts: &[u64]) -> Result<Option<String>> {
    for &col in &nonzero_columns(ev) {
        let base = ev.omega_hat(sel, col)?;
        for &t in ts {
            let moved = EvaluatedSystem::new(ev.f, ev.fs, &ev.jet.shifted(&ev.f, t));
            if moved.omega_hat(sel, col)? != base {
                return Ok(Some(format!("column {col}, t = {t} at {:?}", ev.jet)));
            }
        }
    }
    Ok(None)
}

/// `ω̂(t z, t ξ) = t^♥ ω̂(z, ξ)` for each nonzero `t`.
pub fn homogeneity_at(ev: &EvaluatedSystem, sel: &Selection, heart: &BigInt, ts: &[u64]) -> Result<Option<String>> {
    let f = &ev.f;
    for &col in &nonzero_columns(ev) {
        let base = ev.omega_hat(sel, col)?;
        for &t in ts {
            let scaled = EvaluatedSystem::new(ev.f, ev.fs, &ev.jet.scaled(f, t));
            let expect = f.mul(&pow_signed(f, t, heart), &base);
            if scaled.omega_hat(sel, col)? != expect {
                return Ok(Some(format!("column {col}, t = {t}, ♥ = {heart} at {:?}", ev.jet)));
            }
        }
    }
    Ok(None)
}

/// `det((Ĉ_{j2})_{j1}) = (z_{j2}/z_{j1})^{♥+λ_{j2}−1} det((Ĉ_{j2})_{j2})` for all
/// ordered pairs of nonzero columns, plus agreement of the two ways of computing
/// the dehomogenized differential rows.
pub fn chart_transition_at(ev: &EvaluatedSystem, sel: &Selection, heart: &BigInt) -> Result<Option<String>> {
    let f = &ev.f;
    let cols = nonzero_columns(ev);
    let n_val = sel.rows.len();
    let mut charts = Vec::new();
    for &j in &cols {
        let m = ev.chart_matrix(sel, j)?;
        if m[n_val..] != ev.chart_diff_rows_direct(sel, j)?[..] {
            return Ok(Some(format!("dehomogenized differential rows disagree in chart {j}")));
        }
        charts.push(m);
    }
    for (x1, &j1) in cols.iter().enumerate() {
        for (x2, &j2) in cols.iter().enumerate() {
            let lhs = det(f, &delete_column(&charts[x1], j2))?;
            let own = det(f, &delete_column(&charts[x2], j2))?;
            let ratio = f.mul(&ev.jet.z[ev.fs.vars[j2]], &f.inv(ev.jet.z[ev.fs.vars[j1]]).expect("nonzero"));
            let e = heart + BigInt::from(ev.fs.lambdas[j2]) - 1;
            if lhs != f.mul(&pow_signed(f, ratio, &e), &own) {
                return Ok(Some(format!("charts ({j1},{j2}) at {:?}", ev.jet)));
            }
        }
    }
    Ok(None)
}

/// Twist degree of the forms of `fs` with rows `sel`.
pub fn heart_of(fs: &FermatSystem<PrimeField>, sel: &Selection) -> Result<BigInt> {
    Ok(twist_from_profile(&fs.degrees_big(), &fs.lambdas_big(), sel, None, &[])?.value)
}

/// Checks that `(z, ξ)` lies on the cone and satisfies the differential constraints of `sel`.
pub fn jet_satisfies(fs: &FermatSystem<PrimeField>, f: &PrimeField, jet: &JetPoint, sel: &Selection) -> bool {
    let mut ev = DualEvaluator::new(f, &jet.z, &jet.xi);
    sel.rows.iter().all(|&i| ev.poly(&fs.equation(i)).0 == 0)
        && sel.diffs.iter().all(|&i| ev.poly(&fs.equation(i)).1 == 0)
}

/// Gluing over a batch of `(system, jet)` samples.
pub fn verify_gluing(f: PrimeField, samples: &[(FermatSystem<PrimeField>, JetPoint)], sel: &Selection) -> Result<CheckReport> {
    let mut rep = CheckReport::new("gluing");
    for (fs, jet) in samples {
        rep.record(gluing_at(&EvaluatedSystem::new(f, fs, jet), sel)?);
    }
    Ok(rep)
}

/// Descent and homogeneity (with `♥` from the twist formula) over a batch.
pub fn verify_descent_and_degree(
    f: PrimeField,
    samples: &[(FermatSystem<PrimeField>, JetPoint)],
    sel: &Selection,
    rng: &mut ChaCha8Rng,
) -> Result<(CheckReport, CheckReport)> {
    let mut descent = CheckReport::new("descent");
    let mut degree = CheckReport::new("homogeneity");
    for (fs, jet) in samples {
        let heart = heart_of(fs, sel)?;
        let ev = EvaluatedSystem::new(f, fs, jet);
        let ts: Vec<u64> = (0..3).map(|_| rng.random_range(1..f.q())).collect();
        descent.record(descent_at(&ev, sel, &ts)?);
        degree.record(homogeneity_at(&ev, sel, &heart, &ts)?);
    }
    Ok((descent, degree))
}

/// Chart transitions over a batch.
pub fn chart_transition_check(f: PrimeField, samples: &[(FermatSystem<PrimeField>, JetPoint)], sel: &Selection) -> Result<CheckReport> {
    let mut rep = CheckReport::new("chart_transition");
    for (fs, jet) in samples {
        let heart = heart_of(fs, sel)?;
        rep.record(chart_transition_at(&EvaluatedSystem::new(f, fs, jet), sel, &heart)?);
    }
    Ok(rep)
}

/// Identity checks over many pointed systems of one schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub q: u64,
    pub seed: u64,
    pub systems: u64,
    pub reports: Vec<CheckReport>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }
}

/// Vanishing set of system `k` for a given `η`: `η` consecutive coordinates
/// starting at `k mod (N+1)`, wrapping around.
fn rotating_vanishing(k: u64, eta: usize, nz: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..eta).map(|x| (x + k as usize) % nz).collect();
    v.sort_unstable();
    v
}

/// Gluing, descent, homogeneity, chart transitions, agreement of the twist
/// degree with the schedule, and the jet conditions, on every regrouping and
/// selection of `systems` natural pointed samples. System `k` uses
/// `η = k mod n` and a rotating vanishing set.
pub fn identity_suite(schedule: &McmSchedule, q: u64, systems: u64, seed: u64) -> Result<IdentityReport> {
    let f = PrimeField::new(q)?;
    let cfg = schedule.config().clone();
    let nz = cfg.n_ambient + 1;
    let names = ["gluing", "descent", "homogeneity", "chart_transition", "twist_degree", "jet"];
    let chunks = par_chunks(systems, 25, |chunk, range| -> Result<Vec<CheckReport>> {
        let mut rng = stream_rng(derive_seed(seed, 0x7), chunk);
        let mut reps: Vec<CheckReport> = names.iter().map(|n| CheckReport::new(n)).collect();
        for k in range {
            let eta = (k % cfg.n() as u64) as usize;
            let v = rotating_vanishing(k / cfg.n() as u64, eta, nz);
            let ps = pointed_sample(schedule, f, seed, k, &PointSpec::new(v.clone(), Target::Natural))?;
            for rw in all_rewrites(&ps.system, &v)?.iter().skip(1) {
                let fs = rw.fermat()?;
                let ev = EvaluatedSystem::new(f, &fs, &ps.jet);
                let variant = rw.kind.variant().expect("regroupings after the collapse");
                for diffs in subsets(cfg.c, cfg.n() - eta) {
                    let sel = Selection::standard(cfg.e(), diffs);
                    let ts: Vec<u64> = (0..2).map(|_| rng.random_range(1..f.q())).collect();
                    let heart = heart_of(&fs, &sel)?;
                    let scheduled = twist_degree(schedule, &sel, variant, &v)?.value;
                    reps[0].record(gluing_at(&ev, &sel)?);
                    reps[1].record(descent_at(&ev, &sel, &ts)?);
                    reps[2].record(homogeneity_at(&ev, &sel, &heart, &ts)?);
                    reps[3].record(chart_transition_at(&ev, &sel, &heart)?);
                    reps[4].record((heart != scheduled).then(|| format!("♥ = {heart} but the schedule gives {scheduled} for {:?}", rw.kind)));
                    reps[5].record((!jet_satisfies(&fs, &f, &ps.jet, &sel)).then(|| format!("jet off the system for {:?}", rw.kind)));
                }
            }
        }
        Ok(reps)
    });
    let mut reports: Vec<CheckReport> = names.iter().map(|n| CheckReport::new(n)).collect();
    for chunk in chunks {
        for (t, r) in reports.iter_mut().zip(&chunk?) {
            t.merge(r);
        }
    }
    Ok(IdentityReport { q, seed, systems, reports })
}

/// What the pointed sampler imposes on the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// No constraint: uniform system and point.
    Unconstrained,
    /// `F_i(z) = 0` for all `i` and `dF_i|_z(ξ) = 0` for `i < c`.
    Natural,
    /// Additionally `M(z, ξ)` is a random matrix of rank `<= m − 1` with zero column sum.
    Member,
    /// Additionally `M(z, ξ)` is a random matrix with zero column sum.
    Generic,
    /// A member perturbed so that the first-kind conditions survive but not all second-kind ones.
    Partial,
}

/// Sampler request: coordinates pinned to zero and the coefficient constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSpec {
    pub vanishing: Vec<usize>,
    pub target: Target,
    /// Permit `q <= d` (exponents then act through Fermat's little theorem).
    #[serde(default)]
    pub allow_small_q: bool,
}

impl PointSpec {
    pub fn new(vanishing: Vec<usize>, target: Target) -> Self {
        PointSpec { vanishing, target, allow_small_q: false }
    }
}

/// A system together with a jet on it.
#[derive(Debug, Clone)]
pub struct PointedSample {
    pub system: HypersurfaceSystem<PrimeField>,
    pub jet: JetPoint,
    pub target_matrix: Option<Vec<Vec<u64>>>,
}

/// Coefficient block addressed by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockRef {
    A(usize),
    Moving(usize),
}

/// Picks `(z, ξ)` first, then coefficient blocks solving the requested linear
/// constraints; the remaining coefficients are uniform.
pub fn pointed_sample(schedule: &McmSchedule, f: PrimeField, seed: u64, index: u64, spec: &PointSpec) -> Result<PointedSample> {
    let cfg = schedule.config();
    let nn = cfg.n_ambient;
    check_vanishing(&spec.vanishing, nn)?;
    if spec.vanishing.len() >= cfg.n() {
        return Err(McmError::InvalidSelection("η must be below n".into()));
    }
    let exps = schedule.exponents()?;
    if f.q() <= exps.d as u64 && !spec.allow_small_q {
        return Err(McmError::CharacteristicTooSmall { q: f.q(), max_exponent: exps.d as u64 });
    }
    let mut rng = stream_rng(seed, index);
    let nz = nn + 1;
    let top = nn - spec.vanishing.len();
    let core: Vec<usize> = (0..nz).filter(|j| !spec.vanishing.contains(j)).collect();
    let options = SystemOptions::default();
    let shapes = moving_shapes(schedule, &options)?;

    let jet = loop {
        let z: Vec<u64> = (0..nz)
            .map(|j| if spec.vanishing.contains(&j) { 0 } else { rng.random_range(1..f.q()) })
            .collect();
        let xi: Vec<u64> = (0..nz).map(|_| rng.random_range(0..f.q())).collect();
        let jet = JetPoint { z, xi };
        if jet.is_independent(&f) {
            break jet;
        }
    };
    let arity = Arity::plain(nz);
    let mut a: Vec<Vec<Vec<u64>>> = Vec::new();
    let mut m: Vec<Vec<Vec<u64>>> = Vec::new();
    let bases: Vec<Vec<Vec<u32>>> = cfg.epsilons.iter().map(|&e| monomials_of_degree(nz, e as u32)).collect();
    for i in 0..cfg.e() {
        let nb = bases[i].len();
        a.push((0..nz).map(|_| (0..nb).map(|_| rng.random_range(0..f.q())).collect()).collect());
        m.push(shapes.iter().map(|_| (0..nb).map(|_| rng.random_range(0..f.q())).collect()).collect());
    }

    // column groups of the collapsed core: A_j collects A^{r_j} and lower moving
    // terms distinguished at r_j; B_k is the top-level term distinguished at r_k.
    let mut groups: Vec<Vec<BlockRef>> = vec![Vec::new(); 2 * core.len()];
    for (p, &j) in core.iter().enumerate() {
        groups[p].push(BlockRef::A(j));
    }
    for (t, s) in shapes.iter().enumerate() {
        if s.key.set.iter().any(|j| spec.vanishing.contains(j)) {
            continue;
        }
        let p = core.iter().position(|&x| x == s.key.distinguished()).expect("core");
        if s.key.level == top {
            groups[core.len() + p].push(BlockRef::Moving(t));
        } else {
            groups[p].push(BlockRef::Moving(t));
        }
    }
    let mut ev = DualEvaluator::new(&f, &jet.z, &jet.xi);
    let fixed = |r: BlockRef, ev: &mut DualEvaluator| match r {
        BlockRef::A(j) => ev.power(j, exps.d),
        BlockRef::Moving(t) => ev.monomial(&shapes[t].exponents),
    };
    // dual value of each basis monomial times the block's fixed monomial
    let mut term_duals = |i: usize, r: BlockRef, ev: &mut DualEvaluator| -> Vec<(u64, u64)> {
        let fx = fixed(r, ev);
        bases[i].iter().map(|b| dual_mul(&f, ev.monomial(b), fx)).collect()
    };
    let group_value = |i: usize, g: &[BlockRef], a: &Vec<Vec<Vec<u64>>>, m: &Vec<Vec<Vec<u64>>>, ev: &mut DualEvaluator, td: &mut dyn FnMut(usize, BlockRef, &mut DualEvaluator) -> Vec<(u64, u64)>| {
        let mut acc = (0u64, 0u64);
        for &r in g {
            let coeffs = match r {
                BlockRef::A(j) => &a[i][j],
                BlockRef::Moving(t) => &m[i][t],
            };
            for (c, d) in coeffs.iter().zip(td(i, r, ev)) {
                acc.0 = f.add(&acc.0, &f.mul(c, &d.0));
                acc.1 = f.add(&acc.1, &f.mul(c, &d.1));
            }
        }
        acc
    };

    let target_matrix = match spec.target {
        Target::Unconstrained | Target::Natural => None,
        t => Some(target_matrix(&f, &mut rng, cfg.e() + cfg.c, 2 * core.len(), top, t)),
    };
    if spec.target != Target::Unconstrained {
        for i in 0..cfg.e() {
            let with_diff = i < cfg.c;
            // (group, wanted value, wanted differential)
            let wants: Vec<(usize, u64, u64)> = match &target_matrix {
                None => {
                    // fold every term into group 0 and ask the total to vanish
                    let mut total = (0u64, 0u64);
                    for g in 1..groups.len() {
                        let v = group_value(i, &groups[g], &a, &m, &mut ev, &mut term_duals);
                        total = (f.add(&total.0, &v.0), f.add(&total.1, &v.1));
                    }
                    for (t, s) in shapes.iter().enumerate() {
                        if s.key.set.iter().any(|j| spec.vanishing.contains(j)) {
                            let v = group_value(i, &[BlockRef::Moving(t)], &a, &m, &mut ev, &mut term_duals);
                            total = (f.add(&total.0, &v.0), f.add(&total.1, &v.1));
                        }
                    }
                    for &v in &spec.vanishing {
                        let x = group_value(i, &[BlockRef::A(v)], &a, &m, &mut ev, &mut term_duals);
                        total = (f.add(&total.0, &x.0), f.add(&total.1, &x.1));
                    }
                    vec![(0, f.neg(&total.0), f.neg(&total.1))]
                }
                Some(w) => (0..groups.len()).map(|g| (g, w[i][g], if with_diff { w[cfg.e() + i][g] } else { 0 })).collect(),
            };
            for (g, want_v, want_d) in wants {
                let current = group_value(i, &groups[g], &a, &m, &mut ev, &mut term_duals);
                let main = groups[g][0];
                let duals = term_duals(i, main, &mut ev);
                let gap = (f.sub(&want_v, &current.0), f.sub(&want_d, &current.1));
                let coeffs = match main {
                    BlockRef::A(j) => &mut a[i][j],
                    BlockRef::Moving(t) => &mut m[i][t],
                };
                adjust(&f, &mut rng, coeffs, &duals, gap, with_diff)?;
            }
        }
    }
    let to_poly = |i: usize, c: &Vec<u64>| {
        MultiPoly::from_terms(f, arity, bases[i].iter().cloned().map(Monomial).zip(c.iter().copied()))
    };
    let a_polys = a.iter().enumerate().map(|(i, row)| row.iter().map(|c| to_poly(i, c)).collect()).collect();
    let m_polys = m.iter().enumerate().map(|(i, row)| row.iter().map(|c| to_poly(i, c)).collect()).collect();
    let system = HypersurfaceSystem::assemble(schedule, f, shapes, a_polys, m_polys, options)?;
    Ok(PointedSample { system, jet, target_matrix })
}

/// Shifts two (or one) coefficients so the block's dual contribution moves by `gap`.
fn adjust(f: &PrimeField, rng: &mut ChaCha8Rng, coeffs: &mut [u64], duals: &[(u64, u64)], gap: (u64, u64), with_diff: bool) -> Result<()> {
    let n = coeffs.len();
    for _ in 0..64 {
        let a = rng.random_range(0..n);
        if with_diff {
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let mat = [[duals[a].0, duals[b].0], [duals[a].1, duals[b].1]];
            if let Some([x, y]) = solve2(f, mat, [gap.0, gap.1]) {
                coeffs[a] = f.add(&coeffs[a], &x);
                coeffs[b] = f.add(&coeffs[b], &y);
                return Ok(());
            }
        } else if let Some(inv) = f.inv(duals[a].0) {
            coeffs[a] = f.add(&coeffs[a], &f.mul(&gap.0, &inv));
            return Ok(());
        }
    }
    Err(McmError::SamplingFailed("no invertible pivot among the block's coefficients".into()))
}

/// Random `rows × cols` matrix with zero column sum of the requested kind.
fn target_matrix(f: &PrimeField, rng: &mut ChaCha8Rng, rows: usize, cols: usize, top: usize, kind: Target) -> Vec<Vec<u64>> {
    let random_zero_sum = |rng: &mut ChaCha8Rng, r: usize| -> Vec<Vec<u64>> {
        (0..r)
            .map(|_| {
                let mut row: Vec<u64> = (0..cols - 1).map(|_| rng.random_range(0..f.q())).collect();
                let s = row.iter().fold(0, |acc, x| f.add(&acc, x));
                row.push(f.neg(&s));
                row
            })
            .collect()
    };
    match kind {
        Target::Generic => random_zero_sum(rng, rows),
        _ => {
            let k = top - 1;
            let v = random_zero_sum(rng, k);
            let u: Vec<Vec<u64>> = (0..rows).map(|_| (0..k).map(|_| rng.random_range(0..f.q())).collect()).collect();
            let mut w: Vec<Vec<u64>> = (0..rows)
                .map(|i| (0..cols).map(|c| (0..k).fold(0, |acc, t| f.add(&acc, &f.mul(&u[i][t], &v[t][c])))).collect())
                .collect();
            if kind == Target::Partial {
                let half = cols / 2;
                for row in w.iter_mut() {
                    let x = rng.random_range(0..f.q());
                    row[half] = f.add(&row[half], &x);
                    row[cols - 1] = f.sub(&row[cols - 1], &x);
                }
            }
            w
        }
    }
}
