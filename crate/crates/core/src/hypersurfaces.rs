//! Moving-coefficient hypersurface systems and their exact term regroupings.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{McmError, Result};
use crate::mcm_schedule::{check_vanishing, subsets, Exponents, McmSchedule, ScheduleJson, Variant};
use crate::polyring::{Arity, Monomial, MultiPoly, Ring, RingDescriptor, SampleElem};
use crate::rng::stream_rng;

/// Identifies a moving term: level `l`, index set `j_0 < … < j_l` (of size
/// `l + 1`, or smaller for the reduced equations) and the position `k` of the
/// distinguished index carrying the large exponent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MovingKey {
    pub level: usize,
    pub set: Vec<usize>,
    pub k: usize,
}

impl MovingKey {
    pub fn distinguished(&self) -> usize {
        self.set[self.k]
    }
}

/// A moving term's key together with its monomial exponents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovingShape {
    pub key: MovingKey,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOptions {
    /// Force every moving coefficient to zero (pure Fermat-type equations).
    pub zero_moving: bool,
    /// Accept a characteristic that does not exceed `d`.
    pub allow_small_q: bool,
    /// Use the reduced moving-term families instead of the full army.
    pub improved: bool,
}

/// Every exponent vector of total degree `deg` in `n` variables, in decreasing lex order.
pub fn monomials_of_degree(n: usize, deg: u32) -> Vec<Vec<u32>> {
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[i] = e;
            rec(i + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(0, deg, &mut vec![0; n], &mut out);
    out
}

/// Shapes of the full moving-term army: for every level `l = c+r+1..N`,
/// every `(l+1)`-subset and every distinguished position `k`, exponent
/// `μ_{l,k}` on the set except `d − l·μ_{l,k}` on the distinguished index.
pub fn full_moving_shapes(e: &Exponents, c_plus_r: usize) -> Vec<MovingShape> {
    let nz = e.n_ambient + 1;
    let mut out = Vec::new();
    for l in c_plus_r + 1..=e.n_ambient {
        for set in subsets(nz, l + 1) {
            for k in 0..=l {
                let m = e.mu(l, k);
                let mut exps = vec![0u32; nz];
                for &j in &set {
                    exps[j] = m;
                }
                exps[set[k]] = e.d - l as u32 * m;
                out.push(MovingShape { key: MovingKey { level: l, set: set.clone(), k }, exponents: exps });
            }
        }
    }
    out
}

/// Well-formedness audit of the reduced moving-term families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImprovedReport {
    /// `3N − 2(2c+r) − 2`.
    pub excess: i64,
    pub parity: String,
    pub families: Vec<ImprovedFamily>,
    pub problems: Vec<String>,
    pub well_formed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImprovedFamily {
    pub eta: usize,
    pub level: usize,
    /// Largest distinguished position `K`.
    pub top_position: usize,
    pub squares: usize,
    pub terms: usize,
}

/// Shapes of the reduced equations together with their audit. With
/// `t = 3N − 2(2c+r) − 2 = 2p` (even) or `2p + 1` (odd), the family for `η`
/// uses index sets of size `N − η + 1`, distinguished positions `k = 0..K`
/// with `K = 2p − 2η` (even) or `2p + 1 − 2η` (odd), exponent `μ_{N−η,k}` on
/// `j_0..j_K` except `j_k`, squares on `j_{K+1}..`, and the balance on `j_k`.
pub fn improved_moving_shapes(s: &McmSchedule) -> Result<(Vec<MovingShape>, ImprovedReport)> {
    let cfg = s.config();
    let e = s.exponents()?;
    let nn = cfg.n_ambient;
    let t = 3 * nn as i64 - 2 * (2 * cfg.c + cfg.r) as i64 - 2;
    let mut shapes = Vec::new();
    let mut families = Vec::new();
    let mut problems = Vec::new();
    let parity = if t % 2 == 0 { "even" } else { "odd" };
    if t > 0 {
        let p = (t / 2) as usize;
        let etas: Vec<usize> = if t % 2 == 0 { (0..p).collect() } else { (0..=p).collect() };
        for eta in etas {
            let big_k = if t % 2 == 0 { 2 * p - 2 * eta } else { 2 * p + 1 - 2 * eta };
            let level = nn - eta;
            if big_k > level {
                problems.push(format!("η = {eta}: K = {big_k} exceeds the set size"));
                continue;
            }
            let squares = level - big_k;
            if level < cfg.first_level() {
                problems.push(format!("η = {eta}: no exponents at level {level}"));
                continue;
            }
            let mut count = 0;
            for set in subsets(nn + 1, level + 1) {
                for k in 0..=big_k {
                    let m = e.mu(level, k) as i64;
                    let top = e.d as i64 - big_k as i64 * m - 2 * squares as i64;
                    if top < 2 {
                        problems.push(format!("η = {eta}, k = {k}: distinguished exponent {top} is below 2"));
                        continue;
                    }
                    let mut exps = vec![0u32; nn + 1];
                    for &j in &set[..=big_k] {
                        exps[j] = m as u32;
                    }
                    for &j in &set[big_k + 1..] {
                        exps[j] = 2;
                    }
                    exps[set[k]] = top as u32;
                    let degree: u64 = exps.iter().map(|&x| x as u64).sum();
                    if degree != e.d as u64 {
                        problems.push(format!("η = {eta}, k = {k}: degree {degree} differs from d"));
                    }
                    shapes.push(MovingShape { key: MovingKey { level, set: set.clone(), k }, exponents: exps });
                    count += 1;
                }
            }
            families.push(ImprovedFamily { eta, level, top_position: big_k, squares, terms: count });
        }
    }
    let well_formed = problems.is_empty();
    Ok((shapes, ImprovedReport { excess: t, parity: parity.into(), families, problems, well_formed }))
}

/// The assembled equations `F_i = Σ_j A_i^j z_j^d + Σ M_i^{J;j_k} z^{…}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypersurfaceSystem<R: Ring> {
    schedule: McmSchedule,
    exps: Exponents,
    ring: R,
    options: SystemOptions,
    seed: Option<u64>,
    shapes: Vec<MovingShape>,
    a: Vec<Vec<MultiPoly<R>>>,
    moving: Vec<Vec<MultiPoly<R>>>,
    f: Vec<MultiPoly<R>>,
}

fn check_characteristic<R: SampleElem>(ring: &R, e: &Exponents, options: &SystemOptions) -> Result<()> {
    let q = ring.characteristic();
    if q != 0 && q <= e.max_exponent() as u64 && !options.allow_small_q {
        return Err(McmError::CharacteristicTooSmall { q, max_exponent: e.max_exponent() as u64 });
    }
    Ok(())
}

/// Moving-term shapes selected by `options`.
pub fn moving_shapes(schedule: &McmSchedule, options: &SystemOptions) -> Result<Vec<MovingShape>> {
    if options.improved {
        Ok(improved_moving_shapes(schedule)?.0)
    } else {
        Ok(full_moving_shapes(&schedule.exponents()?, schedule.config().e()))
    }
}

/// Draws a system with dense random coefficient blocks of degree `ε_i`.
pub fn sample_system<R: SampleElem>(
    schedule: &McmSchedule,
    ring: R,
    seed: u64,
    options: SystemOptions,
) -> Result<HypersurfaceSystem<R>> {
    let exps = schedule.exponents()?;
    check_characteristic(&ring, &exps, &options)?;
    let cfg = schedule.config();
    let nz = cfg.n_ambient + 1;
    let arity = Arity::plain(nz);
    let shapes = moving_shapes(schedule, &options)?;
    let mut rng = stream_rng(seed, 0);
    let block = |eps: u64, rng: &mut rand_chacha::ChaCha8Rng| {
        let terms: Vec<_> = monomials_of_degree(nz, eps as u32)
            .into_iter()
            .map(|m| (Monomial(m), ring.sample(rng)))
            .collect();
        MultiPoly::from_terms(ring.clone(), arity, terms)
    };
    let mut a = Vec::new();
    let mut moving = Vec::new();
    for &eps in &cfg.epsilons {
        a.push((0..nz).map(|_| block(eps, &mut rng)).collect::<Vec<_>>());
        let row: Vec<_> = shapes.iter().map(|_| block(eps, &mut rng)).collect();
        moving.push(if options.zero_moving {
            row.iter().map(|_| MultiPoly::zero(ring.clone(), arity)).collect()
        } else {
            row
        });
    }
    let mut sys = HypersurfaceSystem::assemble(schedule, ring, shapes, a, moving, options)?;
    sys.seed = Some(seed);
    Ok(sys)
}

impl<R: Ring> HypersurfaceSystem<R> {
    /// Builds a system from explicit blocks, checking shapes and degrees.
    pub fn assemble(
        schedule: &McmSchedule,
        ring: R,
        shapes: Vec<MovingShape>,
        a: Vec<Vec<MultiPoly<R>>>,
        moving: Vec<Vec<MultiPoly<R>>>,
        options: SystemOptions,
    ) -> Result<Self> {
        let exps = schedule.exponents()?;
        let cfg = schedule.config();
        let nz = cfg.n_ambient + 1;
        if a.len() != cfg.e() || moving.len() != cfg.e() {
            return Err(McmError::ShapeError(format!("expected {} equations", cfg.e())));
        }
        for i in 0..cfg.e() {
            let eps = cfg.epsilons[i];
            if a[i].len() != nz || moving[i].len() != shapes.len() {
                return Err(McmError::ShapeError(format!("equation {i} has the wrong number of blocks")));
            }
            for b in a[i].iter().chain(&moving[i]) {
                if b.arity() != Arity::plain(nz) || *b.ring() != ring {
                    return Err(McmError::ShapeError(format!("block of equation {i} has the wrong ring or arity")));
                }
                if !b.is_homogeneous_of(eps) {
                    return Err(McmError::ShapeError(format!("block of equation {i} is not homogeneous of degree {eps}")));
                }
            }
        }
        let f = (0..cfg.e())
            .map(|i| {
                let mut terms = Vec::new();
                for (j, b) in a[i].iter().enumerate() {
                    terms.push(b.mul_var_pow(j, exps.d));
                }
                for (shape, b) in shapes.iter().zip(&moving[i]) {
                    terms.push(b.mul_monomial(&Monomial(shape.exponents.clone())));
                }
                sum_polys(&ring, Arity::plain(nz), terms)
            })
            .collect();
        Ok(HypersurfaceSystem { schedule: schedule.clone(), exps, ring, options, seed: None, shapes, a, moving, f })
    }

    pub fn schedule(&self) -> &McmSchedule {
        &self.schedule
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exps
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn options(&self) -> SystemOptions {
        self.options
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn n_z(&self) -> usize {
        self.schedule.config().n_ambient + 1
    }

    pub fn shapes(&self) -> &[MovingShape] {
        &self.shapes
    }

    /// `A_i^j`.
    pub fn a(&self, i: usize, j: usize) -> &MultiPoly<R> {
        &self.a[i][j]
    }

    /// Coefficient of moving shape `t` in equation `i`.
    pub fn moving(&self, i: usize, t: usize) -> &MultiPoly<R> {
        &self.moving[i][t]
    }

    pub fn equations(&self) -> &[MultiPoly<R>] {
        &self.f
    }

    /// `deg F_i = d + ε_i`.
    pub fn degree(&self, i: usize) -> u64 {
        self.exps.d as u64 + self.schedule.config().epsilons[i]
    }

    /// Degree and moving-exponent audit; returns violations (empty when sound).
    pub fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, f) in self.f.iter().enumerate() {
            if !f.is_homogeneous_of(self.degree(i)) {
                out.push(format!("F_{i} is not homogeneous of degree {}", self.degree(i)));
            }
        }
        for s in &self.shapes {
            let deg: u64 = s.exponents.iter().map(|&x| x as u64).sum();
            if deg != self.exps.d as u64 {
                out.push(format!("moving term {:?} has degree {deg}", s.key));
            }
            if s.key.set.iter().any(|&j| s.exponents[j] < 2) {
                out.push(format!("moving term {:?} has an exponent below 2", s.key));
            }
        }
        out
    }

    /// Same blocks with one coefficient of `F_i` perturbed (for auditor tests).
    pub fn with_perturbed_equation(&self, i: usize, delta: MultiPoly<R>) -> Self {
        let mut out = self.clone();
        out.f[i] = &out.f[i] + &delta;
        out
    }

    pub fn manifest(&self) -> SystemManifest {
        SystemManifest {
            schedule: self.schedule.to_json(),
            ring: self.ring.descriptor(),
            seed: self.seed,
            options: self.options,
            shapes: self.shapes.clone(),
            equations: (0..self.f.len())
                .map(|i| EquationManifest {
                    a: self.a[i].iter().map(|p| p.to_text()).collect(),
                    moving: self.moving[i].iter().map(|p| p.to_text()).collect(),
                    f: self.f[i].to_text(),
                })
                .collect(),
        }
    }

    /// Rebuilds a system from its manifest and checks the stored equations.
    pub fn from_manifest(m: &SystemManifest, ring: R) -> Result<Self> {
        if ring.descriptor() != m.ring {
            return Err(McmError::RingMismatch(format!("{:?} vs {:?}", ring.descriptor(), m.ring)));
        }
        let schedule = McmSchedule::from_json(&m.schedule)?;
        let nz = schedule.config().n_ambient + 1;
        let parse = |t: &String| MultiPoly::parse(ring.clone(), Arity::plain(nz), t);
        let a = m.equations.iter().map(|e| e.a.iter().map(parse).collect()).collect::<Result<Vec<_>>>()?;
        let moving = m.equations.iter().map(|e| e.moving.iter().map(parse).collect()).collect::<Result<Vec<_>>>()?;
        let mut sys = Self::assemble(&schedule, ring.clone(), m.shapes.clone(), a, moving, m.options)?;
        sys.seed = m.seed;
        for (i, e) in m.equations.iter().enumerate() {
            if parse(&e.f)? != sys.f[i] {
                return Err(McmError::Parse(format!("stored F_{i} does not match its blocks")));
            }
        }
        Ok(sys)
    }
}

/// Serialized system: schedule, ring, seed and every block in text form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemManifest {
    pub schedule: ScheduleJson,
    pub ring: RingDescriptor,
    pub seed: Option<u64>,
    pub options: SystemOptions,
    pub shapes: Vec<MovingShape>,
    pub equations: Vec<EquationManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationManifest {
    pub a: Vec<String>,
    pub moving: Vec<String>,
    pub f: String,
}

fn sum_polys<R: Ring>(ring: &R, arity: Arity, parts: Vec<MultiPoly<R>>) -> MultiPoly<R> {
    let terms = parts.into_iter().flat_map(|p| p.terms().to_vec());
    MultiPoly::from_terms(ring.clone(), arity, terms)
}

/// Which regrouping to perform on the (core of the) system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewriteKind {
    /// Lower-level moving terms absorbed into `C_i^j`; top-level terms kept apart.
    Collapse,
    First { nu: usize },
    Second { tau: usize, rho: usize },
}

impl From<Variant> for RewriteKind {
    fn from(v: Variant) -> Self {
        match v {
            Variant::First { nu } => RewriteKind::First { nu },
            Variant::Second { tau, rho } => RewriteKind::Second { tau, rho },
        }
    }
}

impl RewriteKind {
    /// The form variant built from this regrouping (none for the collapse).
    pub fn variant(&self) -> Option<Variant> {
        match *self {
            RewriteKind::Collapse => None,
            RewriteKind::First { nu } => Some(Variant::First { nu }),
            RewriteKind::Second { tau, rho } => Some(Variant::Second { tau, rho }),
        }
    }
}

/// One column `block · z_var^λ` of a regrouped equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteColumn<R: Ring> {
    pub var: usize,
    pub lambda: u32,
    pub block: MultiPoly<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewrittenEquation<R: Ring> {
    /// One column per non-vanishing coordinate, in increasing order.
    pub columns: Vec<RewriteColumn<R>>,
    /// Top-level moving terms `B_k` (collapse only), one per column.
    pub tops: Vec<MultiPoly<R>>,
    /// Residue blocks `(v, R)` standing for `R · z_v²`.
    pub residues: Vec<(usize, MultiPoly<R>)>,
}

/// A system regrouped so that each equation is a Fermat-type sum over the
/// non-vanishing coordinates plus residues in `(z_v²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewrittenSystem<R: Ring> {
    pub kind: RewriteKind,
    pub vanishing: Vec<usize>,
    pub core: Vec<usize>,
    pub equations: Vec<RewrittenEquation<R>>,
    degrees: Vec<u64>,
    n_z: usize,
}

/// Collapse: `C_i^j = (A_i^j z_j^d + Σ_{l<N, j_k=j} M z^{…}) / z_j^{d−δ_N}`.
pub fn collapse<R: Ring>(sys: &HypersurfaceSystem<R>) -> Result<RewrittenSystem<R>> {
    rewrite(sys, RewriteKind::Collapse, &[])
}

/// First kind: `T_i^ν` absorbs every top-level moving term.
pub fn rewrite_first_kind<R: Ring>(sys: &HypersurfaceSystem<R>, nu: usize) -> Result<RewrittenSystem<R>> {
    rewrite(sys, RewriteKind::First { nu }, &[])
}

/// Second kind: `E_i^k` for `k <= τ` and `P_i^{τ,ρ}`.
pub fn rewrite_second_kind<R: Ring>(sys: &HypersurfaceSystem<R>, tau: usize, rho: usize) -> Result<RewrittenSystem<R>> {
    rewrite(sys, RewriteKind::Second { tau, rho }, &[])
}

/// Splits off residues in `(z_v²)` for the vanishing coordinates and regroups the core.
pub fn vanish_decompose<R: Ring>(sys: &HypersurfaceSystem<R>, vanishing: &[usize], sub: RewriteKind) -> Result<RewrittenSystem<R>> {
    if vanishing.is_empty() {
        return Err(McmError::InvalidSelection("the vanishing set must be nonempty".into()));
    }
    rewrite(sys, sub, vanishing)
}

/// Every regrouping for core size `N − η`, computed in parallel.
pub fn all_rewrites<R: Ring>(sys: &HypersurfaceSystem<R>, vanishing: &[usize]) -> Result<Vec<RewrittenSystem<R>>> {
    let top = sys.schedule.config().n_ambient - vanishing.len();
    let mut kinds = vec![RewriteKind::Collapse];
    kinds.extend(Variant::all(top).into_iter().map(RewriteKind::from));
    kinds.par_iter().map(|&k| rewrite(sys, k, vanishing)).collect()
}

/// General regrouping with vanishing coordinates `vanishing` (possibly empty).
pub fn rewrite<R: Ring>(sys: &HypersurfaceSystem<R>, kind: RewriteKind, vanishing: &[usize]) -> Result<RewrittenSystem<R>> {
    if sys.options.improved {
        return Err(McmError::ModeError("regroupings are defined for the full equations only".into()));
    }
    let cfg = sys.schedule.config();
    let nn = cfg.n_ambient;
    check_vanishing(vanishing, nn)?;
    if vanishing.len() >= cfg.n() {
        return Err(McmError::InvalidSelection(format!("η = {} must be below n = {}", vanishing.len(), cfg.n())));
    }
    let top = nn - vanishing.len();
    match kind {
        RewriteKind::Collapse => {}
        RewriteKind::First { nu } => Variant::First { nu }.check(top)?,
        RewriteKind::Second { tau, rho } => Variant::Second { tau, rho }.check(top)?,
    }
    let e = &sys.exps;
    let d = e.d;
    let delta = e.delta(top);
    let core: Vec<usize> = (0..=nn).filter(|j| !vanishing.contains(j)).collect();
    let pos = |j: usize| core.iter().position(|&x| x == j);
    let nz = nn + 1;
    let arity = Arity::plain(nz);
    let ring = &sys.ring;
    let mut equations = Vec::new();
    for i in 0..cfg.e() {
        let mut residues: BTreeMap<usize, Vec<MultiPoly<R>>> = BTreeMap::new();
        let mut lower: Vec<Vec<MultiPoly<R>>> = vec![Vec::new(); core.len()];
        let mut tops: Vec<MultiPoly<R>> = vec![MultiPoly::zero(ring.clone(), arity); core.len()];
        for &v in vanishing {
            residues.entry(v).or_default().push(sys.a[i][v].mul_var_pow(v, d - 2));
        }
        for (t, shape) in sys.shapes.iter().enumerate() {
            let coef = &sys.moving[i][t];
            if coef.is_zero() {
                continue;
            }
            let term = coef.mul_monomial(&Monomial(shape.exponents.clone()));
            if let Some(&v) = shape.key.set.iter().find(|j| vanishing.contains(j)) {
                residues.entry(v).or_default().push(term.div_var_pow(v, 2)?);
            } else if shape.key.level == top {
                tops[shape.key.k] = term;
            } else {
                let p = pos(shape.key.distinguished()).expect("core index");
                lower[p].push(term);
            }
        }
        let mut c_blocks = Vec::with_capacity(core.len());
        for (p, &j) in core.iter().enumerate() {
            let mut parts = vec![sys.a[i][j].mul_var_pow(j, d)];
            parts.append(&mut lower[p]);
            c_blocks.push(sum_polys(ring, arity, parts).div_var_pow(j, d - delta)?);
        }
        let plain = |p: usize, block: MultiPoly<R>| RewriteColumn { var: core[p], lambda: d - delta, block };
        let full_c = |p: usize| c_blocks[p].mul_var_pow(core[p], d - delta);
        let mut columns: Vec<RewriteColumn<R>> = c_blocks.iter().cloned().enumerate().map(|(p, b)| plain(p, b)).collect();
        let mut kept_tops = Vec::new();
        match kind {
            RewriteKind::Collapse => kept_tops = tops,
            RewriteKind::First { nu } => {
                let mu0 = e.mu(top, 0);
                let mut parts = vec![full_c(nu)];
                parts.extend(tops);
                let t = sum_polys(ring, arity, parts).div_var_pow(core[nu], mu0)?;
                columns[nu] = RewriteColumn { var: core[nu], lambda: mu0, block: t };
            }
            RewriteKind::Second { tau, rho } => {
                for k in 0..=tau {
                    let lam = d - top as u32 * e.mu(top, k);
                    let sum = sum_polys(ring, arity, vec![full_c(k), tops[k].clone()]);
                    columns[k] = RewriteColumn { var: core[k], lambda: lam, block: sum.div_var_pow(core[k], lam)? };
                }
                let lam = e.mu(top, tau + 1);
                let mut parts = vec![full_c(rho)];
                parts.extend(tops[tau + 1..].iter().cloned());
                let p = sum_polys(ring, arity, parts).div_var_pow(core[rho], lam)?;
                columns[rho] = RewriteColumn { var: core[rho], lambda: lam, block: p };
            }
        }
        let residues = residues
            .into_iter()
            .map(|(v, parts)| (v, sum_polys(ring, arity, parts)))
            .collect();
        equations.push(RewrittenEquation { columns, tops: kept_tops, residues });
    }
    let degrees = (0..cfg.e()).map(|i| sys.degree(i)).collect();
    Ok(RewrittenSystem { kind, vanishing: vanishing.to_vec(), core, equations, degrees, n_z: nz })
}

/// Outcome of re-assembling a regrouped system and subtracting the original.
#[derive(Debug, Clone, PartialEq)]
pub struct RewriteCheck<R: Ring> {
    pub exact: bool,
    pub residuals: Vec<MultiPoly<R>>,
}

/// Recomputes `Σ block·z^λ + Σ tops + Σ R·z_v² − F_i` for every equation.
pub fn verify_rewrite<R: Ring>(sys: &HypersurfaceSystem<R>, rw: &RewrittenSystem<R>) -> RewriteCheck<R> {
    let arity = Arity::plain(sys.n_z());
    let residuals: Vec<MultiPoly<R>> = rw
        .equations
        .iter()
        .zip(sys.equations())
        .map(|(eq, f)| {
            let mut parts: Vec<MultiPoly<R>> = eq.columns.iter().map(|c| c.block.mul_var_pow(c.var, c.lambda)).collect();
            parts.extend(eq.tops.iter().cloned());
            parts.extend(eq.residues.iter().map(|(v, r)| r.mul_var_pow(*v, 2)));
            parts.push(f.neg());
            sum_polys(&sys.ring, arity, parts)
        })
        .collect();
    let exact = residuals.len() == sys.equations().len() && residuals.iter().all(|r| r.is_zero());
    RewriteCheck { exact, residuals }
}

/// Reassembly outcome of one regrouping in a [`rewrite_suite`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RewriteOutcome {
    pub vanishing: Vec<usize>,
    pub kind: RewriteKind,
    pub exact: bool,
    pub residues_in_square_ideal: bool,
    /// Set when the regrouping itself failed (an inexact division).
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RewriteSuiteReport {
    pub checked: usize,
    pub failures: usize,
    pub outcomes: Vec<RewriteOutcome>,
}

impl RewriteSuiteReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures == 0
    }
}

/// Every regrouping for every vanishing set of each size in `etas`, reassembled
/// and compared with the original equations.
pub fn rewrite_suite<R: Ring>(sys: &HypersurfaceSystem<R>, etas: &[usize]) -> RewriteSuiteReport {
    let nn = sys.schedule.config().n_ambient;
    let mut outcomes = Vec::new();
    for &eta in etas {
        for v in subsets(nn + 1, eta) {
            match all_rewrites(sys, &v) {
                Ok(rws) => outcomes.extend(rws.iter().map(|rw| RewriteOutcome {
                    vanishing: v.clone(),
                    kind: rw.kind,
                    exact: verify_rewrite(sys, rw).exact,
                    residues_in_square_ideal: rw.residues_in_square_ideal(),
                    error: None,
                })),
                Err(e) => outcomes.push(RewriteOutcome {
                    vanishing: v.clone(),
                    kind: RewriteKind::Collapse,
                    exact: false,
                    residues_in_square_ideal: false,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    let failures = outcomes.iter().filter(|o| !(o.exact && o.residues_in_square_ideal)).count();
    RewriteSuiteReport { checked: outcomes.len(), failures, outcomes }
}

impl<R: Ring> RewrittenSystem<R> {
    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn degrees(&self) -> &[u64] {
        &self.degrees
    }

    /// Fermat-type view `F_i − residues = Σ_j G_i^j z_{var_j}^{λ_j}` (not for collapse).
    pub fn fermat(&self) -> Result<FermatSystem<R>> {
        if self.kind == RewriteKind::Collapse {
            return Err(McmError::InvalidSelection("a collapsed system keeps its top-level terms apart".into()));
        }
        let first = &self.equations[0].columns;
        Ok(FermatSystem {
            n_z: self.n_z,
            vars: first.iter().map(|c| c.var).collect(),
            lambdas: first.iter().map(|c| c.lambda).collect(),
            blocks: self.equations.iter().map(|e| e.columns.iter().map(|c| c.block.clone()).collect()).collect(),
            degrees: self.degrees.clone(),
        })
    }

    /// Columns `(A_0..A_m | B_0..B_m)` of the collapsed system, as full polynomials.
    pub fn m_columns(&self) -> Result<Vec<Vec<MultiPoly<R>>>> {
        if self.kind != RewriteKind::Collapse {
            return Err(McmError::InvalidSelection("the M matrix comes from the collapsed system".into()));
        }
        Ok(self
            .equations
            .iter()
            .map(|eq| {
                let mut row: Vec<MultiPoly<R>> = eq.columns.iter().map(|c| c.block.mul_var_pow(c.var, c.lambda)).collect();
                row.extend(eq.tops.iter().cloned());
                row
            })
            .collect())
    }

    /// Every residue block is a polynomial, so each residue lies in `(z_v²)`; this
    /// re-checks that at the level of the expanded terms.
    pub fn residues_in_square_ideal(&self) -> bool {
        self.equations.iter().all(|eq| {
            eq.residues.iter().all(|(v, r)| {
                r.mul_var_pow(*v, 2).terms().iter().all(|(m, _)| m.0[*v] >= 2)
            })
        })
    }
}

/// Equations of Fermat type `F_i = Σ_j G_i^j z_{vars_j}^{λ_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FermatSystem<R: Ring> {
    pub n_z: usize,
    pub vars: Vec<usize>,
    pub lambdas: Vec<u32>,
    pub blocks: Vec<Vec<MultiPoly<R>>>,
    pub degrees: Vec<u64>,
}

impl<R: Ring> FermatSystem<R> {
    pub fn new(n_z: usize, vars: Vec<usize>, lambdas: Vec<u32>, blocks: Vec<Vec<MultiPoly<R>>>) -> Result<Self> {
        if vars.len() != lambdas.len() || blocks.iter().any(|row| row.len() != vars.len()) {
            return Err(McmError::ShapeError("blocks, variables and exponents disagree".into()));
        }
        let mut degrees = Vec::new();
        for row in &blocks {
            let mut deg = None;
            for (b, &lam) in row.iter().zip(&lambdas) {
                match b.homogeneity() {
                    crate::polyring::Homogeneity::Zero => {}
                    crate::polyring::Homogeneity::Degree(g) => {
                        let total = g + lam as u64;
                        if deg.is_some_and(|x| x != total) {
                            return Err(McmError::NotHomogeneous);
                        }
                        deg = Some(total);
                    }
                    crate::polyring::Homogeneity::Mixed => return Err(McmError::NotHomogeneous),
                }
            }
            degrees.push(deg.ok_or_else(|| McmError::ShapeError("an equation is identically zero".into()))?);
        }
        Ok(FermatSystem { n_z, vars, lambdas, blocks, degrees })
    }

    pub fn n_equations(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_columns(&self) -> usize {
        self.vars.len()
    }

    /// `F_i` reassembled.
    pub fn equation(&self, i: usize) -> MultiPoly<R> {
        let parts: Vec<_> = self.blocks[i]
            .iter()
            .zip(&self.vars)
            .zip(&self.lambdas)
            .map(|((b, &v), &l)| b.mul_var_pow(v, l))
            .collect();
        let ring = parts[0].ring().clone();
        sum_polys(&ring, Arity::plain(self.n_z), parts)
    }

    pub fn lambdas_big(&self) -> Vec<num_bigint::BigInt> {
        self.lambdas.iter().map(|&l| num_bigint::BigInt::from(l)).collect()
    }

    pub fn degrees_big(&self) -> Vec<num_bigint::BigInt> {
        self.degrees.iter().map(|&d| num_bigint::BigInt::from(d)).collect()
    }
}

impl McmSchedule {
    /// Parses a serialized schedule; non-custom modes are rebuilt and compared.
    pub fn from_json(j: &ScheduleJson) -> Result<McmSchedule> {
        let cfg = crate::McmConfig::new(j.n_ambient, j.c, j.r, j.heart, j.epsilons.clone())?;
        let parse = |s: &String| s.parse::<BigUint>().map_err(|_| McmError::Parse(format!("bad integer `{s}`")));
        let delta = j.delta.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let mu = j.mu.iter().map(|row| row.iter().map(parse).collect()).collect::<Result<Vec<Vec<_>>>>()?;
        let d = parse(&j.d)?;
        match j.mode {
            crate::ScheduleMode::Custom => McmSchedule::from_parts(cfg, delta, mu, d),
            mode => {
                let s = crate::build_schedule(&cfg, mode)?.with_degree(d)?;
                if s.to_json() != *j {
                    return Err(McmError::Parse("schedule values do not match their mode".into()));
                }
                Ok(s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcm_schedule::{build_schedule, McmConfig, ScheduleMode};
    use crate::polyring::{euler_residual, PrimeField, Rationals};

    fn schedule(nn: usize, c: usize, r: usize) -> McmSchedule {
        build_schedule(&McmConfig::uniform(nn, c, r, 1, 1).unwrap(), ScheduleMode::Tight).unwrap()
    }

    fn field() -> PrimeField {
        PrimeField::new(2_147_483_647).unwrap()
    }

    #[test]
    fn monomial_basis_sizes() {
        assert_eq!(monomials_of_degree(3, 2).len(), 6);
        assert_eq!(monomials_of_degree(5, 1).len(), 5);
        assert_eq!(monomials_of_degree(4, 0), vec![vec![0, 0, 0, 0]]);
    }

    #[test]
    fn sampling_is_deterministic_and_homogeneous() {
        let s = schedule(3, 2, 0);
        let a = sample_system(&s, field(), 9, SystemOptions::default()).unwrap();
        let b = sample_system(&s, field(), 9, SystemOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.audit().is_empty());
        for f in a.equations() {
            assert!(euler_residual(f).unwrap().is_zero());
        }
    }

    #[test]
    fn small_characteristic_is_rejected_unless_allowed() {
        let s = schedule(2, 1, 0);
        let f = PrimeField::new(101).unwrap();
        assert!(matches!(
            sample_system(&s, f, 1, SystemOptions::default()),
            Err(McmError::CharacteristicTooSmall { .. })
        ));
        let opts = SystemOptions { allow_small_q: true, ..Default::default() };
        assert!(sample_system(&s, f, 1, opts).is_ok());
    }

    #[test]
    fn zero_moving_gives_fermat_shape() {
        let s = schedule(3, 2, 0);
        let opts = SystemOptions { zero_moving: true, ..Default::default() };
        let sys = sample_system(&s, Rationals, 3, opts).unwrap();
        let d = sys.exponents().d;
        for i in 0..2 {
            let expect: Vec<_> = (0..4).map(|j| sys.a(i, j).mul_var_pow(j, d)).collect();
            let sum = expect.iter().skip(1).fold(expect[0].clone(), |acc, p| &acc + p);
            assert_eq!(sys.equations()[i], sum);
        }
        let c = collapse(&sys).unwrap();
        let delta = sys.exponents().delta(3);
        for col in &c.equations[0].columns {
            assert_eq!(col.block, sys.a(0, col.var).mul_var_pow(col.var, delta));
        }
        let t = rewrite_first_kind(&sys, 1).unwrap();
        let mu0 = sys.exponents().mu(3, 0);
        assert_eq!(t.equations[1].columns[1].block, sys.a(1, 1).mul_var_pow(1, d - mu0));
    }

    #[test]
    fn every_rewrite_reassembles_exactly() {
        for (nn, c, r) in [(2, 1, 0), (3, 2, 0), (3, 1, 1), (4, 2, 0)] {
            let s = schedule(nn, c, r);
            for seed in 0..3 {
                let sys = sample_system(&s, field(), seed, SystemOptions::default()).unwrap();
                for eta in 0..s.config().n() {
                    for v in subsets(nn + 1, eta) {
                        for rw in all_rewrites(&sys, &v).unwrap() {
                            assert!(verify_rewrite(&sys, &rw).exact, "{nn}{c}{r} {:?} {v:?}", rw.kind);
                            assert!(rw.residues_in_square_ideal());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn corrupted_block_is_detected() {
        let s = schedule(2, 1, 0);
        let sys = sample_system(&s, field(), 4, SystemOptions::default()).unwrap();
        let rw = rewrite_first_kind(&sys, 0).unwrap();
        let mut bad = rw.clone();
        let col = &mut bad.equations[0].columns[1];
        let bump = MultiPoly::monomial(field(), Arity::plain(3), Monomial(vec![1, 0, 0]), 1);
        col.block = &col.block + &bump;
        let check = verify_rewrite(&sys, &bad);
        assert!(!check.exact);
        assert_eq!(check.residuals[0].len(), 1);
    }

    #[test]
    fn collapsed_block_degrees() {
        let s = schedule(3, 1, 1);
        let sys = sample_system(&s, field(), 2, SystemOptions::default()).unwrap();
        let c = collapse(&sys).unwrap();
        let delta = sys.exponents().delta(3) as u64;
        for (i, eq) in c.equations.iter().enumerate() {
            for col in &eq.columns {
                assert!(col.block.is_homogeneous_of(s.config().epsilons[i] + delta));
            }
        }
    }

    #[test]
    fn second_kind_boundary_absorbs_last_top_term() {
        let s = schedule(2, 1, 0);
        let sys = sample_system(&s, field(), 5, SystemOptions::default()).unwrap();
        let c = collapse(&sys).unwrap();
        let rw = rewrite_second_kind(&sys, 1, 2).unwrap();
        let mu2 = sys.exponents().mu(2, 2);
        let expect = (&c.m_columns().unwrap()[0][2] + &c.equations[0].tops[2]).div_var_pow(2, mu2).unwrap();
        assert_eq!(rw.equations[0].columns[2].block, expect);
    }

    #[test]
    fn manifest_round_trip() {
        let s = schedule(2, 1, 0);
        let sys = sample_system(&s, field(), 8, SystemOptions::default()).unwrap();
        let m = sys.manifest();
        let json = serde_json::to_string(&m).unwrap();
        let back: SystemManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(HypersurfaceSystem::from_manifest(&back, field()).unwrap(), sys);
    }

    #[test]
    fn invalid_selections() {
        let s = schedule(4, 2, 0);
        let sys = sample_system(&s, field(), 1, SystemOptions::default()).unwrap();
        assert!(vanish_decompose(&sys, &[], RewriteKind::Collapse).is_err());
        assert!(vanish_decompose(&sys, &[2, 1], RewriteKind::Collapse).is_err());
        assert!(vanish_decompose(&sys, &[0, 1], RewriteKind::Collapse).is_err());
        assert!(rewrite_first_kind(&sys, 5).is_err());
        assert!(vanish_decompose(&sys, &[1], RewriteKind::First { nu: 4 }).is_err());
        assert!(vanish_decompose(&sys, &[1], RewriteKind::First { nu: 3 }).is_ok());
    }

    #[test]
    fn improved_shapes_are_audited() {
        let s = schedule(4, 2, 0);
        let (shapes, rep) = improved_moving_shapes(&s).unwrap();
        assert_eq!(rep.excess, 2);
        assert!(rep.well_formed, "{:?}", rep.problems);
        assert_eq!(shapes.len(), 3);
        let opts = SystemOptions { improved: true, ..Default::default() };
        let sys = sample_system(&s, field(), 1, opts).unwrap();
        assert!(sys.audit().is_empty());
        assert!(matches!(collapse(&sys), Err(McmError::ModeError(_))));
    }
}
