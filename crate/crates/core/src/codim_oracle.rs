//! Brute-force and Monte-Carlo point counting for determinantal rank-condition
//! varieties over small prime fields, with slope-fit dimension estimates.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{McmError, Result};
use crate::linalg::rank_of;
use crate::polyring::{PrimeField, Ring};
use crate::rng::{derive_seed, par_chunks, stream_rng};

/// Default enumeration budget (`2^30` matrices).
pub const DEFAULT_BUDGET: u64 = 1 << 30;
/// Half-width of the acceptance band around an integer codimension.
pub const SLOPE_BAND: f64 = 0.35;
/// Expected number of Monte-Carlo hits the sampler aims for.
pub const TARGET_HITS: f64 = 400.0;
const Z99: f64 = 2.5758293035489;
const MC_CHUNK: u64 = 1 << 15;
const MAX_PREFIX_ENUM: u64 = 1 << 22;
const KERNEL_ROWS: usize = 8;
const KERNEL_COLS: usize = 16;

/// A family of rank-condition varieties with its numeric parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RankVarietySpec {
    /// `p × 2p` matrices `(α | β)` with `rank α <= ℓ` plus the ν- and (τ,ρ)-conditions.
    X { p: usize, l: usize },
    /// `X(p, ℓ) ∩ {α_1 + β_1 = 0}`.
    X0 { p: usize, l: usize },
    /// `p × 2m` matrices `(α | β)` with `m` columns per block.
    Xpq { p: usize, m: usize, l: usize },
    /// `rows × 2(n+1)` matrices with zero column sum and rank <= n−1 conditions.
    M { n: usize, rows: usize },
    /// `rows × (n+k+2)` matrices: `n+1` α columns and `k+1` β columns.
    Mk { n: usize, k: usize, rows: usize },
    /// `rows × (n+1)` matrices with zero column sum and every n-column subset of rank <= n−1.
    Mminus { n: usize, rows: usize },
    /// `p × p` matrices with a fixed lower-right block `J` of rank `ℓ` and rank <= j.
    Js {
        p: usize,
        l: usize,
        j: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fixed: Option<Vec<Vec<u64>>>,
    },
}

/// How the formula for the expected codimension is stated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedKind {
    Identity,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub codim: usize,
    pub kind: ExpectedKind,
}

impl fmt::Display for RankVarietySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::X { p, l } => write!(f, "X(p={p},l={l})"),
            Self::X0 { p, l } => write!(f, "X0(p={p},l={l})"),
            Self::Xpq { p, m, l } => write!(f, "X(p={p},m={m},l={l})"),
            Self::M { n, rows } => write!(f, "M(N={n},rows={rows})"),
            Self::Mk { n, k, rows } => write!(f, "Mk(N={n},k={k},rows={rows})"),
            Self::Mminus { n, rows } => write!(f, "Mminus(N={n},rows={rows})"),
            Self::Js { p, l, j, .. } => write!(f, "JS(p={p},l={l},j={j})"),
        }
    }
}

/// One rank condition: the listed column combinations have rank at most `max_rank`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub label: String,
    pub combos: Vec<Vec<(usize, i64)>>,
    pub max_rank: usize,
}

/// Parametrization of a family: which columns are free, which are linear
/// combinations of others, which entries are fixed, and the rank conditions.
#[derive(Debug, Clone)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    /// Dimension of the space in which codimension is measured.
    pub ambient: usize,
    pub basis_cols: Vec<usize>,
    /// `(column, coefficients over basis columns)` for columns fixed by a linear constraint.
    pub derived: Vec<(usize, Vec<i64>)>,
    /// `(row, basis index)` of each free coordinate; the prefix comes first.
    pub free: Vec<(usize, usize)>,
    pub fixed: Vec<(usize, usize, u64)>,
    pub prefix_len: usize,
    pub conditions: Vec<Condition>,
}

fn col(c: usize) -> Vec<(usize, i64)> {
    vec![(c, 1)]
}

fn sum_of(cols: impl IntoIterator<Item = usize>) -> Vec<(usize, i64)> {
    cols.into_iter().map(|c| (c, 1)).collect()
}

/// The (i)/(ii)/(iii) conditions on columns `α_0..α_{a-1}`, `β_0..β_{b-1}`
/// (full indices `alpha + i`, `beta + j`), with ν ranging over `0..b` and the
/// (τ,ρ) pairs over `0..b−1`, `τ < ρ < b`.
fn nu_tau_rho(alpha: usize, a: usize, beta: usize, b: usize, max_rank: usize, cond: &mut Vec<Condition>) {
    let all_beta: Vec<usize> = (0..b).map(|j| beta + j).collect();
    for nu in 0..b {
        let mut combos: Vec<Vec<(usize, i64)>> = (0..a).filter(|&k| k != nu).map(|k| col(alpha + k)).collect();
        let mut last = col(alpha + nu);
        last.extend(sum_of(all_beta.iter().copied()));
        combos.push(last);
        cond.push(Condition { label: format!("nu={nu}"), combos, max_rank });
    }
    for tau in 0..b.saturating_sub(1) {
        for rho in tau + 1..b {
            let mut combos = Vec::new();
            for k in 0..a {
                if k <= tau {
                    combos.push(vec![(alpha + k, 1), (beta + k, 1)]);
                } else if k != rho {
                    combos.push(col(alpha + k));
                }
            }
            let mut last = col(alpha + rho);
            last.extend(sum_of((tau + 1..b).map(|j| beta + j)));
            combos.push(last);
            cond.push(Condition { label: format!("tau={tau},rho={rho}"), combos, max_rank });
        }
    }
}

impl RankVarietySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(McmError::InvalidConfig(msg));
        match *self {
            Self::X { p, l } | Self::X0 { p, l } => {
                if p < 2 || l > p {
                    return bad(format!("{self} needs p >= 2 and 0 <= l <= p"));
                }
                if p > KERNEL_ROWS {
                    return bad(format!("{self}: p > {KERNEL_ROWS} is outside the supported range"));
                }
            }
            Self::Xpq { p, m, l } => {
                if m < 2 || p < m || l > m || p > KERNEL_ROWS {
                    return bad(format!("{self} needs p >= m >= 2, 0 <= l <= m and p <= {KERNEL_ROWS}"));
                }
            }
            Self::M { n, rows } | Self::Mminus { n, rows } => {
                if n < 1 || rows < n || rows > KERNEL_ROWS {
                    return bad(format!("{self} needs N >= 1 and N <= 2c+r <= {KERNEL_ROWS}"));
                }
            }
            Self::Mk { n, k, rows } => {
                if n < 2 || k < 1 || k >= n || rows < n || rows > KERNEL_ROWS {
                    return bad(format!("{self} needs 1 <= k <= N−1 and N <= 2c+r <= {KERNEL_ROWS}"));
                }
            }
            Self::Js { p, l, j, ref fixed } => {
                if p < 2 || l > p - 1 || (j != l && j != l + 1) || p > KERNEL_ROWS {
                    return bad(format!("{self} needs p >= 2, l <= p−1 and j ∈ {{l, l+1}}"));
                }
                if let Some(m) = fixed {
                    if m.len() != p - 1 || m.iter().any(|r| r.len() != p - 1) {
                        return Err(McmError::ShapeError(format!("J must be {}×{}", p - 1, p - 1)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Matrix shape `(rows, cols)` of the family.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Self::X { p, .. } | Self::X0 { p, .. } => (p, 2 * p),
            Self::Xpq { p, m, .. } => (p, 2 * m),
            Self::M { n, rows } => (rows, 2 * (n + 1)),
            Self::Mk { n, k, rows } => (rows, n + k + 2),
            Self::Mminus { n, rows } => (rows, n + 1),
            Self::Js { p, .. } => (p, p),
        }
    }

    /// The codimension predicted by the formula table.
    pub fn expected(&self) -> Expected {
        use ExpectedKind::*;
        match *self {
            Self::X { p, l } if l == p => Expected { codim: p, kind: Identity },
            Self::X { p, l } => Expected { codim: l + (p - l).pow(2) + 1, kind: LowerBound },
            Self::X0 { p, l } if l + 1 >= p => Expected { codim: p + 2, kind: Identity },
            Self::X0 { p, l } => Expected { codim: p + (p - l).pow(2), kind: Identity },
            Self::Xpq { p, m, l } if l == m => Expected { codim: p, kind: Identity },
            Self::Xpq { p, m, l } => Expected { codim: (p - l) * (m - l) + p - m + l + 1, kind: LowerBound },
            Self::M { n, rows } => Expected { codim: rows + n + 1, kind: LowerBound },
            Self::Mk { n, k, rows } => Expected { codim: 2 * rows + k + 1 - n, kind: LowerBound },
            Self::Mminus { n, rows } => Expected { codim: 2 * rows + 1 - n, kind: Identity },
            Self::Js { p, l, j, .. } if j == l => Expected { codim: 2 * (p - 1 - l) + 1, kind: Identity },
            Self::Js { p, l, .. } => Expected { codim: p - 1 - l, kind: Identity },
        }
    }

    /// Rank conditions on the full matrix (linear constraints are separate).
    pub fn conditions(&self) -> Vec<Condition> {
        let mut cond = Vec::new();
        match *self {
            Self::X { p, l } | Self::X0 { p, l } => {
                cond.push(Condition { label: "alpha".into(), combos: (0..p).map(col).collect(), max_rank: l });
                nu_tau_rho(0, p, p, p, p - 1, &mut cond);
            }
            Self::Xpq { m, l, .. } => {
                cond.push(Condition { label: "alpha".into(), combos: (0..m).map(col).collect(), max_rank: l });
                nu_tau_rho(0, m, m, m, m - 1, &mut cond);
            }
            Self::M { n, .. } => nu_tau_rho(0, n + 1, n + 1, n + 1, n - 1, &mut cond),
            Self::Mk { n, k, .. } => nu_tau_rho(0, n + 1, n + 1, k + 1, n - 1, &mut cond),
            Self::Mminus { n, .. } => {
                for nu in 0..=n {
                    cond.push(Condition {
                        label: format!("omit={nu}"),
                        combos: (0..=n).filter(|&k| k != nu).map(col).collect(),
                        max_rank: n - 1,
                    });
                }
            }
            Self::Js { p, j, .. } => {
                cond.push(Condition { label: "rank".into(), combos: (0..p).map(col).collect(), max_rank: j });
            }
        }
        cond
    }

    /// Linear constraints: `(column, combination of other columns)` meaning
    /// `column = Σ coeff · other`.
    pub fn linear_constraints(&self) -> Vec<(usize, Vec<(usize, i64)>)> {
        match *self {
            Self::X0 { p, .. } => vec![(p, vec![(0, -1)])],
            Self::M { .. } | Self::Mk { .. } | Self::Mminus { .. } => {
                let (_, cols) = self.shape();
                vec![(cols - 1, (0..cols - 1).map(|c| (c, -1)).collect())]
            }
            _ => Vec::new(),
        }
    }

    /// Size of the stratification prefix in columns (the α block).
    fn prefix_cols(&self) -> usize {
        match *self {
            Self::X { p, .. } | Self::X0 { p, .. } => p,
            Self::Xpq { m, .. } => m,
            Self::M { n, .. } | Self::Mk { n, .. } => n + 1,
            Self::Mminus { .. } | Self::Js { .. } => 0,
        }
    }

    /// The `J` block used at `q`: the fixed one (reduced mod q, rank checked) or a random one of rank ℓ.
    pub fn j_block(&self, f: &PrimeField, rng: &mut ChaCha8Rng) -> Result<Option<Vec<Vec<u64>>>> {
        let Self::Js { p, l, ref fixed, .. } = *self else {
            return Ok(None);
        };
        let n = p - 1;
        if let Some(m) = fixed {
            let red: Vec<Vec<u64>> = m.iter().map(|r| r.iter().map(|x| x % f.q()).collect()).collect();
            let rk = rank_of(f, &red);
            if rk != l {
                return Err(McmError::InvalidSelection(format!("rank(J) = {rk} but l = {l}")));
            }
            return Ok(Some(red));
        }
        loop {
            let a: Vec<Vec<u64>> = (0..n).map(|_| (0..l).map(|_| rng.random_range(0..f.q())).collect()).collect();
            let b: Vec<Vec<u64>> = (0..l).map(|_| (0..n).map(|_| rng.random_range(0..f.q())).collect()).collect();
            let j: Vec<Vec<u64>> = (0..n)
                .map(|r| (0..n).map(|c| (0..l).fold(0, |acc, t| f.add(&acc, &f.mul(&a[r][t], &b[t][c])))).collect())
                .collect();
            if rank_of(f, &j) == l {
                return Ok(Some(j));
            }
        }
    }

    /// Builds the parametrization at `q` (the `J` block, if any, is drawn from `seed`).
    pub fn layout(&self, f: &PrimeField, seed: u64) -> Result<Layout> {
        self.validate()?;
        let (rows, cols) = self.shape();
        let lin = self.linear_constraints();
        let derived_cols: Vec<usize> = lin.iter().map(|(c, _)| *c).collect();
        let basis_cols: Vec<usize> = (0..cols).filter(|c| !derived_cols.contains(c)).collect();
        let bidx = |c: usize| basis_cols.iter().position(|&x| x == c).expect("basis column");
        let derived = lin
            .iter()
            .map(|(c, combo)| {
                let mut coeffs = vec![0i64; basis_cols.len()];
                for &(o, k) in combo {
                    coeffs[bidx(o)] += k;
                }
                (*c, coeffs)
            })
            .collect();
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        let mut prefix_len = 0;
        if let Some(j) = self.j_block(f, &mut stream_rng(seed, f.q()))? {
            for r in 0..rows {
                free.push((r, 0));
            }
            for c in 1..cols {
                free.push((0, c));
            }
            for r in 1..rows {
                for c in 1..cols {
                    fixed.push((r, c, j[r - 1][c - 1]));
                }
            }
        } else {
            let pc = self.prefix_cols();
            for (b, _) in basis_cols.iter().enumerate() {
                for r in 0..rows {
                    free.push((r, b));
                }
                if b + 1 == pc {
                    prefix_len = free.len();
                }
            }
        }
        let ambient = match self {
            Self::Js { p, .. } => 2 * p - 1,
            _ => rows * cols,
        };
        Ok(Layout {
            rows,
            cols,
            ambient,
            basis_cols,
            derived,
            free,
            fixed,
            prefix_len,
            conditions: self.conditions(),
        })
    }
}

impl Layout {
    /// Conditions rewritten over basis columns.
    fn compiled(&self, f: &PrimeField) -> Vec<CompiledCondition> {
        let nb = self.basis_cols.len();
        let basis_combo = |c: usize| -> Vec<i64> {
            if let Some(b) = self.basis_cols.iter().position(|&x| x == c) {
                let mut v = vec![0; nb];
                v[b] = 1;
                v
            } else {
                self.derived.iter().find(|(d, _)| *d == c).expect("derived column").1.clone()
            }
        };
        let prefix_basis = if self.prefix_len == 0 { 0 } else { self.free[self.prefix_len - 1].1 + 1 };
        self.conditions
            .iter()
            .map(|cnd| {
                let combos: Vec<Vec<(usize, u64)>> = cnd
                    .combos
                    .iter()
                    .map(|combo| {
                        let mut acc = vec![0i64; nb];
                        for &(c, k) in combo {
                            for (a, v) in acc.iter_mut().zip(basis_combo(c)) {
                                *a += k * v;
                            }
                        }
                        acc.iter()
                            .enumerate()
                            .filter_map(|(b, &v)| {
                                let r = f.reduce_i64(v);
                                (r != 0).then_some((b, r))
                            })
                            .collect()
                    })
                    .collect();
                let prefix_only = prefix_basis > 0 && combos.iter().flatten().all(|&(b, _)| b < prefix_basis);
                CompiledCondition { combos, max_rank: cnd.max_rank, prefix_only }
            })
            .collect()
    }

    /// Number of free coordinates.
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Expands basis-column values into the full matrix.
    pub fn full_matrix(&self, f: &PrimeField, basis: &[Vec<u64>]) -> Vec<Vec<u64>> {
        let mut m = vec![vec![0u64; self.cols]; self.rows];
        for (b, &c) in self.basis_cols.iter().enumerate() {
            for r in 0..self.rows {
                m[r][c] = basis[r][b];
            }
        }
        for (c, coeffs) in &self.derived {
            for r in 0..self.rows {
                m[r][*c] = coeffs
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (b, &k)| f.add(&acc, &f.mul(&f.reduce_i64(k), &basis[r][b])));
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
struct CompiledCondition {
    combos: Vec<Vec<(usize, u64)>>,
    max_rank: usize,
    prefix_only: bool,
}

/// Field arithmetic with an inverse table, for the hot loops.
#[derive(Debug, Clone)]
struct Kernel {
    q: u64,
    inv: Vec<u64>,
}

impl Kernel {
    fn new(f: &PrimeField) -> Self {
        let q = f.q();
        let inv = if q <= 1 << 16 { (0..q).map(|a| f.inv(a).unwrap_or(0)).collect() } else { Vec::new() };
        Kernel { q, inv }
    }

    #[inline]
    fn inv(&self, a: u64) -> u64 {
        if self.inv.is_empty() {
            let f = PrimeField::new(self.q).expect("prime");
            f.inv(a).expect("nonzero")
        } else {
            self.inv[a as usize]
        }
    }

    /// Whether the `rows × cols` matrix in `m` (row stride `KERNEL_COLS`) has rank <= `max`.
    #[inline]
    fn rank_le(&self, m: &mut [u64; KERNEL_ROWS * KERNEL_COLS], rows: usize, cols: usize, max: usize) -> bool {
        if rows.min(cols) <= max {
            return true;
        }
        let q = self.q;
        let mut r = 0;
        for c in 0..cols {
            if r + (cols - c) <= max {
                return true;
            }
            let Some(p) = (r..rows).find(|&i| m[i * KERNEL_COLS + c] != 0) else {
                continue;
            };
            if p != r {
                for k in c..cols {
                    m.swap(r * KERNEL_COLS + k, p * KERNEL_COLS + k);
                }
            }
            let inv = self.inv(m[r * KERNEL_COLS + c]);
            for i in r + 1..rows {
                let x = m[i * KERNEL_COLS + c];
                if x == 0 {
                    continue;
                }
                let factor = x * inv % q;
                for k in c..cols {
                    let t = factor * m[r * KERNEL_COLS + k] % q;
                    let e = &mut m[i * KERNEL_COLS + k];
                    *e = (*e + q - t) % q;
                }
            }
            r += 1;
            if r > max {
                return false;
            }
            if r == rows {
                break;
            }
        }
        true
    }
}

/// Evaluation state for one worker: the basis matrix and a scratch buffer.
struct Evaluator<'a> {
    kernel: &'a Kernel,
    layout: &'a Layout,
    conds: &'a [CompiledCondition],
    basis: Vec<u64>,
    nb: usize,
    scratch: [u64; KERNEL_ROWS * KERNEL_COLS],
}

impl<'a> Evaluator<'a> {
    fn new(kernel: &'a Kernel, layout: &'a Layout, conds: &'a [CompiledCondition]) -> Self {
        let nb = layout.basis_cols.len();
        let mut basis = vec![0u64; layout.rows * nb];
        for &(r, c, v) in &layout.fixed {
            let b = layout.basis_cols.iter().position(|&x| x == c).expect("basis");
            basis[r * nb + b] = v;
        }
        Evaluator { kernel, layout, conds, basis, nb, scratch: [0; KERNEL_ROWS * KERNEL_COLS] }
    }

    #[inline]
    fn set(&mut self, idx: usize, v: u64) {
        let (r, b) = self.layout.free[idx];
        self.basis[r * self.nb + b] = v;
    }

    fn check(&mut self, prefix_only: Option<bool>) -> bool {
        let q = self.kernel.q;
        let rows = self.layout.rows;
        for cond in self.conds {
            if let Some(po) = prefix_only {
                if cond.prefix_only != po {
                    continue;
                }
            }
            let ncols = cond.combos.len();
            if rows.min(ncols) <= cond.max_rank {
                continue;
            }
            for (k, combo) in cond.combos.iter().enumerate() {
                for r in 0..rows {
                    let row = &self.basis[r * self.nb..(r + 1) * self.nb];
                    let mut acc = 0u64;
                    for &(b, c) in combo {
                        acc += row[b] * c % q;
                    }
                    self.scratch[r * KERNEL_COLS + k] = acc % q;
                }
            }
            if !self.kernel.rank_le(&mut self.scratch, rows, ncols, cond.max_rank) {
                return false;
            }
        }
        true
    }
}

fn budget_error(q: u64, e: usize, budget: u64) -> McmError {
    let needed = u32::try_from(e).ok().and_then(|e| (q as u128).checked_pow(e)).unwrap_or(u128::MAX);
    McmError::BudgetExceeded { needed, budget: budget as u128 }
}

fn pow_checked(q: u64, e: usize) -> Option<u64> {
    q.checked_pow(u32::try_from(e).ok()?)
}

/// Membership of a full matrix: linear constraints, fixed block and every rank condition.
pub fn membership(matrix: &[Vec<u64>], spec: &RankVarietySpec, f: &PrimeField) -> Result<bool> {
    spec.validate()?;
    let (rows, cols) = spec.shape();
    if matrix.len() != rows || matrix.iter().any(|r| r.len() != cols) {
        return Err(McmError::ShapeError(format!(
            "{spec} expects a {rows}×{cols} matrix, got {}×{}",
            matrix.len(),
            matrix.first().map_or(0, |r| r.len())
        )));
    }
    let m: Vec<Vec<u64>> = matrix.iter().map(|r| r.iter().map(|x| x % f.q()).collect()).collect();
    for (c, combo) in spec.linear_constraints() {
        for row in &m {
            let v = combo.iter().fold(0, |acc, &(o, k)| f.add(&acc, &f.mul(&f.reduce_i64(k), &row[o])));
            if v != row[c] {
                return Ok(false);
            }
        }
    }
    if let RankVarietySpec::Js { l, ref fixed, .. } = *spec {
        let block: Vec<Vec<u64>> = m[1..].iter().map(|r| r[1..].to_vec()).collect();
        match fixed {
            Some(j) => {
                let jr: Vec<Vec<u64>> = j.iter().map(|r| r.iter().map(|x| x % f.q()).collect()).collect();
                if jr != block {
                    return Ok(false);
                }
            }
            None => {
                let rk = rank_of(f, &block);
                if rk != l {
                    return Err(McmError::InvalidSelection(format!("rank(J) = {rk} but l = {l}")));
                }
            }
        }
    }
    Ok(spec.conditions().iter().all(|cnd| {
        let sub: Vec<Vec<u64>> = m
            .iter()
            .map(|row| {
                cnd.combos
                    .iter()
                    .map(|combo| combo.iter().fold(0, |acc, &(c, k)| f.add(&acc, &f.mul(&f.reduce_i64(k), &row[c]))))
                    .collect()
            })
            .collect();
        rank_of(f, &sub) <= cnd.max_rank
    }))
}

/// Exact number of F_q-points, by enumeration with pruning on the prefix block.
pub fn count_points(spec: &RankVarietySpec, f: &PrimeField, budget: u64, seed: u64) -> Result<u64> {
    let layout = spec.layout(f, seed)?;
    count_points_layout(&layout, f, budget)
}

fn count_points_layout(layout: &Layout, f: &PrimeField, budget: u64) -> Result<u64> {
    let q = f.q();
    let e = layout.n_free();
    let total = pow_checked(q, e).filter(|&t| t <= budget).ok_or_else(|| budget_error(q, e, budget))?;
    let kernel = Kernel::new(f);
    let conds = layout.compiled(f);
    let pl = layout.prefix_len;
    let n_suffix = pow_checked(q, e - pl).expect("within budget");
    let n_prefix = total / n_suffix;
    let chunk = if pl > 0 { (n_prefix / 256).max(1) } else { 1 << 14 };
    let outer = if pl > 0 { n_prefix } else { total };
    let parts = par_chunks(outer, chunk, |_, range| {
        let mut ev = Evaluator::new(&kernel, layout, &conds);
        let mut count = 0u64;
        if pl > 0 {
            for pi in range {
                let mut x = pi;
                for idx in 0..pl {
                    ev.set(idx, x % q);
                    x /= q;
                }
                if !ev.check(Some(true)) {
                    continue;
                }
                count += odometer(&mut ev, pl, e, q, 0, n_suffix, Some(false));
            }
        } else {
            count += odometer(&mut ev, 0, e, q, range.start, range.end - range.start, None);
        }
        count
    });
    Ok(parts.into_iter().sum())
}

/// Visits `len` consecutive assignments of coordinates `lo..hi` starting at index `start`.
fn odometer(ev: &mut Evaluator, lo: usize, hi: usize, q: u64, start: u64, len: u64, which: Option<bool>) -> u64 {
    let mut digits = vec![0u64; hi - lo];
    let mut x = start;
    for (k, d) in digits.iter_mut().enumerate() {
        *d = x % q;
        x /= q;
        ev.set(lo + k, *d);
    }
    let mut count = 0;
    for step in 0..len {
        if ev.check(which) {
            count += 1;
        }
        if step + 1 == len {
            break;
        }
        for (k, d) in digits.iter_mut().enumerate() {
            *d += 1;
            if *d == q {
                *d = 0;
                ev.set(lo + k, 0);
            } else {
                ev.set(lo + k, *d);
                break;
            }
        }
    }
    count
}

/// Strata for Monte-Carlo sampling: enumerated passing prefixes, or none.
struct Strata {
    prefixes: Option<Vec<u64>>,
    /// Number of prefix values the sampler draws from.
    size: f64,
}

fn strata(layout: &Layout, f: &PrimeField, kernel: &Kernel, conds: &[CompiledCondition]) -> Strata {
    let q = f.q();
    let pl = layout.prefix_len;
    match pow_checked(q, pl).filter(|&n| pl > 0 && n <= MAX_PREFIX_ENUM) {
        Some(n) => {
            let parts = par_chunks(n, (n / 64).max(1), |_, range| {
                let mut ev = Evaluator::new(kernel, layout, conds);
                range
                    .filter(|&pi| {
                        let mut x = pi;
                        for idx in 0..pl {
                            ev.set(idx, x % q);
                            x /= q;
                        }
                        ev.check(Some(true))
                    })
                    .collect::<Vec<u64>>()
            });
            let prefixes: Vec<u64> = parts.into_iter().flatten().collect();
            let size = prefixes.len() as f64;
            Strata { prefixes: Some(prefixes), size }
        }
        None => Strata { prefixes: None, size: (q as f64).powi(pl as i32) },
    }
}

/// Wilson score interval for a binomial proportion.
fn wilson(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Result of a stratified Monte-Carlo count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCount {
    pub estimate: f64,
    pub ci99: (f64, f64),
    pub samples: u64,
    pub hits: u64,
    /// Size of the sampled space (passing prefixes × suffix values).
    pub space: f64,
}

/// Stratified Monte-Carlo point count with a 99% confidence interval.
pub fn monte_carlo_count(layout: &Layout, f: &PrimeField, samples: u64, seed: u64) -> McCount {
    let kernel = Kernel::new(f);
    let conds = layout.compiled(f);
    let st = strata(layout, f, &kernel, &conds);
    mc_with_strata(layout, f, &kernel, &conds, &st, samples, seed)
}

fn mc_with_strata(
    layout: &Layout,
    f: &PrimeField,
    kernel: &Kernel,
    conds: &[CompiledCondition],
    st: &Strata,
    samples: u64,
    seed: u64,
) -> McCount {
    let q = f.q();
    let e = layout.n_free();
    let pl = layout.prefix_len;
    let space = st.size * (q as f64).powi((e - pl) as i32);
    if st.prefixes.as_ref().is_some_and(|p| p.is_empty()) {
        return McCount { estimate: 0.0, ci99: (0.0, 0.0), samples: 0, hits: 0, space: 0.0 };
    }
    let hits: u64 = par_chunks(samples, MC_CHUNK, |chunk, range| {
        let mut rng = stream_rng(seed, chunk);
        let mut ev = Evaluator::new(kernel, layout, conds);
        let mut hits = 0u64;
        for _ in range {
            let which = match &st.prefixes {
                Some(list) => {
                    let mut x = list[rng.random_range(0..list.len())];
                    for idx in 0..pl {
                        ev.set(idx, x % q);
                        x /= q;
                    }
                    Some(false)
                }
                None => {
                    for idx in 0..pl {
                        ev.set(idx, rng.random_range(0..q));
                    }
                    None
                }
            };
            for idx in pl..e {
                ev.set(idx, rng.random_range(0..q));
            }
            if ev.check(which) {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    let (lo, hi) = wilson(hits, samples, Z99);
    McCount { estimate: space * hits as f64 / samples as f64, ci99: (space * lo, space * hi), samples, hits, space }
}

/// How one count in an estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    Exhaustive,
    MonteCarlo,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEntry {
    pub q: u64,
    pub method: CountMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<u64>,
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci99: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Excess,
    Deficit,
    Inconclusive,
}

/// Counts at several primes, the fitted dimension and the comparison with the formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodimEstimate {
    pub spec: RankVarietySpec,
    pub ambient: usize,
    pub counts: Vec<CountEntry>,
    pub fitted_dimension: Option<f64>,
    pub fitted_codimension: Option<f64>,
    pub rounded_codimension: Option<usize>,
    pub expected: Expected,
    pub verdict: Verdict,
    /// Whether the rounded codimension is at least the formula value.
    pub bound_satisfied: Option<bool>,
    /// Whether the rounded codimension equals the formula value.
    pub equality: Option<bool>,
    pub method: String,
}

/// Options for [`estimate_dimension`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub budget: u64,
    /// Minimum Monte-Carlo sample count per prime.
    pub samples: u64,
    /// Ceiling for auto-scaled sample counts.
    pub max_samples: u64,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { budget: DEFAULT_BUDGET, samples: 1 << 20, max_samples: 1 << 26, seed: 0 }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Classifies a fitted codimension against the formula value.
pub fn classify(fitted: Option<f64>, expected: Expected) -> (Verdict, Option<usize>) {
    let Some(x) = fitted else {
        return (Verdict::Inconclusive, None);
    };
    let r = x.round();
    if (x - r).abs() > SLOPE_BAND || r < 0.0 {
        return (Verdict::Inconclusive, None);
    }
    let r = r as usize;
    let v = match r.cmp(&expected.codim) {
        std::cmp::Ordering::Equal => Verdict::Match,
        std::cmp::Ordering::Greater => Verdict::Excess,
        std::cmp::Ordering::Less => Verdict::Deficit,
    };
    (v, Some(r))
}

/// Counts at every prime in `qs` (exhaustive within budget, stratified
/// Monte-Carlo otherwise), fits the dimension and compares with the formula.
pub fn estimate_dimension(spec: &RankVarietySpec, qs: &[u64], opts: &EstimateOptions) -> Result<CodimEstimate> {
    spec.validate()?;
    let mut distinct = qs.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(McmError::InvalidConfig("a dimension fit needs at least two distinct primes".into()));
    }
    let expected = spec.expected();
    let mut counts = Vec::new();
    let mut ambient = 0;
    for &q in qs {
        let f = PrimeField::new(q)?;
        let seed = derive_seed(opts.seed, q);
        let layout = spec.layout(&f, seed)?;
        ambient = layout.ambient;
        let e = layout.n_free();
        if pow_checked(q, e).is_some_and(|t| t <= opts.budget) {
            let c = count_points_layout(&layout, &f, opts.budget)?;
            counts.push(CountEntry {
                q,
                method: CountMethod::Exhaustive,
                exact: Some(c),
                estimate: c as f64,
                ci99: None,
                samples: None,
                hits: None,
                note: None,
            });
            continue;
        }
        let kernel = Kernel::new(&f);
        let conds = layout.compiled(&f);
        let st = strata(&layout, &f, &kernel, &conds);
        let space = st.size * (q as f64).powi((e - layout.prefix_len) as i32);
        let dim_free = layout.n_free() as f64;
        // predicted count q^(ambient − codim − (ambient − free)) inside the parametrized space
        let predicted = (q as f64).powf(dim_free - (expected.codim as f64 - (layout.ambient - e) as f64));
        let fraction = (predicted / space).min(1.0);
        let wanted = ((TARGET_HITS / fraction).ceil() as u64).max(opts.samples);
        let samples = wanted.min(opts.max_samples.max(opts.samples));
        if (samples as f64) * fraction < (q * q) as f64 {
            counts.push(CountEntry {
                q,
                method: CountMethod::Skipped,
                exact: None,
                estimate: 0.0,
                ci99: None,
                samples: Some(samples),
                hits: None,
                note: Some(format!("expected hits {:.1} below q^2 = {}", samples as f64 * fraction, q * q)),
            });
            continue;
        }
        let mc = mc_with_strata(&layout, &f, &kernel, &conds, &st, samples, seed);
        counts.push(CountEntry {
            q,
            method: CountMethod::MonteCarlo,
            exact: None,
            estimate: mc.estimate,
            ci99: Some(mc.ci99),
            samples: Some(mc.samples),
            hits: Some(mc.hits),
            note: None,
        });
    }
    Ok(finish_estimate(spec.clone(), ambient, counts, expected))
}

fn finish_estimate(spec: RankVarietySpec, ambient: usize, counts: Vec<CountEntry>, expected: Expected) -> CodimEstimate {
    let used: Vec<&CountEntry> = counts.iter().filter(|c| c.method != CountMethod::Skipped).collect();
    let fitted_dimension = if used.iter().any(|c| c.estimate <= 0.0) {
        None
    } else {
        slope(&used.iter().map(|c| ((c.q as f64).ln(), c.estimate.ln())).collect::<Vec<_>>())
    };
    let fitted_codimension = fitted_dimension.map(|d| ambient as f64 - d);
    let (verdict, rounded) = classify(fitted_codimension, expected);
    let methods: Vec<CountMethod> = used.iter().map(|c| c.method).collect();
    let method = if methods.iter().all(|&m| m == CountMethod::Exhaustive) {
        "exhaustive"
    } else if methods.iter().all(|&m| m == CountMethod::MonteCarlo) {
        "monte_carlo"
    } else {
        "mixed"
    };
    CodimEstimate {
        spec,
        ambient,
        counts,
        fitted_dimension,
        fitted_codimension,
        rounded_codimension: rounded,
        expected,
        verdict,
        bound_satisfied: rounded.map(|r| r >= expected.codim),
        equality: rounded.map(|r| r == expected.codim),
        method: method.into(),
    }
}

/// Codimension of the rank-`<= j` slice of the border space with a fixed `J`.
pub fn slice_codim(p: usize, l: usize, j: usize, fixed: Option<Vec<Vec<u64>>>, qs: &[u64], opts: &EstimateOptions) -> Result<CodimEstimate> {
    estimate_dimension(&RankVarietySpec::Js { p, l, j, fixed }, qs, opts)
}

/// Gaussian elimination on the first column `α_1 + β_1`, then deletion of the
/// first row and columns `1, p+1`: a `(p−1) × 2(p−1)` matrix.
pub fn gaussian_stratify(matrix: &[Vec<u64>], f: &PrimeField) -> Result<Vec<Vec<u64>>> {
    let p = matrix.len();
    if p < 2 || matrix.iter().any(|r| r.len() != 2 * p) {
        return Err(McmError::ShapeError(format!("expected a p×2p matrix with p >= 2, got {p} rows")));
    }
    let x: Vec<Vec<u64>> = matrix.iter().map(|r| r.iter().map(|v| v % f.q()).collect()).collect();
    let first: Vec<u64> = x.iter().map(|r| f.add(&r[0], &r[p])).collect();
    let inv = f.inv(first[0]).ok_or(McmError::PivotRejected)?;
    let mut out = Vec::with_capacity(p - 1);
    for i in 1..p {
        let factor = f.mul(&first[i], &inv);
        let row: Vec<u64> = (0..2 * p)
            .filter(|&c| c != 0 && c != p)
            .map(|c| f.sub(&x[i][c], &f.mul(&factor, &x[0][c])))
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// The `2p × p` matrix `I_p^{τ,ρ}` (1-based τ, ρ; `τ = 0` gives `I_p^{0,ρ}`).
pub fn i_matrix(p: usize, tau: usize, rho: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; p]; 2 * p];
    for i in 0..p {
        m[i][i] = 1;
    }
    for i in 1..=p {
        if i <= tau {
            m[p + i - 1][i - 1] = 1;
        } else {
            m[p + i - 1][rho - 1] = 1;
        }
    }
    m
}

/// Structural identity: deleting the first column and rows `1, p+1` of
/// `I_p^{τ,ρ}` gives `I_{p−1}^{τ−1,ρ−1}`, for every `τ`, `ρ` and `3 <= p <= pmax`.
pub fn i_matrix_reduction_check(pmax: usize) -> CheckTally {
    let mut t = CheckTally::default();
    for p in 3..=pmax {
        for tau in 1..p {
            for rho in tau + 1..=p {
                let big = i_matrix(p, tau, rho);
                let reduced: Vec<Vec<u64>> = big
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != 0 && *r != p)
                    .map(|(_, row)| row[1..].to_vec())
                    .collect();
                t.record(reduced == i_matrix(p - 1, tau - 1, rho - 1), || format!("p={p}, tau={tau}, rho={rho}"));
            }
        }
    }
    t
}

/// Counter of checks with the first failing case.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckTally {
    pub checked: u64,
    pub failures: u64,
    pub first_witness: Option<String>,
}

impl CheckTally {
    pub fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.first_witness.is_none() {
                self.first_witness = Some(witness());
            }
        }
    }

    pub fn merge(&mut self, other: CheckTally) {
        self.checked += other.checked;
        self.failures += other.failures;
        if self.first_witness.is_none() {
            self.first_witness = other.first_witness;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

fn decode(mut x: u64, q: u64, len: usize) -> Vec<u64> {
    (0..len)
        .map(|_| {
            let d = x % q;
            x /= q;
            d
        })
        .collect()
}

fn rank_cols(f: &PrimeField, cols: &[Vec<u64>]) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let rows = cols[0].len();
    let m: Vec<Vec<u64>> = (0..rows).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
    rank_of(f, &m)
}

fn vec_add(f: &PrimeField, a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| f.add(x, y)).collect()
}

/// Exhaustive comparison of raw condition sets with their simplified forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub p: usize,
    pub q: u64,
    /// The ν-conditions on `(α_1..α_p, β)` vs. the two-case characterization.
    pub replacement_lemma: CheckTally,
    /// `X(p,p) \ X(p,p−1)` vs. `{Σ columns = 0, rank α = p}`.
    pub top_stratum: CheckTally,
}

/// Verifies both characterizations on every point of the relevant spaces.
pub fn predicate_equivalences(p: usize, q: u64, budget: u64) -> Result<EquivalenceReport> {
    let f = PrimeField::new(q)?;
    let e_lemma = p * (p + 1);
    let e_cor = 2 * p * p;
    for e in [e_lemma, e_cor] {
        if pow_checked(q, e).is_none_or(|t| t > budget) {
            return Err(budget_error(q, e, budget));
        }
    }
    let n_lemma = q.pow(e_lemma as u32);
    let replacement_lemma = par_chunks(n_lemma, 4096, |_, range| {
        let mut t = CheckTally::default();
        for idx in range {
            let d = decode(idx, q, e_lemma);
            let vecs: Vec<Vec<u64>> = d.chunks(p).map(|c| c.to_vec()).collect();
            let (alpha, beta) = (&vecs[..p], &vecs[p]);
            let raw = (0..p).all(|nu| {
                let mut cols: Vec<Vec<u64>> = alpha.to_vec();
                cols[nu] = vec_add(&f, &alpha[nu], beta);
                rank_cols(&f, &cols) < p
            });
            let mut with_beta = alpha.to_vec();
            with_beta.push(beta.clone());
            let total = alpha.iter().fold(beta.clone(), |acc, a| vec_add(&f, &acc, a));
            let simple = rank_cols(&f, &with_beta) < p
                || (rank_cols(&f, alpha) == p && total.iter().all(|&x| x == 0));
            t.record(raw == simple, || format!("alpha={alpha:?}, beta={beta:?}"));
        }
        t
    });
    let n_cor = q.pow(e_cor as u32);
    let top = RankVarietySpec::X { p, l: p };
    let below = RankVarietySpec::X { p, l: p - 1 };
    let top_stratum = par_chunks(n_cor, 4096, |_, range| {
        let mut t = CheckTally::default();
        for idx in range {
            let d = decode(idx, q, e_cor);
            let m: Vec<Vec<u64>> = d.chunks(2 * p).map(|c| c.to_vec()).collect();
            let in_top = membership(&m, &top, &f).expect("shape");
            let in_below = membership(&m, &below, &f).expect("shape");
            let alpha: Vec<Vec<u64>> = m.iter().map(|r| r[..p].to_vec()).collect();
            let sum_zero = m.iter().all(|r| r.iter().fold(0, |acc, x| f.add(&acc, x)) == 0);
            let simple = sum_zero && rank_of(&f, &alpha) == p;
            t.record((in_top && !in_below) == simple, || format!("{m:?}"));
        }
        t
    });
    let fold = |parts: Vec<CheckTally>| {
        parts.into_iter().fold(CheckTally::default(), |mut a, b| {
            a.merge(b);
            a
        })
    };
    Ok(EquivalenceReport { p, q, replacement_lemma: fold(replacement_lemma), top_stratum: fold(top_stratum) })
}

/// Draws members of a family by stratified rejection sampling.
pub fn sample_members(
    spec: &RankVarietySpec,
    f: &PrimeField,
    count: usize,
    seed: u64,
    accept: impl Fn(&[Vec<u64>]) -> bool + Sync,
) -> Result<Vec<Vec<Vec<u64>>>> {
    let layout = spec.layout(f, seed)?;
    let kernel = Kernel::new(f);
    let conds = layout.compiled(f);
    let st = strata(&layout, f, &kernel, &conds);
    if st.prefixes.as_ref().is_some_and(|p| p.is_empty()) {
        return Err(McmError::SamplingFailed(format!("{spec} has no points over F_{}", f.q())));
    }
    let q = f.q();
    let (pl, e, nb) = (layout.prefix_len, layout.n_free(), layout.basis_cols.len());
    const MAX_TRIES: u64 = 1 << 24;
    let members = par_chunks(count as u64, 64, |chunk, range| {
        let mut rng = stream_rng(derive_seed(seed, 0x5a4d), chunk);
        let mut ev = Evaluator::new(&kernel, &layout, &conds);
        let mut out = Vec::new();
        let mut tries = 0u64;
        while (out.len() as u64) < range.end - range.start && tries < MAX_TRIES {
            tries += 1;
            match &st.prefixes {
                Some(list) => {
                    let mut x = list[rng.random_range(0..list.len())];
                    for idx in 0..pl {
                        ev.set(idx, x % q);
                        x /= q;
                    }
                }
                None => {
                    for idx in 0..pl {
                        ev.set(idx, rng.random_range(0..q));
                    }
                }
            }
            for idx in pl..e {
                ev.set(idx, rng.random_range(0..q));
            }
            if !ev.check(None) {
                continue;
            }
            let basis: Vec<Vec<u64>> = (0..layout.rows).map(|r| ev.basis[r * nb..(r + 1) * nb].to_vec()).collect();
            let m = layout.full_matrix(f, &basis);
            if accept(&m) {
                out.push(m);
            }
        }
        out
    });
    let all: Vec<Vec<Vec<u64>>> = members.into_iter().flatten().collect();
    if all.len() < count {
        return Err(McmError::SamplingFailed(format!("only {} of {count} members of {spec} found", all.len())));
    }
    Ok(all)
}

/// Samples members of `X(p,ℓ)` with a nonzero pivot, reduces them and checks
/// membership of the result in `X(p−1,ℓ)`.
pub fn stratification_containment(p: usize, l: usize, f: &PrimeField, samples: usize, seed: u64) -> Result<CheckTally> {
    let spec = RankVarietySpec::X { p, l };
    let target = RankVarietySpec::X { p: p - 1, l };
    let members = sample_members(&spec, f, samples, seed, |m| f.add(&m[0][0], &m[0][p]) != 0)?;
    let mut t = CheckTally::default();
    for m in &members {
        let g = gaussian_stratify(m, f)?;
        t.record(membership(&g, &target, f)?, || format!("{m:?} -> {g:?}"));
    }
    Ok(t)
}

/// Drops `α_0`, `β_0` and keeps the first `N` rows of an `M(N; 2c+r)` matrix.
pub fn project_m(matrix: &[Vec<u64>], n: usize) -> Vec<Vec<u64>> {
    matrix[..n]
        .iter()
        .map(|row| row.iter().enumerate().filter(|(c, _)| *c != 0 && *c != n + 1).map(|(_, &x)| x).collect())
        .collect()
}

/// Sampled check that projections of members of `M(N; 2c+r)` lie in `X(N, N−1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub n: usize,
    pub rows: usize,
    pub q: u64,
    pub tally: CheckTally,
}

pub fn projection_containment(n: usize, rows: usize, q: u64, samples: usize, seed: u64) -> Result<ProjectionReport> {
    if n < 2 {
        return Err(McmError::InvalidConfig("the projection needs N >= 2".into()));
    }
    let f = PrimeField::new(q)?;
    let spec = RankVarietySpec::M { n, rows };
    let target = RankVarietySpec::X { p: n, l: n - 1 };
    let members = sample_members(&spec, &f, samples, seed, |_| true)?;
    let mut tally = CheckTally::default();
    for m in &members {
        let proj = project_m(m, n);
        tally.record(membership(&proj, &target, &f)?, || format!("{m:?}"));
    }
    Ok(ProjectionReport { n, rows, q, tally })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn f(q: u64) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    fn x(p: usize, l: usize) -> RankVarietySpec {
        RankVarietySpec::X { p, l }
    }

    #[test]
    fn membership_examples() {
        let f5 = f(5);
        for l in 0..=2 {
            assert!(membership(&vec![vec![0; 4]; 2], &x(2, l), &f5).unwrap());
        }
        // α = identity, β = 0
        let m = vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0]];
        for l in 0..=2 {
            assert!(!membership(&m, &x(2, l), &f5).unwrap());
        }
        // α = identity, β = −identity
        let m = vec![vec![1, 0, 4, 0], vec![0, 1, 0, 4]];
        assert!(membership(&m, &x(2, 2), &f5).unwrap());
        assert!(!membership(&m, &x(2, 1), &f5).unwrap());
        assert!(matches!(membership(&[vec![0; 3]], &x(2, 1), &f5), Err(McmError::ShapeError(_))));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(x(2, 3).validate().is_err());
        assert!(RankVarietySpec::M { n: 3, rows: 2 }.validate().is_err());
        assert!(RankVarietySpec::Js { p: 3, l: 1, j: 3, fixed: None }.validate().is_err());
        let bad_j = RankVarietySpec::Js { p: 3, l: 1, j: 1, fixed: Some(vec![vec![1, 0], vec![0, 1]]) };
        assert!(matches!(bad_j.layout(&f(5), 0), Err(McmError::InvalidSelection(_))));
    }

    #[test]
    fn x22_over_f2_matches_direct_enumeration() {
        let f2 = f(2);
        let direct = (0..256u64)
            .filter(|&i| {
                let d = decode(i, 2, 8);
                let m: Vec<Vec<u64>> = d.chunks(4).map(|c| c.to_vec()).collect();
                membership(&m, &x(2, 2), &f2).unwrap()
            })
            .count() as u64;
        assert_eq!(count_points(&x(2, 2), &f2, DEFAULT_BUDGET, 0).unwrap(), direct);
    }

    #[test]
    fn counts_agree_with_membership_on_every_family() {
        let f3 = f(3);
        let specs = [
            x(2, 1),
            RankVarietySpec::X0 { p: 2, l: 1 },
            RankVarietySpec::Xpq { p: 2, m: 2, l: 1 },
            RankVarietySpec::M { n: 1, rows: 1 },
            RankVarietySpec::Mminus { n: 2, rows: 2 },
            RankVarietySpec::Js { p: 3, l: 1, j: 1, fixed: Some(vec![vec![1, 0], vec![0, 0]]) },
        ];
        for spec in specs {
            let (rows, cols) = spec.shape();
            let e = (rows * cols) as u32;
            let direct = (0..3u64.pow(e))
                .filter(|&i| {
                    let d = decode(i, 3, rows * cols);
                    let m: Vec<Vec<u64>> = d.chunks(cols).map(|c| c.to_vec()).collect();
                    membership(&m, &spec, &f3).unwrap()
                })
                .count() as u64;
            assert_eq!(count_points(&spec, &f3, DEFAULT_BUDGET, 0).unwrap(), direct, "{spec}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(count_points(&x(3, 1), &f(5), 1 << 20, 0), Err(McmError::BudgetExceeded { .. })));
    }

    #[test]
    fn nesting_over_f3() {
        let f3 = f(3);
        for i in 0..3u64.pow(8) {
            let d = decode(i, 3, 8);
            let m: Vec<Vec<u64>> = d.chunks(4).map(|c| c.to_vec()).collect();
            let mem: Vec<bool> = (0..=2).map(|l| membership(&m, &x(2, l), &f3).unwrap()).collect();
            assert!(mem.windows(2).all(|w| !w[0] || w[1]));
        }
    }

    #[test]
    fn left_multiplication_preserves_membership() {
        let f5 = f(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let members = sample_members(&x(3, 1), &f5, 50, 2, |_| true).unwrap();
        let mut trials = 0;
        while trials < 1000 {
            let g: Vec<Vec<u64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(0..5)).collect()).collect();
            if rank_of(&f5, &g) < 3 {
                continue;
            }
            let m = if trials % 2 == 0 {
                members[trials % members.len()].clone()
            } else {
                (0..3).map(|_| (0..6).map(|_| rng.random_range(0..5)).collect()).collect()
            };
            let gm: Vec<Vec<u64>> = (0..3)
                .map(|r| (0..6).map(|c| (0..3).fold(0, |acc, k| f5.add(&acc, &f5.mul(&g[r][k], &m[k][c])))).collect())
                .collect();
            for l in 0..=3 {
                assert_eq!(membership(&m, &x(3, l), &f5).unwrap(), membership(&gm, &x(3, l), &f5).unwrap());
            }
            trials += 1;
        }
    }

    #[test]
    fn exhaustive_counts_are_reproducible() {
        let a = count_points(&x(2, 1), &f(5), DEFAULT_BUDGET, 0).unwrap();
        let b = crate::rng::with_workers(1, || count_points(&x(2, 1), &f(5), DEFAULT_BUDGET, 0).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_calibration() {
        for spec in [x(2, 1), RankVarietySpec::X0 { p: 3, l: 2 }] {
            let f3 = f(3);
            let exact = count_points(&spec, &f3, DEFAULT_BUDGET, 0).unwrap() as f64;
            let layout = spec.layout(&f3, 0).unwrap();
            let mc = monte_carlo_count(&layout, &f3, 400_000, 9);
            assert!(mc.ci99.0 <= exact && exact <= mc.ci99.1, "{spec}: {exact} not in {:?}", mc.ci99);
        }
    }

    #[test]
    fn x2_codimensions() {
        let opts = EstimateOptions::default();
        for (l, want) in [(0, 5), (1, 3), (2, 2)] {
            let est = estimate_dimension(&x(2, l), &[2, 3, 5, 7], &opts).unwrap();
            assert_eq!(est.verdict, Verdict::Match, "{est:?}");
            assert_eq!(est.rounded_codimension, Some(want));
        }
    }

    #[test]
    fn all_zero_counts_are_inconclusive() {
        let e = finish_estimate(x(2, 0), 8, vec![], x(2, 0).expected());
        assert_eq!(e.verdict, Verdict::Inconclusive);
        let entry = |q| CountEntry {
            q,
            method: CountMethod::Exhaustive,
            exact: Some(0),
            estimate: 0.0,
            ci99: None,
            samples: None,
            hits: None,
            note: None,
        };
        let e = finish_estimate(x(2, 0), 8, vec![entry(2), entry(3)], x(2, 0).expected());
        assert_eq!(e.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn gaussian_stratify_examples() {
        let f5 = f(5);
        let zero_pivot = vec![vec![0; 6]; 3];
        assert!(matches!(gaussian_stratify(&zero_pivot, &f5), Err(McmError::PivotRejected)));
        let t = stratification_containment(3, 1, &f5, 500, 4).unwrap();
        assert!(t.passed(), "{t:?}");
        assert!(i_matrix_reduction_check(6).passed());
    }

    #[test]
    fn x_tau_rho_is_x_times_i() {
        let f7 = f(7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = 4;
        let m: Vec<Vec<u64>> = (0..p).map(|_| (0..2 * p).map(|_| rng.random_range(0..7)).collect()).collect();
        let conds = x(p, p).conditions();
        for tau in 1..p {
            for rho in tau + 1..=p {
                let i = i_matrix(p, tau, rho);
                let prod: Vec<Vec<u64>> = (0..p)
                    .map(|r| (0..p).map(|c| (0..2 * p).fold(0, |acc, k| f7.add(&acc, &f7.mul(&m[r][k], &i[k][c])))).collect())
                    .collect();
                let cond = conds.iter().find(|c| c.label == format!("tau={},rho={}", tau - 1, rho - 1)).unwrap();
                // the replaced column sits at the end of the combination list, but in
                // position ρ of the product
                let mut combos = cond.combos.clone();
                let last = combos.pop().unwrap();
                combos.insert(rho - 1, last);
                let direct: Vec<Vec<u64>> = (0..p)
                    .map(|r| combos.iter().map(|cb| cb.iter().fold(0, |acc, &(c, k)| f7.add(&acc, &f7.mul(&f7.reduce_i64(k), &m[r][c])))).collect())
                    .collect();
                assert_eq!(prod, direct);
            }
        }
    }

    #[test]
    fn small_equivalences() {
        let r = predicate_equivalences(2, 2, DEFAULT_BUDGET).unwrap();
        assert!(r.replacement_lemma.passed() && r.top_stratum.passed());
        assert_eq!(r.top_stratum.checked, 256);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_m(&vec![vec![0; 6]; 2], 2), vec![vec![0; 4]; 2]);
        assert!(membership(&vec![vec![0; 4]; 2], &x(2, 1), &f(5)).unwrap());
        let r = projection_containment(2, 2, 5, 100, 3).unwrap();
        assert!(r.tally.passed(), "{r:?}");
    }

    #[test]
    fn js_counts_do_not_depend_on_j() {
        let f5 = f(5);
        let j1 = RankVarietySpec::Js { p: 3, l: 1, j: 2, fixed: Some(vec![vec![1, 2], vec![2, 4]]) };
        let j2 = RankVarietySpec::Js { p: 3, l: 1, j: 2, fixed: Some(vec![vec![0, 0], vec![0, 3]]) };
        assert_eq!(count_points(&j1, &f5, DEFAULT_BUDGET, 0).unwrap(), count_points(&j2, &f5, DEFAULT_BUDGET, 0).unwrap());
    }
}
