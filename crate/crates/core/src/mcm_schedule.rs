//! Exponent selection for the moving-coefficient equations, effective degree
//! bounds, and assorted exact degree arithmetic.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{McmError, Result};

/// Shape of a moving-coefficient system: `c` equations contribute
/// differentials, `r` more are plain, in projective space of dimension `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmConfig {
    #[serde(rename = "N")]
    pub n_ambient: usize,
    pub c: usize,
    pub r: usize,
    pub heart: u64,
    pub epsilons: Vec<u64>,
}

impl McmConfig {
    pub fn new(n_ambient: usize, c: usize, r: usize, heart: u64, epsilons: Vec<u64>) -> Result<Self> {
        let cfg = McmConfig { n_ambient, c, r, heart, epsilons };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All `ε_i` equal to `eps`.
    pub fn uniform(n_ambient: usize, c: usize, r: usize, heart: u64, eps: u64) -> Result<Self> {
        Self::new(n_ambient, c, r, heart, vec![eps; c + r])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(McmError::InvalidConfig(m));
        let (nn, c, r) = (self.n_ambient, self.c, self.r);
        if nn < 2 {
            return bad(format!("N = {nn} must be at least 2"));
        }
        if 2 * c + r < nn {
            return bad(format!("2c+r = {} is below N = {nn}", 2 * c + r));
        }
        if c + r + 1 > nn {
            return bad(format!("c+r = {} exceeds N-1 = {}", c + r, nn - 1));
        }
        if self.epsilons.len() != c + r {
            return bad(format!("expected {} epsilons, got {}", c + r, self.epsilons.len()));
        }
        if self.epsilons.contains(&0) {
            return bad("every epsilon must be at least 1".into());
        }
        if self.heart == 0 {
            return bad("heart must be positive".into());
        }
        Ok(())
    }

    /// Number of equations `c + r`.
    pub fn e(&self) -> usize {
        self.c + self.r
    }

    /// `n = N - (c + r)`, the number of differential rows in each form.
    pub fn n(&self) -> usize {
        self.n_ambient - self.e()
    }

    /// Lowest level carrying moving terms, `c + r + 1`.
    pub fn first_level(&self) -> usize {
        self.e() + 1
    }

    pub fn max_epsilon(&self) -> u64 {
        self.epsilons.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Every inequality of the selection algorithm taken at equality.
    Tight,
    /// The simplified equalities with starting value 2 and linear offset `4l + 1`.
    Paper9,
    /// Supplied by hand; only meaningful after [`validate_schedule`].
    Custom,
}

impl std::str::FromStr for ScheduleMode {
    type Err = McmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tight" => Ok(ScheduleMode::Tight),
            "paper9" => Ok(ScheduleMode::Paper9),
            "custom" => Ok(ScheduleMode::Custom),
            _ => Err(McmError::ModeError(format!("unknown schedule mode `{s}`"))),
        }
    }
}

/// Exponents `δ_l` (l = c+r+1..N+1), `μ_{l,k}` (l = c+r+1..N, k = 0..l) and the degree `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McmSchedule {
    config: McmConfig,
    mode: ScheduleMode,
    delta: Vec<BigUint>,
    mu: Vec<Vec<BigUint>>,
    d: BigUint,
}

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

/// Runs the exponent-selection recursion.
pub fn build_schedule(config: &McmConfig, mode: ScheduleMode) -> Result<McmSchedule> {
    config.validate()?;
    let first = config.first_level();
    let nn = config.n_ambient;
    let delta0 = match mode {
        ScheduleMode::Tight => big(config.max_epsilon()),
        ScheduleMode::Paper9 => {
            if config.heart != 1 {
                return Err(McmError::ModeError("paper9 mode requires heart = 1".into()));
            }
            if config.max_epsilon() > 2 {
                return Err(McmError::ModeError("paper9 mode requires every epsilon <= 2".into()));
            }
            big(2)
        }
        ScheduleMode::Custom => {
            return Err(McmError::ModeError("custom schedules are built with from_parts".into()))
        }
    };
    let mut delta = vec![delta0.clone()];
    let mut mu: Vec<Vec<BigUint>> = Vec::new();
    for l in first..=nn {
        let dl = delta.last().expect("nonempty").clone();
        let lb = big(l as u64);
        let offset = match mode {
            ScheduleMode::Tight => {
                &lb * (&delta0 + 1u32) + 1u32 + big((l - config.e()) as u64 * config.heart)
            }
            _ => big(4 * l as u64 + 1),
        };
        let mut row: Vec<BigUint> = Vec::with_capacity(l + 1);
        let mut prefix = BigUint::zero();
        for k in 0..=l {
            let m = &lb * &prefix + big((l - k) as u64) * &dl + &offset;
            prefix += &m;
            row.push(m);
        }
        delta.push(&lb * &row[l]);
        mu.push(row);
    }
    let d = big(nn as u64 + 1) * &mu[nn - first][nn];
    Ok(McmSchedule { config: config.clone(), mode, delta, mu, d })
}

impl McmSchedule {
    /// Assembles a schedule from explicit values without checking it.
    pub fn from_parts(config: McmConfig, delta: Vec<BigUint>, mu: Vec<Vec<BigUint>>, d: BigUint) -> Result<Self> {
        config.validate()?;
        let levels = config.n_ambient - config.e();
        if delta.len() != levels + 1 || mu.len() != levels {
            return Err(McmError::InvalidConfig("schedule tables have the wrong number of levels".into()));
        }
        for (idx, row) in mu.iter().enumerate() {
            if row.len() != config.first_level() + idx + 1 {
                return Err(McmError::InvalidConfig(format!("level {} needs {} exponents", config.first_level() + idx, config.first_level() + idx + 1)));
            }
        }
        Ok(McmSchedule { config, mode: ScheduleMode::Custom, delta, mu, d })
    }

    /// Same exponents with a larger degree `d`.
    pub fn with_degree(&self, d: BigUint) -> Result<Self> {
        let min = big(self.config.n_ambient as u64 + 1) * self.mu(self.config.n_ambient, self.config.n_ambient);
        if d < min {
            return Err(McmError::InvalidConfig(format!("d = {d} is below (N+1)·μ_(N,N) = {min}")));
        }
        Ok(McmSchedule { d, ..self.clone() })
    }

    pub fn config(&self) -> &McmConfig {
        &self.config
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    /// `δ_l` for `c+r+1 <= l <= N+1`.
    pub fn delta(&self, l: usize) -> &BigUint {
        &self.delta[l - self.config.first_level()]
    }

    /// `μ_{l,k}` for `c+r+1 <= l <= N`, `0 <= k <= l`.
    pub fn mu(&self, l: usize, k: usize) -> &BigUint {
        &self.mu[l - self.config.first_level()][k]
    }

    pub fn mu_level(&self, l: usize) -> &[BigUint] {
        &self.mu[l - self.config.first_level()]
    }

    pub fn d(&self) -> &BigUint {
        &self.d
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<usize> {
        self.config.first_level()..=self.config.n_ambient
    }

    /// Machine-word copy of the exponents, for polynomial construction.
    pub fn exponents(&self) -> Result<Exponents> {
        let small = |v: &BigUint| {
            v.to_u32()
                .ok_or_else(|| McmError::InvalidConfig(format!("exponent {v} does not fit in 32 bits")))
        };
        Ok(Exponents {
            n_ambient: self.config.n_ambient,
            first: self.config.first_level(),
            d: small(&self.d)?,
            delta: self.delta.iter().map(small).collect::<Result<_>>()?,
            mu: self
                .mu
                .iter()
                .map(|row| row.iter().map(small).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?,
        })
    }

    pub fn to_json(&self) -> ScheduleJson {
        ScheduleJson {
            n_ambient: self.config.n_ambient,
            c: self.config.c,
            r: self.config.r,
            heart: self.config.heart,
            epsilons: self.config.epsilons.clone(),
            delta: self.delta.iter().map(|v| v.to_string()).collect(),
            mu: self.mu.iter().map(|row| row.iter().map(|v| v.to_string()).collect()).collect(),
            d: self.d.to_string(),
            mode: self.mode,
        }
    }
}

/// Serialized schedule; big integers are decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleJson {
    #[serde(rename = "N")]
    pub n_ambient: usize,
    pub c: usize,
    pub r: usize,
    pub heart: u64,
    pub epsilons: Vec<u64>,
    pub delta: Vec<String>,
    pub mu: Vec<Vec<String>>,
    pub d: String,
    pub mode: ScheduleMode,
}

/// Schedule exponents as `u32`, indexed like [`McmSchedule`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exponents {
    pub n_ambient: usize,
    pub first: usize,
    pub d: u32,
    delta: Vec<u32>,
    mu: Vec<Vec<u32>>,
}

impl Exponents {
    pub fn delta(&self, l: usize) -> u32 {
        self.delta[l - self.first]
    }

    pub fn mu(&self, l: usize, k: usize) -> u32 {
        self.mu[l - self.first][k]
    }

    /// Largest exponent anywhere in the system (`d` itself).
    pub fn max_exponent(&self) -> u32 {
        self.d
    }
}

/// Independent re-check of every constraint the selection algorithm promises;
/// returns the list of violated constraints (empty when valid).
pub fn validate_schedule(s: &McmSchedule) -> Vec<String> {
    let cfg = &s.config;
    let first = cfg.first_level();
    let nn = cfg.n_ambient;
    let mut out = Vec::new();
    let d0 = s.delta(first).clone();
    if d0 < big(cfg.max_epsilon()) {
        out.push(format!("δ_{first} = {d0} is below max ε = {}", cfg.max_epsilon()));
    }
    for l in first..=nn {
        let lb = big(l as u64);
        let dl = s.delta(l);
        let offset = &lb * (&d0 + 1u32) + 1u32 + big((l - cfg.e()) as u64 * cfg.heart);
        let mut prefix = BigUint::zero();
        for k in 0..=l {
            let need = &lb * &prefix + big((l - k) as u64) * dl + &offset;
            let m = s.mu(l, k);
            if *m < need {
                out.push(format!("μ_({l},{k}) = {m} is below the required {need}"));
            }
            if *m < big(2) {
                out.push(format!("μ_({l},{k}) = {m} is below 2"));
            }
            if k > 0 && m <= s.mu(l, k - 1) {
                out.push(format!("μ_({l},{k}) does not exceed μ_({l},{})", k - 1));
            }
            prefix += m;
        }
        if l > first {
            let prev_max = s.mu_level(l - 1).iter().max().expect("nonempty");
            let cur_min = s.mu_level(l).iter().min().expect("nonempty");
            if prev_max >= cur_min {
                out.push(format!("levels {} and {l} are not separated", l - 1));
            }
        }
        let next = s.delta(l + 1);
        if *next != &lb * s.mu(l, l) {
            out.push(format!("δ_{} = {next} differs from {l}·μ_({l},{l})", l + 1));
        }
    }
    let min_d = big(nn as u64 + 1) * s.mu(nn, nn);
    if s.d < min_d {
        out.push(format!("d = {} is below (N+1)·μ_(N,N) = {min_d}", s.d));
    }
    out
}

/// `S_{l,k} = Σ_{j<=k} μ_{l,j}` by the closed form valid for paper9 schedules.
pub fn closed_form_s(s: &McmSchedule, l: usize, k: usize) -> Result<BigInt> {
    if s.mode != ScheduleMode::Paper9 {
        return Err(McmError::ModeError("the closed form holds for paper9 schedules only".into()));
    }
    if !s.levels().contains(&l) || k > l {
        return Err(McmError::InvalidSelection(format!("no exponent μ_({l},{k})")));
    }
    let li = BigInt::from(l as u64);
    let dl = BigRational::from_integer(BigInt::from(s.delta(l).clone()));
    let lr = BigRational::from_integer(li.clone());
    let p = BigRational::from_integer(num_traits::pow(&li + 1, k + 1));
    let kr = BigRational::from_integer(BigInt::from(k as u64));
    let a = &lr * &dl + BigRational::from_integer(4 * &li + 1);
    let first = &a * (&p - BigRational::one()) / &lr;
    let second = &dl / (&lr * &lr) * (&p + &kr - (BigRational::one() + &kr) * (&lr + BigRational::one()));
    let v = first - second;
    if !v.is_integer() {
        return Err(McmError::InvalidConfig(format!("closed form is not integral at ({l},{k})")));
    }
    Ok(v.to_integer())
}

/// `S_{l,k}` by direct summation.
pub fn direct_sum_s(s: &McmSchedule, l: usize, k: usize) -> BigInt {
    BigInt::from(s.mu_level(l)[..=k].iter().sum::<BigUint>())
}

/// Growth check `δ_{l+1} <= l²(l+1)^l δ_l` at one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaCheck {
    pub l: usize,
    pub delta_l: String,
    pub delta_next: String,
    pub bound: String,
    pub holds: bool,
    /// Whether `l >= c + r + 2`, the range where the estimate is claimed.
    pub claimed: bool,
}

/// One admissible `(c, r)` at a given `N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundRow {
    pub c: usize,
    pub r: usize,
    pub degree: String,
    pub delta_top: String,
    pub within_bound: bool,
    pub delta_checks: Vec<DeltaCheck>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundEntry {
    #[serde(rename = "N")]
    pub n_ambient: usize,
    /// `(N+1)·μ_{N,N}` minimized over admissible `(c, r)`.
    pub min_degree: String,
    pub argmin: (usize, usize),
    /// `N^{⌈N²/2⌉} − 1`.
    pub bound_ceil: String,
    /// Exact test of `(N+1)μ_{N,N} <= N^{N²/2} − 1`.
    pub within_bound: bool,
    pub rows: Vec<BoundRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub heart: u64,
    pub entries: Vec<BoundEntry>,
    /// Smallest `N` from which the minimized inequality holds through the top of the range.
    pub threshold: Option<usize>,
    /// Values of `N` where the minimized inequality fails.
    pub failures: Vec<usize>,
    pub delta_estimate_failures: Vec<(usize, usize, usize, usize)>,
}

/// Admissible `(c, r)` pairs for ambient dimension `N`.
pub fn admissible_pairs(nn: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for c in 1..nn {
        for r in 0..nn - c {
            if 2 * c + r >= nn {
                out.push((c, r));
            }
        }
    }
    out
}

/// Sweeps `N` over `nmin..=nmax` with paper9 schedules (ε ≡ 1) and reports
/// verdicts of the degree bound and of the `δ` growth estimate.
pub fn degree_bound_report(nmin: usize, nmax: usize, heart: u64) -> Result<BoundReport> {
    if nmin < 3 || nmax < nmin {
        return Err(McmError::InvalidConfig(format!("bad range {nmin}..={nmax}")));
    }
    let mut entries = Vec::new();
    let mut delta_failures = Vec::new();
    for nn in nmin..=nmax {
        let nb = BigUint::from(nn as u64);
        let full = num_traits::pow(nb.clone(), nn * nn);
        let bound_ceil = num_traits::pow(nb, (nn * nn).div_ceil(2)) - 1u32;
        let mut rows = Vec::new();
        for (c, r) in admissible_pairs(nn) {
            let cfg = McmConfig::uniform(nn, c, r, heart, 1)?;
            let s = build_schedule(&cfg, ScheduleMode::Paper9)?;
            let deg = s.d().clone();
            let within = {
                let t = &deg + 1u32;
                &t * &t <= full
            };
            let mut checks = Vec::new();
            for l in s.levels() {
                let dl = s.delta(l);
                let dn = s.delta(l + 1);
                let lb = BigUint::from(l as u64);
                let rhs = &lb * &lb * num_traits::pow(&lb + 1u32, l) * dl;
                let holds = *dn <= rhs;
                let claimed = l >= c + r + 2;
                if claimed && !holds {
                    delta_failures.push((nn, c, r, l));
                }
                checks.push(DeltaCheck {
                    l,
                    delta_l: dl.to_string(),
                    delta_next: dn.to_string(),
                    bound: rhs.to_string(),
                    holds,
                    claimed,
                });
            }
            rows.push((deg, BoundRow {
                c,
                r,
                degree: s.d().to_string(),
                delta_top: s.delta(nn + 1).to_string(),
                within_bound: within,
                delta_checks: checks,
            }));
        }
        let (best_deg, best) = rows
            .iter()
            .min_by(|a, b| a.0.cmp(&b.0))
            .map(|(d, row)| (d.clone(), (row.c, row.r)))
            .expect("at least one admissible pair");
        let within = {
            let t = &best_deg + 1u32;
            &t * &t <= full
        };
        entries.push(BoundEntry {
            n_ambient: nn,
            min_degree: best_deg.to_string(),
            argmin: best,
            bound_ceil: bound_ceil.to_string(),
            within_bound: within,
            rows: rows.into_iter().map(|(_, row)| row).collect(),
        });
    }
    let failures: Vec<usize> = entries.iter().filter(|e| !e.within_bound).map(|e| e.n_ambient).collect();
    let threshold = match failures.last() {
        None => Some(nmin),
        Some(&last) if last < nmax => Some(last + 1),
        Some(_) => None,
    };
    Ok(BoundReport { heart, entries, threshold, failures, delta_estimate_failures: delta_failures })
}

/// Writes `d0 = p(d+1) + q(d+2)` with `p, q >= 0`, choosing the least `q`.
pub fn product_decompose(d: u64, d0: u64) -> Option<(u64, u64)> {
    if d == 0 {
        return None;
    }
    if d0 >= d * d + d {
        let (p, q) = d0.div_rem(&(d + 1));
        return Some((p - q, q));
    }
    (0..=d0 / (d + 2))
        .find(|q| (d0 - q * (d + 2)).is_multiple_of(d + 1))
        .map(|q| ((d0 - q * (d + 2)) / (d + 1), q))
}

/// `κ₀ = 16 (Σ_{i<=c} d_i + Σ_{i<=c+r} d_i)²`.
pub fn very_ample_kappa(degrees_first_c: &[u64], degrees_all: &[u64]) -> Result<BigUint> {
    if degrees_first_c.is_empty() || degrees_all.is_empty() {
        return Err(McmError::InvalidConfig("degree lists must be nonempty".into()));
    }
    if degrees_first_c.len() > degrees_all.len() || degrees_all[..degrees_first_c.len()] != *degrees_first_c {
        return Err(McmError::InvalidConfig("the first list must be a prefix of the second".into()));
    }
    if degrees_all.contains(&0) {
        return Err(McmError::InvalidConfig("degrees must be positive".into()));
    }
    let s: BigUint = degrees_first_c.iter().chain(degrees_all).map(|&x| BigUint::from(x)).sum();
    Ok(BigUint::from(16u32) * &s * &s)
}

/// Least number of moving-coefficient terms at step `N − η`: with
/// `k = 3N − 2(2c+r) − 2 − 2η`, none are needed when `k <= 0` (the family
/// without moving terms already has codimension `>= 2N − 1`), else `k + 1`.
pub fn min_moving_terms(nn: usize, c: usize, r: usize, eta: usize) -> Result<u64> {
    if 2 * c + r < nn {
        return Err(McmError::InvalidConfig(format!("2c+r = {} is below N = {nn}", 2 * c + r)));
    }
    if c + r + 1 > nn || eta > nn - (c + r) - 1 {
        return Err(McmError::InvalidConfig(format!("η = {eta} is out of range")));
    }
    let k = 3 * nn as i64 - 2 * (2 * c + r) as i64 - 2 - 2 * eta as i64;
    Ok(if k <= 0 { 0 } else { k as u64 + 1 })
}

fn binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Dimension count of the coefficient parameter space of a system.
pub fn parameter_count(cfg: &McmConfig) -> Result<BigUint> {
    cfg.validate()?;
    let nn = cfg.n_ambient as u64;
    let mut blocks = BigUint::from(nn + 1);
    for l in cfg.first_level() as u64..=nn {
        blocks += binom(nn + 1, l + 1) * BigUint::from(l + 1);
    }
    let monos: BigUint = cfg.epsilons.iter().map(|&e| binom(nn + e, nn)).sum();
    Ok(blocks * monos)
}

/// Which regrouping a form is built from; indices are positions among the
/// non-vanishing coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    First { nu: usize },
    Second { tau: usize, rho: usize },
}

impl Variant {
    /// Every variant on `m + 1` columns: `ν = 0..m`, then `τ < ρ <= m`.
    pub fn all(m: usize) -> Vec<Variant> {
        let mut out: Vec<Variant> = (0..=m).map(|nu| Variant::First { nu }).collect();
        for tau in 0..m {
            for rho in tau + 1..=m {
                out.push(Variant::Second { tau, rho });
            }
        }
        out
    }

    pub fn check(&self, m: usize) -> Result<()> {
        let ok = match *self {
            Variant::First { nu } => nu <= m,
            Variant::Second { tau, rho } => tau < m && tau < rho && rho <= m,
        };
        if ok {
            Ok(())
        } else {
            Err(McmError::InvalidSelection(format!("{self:?} is out of range for {} columns", m + 1)))
        }
    }
}

/// Rows of a form: value rows `rows` (equation indices) and differential rows `diffs ⊆ rows`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selection {
    pub rows: Vec<usize>,
    pub diffs: Vec<usize>,
}

impl Selection {
    /// All `e` equations as value rows and the given differential rows.
    pub fn standard(e: usize, diffs: Vec<usize>) -> Self {
        Selection { rows: (0..e).collect(), diffs }
    }

    pub fn len(&self) -> usize {
        self.rows.len() + self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index checks without the square-minor condition.
    pub fn check_indices(&self, n_equations: usize) -> Result<()> {
        let ascending = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if !ascending(&self.rows) || !ascending(&self.diffs) {
            return Err(McmError::InvalidSelection("row indices must be strictly increasing".into()));
        }
        if self.rows.iter().any(|&i| i >= n_equations) {
            return Err(McmError::InvalidSelection(format!("value row out of range (e = {n_equations})")));
        }
        if self.diffs.iter().any(|j| !self.rows.contains(j)) {
            return Err(McmError::InvalidSelection("differential rows must be among the value rows".into()));
        }
        Ok(())
    }

    pub fn check(&self, n_equations: usize, n_columns: usize) -> Result<()> {
        self.check_indices(n_equations)?;
        if self.len() + 1 != n_columns {
            return Err(McmError::InvalidSelection(format!(
                "{} rows cannot give a square minor of a {n_columns}-column matrix",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Checks that vanishing coordinates are strictly increasing and inside `0..=N`.
pub fn check_vanishing(v: &[usize], nn: usize) -> Result<()> {
    if !v.windows(2).all(|w| w[0] < w[1]) || v.iter().any(|&x| x > nn) {
        return Err(McmError::InvalidSelection(format!("bad vanishing set {v:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwistContext {
    pub selection: Selection,
    pub variant: Option<Variant>,
    pub vanishing: Vec<usize>,
}

/// Exact twist degree `♥` of a determinantal form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwistDegree {
    #[serde(serialize_with = "ser_bigint")]
    pub value: BigInt,
    pub context: TwistContext,
}

fn ser_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// `♥ = Σ_{rows} deg F_i + Σ_{diffs} deg F_j − Σ_columns λ + #columns`.
pub fn twist_from_profile(
    eq_degrees: &[BigInt],
    lambdas: &[BigInt],
    selection: &Selection,
    variant: Option<Variant>,
    vanishing: &[usize],
) -> Result<TwistDegree> {
    selection.check(eq_degrees.len(), lambdas.len())?;
    let mut v: BigInt = selection.rows.iter().map(|&i| &eq_degrees[i]).sum();
    v += selection.diffs.iter().map(|&i| &eq_degrees[i]).sum::<BigInt>();
    v -= lambdas.iter().sum::<BigInt>();
    v += BigInt::from(lambdas.len() as u64);
    Ok(TwistDegree {
        value: v,
        context: TwistContext { selection: selection.clone(), variant, vanishing: vanishing.to_vec() },
    })
}

/// Per-column exponents `λ` of a regrouped system whose coordinates `vanishing`
/// are set to zero; columns are the remaining coordinates in increasing order.
pub fn lambda_profile(s: &McmSchedule, variant: Variant, vanishing: &[usize]) -> Result<Vec<BigUint>> {
    let cfg = s.config();
    check_vanishing(vanishing, cfg.n_ambient)?;
    if vanishing.len() >= cfg.n() {
        return Err(McmError::InvalidSelection(format!("η = {} must be below n = {}", vanishing.len(), cfg.n())));
    }
    let top = cfg.n_ambient - vanishing.len();
    variant.check(top)?;
    let base = s.d() - s.delta(top);
    let mut out = vec![base; top + 1];
    match variant {
        Variant::First { nu } => out[nu] = s.mu(top, 0).clone(),
        Variant::Second { tau, rho } => {
            let tb = BigUint::from(top as u64);
            for (k, slot) in out.iter_mut().enumerate().take(tau + 1) {
                *slot = s.d() - &tb * s.mu(top, k);
            }
            out[rho] = s.mu(top, tau + 1).clone();
        }
    }
    Ok(out)
}

/// Degrees `deg F_i = d + ε_i`.
pub fn equation_degrees(s: &McmSchedule) -> Vec<BigInt> {
    s.config.epsilons.iter().map(|&e| BigInt::from(s.d() + BigUint::from(e))).collect()
}

/// Twist degree of the form built from `variant`, `selection` and `vanishing`.
pub fn twist_degree(s: &McmSchedule, selection: &Selection, variant: Variant, vanishing: &[usize]) -> Result<TwistDegree> {
    let lambdas: Vec<BigInt> = lambda_profile(s, variant, vanishing)?.into_iter().map(BigInt::from).collect();
    twist_from_profile(&equation_degrees(s), &lambdas, selection, Some(variant), vanishing)
}

/// All strictly increasing `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NegativityReport {
    pub checked: usize,
    pub violations: Vec<TwistDegree>,
    /// Largest `♥ + (n − η)♡` seen; negative or zero when all checks pass.
    #[serde(serialize_with = "ser_bigint")]
    pub worst_margin: BigInt,
}

/// Twist degrees of every variant, vanishing set and differential selection,
/// compared against `−(n − η)♡`.
pub fn negativity_sweep(s: &McmSchedule) -> Result<NegativityReport> {
    let cfg = s.config();
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut worst: Option<BigInt> = None;
    for eta in 0..cfg.n() {
        let bound = BigInt::from((cfg.n() - eta) as u64 * cfg.heart);
        for v in subsets(cfg.n_ambient + 1, eta) {
            for variant in Variant::all(cfg.n_ambient - eta) {
                for diffs in subsets(cfg.c, cfg.n() - eta) {
                    let sel = Selection::standard(cfg.e(), diffs);
                    let t = twist_degree(s, &sel, variant, &v)?;
                    let margin = &t.value + &bound;
                    if worst.as_ref().is_none_or(|w| margin > *w) {
                        worst = Some(margin.clone());
                    }
                    if margin > BigInt::zero() {
                        violations.push(t);
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(NegativityReport { checked, violations, worst_margin: worst.unwrap_or_default() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(v: &BigUint) -> u64 {
        v.to_u64().unwrap()
    }

    #[test]
    fn paper9_three_two_zero() {
        let cfg = McmConfig::uniform(3, 2, 0, 1, 2).unwrap();
        let s = build_schedule(&cfg, ScheduleMode::Paper9).unwrap();
        let mu: Vec<u64> = s.mu_level(3).iter().map(u).collect();
        assert_eq!(mu, vec![19, 74, 294, 1174]);
        assert_eq!(u(s.delta(3)), 2);
        assert_eq!(u(s.d()), 4696);
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn tight_first_exponent() {
        let cfg = McmConfig::uniform(3, 2, 0, 1, 2).unwrap();
        let s = build_schedule(&cfg, ScheduleMode::Tight).unwrap();
        assert_eq!(u(s.mu(3, 0)), 17);
        assert!(validate_schedule(&s).is_empty());
    }

    #[test]
    fn tight_schedules_validate_and_grow() {
        for (nn, c, r) in [(2, 1, 0), (3, 2, 0), (3, 1, 1), (4, 2, 0), (5, 3, 0), (5, 2, 1)] {
            for eps in 1..=3 {
                let cfg = McmConfig::uniform(nn, c, r, 1, eps).unwrap();
                let s = build_schedule(&cfg, ScheduleMode::Tight).unwrap();
                assert!(validate_schedule(&s).is_empty(), "{nn} {c} {r}");
            }
        }
    }

    #[test]
    fn validator_catches_violations() {
        let cfg = McmConfig::uniform(2, 1, 0, 1, 1).unwrap();
        let s = build_schedule(&cfg, ScheduleMode::Tight).unwrap();
        let mut mu = vec![s.mu_level(2).to_vec()];
        mu[0][1] -= 1u32;
        let bad = McmSchedule::from_parts(cfg.clone(), vec![s.delta(2).clone(), s.delta(3).clone()], mu, s.d().clone()).unwrap();
        assert!(!validate_schedule(&bad).is_empty());
        let small_d = McmSchedule::from_parts(cfg, vec![s.delta(2).clone(), s.delta(3).clone()], vec![s.mu_level(2).to_vec()], s.d() - 1u32).unwrap();
        assert!(!validate_schedule(&small_d).is_empty());
    }

    #[test]
    fn closed_form_spot_values() {
        let cfg = McmConfig::uniform(3, 2, 0, 1, 2).unwrap();
        let s = build_schedule(&cfg, ScheduleMode::Paper9).unwrap();
        assert_eq!(closed_form_s(&s, 3, 0).unwrap(), BigInt::from(19));
        assert_eq!(closed_form_s(&s, 3, 1).unwrap(), BigInt::from(93));
        let t = build_schedule(&cfg, ScheduleMode::Tight).unwrap();
        assert!(matches!(closed_form_s(&t, 3, 0), Err(McmError::ModeError(_))));
    }

    #[test]
    fn paper9_rejects_large_epsilon_or_heart() {
        let cfg = McmConfig::uniform(3, 2, 0, 1, 3).unwrap();
        assert!(matches!(build_schedule(&cfg, ScheduleMode::Paper9), Err(McmError::ModeError(_))));
        let cfg = McmConfig::uniform(3, 2, 0, 2, 1).unwrap();
        assert!(matches!(build_schedule(&cfg, ScheduleMode::Paper9), Err(McmError::ModeError(_))));
    }

    #[test]
    fn config_validation() {
        assert!(McmConfig::uniform(3, 1, 0, 1, 1).is_err());
        assert!(McmConfig::uniform(3, 2, 1, 1, 1).is_err());
        assert!(McmConfig::new(3, 2, 0, 1, vec![1]).is_err());
        assert!(McmConfig::new(3, 2, 0, 1, vec![1, 0]).is_err());
        assert!(McmConfig::uniform(1, 1, 0, 1, 1).is_err());
    }

    #[test]
    fn decompositions() {
        assert_eq!(product_decompose(1, 2), Some((1, 0)));
        assert_eq!(product_decompose(3, 13), Some((2, 1)));
        assert_eq!(product_decompose(3, 11), None);
    }

    #[test]
    fn kappa_values() {
        assert_eq!(very_ample_kappa(&[5], &[5]).unwrap(), BigUint::from(1600u32));
        assert_eq!(very_ample_kappa(&[4], &[4, 7]).unwrap(), BigUint::from(3600u32));
        assert_eq!(very_ample_kappa(&[12], &[12, 21]).unwrap(), BigUint::from(3600u32 * 9));
        assert!(very_ample_kappa(&[], &[]).is_err());
        assert!(very_ample_kappa(&[3], &[4, 7]).is_err());
    }

    #[test]
    fn moving_term_counts() {
        assert_eq!(min_moving_terms(10, 5, 0, 0).unwrap(), 9);
        assert_eq!(min_moving_terms(10, 7, 0, 0).unwrap(), 0);
        assert_eq!(min_moving_terms(10, 5, 0, 3).unwrap(), 3);
        assert_eq!(min_moving_terms(10, 5, 0, 4).unwrap(), 0);
        // k = 0: the elementary family has codim 2(2c+r) − N + 1 = 2N − 1 already
        assert_eq!(min_moving_terms(10, 6, 2, 0).unwrap(), 0);
        assert_eq!(min_moving_terms(10, 5, 0, 5).unwrap_err(), McmError::InvalidConfig("η = 5 is out of range".into()));
    }

    #[test]
    fn parameter_count_example() {
        let cfg = McmConfig::uniform(2, 1, 0, 1, 1).unwrap();
        assert_eq!(parameter_count(&cfg).unwrap(), BigUint::from(18u32));
        let bigger = McmConfig::uniform(2, 1, 0, 1, 2).unwrap();
        assert!(parameter_count(&bigger).unwrap() > BigUint::from(18u32));
    }

    #[test]
    fn twist_examples() {
        let deg = |v: &[i64]| v.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>();
        let sel = Selection { rows: vec![0], diffs: vec![0] };
        let t = twist_from_profile(&deg(&[2]), &deg(&[2, 2, 2]), &sel, None, &[]).unwrap();
        assert_eq!(t.value, BigInt::from(1));
        let t = twist_from_profile(&deg(&[11]), &deg(&[10, 10, 10]), &sel, None, &[]).unwrap();
        assert_eq!(t.value, BigInt::from(-5));
        let bad = Selection { rows: vec![0], diffs: vec![1] };
        assert!(matches!(
            twist_from_profile(&deg(&[11, 11]), &deg(&[10, 10, 10, 10]), &bad, None, &[]),
            Err(McmError::InvalidSelection(_))
        ));
    }

    #[test]
    fn negativity_on_small_configs() {
        for (nn, c, r) in [(2, 1, 0), (3, 2, 0), (3, 1, 1), (4, 2, 0)] {
            let cfg = McmConfig::uniform(nn, c, r, 1, 1).unwrap();
            let s = build_schedule(&cfg, ScheduleMode::Tight).unwrap();
            let rep = negativity_sweep(&s).unwrap();
            assert!(rep.violations.is_empty(), "{nn} {c} {r}: {:?}", rep.violations.first());
            assert!(rep.checked > 0);
        }
    }

    #[test]
    fn json_uses_decimal_strings() {
        let cfg = McmConfig::uniform(3, 2, 0, 1, 2).unwrap();
        let s = build_schedule(&cfg, ScheduleMode::Paper9).unwrap();
        let v = serde_json::to_value(s.to_json()).unwrap();
        assert_eq!(v["d"], "4696");
        assert_eq!(v["N"], 3);
        assert_eq!(v["mode"], "paper9");
        assert_eq!(v["mu"][0][3], "1174");
    }
}
