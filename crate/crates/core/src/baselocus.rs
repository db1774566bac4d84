//! Base-locus characterization on pointed samples: all forms `φ^ν`, `ψ^{τ,ρ}`
//! vanish at a jet iff `M(z, ξ)` lies in the rank variety `𝓜`, provided every
//! hypersurface equation matrix has full rank there.

use serde::Serialize;

use crate::codim_oracle::{membership, RankVarietySpec};
use crate::hypersurfaces::{all_rewrites, HypersurfaceSystem, RewriteKind, RewrittenSystem};
use crate::linalg::{rank_of, DualEvaluator};
use crate::mcm_schedule::{check_vanishing, subsets};
use crate::polyring::{PrimeField, Ring};
use crate::rng::par_chunks;
use crate::symforms::{pointed_sample, EvaluatedSystem, JetPoint, MatrixKind, PointSpec, PointedSample, Target};
use crate::{McmError, McmSchedule, Result, Selection};

/// Draws tried per sample before the genericity filter gives up.
pub const MAX_RETRIES: u64 = 50;
/// Stream stride between samples; attempt `a` of sample `s` uses stream `s·64 + a`.
const STREAM_STRIDE: u64 = 64;
const CHUNK: u64 = 4;
const MAX_WITNESSES: usize = 16;
const TARGETS: [Target; 4] = [Target::Member, Target::Generic, Target::Partial, Target::Natural];

/// Short name of a regrouping, e.g. `first(nu=1)`.
pub fn variant_label(kind: RewriteKind) -> String {
    match kind {
        RewriteKind::Collapse => "collapse".into(),
        RewriteKind::First { nu } => format!("first(nu={nu})"),
        RewriteKind::Second { tau, rho } => format!("second(tau={tau},rho={rho})"),
    }
}

/// Every selection of `n − η` differential rows out of the first `c` equations.
pub fn form_selections(schedule: &McmSchedule, eta: usize) -> Result<Vec<Selection>> {
    let cfg = schedule.config();
    if eta >= cfg.n() {
        return Err(McmError::InvalidSelection(format!("η = {eta} must be below n = {}", cfg.n())));
    }
    Ok(subsets(cfg.c, cfg.n() - eta).into_iter().map(|d| Selection::standard(cfg.e(), d)).collect())
}

/// Checks the jet preconditions: `F_i(z) = 0`, `dF_j|_z(ξ) = 0` for `j < c`,
/// `ξ ∉ K·z` and `z_v = 0` on the vanishing set.
pub fn check_jet(system: &HypersurfaceSystem<PrimeField>, jet: &JetPoint, vanishing: &[usize]) -> Result<()> {
    let f = *system.ring();
    let cfg = system.schedule().config();
    check_vanishing(vanishing, cfg.n_ambient)?;
    if jet.z.len() != system.n_z() || jet.xi.len() != system.n_z() {
        return Err(McmError::InvalidJet(format!("the jet must have {} coordinates", system.n_z())));
    }
    if let Some(v) = vanishing.iter().find(|&&v| jet.z[v] != 0) {
        return Err(McmError::InvalidJet(format!("z_{v} must vanish")));
    }
    if !jet.is_independent(&f) {
        return Err(McmError::InvalidJet("ξ is proportional to z".into()));
    }
    let mut ev = DualEvaluator::new(&f, &jet.z, &jet.xi);
    for (i, eq) in system.equations().iter().enumerate() {
        let (v, d) = ev.poly(eq);
        if v != 0 {
            return Err(McmError::InvalidJet(format!("F_{i}(z) ≠ 0")));
        }
        if i < cfg.c && d != 0 {
            return Err(McmError::InvalidJet(format!("dF_{i}(ξ) ≠ 0")));
        }
    }
    Ok(())
}

/// Whether every form of the regroupings (the collapse is skipped) vanishes at the jet.
/// Each `ω̂_j` is evaluated at every column whose coordinate is nonzero.
pub fn forms_vanish_rewritten(
    rewrites: &[RewrittenSystem<PrimeField>],
    f: PrimeField,
    jet: &JetPoint,
    selections: &[Selection],
) -> Result<bool> {
    for rw in rewrites.iter().filter(|rw| rw.kind != RewriteKind::Collapse) {
        let fs = rw.fermat()?;
        let ev = EvaluatedSystem::new(f, &fs, jet);
        let cols: Vec<usize> = (0..fs.n_columns()).filter(|&k| jet.z[fs.vars[k]] != 0).collect();
        if cols.is_empty() {
            return Err(McmError::InvalidJet("every core coordinate vanishes".into()));
        }
        for sel in selections {
            for &k in &cols {
                if ev.omega_hat(sel, k)? != 0 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// True iff every form `φ^ν`, `ψ^{τ,ρ}` over every selection vanishes at `(z, ξ)`.
pub fn forms_vanish_at(system: &HypersurfaceSystem<PrimeField>, jet: &JetPoint, vanishing: &[usize]) -> Result<bool> {
    check_jet(system, jet, vanishing)?;
    let selections = form_selections(system.schedule(), vanishing.len())?;
    let rewrites = all_rewrites(system, vanishing)?;
    forms_vanish_rewritten(&rewrites, *system.ring(), jet, &selections)
}

/// `M(z, ξ)`: value rows of every equation and differential rows of the first `c`,
/// over the collapsed columns `(A_0..A_m | B_0..B_m)`.
pub fn m_matrix(collapsed: &RewrittenSystem<PrimeField>, f: PrimeField, jet: &JetPoint, c: usize) -> Result<Vec<Vec<u64>>> {
    let cols = collapsed.m_columns()?;
    let mut ev = DualEvaluator::new(&f, &jet.z, &jet.xi);
    let duals: Vec<Vec<(u64, u64)>> = cols.iter().map(|row| row.iter().map(|p| ev.poly(p)).collect()).collect();
    let mut m: Vec<Vec<u64>> = duals.iter().map(|row| row.iter().map(|x| x.0).collect()).collect();
    m.extend(duals.iter().take(c).map(|row| row.iter().map(|x| x.1).collect::<Vec<_>>()));
    Ok(m)
}

/// The rank variety `𝓜` that `M(z, ξ)` is tested against.
pub fn m_family(schedule: &McmSchedule, eta: usize) -> RankVarietySpec {
    let cfg = schedule.config();
    RankVarietySpec::M { n: cfg.n_ambient - eta, rows: 2 * cfg.c + cfg.r }
}

/// Rank of the value rows of every hypersurface equation matrix: `H` from the
/// collapse and `H^ν`, `H^{τ,ρ}` from the regroupings.
pub fn h_ranks(rewrites: &[RewrittenSystem<PrimeField>], f: PrimeField, jet: &JetPoint) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::with_capacity(rewrites.len());
    for rw in rewrites {
        let e = rw.equations.len();
        let h = if rw.kind == RewriteKind::Collapse {
            m_matrix(rw, f, jet, 0)?
        } else {
            let fs = rw.fermat()?;
            EvaluatedSystem::new(f, &fs, jet).matrix(MatrixKind::K, &Selection::standard(e, Vec::new()))
        };
        out.push((variant_label(rw.kind), rank_of(&f, &h)));
    }
    Ok(out)
}

/// Evaluation of one pointed draw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DrawOutcome {
    pub sample: u64,
    pub attempt: u64,
    pub target: Target,
    pub vanish: bool,
    pub member: bool,
    /// Matrices whose value rows lost rank; empty when the draw passes the filter.
    pub rank_deficient: Vec<String>,
}

impl DrawOutcome {
    pub fn generic(&self) -> bool {
        self.rank_deficient.is_empty()
    }
}

/// Forms, membership and genericity of a pointed sample.
pub fn evaluate_draw(sample: &PointedSample, vanishing: &[usize], sample_index: u64, attempt: u64, target: Target) -> Result<DrawOutcome> {
    let sys = &sample.system;
    let f = *sys.ring();
    let schedule = sys.schedule();
    let cfg = schedule.config();
    check_jet(sys, &sample.jet, vanishing)?;
    let rewrites = all_rewrites(sys, vanishing)?;
    let selections = form_selections(schedule, vanishing.len())?;
    let vanish = forms_vanish_rewritten(&rewrites, f, &sample.jet, &selections)?;
    let m = m_matrix(&rewrites[0], f, &sample.jet, cfg.c)?;
    let member = membership(&m, &m_family(schedule, vanishing.len()), &f)?;
    let rank_deficient = h_ranks(&rewrites, f, &sample.jet)?
        .into_iter()
        .filter(|(_, rk)| *rk < cfg.e())
        .map(|(l, _)| l)
        .collect();
    Ok(DrawOutcome { sample: sample_index, attempt, target, vanish, member, rank_deficient })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TargetTally {
    pub target: Option<Target>,
    pub samples: u64,
    pub vanish: u64,
    pub member: u64,
    pub agreements: u64,
}

/// The only-if direction (vanishing ⇒ membership) over every draw, filtered or not.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OnlyIfTally {
    pub draws: u64,
    pub vanishing: u64,
    pub violations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BaseLocusReport {
    pub n_ambient: usize,
    pub c: usize,
    pub r: usize,
    pub q: u64,
    pub seed: u64,
    pub vanishing: Vec<usize>,
    pub family: RankVarietySpec,
    pub samples: u64,
    pub agreements: u64,
    pub failures: u64,
    pub vanish_and_member: u64,
    pub neither: u64,
    pub vanish_not_member: u64,
    pub member_not_vanish: u64,
    pub by_target: Vec<TargetTally>,
    pub witnesses: Vec<DrawOutcome>,
    /// Draws rejected by the genericity filter, in sample order.
    pub filtered: Vec<DrawOutcome>,
    pub only_if_unfiltered: OnlyIfTally,
}

impl BaseLocusReport {
    pub fn new(schedule: &McmSchedule, q: u64, seed: u64, vanishing: &[usize]) -> Self {
        let cfg = schedule.config();
        BaseLocusReport {
            n_ambient: cfg.n_ambient,
            c: cfg.c,
            r: cfg.r,
            q,
            seed,
            vanishing: vanishing.to_vec(),
            family: m_family(schedule, vanishing.len()),
            samples: 0,
            agreements: 0,
            failures: 0,
            vanish_and_member: 0,
            neither: 0,
            vanish_not_member: 0,
            member_not_vanish: 0,
            by_target: TARGETS.iter().map(|&t| TargetTally { target: Some(t), ..Default::default() }).collect(),
            witnesses: Vec::new(),
            filtered: Vec::new(),
            only_if_unfiltered: OnlyIfTally::default(),
        }
    }

    /// Folds one draw in: filtered draws are logged, generic ones counted.
    pub fn absorb(&mut self, d: &DrawOutcome) {
        let oi = &mut self.only_if_unfiltered;
        oi.draws += 1;
        if d.vanish {
            oi.vanishing += 1;
            if !d.member {
                oi.violations += 1;
            }
        }
        if !d.generic() {
            self.filtered.push(d.clone());
            return;
        }
        self.samples += 1;
        let agree = d.vanish == d.member;
        match (d.vanish, d.member) {
            (true, true) => self.vanish_and_member += 1,
            (false, false) => self.neither += 1,
            (true, false) => self.vanish_not_member += 1,
            (false, true) => self.member_not_vanish += 1,
        }
        if agree {
            self.agreements += 1;
        } else {
            self.failures += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(d.clone());
            }
        }
        if let Some(t) = self.by_target.iter_mut().find(|t| t.target == Some(d.target)) {
            t.samples += 1;
            t.vanish += d.vanish as u64;
            t.member += d.member as u64;
            t.agreements += agree as u64;
        }
    }

    pub fn passed(&self) -> bool {
        self.samples > 0 && self.failures == 0
    }
}

/// Compares form vanishing with membership of `M(z, ξ)` on `samples`
/// genericity-filtered pointed samples; targets cycle through member, generic,
/// partial and natural jets.
pub fn characterization_check(schedule: &McmSchedule, q: u64, samples: u64, seed: u64, vanishing: &[usize]) -> Result<BaseLocusReport> {
    if samples == 0 {
        return Err(McmError::InvalidConfig("at least one sample is required".into()));
    }
    let f = PrimeField::new(q)?;
    let draws = par_chunks(samples, CHUNK, |_, range| -> Result<Vec<DrawOutcome>> {
        let mut out = Vec::new();
        for s in range {
            let target = TARGETS[(s % TARGETS.len() as u64) as usize];
            let spec = PointSpec::new(vanishing.to_vec(), target);
            let mut accepted = false;
            for attempt in 0..MAX_RETRIES {
                let ps = pointed_sample(schedule, f, seed, s * STREAM_STRIDE + attempt, &spec)?;
                let d = evaluate_draw(&ps, vanishing, s, attempt, target)?;
                accepted = d.generic();
                out.push(d);
                if accepted {
                    break;
                }
            }
            if !accepted {
                return Err(McmError::SamplingFailed(format!(
                    "sample {s}: no draw passed the genericity filter in {MAX_RETRIES} attempts"
                )));
            }
        }
        Ok(out)
    });
    let mut report = BaseLocusReport::new(schedule, q, seed, vanishing);
    for chunk in draws {
        for d in chunk? {
            report.absorb(&d);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariantRankTally {
    pub vanishing: Vec<usize>,
    pub variant: String,
    pub checked: u64,
    pub full_rank: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullRankReport {
    pub n_ambient: usize,
    pub c: usize,
    pub r: usize,
    pub q: u64,
    pub seed: u64,
    pub samples: u64,
    /// Samples at which every matrix (all variants, all vanishing sets) has rank `c + r`.
    pub full_rank_samples: u64,
    pub failure_rate: f64,
    /// `failure_rate · q`: the constant `K` in `rate <= K / q`.
    pub k_constant: f64,
    pub variants: Vec<VariantRankTally>,
    pub column_sum_checked: u64,
    pub column_sum_failures: u64,
}

impl FullRankReport {
    pub fn full_rank_fraction(&self) -> f64 {
        1.0 - self.failure_rate
    }
}

struct RankSample {
    full: bool,
    ranks: Vec<(String, bool)>,
    sums_checked: u64,
    sums_failed: u64,
}

fn row_sums_vanish(f: &PrimeField, m: &[Vec<u64>]) -> (u64, u64) {
    let bad = m.iter().filter(|row| row.iter().fold(0, |acc, x| f.add(&acc, x)) != 0).count();
    (m.len() as u64, bad as u64)
}

/// Rank statistics of `H`, `H^ν`, `H^{τ,ρ}` (and their vanishing-coordinate
/// versions) at natural pointed samples, plus the column-sum identity
/// `Σ_j K_j(z, ξ) = 0` on the value rows and the first `c` differential rows.
pub fn full_rank_h_check(schedule: &McmSchedule, q: u64, samples: u64, seed: u64, vanishing_sets: &[Vec<usize>]) -> Result<FullRankReport> {
    if samples == 0 {
        return Err(McmError::InvalidConfig("at least one sample is required".into()));
    }
    let f = PrimeField::new(q)?;
    let cfg = schedule.config();
    let sets: Vec<Vec<usize>> = if vanishing_sets.is_empty() { vec![Vec::new()] } else { vanishing_sets.to_vec() };
    let chunks = par_chunks(samples, CHUNK, |_, range| -> Result<Vec<RankSample>> {
        let mut out = Vec::new();
        for s in range {
            let mut rs = RankSample { full: true, ranks: Vec::new(), sums_checked: 0, sums_failed: 0 };
            for (k, v) in sets.iter().enumerate() {
                let spec = PointSpec { vanishing: v.clone(), target: Target::Natural, allow_small_q: true };
                let ps = pointed_sample(schedule, f, seed, s * STREAM_STRIDE + k as u64, &spec)?;
                let rewrites = all_rewrites(&ps.system, v)?;
                for (label, rk) in h_ranks(&rewrites, f, &ps.jet)? {
                    rs.full &= rk == cfg.e();
                    rs.ranks.push((label, rk == cfg.e()));
                }
                let mut mats = vec![m_matrix(&rewrites[0], f, &ps.jet, cfg.c)?];
                for rw in &rewrites[1..] {
                    let fs = rw.fermat()?;
                    let sel = Selection::standard(cfg.e(), (0..cfg.c).collect());
                    mats.push(EvaluatedSystem::new(f, &fs, &ps.jet).matrix(MatrixKind::K, &sel));
                }
                for m in &mats {
                    let (c, b) = row_sums_vanish(&f, m);
                    rs.sums_checked += c;
                    rs.sums_failed += b;
                }
            }
            out.push(rs);
        }
        Ok(out)
    });
    let mut variants: Vec<VariantRankTally> = Vec::new();
    let (mut full, mut checked, mut failed) = (0u64, 0u64, 0u64);
    for chunk in chunks {
        for rs in chunk? {
            full += rs.full as u64;
            checked += rs.sums_checked;
            failed += rs.sums_failed;
            let mut it = rs.ranks.into_iter();
            for v in &sets {
                let n_variants = 1 + crate::Variant::all(cfg.n_ambient - v.len()).len();
                for (label, ok) in it.by_ref().take(n_variants) {
                    let idx = match variants.iter().position(|t| t.vanishing == *v && t.variant == label) {
                        Some(i) => i,
                        None => {
                            variants.push(VariantRankTally { vanishing: v.clone(), variant: label, checked: 0, full_rank: 0 });
                            variants.len() - 1
                        }
                    };
                    variants[idx].checked += 1;
                    variants[idx].full_rank += ok as u64;
                }
            }
        }
    }
    let failure_rate = (samples - full) as f64 / samples as f64;
    Ok(FullRankReport {
        n_ambient: cfg.n_ambient,
        c: cfg.c,
        r: cfg.r,
        q,
        seed,
        samples,
        full_rank_samples: full,
        failure_rate,
        k_constant: failure_rate * q as f64,
        variants,
        column_sum_checked: checked,
        column_sum_failures: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurfaces::{sample_system, SystemOptions};
    use crate::polyring::{Arity, MultiPoly};
    use crate::{build_schedule, McmConfig, ScheduleMode};

    fn tight(n: usize, c: usize, r: usize) -> McmSchedule {
        build_schedule(&McmConfig::uniform(n, c, r, 1, 1).unwrap(), ScheduleMode::Tight).unwrap()
    }

    const BIG: u64 = 2_147_483_647;

    #[test]
    fn single_selection_when_n_equals_c() {
        let s = tight(3, 2, 0);
        assert_eq!(form_selections(&s, 0).unwrap().len(), 2);
        let s = tight(2, 1, 0);
        let sels = form_selections(&s, 0).unwrap();
        assert_eq!(sels, vec![Selection { rows: vec![0], diffs: vec![0] }]);
        assert!(form_selections(&s, 1).is_err());
    }

    #[test]
    fn members_vanish_and_generic_jets_do_not() {
        let s = tight(3, 2, 0);
        let f = PrimeField::new(BIG).unwrap();
        for (k, target) in [Target::Member, Target::Generic].into_iter().enumerate() {
            let ps = pointed_sample(&s, f, 3, k as u64, &PointSpec::new(vec![], target)).unwrap();
            let d = evaluate_draw(&ps, &[], 0, 0, target).unwrap();
            assert!(d.generic());
            assert_eq!(d.vanish, target == Target::Member);
            assert_eq!(d.member, target == Target::Member);
            assert_eq!(forms_vanish_at(&ps.system, &ps.jet, &[]).unwrap(), d.vanish);
        }
    }

    #[test]
    fn partial_jets_keep_first_kind_only() {
        let s = tight(3, 2, 0);
        let f = PrimeField::new(BIG).unwrap();
        let ps = pointed_sample(&s, f, 5, 0, &PointSpec::new(vec![], Target::Partial)).unwrap();
        let d = evaluate_draw(&ps, &[], 0, 0, Target::Partial).unwrap();
        assert!(!d.vanish && !d.member);
    }

    #[test]
    fn preconditions_are_enforced() {
        let s = tight(2, 1, 0);
        let f = PrimeField::new(BIG).unwrap();
        let ps = pointed_sample(&s, f, 1, 0, &PointSpec::new(vec![], Target::Unconstrained)).unwrap();
        assert!(matches!(forms_vanish_at(&ps.system, &ps.jet, &[]), Err(McmError::InvalidJet(_))));
        let ps = pointed_sample(&s, f, 1, 0, &PointSpec::new(vec![], Target::Natural)).unwrap();
        let flat = JetPoint { z: ps.jet.z.clone(), xi: ps.jet.z.clone() };
        assert!(matches!(forms_vanish_at(&ps.system, &flat, &[]), Err(McmError::InvalidJet(_))));
        assert!(matches!(forms_vanish_at(&ps.system, &ps.jet, &[0]), Err(McmError::InvalidJet(_))));
    }

    fn duplicate_first_equation(ps: &PointedSample) -> PointedSample {
        let sys = &ps.system;
        let nz = sys.n_z();
        let e = sys.schedule().config().e();
        let a: Vec<Vec<_>> = (0..e).map(|_| (0..nz).map(|j| sys.a(0, j).clone()).collect()).collect();
        let m: Vec<Vec<_>> = (0..e).map(|_| (0..sys.shapes().len()).map(|t| sys.moving(0, t).clone()).collect()).collect();
        let dup = HypersurfaceSystem::assemble(sys.schedule(), *sys.ring(), sys.shapes().to_vec(), a, m, sys.options()).unwrap();
        PointedSample { system: dup, jet: ps.jet.clone(), target_matrix: None }
    }

    #[test]
    fn duplicated_rows_lose_rank() {
        let s = tight(3, 2, 0);
        let f = PrimeField::new(10007).unwrap();
        for i in 0..5 {
            let ps = pointed_sample(&s, f, 9, i, &PointSpec::new(vec![], Target::Natural)).unwrap();
            let dup = duplicate_first_equation(&ps);
            let rewrites = all_rewrites(&dup.system, &[]).unwrap();
            assert!(h_ranks(&rewrites, f, &dup.jet).unwrap().iter().all(|(_, rk)| *rk <= 1));
        }
    }

    #[test]
    fn degenerate_draw_is_filtered_and_logged() {
        let s = tight(3, 2, 0);
        let f = PrimeField::new(10007).unwrap();
        let ps = pointed_sample(&s, f, 2, 0, &PointSpec::new(vec![], Target::Generic)).unwrap();
        let dup = duplicate_first_equation(&ps);
        let d = evaluate_draw(&dup, &[], 0, 0, Target::Generic).unwrap();
        assert!(!d.generic());
        assert_eq!(d.rank_deficient.len(), 1 + crate::Variant::all(3).len());
        let mut report = BaseLocusReport::new(&s, 10007, 2, &[]);
        report.absorb(&d);
        assert_eq!(report.samples, 0);
        assert_eq!(report.filtered, vec![d]);
        assert_eq!(report.only_if_unfiltered.draws, 1);
    }

    #[test]
    fn zero_moving_terms_give_full_rank() {
        let s = tight(3, 2, 0);
        let f = PrimeField::new(10007).unwrap();
        let options = SystemOptions { zero_moving: true, ..Default::default() };
        let sys = sample_system(&s, f, 4, options).unwrap();
        let d = s.exponents().unwrap().d;
        let h: Vec<Vec<MultiPoly<PrimeField>>> = (0..2).map(|i| (0..4).map(|j| sys.a(i, j).mul_var_pow(j, d)).collect()).collect();
        let mut rng = crate::rng::stream_rng(4, 1);
        let mut full = 0;
        for _ in 0..1000 {
            use rand::Rng;
            let z: Vec<u64> = (0..4).map(|_| rng.random_range(0..10007)).collect();
            let m: Vec<Vec<u64>> = h.iter().map(|row| row.iter().map(|p| p.evaluate(&z, None).unwrap()).collect()).collect();
            full += (rank_of(&f, &m) == 2) as u32;
        }
        assert!(full >= 990, "{full}");
        assert_eq!(h[0][0].arity(), Arity::plain(4));
    }

    #[test]
    fn characterization_small_run() {
        let s = tight(3, 2, 0);
        let r = characterization_check(&s, BIG, 8, 11, &[]).unwrap();
        assert_eq!(r.samples, 8);
        assert_eq!(r.agreements + r.failures, r.samples);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.vanish_and_member, 2);
        let again = characterization_check(&s, BIG, 8, 11, &[]).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn full_rank_and_column_sums() {
        let s = tight(3, 2, 0);
        let r = full_rank_h_check(&s, 10007, 20, 3, &[]).unwrap();
        assert_eq!(r.column_sum_failures, 0);
        assert!(r.column_sum_checked > 0);
        assert!(r.full_rank_fraction() >= 0.95);
        assert_eq!(r.variants.len(), 1 + crate::Variant::all(3).len());
    }
}
