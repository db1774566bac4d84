//! Acceptance suite: one PASS/FAIL line per criterion, then a determinism replay.
//! Exits nonzero when any criterion fails.

use std::time::{Duration, Instant};

use mcm_core::baselocus::{characterization_check, full_rank_h_check};
use mcm_core::codim_oracle::{
    estimate_dimension, i_matrix_reduction_check, predicate_equivalences, stratification_containment, CountMethod,
    EstimateOptions, RankVarietySpec, Verdict, SLOPE_BAND,
};
use mcm_core::hypersurfaces::{rewrite_suite, sample_system, SystemOptions};
use mcm_core::mcm_schedule::{
    admissible_pairs, closed_form_s, degree_bound_report, direct_sum_s, negativity_sweep, product_decompose,
    very_ample_kappa,
};
use mcm_core::polyring::{Integers, PrimeField};
use mcm_core::rng::{derive_seed, with_workers};
use mcm_core::symforms::identity_suite;
use mcm_core::{build_schedule, McmConfig, McmSchedule, ScheduleMode};
use serde::Serialize;
use serde_json::json;

const SEED: u64 = 0x6d63_6d5f_3230_3236;
const MERSENNE31: u64 = 2_147_483_647;
const SUITE: [(usize, usize, usize); 4] = [(2, 1, 0), (3, 2, 0), (3, 1, 1), (4, 2, 0)];

struct Outcome {
    pass: bool,
    detail: String,
    json: String,
}

fn outcome<T: Serialize>(pass: bool, detail: String, value: &T) -> Outcome {
    Outcome { pass, detail, json: serde_json::to_string(value).expect("serializable report") }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn tight(nn: usize, c: usize, r: usize) -> McmSchedule {
    build_schedule(&McmConfig::uniform(nn, c, r, 1, 1).unwrap(), ScheduleMode::Tight).unwrap()
}

fn fmt_fit(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.2}"))
}

fn c1() -> Outcome {
    let t = Instant::now();
    let opts = EstimateOptions { seed: derive_seed(SEED, 1), ..Default::default() };
    let mut pass = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for (l, want) in [(0, 5), (1, 3), (2, 2)] {
        let e = estimate_dimension(&RankVarietySpec::X { p: 2, l }, &[2, 3, 5, 7], &opts).unwrap();
        let exhaustive = e.counts.iter().all(|c| c.method == CountMethod::Exhaustive);
        let ok = exhaustive && e.fitted_codimension.is_some_and(|x| (x - want as f64).abs() <= SLOPE_BAND);
        pass &= ok;
        parts.push(format!("l={l}: {} (want {want})", fmt_fit(e.fitted_codimension)));
        reports.push(e);
    }
    let el = t.elapsed();
    pass &= within(el, 10);
    outcome(pass, format!("{} [{:.1}s < 10s]", parts.join(", "), el.as_secs_f64()), &reports)
}

fn c2() -> Outcome {
    let t = Instant::now();
    let opts = EstimateOptions { budget: 1 << 20, samples: 10_000_000, seed: derive_seed(SEED, 2), ..Default::default() };
    let mut pass = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for (l, want) in [(0, 10), (1, 6), (2, 4), (3, 3)] {
        let e = estimate_dimension(&RankVarietySpec::X { p: 3, l }, &[2, 3, 5], &opts).unwrap();
        let methods_ok = e.counts.iter().all(|c| match c.q {
            2 => c.method == CountMethod::Exhaustive,
            _ => c.method == CountMethod::MonteCarlo && c.samples.unwrap_or(0) >= 10_000_000,
        });
        // nearest integer to the fit; the ±0.35 band behind `verdict` is reported alongside
        let ok = methods_ok && e.fitted_codimension.is_some_and(|x| x.round() == want as f64);
        pass &= ok;
        parts.push(format!("l={l}: {} (want {want}, {:?})", fmt_fit(e.fitted_codimension), e.verdict));
        reports.push(e);
    }
    let el = t.elapsed();
    pass &= within(el, 300);
    outcome(pass, format!("{} [{:.1}s < 300s]", parts.join(", "), el.as_secs_f64()), &reports)
}

fn all_match(specs: Vec<(RankVarietySpec, Vec<u64>)>, opts: &EstimateOptions) -> (bool, Vec<String>, Vec<serde_json::Value>) {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for (spec, qs) in specs {
        let e = estimate_dimension(&spec, &qs, opts).unwrap();
        pass &= e.verdict == Verdict::Match;
        parts.push(format!("{spec}={}/{}", fmt_fit(e.fitted_codimension), e.expected.codim));
        reports.push(serde_json::to_value(&e).unwrap());
    }
    (pass, parts, reports)
}

fn c3() -> Outcome {
    let opts = EstimateOptions { budget: 1 << 24, samples: 2_000_000, seed: derive_seed(SEED, 3), ..Default::default() };
    let mut specs = Vec::new();
    for p in 2..=3 {
        let qs = if p == 2 { vec![2, 3, 5, 7] } else { vec![2, 3, 5] };
        for l in 0..=p {
            specs.push((RankVarietySpec::X0 { p, l }, qs.clone()));
        }
    }
    for l in 0..=2 {
        for j in [l, l + 1] {
            specs.push((RankVarietySpec::Js { p: 3, l, j, fixed: None }, vec![2, 3, 5, 7, 11]));
        }
    }
    let (pass, parts, reports) = all_match(specs, &opts);
    outcome(pass, parts.join(" "), &reports)
}

fn c4() -> Outcome {
    let opts = EstimateOptions { budget: 1 << 24, samples: 2_000_000, seed: derive_seed(SEED, 4), ..Default::default() };
    let mut specs = Vec::new();
    for p in 3..=4 {
        for l in 0..=2 {
            specs.push((RankVarietySpec::Xpq { p, m: 2, l }, vec![2, 3, 5, 7]));
        }
    }
    for (n, c, r) in [(2, 1, 0), (3, 2, 0), (3, 1, 1)] {
        specs.push((RankVarietySpec::Mminus { n, rows: 2 * c + r }, vec![2, 3, 5, 7]));
    }
    let (pass, parts, reports) = all_match(specs, &opts);
    outcome(pass, parts.join(" "), &reports)
}

fn c5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for p in [2, 3] {
        let r = predicate_equivalences(p, 2, 1 << 30).unwrap();
        let ok = r.replacement_lemma.passed() && r.top_stratum.passed();
        pass &= ok;
        parts.push(format!(
            "p={p}: {}+{} matrices, {} discrepancies",
            r.replacement_lemma.checked,
            r.top_stratum.checked,
            r.replacement_lemma.failures + r.top_stratum.failures
        ));
        reports.push(r);
    }
    outcome(pass, parts.join(", "), &reports)
}

fn c6() -> Outcome {
    let f = PrimeField::new(5).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut tallies = Vec::new();
    for l in 0..=2 {
        let t = stratification_containment(3, l, &f, 10_000, derive_seed(SEED, 60 + l as u64)).unwrap();
        pass &= t.passed() && t.checked == 10_000;
        parts.push(format!("l={l}: {}/{} failures", t.failures, t.checked));
        tallies.push(t);
    }
    let structural = i_matrix_reduction_check(6);
    pass &= structural.passed();
    parts.push(format!("I-matrix reductions p<=6: {} checked, {} failures", structural.checked, structural.failures));
    outcome(pass, parts.join(", "), &json!({ "containment": tallies, "structural": structural }))
}

const C7_SYSTEMS: u64 = 1000;

fn c7() -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut all = Vec::new();
    for (i, &(nn, c, r)) in SUITE.iter().enumerate() {
        let rep = identity_suite(&tight(nn, c, r), MERSENNE31, C7_SYSTEMS, derive_seed(SEED, 70 + i as u64)).unwrap();
        let failures: u64 = rep.reports.iter().map(|r| r.failures).sum();
        pass &= rep.passed();
        parts.push(format!("({nn},{c},{r}): {} systems, {} checks/identity, {failures} failures", rep.systems, rep.reports[0].samples));
        all.push(json!({ "config": [nn, c, r], "report": rep }));
    }
    let el = t.elapsed();
    pass &= within(el, 600);
    outcome(pass, format!("{} [{:.1}s < 600s]", parts.join(", "), el.as_secs_f64()), &all)
}

fn c8() -> Outcome {
    let mut checked = 0;
    let mut failures = 0;
    let mut reports = Vec::new();
    for (i, &(nn, c, r)) in SUITE.iter().enumerate() {
        let s = tight(nn, c, r);
        let etas: Vec<usize> = (0..s.config().n()).collect();
        for seed in 0..3u64 {
            let sys = sample_system(&s, Integers, derive_seed(SEED, 80 + 8 * i as u64 + seed), SystemOptions::default()).unwrap();
            let rep = rewrite_suite(&sys, &etas);
            checked += rep.checked;
            failures += rep.failures;
            reports.push(rep);
        }
    }
    let pass = checked > 0 && failures == 0;
    let detail = format!("{checked} regroupings over Z reassembled, {failures} nonzero residuals or failed divisions");
    outcome(pass, detail, &reports)
}

fn c9() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for &(nn, c, r) in &SUITE {
        for (mode, eps) in [(ScheduleMode::Tight, 1), (ScheduleMode::Tight, 2), (ScheduleMode::Paper9, 1)] {
            let s = build_schedule(&McmConfig::uniform(nn, c, r, 1, eps).unwrap(), mode).unwrap();
            let rep = negativity_sweep(&s).unwrap();
            pass &= rep.violations.is_empty() && rep.checked > 0;
            parts.push(format!("({nn},{c},{r},{mode:?},ε={eps}): {}", rep.checked));
            reports.push(json!({ "config": [nn, c, r], "mode": format!("{mode:?}"), "eps": eps, "report": rep }));
        }
    }
    outcome(pass, format!("twist degrees checked {}; no violations: {pass}", parts.join(" ")), &reports)
}

fn c10() -> Outcome {
    let eta0 = characterization_check(&tight(3, 2, 0), 10007, 500, derive_seed(SEED, 100), &[]).unwrap();
    let eta1 = characterization_check(&tight(4, 2, 0), MERSENNE31, 500, derive_seed(SEED, 101), &[2]).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, r) in [("(3,2,0) η=0 q=10007", &eta0), ("(4,2,0) η=1 v={2} q=2^31-1", &eta1)] {
        pass &= r.passed() && r.samples == 500 && r.agreements + r.failures == r.samples;
        parts.push(format!(
            "{label}: {}/{} agree ({} in base locus, {} filtered draws)",
            r.agreements,
            r.samples,
            r.vanish_and_member,
            r.filtered.len()
        ));
    }
    outcome(pass, parts.join(", "), &[eta0, eta1])
}

fn c11() -> Outcome {
    let s = tight(3, 2, 0);
    let mut pass = true;
    let mut rates = Vec::new();
    let mut reports = Vec::new();
    for q in [101, 1009, 10007] {
        let r = full_rank_h_check(&s, q, 2000, derive_seed(SEED, 110), &[]).unwrap();
        pass &= r.column_sum_failures == 0;
        rates.push(r.failure_rate);
        reports.push(r);
    }
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    let top = reports[2].full_rank_fraction();
    let eta = full_rank_h_check(&tight(4, 2, 0), 10007, 500, derive_seed(SEED, 111), &[vec![], vec![0], vec![4]]).unwrap();
    pass &= monotone && top >= 0.99 && eta.full_rank_fraction() >= 0.99 && eta.column_sum_failures == 0;
    reports.push(eta.clone());
    let detail = format!(
        "failure rates {rates:?} at q=101,1009,10007 (non-increasing: {monotone}), full rank {:.2}% at 10007; (4,2,0) with η-variants {:.2}%",
        100.0 * top,
        100.0 * eta.full_rank_fraction()
    );
    outcome(pass, detail, &reports)
}

/// Independent replay of the `paper9`-mode recursion in machine integers.
fn replay_paper9(nn: usize, c: usize, r: usize) -> Vec<Vec<u128>> {
    let mut delta: u128 = 2;
    let mut levels = Vec::new();
    for l in (c + r + 1)..=nn {
        let l128 = l as u128;
        let mut row: Vec<u128> = Vec::new();
        for k in 0..=l {
            let prev: u128 = row.iter().sum();
            row.push(l128 * prev + (l - k) as u128 * delta + 4 * l128 + 1);
        }
        delta = l128 * row[l];
        levels.push(row);
    }
    levels
}

fn c12() -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();

    let s = build_schedule(&McmConfig::uniform(3, 2, 0, 1, 2).unwrap(), ScheduleMode::Paper9).unwrap();
    let mu: Vec<String> = s.mu_level(3).iter().map(|m| m.to_string()).collect();
    let replay: Vec<String> = replay_paper9(3, 2, 0).last().unwrap().iter().map(|m| m.to_string()).collect();
    let mu_ok = mu == ["19", "74", "294", "1174"] && mu == replay && s.d().to_string() == "4696";
    pass &= mu_ok;
    parts.push(format!("μ_3 = ({}) d = {}", mu.join(", "), s.d()));

    let mut closed = 0u64;
    let mut closed_bad = 0u64;
    for nn in 3..=13 {
        for (c, r) in admissible_pairs(nn) {
            let s = build_schedule(&McmConfig::uniform(nn, c, r, 1, 1).unwrap(), ScheduleMode::Paper9).unwrap();
            for l in s.levels() {
                for k in 0..=l {
                    closed += 1;
                    closed_bad += (closed_form_s(&s, l, k).ok() != Some(direct_sum_s(&s, l, k))) as u64;
                }
            }
        }
    }
    pass &= closed_bad == 0;
    parts.push(format!("closed-form S: {closed} (l,k) pairs, {closed_bad} mismatches"));

    let bounds = degree_bound_report(3, 13, 1).unwrap();
    let verdicts: usize = bounds.entries.iter().flat_map(|e| &e.rows).map(|r| r.delta_checks.len()).sum();
    let flagged = bounds.failures.contains(&3);
    pass &= flagged && verdicts > 0;
    parts.push(format!(
        "Δ-estimate verdicts {verdicts} ({} claimed failures); degree-bound threshold {:?}, failing N {:?} (N=3 flagged: {flagged})",
        bounds.delta_estimate_failures.len(),
        bounds.threshold,
        bounds.failures
    ));

    let mut dec_bad = 0u64;
    let mut dec = 0u64;
    for d in 1..=50u64 {
        for d0 in 0..=d * d + d + 1000 {
            dec += 1;
            let brute = (0..=d0 / (d + 2)).any(|q| (d0 - q * (d + 2)) % (d + 1) == 0);
            let ok = match product_decompose(d, d0) {
                Some((p, q)) => p * (d + 1) + q * (d + 2) == d0,
                None => !brute,
            };
            let in_range = d0 < d * d + d || product_decompose(d, d0).is_some();
            dec_bad += (!ok || !in_range || brute != product_decompose(d, d0).is_some()) as u64;
        }
    }
    pass &= dec_bad == 0;
    parts.push(format!("decompositions: {dec} checked, {dec_bad} wrong"));

    let k1 = very_ample_kappa(&[5], &[5]).unwrap().to_string();
    let k2 = very_ample_kappa(&[4], &[4, 7]).unwrap().to_string();
    pass &= k1 == "1600" && k2 == "3600";
    parts.push(format!("κ₀ = {k1}, {k2}"));

    let el = t.elapsed();
    pass &= within(el, 30);
    parts.push(format!("[{:.1}s < 30s]", el.as_secs_f64()));
    outcome(
        pass,
        parts.join("; "),
        &json!({ "mu": mu, "replay": replay, "closed_checked": closed, "closed_bad": closed_bad, "bounds": bounds, "decompose_bad": dec_bad, "kappa": [k1, k2] }),
    )
}

type Criterion = fn() -> Outcome;

const CRITERIA: [(&str, Criterion); 12] = [
    ("1 codimension table p=2", c1),
    ("2 codimension table p=3", c2),
    ("3 slice and stratum formulas", c3),
    ("4 general formulas", c4),
    ("5 predicate equivalences", c5),
    ("6 gaussian stratification", c6),
    ("7 form identities", c7),
    ("8 rewriting exactness", c8),
    ("9 negativity", c9),
    ("10 base-locus equivalence", c10),
    ("11 full-rank genericity", c11),
    ("12 effective-bound arithmetic", c12),
];

fn main() {
    let mut all_pass = true;
    let mut first_run = Vec::new();
    for (name, run) in CRITERIA {
        let t = Instant::now();
        let o = run();
        println!("{} criterion {name}: {} ({:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
        all_pass &= o.pass;
        first_run.push(o.json);
    }

    // Criterion 13: replay every criterion under different worker counts and compare JSON bytes.
    let t = Instant::now();
    let mut mismatches = Vec::new();
    for (workers, idx) in [(4usize, (0..CRITERIA.len()).collect::<Vec<_>>()), (2, vec![0, 4, 5, 7, 8, 9, 10, 11])] {
        for i in idx {
            let again = with_workers(workers, CRITERIA[i].1);
            if again.json != first_run[i] {
                mismatches.push(format!("criterion {} with {workers} workers", i + 1));
            }
        }
    }
    let pass13 = mismatches.is_empty();
    println!(
        "{} criterion 13 determinism: {} ({:.1}s)",
        if pass13 { "PASS" } else { "FAIL" },
        if pass13 {
            "byte-identical JSON for criteria 1-12 with 4 workers and for 1,5,6,8-12 with 2 workers".to_string()
        } else {
            format!("differing JSON: {}", mismatches.join(", "))
        },
        t.elapsed().as_secs_f64()
    );
    all_pass &= pass13;
    if !all_pass {
        std::process::exit(1);
    }
}
