use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, Subcommand, ValueEnum};
use mcm_core::baselocus::{characterization_check, full_rank_h_check};
use mcm_core::codim_oracle::{estimate_dimension, EstimateOptions, ExpectedKind, RankVarietySpec, Verdict as CodimVerdict};
use mcm_core::hypersurfaces::{rewrite_suite, sample_system, HypersurfaceSystem, SystemOptions};
use mcm_core::mcm_schedule::{degree_bound_report, product_decompose, validate_schedule, very_ample_kappa};
use mcm_core::polyring::{Integers, PrimeField, Ring, SampleElem};
use mcm_core::symforms::identity_suite;
use mcm_core::{build_schedule, McmConfig, McmSchedule, ScheduleMode};
use serde::Serialize;
use serde_json::{json, Value};

const MERSENNE31: u64 = 2_147_483_647;

/// Parses counts written as `1048576`, `2^20` or `1e7`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Some((b, e)) = s.split_once('^') {
        let b: u64 = b.parse().map_err(|_| format!("bad base in `{s}`"))?;
        let e: u32 = e.parse().map_err(|_| format!("bad exponent in `{s}`"))?;
        return b.checked_pow(e).ok_or_else(|| format!("`{s}` overflows 64 bits"));
    }
    if let Some((m, e)) = s.split_once(['e', 'E']) {
        let m: u64 = m.parse().map_err(|_| format!("bad mantissa in `{s}`"))?;
        let e: u32 = e.parse().map_err(|_| format!("bad exponent in `{s}`"))?;
        return 10u64.checked_pow(e).and_then(|p| p.checked_mul(m)).ok_or_else(|| format!("`{s}` overflows 64 bits"));
    }
    s.parse().map_err(|_| format!("`{s}` is not a count"))
}

/// Schedule parameters shared by every command that builds a system.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ConfigArgs {
    /// Ambient dimension N.
    #[arg(long = "N")]
    pub n_ambient: usize,
    /// Number of equations with differential rows.
    #[arg(long)]
    pub c: usize,
    /// Number of remaining equations.
    #[arg(long)]
    pub r: usize,
    /// Target twist ♡.
    #[arg(long, default_value_t = 1)]
    pub heart: u64,
    /// ε_i per equation; a single value applies to all c+r equations.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub eps: Vec<u64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Tight)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Tight,
    Paper9,
}

impl ConfigArgs {
    fn schedule(&self) -> anyhow::Result<McmSchedule> {
        let eps = match self.eps.as_slice() {
            [e] => vec![*e; self.c + self.r],
            list => list.to_vec(),
        };
        let cfg = McmConfig::new(self.n_ambient, self.c, self.r, self.heart, eps)?;
        let mode = match self.mode {
            ModeArg::Tight => ScheduleMode::Tight,
            ModeArg::Paper9 => ScheduleMode::Paper9,
        };
        Ok(build_schedule(&cfg, mode)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    X,
    X0,
    Xpq,
    M,
    Mk,
    Mminus,
    Js,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Build an exponent schedule and validate every inequality it must satisfy.
    Schedule {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Sweep N for the degree bound and the δ growth estimate.
    Bounds {
        #[arg(long, default_value_t = 3)]
        nmin: usize,
        #[arg(long, default_value_t = 13)]
        nmax: usize,
        #[arg(long, default_value_t = 1)]
        heart: u64,
    },
    /// Check the symmetric-form identities on seeded pointed systems over F_q.
    Forms {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = MERSENNE31)]
        q: u64,
        /// Number of systems.
        #[arg(long, value_parser = parse_count, default_value = "100")]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Regroup a seeded system in every way and check that the equations are reassembled exactly.
    Rewrite {
        #[command(flatten)]
        config: ConfigArgs,
        /// Work over F_q instead of the integers.
        #[arg(long)]
        q: Option<u64>,
        /// Sizes of the vanishing sets to try; all η < n by default.
        #[arg(long, value_delimiter = ',')]
        eta: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the sampled system (text polynomials plus block manifest) to this file.
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
    },
    /// Estimate the codimension of a rank-condition variety from point counts.
    Codim {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,3,5,7")]
        q: Vec<u64>,
        /// Largest exhaustive enumeration.
        #[arg(long, value_parser = parse_count, default_value = "2^30")]
        budget: u64,
        /// Minimum Monte-Carlo samples per prime.
        #[arg(long, value_parser = parse_count, default_value = "2^20")]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare vanishing of the forms with membership in the rank variety at sampled jets.
    Baselocus {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 10007)]
        q: u64,
        #[arg(long, value_parser = parse_count, default_value = "500")]
        samples: u64,
        /// Vanish the first η coordinates (ignored when --vanish is given).
        #[arg(long, default_value_t = 0)]
        eta: usize,
        /// Explicit vanishing coordinates.
        #[arg(long, value_delimiter = ',')]
        vanish: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write d0 = p(d+1) + q(d+2) with p, q >= 0, or print null.
    Decompose {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        d0: u64,
    },
    /// Very-ampleness exponent from the equation degrees.
    Kappa {
        /// Degrees of the first c equations.
        #[arg(long, value_delimiter = ',', required = true)]
        first: Vec<u64>,
        /// Degrees of all c+r equations.
        #[arg(long, value_delimiter = ',', required = true)]
        all: Vec<u64>,
    },
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
}

impl Verdict {
    fn new(name: impl Into<String>, pass: bool, witness: Option<String>) -> Self {
        Verdict { name: name.into(), pass, witness }
    }
}

/// Output document and verdicts of one command.
#[derive(Debug, Clone)]
pub struct Run {
    pub output: Value,
    pub verdicts: Vec<Verdict>,
}

impl Run {
    /// A query result with no verdicts.
    pub fn plain(output: Value) -> Self {
        Run { output, verdicts: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn first_failure(&self) -> Option<(&str, Option<&str>)> {
        self.verdicts.iter().find(|v| !v.pass).map(|v| (v.name.as_str(), v.witness.as_deref()))
    }
}

fn need(v: Option<usize>, flag: &str, family: Family) -> anyhow::Result<usize> {
    v.ok_or_else(|| anyhow!("family {family:?} needs --{flag}"))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Schedule { .. } => "schedule",
            Command::Bounds { .. } => "bounds",
            Command::Forms { .. } => "forms",
            Command::Rewrite { .. } => "rewrite",
            Command::Codim { .. } => "codim",
            Command::Baselocus { .. } => "baselocus",
            Command::Decompose { .. } => "decompose",
            Command::Kappa { .. } => "kappa",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Forms { seed, .. }
            | Command::Rewrite { seed, .. }
            | Command::Codim { seed, .. }
            | Command::Baselocus { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn run(&self) -> anyhow::Result<Run> {
        match self {
            Command::Schedule { config } => {
                let s = config.schedule()?;
                let violations = validate_schedule(&s);
                let witness = violations.first().cloned();
                Ok(Run {
                    output: json!({ "schedule": s.to_json(), "violations": violations }),
                    verdicts: vec![Verdict::new("schedule_valid", witness.is_none(), witness)],
                })
            }
            Command::Bounds { nmin, nmax, heart } => {
                let rep = degree_bound_report(*nmin, *nmax, *heart)?;
                let witness = rep.failures.first().map(|n| format!("(N+1)·μ_(N,N) exceeds N^(N²/2) − 1 at N = {n}"));
                Ok(Run {
                    verdicts: vec![Verdict::new("degree_bound", rep.failures.is_empty(), witness)],
                    output: serde_json::to_value(&rep)?,
                })
            }
            Command::Forms { config, q, samples, seed } => {
                let rep = identity_suite(&config.schedule()?, *q, *samples, *seed)?;
                let verdicts = rep
                    .reports
                    .iter()
                    .map(|r| Verdict::new(r.check.clone(), r.passed(), r.first_witness.clone()))
                    .collect();
                Ok(Run { output: serde_json::to_value(&rep)?, verdicts })
            }
            Command::Rewrite { config, q, eta, seed, dump } => {
                let s = config.schedule()?;
                let etas: Vec<usize> = if eta.is_empty() { (0..s.config().n()).collect() } else { eta.clone() };
                match q {
                    None => rewrite_run(sample_system(&s, Integers, *seed, SystemOptions::default())?, &etas, dump.as_ref()),
                    Some(q) => {
                        let f = PrimeField::new(*q)?;
                        rewrite_run(sample_system(&s, f, *seed, SystemOptions::default())?, &etas, dump.as_ref())
                    }
                }
            }
            Command::Codim { family, p, l, m, n, k, rows, j, q, budget, samples, seed } => {
                let f = *family;
                let spec = match f {
                    Family::X => RankVarietySpec::X { p: need(*p, "p", f)?, l: need(*l, "l", f)? },
                    Family::X0 => RankVarietySpec::X0 { p: need(*p, "p", f)?, l: need(*l, "l", f)? },
                    Family::Xpq => RankVarietySpec::Xpq { p: need(*p, "p", f)?, m: need(*m, "m", f)?, l: need(*l, "l", f)? },
                    Family::M => RankVarietySpec::M { n: need(*n, "n", f)?, rows: need(*rows, "rows", f)? },
                    Family::Mk => RankVarietySpec::Mk { n: need(*n, "n", f)?, k: need(*k, "k", f)?, rows: need(*rows, "rows", f)? },
                    Family::Mminus => RankVarietySpec::Mminus { n: need(*n, "n", f)?, rows: need(*rows, "rows", f)? },
                    Family::Js => RankVarietySpec::Js { p: need(*p, "p", f)?, l: need(*l, "l", f)?, j: need(*j, "j", f)?, fixed: None },
                };
                let opts = EstimateOptions { budget: *budget, samples: *samples, seed: *seed, ..Default::default() };
                let e = estimate_dimension(&spec, q, &opts)?;
                let pass = e.verdict == CodimVerdict::Match
                    || (e.expected.kind == ExpectedKind::LowerBound && e.verdict == CodimVerdict::Excess);
                let witness = (!pass).then(|| {
                    let fit = e.fitted_codimension.map_or("none".into(), |x| format!("{x:.3}"));
                    format!("{spec}: fitted codimension {fit}, expected {} ({:?})", e.expected.codim, e.verdict)
                });
                Ok(Run { output: serde_json::to_value(&e)?, verdicts: vec![Verdict::new("codimension", pass, witness)] })
            }
            Command::Baselocus { config, q, samples, eta, vanish, seed } => {
                let s = config.schedule()?;
                let v: Vec<usize> = if vanish.is_empty() { (0..*eta).collect() } else { vanish.clone() };
                let ch = characterization_check(&s, *q, *samples, *seed, &v)?;
                let fr = full_rank_h_check(&s, *q, *samples, *seed, std::slice::from_ref(&v))?;
                let verdicts = vec![
                    Verdict::new("characterization", ch.passed(), ch.witnesses.first().map(|w| format!("{w:?}"))),
                    Verdict::new(
                        "column_sums",
                        fr.column_sum_failures == 0,
                        (fr.column_sum_failures > 0).then(|| format!("{} nonzero column sums", fr.column_sum_failures)),
                    ),
                ];
                Ok(Run { output: json!({ "characterization": ch, "full_rank": fr }), verdicts })
            }
            Command::Decompose { d, d0 } => Ok(Run::plain(json!(product_decompose(*d, *d0).map(|(p, q)| [p, q])))),
            Command::Kappa { first, all } => {
                let kappa = very_ample_kappa(first, all).context("computing κ₀")?;
                Ok(Run::plain(json!({ "kappa": kappa.to_string() })))
            }
        }
    }
}

fn rewrite_run<R: Ring + SampleElem>(sys: HypersurfaceSystem<R>, etas: &[usize], dump: Option<&PathBuf>) -> anyhow::Result<Run> {
    if let Some(path) = dump {
        std::fs::write(path, serde_json::to_string_pretty(&sys.manifest())?).with_context(|| format!("writing {}", path.display()))?;
    }
    let rep = rewrite_suite(&sys, etas);
    let witness = rep.outcomes.iter().find(|o| !(o.exact && o.residues_in_square_ideal)).map(|o| {
        format!("{:?} with vanishing {:?}: exact={} residues_in_square_ideal={} {}", o.kind, o.vanishing, o.exact, o.residues_in_square_ideal, o.error.clone().unwrap_or_default())
    });
    Ok(Run { verdicts: vec![Verdict::new("rewrite_exact", rep.passed(), witness)], output: serde_json::to_value(&rep)? })
}

#[cfg(test)]
mod tests {
    use super::parse_count;

    #[test]
    fn counts() {
        assert_eq!(parse_count("2^30"), Ok(1 << 30));
        assert_eq!(parse_count("1e7"), Ok(10_000_000));
        assert_eq!(parse_count("1_000"), Ok(1000));
        assert!(parse_count("2^70").is_err());
        assert!(parse_count("x").is_err());
    }
}
