mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use mcm_core::rng::{default_workers, with_workers};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use commands::{Command, Run};

#[derive(Debug, Parser)]
#[command(name = "mcm", version, about = "Schedules, identities and rank-variety oracles for moving-coefficient hypersurface systems")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Shorthand for `--format csv` (flattened `path,value` rows).
    #[arg(long, global = true)]
    csv: bool,
    /// Worker threads; defaults to MCM_WORKERS or the machine's parallelism. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write a run manifest (arguments, seed, version, wall time, verdicts, output digest).
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Re-run the command recorded in a manifest and compare its output digest.
    #[arg(long, value_name = "PATH", conflicts_with = "manifest")]
    replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VerdictEntry {
    name: String,
    pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    args: Vec<String>,
    params: serde_json::Value,
    seed: Option<u64>,
    version: String,
    workers: usize,
    wall_time_s: f64,
    verdicts: Vec<VerdictEntry>,
    pass: bool,
    output_sha256: String,
}

fn digest(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable output");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Recorded arguments: everything after the binary name except the manifest flag itself.
fn recorded_args(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--manifest" {
            it.next();
        } else if !a.starts_with("--manifest=") {
            out.push(a.clone());
        }
    }
    out
}

fn execute(command: &Command, workers: usize) -> anyhow::Result<Run> {
    with_workers(workers, || command.run())
}

fn emit(run: &Run, format: Format) -> anyhow::Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&run.output)?),
        Format::Csv => output::write_csv(&run.output, std::io::stdout())?,
    }
    Ok(())
}

fn report_failures(run: &Run) {
    if let Some((name, witness)) = run.first_failure() {
        eprintln!("verdict `{name}` failed: {}", witness.unwrap_or("no witness recorded"));
    }
}

fn replay(path: &PathBuf, format: Format, workers: usize) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text).context("parsing the run manifest")?;
    let mut argv = vec!["mcm".to_string()];
    argv.extend(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).context("the recorded arguments no longer parse")?;
    let Some(command) = cli.command else { bail!("the manifest records no subcommand") };
    let run = execute(&command, workers)?;
    let out_digest = digest(&run.output);
    let verdicts: Vec<VerdictEntry> = run.verdicts.iter().map(|v| VerdictEntry { name: v.name.clone(), pass: v.pass }).collect();
    let same = out_digest == manifest.output_sha256 && verdicts == manifest.verdicts;
    let report = serde_json::json!({
        "replayed": manifest.command,
        "args": manifest.args,
        "workers": workers,
        "recorded_sha256": manifest.output_sha256,
        "replayed_sha256": out_digest,
        "identical": same,
    });
    emit(&Run::plain(report), format)?;
    if !same {
        eprintln!("replay differs from the recorded run");
    }
    Ok(same)
}

fn real_main() -> anyhow::Result<bool> {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let format = if cli.csv { Format::Csv } else if cli.json { Format::Json } else { cli.format };
    let workers = cli.workers.filter(|&w| w > 0).unwrap_or_else(default_workers);
    if let Some(path) = &cli.replay {
        return replay(path, format, workers);
    }
    let Some(command) = cli.command else {
        use clap::CommandFactory;
        Cli::command().error(clap::error::ErrorKind::MissingSubcommand, "a subcommand is required").exit();
    };
    let start = Instant::now();
    let run = execute(&command, workers)?;
    let wall = start.elapsed().as_secs_f64();
    emit(&run, format)?;
    let pass = run.passed();
    if !pass {
        report_failures(&run);
    }
    if let Some(path) = &cli.manifest {
        let manifest = RunManifest {
            command: command.name().to_string(),
            args: recorded_args(&argv),
            params: serde_json::to_value(&command)?,
            seed: command.seed(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            wall_time_s: wall,
            verdicts: run.verdicts.iter().map(|v| VerdictEntry { name: v.name.clone(), pass: v.pass }).collect(),
            pass,
            output_sha256: digest(&run.output),
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(pass)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
