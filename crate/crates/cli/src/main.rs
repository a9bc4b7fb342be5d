//! `retrans`: reproducible experiments on the retransmission channel model.

mod commands;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use output::Format;
use spec::{RawSpec, Resolver};

#[derive(Parser)]
#[command(
    name = "retrans",
    version,
    about = "Tail experiments for retransmissions over random channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature values of ln P[N > n] on a grid.
    ComputeN(Common),
    /// Monte Carlo tail curves of N and T.
    Simulate(Common),
    /// Regime of Φ, dominance probe, and numeric Φ probes of a model.
    Classify(Common),
    /// Oracle or Monte Carlo curve against the asymptotic prediction.
    Compare(Common),
    /// Exact curve and bound check for the tandem-hop model.
    Tandem(Common),
}

/// Options shared by every subcommand. Each typed flag sets the spec field of
/// the same name and overrides the config file.
#[derive(Args)]
struct Common {
    /// Key/value config file, or an earlier output file to re-run.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output prefix; without it results go to stdout.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_name = "csv|json|both")]
    format: Format,
    /// Set any spec field, e.g. `--set seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Data-unit length distribution, e.g. `exp(rate=2)`.
    #[arg(long = "L", value_name = "DIST")]
    l: Option<String>,
    /// Availability-period distribution.
    #[arg(long = "A", value_name = "DIST")]
    a: Option<String>,
    /// Off-period distribution (default `det(0)`).
    #[arg(long = "U", value_name = "DIST")]
    u: Option<String>,
    /// Φ form, e.g. `power(2)` or `logpower(lambda=1,delta=2)`.
    #[arg(long)]
    phi: Option<String>,
    /// `geom(lo,hi[,factor])` or a list `9,99,999`.
    #[arg(long)]
    grid: Option<String>,
    /// Grid for the T curve of `simulate`.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    sessions: Option<String>,
    /// Worker threads (default from RETRANS_WORKERS, else 1).
    #[arg(long)]
    workers: Option<String>,
    /// `shortcut` or `naive`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    max_attempts: Option<String>,
    /// Truncated sessions tolerated before exiting with status 1.
    #[arg(long)]
    max_truncated: Option<String>,
    /// `oracle` or `mc` (compare).
    #[arg(long)]
    source: Option<String>,
    /// `n` or `t` (compare).
    #[arg(long)]
    curve: Option<String>,
    /// `auto`, `prob_ratio`, `log_ratio` or `loglog_ratio` (compare).
    #[arg(long)]
    scale: Option<String>,
    /// Hop-count tail rate (tandem).
    #[arg(long)]
    p: Option<String>,
    /// Per-hop loss rate (tandem).
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    per_hop_time: Option<String>,
    /// Add Monte Carlo columns (tandem).
    #[arg(long)]
    simulate: bool,
    /// Render log columns in base 10.
    #[arg(long)]
    base10: bool,
}

impl Common {
    fn raw_spec(&self) -> Result<RawSpec> {
        let mut raw = match &self.config {
            Some(p) => RawSpec::load(p)?,
            None => RawSpec::default(),
        };
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{kv}`");
            };
            raw.set(k.trim(), v.trim());
        }
        let typed = [
            ("L", &self.l),
            ("A", &self.a),
            ("U", &self.u),
            ("phi", &self.phi),
            ("grid", &self.grid),
            ("t_grid", &self.t_grid),
            ("seed", &self.seed),
            ("sessions", &self.sessions),
            ("workers", &self.workers),
            ("mode", &self.mode),
            ("max_attempts", &self.max_attempts),
            ("max_truncated", &self.max_truncated),
            ("source", &self.source),
            ("curve", &self.curve),
            ("scale", &self.scale),
            ("p", &self.p),
            ("q", &self.q),
            ("per_hop_time", &self.per_hop_time),
        ];
        for (k, v) in typed {
            if let Some(v) = v {
                raw.set(k, v.clone());
            }
        }
        if self.simulate {
            raw.set("simulate", "true");
        }
        if self.base10 {
            raw.set("base10", "true");
        }
        Ok(raw)
    }
}

fn run(cli: Cli) -> Result<Vec<String>> {
    let (common, f): (&Common, fn(Resolver) -> Result<commands::Outcome>) = match &cli.command {
        Command::ComputeN(c) => (c, commands::compute_n),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Classify(c) => (c, commands::classify),
        Command::Compare(c) => (c, commands::compare),
        Command::Tandem(c) => (c, commands::tandem),
    };
    let outcome = f(Resolver::new(common.raw_spec()?))?;
    for p in output::emit(&outcome.report, common.out.as_ref(), common.format)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(outcome.failures)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in failures {
                eprintln!("{f}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
