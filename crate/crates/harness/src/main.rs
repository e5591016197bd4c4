// Copyright 2026 The nzdd Authors
// SPDX-License-Identifier: Apache-2.0

use clap::{Parser, Subcommand};
use nzdd_harness::commands::{self, Context};
use nzdd_harness::config::{resolve_seed, HarnessConfig, KEYS_HELP};
use nzdd_harness::HarnessError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Full-permutation dynamical decoupling simulator for exchange-only qubits.
#[derive(Parser, Debug)]
#[command(name = "nzdd", version, after_help = KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (key = value with [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides run.seed and NZ_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scale shots and grids down tenfold.
    #[arg(long, global = true)]
    fast: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Calibrate noise amplitudes to the T2* and Rabi targets.
    Calibrate,
    /// Decay curves and fits for the configured sequence families.
    Decay,
    /// NZ1y idle-time sweep with filter-function predictions.
    SweepIdle,
    /// Dump filter functions on a frequency grid.
    Ff,
    /// Filter-function error prediction at the configured timing.
    Predict,
}

fn load(cli: &Cli) -> Result<Context, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            HarnessConfig::parse(&text)?
        }
        None => HarnessConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.fast {
        cfg = cfg.fast();
    }
    let env = std::env::var("NZ_SEED").ok();
    let seed = resolve_seed(cli.seed, cfg.seed, env.as_deref())?;
    cfg.seed = Some(seed);
    Context::new(cfg, seed)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let ctx = load(cli)?;
    match cli.command {
        Command::Calibrate => {
            let r = commands::calibrate(&ctx)?;
            println!(
                "T2* = {:.3} us (target {:.3}) at magnetic amplitude {:.4e}",
                r.magnetic.achieved * 1e6,
                r.magnetic.target * 1e6,
                r.magnetic.amplitude
            );
            println!(
                "Rabi 1/e = {:.2} oscillations (target {:.2}) at exchange amplitude {:.4e}",
                r.exchange.achieved, r.exchange.target, r.exchange.amplitude
            );
        }
        Command::Decay => {
            for s in commands::decay(&ctx)? {
                let a = &s.analysis;
                println!(
                    "{:5} eps = {:.3e} ± {:.1e}  T2 = {:.1} us  leak/pulse = {:.2e} ± {:.1e}",
                    s.family.name(),
                    a.eps(),
                    a.eps_stderr(),
                    a.t2() * 1e6,
                    a.leak_per_pulse(),
                    a.leak_stderr()
                );
            }
        }
        Command::SweepIdle => {
            for r in commands::sweep_idle(&ctx)? {
                println!(
                    "t_idle = {:5.1} ns  eps_mc = {:.3e}  eps_ff = {:.3e}  leak_mc = {:.2e}  leak_ff = {:.2e}  T2 = {:.1} us",
                    r.t_idle * 1e9,
                    r.eps_mc,
                    r.eps_ff,
                    r.leak_mc,
                    r.leak_ff,
                    r.t2 * 1e6
                );
            }
        }
        Command::Ff => {
            let n = commands::ff(&ctx)?.len();
            println!("wrote {n} filter-function curves");
        }
        Command::Predict => {
            let p = commands::predict(&ctx)?;
            println!(
                "eps/pulse = {:.3e}  leak/pulse = {:.3e}  (quadrature error {:.1e})",
                p.eps_per_pulse(),
                p.leak_per_pulse(),
                p.quad_error
            );
        }
    }
    println!("outputs in {}", ctx.sink.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
