use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use gridfreq::output::{write_events_csv, write_metrics_csv, write_trace_csv};
use gridfreq::scenario::load_scenario;
use gridfreq::sweep::{load_sweep, run_sweep_with_jobs};
use gridfreq::tactics::{resolve_tactics, run_compare};
use gridfreq::{run_scenario, Trace};

#[derive(Parser)]
#[command(name = "gridfreq", version, about = "Primary frequency response simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario (file path or bundled name such as `ercot80`).
    Simulate {
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the integration step, s.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the simulated horizon, s.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Run the baseline and a list of tactics from the scenario's library.
    Compare {
        config: String,
        /// Comma-separated tactic names.
        #[arg(long, value_delimiter = ',', required = true)]
        tactics: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a full-factorial sweep file.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn write_run(dir: &Path, suffix: &str, trace: &Trace) -> Result<()> {
    write_trace_csv(trace, &dir.join(format!("trace{suffix}.csv")))?;
    write_events_csv(trace, &dir.join(format!("events{suffix}.csv")))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            dt,
            horizon,
        } => {
            let mut cfg = load_scenario(&config)?;
            if let Some(dt) = dt {
                cfg.sim.dt_s = dt;
            }
            if let Some(h) = horizon {
                cfg.sim.horizon_s = h;
            }
            let run = run_scenario(&cfg)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_run(&out, "", &run.trace)?;
            let label = if cfg.name.is_empty() { "scenario".to_string() } else { cfg.name.clone() };
            write_metrics_csv(&[(label, run.metrics)], &out.join("metrics.csv"))?;
            let m = run.metrics;
            println!(
                "nadir {:.4} Hz at {:.3} s, settling {:.4} Hz, rocof {:.4} Hz/s, t_ufls {}",
                m.nadir_hz,
                m.nadir_time_s,
                m.settling_hz,
                m.rocof_hz_per_s,
                fmt_opt(m.ufls_time_s)
            );
        }
        Command::Compare {
            config,
            tactics,
            out,
        } => {
            let cfg = load_scenario(&config)?;
            let specs = resolve_tactics(&cfg, &tactics)?;
            let rows = run_compare(&cfg, &specs)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for row in &rows {
                write_run(&out, &format!("_{}", row.tactic), &row.run.trace)?;
            }
            let table: Vec<_> = rows.iter().map(|r| (r.tactic.clone(), r.metrics)).collect();
            write_metrics_csv(&table, &out.join("comparison.csv"))?;
            println!("{:<16} {:>10} {:>9} {:>10} {:>10} {:>10} {:>8}", "tactic", "nadir_hz", "t_nadir", "settle_hz", "FR", "FR_N", "t_ufls");
            for r in &rows {
                let m = &r.metrics;
                println!(
                    "{:<16} {:>10.4} {:>9.3} {:>10.4} {:>10} {:>10} {:>8}",
                    r.tactic,
                    m.nadir_hz,
                    m.nadir_time_s,
                    m.settling_hz,
                    fmt_opt(m.fr_mw_per_0p1hz),
                    fmt_opt(m.frn_mw_per_0p1hz),
                    fmt_opt(m.ufls_time_s)
                );
            }
        }
        Command::Sweep { spec, out, jobs } => {
            let (sweep, base) = load_sweep(&spec)?;
            let table = run_sweep_with_jobs(&base, &sweep, jobs)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            table.write_csv(&out.join("sweep.csv"))?;
            let failed = table.cells.iter().filter(|c| c.error.is_some()).count();
            println!("{} cells, {} failed", table.cells.len(), failed);
            if failed > 0 {
                anyhow::bail!("{failed} of {} sweep cells failed (see the error column)", table.cells.len());
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
