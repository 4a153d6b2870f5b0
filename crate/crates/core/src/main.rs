use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uan_relay::joint_opt::Verdict;
use uan_relay::scenario::{self, RateTarget, ScenarioConfig, Scheme, Table, FULL_SCALE_BANDS};

/// Outage-minimizing power allocation and relay placement for a two-hop
/// underwater acoustic link.
#[derive(Debug, Parser)]
#[command(name = "uan-relay", version)]
struct Cli {
    /// JSON scenario file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    scheme: Option<Scheme>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per estimate.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Number of sub-bands.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// CSV destination (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the full-scale sub-band count unless --n is given.
    #[arg(long, global = true)]
    full: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scheme; writes the per-band allocation table.
    Optimize,
    /// Mean rate and outage over a budget sweep, configured grid vs a finer one.
    Simulate {
        #[arg(long, value_delimiter = ',', default_value = "76,77,78,79,80,81,82,83,84,85")]
        budgets_db: Vec<f64>,
        /// Reference sub-band count (default 8n).
        #[arg(long)]
        n_ref: Option<usize>,
    },
    /// Outage against relay position.
    SweepD {
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Improvement of each scheme over the fixed uniform benchmark.
    Compare {
        /// Gain ratios `c_SR:c_RD`.
        #[arg(long, value_delimiter = ',', default_value = "1:1,2:1,4:1,6:1,1:4", value_parser = parse_ratio)]
        ratios: Vec<[f64; 2]>,
        /// Outage thresholds in bits/s, or `median` for the benchmark median rate.
        #[arg(long, value_delimiter = ',', default_value = "median")]
        rates: Vec<RateTarget>,
    },
    /// Bordered-Hessian pseudoconcavity check at random points.
    VerifyHessian {
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
}

fn parse_ratio(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected c_SR:c_RD, got {s:?}"))?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([a, b])
}

fn config(cli: &Cli) -> uan_relay::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if cli.full {
        cfg.n = FULL_SCALE_BANDS;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(s) = cli.scheme {
        cfg.scheme = s;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_table(table: &Table, out: &Option<PathBuf>) -> uan_relay::Result<()> {
    match out {
        Some(path) => scenario::emit_csv(table, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write_to(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> uan_relay::Result<bool> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Optimize => {
            let report = scenario::run_scheme(&cfg)?;
            write_table(&report.band_table(), &cli.out)?;
            if let Some(path) = &cli.out {
                std::fs::write(path.with_extension("json"), report.to_json()?)?;
            }
            eprintln!(
                "{}: d_sr = {:.4} km, outage = {:.5} ± {:.5}, mean rate = {:.1} bit/s ({:.2?})",
                report.scheme,
                report.d_sr,
                report.outage.p_hat,
                report.outage.ci95_halfwidth,
                report.mean_rate_bps,
                report.elapsed
            );
            Ok(true)
        }
        Command::Simulate { budgets_db, n_ref } => {
            let table = scenario::simulate_budgets(&cfg, budgets_db, n_ref.unwrap_or(8 * cfg.n))?;
            write_table(&table, &cli.out)?;
            Ok(true)
        }
        Command::SweepD { points } => {
            let table = scenario::sweep_placement(&cfg, &scenario::placement_grid(&cfg.env, *points))?;
            write_table(&table, &cli.out)?;
            Ok(true)
        }
        Command::Compare { ratios, rates } => {
            let table = scenario::compare_schemes(&cfg, ratios, rates)?;
            write_table(&table, &cli.out)?;
            Ok(true)
        }
        Command::VerifyHessian { points } => {
            let (table, certs) = scenario::certificate_table(&cfg, *points)?;
            write_table(&table, &cli.out)?;
            let count = |v: Verdict| certs.iter().filter(|c| c.verdict == v).count();
            let (pass, fail, na, unsure) = (
                count(Verdict::Pass),
                count(Verdict::Fail),
                count(Verdict::NotApplicable),
                count(Verdict::Inconclusive),
            );
            eprintln!("{pass} pass, {fail} fail, {unsure} inconclusive, {na} not applicable of {}", certs.len());
            Ok(fail == 0 && unsure == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
