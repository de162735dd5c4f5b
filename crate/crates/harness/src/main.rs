use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use sparsync::capacity::{async_capacity, dispersion_from};
use sparsync::expansion::{predict_full_sampling, predict_small_delay, predict_sparse_min_delay, RhoRegime};
use sparsync::scheme::Regime;
use sparsync::Dmc;
use sparsync_harness::config::{ExperimentConfig, RhoSpec};
use sparsync_harness::fit::second_order_fit;
use sparsync_harness::montecarlo::Setup;
use sparsync_harness::output::{dump_trials, read_rows, write_metadata, write_rows, Metadata};
use sparsync_harness::sweep::{run_grid, sweep};
use sparsync_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "sparsync", version, about = "Asynchronous sparse-sampling code simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every grid point of a config into one CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value = "rows.csv")]
        out: PathBuf,
        /// Write every trial as a JSON line.
        #[arg(long)]
        dump_trials: Option<PathBuf>,
        /// Run every message and report the worst (M <= 64).
        #[arg(long)]
        all_messages: bool,
    },
    /// Run a grid into DIR/rows.csv, resuming a previous partial run.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit ln M*(n) = c n - k n^e per (regime, rho) group of a sweep.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Asynchronous capacity, maximizer and dispersion.
    Capacity {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Second-order prediction of ln M*.
    Predict {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value = "full_sampling")]
        regime: String,
        /// Sampling rate `c`, `n^e` or `c*n^e`; exponents <= -1/2 select the slow regime.
        #[arg(long, default_value = "1")]
        rho: String,
        #[arg(long)]
        kappa: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, trials, out, dump_trials: dump, all_messages } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
                cfg.validate()?;
            }
            cfg.all_messages |= all_messages;
            let setup = Setup::load(&cfg)?;
            let mut dump = match dump {
                Some(p) => Some(BufWriter::new(File::create(&p).map_err(|e| HarnessError::io(&p, e))?)),
                None => None,
            };
            let (mut rows, mut times) = (Vec::new(), Vec::new());
            let mut start = Instant::now();
            run_grid(&cfg, &setup, |sc, row, records| {
                if let Some(d) = dump.as_mut() {
                    dump_trials(d, sc.index, records)?;
                }
                rows.push(row.clone());
                times.push(start.elapsed().as_secs_f64());
                start = Instant::now();
                Ok(())
            })?;
            if let Some(mut d) = dump {
                d.flush().map_err(|e| HarnessError::io("trial dump", e))?;
            }
            write_rows(&out, &rows)?;
            write_metadata(&out, &Metadata::new(&cfg, times))?;
            println!("{}", out.display());
        }
        Command::Sweep { grid, out } => {
            let cfg = ExperimentConfig::load(&grid)?;
            println!("{}", sweep(&cfg, &out)?.display());
        }
        Command::Fit { input, eps } => {
            let path = if input.is_dir() { input.join("rows.csv") } else { input.clone() };
            let rows = read_rows(&path)?;
            let mut groups: BTreeMap<(String, String), Vec<(usize, f64)>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.is_ok() && (r.eps - eps).abs() <= 1e-12 && r.ln_m_star.is_finite()) {
                groups.entry((r.regime.clone(), r.rho_spec.clone())).or_default().push((r.n, r.ln_m_star));
            }
            if groups.is_empty() {
                return Err(HarnessError::FitDiverged(format!("no rows with ln_m_star at eps = {eps}")));
            }
            let mut results = Vec::new();
            let mut last_err = None;
            for ((regime, rho), pts) in &groups {
                let entry = match second_order_fit(pts) {
                    Ok(f) => json!({
                        "regime": regime, "rho": rho, "points": f.points, "c_hat": f.c_hat, "k_hat": f.k_hat,
                        "exponent_hat": f.exponent_hat, "exponent_ci": [f.exponent_ci.0, f.exponent_ci.1], "rss": f.rss,
                    }),
                    Err(e) => {
                        let entry = json!({ "regime": regime, "rho": rho, "error": e.to_string() });
                        last_err = Some(e);
                        entry
                    }
                };
                results.push(entry);
            }
            if results.iter().all(|r| r.get("error").is_some()) {
                return Err(last_err.expect("groups is nonempty"));
            }
            let text = serde_json::to_string_pretty(&results)?;
            if input.is_dir() {
                let p = input.join("fit.json");
                std::fs::write(&p, &text).map_err(|e| HarnessError::io(&p, e))?;
            }
            println!("{text}");
        }
        Command::Capacity { channel, alpha, eps } => {
            let w = Dmc::from_file(&channel)?;
            let cap = async_capacity(&w, alpha)?;
            let disp = dispersion_from(&w, &cap, eps)?;
            let out = json!({
                "alpha": alpha, "c_alpha": cap.c_alpha, "p_star": cap.p_star.as_slice(), "constraint_value": cap.constraint_value,
                "active": cap.active, "kkt_residual": cap.kkt_residual, "v_min": disp.v_min, "v_max": disp.v_max, "v_eps": disp.v_eps,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Predict { channel, alpha, n, eps, regime, rho, kappa } => {
            let w = Dmc::from_file(&channel)?;
            let cap = async_capacity(&w, alpha)?;
            let disp = dispersion_from(&w, &cap, eps)?;
            let spec: RhoSpec = rho.parse()?;
            let r = spec.eval(n);
            let p = match regime.parse::<Regime>()? {
                Regime::FullSampling => predict_full_sampling(n, alpha, eps, &cap, &disp)?,
                Regime::SmallDelayMultiphase => predict_small_delay(n, alpha, eps, &cap, &disp)?,
                Regime::MinDelayMultiphase => {
                    let rr = if spec.exp <= -0.5 { RhoRegime::Slow { rho: r, kappa } } else { RhoRegime::Fast { rho: r } };
                    predict_sparse_min_delay(n, alpha, eps, rr, &cap, &disp)?
                }
            };
            let out = json!({
                "n": p.n, "alpha": p.alpha, "eps": p.eps, "regime": p.regime.as_str(), "rho": r, "ln_m": p.ln_m,
                "second_order_term": p.second_order_term, "band": p.band,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}
