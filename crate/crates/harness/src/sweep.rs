//! Running a config's grid, with checkpointing so an interrupted sweep resumes.

use std::fs::{File, OpenOptions};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::bisect::bisect_max_code_size;
use crate::config::{ExperimentConfig, Scenario};
use crate::error::{HarnessError, Result};
use crate::montecarlo::{build_params, simulate, Prepared, Setup, TrialRecord};
use crate::output::{csv_writer, write_metadata, Metadata, SweepRow};

/// Simulates one grid point, and bisects for `ln M*` when the config asks.
pub fn run_scenario(
    cfg: &ExperimentConfig,
    setup: &Setup,
    sc: &Scenario,
    trials: u64,
    all_messages: bool,
) -> Result<(SweepRow, Vec<TrialRecord>)> {
    let params = build_params(cfg, setup, sc, None)?;
    let prep = Prepared::new(cfg, params)?;
    let sim = simulate(cfg, setup, &prep, trials, all_messages)?;
    let mut row = SweepRow::from_simulation(cfg, sc, &prep.params, prep.delay, &sim);
    if cfg.bisect {
        let b = bisect_max_code_size(cfg, setup, sc, cfg.eps, cfg.bisect_trials.unwrap_or(trials))?;
        row.ln_m_star = b.ln_m_star;
        row.bisect_probes = b.probes.len();
    }
    Ok((row, sim.records))
}

/// Runs every grid point in order. Failures become marked rows.
pub fn run_grid(cfg: &ExperimentConfig, setup: &Setup, mut on_row: impl FnMut(&Scenario, &SweepRow, &[TrialRecord]) -> Result<()>) -> Result<()> {
    for sc in cfg.scenarios()? {
        let (row, records) = match run_scenario(cfg, setup, &sc, cfg.trials, cfg.all_messages) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("row {} (n = {}, {}) failed: {e}", sc.index, sc.n, sc.regime);
                (SweepRow::failed(cfg, &sc, &e), Vec::new())
            }
        };
        on_row(&sc, &row, &records)?;
    }
    Ok(())
}

/// Number of complete data rows already in `path`, after dropping a partial
/// trailing line. Creates the file with a header when missing.
fn prepare_checkpoint(path: &Path) -> Result<usize> {
    let header = {
        let mut w = csv_writer(Vec::new());
        w.write_record(SweepRow::header())?;
        w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?
    };
    if !path.exists() {
        std::fs::write(path, &header).map_err(|e| HarnessError::io(path, e))?;
        return Ok(0);
    }
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let keep = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(i) => i + 1,
        None => 0,
    };
    if keep < header.len() || bytes[..header.len()] != header[..] {
        return Err(HarnessError::Config(format!("{}: not a sweep file with the current header", path.display())));
    }
    if keep < bytes.len() {
        log::info!("dropping a partial trailing row from {}", path.display());
        let f = OpenOptions::new().write(true).open(path).map_err(|e| HarnessError::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| HarnessError::io(path, e))?;
    }
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(f));
    let mut rows = 0;
    for rec in reader.records() {
        SweepRow::from_record(&rec?)?;
        rows += 1;
    }
    Ok(rows)
}

/// Runs the grid into `out_dir/rows.csv`, skipping rows a previous run
/// completed. Rows are flushed one at a time, so the file is a valid prefix
/// of the final output at every point.
pub fn sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let path = out_dir.join("rows.csv");
    let done = prepare_checkpoint(&path)?;
    let scenarios = cfg.scenarios()?;
    if done > scenarios.len() {
        return Err(HarnessError::Config(format!("{} holds more rows than the grid", path.display())));
    }
    let mut times = vec![f64::NAN; done];
    if done < scenarios.len() {
        let setup = Setup::load(cfg)?;
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = csv_writer(file);
        for sc in &scenarios[done..] {
            let start = Instant::now();
            let row = match run_scenario(cfg, &setup, sc, cfg.trials, cfg.all_messages) {
                Ok((row, _)) => row,
                Err(e) => {
                    log::warn!("row {} (n = {}, {}) failed: {e}", sc.index, sc.n, sc.regime);
                    SweepRow::failed(cfg, sc, &e)
                }
            };
            w.write_record(row.to_record())?;
            w.flush().map_err(|e| HarnessError::io(&path, e))?;
            times.push(start.elapsed().as_secs_f64());
            log::info!("row {}/{} done", sc.index + 1, scenarios.len());
        }
    }
    write_metadata(&path, &Metadata::new(cfg, times))?;
    Ok(path)
}
