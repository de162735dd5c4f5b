//! Sweep rows, their CSV schema and the sidecar metadata.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sparsync::scheme::SchemeParams;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::{HarnessError, Result};
use crate::montecarlo::{EventStat, Simulation, TrialRecord, EVENTS};

/// One line of a sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `ok`, or `error: ...` for a row whose scheme or simulation failed.
    pub status: String,
    pub regime: String,
    pub n: usize,
    pub alpha: f64,
    pub eps: f64,
    pub rho_spec: String,
    pub rho: f64,
    pub a_window: u64,
    pub block_len: usize,
    pub ell: usize,
    pub ln_m: f64,
    pub m: u64,
    pub delay: u64,
    pub trials: u64,
    pub seed: u64,
    pub messages: String,
    pub events: [EventStat; 7],
    pub mean_delay: f64,
    pub mean_sampling_rate: f64,
    pub forced_rate: f64,
    pub tie_rate: f64,
    pub e1_not_e2: u64,
    pub rate_violations: u64,
    /// Largest `ln M` found feasible by bisection; `NaN` when not searched.
    pub ln_m_star: f64,
    pub bisect_probes: usize,
}

const NAN_EVENT: EventStat = EventStat { count: 0, p: f64::NAN, lo: f64::NAN, hi: f64::NAN };

impl SweepRow {
    pub fn header() -> Vec<String> {
        let mut h: Vec<String> = [
            "status", "regime", "n", "alpha", "eps", "rho_spec", "rho", "a_window", "block_len", "ell", "ln_m", "m", "delay",
            "trials", "seed", "messages",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for e in EVENTS {
            h.extend([format!("k_{e}"), format!("p_{e}"), format!("lo_{e}"), format!("hi_{e}")]);
        }
        h.extend(
            [
                "mean_delay", "mean_sampling_rate", "forced_rate", "tie_rate", "e1_not_e2", "rate_violations", "ln_m_star",
                "bisect_probes",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        h
    }

    pub fn from_simulation(cfg: &ExperimentConfig, sc: &Scenario, params: &SchemeParams, delay: u64, sim: &Simulation) -> Self {
        let s = &sim.summary;
        Self {
            status: "ok".into(),
            regime: sc.regime.to_string(),
            n: sc.n,
            alpha: cfg.alpha,
            eps: cfg.eps,
            rho_spec: sc.rho_label.clone(),
            rho: params.rho,
            a_window: params.a_window,
            block_len: params.block_len,
            ell: params.ell(),
            ln_m: params.ln_m,
            m: params.m_codewords.unwrap_or(0),
            delay,
            trials: s.trials,
            seed: cfg.seed,
            messages: sim.messages.clone(),
            events: s.events,
            mean_delay: s.mean_delay,
            mean_sampling_rate: s.mean_sampling_rate,
            forced_rate: s.forced_rate,
            tie_rate: s.tie_rate,
            e1_not_e2: s.e1_not_e2,
            rate_violations: s.rate_violations,
            ln_m_star: f64::NAN,
            bisect_probes: 0,
        }
    }

    /// A placeholder row recording why a grid point could not be simulated.
    pub fn failed(cfg: &ExperimentConfig, sc: &Scenario, err: &HarnessError) -> Self {
        let msg: String = err.to_string().chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect();
        Self {
            status: format!("error: {msg}"),
            regime: sc.regime.to_string(),
            n: sc.n,
            alpha: cfg.alpha,
            eps: cfg.eps,
            rho_spec: sc.rho_label.clone(),
            rho: sc.rho.eval(sc.n),
            a_window: 0,
            block_len: 0,
            ell: 0,
            ln_m: f64::NAN,
            m: 0,
            delay: 0,
            trials: 0,
            seed: cfg.seed,
            messages: String::new(),
            events: [NAN_EVENT; 7],
            mean_delay: f64::NAN,
            mean_sampling_rate: f64::NAN,
            forced_rate: f64::NAN,
            tie_rate: f64::NAN,
            e1_not_e2: 0,
            rate_violations: 0,
            ln_m_star: f64::NAN,
            bisect_probes: 0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn event(&self, name: &str) -> EventStat {
        self.events[EVENTS.iter().position(|e| *e == name).expect("unknown event name")]
    }

    /// Fields in header order; floats use the shortest round-trip form.
    pub fn to_record(&self) -> Vec<String> {
        let mut r = vec![
            self.status.clone(),
            self.regime.clone(),
            self.n.to_string(),
            self.alpha.to_string(),
            self.eps.to_string(),
            self.rho_spec.clone(),
            self.rho.to_string(),
            self.a_window.to_string(),
            self.block_len.to_string(),
            self.ell.to_string(),
            self.ln_m.to_string(),
            self.m.to_string(),
            self.delay.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
            self.messages.clone(),
        ];
        for e in &self.events {
            r.extend([e.count.to_string(), e.p.to_string(), e.lo.to_string(), e.hi.to_string()]);
        }
        r.extend([
            self.mean_delay.to_string(),
            self.mean_sampling_rate.to_string(),
            self.forced_rate.to_string(),
            self.tie_rate.to_string(),
            self.e1_not_e2.to_string(),
            self.rate_violations.to_string(),
            self.ln_m_star.to_string(),
            self.bisect_probes.to_string(),
        ]);
        r
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        let h = Self::header();
        if rec.len() != h.len() {
            return Err(HarnessError::Config(format!("row has {} fields, expected {}", rec.len(), h.len())));
        }
        let mut i = 0;
        let mut next = || {
            i += 1;
            (&h[i - 1], &rec[i - 1])
        };
        fn num<T: std::str::FromStr>((name, v): (&String, &str)) -> Result<T> {
            v.parse().map_err(|_| HarnessError::Config(format!("column {name}: cannot parse `{v}`")))
        }
        let status = next().1.to_string();
        let regime = next().1.to_string();
        let n = num(next())?;
        let alpha = num(next())?;
        let eps = num(next())?;
        let rho_spec = next().1.to_string();
        let rho = num(next())?;
        let a_window = num(next())?;
        let block_len = num(next())?;
        let ell = num(next())?;
        let ln_m = num(next())?;
        let m = num(next())?;
        let delay = num(next())?;
        let trials = num(next())?;
        let seed = num(next())?;
        let messages = next().1.to_string();
        let mut events = [NAN_EVENT; 7];
        for e in events.iter_mut() {
            *e = EventStat { count: num(next())?, p: num(next())?, lo: num(next())?, hi: num(next())? };
        }
        Ok(Self {
            status,
            regime,
            n,
            alpha,
            eps,
            rho_spec,
            rho,
            a_window,
            block_len,
            ell,
            ln_m,
            m,
            delay,
            trials,
            seed,
            messages,
            events,
            mean_delay: num(next())?,
            mean_sampling_rate: num(next())?,
            forced_rate: num(next())?,
            tie_rate: num(next())?,
            e1_not_e2: num(next())?,
            rate_violations: num(next())?,
            ln_m_star: num(next())?,
            bisect_probes: num(next())?,
        })
    }
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

/// Writes a complete CSV with header.
pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv_writer(BufWriter::new(file));
    w.write_record(SweepRow::header())?;
    for r in rows {
        w.write_record(r.to_record())?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// Reads a CSV written by [`write_rows`] or a sweep, checking the header.
pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SweepRow::header() {
        return Err(HarnessError::Config(format!("{}: unexpected CSV header", path.display())));
    }
    r.records().map(|rec| SweepRow::from_record(&rec?)).collect()
}

/// Sidecar metadata stored next to a CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    /// Wall-clock seconds per row; kept out of the CSV so it stays reproducible.
    pub row_wall_time_s: Vec<f64>,
}

impl<'a> Metadata<'a> {
    pub fn new(config: &'a ExperimentConfig, row_wall_time_s: Vec<f64>) -> Self {
        Self { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), seed: config.seed, config, row_wall_time_s }
    }
}

/// `rows.csv` -> `rows.meta.json`.
pub fn meta_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("meta.json")
}

pub fn write_metadata(csv: &Path, meta: &Metadata<'_>) -> Result<()> {
    let path = meta_path(csv);
    let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), meta)?;
    Ok(())
}

/// Appends trial records as JSON lines.
pub fn dump_trials(out: &mut impl Write, scenario: usize, records: &[TrialRecord]) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        scenario: usize,
        #[serde(flatten)]
        record: &'a TrialRecord,
    }
    for record in records {
        serde_json::to_writer(&mut *out, &Line { scenario, record })?;
        out.write_all(b"\n").map_err(|e| HarnessError::io("trial dump", e))?;
    }
    Ok(())
}
