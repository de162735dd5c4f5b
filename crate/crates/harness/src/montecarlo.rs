//! Scheme construction for one grid point and the parallel trial loop.

use rayon::prelude::*;
use serde::Serialize;
use sparsync::capacity::{async_capacity, dispersion_from, CapacityResult, DispersionResult};
use sparsync::decoders::{classify_outcome, DecodeOptions, Decoder, Events};
use sparsync::rng::split_seed;
use sparsync::scheme::{
    build_full_sampling_params, build_min_delay_params, build_small_delay_params, generate_codebook, Codebook, CodeSize,
    FullSamplingConfig, MultiphaseConfig, Regime, SchemeParams,
};
use sparsync::sim::{OutputSampler, StartPolicy, Trial};
use sparsync::Dmc;

use crate::config::{DelaySpec, ExperimentConfig, LnMSpec, MessageSpec, Scenario};
use crate::error::{HarnessError, Result};
use crate::stats::{wilson, Z95};

/// Channel-level quantities shared by every row of a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub w: Dmc,
    pub cap: CapacityResult,
    /// `None` when the dispersion could not be evaluated.
    pub disp: Option<DispersionResult>,
}

impl Setup {
    pub fn new(w: Dmc, alpha: f64, eps: f64) -> Result<Self> {
        let cap = async_capacity(&w, alpha)?;
        let disp = dispersion_from(&w, &cap, eps).ok();
        Ok(Self { w, cap, disp })
    }

    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        Self::new(Dmc::from_file(cfg.channel_path())?, cfg.alpha, cfg.eps)
    }

    fn dispersion(&self) -> Result<&DispersionResult> {
        self.disp
            .as_ref()
            .ok_or_else(|| HarnessError::Config("dispersion unavailable; give ln_m explicitly".into()))
    }
}

/// Scheme constants for a grid point; `ln_m` overrides the configured code size.
pub fn build_params(cfg: &ExperimentConfig, setup: &Setup, sc: &Scenario, ln_m: Option<f64>) -> Result<SchemeParams> {
    let ln_m = ln_m.or(match cfg.ln_m {
        LnMSpec::Value(v) => Some(v),
        LnMSpec::Named(_) => None,
    });
    if sc.regime == Regime::FullSampling {
        let fc = FullSamplingConfig {
            delta1: cfg.delta1,
            berry_esseen: cfg.berry_esseen,
            ln_m,
            max_window: cfg.max_window,
            ..FullSamplingConfig::new(sc.n, cfg.alpha, cfg.eps)
        };
        let fallback;
        let disp = match setup.disp.as_ref() {
            Some(d) => d,
            None if ln_m.is_some() => {
                fallback = DispersionResult { v_min: f64::NAN, v_max: f64::NAN, v_eps: f64::NAN, pi_alpha_samples: Vec::new() };
                &fallback
            }
            None => setup.dispersion()?,
        };
        return Ok(build_full_sampling_params(&setup.w, &fc, &setup.cap, disp)?);
    }
    let mut mc = MultiphaseConfig::new(sc.n, cfg.alpha, sc.rho.eval(sc.n), setup.cap.p_star.clone(), 0.0);
    mc.delta = cfg.delta;
    mc.delta1 = cfg.delta1;
    mc.delta2 = cfg.delta2;
    mc.c_fraction = cfg.c_fraction;
    mc.max_window = cfg.max_window;
    mc.gamma_rule = cfg.gamma_rule()?;
    mc.block_rule = cfg.block_rule()?;
    mc.code_size = match ln_m {
        Some(v) => CodeSize::LnM(v),
        None => CodeSize::Normal {
            eps: cfg.eps,
            c_alpha: setup.cap.c_alpha,
            v_eps: setup.dispersion()?.v_eps,
            berry_esseen: cfg.berry_esseen,
        },
    };
    Ok(match sc.regime {
        Regime::SmallDelayMultiphase => build_small_delay_params(&setup.w, &mc)?,
        _ => build_min_delay_params(&setup.w, &mc)?,
    })
}

pub fn delay_bound(cfg: &ExperimentConfig, params: &SchemeParams) -> u64 {
    match &cfg.delay {
        DelaySpec::Count(d) => *d,
        DelaySpec::Named(s) if s == "n" => params.n as u64,
        DelaySpec::Named(s) if s == "n+block" => (params.n + params.block_len) as u64,
        DelaySpec::Named(_) => params.delay_bound as u64,
    }
}

/// A scheme with its codebook, ready to simulate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub params: SchemeParams,
    pub codebook: Codebook,
    pub delay: u64,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig, params: SchemeParams) -> Result<Self> {
        let m = params.m_codewords.ok_or_else(|| {
            HarnessError::Config(format!("ln M = {} is too large to simulate", params.ln_m))
        })?;
        let codebook = generate_codebook(&params.p, params.n, m, cfg.composition()?, cfg.seed, cfg.codebook_cap)?;
        let delay = delay_bound(cfg, &params);
        Ok(Self { params, codebook, delay })
    }
}

/// The error event that defines a code's error probability under each scheme.
pub fn target_is_e1(regime: Regime) -> bool {
    regime == Regime::SmallDelayMultiphase
}

/// One simulated transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub index: u64,
    pub seed: u64,
    pub nu: u64,
    pub sigma: u64,
    pub message: usize,
    pub tau: u64,
    pub decoded: usize,
    pub samples: u64,
    pub forced_random: bool,
    pub tie_broken: bool,
    pub e_i: bool,
    pub e_ii: bool,
    pub e_iii: bool,
    pub e_iv: bool,
    pub e_v: bool,
    pub e1: bool,
    pub e2: bool,
}

impl TrialRecord {
    pub fn delay(&self) -> i64 {
        self.tau as i64 - self.nu as i64 + 1
    }

    pub fn target(&self, regime: Regime) -> bool {
        if target_is_e1(regime) {
            self.e1
        } else {
            self.e2
        }
    }
}

/// Runs `trials` transmissions with seeds `split_seed(root, i)`. Records come
/// back in trial order regardless of scheduling.
pub fn run_trials(
    prep: &Prepared,
    w: &Dmc,
    opts: DecodeOptions,
    trials: u64,
    root_seed: u64,
    message: Option<usize>,
) -> Result<Vec<TrialRecord>> {
    let params = &prep.params;
    if let Some(m) = message {
        if m >= prep.codebook.len() {
            return Err(HarnessError::Config(format!("message {m} out of range for M = {}", prep.codebook.len())));
        }
    }
    let sampler = OutputSampler::new(w);
    let decoder = Decoder::new(params, &prep.codebook, w, opts)?;
    let policy = match params.regime {
        Regime::SmallDelayMultiphase => StartPolicy::BlockAligned,
        _ => StartPolicy::Immediate,
    };
    (0..trials)
        .into_par_iter()
        .map(|index| {
            let seed = split_seed(root_seed, index);
            let mut trial = Trial::new(params, &prep.codebook, &sampler, policy, seed);
            if let Some(m) = message {
                trial = Trial::with_arrival(params, &prep.codebook, &sampler, policy, seed, trial.nu, m);
            }
            let r = decoder.decode(&mut trial)?;
            let Events { e_i, e_ii, e_iii, e_iv, e_v, e1, e2 } = classify_outcome(&r, &trial, params, prep.delay, params.rho);
            Ok(TrialRecord {
                index,
                seed,
                nu: trial.nu,
                sigma: trial.sigma,
                message: trial.message,
                tau: r.tau,
                decoded: r.decoded,
                samples: r.samples_taken,
                forced_random: r.forced_random,
                tie_broken: r.tie_broken,
                e_i,
                e_ii,
                e_iii,
                e_iv,
                e_v,
                e1,
                e2,
            })
        })
        .collect()
}

/// Names of the reported events, in column order.
pub const EVENTS: [&str; 7] = ["e_i", "e_ii", "e_iii", "e_iv", "e_v", "e1", "e2"];

/// Frequency of one event with its Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStat {
    pub count: u64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

impl EventStat {
    pub fn new(count: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(count, trials, Z95);
        Self { count, p: count as f64 / trials as f64, lo, hi }
    }
}

/// Aggregates of a batch of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub trials: u64,
    pub events: [EventStat; 7],
    pub mean_delay: f64,
    pub mean_sampling_rate: f64,
    pub forced_rate: f64,
    pub tie_rate: f64,
    /// Trials labelled `E1` but not `E2`; only counted when `d >= n`.
    pub e1_not_e2: u64,
    /// Trials stopping inside the codeword span, not labelled `E_III`, whose
    /// sampling rate exceeds `rho`.
    pub rate_violations: u64,
}

impl Summary {
    pub fn from_records(records: &[TrialRecord], params: &SchemeParams, delay: u64) -> Self {
        let t = records.len() as u64;
        let count = |f: fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
        let counts = [
            count(|r| r.e_i),
            count(|r| r.e_ii),
            count(|r| r.e_iii),
            count(|r| r.e_iv),
            count(|r| r.e_v),
            count(|r| r.e1),
            count(|r| r.e2),
        ];
        let tf = t.max(1) as f64;
        let e1_not_e2 = if delay >= params.n as u64 { count(|r| r.e1 && !r.e2) } else { 0 };
        let rate_violations = records
            .iter()
            .filter(|r| !r.e_i && !r.e_v && !r.e_iii && r.samples as f64 > params.rho * r.tau as f64)
            .count() as u64;
        Self {
            trials: t,
            events: counts.map(|c| EventStat::new(c, t)),
            mean_delay: records.iter().map(|r| r.delay() as f64).sum::<f64>() / tf,
            mean_sampling_rate: records.iter().map(|r| r.samples as f64 / r.tau as f64).sum::<f64>() / tf,
            forced_rate: count(|r| r.forced_random) as f64 / tf,
            tie_rate: count(|r| r.tie_broken) as f64 / tf,
            e1_not_e2,
            rate_violations,
        }
    }

    pub fn event(&self, name: &str) -> EventStat {
        let i = EVENTS.iter().position(|e| *e == name).expect("unknown event name");
        self.events[i]
    }

    /// The statistic of the scheme's error event.
    pub fn target(&self, regime: Regime) -> EventStat {
        self.event(if target_is_e1(regime) { "e1" } else { "e2" })
    }
}

/// Result of simulating one grid point.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub summary: Summary,
    /// `"random"`, `"fixed:m"` or `"worst:m"`.
    pub messages: String,
    pub records: Vec<TrialRecord>,
}

/// Simulates a prepared scheme under the config's message rule. With
/// `all_messages` every message gets `trials` trials and the message with the
/// most error events is reported.
pub fn simulate(cfg: &ExperimentConfig, setup: &Setup, prep: &Prepared, trials: u64, all_messages: bool) -> Result<Simulation> {
    let opts = DecodeOptions { alignment: cfg.alignment()?, ..Default::default() };
    let regime = prep.params.regime;
    if all_messages {
        let m = prep.codebook.len();
        if m > 64 {
            return Err(HarnessError::Config(format!("all-messages mode needs M <= 64, got {m}")));
        }
        let mut worst: Option<(usize, Summary, Vec<TrialRecord>)> = None;
        let (mut e1_not_e2, mut rate_violations) = (0, 0);
        for msg in 0..m {
            let records = run_trials(prep, &setup.w, opts, trials, cfg.seed, Some(msg))?;
            let s = Summary::from_records(&records, &prep.params, prep.delay);
            e1_not_e2 += s.e1_not_e2;
            rate_violations += s.rate_violations;
            if worst.as_ref().is_none_or(|(_, b, _)| s.target(regime).count > b.target(regime).count) {
                worst = Some((msg, s, records));
            }
        }
        let (msg, mut summary, records) = worst.expect("codebook is nonempty");
        summary.e1_not_e2 = e1_not_e2;
        summary.rate_violations = rate_violations;
        return Ok(Simulation { summary, messages: format!("worst:{msg}"), records });
    }
    let (message, label) = match cfg.message {
        MessageSpec::Fixed(m) => (Some(m), format!("fixed:{m}")),
        MessageSpec::Named(_) => (None, "random".to_string()),
    };
    let records = run_trials(prep, &setup.w, opts, trials, cfg.seed, message)?;
    let summary = Summary::from_records(&records, &prep.params, prep.delay);
    Ok(Simulation { summary, messages: label, records })
}
