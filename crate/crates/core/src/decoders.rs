//! Sequential receivers: the multiphase cascade decoders and the
//! full-sampling sliding-window decoder.
//!
//! Times are one-based. A block-based decoder samples contiguously from the
//! start of a block; after a failed phase (or a final phase with no accepted
//! window) it resumes at the first block start after its last sample. In the
//! final phase, every length-`L` window of the block's samples is tested as
//! soon as its last sample arrives, so the earliest qualifying window wins.

use rand::Rng;

use crate::dmc::{Dmc, LlrState, LogLikelihoods};
use crate::error::{Error, Result};
use crate::rng::{stream, DOMAIN_DECODER};
use crate::scheme::{Codebook, Regime, SchemeParams};
use crate::sim::Trial;

/// Exact refresh period of the sliding detection statistic.
pub const REFRESH_PERIOD: u64 = 1 << 16;

/// Relative distance to a threshold below which a running sum is recomputed.
const NEAR: f64 = 1e-9;

/// Rounding margin around a threshold; zero for infinite thresholds.
fn near(threshold: f64) -> f64 {
    if threshold.is_finite() {
        NEAR * threshold.abs().max(1.0)
    } else {
        0.0
    }
}

/// Which codeword symbols a length-`(n - Delta(n))` window is matched against
/// in the minimum-delay decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// The last `n - Delta(n)` symbols; the window ends with the codeword.
    #[default]
    Suffix,
    /// The first `n - Delta(n)` symbols; the window starts with the codeword.
    Prefix,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DecodeOptions {
    pub record_times: bool,
    pub record_trace: bool,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub tau: u64,
    pub samples_taken: u64,
    pub sampling_times: Option<Vec<u64>>,
    /// Zero-based message estimate.
    pub decoded: usize,
    /// No acceptance by the deadline; `decoded` is uniform.
    pub forced_random: bool,
    /// Several codewords cleared the threshold in the accepted window.
    pub tie_broken: bool,
    /// Deepest phase reached in each visited block (1-based; 0 if none).
    pub phase_trace: Option<Vec<u8>>,
}

/// Decoder bound to one scheme instance.
pub struct Decoder<'a> {
    params: &'a SchemeParams,
    codebook: &'a Codebook,
    ll: LogLikelihoods,
    opts: DecodeOptions,
}

struct Record {
    count: u64,
    last: u64,
    times: Option<Vec<u64>>,
}

impl Record {
    fn new(keep: bool) -> Self {
        Self { count: 0, last: 0, times: keep.then(Vec::new) }
    }

    fn take(&mut self, trial: &mut Trial<'_>, t: u64) -> Result<usize> {
        debug_assert!(t > self.last);
        self.count += 1;
        self.last = t;
        if let Some(v) = self.times.as_mut() {
            v.push(t);
        }
        trial.sample_at(t)
    }
}

impl<'a> Decoder<'a> {
    pub fn new(params: &'a SchemeParams, codebook: &'a Codebook, w: &Dmc, opts: DecodeOptions) -> Result<Self> {
        if codebook.n() != params.n {
            return Err(Error::LengthMismatch { left: codebook.n(), right: params.n });
        }
        Ok(Self { params, codebook, ll: LogLikelihoods::new(&params.p, w)?, opts })
    }

    pub fn params(&self) -> &SchemeParams {
        self.params
    }

    pub fn decode(&self, trial: &mut Trial<'_>) -> Result<DecodeResult> {
        match self.params.regime {
            Regime::FullSampling => self.sliding(trial),
            _ => self.multiphase(trial),
        }
    }

    /// Information densities of every codeword against `ys`, placed at
    /// codeword offset `offset`; returns the accepted message, if any.
    ///
    /// Scoring stops early once even the largest per-symbol density on the
    /// remaining symbols cannot lift the sum to `gamma` (with a margin, so
    /// the decision equals that of the full sum).
    fn codeword_test(&self, ys: &[usize], offset: usize, seed: u64, tau: u64) -> Option<(usize, bool)> {
        let gamma = self.params.gamma;
        let margin = near(gamma);
        let cap = self.ll.max_info.max(0.0);
        let mut hits = Vec::new();
        for m in 0..self.codebook.len() {
            let cw = &self.codebook.codeword(m)[offset..offset + ys.len()];
            let mut score = 0.0;
            let mut alive = true;
            for (j, (&x, &y)) in cw.iter().zip(ys).enumerate() {
                score += self.ll.info[x as usize][y];
                if j % 16 == 15 {
                    let best = score + (ys.len() - j - 1) as f64 * cap;
                    if best < gamma - margin {
                        alive = false;
                        break;
                    }
                }
            }
            if alive && score >= gamma {
                hits.push(m);
            }
        }
        match hits.len() {
            0 => None,
            1 => Some((hits[0], false)),
            k => Some((hits[stream(seed, DOMAIN_DECODER, tau).random_range(0..k)], true)),
        }
    }

    /// `r >= beta` for the window `ys`, using the running sum unless it is
    /// too close to the threshold to trust its rounding.
    fn detects(&self, running: &LlrState, ys: &[usize], beta: f64) -> bool {
        let fast = running.accumulated();
        if fast.is_finite() && (fast - beta).abs() <= near(beta) {
            LlrState::from_increments(ys.iter().map(|&y| self.ll.noise[y])).accumulated() >= beta
        } else {
            fast >= beta
        }
    }

    fn finish(&self, rec: Record, tau: u64, decoded: usize, tie: bool, trace: Option<Vec<u8>>) -> DecodeResult {
        DecodeResult {
            tau,
            samples_taken: rec.count,
            sampling_times: rec.times,
            decoded,
            forced_random: false,
            tie_broken: tie,
            phase_trace: trace,
        }
    }

    fn deadline(&self, trial: &mut Trial<'_>, mut rec: Record, trace: Option<Vec<u8>>) -> Result<DecodeResult> {
        let end = trial.horizon();
        if rec.last < end {
            rec.take(trial, end)?;
        }
        let decoded = stream(trial.seed, DOMAIN_DECODER, end).random_range(0..self.codebook.len());
        let mut out = self.finish(rec, end, decoded, false, trace);
        out.forced_random = true;
        Ok(out)
    }

    fn multiphase(&self, trial: &mut Trial<'_>) -> Result<DecodeResult> {
        let p = self.params;
        let small = p.regime == Regime::SmallDelayMultiphase;
        let block = p.block_len as u64;
        let first = if small { block } else { 1 };
        let end = trial.horizon();
        let win = p.window_len;
        let offset = if !small && self.opts.alignment == Alignment::Suffix { p.block_len } else { 0 };
        let ell = p.ladder.len();
        let beta_last = p.beta[ell - 1];

        let mut rec = Record::new(self.opts.record_times);
        let mut trace = self.opts.record_trace.then(Vec::new);
        let mut ys: Vec<usize> = Vec::with_capacity(p.ladder.iter().sum());
        let mut start = first;
        while start <= p.a_window {
            ys.clear();
            let mut t = start;
            let mut deepest = 0u8;
            let mut passed = true;
            for i in 0..ell - 1 {
                let mut r = LlrState::new();
                for _ in 0..p.ladder[i] {
                    if t > end {
                        return self.deadline(trial, rec, trace);
                    }
                    let y = rec.take(trial, t)?;
                    ys.push(y);
                    r.push(self.ll.noise[y]);
                    t += 1;
                }
                deepest = i as u8 + 1;
                if r.accumulated() < p.beta[i] {
                    passed = false;
                    break;
                }
            }
            if passed {
                deepest = ell as u8;
                let mut r = LlrState::from_increments(ys[ys.len().saturating_sub(win)..].iter().map(|&y| self.ll.noise[y]));
                for _ in 0..p.n {
                    if t > end {
                        return self.deadline(trial, rec, trace);
                    }
                    let y = rec.take(trial, t)?;
                    ys.push(y);
                    r.push(self.ll.noise[y]);
                    if r.len() > win {
                        r.pop(self.ll.noise[ys[ys.len() - 1 - win]]);
                    }
                    if ys.len() >= win {
                        let window = &ys[ys.len() - win..];
                        if self.detects(&r, window, beta_last) {
                            if let Some((m, tie)) = self.codeword_test(window, offset, trial.seed, t) {
                                if let Some(v) = trace.as_mut() {
                                    v.push(deepest);
                                }
                                return Ok(self.finish(rec, t, m, tie, trace));
                            }
                        }
                    }
                    t += 1;
                }
            }
            if let Some(v) = trace.as_mut() {
                v.push(deepest);
            }
            let last = t - 1;
            start = first + (last + 1 - first).div_ceil(block) * block;
        }
        self.deadline(trial, rec, trace)
    }

    fn sliding(&self, trial: &mut Trial<'_>) -> Result<DecodeResult> {
        let p = self.params;
        let end = trial.horizon();
        let mut rec = Record::new(self.opts.record_times);
        let mut win = SlidingLlr::new(p.n, self.ll.noise.clone());
        let mut window = Vec::with_capacity(p.n);
        for t in 1..=end {
            let y = rec.take(trial, t)?;
            win.push(y);
            if win.is_full() && win.value() >= p.beta[0] - near(p.beta[0]) {
                window.clear();
                window.extend(win.symbols());
                if !self.detects(win.state(), &window, p.beta[0]) {
                    continue;
                }
                if let Some((m, tie)) = self.codeword_test(&window, 0, trial.seed, t) {
                    return Ok(self.finish(rec, t, m, tie, None));
                }
            }
        }
        self.deadline(trial, rec, None)
    }
}

/// Detection statistic over the last `n` symbols, updated by adding the
/// newest increment and removing the oldest; recomputed exactly every
/// [`REFRESH_PERIOD`] pushes.
#[derive(Debug, Clone)]
pub struct SlidingLlr {
    ring: Vec<usize>,
    head: usize,
    state: LlrState,
    pushes: u64,
    increments: Vec<f64>,
}

impl SlidingLlr {
    /// `increments[y]` is the per-symbol statistic of output `y`.
    pub fn new(n: usize, increments: Vec<f64>) -> Self {
        Self { ring: vec![0; n], head: 0, state: LlrState::new(), pushes: 0, increments }
    }

    pub fn push(&mut self, y: usize) {
        if self.state.len() == self.ring.len() {
            self.state.pop(self.increments[self.ring[self.head]]);
        }
        self.ring[self.head] = y;
        self.head = (self.head + 1) % self.ring.len();
        self.state.push(self.increments[y]);
        self.pushes += 1;
        if self.pushes % REFRESH_PERIOD == 0 {
            self.state = LlrState::from_increments(self.symbols().map(|y| self.increments[y]));
        }
    }

    pub fn is_full(&self) -> bool {
        self.state.len() == self.ring.len()
    }

    pub fn value(&self) -> f64 {
        self.state.accumulated()
    }

    pub fn state(&self) -> &LlrState {
        &self.state
    }

    /// Symbols currently in the window, oldest first.
    pub fn symbols(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.ring.len();
        let len = self.state.len();
        (0..len).map(move |k| self.ring[(self.head + n - len + k) % n])
    }
}

/// Multiphase decoder for the minimum-delay scheme.
pub fn decode_multiphase_min_delay(trial: &mut Trial<'_>, params: &SchemeParams, codebook: &Codebook, w: &Dmc) -> Result<DecodeResult> {
    debug_assert_eq!(params.regime, Regime::MinDelayMultiphase);
    Decoder::new(params, codebook, w, DecodeOptions::default())?.decode(trial)
}

/// Sliding-window decoder for full sampling.
pub fn decode_full_sampling(trial: &mut Trial<'_>, params: &SchemeParams, codebook: &Codebook, w: &Dmc) -> Result<DecodeResult> {
    debug_assert_eq!(params.regime, Regime::FullSampling);
    Decoder::new(params, codebook, w, DecodeOptions::default())?.decode(trial)
}

/// Multiphase decoder for the small-delay scheme.
pub fn decode_multiphase_small_delay(trial: &mut Trial<'_>, params: &SchemeParams, codebook: &Codebook, w: &Dmc) -> Result<DecodeResult> {
    debug_assert_eq!(params.regime, Regime::SmallDelayMultiphase);
    Decoder::new(params, codebook, w, DecodeOptions::default())?.decode(trial)
}

/// Outcome labels of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Events {
    /// Stopped before the reference time.
    pub e_i: bool,
    /// Stopped within the codeword span with the wrong message.
    pub e_ii: bool,
    /// Stopped within the codeword span after oversampling.
    pub e_iii: bool,
    /// Stopped early within the span with the right message.
    pub e_iv: bool,
    /// Stopped after the codeword span.
    pub e_v: bool,
    /// Wrong message, delay above `d`, or oversampling.
    pub e1: bool,
    /// Wrong message, delay other than `n`, or oversampling.
    pub e2: bool,
}

/// Labels an outcome. The five component events are measured from `sigma`
/// under the small-delay scheme and from `nu` otherwise; the delay in `e1`
/// and `e2` is always `tau - nu + 1`.
pub fn classify_outcome(result: &DecodeResult, trial: &Trial<'_>, params: &SchemeParams, d: u64, rho: f64) -> Events {
    let n = params.n as i64;
    let tau = result.tau as i64;
    let reference = if params.regime == Regime::SmallDelayMultiphase { trial.sigma } else { trial.nu } as i64;
    let wrong = result.decoded != trial.message;
    let over = result.samples_taken as f64 > rho * result.tau as f64;
    let inside = tau >= reference && tau <= reference + n - 1;
    let delay = tau - trial.nu as i64 + 1;
    Events {
        e_i: tau < reference,
        e_ii: inside && wrong,
        e_iii: inside && over,
        e_iv: tau >= reference && tau <= reference + n - 2 && !wrong,
        e_v: tau > reference + n - 1,
        e1: wrong || delay > d as i64 || over,
        e2: wrong || delay != n || over,
    }
}
