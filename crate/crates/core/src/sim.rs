//! Lazily sampled output process of one asynchronous transmission.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::dmc::Dmc;
use crate::error::{Error, Result};
use crate::rng::{stream, DOMAIN_OUTPUT, DOMAIN_TRIAL};
use crate::scheme::{Codebook, SchemeParams};

/// When transmission starts relative to the arrival time `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartPolicy {
    /// `sigma = nu`
    Immediate,
    /// `sigma` is the first multiple of `Delta(n)` at or after `nu`.
    BlockAligned,
}

/// Cumulative output laws of every input row.
#[derive(Debug, Clone)]
pub struct OutputSampler {
    info: Vec<Vec<f64>>,
    noise: Vec<f64>,
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = row
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    // The last output with positive mass absorbs rounding in the total.
    if let Some(last) = row.iter().rposition(|v| *v > 0.0) {
        out[last..].iter_mut().for_each(|c| *c = f64::INFINITY);
    }
    out
}

impl OutputSampler {
    pub fn new(w: &Dmc) -> Self {
        Self {
            info: (0..w.info_size()).map(|k| cumulative(w.info_row(k))).collect(),
            noise: cumulative(w.noise()),
        }
    }

    /// Output drawn from `cdf` with the uniform `u`.
    fn draw(cdf: &[f64], u: f64) -> usize {
        cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1)
    }
}

/// One trial: arrival time, message, and a lazily drawn output sequence
/// over times `1..=A+n-1`.
#[derive(Debug, Clone)]
pub struct Trial<'a> {
    pub a_window: u64,
    pub n: usize,
    pub nu: u64,
    pub sigma: u64,
    /// Zero-based message index.
    pub message: usize,
    pub seed: u64,
    /// `false` for a pure-noise timeline.
    pub transmits: bool,
    codebook: &'a Codebook,
    sampler: &'a OutputSampler,
    outputs: ChaCha8Rng,
    cache: HashMap<u64, u32>,
    draws: u64,
}

impl<'a> Trial<'a> {
    /// Draws `nu` and the message uniformly and places the codeword per `policy`.
    pub fn new(params: &SchemeParams, codebook: &'a Codebook, sampler: &'a OutputSampler, policy: StartPolicy, seed: u64) -> Self {
        let mut rng = stream(seed, DOMAIN_TRIAL, 0);
        let nu = rng.random_range(1..=params.a_window);
        let message = rng.random_range(0..codebook.len());
        Self::with_arrival(params, codebook, sampler, policy, seed, nu, message)
    }

    /// Trial with a given arrival time and message.
    pub fn with_arrival(
        params: &SchemeParams,
        codebook: &'a Codebook,
        sampler: &'a OutputSampler,
        policy: StartPolicy,
        seed: u64,
        nu: u64,
        message: usize,
    ) -> Self {
        let block = params.block_len as u64;
        let sigma = match policy {
            StartPolicy::BlockAligned if block > 0 => nu.div_ceil(block) * block,
            _ => nu,
        };
        Self {
            a_window: params.a_window,
            n: params.n,
            nu,
            sigma,
            message,
            seed,
            transmits: true,
            codebook,
            sampler,
            outputs: stream(seed, DOMAIN_OUTPUT, 0),
            cache: HashMap::new(),
            draws: 0,
        }
    }

    /// Timeline with no transmission at all.
    pub fn noise_only(params: &SchemeParams, codebook: &'a Codebook, sampler: &'a OutputSampler, seed: u64) -> Self {
        let mut t = Self::with_arrival(params, codebook, sampler, StartPolicy::Immediate, seed, 1, 0);
        t.transmits = false;
        t
    }

    pub fn horizon(&self) -> u64 {
        self.a_window + self.n as u64 - 1
    }

    /// Output at time `t`, generated on first query and cached.
    pub fn sample_at(&mut self, t: u64) -> Result<usize> {
        if t == 0 || t > self.horizon() {
            return Err(Error::TimeOutOfRange { t, max: self.horizon() });
        }
        if let Some(&y) = self.cache.get(&t) {
            return Ok(y as usize);
        }
        self.outputs.set_word_pos(2 * t as u128);
        let u = (self.outputs.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        self.draws += 1;
        let cdf = if self.transmits && t >= self.sigma && t < self.sigma + self.n as u64 {
            let x = self.codebook.codeword(self.message)[(t - self.sigma) as usize];
            &self.sampler.info[x as usize]
        } else {
            &self.sampler.noise
        };
        let y = OutputSampler::draw(cdf, u);
        self.cache.insert(t, y as u32);
        Ok(y)
    }

    /// Number of output draws made so far.
    pub fn generator_calls(&self) -> u64 {
        self.draws
    }

    pub fn codebook(&self) -> &'a Codebook {
        self.codebook
    }
}
