//! Time-stepped transcription of the receiver rules, and random micro
//! instances for comparing it with the library decoders.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsync::decoders::{DecodeOptions, DecodeResult, Decoder};
use sparsync::rng::{stream, DOMAIN_DECODER};
use sparsync::scheme::{Codebook, Regime, SchemeParams};
use sparsync::sim::{OutputSampler, StartPolicy, Trial};
use sparsync::{Dist, Dmc};

fn log_ratio(a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (true, true) => (a / b).ln(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => 0.0,
    }
}

/// `r(y^k) = sum ln(PW(y)/W(y|star))`, with any `-inf` term winning.
fn detection(ys: &[usize], pw: &[f64], noise: &[f64]) -> f64 {
    let terms: Vec<f64> = ys.iter().map(|&y| log_ratio(pw[y], noise[y])).collect();
    if terms.iter().any(|t| *t == f64::NEG_INFINITY) {
        f64::NEG_INFINITY
    } else if terms.iter().any(|t| *t == f64::INFINITY) {
        f64::INFINITY
    } else {
        terms.iter().sum()
    }
}

enum Mode {
    Idle,
    Phase { index: usize, taken: usize },
    Final { taken: usize },
}

/// Steps through every time `1..=A+n-1`, deciding at each one whether to
/// sample and whether to stop.
pub fn brute_force(trial: &mut Trial<'_>, params: &SchemeParams, codebook: &Codebook, w: &Dmc, suffix: bool) -> DecodeResult {
    let k = w.info_size();
    let ny = w.output_size();
    let pw: Vec<f64> = (0..ny).map(|y| (0..k).map(|x| params.p[x] * w.info_row(x)[y]).sum()).collect();
    let noise = w.noise().to_vec();
    let n = params.n;
    let a = params.a_window;
    let horizon = a + n as u64 - 1;
    let delta = params.block_len as u64;
    let ell = params.ladder.len();
    let small = params.regime == Regime::SmallDelayMultiphase;
    let full = params.regime == Regime::FullSampling;
    let is_block_start = |t: u64| {
        if small {
            t % delta == 0 && t <= a
        } else {
            (t - 1) % delta == 0 && t <= a
        }
    };
    let win = if params.regime == Regime::MinDelayMultiphase { n - params.block_len } else { n };
    let offset = if params.regime == Regime::MinDelayMultiphase && suffix { params.block_len } else { 0 };

    let mut times = Vec::new();
    let mut block: Vec<usize> = Vec::new();
    let mut all: Vec<usize> = Vec::new();
    let mut mode = Mode::Idle;

    let seed = trial.seed;
    let test_codewords = |ys: &[usize], t: u64| -> Option<usize> {
        let hits: Vec<usize> = (0..codebook.len())
            .filter(|&m| {
                let cw = codebook.codeword(m);
                let mut s = 0.0;
                for j in 0..ys.len() {
                    let x = cw[offset + j] as usize;
                    s += log_ratio(w.info_row(x)[ys[j]], pw[ys[j]]);
                }
                s >= params.gamma
            })
            .collect();
        match hits.len() {
            0 => None,
            1 => Some(hits[0]),
            h => Some(hits[stream(seed, DOMAIN_DECODER, t).random_range(0..h)]),
        }
    };

    for t in 1..=horizon {
        if full {
            let y = trial.sample_at(t).unwrap();
            times.push(t);
            all.push(y);
            if all.len() >= n {
                let ys = &all[all.len() - n..];
                if detection(ys, &pw, &noise) >= params.beta[0] {
                    if let Some(m) = test_codewords(ys, t) {
                        return result(times, t, m, false);
                    }
                }
            }
            continue;
        }
        if let Mode::Idle = mode {
            if is_block_start(t) {
                block.clear();
                mode = if ell == 1 { Mode::Final { taken: 0 } } else { Mode::Phase { index: 0, taken: 0 } };
            } else {
                continue;
            }
        }
        let y = trial.sample_at(t).unwrap();
        times.push(t);
        block.push(y);
        mode = match mode {
            Mode::Phase { index, taken } => {
                let taken = taken + 1;
                if taken < params.ladder[index] {
                    Mode::Phase { index, taken }
                } else if detection(&block[block.len() - taken..], &pw, &noise) < params.beta[index] {
                    Mode::Idle
                } else if index + 2 == ell {
                    Mode::Final { taken: 0 }
                } else {
                    Mode::Phase { index: index + 1, taken: 0 }
                }
            }
            Mode::Final { taken } => {
                let taken = taken + 1;
                if block.len() >= win {
                    let ys = &block[block.len() - win..];
                    if detection(ys, &pw, &noise) >= params.beta[ell - 1] {
                        if let Some(m) = test_codewords(ys, t) {
                            return result(times, t, m, false);
                        }
                    }
                }
                if taken == n { Mode::Idle } else { Mode::Final { taken } }
            }
            Mode::Idle => unreachable!(),
        };
    }
    if times.last() != Some(&horizon) {
        trial.sample_at(horizon).unwrap();
        times.push(horizon);
    }
    let m = stream(trial.seed, DOMAIN_DECODER, horizon).random_range(0..codebook.len());
    result(times, horizon, m, true)
}

fn result(times: Vec<u64>, tau: u64, decoded: usize, forced: bool) -> DecodeResult {
    DecodeResult {
        tau,
        samples_taken: times.len() as u64,
        sampling_times: Some(times),
        decoded,
        forced_random: forced,
        tie_broken: false,
        phase_trace: None,
    }
}

/// A random scheme instance with `A <= 16`, `n <= 4`, `M <= 4`, at most two
/// information inputs plus the idle input, and two or three outputs.
pub struct Micro {
    pub w: Dmc,
    pub params: SchemeParams,
    pub codebook: Codebook,
    pub seed: u64,
}

fn random_row(rng: &mut ChaCha8Rng, ny: usize) -> Vec<f64> {
    loop {
        let row: Vec<f64> = (0..ny).map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() }).collect();
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            return row.iter().map(|v| v / s).collect();
        }
    }
}

pub fn micro_instance(regime: Regime, index: u64) -> Micro {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ index.wrapping_mul(0x9e37_79b9) ^ regime as u64);
    let k = rng.random_range(1..=2usize);
    let ny = rng.random_range(2..=3usize);
    let w = loop {
        let rows: Vec<Vec<f64>> = (0..k).map(|_| random_row(&mut rng, ny)).collect();
        let noise = random_row(&mut rng, ny);
        if let Ok(w) = Dmc::with_noise(rows, noise) {
            break w;
        }
    };
    let p = if k == 1 { Dist::uniform(1) } else { Dist::normalized(vec![rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)]).unwrap() };
    let n = rng.random_range(2..=4usize);
    let m = rng.random_range(1..=4u64);
    let (block, a) = match regime {
        Regime::FullSampling => (0, rng.random_range(1..=16u64)),
        Regime::MinDelayMultiphase => (rng.random_range(1..n), rng.random_range(1..=16u64)),
        Regime::SmallDelayMultiphase => {
            let b = rng.random_range(1..=n);
            (b, b as u64 * rng.random_range(1..=(16 / b as u64)))
        }
    };
    let ladder: Vec<usize> = match regime {
        Regime::FullSampling => vec![n],
        _ => {
            let mut l: Vec<usize> = (1..n).filter(|_| rng.random_bool(0.4)).collect();
            l.push(n);
            l
        }
    };
    let pw: Vec<f64> = (0..ny).map(|y| (0..k).map(|x| p[x] * w.info_row(x)[y]).sum()).collect();
    let scale: f64 = pw
        .iter()
        .zip(w.noise())
        .map(|(a, b)| log_ratio(*a, *b))
        .filter(|v| v.is_finite())
        .map(f64::abs)
        .fold(0.5, f64::max);
    let beta: Vec<f64> = ladder.iter().map(|&d| d as f64 * scale * rng.random_range(-1.2..1.2)).collect();
    let gamma = n as f64 * rng.random_range(-0.5..1.5);
    let params = SchemeParams::from_parts(regime, n, a, block, ladder, beta, gamma, p.clone(), m);
    let words: Vec<Vec<u8>> = (0..m).map(|_| (0..n).map(|_| if rng.random_bool(p[0]) { 0 } else { (k - 1) as u8 }).collect()).collect();
    let codebook = Codebook::from_codewords(words).unwrap();
    Micro { w, params, codebook, seed: rng.random() }
}

/// Runs the library decoder and the transcription on one instance; returns
/// `true` when `tau`, the sampled set, the estimate and the deadline flag agree.
pub fn agrees(micro: &Micro, suffix: bool) -> bool {
    use sparsync::decoders::Alignment;
    let policy = if micro.params.regime == Regime::SmallDelayMultiphase { StartPolicy::BlockAligned } else { StartPolicy::Immediate };
    let sampler = OutputSampler::new(&micro.w);
    let opts = DecodeOptions {
        record_times: true,
        record_trace: false,
        alignment: if suffix { Alignment::Suffix } else { Alignment::Prefix },
    };
    let dec = Decoder::new(&micro.params, &micro.codebook, &micro.w, opts).unwrap();
    let mut t1 = Trial::new(&micro.params, &micro.codebook, &sampler, policy, micro.seed);
    let mut t2 = Trial::new(&micro.params, &micro.codebook, &sampler, policy, micro.seed);
    let got = dec.decode(&mut t1).unwrap();
    let want = brute_force(&mut t2, &micro.params, &micro.codebook, &micro.w, suffix);
    got.tau == want.tau
        && got.sampling_times == want.sampling_times
        && got.samples_taken == want.samples_taken
        && got.decoded == want.decoded
        && got.forced_random == want.forced_random
}
