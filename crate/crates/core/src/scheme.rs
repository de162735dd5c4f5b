//! Constants of one achievability-scheme instance and random codebooks.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::capacity::{CapacityResult, DispersionResult};
use crate::dmc::{
    detection_divergence, mutual_information, noise_llr_variance, q_inverse, unconditional_information_variance, Dist, Dmc,
};
use crate::error::{Error, Result};
use crate::rng::{stream, DOMAIN_CODEBOOK};

/// Default cap on the asynchronism window `A`.
pub const DEFAULT_MAX_WINDOW: u64 = 1 << 26;
/// Default Berry-Esseen constant.
pub const BERRY_ESSEEN: f64 = 0.56;
/// Default cap on `M * n` codebook symbols.
pub const DEFAULT_CODEBOOK_CAP: u64 = 1 << 28;

/// Rounds a real count up, absorbing floating-point fuzz just above an integer.
pub fn ceil_count(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    MinDelayMultiphase,
    FullSampling,
    SmallDelayMultiphase,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::MinDelayMultiphase => "min_delay",
            Regime::FullSampling => "full_sampling",
            Regime::SmallDelayMultiphase => "small_delay",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_delay" => Ok(Regime::MinDelayMultiphase),
            "full_sampling" | "full" => Ok(Regime::FullSampling),
            "small_delay" => Ok(Regime::SmallDelayMultiphase),
            _ => Err(Error::RangeViolation(format!("unknown regime `{s}`"))),
        }
    }
}

/// How the decoding threshold `gamma` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// `gamma = L (I(P,W) - delta2)` over the decoding window length `L`.
    Asymptotic,
    /// `gamma = ln M + 1.5 ln n`.
    FiniteLength,
}

/// How the block length `Delta(n)` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockRule {
    /// `Delta(n) = n / f^(1 - 2 delta)`.
    Standard,
    /// `Delta(n) = g / rho`, the slow-sampling redefinition.
    InverseRate { g: f64 },
}

/// Code size of a multiphase scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodeSize {
    LnM(f64),
    /// Normal-approximation choice for the sparse minimum-delay scheme,
    /// built from `C(alpha)` and `V_eps(alpha)`.
    Normal { eps: f64, c_alpha: f64, v_eps: f64, berry_esseen: f64 },
}

/// Inputs shared by the two multiphase schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiphaseConfig {
    pub n: usize,
    pub alpha: f64,
    /// `f(n) = rho n`, the expected number of samples per codeword length.
    pub f: f64,
    pub delta: f64,
    /// Defaults to half of `D(PW||W*) - alpha`.
    pub delta1: Option<f64>,
    /// Defaults to half of `I(P,W) - R` under [`GammaRule::Asymptotic`].
    pub delta2: Option<f64>,
    pub p: Dist,
    pub code_size: CodeSize,
    /// Position of each `c_i` inside its admissible interval; `0.5` is the
    /// midpoint.
    pub c_fraction: f64,
    pub max_window: u64,
    pub gamma_rule: GammaRule,
    pub block_rule: BlockRule,
}

impl MultiphaseConfig {
    pub fn new(n: usize, alpha: f64, rho: f64, p: Dist, ln_m: f64) -> Self {
        Self {
            n,
            alpha,
            f: rho * n as f64,
            delta: 0.25,
            delta1: None,
            delta2: None,
            p,
            code_size: CodeSize::LnM(ln_m),
            c_fraction: 0.5,
            max_window: DEFAULT_MAX_WINDOW,
            gamma_rule: GammaRule::FiniteLength,
            block_rule: BlockRule::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullSamplingConfig {
    pub n: usize,
    pub alpha: f64,
    pub eps: f64,
    /// Defaults to half of `D(PW||W*) - alpha`.
    pub delta1: Option<f64>,
    pub berry_esseen: f64,
    /// Overrides the normal-approximation code size.
    pub ln_m: Option<f64>,
    pub max_window: u64,
}

impl FullSamplingConfig {
    pub fn new(n: usize, alpha: f64, eps: f64) -> Self {
        Self { n, alpha, eps, delta1: None, berry_esseen: BERRY_ESSEEN, ln_m: None, max_window: DEFAULT_MAX_WINDOW }
    }
}

/// All constants of one scheme instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub regime: Regime,
    pub n: usize,
    pub alpha: f64,
    pub a_window: u64,
    pub p: Dist,
    pub f_value: f64,
    pub rho: f64,
    pub delta: f64,
    pub delta1: f64,
    /// Under [`GammaRule::FiniteLength`] this is the implied `I - gamma/L`.
    pub delta2: f64,
    /// `Delta(n)`; zero under full sampling.
    pub block_len: usize,
    /// `Delta_1..Delta_l`, ending at `n`.
    pub ladder: Vec<usize>,
    /// `c_2..c_l`.
    pub c: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: f64,
    pub ln_m: f64,
    /// `None` when `M` does not fit the simulator.
    pub m_codewords: Option<u64>,
    /// Length of the final-phase test window (`n - Delta(n)` for minimum delay).
    pub window_len: usize,
    /// Delay `d` used when classifying outcomes.
    pub delay_bound: usize,
    /// `D(PW||W*)`
    pub divergence: f64,
    /// `I(P,W)`
    pub information: f64,
    /// Variance of `ln(PW/W*)` under `PW`.
    pub v1: f64,
    /// `V(P x W || P x PW)`
    pub v2: f64,
}

impl SchemeParams {
    pub fn ell(&self) -> usize {
        self.ladder.len()
    }

    /// `R = ln M / L` over the decoding window.
    pub fn rate(&self) -> f64 {
        self.ln_m / self.window_len as f64
    }

    /// Assembles parameters directly, without the scheme's range checks.
    /// Channel-dependent statistics are left as `NaN`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        regime: Regime,
        n: usize,
        a_window: u64,
        block_len: usize,
        ladder: Vec<usize>,
        beta: Vec<f64>,
        gamma: f64,
        p: Dist,
        m: u64,
    ) -> Self {
        let window_len = match regime {
            Regime::MinDelayMultiphase => n.saturating_sub(block_len),
            _ => n,
        };
        let delay_bound = match regime {
            Regime::SmallDelayMultiphase => n + block_len,
            _ => n,
        };
        Self {
            regime,
            n,
            alpha: (a_window as f64).ln() / n as f64,
            a_window,
            p,
            f_value: f64::NAN,
            rho: 1.0,
            delta: f64::NAN,
            delta1: f64::NAN,
            delta2: f64::NAN,
            block_len,
            c: vec![f64::NAN; ladder.len().saturating_sub(1)],
            ladder,
            beta,
            gamma,
            ln_m: (m as f64).ln(),
            m_codewords: Some(m),
            window_len,
            delay_bound,
            divergence: f64::NAN,
            information: f64::NAN,
            v1: f64::NAN,
            v2: f64::NAN,
        }
    }
}

/// `A = ceil(e^(n alpha))`, refusing windows above `cap`.
pub fn window_size(n: usize, alpha: f64, cap: u64) -> Result<u64> {
    let requested = (n as f64 * alpha).exp();
    if !requested.is_finite() || requested > cap as f64 + 1e-9 {
        return Err(Error::WindowCapExceeded { requested, cap, max_alpha: (cap as f64).ln() / n as f64 });
    }
    Ok(ceil_count(requested).max(1))
}

/// `M = max(2, floor(e^ln_m))`, or `None` when it exceeds exact integers.
fn code_count(ln_m: f64) -> (f64, Option<u64>) {
    if !ln_m.is_finite() {
        return (ln_m, None);
    }
    if ln_m > 52.0 * std::f64::consts::LN_2 {
        return (ln_m, None);
    }
    let m = ((ln_m.exp() + 1e-9).floor() as u64).max(2);
    ((m as f64).ln(), Some(m))
}

struct Stats {
    d: f64,
    i: f64,
    v1: f64,
    v2: f64,
}

fn stats(w: &Dmc, p: &Dist) -> Result<Stats> {
    if p.len() != w.info_size() {
        return Err(Error::DimensionMismatch { expected: w.info_size(), got: p.len() });
    }
    let d = detection_divergence(p, w)?;
    Ok(Stats {
        d,
        i: mutual_information(p, w)?,
        // With D infinite some output never follows the idle input, and the
        // noise log-likelihood ratio has no finite variance.
        v1: if d.is_finite() { noise_llr_variance(p, w)? } else { f64::INFINITY },
        v2: unconditional_information_variance(p, w)?,
    })
}

fn check_delta1(delta1: f64, d: f64, alpha: f64) -> Result<()> {
    if !(delta1 > 0.0 && delta1 < d - alpha) {
        return Err(Error::RangeViolation(format!(
            "delta1 = {delta1} must lie in (0, D(PW||W*) - alpha) = (0, {})",
            d - alpha
        )));
    }
    Ok(())
}

/// Minimum-delay multiphase scheme.
pub fn build_min_delay_params(w: &Dmc, cfg: &MultiphaseConfig) -> Result<SchemeParams> {
    build_multiphase(w, cfg, Regime::MinDelayMultiphase)
}

/// Small-delay multiphase scheme: transmissions start on block boundaries
/// and the final phase tests full length-`n` windows.
pub fn build_small_delay_params(w: &Dmc, cfg: &MultiphaseConfig) -> Result<SchemeParams> {
    build_multiphase(w, cfg, Regime::SmallDelayMultiphase)
}

fn build_multiphase(w: &Dmc, cfg: &MultiphaseConfig, regime: Regime) -> Result<SchemeParams> {
    let n = cfg.n;
    let nf = n as f64;
    if n < 2 {
        return Err(Error::RangeViolation("blocklength n must be at least 2".into()));
    }
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
        return Err(Error::RangeViolation(format!("alpha = {} must be finite and nonnegative", cfg.alpha)));
    }
    if !(cfg.f > 0.0 && cfg.f <= nf) {
        return Err(Error::RangeViolation(format!("f(n) = {} must lie in (0, n]", cfg.f)));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 0.5) {
        return Err(Error::RangeViolation(format!("delta = {} must lie in (0, 1/2)", cfg.delta)));
    }
    if !(cfg.c_fraction > 0.0 && cfg.c_fraction < 1.0) {
        return Err(Error::RangeViolation(format!("c_fraction = {} must lie in (0, 1)", cfg.c_fraction)));
    }
    let st = stats(w, &cfg.p)?;
    let delta1 = cfg.delta1.unwrap_or(0.5 * (st.d - cfg.alpha));
    check_delta1(delta1, st.d, cfg.alpha)?;
    let rho = cfg.f / nf;

    let block = match cfg.block_rule {
        BlockRule::Standard => ceil_count(nf / cfg.f.powf(1.0 - 2.0 * cfg.delta)),
        BlockRule::InverseRate { g } => ceil_count(g / rho),
    }
    .max(1) as usize;
    if block >= n {
        return Err(Error::RangeViolation(format!("block length Delta(n) = {block} must be below n = {n}")));
    }
    let mut a_window = window_size(n, cfg.alpha, cfg.max_window)?;
    if regime == Regime::SmallDelayMultiphase {
        a_window = a_window.div_ceil(block as u64) * block as u64;
        if a_window > cfg.max_window {
            return Err(Error::WindowCapExceeded {
                requested: a_window as f64,
                cap: cfg.max_window,
                max_alpha: (cfg.max_window as f64).ln() / nf,
            });
        }
    }
    let window_len = match regime {
        Regime::MinDelayMultiphase => n - block,
        _ => n,
    };

    let slope = st.d - delta1;
    let (ladder, c, beta) = build_ladder(n, ceil_count(cfg.f.powf(cfg.delta)).max(1) as usize, slope, window_len, cfg.c_fraction)?;

    let ln_m = match cfg.code_size {
        CodeSize::LnM(v) => v,
        CodeSize::Normal { eps, c_alpha, v_eps, berry_esseen } => {
            let nd = (n - block) as f64;
            let f_sqrt = rho * nf.sqrt();
            let tail: f64 = ladder[..ladder.len() - 1].iter().map(|d| 1.0 / *d as f64).sum();
            let arg = eps
                - (berry_esseen + 4.0) / nf.sqrt()
                - f_sqrt.powf(-cfg.delta / 2.0)
                - st.v1 / (delta1 * delta1 * nd)
                - st.v1 / (delta1 * delta1) * tail;
            if !(arg > 0.0 && arg < 1.0) {
                return Err(Error::EpsilonTooSmall { arg });
            }
            nd * c_alpha - 1.5 * nf.ln() - (nd * v_eps).sqrt() * q_inverse(arg)?
        }
    };
    let (ln_m, m_codewords) = code_count(ln_m);
    let l = window_len as f64;
    let (gamma, delta2) = match cfg.gamma_rule {
        GammaRule::Asymptotic => {
            let rate = ln_m / l;
            let delta2 = cfg.delta2.unwrap_or(0.5 * (st.i - rate));
            if !(delta2 > 0.0 && delta2 < st.i - rate) {
                return Err(Error::RangeViolation(format!(
                    "delta2 = {delta2} must lie in (0, I(P,W) - R) = (0, {})",
                    st.i - rate
                )));
            }
            (l * (st.i - delta2), delta2)
        }
        GammaRule::FiniteLength => {
            let gamma = ln_m + 1.5 * nf.ln();
            (gamma, st.i - gamma / l)
        }
    };
    if !(gamma > 0.0) {
        return Err(Error::RangeViolation(format!("gamma = {gamma} must be positive")));
    }
    Ok(SchemeParams {
        regime,
        n,
        alpha: cfg.alpha,
        a_window,
        p: cfg.p.clone(),
        f_value: cfg.f,
        rho,
        delta: cfg.delta,
        delta1,
        delta2,
        block_len: block,
        ladder,
        c,
        beta,
        gamma,
        ln_m,
        m_codewords,
        window_len,
        delay_bound: if regime == Regime::SmallDelayMultiphase { n + block } else { n },
        divergence: st.d,
        information: st.i,
        v1: st.v1,
        v2: st.v2,
    })
}

/// `Delta_1 = first`, `Delta_i = min(ceil(e^(c_i Delta_(i-1))), n)`.
///
/// Confirmation phases use `c_i = frac * slope`; the final `c_l` is placed at
/// `frac` of its admissible range, restricted so the ladder still reaches `n`.
#[allow(clippy::type_complexity)]
fn build_ladder(n: usize, first: usize, slope: f64, window_len: usize, frac: f64) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    if first >= n {
        return Err(Error::RangeViolation(format!("Delta_1 = {first} must be below n = {n}")));
    }
    let nf = n as f64;
    let mut ladder = vec![first];
    let mut c = Vec::new();
    let mut beta = vec![first as f64 * slope];
    let ci = frac * slope;
    loop {
        let prev = *ladder.last().unwrap() as f64;
        let grown = (ci * prev).exp();
        if grown >= nf {
            break;
        }
        let next = ceil_count(grown) as usize;
        if next as f64 <= prev {
            return Err(Error::RangeViolation(format!(
                "ladder stalls at Delta = {prev}: e^(c Delta) = {grown:.3} does not grow (c = {ci:.4}); \
                 raise f(n)^delta, c_fraction, or D(PW||W*) - delta1"
            )));
        }
        ladder.push(next);
        c.push(ci);
        beta.push(next as f64 * slope);
        if ladder.len() > 64 {
            return Err(Error::RangeViolation("ladder does not reach n".into()));
        }
    }
    let prev = *ladder.last().unwrap() as f64;
    let beta_last = window_len as f64 * slope;
    let hi = beta_last / nf;
    let lo = nf.ln() / prev;
    let c_last = if frac * hi >= lo { frac * hi } else { lo + frac * (hi - lo) };
    if !(lo < hi) {
        return Err(Error::RangeViolation(format!(
            "final phase needs c_l in ({lo:.4}, beta_l/n = {hi:.4}) to reach n; the interval is empty"
        )));
    }
    ladder.push(n);
    c.push(c_last);
    beta.push(beta_last);
    Ok((ladder, c, beta))
}

/// Full-sampling scheme with the normal-approximation code size
/// `ln M = nC - 1.5 ln n - sqrt(nV) Q^-1(eps - (B+3)/sqrt(n) - v1/(n delta1^2))`.
pub fn build_full_sampling_params(
    w: &Dmc,
    cfg: &FullSamplingConfig,
    cap: &CapacityResult,
    disp: &DispersionResult,
) -> Result<SchemeParams> {
    let n = cfg.n;
    let nf = n as f64;
    if n < 2 {
        return Err(Error::RangeViolation("blocklength n must be at least 2".into()));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(Error::DomainError(cfg.eps));
    }
    let p = cap.p_star.clone();
    let st = stats(w, &p)?;
    let delta1 = cfg.delta1.unwrap_or(0.5 * (st.d - cfg.alpha));
    check_delta1(delta1, st.d, cfg.alpha)?;
    let a_window = window_size(n, cfg.alpha, cfg.max_window)?;
    let ln_m = match cfg.ln_m {
        Some(v) => v,
        None => full_sampling_ln_m(n, cfg.eps, cap.c_alpha, disp.v_eps, st.v1, delta1, cfg.berry_esseen)?,
    };
    let (ln_m, m_codewords) = code_count(ln_m);
    let gamma = ln_m + 1.5 * nf.ln();
    Ok(SchemeParams {
        regime: Regime::FullSampling,
        n,
        alpha: cfg.alpha,
        a_window,
        p,
        f_value: nf,
        rho: 1.0,
        delta: 0.0,
        delta1,
        delta2: st.i - gamma / nf,
        block_len: 0,
        ladder: vec![n],
        c: Vec::new(),
        beta: vec![nf * (st.d - delta1)],
        gamma,
        ln_m,
        m_codewords,
        window_len: n,
        delay_bound: n,
        divergence: st.d,
        information: st.i,
        v1: st.v1,
        v2: st.v2,
    })
}

/// The full-sampling code-size formula on its own.
pub fn full_sampling_ln_m(n: usize, eps: f64, c_alpha: f64, v_eps: f64, v1: f64, delta1: f64, berry_esseen: f64) -> Result<f64> {
    let nf = n as f64;
    let arg = eps - (berry_esseen + 3.0) / nf.sqrt() - v1 / (nf * delta1 * delta1);
    if !(arg > 0.0 && arg < 1.0) {
        return Err(Error::EpsilonTooSmall { arg });
    }
    Ok(nf * c_alpha - 1.5 * nf.ln() - (nf * v_eps).sqrt() * q_inverse(arg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    Iid,
    ConstantComposition,
}

/// `M` codewords of length `n` over information-input indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    m: usize,
    n: usize,
    symbols: Vec<u8>,
    pub mode: Composition,
    pub seed: u64,
}

impl Codebook {
    /// Wraps explicit codewords.
    pub fn from_codewords(words: Vec<Vec<u8>>) -> Result<Self> {
        let n = words.first().map_or(0, Vec::len);
        if words.is_empty() || n == 0 || words.iter().any(|w| w.len() != n) {
            return Err(Error::RangeViolation("codewords must be nonempty and of equal length".into()));
        }
        Ok(Self { m: words.len(), n, symbols: words.concat(), mode: Composition::Iid, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Codeword `m` (zero-based).
    pub fn codeword(&self, m: usize) -> &[u8] {
        &self.symbols[m * self.n..(m + 1) * self.n]
    }
}

/// Draws a codebook; reproducible for a fixed seed.
pub fn generate_codebook(p: &Dist, n: usize, m: u64, mode: Composition, seed: u64, cap: u64) -> Result<Codebook> {
    if m == 0 || n == 0 {
        return Err(Error::RangeViolation("codebook needs M >= 1 and n >= 1".into()));
    }
    if p.len() > 256 {
        return Err(Error::RangeViolation("at most 256 information inputs are supported".into()));
    }
    let total = (m as u128) * (n as u128);
    if total > cap as u128 {
        return Err(Error::OutOfMemory { m: m as f64, n, cap });
    }
    let m = m as usize;
    let mut symbols = Vec::with_capacity(m * n);
    match mode {
        Composition::Iid => {
            let cdf: Vec<f64> = p.iter().scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            }).collect();
            let last = p.iter().rposition(|v| *v > 0.0).unwrap_or(0);
            for word in 0..m {
                let mut rng = stream(seed, DOMAIN_CODEBOOK, word as u64);
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let x = cdf.iter().position(|c| u < *c).unwrap_or(last).min(last);
                    symbols.push(x as u8);
                }
            }
        }
        Composition::ConstantComposition => {
            let base = composition_counts(p, n);
            let mut pattern: Vec<u8> = Vec::with_capacity(n);
            for (x, &cnt) in base.iter().enumerate() {
                pattern.extend(std::iter::repeat_n(x as u8, cnt));
            }
            for word in 0..m {
                let mut rng = stream(seed, DOMAIN_CODEBOOK, word as u64);
                let mut w = pattern.clone();
                w.shuffle(&mut rng);
                symbols.extend_from_slice(&w);
            }
        }
    }
    Ok(Codebook { m, n, symbols, mode, seed })
}

/// Largest-remainder rounding of `n P` to integer counts summing to `n`.
pub fn composition_counts(p: &Dist, n: usize) -> Vec<usize> {
    let exact: Vec<f64> = p.iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|a, b| (exact[*b] - exact[*b].floor()).total_cmp(&(exact[*a] - exact[*a].floor())).then(a.cmp(b)));
    for &x in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if p[x] > 0.0 {
            counts[x] += 1;
            rest -= 1;
        }
    }
    counts
}
